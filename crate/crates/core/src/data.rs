//! Sparse rated instances, dataset ingestion, duplicate resolution and
//! stratified holdout splits.
//!
//! The text format is svmlight-like, one instance per line:
//!
//! ```text
//! # comment
//! id:site-17 3 1:0.25 4:-1.5
//! 0 2:7
//! ```
//!
//! The optional `id:` token may come first or directly after the rating; without it
//! the instance id is its 1-based line number. Features that do not appear on a line
//! are *missing*, never implicit zeros.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: rating {rating} outside [0, {max}]")]
    RatingOutOfRange { line: usize, rating: usize, max: usize },
    #[error("line {line}: feature {index} appears more than once")]
    DuplicateFeature { line: usize, index: u32 },
    #[error("line {line}: id {id:?} is already used")]
    DuplicateId { line: usize, id: String },
    #[error("dataset is empty")]
    Empty,
    #[error("number of ratings must be at least 2, got {0}")]
    TooFewRatings(usize),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One rated example with a sparse feature vector.
///
/// Features are kept sorted by index, so equality of two instances' feature maps is
/// plain slice equality.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    id: String,
    features: Vec<(u32, f64)>,
    rating: usize,
}

impl Instance {
    pub fn new(
        id: impl Into<String>,
        mut features: Vec<(u32, f64)>,
        rating: usize,
    ) -> Result<Self, DataError> {
        let id = id.into();
        if id.is_empty() || id.contains(|c: char| c.is_whitespace() || c == '#') {
            return Err(DataError::InvalidInstance(format!(
                "id {id:?} must be non-empty without whitespace or '#'"
            )));
        }
        features.sort_by_key(|&(idx, _)| idx);
        for (k, &(idx, value)) in features.iter().enumerate() {
            if idx == 0 {
                return Err(DataError::InvalidInstance("feature index 0".into()));
            }
            if !value.is_finite() {
                return Err(DataError::InvalidInstance(format!(
                    "feature {idx} has non-finite value"
                )));
            }
            if k > 0 && features[k - 1].0 == idx {
                return Err(DataError::InvalidInstance(format!(
                    "feature {idx} given twice"
                )));
            }
        }
        Ok(Self {
            id,
            features,
            rating,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn rating(&self) -> usize {
        self.rating
    }

    /// Present features, sorted by index.
    pub fn features(&self) -> &[(u32, f64)] {
        &self.features
    }

    /// Value of a feature, `None` when missing.
    pub fn feature(&self, index: u32) -> Option<f64> {
        self.features
            .binary_search_by_key(&index, |&(idx, _)| idx)
            .ok()
            .map(|k| self.features[k].1)
    }

    pub fn max_feature(&self) -> u32 {
        self.features.last().map_or(0, |&(idx, _)| idx)
    }
}

/// An ordered collection of instances rated in `0..num_ratings`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    instances: Vec<Instance>,
    num_ratings: usize,
    feature_dimension: u32,
}

impl Dataset {
    /// Builds a dataset, checking rating range and id uniqueness. Empty datasets are
    /// allowed here (a holdout side can be empty); parsing rejects them.
    pub fn new(instances: Vec<Instance>, num_ratings: usize) -> Result<Self, DataError> {
        if num_ratings < 2 {
            return Err(DataError::TooFewRatings(num_ratings));
        }
        let mut seen = HashMap::with_capacity(instances.len());
        for (pos, inst) in instances.iter().enumerate() {
            if inst.rating >= num_ratings {
                return Err(DataError::RatingOutOfRange {
                    line: pos + 1,
                    rating: inst.rating,
                    max: num_ratings - 1,
                });
            }
            if seen.insert(inst.id.as_str(), pos).is_some() {
                return Err(DataError::DuplicateId {
                    line: pos + 1,
                    id: inst.id.clone(),
                });
            }
        }
        Ok(Self::from_parts(instances, num_ratings))
    }

    fn from_parts(instances: Vec<Instance>, num_ratings: usize) -> Self {
        let feature_dimension = instances.iter().map(Instance::max_feature).max().unwrap_or(0);
        Self {
            instances,
            num_ratings,
            feature_dimension,
        }
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Number of rating levels `L`.
    pub fn num_ratings(&self) -> usize {
        self.num_ratings
    }

    /// Largest feature index present anywhere (0 if no features at all).
    pub fn feature_dimension(&self) -> u32 {
        self.feature_dimension
    }

    /// Instance positions grouped by rating: entry `r` lists the instances rated `r`.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        let mut parts = vec![Vec::new(); self.num_ratings];
        for (pos, inst) in self.instances.iter().enumerate() {
            parts[inst.rating].push(pos);
        }
        parts
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_ratings];
        for inst in &self.instances {
            sizes[inst.rating] += 1;
        }
        sizes
    }

    pub fn distinct_ratings(&self) -> usize {
        self.class_sizes().iter().filter(|&&n| n > 0).count()
    }

    /// The instances at `positions`, in the given order, keeping `L`.
    pub fn subset(&self, positions: &[usize]) -> Dataset {
        let instances = positions.iter().map(|&p| self.instances[p].clone()).collect();
        Self::from_parts(instances, self.num_ratings)
    }

    /// Writes the dataset in the text format read by [`parse_dataset`]. Feature values
    /// use the shortest representation that parses back to the same `f64`.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        for inst in &self.instances {
            write!(out, "id:{} {}", inst.id, inst.rating)?;
            for &(idx, value) in &inst.features {
                write!(out, " {idx}:{value:?}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("dataset text is UTF-8")
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn malformed(line: usize, message: impl Into<String>) -> DataError {
    DataError::Malformed {
        line,
        message: message.into(),
    }
}

fn parse_line(line_no: usize, body: &str) -> Result<Instance, DataError> {
    let mut tokens = body.split_whitespace().peekable();
    let mut id = None;
    if let Some(tok) = tokens.peek() {
        if let Some(rest) = tok.strip_prefix("id:") {
            id = Some(rest.to_string());
            tokens.next();
        }
    }
    let rating_tok = tokens
        .next()
        .ok_or_else(|| malformed(line_no, "missing rating"))?;
    let rating: usize = rating_tok
        .parse()
        .map_err(|_| malformed(line_no, format!("invalid rating {rating_tok:?}")))?;
    if id.is_none() {
        if let Some(tok) = tokens.peek() {
            if let Some(rest) = tok.strip_prefix("id:") {
                id = Some(rest.to_string());
                tokens.next();
            }
        }
    }

    let mut features = Vec::new();
    for tok in tokens {
        let (idx_str, val_str) = tok
            .split_once(':')
            .ok_or_else(|| malformed(line_no, format!("expected <index>:<value>, got {tok:?}")))?;
        let idx: u32 = idx_str
            .parse()
            .map_err(|_| malformed(line_no, format!("invalid feature index {idx_str:?}")))?;
        if idx == 0 {
            return Err(malformed(line_no, "feature indices start at 1"));
        }
        let value: f64 = val_str
            .parse()
            .map_err(|_| malformed(line_no, format!("invalid feature value {val_str:?}")))?;
        if !value.is_finite() {
            return Err(malformed(line_no, format!("non-finite feature value {val_str:?}")));
        }
        features.push((idx, value));
    }
    features.sort_by_key(|&(idx, _)| idx);
    if let Some(w) = features.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(DataError::DuplicateFeature {
            line: line_no,
            index: w[0].0,
        });
    }

    let id = id.unwrap_or_else(|| line_no.to_string());
    if id.is_empty() {
        return Err(malformed(line_no, "empty id"));
    }
    Ok(Instance {
        id,
        features,
        rating,
    })
}

/// Reads a dataset. With `expected_ratings = Some(L)` every rating must lie in
/// `0..L`; otherwise `L` is one more than the largest rating seen (and at least 2).
pub fn parse_dataset<R: BufRead>(
    reader: R,
    expected_ratings: Option<usize>,
) -> Result<Dataset, DataError> {
    if let Some(l) = expected_ratings {
        if l < 2 {
            return Err(DataError::TooFewRatings(l));
        }
    }
    let mut instances = Vec::new();
    let mut lines_of = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let body = match line.find('#') {
            Some(p) => &line[..p],
            None => &line[..],
        };
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        let inst = parse_line(line_no, body)?;
        if let Some(l) = expected_ratings {
            if inst.rating >= l {
                return Err(DataError::RatingOutOfRange {
                    line: line_no,
                    rating: inst.rating,
                    max: l - 1,
                });
            }
        }
        instances.push(inst);
        lines_of.push(line_no);
    }
    if instances.is_empty() {
        return Err(DataError::Empty);
    }

    let mut seen = HashMap::with_capacity(instances.len());
    for (inst, &line) in instances.iter().zip(&lines_of) {
        if seen.insert(inst.id.as_str(), line).is_some() {
            return Err(DataError::DuplicateId {
                line,
                id: inst.id.clone(),
            });
        }
    }

    let max_rating = instances.iter().map(Instance::rating).max().unwrap_or(0);
    let num_ratings = expected_ratings.unwrap_or_else(|| (max_rating + 1).max(2));
    Ok(Dataset::from_parts(instances, num_ratings))
}

pub fn parse_dataset_str(text: &str, expected_ratings: Option<usize>) -> Result<Dataset, DataError> {
    parse_dataset(text.as_bytes(), expected_ratings)
}

fn feature_key(inst: &Instance) -> Vec<(u32, u64)> {
    // -0.0 and 0.0 compare equal, so they must hash equal too
    inst.features
        .iter()
        .map(|&(idx, v)| (idx, if v == 0.0 { 0 } else { v.to_bits() }))
        .collect()
}

/// Collapses instances with identical feature maps into their first occurrence,
/// which takes the highest rating of the group.
pub fn deduplicate(d: &Dataset) -> Dataset {
    let mut first_of: HashMap<Vec<(u32, u64)>, usize> = HashMap::with_capacity(d.len());
    let mut kept: Vec<Instance> = Vec::with_capacity(d.len());
    for inst in &d.instances {
        match first_of.get(&feature_key(inst)) {
            Some(&k) => kept[k].rating = kept[k].rating.max(inst.rating),
            None => {
                first_of.insert(feature_key(inst), kept.len());
                kept.push(inst.clone());
            }
        }
    }
    Dataset::from_parts(kept, d.num_ratings)
}

/// Parameters of repeated stratified holdout validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    holdout_fraction: f64,
    repetitions: usize,
    seed: u64,
}

impl SplitSpec {
    pub fn new(holdout_fraction: f64, repetitions: usize, seed: u64) -> Result<Self, DataError> {
        if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
            return Err(DataError::InvalidSplit(format!(
                "holdout fraction {holdout_fraction} not in (0, 1)"
            )));
        }
        if repetitions == 0 {
            return Err(DataError::InvalidSplit("repetitions must be at least 1".into()));
        }
        Ok(Self {
            holdout_fraction,
            repetitions,
            seed,
        })
    }

    pub fn holdout_fraction(&self) -> f64 {
        self.holdout_fraction
    }

    pub fn repetitions(&self) -> usize {
        self.repetitions
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            holdout_fraction: 1.0 / 3.0,
            repetitions: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HoldoutSplit {
    pub train: Dataset,
    pub holdout: Dataset,
    /// Ratings with a single instance, kept entirely on the train side.
    pub unstratified: Vec<usize>,
}

/// SplitMix64 finalizer, used to derive independent seeds from a base seed.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stratified random split for one holdout repetition.
///
/// Each rating class with at least two instances sends `ceil(n * fraction)` of them to
/// the holdout side, capped so at least one stays in train. Both sides keep input order.
pub fn split_holdout(
    d: &Dataset,
    s: &SplitSpec,
    repetition_index: usize,
) -> Result<HoldoutSplit, DataError> {
    if d.is_empty() {
        return Err(DataError::Empty);
    }
    if repetition_index >= s.repetitions {
        return Err(DataError::InvalidSplit(format!(
            "repetition {repetition_index} out of range for {} repetitions",
            s.repetitions
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(s.seed, repetition_index as u64));
    let mut in_holdout = vec![false; d.len()];
    let mut unstratified = Vec::new();
    for (rating, mut members) in d.partition().into_iter().enumerate() {
        match members.len() {
            0 => {}
            1 => {
                log::warn!("rating {rating} has a single instance; kept in train");
                unstratified.push(rating);
            }
            n => {
                // tolerance keeps e.g. 10 * 0.3 from rounding up to 4
                let want = ((n as f64) * s.holdout_fraction - 1e-9).ceil() as usize;
                let take = want.clamp(1, n - 1);
                members.shuffle(&mut rng);
                for &p in &members[..take] {
                    in_holdout[p] = true;
                }
            }
        }
    }
    let (holdout, train): (Vec<usize>, Vec<usize>) = (0..d.len()).partition(|&p| in_holdout[p]);
    Ok(HoldoutSplit {
        train: d.subset(&train),
        holdout: d.subset(&holdout),
        unstratified,
    })
}
