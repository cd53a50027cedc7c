//! Threshold weak rankers and the exhaustive search for the best one.
//!
//! A stump looks at one feature: it outputs 1 when the value is at least the
//! threshold, 0 when below, and a fixed default when the feature is missing.
//!
//! The search never touches instance pairs. The pair distribution is kept factorized
//! as `D(i, j) = v_i * w_j`, so the edge of a ranker `h` is
//!
//! ```text
//! r = (sum_pos v h) * (sum_neg w) - (sum_pos v) * (sum_neg w h)
//! ```
//!
//! and sweeping one feature's presorted values gives every threshold's edge in a
//! single pass.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::data::{Dataset, Instance};

/// Edges closer than this are treated as equal and resolved by search order.
pub const EDGE_TIE_TOLERANCE: f64 = 1e-12;

/// Below this `|r|` a ranker carries no ordering information.
pub const MIN_USEFUL_EDGE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum StumpError {
    #[error("invalid stump: {0}")]
    Invalid(String),
    #[error("invalid weighted view: {0}")]
    InvalidView(String),
    #[error("no feature has a value on this subproblem")]
    NoCandidates,
    #[error("every candidate ranker has zero edge")]
    NoUsefulRanker,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stump {
    feature: u32,
    threshold: f64,
    default_output: u8,
}

impl Stump {
    pub fn new(feature: u32, threshold: f64, default_output: u8) -> Result<Self, StumpError> {
        if feature == 0 {
            return Err(StumpError::Invalid("feature index must be >= 1".into()));
        }
        if !threshold.is_finite() {
            return Err(StumpError::Invalid("threshold must be finite".into()));
        }
        if default_output > 1 {
            return Err(StumpError::Invalid(format!(
                "default output {default_output} not in {{0, 1}}"
            )));
        }
        Ok(Self {
            feature,
            threshold,
            default_output,
        })
    }

    pub fn feature(&self) -> u32 {
        self.feature
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn default_output(&self) -> u8 {
        self.default_output
    }

    #[inline]
    pub fn eval(&self, x: &Instance) -> u8 {
        match x.feature(self.feature) {
            Some(v) if v >= self.threshold => 1,
            Some(_) => 0,
            None => self.default_output,
        }
    }
}

pub fn eval_stump(s: &Stump, x: &Instance) -> u8 {
    s.eval(x)
}

/// How many thresholds to try per feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdPolicy {
    /// Every distinct observed value.
    #[default]
    All,
    /// At most this many nearest-rank quantiles of the distinct values.
    Count(usize),
}

impl fmt::Display for ThresholdPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdPolicy::All => f.write_str("all"),
            ThresholdPolicy::Count(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for ThresholdPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(ThresholdPolicy::All);
        }
        match s.parse::<usize>() {
            Ok(0) => Err("threshold count must be at least 1".into()),
            Ok(n) => Ok(ThresholdPolicy::Count(n)),
            Err(_) => Err(format!("expected \"all\" or a positive count, got {s:?}")),
        }
    }
}

impl From<ThresholdPolicy> for String {
    fn from(p: ThresholdPolicy) -> Self {
        p.to_string()
    }
}

impl TryFrom<String> for ThresholdPolicy {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

fn sentinel_below(min: f64) -> f64 {
    let s = min - 1.0;
    if s < min {
        s
    } else {
        min - min.abs()
    }
}

/// Candidate thresholds for a bag of observed values: a sentinel below the minimum
/// followed by the policy's picks, strictly increasing.
pub fn thresholds_from_values(mut values: Vec<f64>, policy: ThresholdPolicy) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    let sentinel = sentinel_below(values[0]);
    let picked = match policy {
        ThresholdPolicy::Count(n) if n < values.len() => {
            let distinct = values.len();
            let mut out: Vec<f64> = (1..=n)
                .map(|q| {
                    let rank = (q * distinct).div_ceil(n);
                    values[rank - 1]
                })
                .collect();
            out.dedup();
            out
        }
        _ => values,
    };
    let mut out = Vec::with_capacity(picked.len() + 1);
    out.push(sentinel);
    out.extend(picked);
    out
}

/// Candidate thresholds of one feature over a dataset; empty if the feature never occurs.
pub fn candidate_thresholds(d: &Dataset, feature: u32, policy: ThresholdPolicy) -> Vec<f64> {
    let values: Vec<f64> = d.instances().iter().filter_map(|x| x.feature(feature)).collect();
    thresholds_from_values(values, policy)
}

/// Positives and negatives with the two factors of the pair distribution.
#[derive(Debug, Clone)]
pub struct WeightedBipartiteView<'a> {
    positives: Vec<(&'a Instance, f64)>,
    negatives: Vec<(&'a Instance, f64)>,
}

impl<'a> WeightedBipartiteView<'a> {
    pub fn new(
        positives: Vec<(&'a Instance, f64)>,
        negatives: Vec<(&'a Instance, f64)>,
    ) -> Result<Self, StumpError> {
        let check = |side: &[(&Instance, f64)]| side.iter().all(|&(_, w)| w.is_finite() && w >= 0.0);
        if !check(&positives) || !check(&negatives) {
            return Err(StumpError::InvalidView("weights must be finite and non-negative".into()));
        }
        let mass: f64 = positives.iter().map(|p| p.1).sum::<f64>()
            * negatives.iter().map(|n| n.1).sum::<f64>();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(StumpError::InvalidView(format!(
                "pair distribution sums to {mass}, expected 1"
            )));
        }
        Ok(Self {
            positives,
            negatives,
        })
    }

    /// Uniform pair distribution: every positive `1/m`, every negative `1/n`.
    pub fn uniform(positives: &[&'a Instance], negatives: &[&'a Instance]) -> Result<Self, StumpError> {
        let m = positives.len() as f64;
        let n = negatives.len() as f64;
        Self::new(
            positives.iter().map(|&x| (x, 1.0 / m)).collect(),
            negatives.iter().map(|&x| (x, 1.0 / n)).collect(),
        )
    }

    pub fn positives(&self) -> &[(&'a Instance, f64)] {
        &self.positives
    }

    pub fn negatives(&self) -> &[(&'a Instance, f64)] {
        &self.negatives
    }

    /// Features present on at least one instance of the view, ascending.
    pub fn features(&self) -> Vec<u32> {
        let mut f: Vec<u32> = self
            .positives
            .iter()
            .chain(&self.negatives)
            .flat_map(|(x, _)| x.features().iter().map(|&(idx, _)| idx))
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

/// Edge of a stump under the view's pair distribution, via the factorized identity.
pub fn edge_r(s: &Stump, view: &WeightedBipartiteView<'_>) -> f64 {
    let (mut pos_total, mut pos_fired) = (0.0, 0.0);
    for &(x, v) in &view.positives {
        pos_total += v;
        pos_fired += v * f64::from(s.eval(x));
    }
    let (mut neg_total, mut neg_fired) = (0.0, 0.0);
    for &(x, w) in &view.negatives {
        neg_total += w;
        neg_fired += w * f64::from(s.eval(x));
    }
    pos_fired * neg_total - pos_total * neg_fired
}

/// Whether `candidate` beats the incumbent `best` by more than the tie tolerance.
/// Candidates are visited in tie-break order, so a near tie keeps the incumbent.
#[inline]
pub(crate) fn beats(candidate: f64, best: f64) -> bool {
    candidate.abs() > best.abs() + EDGE_TIE_TOLERANCE
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    value: f64,
    positive: bool,
    index: u32,
}

#[derive(Debug, Clone)]
struct FeatureColumn {
    feature: u32,
    /// Present values, descending.
    entries: Vec<Entry>,
    /// Instances lacking the feature.
    missing_pos: Vec<u32>,
    missing_neg: Vec<u32>,
    /// Ascending, sentinel first.
    thresholds: Vec<f64>,
}

/// Presorted search structure for one bipartite subproblem. Built once, then queried
/// with a fresh pair distribution every boosting round.
#[derive(Debug, Clone)]
pub struct StumpSearch {
    columns: Vec<FeatureColumn>,
}

impl StumpSearch {
    /// Indexes `features` (or every feature present, if `None`) over the subproblem.
    pub fn new(
        positives: &[&Instance],
        negatives: &[&Instance],
        features: Option<&[u32]>,
        policy: ThresholdPolicy,
    ) -> Self {
        let wanted: Vec<u32> = match features {
            Some(f) => {
                let mut f = f.to_vec();
                f.sort_unstable();
                f.dedup();
                f
            }
            None => {
                let mut f: Vec<u32> = positives
                    .iter()
                    .chain(negatives)
                    .flat_map(|x| x.features().iter().map(|&(idx, _)| idx))
                    .collect();
                f.sort_unstable();
                f.dedup();
                f
            }
        };
        let columns = wanted
            .into_iter()
            .filter_map(|feature| {
                let mut entries = Vec::new();
                let mut missing_pos = Vec::new();
                let mut missing_neg = Vec::new();
                for (side, positive, missing) in [
                    (positives, true, &mut missing_pos),
                    (negatives, false, &mut missing_neg),
                ] {
                    for (k, x) in side.iter().enumerate() {
                        match x.feature(feature) {
                            Some(value) => entries.push(Entry {
                                value,
                                positive,
                                index: k as u32,
                            }),
                            None => missing.push(k as u32),
                        }
                    }
                }
                if entries.is_empty() {
                    return None;
                }
                entries.sort_by(|a, b| b.value.total_cmp(&a.value));
                let thresholds =
                    thresholds_from_values(entries.iter().map(|e| e.value).collect(), policy);
                Some(FeatureColumn {
                    feature,
                    entries,
                    missing_pos,
                    missing_neg,
                    thresholds,
                })
            })
            .collect();
        Self { columns }
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.columns.len()
    }

    fn best_in_column(col: &FeatureColumn, v: &[f64], w: &[f64], v_total: f64, w_total: f64) -> (Stump, f64) {
        let pos_missing: f64 = col.missing_pos.iter().map(|&k| v[k as usize]).sum();
        let neg_missing: f64 = col.missing_neg.iter().map(|&k| w[k as usize]).sum();

        // fired mass (pos, neg) at each threshold, by a descending sweep
        let mut fired = vec![(0.0, 0.0); col.thresholds.len()];
        let (mut pos_ge, mut neg_ge) = (0.0, 0.0);
        let mut next = 0;
        for (t, &theta) in col.thresholds.iter().enumerate().rev() {
            while next < col.entries.len() && col.entries[next].value >= theta {
                let e = col.entries[next];
                if e.positive {
                    pos_ge += v[e.index as usize];
                } else {
                    neg_ge += w[e.index as usize];
                }
                next += 1;
            }
            fired[t] = (pos_ge, neg_ge);
        }

        let mut best: Option<(Stump, f64)> = None;
        for (t, &theta) in col.thresholds.iter().enumerate() {
            let (p, n) = fired[t];
            for default_output in [0u8, 1] {
                let (p, n) = if default_output == 1 {
                    (p + pos_missing, n + neg_missing)
                } else {
                    (p, n)
                };
                let r = p * w_total - v_total * n;
                if best.is_none_or(|(_, b)| beats(r, b)) {
                    best = Some((
                        Stump {
                            feature: col.feature,
                            threshold: theta,
                            default_output,
                        },
                        r,
                    ));
                }
            }
        }
        best.expect("a feature column always has the sentinel threshold")
    }

    /// Best stump and its edge for the pair distribution `v_i * w_j`.
    ///
    /// Within a feature, thresholds are visited ascending with default output 0 before
    /// 1; features are then reduced in ascending index order. An edge replaces the
    /// incumbent only if it is larger in magnitude by more than [`EDGE_TIE_TOLERANCE`].
    /// Features are scored in parallel; the ordered reduction keeps the result
    /// independent of scheduling.
    pub fn best(&self, v: &[f64], w: &[f64]) -> Option<(Stump, f64)> {
        let v_total: f64 = v.iter().sum();
        let w_total: f64 = w.iter().sum();
        let per_feature: Vec<(Stump, f64)> = self
            .columns
            .par_iter()
            .with_min_len(4)
            .map(|col| Self::best_in_column(col, v, w, v_total, w_total))
            .collect();
        per_feature
            .into_iter()
            .fold(None, |acc: Option<(Stump, f64)>, cand| match acc {
                Some(b) if !beats(cand.1, b.1) => Some(b),
                _ => Some(cand),
            })
    }
}

/// Exhaustive search over `features` x thresholds x default output for the largest `|r|`.
pub fn best_stump(
    view: &WeightedBipartiteView<'_>,
    features: &[u32],
    policy: ThresholdPolicy,
) -> Result<(Stump, f64), StumpError> {
    let positives: Vec<&Instance> = view.positives.iter().map(|p| p.0).collect();
    let negatives: Vec<&Instance> = view.negatives.iter().map(|n| n.0).collect();
    if positives.is_empty() || negatives.is_empty() {
        return Err(StumpError::InvalidView("both sides must be non-empty".into()));
    }
    let v: Vec<f64> = view.positives.iter().map(|p| p.1).collect();
    let w: Vec<f64> = view.negatives.iter().map(|n| n.1).collect();
    let search = StumpSearch::new(&positives, &negatives, Some(features), policy);
    let (stump, r) = search.best(&v, &w).ok_or(StumpError::NoCandidates)?;
    if r.abs() < MIN_USEFUL_EDGE {
        return Err(StumpError::NoUsefulRanker);
    }
    Ok((stump, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_dataset_str;

    fn inst(features: Vec<(u32, f64)>) -> Instance {
        Instance::new("x", features, 0).unwrap()
    }

    #[test]
    fn eval_branches() {
        let s = Stump::new(2, 0.5, 0).unwrap();
        assert_eq!(s.eval(&inst(vec![(2, 0.5)])), 1);
        assert_eq!(s.eval(&inst(vec![(2, 0.49)])), 0);
        let s1 = Stump::new(2, 0.5, 1).unwrap();
        assert_eq!(eval_stump(&s1, &inst(vec![(1, 9.0)])), 1);
        assert_eq!(eval_stump(&s, &inst(vec![(1, 9.0)])), 0);
    }

    #[test]
    fn stump_validation() {
        assert!(Stump::new(0, 1.0, 0).is_err());
        assert!(Stump::new(1, f64::INFINITY, 0).is_err());
        assert!(Stump::new(1, 1.0, 2).is_err());
    }

    #[test]
    fn thresholds_all_mode() {
        let d = parse_dataset_str("0 1:1\n1 1:2\n0 1:2\n1 1:3\n0 2:7", None).unwrap();
        assert_eq!(candidate_thresholds(&d, 1, ThresholdPolicy::All), vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(candidate_thresholds(&d, 3, ThresholdPolicy::All), Vec::<f64>::new());
    }

    #[test]
    fn thresholds_count_mode_nearest_rank() {
        let values: Vec<f64> = (1..=1000).map(f64::from).collect();
        let t = thresholds_from_values(values, ThresholdPolicy::Count(100));
        assert_eq!(t.len(), 101);
        assert_eq!(t[0], 0.0);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        // nearest rank ceil(q/100 * 1000) for q = 1..=100
        for (q, &theta) in t.iter().enumerate().skip(1) {
            assert_eq!(theta, (10 * q) as f64);
        }
    }

    #[test]
    fn thresholds_count_larger_than_distinct() {
        let t = thresholds_from_values(vec![3.0, 1.0, 3.0], ThresholdPolicy::Count(10));
        assert_eq!(t, vec![0.0, 1.0, 3.0]);
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("all".parse::<ThresholdPolicy>().unwrap(), ThresholdPolicy::All);
        assert_eq!("100".parse::<ThresholdPolicy>().unwrap(), ThresholdPolicy::Count(100));
        assert!("0".parse::<ThresholdPolicy>().is_err());
        assert!("many".parse::<ThresholdPolicy>().is_err());
    }

    #[test]
    fn edge_single_perfect_pair() {
        let p = inst(vec![(1, 1.0)]);
        let n = inst(vec![(1, 0.0)]);
        let view = WeightedBipartiteView::uniform(&[&p], &[&n]).unwrap();
        let s = Stump::new(1, 0.5, 0).unwrap();
        assert_eq!(edge_r(&s, &view), 1.0);
        let constant = Stump::new(1, -1.0, 0).unwrap();
        assert_eq!(edge_r(&constant, &view), 0.0);
    }

    #[test]
    fn view_rejects_unnormalized() {
        let p = inst(vec![(1, 1.0)]);
        assert!(WeightedBipartiteView::new(vec![(&p, 0.5)], vec![(&p, 1.0)]).is_err());
        assert!(WeightedBipartiteView::new(vec![(&p, -1.0)], vec![(&p, -1.0)]).is_err());
    }

    #[test]
    fn separable_one_dimensional() {
        let pos: Vec<Instance> = (0..3).map(|_| inst(vec![(1, 2.0)])).collect();
        let neg: Vec<Instance> = (0..4).map(|_| inst(vec![(1, 1.0)])).collect();
        let pr: Vec<&Instance> = pos.iter().collect();
        let nr: Vec<&Instance> = neg.iter().collect();
        let view = WeightedBipartiteView::uniform(&pr, &nr).unwrap();
        let (s, r) = best_stump(&view, &[1], ThresholdPolicy::All).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
        assert_eq!(s.feature(), 1);
        assert_eq!(s.threshold(), 2.0);
        assert_eq!(s.default_output(), 0);
    }

    #[test]
    fn identical_sides_have_no_useful_ranker() {
        let a = inst(vec![(1, 1.0), (2, 5.0)]);
        let b = inst(vec![(1, 3.0)]);
        let view = WeightedBipartiteView::uniform(&[&a, &b], &[&a, &b]).unwrap();
        assert_eq!(
            best_stump(&view, &[1, 2], ThresholdPolicy::All),
            Err(StumpError::NoUsefulRanker)
        );
        assert_eq!(
            best_stump(&view, &[7], ThresholdPolicy::All),
            Err(StumpError::NoCandidates)
        );
    }

    #[test]
    fn missing_branch_is_searched() {
        // positives lack feature 1, negatives have it: only r0 = 1 with a threshold
        // above every value separates them
        let p = inst(vec![(2, 0.0)]);
        let n = inst(vec![(1, 5.0)]);
        let view = WeightedBipartiteView::uniform(&[&p], &[&n]).unwrap();
        let (s, r) = best_stump(&view, &[1], ThresholdPolicy::All).unwrap();
        // sentinel/5.0 with r0 = 0 gives h(p)=0, h(n)=1 -> r = -1, found first
        assert_eq!(r.abs(), 1.0);
        assert_eq!(s.feature(), 1);
    }
}
