//! Multipartite ranking: one bipartite RankBoost model per coding column, fused as
//! `H(x) = sum_j T_j f_j(x)`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::coding::{build_coding_matrix, column_split, CodingError, CodingMatrix, CodingScheme, Role};
use crate::data::{mix_seed, split_holdout, DataError, Dataset, Instance, SplitSpec};
use crate::metrics::{ndcg, MetricError, ScoredEntry, ScoredList};
use crate::rankboost::{train_bipartite, BipartiteRanker, BoostError, TrainConfig};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("need at least two distinct ratings, found {0}")]
    TooFewRatings(usize),
    #[error("every coding column is degenerate on this dataset")]
    AllColumnsDegenerate,
    #[error("{0} weights require lpc coding")]
    LpcPriorWithoutLpc(&'static str),
    #[error("adaptive weights are not predefined")]
    NotPredefined,
    #[error("model has {rankers} rankers but {weights} weights for {columns} columns")]
    ShapeMismatch {
        columns: usize,
        rankers: usize,
        weights: usize,
    },
    #[error("weight {0} of column {1} is negative or not finite")]
    InvalidWeight(f64, usize),
    #[error("skipped column {0} must have weight 0")]
    SkippedColumnWeight(usize),
    #[error("empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error(transparent)]
    Boost(#[from] BoostError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// How the per-column weights `T_j` are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum WeightingScheme {
    /// `T_j = 1`.
    Uniform,
    /// `T_j = j` for columns `j = 1..k`.
    #[default]
    Linear,
    /// `T_j = j - 1`; the first column gets weight 0.
    PaperShifted,
    /// Mean holdout NDCG of each column's ranker.
    Adaptive { holdout_fraction: f64, repetitions: usize },
    /// `p_a * p_b` from empirical rating frequencies; `lpc` coding only.
    LpcPrior,
}

impl WeightingScheme {
    pub fn adaptive_default() -> Self {
        WeightingScheme::Adaptive {
            holdout_fraction: 1.0 / 3.0,
            repetitions: 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightingScheme::Uniform => "uniform",
            WeightingScheme::Linear => "linear",
            WeightingScheme::PaperShifted => "paper",
            WeightingScheme::Adaptive { .. } => "adaptive",
            WeightingScheme::LpcPrior => "lpc-prior",
        }
    }
}

impl fmt::Display for WeightingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightingScheme {
    type Err = String;

    /// Parses the kind only; `adaptive` gets the default holdout parameters.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(WeightingScheme::Uniform),
            "linear" => Ok(WeightingScheme::Linear),
            "paper" | "paper-shifted" => Ok(WeightingScheme::PaperShifted),
            "adaptive" => Ok(WeightingScheme::adaptive_default()),
            "lpc-prior" => Ok(WeightingScheme::LpcPrior),
            _ => Err(format!("unknown weighting scheme {s:?}")),
        }
    }
}

pub fn predefined_weights(columns: usize, kind: WeightingScheme) -> Result<Vec<f64>, EnsembleError> {
    match kind {
        WeightingScheme::Uniform => Ok(vec![1.0; columns]),
        WeightingScheme::Linear => Ok((1..=columns).map(|j| j as f64).collect()),
        WeightingScheme::PaperShifted => Ok((0..columns).map(|j| j as f64).collect()),
        WeightingScheme::Adaptive { .. } | WeightingScheme::LpcPrior => Err(EnsembleError::NotPredefined),
    }
}

/// `p_a * p_b` per `lpc` column, with `p_r` the fraction of instances rated `r`.
pub fn lpc_prior_weights(d: &Dataset, coding: &CodingMatrix) -> Result<Vec<f64>, EnsembleError> {
    if coding.scheme() != CodingScheme::Lpc {
        return Err(EnsembleError::LpcPriorWithoutLpc("lpc-prior"));
    }
    if d.is_empty() {
        return Err(EnsembleError::EmptyDataset);
    }
    let n = d.len() as f64;
    let mut sizes = d.class_sizes();
    sizes.resize(coding.num_ratings().max(sizes.len()), 0);
    let p: Vec<f64> = sizes.iter().map(|&s| s as f64 / n).collect();
    Ok(coding.pairs().iter().map(|&(a, b)| p[a] * p[b]).collect())
}

/// Mean holdout NDCG of one column over all repetitions; `None` if no repetition
/// produced a usable train/holdout pair.
fn column_holdout_ndcg(
    d: &Dataset,
    coding: &CodingMatrix,
    col: usize,
    cfg: &TrainConfig,
    spec: &SplitSpec,
) -> Result<Option<f64>, EnsembleError> {
    let spec = spec.with_seed(mix_seed(spec.seed(), col as u64));
    let mut total = 0.0;
    let mut used = 0usize;
    for rep in 0..spec.repetitions() {
        let split = split_holdout(d, &spec, rep)?;
        let train_cols = column_split(&split.train, coding, col)?;
        let hold_cols = column_split(&split.holdout, coding, col)?;
        if train_cols.is_degenerate() || hold_cols.positives.len() + hold_cols.negatives.len() == 0 {
            continue;
        }
        let ranker = match train_bipartite(
            &train_cols.positive_instances(&split.train),
            &train_cols.negative_instances(&split.train),
            cfg,
        ) {
            Ok(r) => r,
            Err(BoostError::NoFeatures) => continue,
            Err(e) => return Err(e.into()),
        };
        let list: Vec<ScoredEntry> = split
            .holdout
            .instances()
            .iter()
            .filter_map(|x| {
                let rating = match coding.role(x.rating(), col) {
                    Role::Positive => 1,
                    Role::Negative => 0,
                    Role::Excluded => return None,
                };
                Some(ScoredEntry {
                    id: x.id().to_string(),
                    score: ranker.score(x),
                    rating,
                })
            })
            .collect();
        total += ndcg(&ScoredList::new(list)?)?;
        used += 1;
    }
    Ok((used > 0).then(|| total / used as f64))
}

/// Per-column mean NDCG over repeated stratified holdout splits, each column scored
/// on its own binary relabeling of the holdout. Degenerate columns get 0.
pub fn adaptive_weights(
    d: &Dataset,
    coding: &CodingMatrix,
    cfg: &TrainConfig,
    s: &SplitSpec,
) -> Result<Vec<f64>, EnsembleError> {
    let per_column: Vec<Result<Option<f64>, EnsembleError>> = (0..coding.num_columns())
        .into_par_iter()
        .map(|col| {
            if column_split(d, coding, col)?.is_degenerate() {
                return Ok(None);
            }
            column_holdout_ndcg(d, coding, col, cfg, s)
        })
        .collect();
    let weights: Vec<Option<f64>> = per_column.into_iter().collect::<Result<_, _>>()?;
    if weights.iter().all(Option::is_none) {
        return Err(EnsembleError::AllColumnsDegenerate);
    }
    Ok(weights.into_iter().map(|w| w.unwrap_or(0.0)).collect())
}

/// A trained multipartite ranker.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiRankModel {
    coding: CodingMatrix,
    rankers: Vec<Option<BipartiteRanker>>,
    weights: Vec<f64>,
    config: TrainConfig,
    weighting: WeightingScheme,
    seed: u64,
}

impl MultiRankModel {
    /// Assembles a model, checking shapes and that skipped columns carry weight 0.
    pub fn new(
        coding: CodingMatrix,
        rankers: Vec<Option<BipartiteRanker>>,
        weights: Vec<f64>,
        config: TrainConfig,
        weighting: WeightingScheme,
        seed: u64,
    ) -> Result<Self, EnsembleError> {
        let columns = coding.num_columns();
        if rankers.len() != columns || weights.len() != columns {
            return Err(EnsembleError::ShapeMismatch {
                columns,
                rankers: rankers.len(),
                weights: weights.len(),
            });
        }
        for (col, (ranker, &w)) in rankers.iter().zip(&weights).enumerate() {
            if !(w.is_finite() && w >= 0.0) {
                return Err(EnsembleError::InvalidWeight(w, col));
            }
            if ranker.is_none() && w != 0.0 {
                return Err(EnsembleError::SkippedColumnWeight(col));
            }
        }
        Ok(Self {
            coding,
            rankers,
            weights,
            config,
            weighting,
            seed,
        })
    }

    pub fn coding(&self) -> &CodingMatrix {
        &self.coding
    }

    pub fn rankers(&self) -> &[Option<BipartiteRanker>] {
        &self.rankers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn weighting(&self) -> WeightingScheme {
        self.weighting
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_ratings(&self) -> usize {
        self.coding.num_ratings()
    }

    /// Largest feature index seen by any column's ranker.
    pub fn feature_dimension(&self) -> u32 {
        self.rankers
            .iter()
            .flatten()
            .map(BipartiteRanker::feature_dimension)
            .max()
            .unwrap_or(0)
    }

    /// The same model with every weight multiplied by `factor`.
    pub fn with_scaled_weights(&self, factor: f64) -> Result<Self, EnsembleError> {
        let weights = self.weights.iter().map(|w| w * factor).collect();
        Self::new(
            self.coding.clone(),
            self.rankers.clone(),
            weights,
            self.config.clone(),
            self.weighting,
            self.seed,
        )
    }

    pub fn score(&self, x: &Instance) -> f64 {
        fuse_score(self, x)
    }
}

/// Per-column outcome of training, for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnReport {
    pub positives: usize,
    pub negatives: usize,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub columns: Vec<ColumnReport>,
    pub warnings: Vec<String>,
}

/// Trains every coding column and computes the fusion weights.
///
/// Columns with an empty side are skipped with weight 0 and a warning. `seed` drives
/// the holdout splits of adaptive weighting; everything else is deterministic.
pub fn train_multirank(
    d: &Dataset,
    scheme: CodingScheme,
    cfg: &TrainConfig,
    weighting: WeightingScheme,
    seed: u64,
) -> Result<(MultiRankModel, TrainReport), EnsembleError> {
    let distinct = d.distinct_ratings();
    if distinct < 2 {
        return Err(EnsembleError::TooFewRatings(distinct));
    }
    if weighting == WeightingScheme::LpcPrior && scheme != CodingScheme::Lpc {
        return Err(EnsembleError::LpcPriorWithoutLpc("lpc-prior"));
    }
    let coding = build_coding_matrix(d.num_ratings(), scheme)?;
    let splits = (0..coding.num_columns())
        .map(|col| column_split(d, &coding, col))
        .collect::<Result<Vec<_>, _>>()?;

    let trained: Vec<Result<Option<BipartiteRanker>, EnsembleError>> = splits
        .par_iter()
        .map(|split| {
            if split.is_degenerate() {
                return Ok(None);
            }
            match train_bipartite(&split.positive_instances(d), &split.negative_instances(d), cfg) {
                // every column reports the dimension of the whole training set
                Ok(r) => Ok(Some(BipartiteRanker::new(r.rounds().to_vec(), d.feature_dimension()))),
                Err(BoostError::NoFeatures) => Ok(None),
                Err(e) => Err(e.into()),
            }
        })
        .collect();
    let rankers: Vec<Option<BipartiteRanker>> = trained.into_iter().collect::<Result<_, _>>()?;
    if rankers.iter().all(Option::is_none) {
        return Err(EnsembleError::AllColumnsDegenerate);
    }

    let mut report = TrainReport::default();
    for (col, (split, ranker)) in splits.iter().zip(&rankers).enumerate() {
        if ranker.is_none() {
            let msg = if split.is_degenerate() {
                format!(
                    "column {} skipped: {} positives, {} negatives",
                    col + 1,
                    split.positives.len(),
                    split.negatives.len()
                )
            } else {
                format!("column {} skipped: no features present", col + 1)
            };
            log::warn!("{msg}");
            report.warnings.push(msg);
        }
        report.columns.push(ColumnReport {
            positives: split.positives.len(),
            negatives: split.negatives.len(),
            skipped: ranker.is_none(),
        });
    }

    let mut weights = match weighting {
        WeightingScheme::Uniform | WeightingScheme::Linear | WeightingScheme::PaperShifted => {
            predefined_weights(coding.num_columns(), weighting)?
        }
        WeightingScheme::LpcPrior => lpc_prior_weights(d, &coding)?,
        WeightingScheme::Adaptive {
            holdout_fraction,
            repetitions,
        } => {
            let spec = SplitSpec::new(holdout_fraction, repetitions, seed)?;
            adaptive_weights(d, &coding, cfg, &spec)?
        }
    };
    for (w, ranker) in weights.iter_mut().zip(&rankers) {
        if ranker.is_none() {
            *w = 0.0;
        }
    }

    let model = MultiRankModel::new(coding, rankers, weights, cfg.clone(), weighting, seed)?;
    Ok((model, report))
}

/// `sum_j T_j f_j(x)` over the columns that have a ranker.
pub fn fuse_score(m: &MultiRankModel, x: &Instance) -> f64 {
    m.rankers
        .iter()
        .zip(&m.weights)
        .filter_map(|(r, &w)| r.as_ref().map(|r| w * r.score(x)))
        .sum()
}

/// Scores every instance and sorts by descending fused score, ties in input order.
pub fn rank(m: &MultiRankModel, d: &Dataset) -> Result<ScoredList, EnsembleError> {
    if d.is_empty() {
        return Err(EnsembleError::EmptyDataset);
    }
    let entries: Vec<ScoredEntry> = d
        .instances()
        .par_iter()
        .map(|x| ScoredEntry {
            id: x.id().to_string(),
            score: fuse_score(m, x),
            rating: x.rating(),
        })
        .collect();
    Ok(ScoredList::new(entries)?.into_sorted_desc())
}
