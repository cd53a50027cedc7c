//! Bipartite RankBoost over threshold stumps.
//!
//! The pair distribution `D_t(i, j)` over (positive, negative) pairs is never
//! materialized. It stays factorized as `v_i * w_j`: the update
//! `D * exp(-alpha (h(x_i) - h(x_j)))` splits into `v_i * exp(-alpha h(x_i))` and
//! `w_j * exp(alpha h(x_j))`, and renormalizing each side to unit mass keeps the
//! product a distribution. A round then costs one stump search plus `O(m + n)`.
//!
//! [`reference::pairwise_reference_train`] keeps the explicit `m x n` matrix and is
//! used only to check this module.

pub mod reference;

use thiserror::Error;

use crate::data::Instance;
use crate::stump::{Stump, StumpSearch, ThresholdPolicy, MIN_USEFUL_EDGE};

/// `|r|` is clamped to `1 - EDGE_CLAMP` before computing alpha.
pub const EDGE_CLAMP: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum BoostError {
    #[error("no positive instances")]
    NoPositives,
    #[error("no negative instances")]
    NoNegatives,
    #[error("no instance has any feature")]
    NoFeatures,
    #[error("edge {0} is not finite")]
    NonFiniteEdge(f64),
    #[error("number of rounds must be at least 1")]
    NoRounds,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostRound {
    pub stump: Stump,
    pub alpha: f64,
    pub r: f64,
    /// `sqrt(1 - r^2)` at the clamped edge.
    pub z_bound: f64,
}

impl BoostRound {
    pub fn from_stump(stump: Stump, r: f64) -> Result<Self, BoostError> {
        let alpha = alpha_from_r(r)?;
        let c = clamp_edge(r);
        Ok(Self {
            stump,
            alpha,
            r,
            z_bound: (1.0 - c * c).sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub num_rounds: usize,
    pub threshold_policy: ThresholdPolicy,
    pub early_stop_on_zero_r: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_rounds: 100,
            threshold_policy: ThresholdPolicy::All,
            early_stop_on_zero_r: true,
        }
    }
}

/// A trained scoring function `f(x) = sum_t alpha_t h_t(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteRanker {
    rounds: Vec<BoostRound>,
    feature_dimension: u32,
}

impl BipartiteRanker {
    pub fn new(rounds: Vec<BoostRound>, feature_dimension: u32) -> Self {
        Self {
            rounds,
            feature_dimension,
        }
    }

    pub fn rounds(&self) -> &[BoostRound] {
        &self.rounds
    }

    pub fn feature_dimension(&self) -> u32 {
        self.feature_dimension
    }

    pub fn score(&self, x: &Instance) -> f64 {
        self.rounds
            .iter()
            .map(|round| round.alpha * f64::from(round.stump.eval(x)))
            .sum()
    }
}

pub fn score(m: &BipartiteRanker, x: &Instance) -> f64 {
    m.score(x)
}

fn clamp_edge(r: f64) -> f64 {
    r.clamp(-1.0 + EDGE_CLAMP, 1.0 - EDGE_CLAMP)
}

/// Step size minimizing the per-round bound on the normalizer: `1/2 ln((1+r)/(1-r))`.
pub fn alpha_from_r(r: f64) -> Result<f64, BoostError> {
    if !r.is_finite() {
        return Err(BoostError::NonFiniteEdge(r));
    }
    let r = clamp_edge(r);
    Ok(0.5 * ((1.0 + r) / (1.0 - r)).ln())
}

/// Per-round diagnostics of a training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    /// Realized normalizer `Z_t` of each round.
    pub realized_z: Vec<f64>,
    /// Exponential training loss after each round, `prod_{s <= t} Z_s`.
    pub loss: Vec<f64>,
    /// Factors `(v, w)` of `D_{t+1}` after each round; filled only on request.
    pub distributions: Vec<(Vec<f64>, Vec<f64>)>,
}

pub(crate) fn check_sides(positives: &[&Instance], negatives: &[&Instance], cfg: &TrainConfig) -> Result<(), BoostError> {
    if cfg.num_rounds == 0 {
        return Err(BoostError::NoRounds);
    }
    if positives.is_empty() {
        return Err(BoostError::NoPositives);
    }
    if negatives.is_empty() {
        return Err(BoostError::NoNegatives);
    }
    Ok(())
}

pub(crate) fn max_feature(positives: &[&Instance], negatives: &[&Instance]) -> u32 {
    positives
        .iter()
        .chain(negatives)
        .map(|x| x.max_feature())
        .max()
        .unwrap_or(0)
}

fn train_impl(
    positives: &[&Instance],
    negatives: &[&Instance],
    cfg: &TrainConfig,
    keep_distributions: bool,
) -> Result<(BipartiteRanker, TrainTrace), BoostError> {
    check_sides(positives, negatives, cfg)?;
    let search = StumpSearch::new(positives, negatives, None, cfg.threshold_policy);
    if search.is_empty() {
        return Err(BoostError::NoFeatures);
    }

    let mut v = vec![1.0 / positives.len() as f64; positives.len()];
    let mut w = vec![1.0 / negatives.len() as f64; negatives.len()];
    let mut rounds = Vec::with_capacity(cfg.num_rounds);
    let mut trace = TrainTrace::default();
    let mut loss = 1.0;

    for _ in 0..cfg.num_rounds {
        let (stump, r) = search.best(&v, &w).ok_or(BoostError::NoFeatures)?;
        if cfg.early_stop_on_zero_r && r.abs() < MIN_USEFUL_EDGE {
            break;
        }
        let round = BoostRound::from_stump(stump, r)?;
        let (down, up) = ((-round.alpha).exp(), round.alpha.exp());
        for (vi, x) in v.iter_mut().zip(positives) {
            if stump.eval(x) == 1 {
                *vi *= down;
            }
        }
        for (wj, x) in w.iter_mut().zip(negatives) {
            if stump.eval(x) == 1 {
                *wj *= up;
            }
        }
        let v_mass: f64 = v.iter().sum();
        let w_mass: f64 = w.iter().sum();
        v.iter_mut().for_each(|vi| *vi /= v_mass);
        w.iter_mut().for_each(|wj| *wj /= w_mass);

        let z = v_mass * w_mass;
        loss *= z;
        trace.realized_z.push(z);
        trace.loss.push(loss);
        if keep_distributions {
            trace.distributions.push((v.clone(), w.clone()));
        }
        rounds.push(round);
    }

    let ranker = BipartiteRanker::new(rounds, max_feature(positives, negatives));
    Ok((ranker, trace))
}

/// Trains a ranker that should score `positives` above `negatives`.
///
/// Stops after `cfg.num_rounds` rounds, or earlier when the best stump has no edge
/// and early stopping is on (the result may then have no rounds at all).
pub fn train_bipartite(
    positives: &[&Instance],
    negatives: &[&Instance],
    cfg: &TrainConfig,
) -> Result<BipartiteRanker, BoostError> {
    train_impl(positives, negatives, cfg, false).map(|(ranker, _)| ranker)
}

/// Like [`train_bipartite`], also returning per-round normalizers, the loss curve, and
/// optionally every intermediate distribution.
pub fn train_bipartite_traced(
    positives: &[&Instance],
    negatives: &[&Instance],
    cfg: &TrainConfig,
    keep_distributions: bool,
) -> Result<(BipartiteRanker, TrainTrace), BoostError> {
    train_impl(positives, negatives, cfg, keep_distributions)
}
