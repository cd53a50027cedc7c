//! Direct RankBoost with an explicit pair distribution, `O(m n)` per candidate stump.
//!
//! Only meant for checking the factorized trainer on small inputs. It shares the
//! candidate threshold generator and the tie-break rule with the production search,
//! but evaluates every edge as the plain double sum over pairs.

use super::{check_sides, max_feature, BipartiteRanker, BoostError, BoostRound, TrainConfig};
use crate::data::Instance;
use crate::stump::{beats, thresholds_from_values, Stump, MIN_USEFUL_EDGE};

/// Pair distributions seen during a reference run, row-major `m x n`.
#[derive(Debug, Clone, Default)]
pub struct ReferenceTrace {
    /// `D_1, D_2, ...`: the distribution handed to each round, plus the final one.
    pub distributions: Vec<Vec<f64>>,
    pub realized_z: Vec<f64>,
}

fn pairwise_edge(d: &[f64], hp: &[u8], hn: &[u8]) -> f64 {
    let n = hn.len();
    let mut r = 0.0;
    for (i, &hi) in hp.iter().enumerate() {
        for (j, &hj) in hn.iter().enumerate() {
            r += d[i * n + j] * (f64::from(hi) - f64::from(hj));
        }
    }
    r
}

fn best_pairwise(d: &[f64], positives: &[&Instance], negatives: &[&Instance], cfg: &TrainConfig) -> Option<(Stump, f64)> {
    let mut features: Vec<u32> = positives
        .iter()
        .chain(negatives)
        .flat_map(|x| x.features().iter().map(|&(idx, _)| idx))
        .collect();
    features.sort_unstable();
    features.dedup();

    let mut overall: Option<(Stump, f64)> = None;
    for feature in features {
        let values = positives
            .iter()
            .chain(negatives)
            .filter_map(|x| x.feature(feature))
            .collect();
        let mut local: Option<(Stump, f64)> = None;
        for theta in thresholds_from_values(values, cfg.threshold_policy) {
            for default_output in [0u8, 1] {
                let stump = Stump::new(feature, theta, default_output).expect("valid stump");
                let hp: Vec<u8> = positives.iter().map(|x| stump.eval(x)).collect();
                let hn: Vec<u8> = negatives.iter().map(|x| stump.eval(x)).collect();
                let r = pairwise_edge(d, &hp, &hn);
                if local.is_none_or(|(_, b)| beats(r, b)) {
                    local = Some((stump, r));
                }
            }
        }
        if let Some(cand) = local {
            if overall.is_none_or(|(_, b)| beats(cand.1, b)) {
                overall = Some(cand);
            }
        }
    }
    overall
}

/// RankBoost exactly as the textbook loop: uniform `D_1`, edge by pairs, multiplicative
/// update of every pair weight and division by the realized normalizer `Z_t`.
pub fn pairwise_reference_train(
    positives: &[&Instance],
    negatives: &[&Instance],
    cfg: &TrainConfig,
) -> Result<(BipartiteRanker, ReferenceTrace), BoostError> {
    check_sides(positives, negatives, cfg)?;
    if max_feature(positives, negatives) == 0 {
        return Err(BoostError::NoFeatures);
    }
    let (m, n) = (positives.len(), negatives.len());
    let mut d = vec![1.0 / (m * n) as f64; m * n];
    let mut trace = ReferenceTrace {
        distributions: vec![d.clone()],
        realized_z: Vec::new(),
    };
    let mut rounds = Vec::new();

    for _ in 0..cfg.num_rounds {
        let (stump, r) = best_pairwise(&d, positives, negatives, cfg).ok_or(BoostError::NoFeatures)?;
        if cfg.early_stop_on_zero_r && r.abs() < MIN_USEFUL_EDGE {
            break;
        }
        let round = BoostRound::from_stump(stump, r)?;
        let hp: Vec<f64> = positives.iter().map(|x| f64::from(stump.eval(x))).collect();
        let hn: Vec<f64> = negatives.iter().map(|x| f64::from(stump.eval(x))).collect();
        let mut z = 0.0;
        for i in 0..m {
            for j in 0..n {
                d[i * n + j] *= (-round.alpha * (hp[i] - hn[j])).exp();
                z += d[i * n + j];
            }
        }
        d.iter_mut().for_each(|p| *p /= z);
        trace.realized_z.push(z);
        trace.distributions.push(d.clone());
        rounds.push(round);
    }
    Ok((BipartiteRanker::new(rounds, max_feature(positives, negatives)), trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_uniform_and_stays_normalized() {
        let xs: Vec<Instance> = [(0.1, 1), (0.4, 1), (0.3, 0), (0.2, 0), (0.5, 0)]
            .iter()
            .enumerate()
            .map(|(k, &(x, r))| Instance::new(format!("{k}"), vec![(1, x)], r).unwrap())
            .collect();
        let (pos, neg): (Vec<&Instance>, Vec<&Instance>) = xs.iter().partition(|x| x.rating() == 1);
        let cfg = TrainConfig {
            num_rounds: 4,
            ..TrainConfig::default()
        };
        let (_, trace) = pairwise_reference_train(&pos, &neg, &cfg).unwrap();
        assert!(trace.distributions[0].iter().all(|&p| p == 1.0 / 6.0));
        for d in &trace.distributions {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
