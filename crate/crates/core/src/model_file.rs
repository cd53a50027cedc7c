//! Versioned JSON persistence for [`MultiRankModel`].
//!
//! Floats are written in their shortest round-trip form and parsed back exactly, so a
//! loaded model scores every instance bit-identically to the saved one.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coding::{build_coding_matrix, CodingScheme};
use crate::ensemble::{MultiRankModel, WeightingScheme};
use crate::rankboost::{BipartiteRanker, BoostRound, TrainConfig};
use crate::stump::{Stump, ThresholdPolicy};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unsupported model format version {found} (this build reads version {FORMAT_VERSION})")]
    UnsupportedVersion { found: u64 },
    #[error("model file is not valid: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("model file is inconsistent: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundRecord {
    pub feature: u32,
    pub threshold: f64,
    pub r0: u8,
    pub alpha: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnRecord {
    pub skipped: bool,
    pub weight: f64,
    pub rounds: Vec<RoundRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodingRecord {
    pub scheme: CodingScheme,
    pub matrix: Vec<Vec<i8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingRecord {
    pub rounds: usize,
    #[serde(with = "policy_string")]
    pub thresholds: ThresholdPolicy,
    pub early_stop: bool,
    pub weighting: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdout_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdout_repetitions: Option<usize>,
    pub seed: u64,
}

mod policy_string {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::stump::ThresholdPolicy;

    pub fn serialize<S: Serializer>(p: &ThresholdPolicy, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&p.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ThresholdPolicy, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// On-disk form of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u64,
    pub num_ratings: usize,
    pub feature_dimension: u32,
    pub coding: CodingRecord,
    pub columns: Vec<ColumnRecord>,
    pub training: TrainingRecord,
}

impl ModelFile {
    pub fn from_model(m: &MultiRankModel) -> Self {
        let columns = m
            .rankers()
            .iter()
            .zip(m.weights())
            .map(|(ranker, &weight)| ColumnRecord {
                skipped: ranker.is_none(),
                weight,
                rounds: ranker
                    .iter()
                    .flat_map(|r| r.rounds())
                    .map(|round| RoundRecord {
                        feature: round.stump.feature(),
                        threshold: round.stump.threshold(),
                        r0: round.stump.default_output(),
                        alpha: round.alpha,
                        r: round.r,
                    })
                    .collect(),
            })
            .collect();
        let (holdout_fraction, holdout_repetitions) = match m.weighting() {
            WeightingScheme::Adaptive {
                holdout_fraction,
                repetitions,
            } => (Some(holdout_fraction), Some(repetitions)),
            _ => (None, None),
        };
        let cfg = m.config();
        ModelFile {
            format_version: FORMAT_VERSION,
            num_ratings: m.num_ratings(),
            feature_dimension: m.feature_dimension(),
            coding: CodingRecord {
                scheme: m.coding().scheme(),
                matrix: m.coding().rows(),
            },
            columns,
            training: TrainingRecord {
                rounds: cfg.num_rounds,
                thresholds: cfg.threshold_policy,
                early_stop: cfg.early_stop_on_zero_r,
                weighting: m.weighting().name().to_string(),
                holdout_fraction,
                holdout_repetitions,
                seed: m.seed(),
            },
        }
    }

    /// Rebuilds the model, checking the stored matrix and every embedded invariant.
    pub fn into_model(self) -> Result<MultiRankModel, ModelError> {
        let invalid = |msg: String| ModelError::Invalid(msg);
        if self.format_version != FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion {
                found: self.format_version,
            });
        }
        let coding = build_coding_matrix(self.num_ratings, self.coding.scheme)
            .map_err(|e| invalid(e.to_string()))?;
        if coding.rows() != self.coding.matrix {
            return Err(invalid(format!(
                "stored matrix does not match the {} scheme for {} ratings",
                self.coding.scheme, self.num_ratings
            )));
        }

        let mut rankers = Vec::with_capacity(self.columns.len());
        let mut weights = Vec::with_capacity(self.columns.len());
        for (col, column) in self.columns.into_iter().enumerate() {
            if column.skipped {
                if !column.rounds.is_empty() {
                    return Err(invalid(format!("skipped column {} has rounds", col + 1)));
                }
                rankers.push(None);
            } else {
                let rounds = column
                    .rounds
                    .iter()
                    .map(|rec| {
                        let stump = Stump::new(rec.feature, rec.threshold, rec.r0)
                            .map_err(|e| invalid(format!("column {}: {e}", col + 1)))?;
                        if !rec.alpha.is_finite() || !rec.r.is_finite() || rec.r.abs() > 1.0 + 1e-9 {
                            return Err(invalid(format!("column {}: bad alpha or edge", col + 1)));
                        }
                        let mut round = BoostRound::from_stump(stump, rec.r)
                            .map_err(|e| invalid(format!("column {}: {e}", col + 1)))?;
                        // the stored alpha is authoritative
                        round.alpha = rec.alpha;
                        Ok(round)
                    })
                    .collect::<Result<Vec<_>, ModelError>>()?;
                rankers.push(Some(BipartiteRanker::new(rounds, self.feature_dimension)));
            }
            weights.push(column.weight);
        }

        let training = self.training;
        if training.rounds == 0 {
            return Err(invalid("training rounds must be at least 1".into()));
        }
        let weighting = match training.weighting.as_str() {
            "adaptive" => WeightingScheme::Adaptive {
                holdout_fraction: training
                    .holdout_fraction
                    .ok_or_else(|| invalid("adaptive weighting without holdout_fraction".into()))?,
                repetitions: training
                    .holdout_repetitions
                    .ok_or_else(|| invalid("adaptive weighting without holdout_repetitions".into()))?,
            },
            other => other.parse().map_err(invalid)?,
        };
        if weighting == WeightingScheme::LpcPrior && self.coding.scheme != CodingScheme::Lpc {
            return Err(invalid("lpc-prior weighting with non-lpc coding".into()));
        }
        let config = TrainConfig {
            num_rounds: training.rounds,
            threshold_policy: training.thresholds,
            early_stop_on_zero_r: training.early_stop,
        };
        MultiRankModel::new(coding, rankers, weights, config, weighting, training.seed)
            .map_err(|e| invalid(e.to_string()))
    }
}

pub fn model_to_json(m: &MultiRankModel) -> String {
    let mut text = serde_json::to_string_pretty(&ModelFile::from_model(m)).expect("model serializes");
    text.push('\n');
    text
}

/// Parses a model, reporting an unknown version before any structural problem.
pub fn model_from_json(text: &str) -> Result<MultiRankModel, ModelError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(FORMAT_VERSION) => {}
        Some(found) => return Err(ModelError::UnsupportedVersion { found }),
        None => return Err(ModelError::Invalid("missing format_version".into())),
    }
    let file: ModelFile = serde_json::from_value(value)?;
    file.into_model()
}

pub fn save_model(m: &MultiRankModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    fs::write(path, model_to_json(m))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MultiRankModel, ModelError> {
    model_from_json(&fs::read_to_string(path)?)
}
