//! Multipartite learning to rank by decomposition into bipartite problems.
//!
//! An `L`-rating ranking problem is split by a [coding matrix](coding) into
//! bipartite columns, each column is learned with [RankBoost](rankboost) over
//! [threshold stumps](stump), and the [ensemble] fuses the column scores with
//! predefined or holdout-estimated weights. [metrics] provides the linear-discount
//! NDCG, C-index and AUC used to evaluate the result.

pub mod cli;
pub mod coding;
pub mod data;
pub mod ensemble;
pub mod metrics;
pub mod model_file;
pub mod rankboost;
pub mod stump;

pub use coding::{build_coding_matrix, column_dataset, CodingMatrix, CodingScheme};
pub use data::{deduplicate, parse_dataset, split_holdout, Dataset, Instance, SplitSpec};
pub use ensemble::{fuse_score, rank, train_multirank, MultiRankModel, WeightingScheme};
pub use metrics::{auc, c_index_error, dcg, ndcg, ScoredEntry, ScoredList};
pub use rankboost::{alpha_from_r, train_bipartite, BipartiteRanker, BoostRound, TrainConfig};
pub use stump::{best_stump, edge_r, Stump, ThresholdPolicy, WeightedBipartiteView};
