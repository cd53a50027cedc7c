//! Ranking quality measures over a single global ranked list.
//!
//! NDCG here uses the linear positional discount `|S| - i` (1-based `i`), so the last
//! item of a list never contributes. Pairwise measures count a pair as mis-ordered
//! only when the higher-rated instance scores strictly lower; ties cost nothing.

use std::cmp::Ordering;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("empty list")]
    Empty,
    #[error("score of {0:?} is not finite")]
    NonFiniteScore(String),
    #[error("rating {rating} of {id:?} is outside [0, {max}]")]
    RatingOutOfRange { id: String, rating: usize, max: usize },
    #[error("need at least two distinct ratings")]
    SingleRating,
    #[error("expected exactly two distinct ratings, found {0}")]
    NotBipartite(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredEntry {
    pub id: String,
    pub score: f64,
    pub rating: usize,
}

/// Scored, rated instances in input order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoredList {
    entries: Vec<ScoredEntry>,
}

impl ScoredList {
    pub fn new(entries: Vec<ScoredEntry>) -> Result<Self, MetricError> {
        if let Some(e) = entries.iter().find(|e| !e.score.is_finite()) {
            return Err(MetricError::NonFiniteScore(e.id.clone()));
        }
        Ok(Self { entries })
    }

    /// Convenience constructor with ids `0..n`.
    pub fn from_scores(scores: &[f64], ratings: &[usize]) -> Result<Self, MetricError> {
        assert_eq!(scores.len(), ratings.len(), "scores and ratings differ in length");
        Self::new(
            scores
                .iter()
                .zip(ratings)
                .enumerate()
                .map(|(k, (&score, &rating))| ScoredEntry {
                    id: k.to_string(),
                    score,
                    rating,
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[ScoredEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries sorted by descending score; ties keep input order.
    pub fn sorted_desc(&self) -> Vec<&ScoredEntry> {
        let mut out: Vec<&ScoredEntry> = self.entries.iter().collect();
        out.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal));
        out
    }

    pub fn into_sorted_desc(mut self) -> Self {
        self.entries
            .sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal));
        self
    }

    fn distinct_ratings(&self) -> usize {
        let mut r: Vec<usize> = self.entries.iter().map(|e| e.rating).collect();
        r.sort_unstable();
        r.dedup();
        r.len()
    }
}

/// `sum_i r_i * (n - i)` over 1-based positions.
pub fn dcg(ratings_in_rank_order: &[usize]) -> Result<f64, MetricError> {
    if ratings_in_rank_order.is_empty() {
        return Err(MetricError::Empty);
    }
    let n = ratings_in_rank_order.len();
    Ok(ratings_in_rank_order
        .iter()
        .enumerate()
        .map(|(k, &r)| r as f64 * (n - 1 - k) as f64)
        .sum())
}

/// DCG of the score ordering over DCG of the ideal ordering; 1.0 when the ideal DCG is 0.
pub fn ndcg(scored: &ScoredList) -> Result<f64, MetricError> {
    if scored.is_empty() {
        return Err(MetricError::Empty);
    }
    let ranked: Vec<usize> = scored.sorted_desc().iter().map(|e| e.rating).collect();
    let mut ideal = ranked.clone();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let best = dcg(&ideal)?;
    if best == 0.0 {
        return Ok(1.0);
    }
    Ok(dcg(&ranked)? / best)
}

/// Fenwick tree over rating counts.
struct Counts(Vec<u64>);

impl Counts {
    fn add(&mut self, rating: usize) {
        let mut i = rating + 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted ratings `<= rating`.
    fn prefix(&self, rating: usize) -> u64 {
        let mut i = rating + 1;
        let mut total = 0;
        while i > 0 {
            total += self.0[i];
            i -= i & i.wrapping_neg();
        }
        total
    }
}

/// Fraction of cross-rating pairs whose higher-rated member scores strictly lower.
///
/// Runs in `O(n log n + n log L)`: entries are swept by ascending score and each one
/// counts the strictly lower-scored entries that carry a higher rating.
pub fn c_index_error(scored: &ScoredList, num_ratings: usize) -> Result<f64, MetricError> {
    if scored.is_empty() {
        return Err(MetricError::Empty);
    }
    let max = num_ratings.saturating_sub(1);
    if let Some(e) = scored.entries.iter().find(|e| e.rating >= num_ratings) {
        return Err(MetricError::RatingOutOfRange {
            id: e.id.clone(),
            rating: e.rating,
            max,
        });
    }
    let mut sizes = vec![0u64; num_ratings];
    for e in &scored.entries {
        sizes[e.rating] += 1;
    }
    let n = scored.len() as u64;
    let same: u64 = sizes.iter().map(|s| s * s).sum();
    let cross_pairs = (n * n - same) / 2;
    if cross_pairs == 0 {
        return Err(MetricError::SingleRating);
    }

    let mut order: Vec<&ScoredEntry> = scored.entries.iter().collect();
    order.sort_by(|a, b| a.score.partial_cmp(&b.score).unwrap_or(Ordering::Equal));
    let mut seen = Counts(vec![0; num_ratings + 1]);
    let mut seen_total = 0u64;
    let mut wrong = 0u64;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && order[end].score == order[start].score {
            end += 1;
        }
        for e in &order[start..end] {
            wrong += seen_total - seen.prefix(e.rating);
        }
        for e in &order[start..end] {
            seen.add(e.rating);
            seen_total += 1;
        }
        start = end;
    }
    Ok(wrong as f64 / cross_pairs as f64)
}

/// Bipartite AUC as the complement of the pairwise error.
pub fn auc(scored: &ScoredList) -> Result<f64, MetricError> {
    if scored.is_empty() {
        return Err(MetricError::Empty);
    }
    let distinct = scored.distinct_ratings();
    if distinct != 2 {
        return Err(MetricError::NotBipartite(distinct));
    }
    let num_ratings = scored.entries.iter().map(|e| e.rating).max().unwrap_or(0) + 1;
    Ok(1.0 - c_index_error(scored, num_ratings)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_c_index(scores: &[f64], ratings: &[usize]) -> f64 {
        let (mut wrong, mut total) = (0usize, 0usize);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if ratings[i] > ratings[j] {
                    total += 1;
                    if scores[i] < scores[j] {
                        wrong += 1;
                    }
                }
            }
        }
        wrong as f64 / total as f64
    }

    #[test]
    fn dcg_fixtures() {
        assert_eq!(dcg(&[2, 1, 0]).unwrap(), 5.0);
        assert_eq!(dcg(&[0, 0, 0]).unwrap(), 0.0);
        assert_eq!(dcg(&[5]).unwrap(), 0.0);
        assert_eq!(dcg(&[]), Err(MetricError::Empty));
    }

    #[test]
    fn ndcg_fixtures() {
        // ranked ratings [0, 2, 1]
        let l = ScoredList::from_scores(&[3.0, 2.0, 1.0], &[0, 2, 1]).unwrap();
        assert!((ndcg(&l).unwrap() - 0.4).abs() < 1e-12);
        let ideal = ScoredList::from_scores(&[3.0, 2.0, 1.0], &[2, 1, 0]).unwrap();
        assert_eq!(ndcg(&ideal).unwrap(), 1.0);
        let flat = ScoredList::from_scores(&[0.1, 5.0, 2.0], &[1, 1, 1]).unwrap();
        assert_eq!(ndcg(&flat).unwrap(), 1.0);
        let single = ScoredList::from_scores(&[1.0], &[3]).unwrap();
        assert_eq!(ndcg(&single).unwrap(), 1.0);
    }

    #[test]
    fn ndcg_ties_keep_input_order() {
        let l = ScoredList::from_scores(&[1.0, 1.0, 1.0], &[0, 1, 2]).unwrap();
        // order stays [0, 1, 2]: dcg = 0*2 + 1*1 + 0 = 1, ideal 5
        assert!((ndcg(&l).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn c_index_fixtures() {
        let ordered = ScoredList::from_scores(&[1.0, 2.0, 3.0], &[0, 1, 2]).unwrap();
        assert_eq!(c_index_error(&ordered, 3).unwrap(), 0.0);
        let reversed = ScoredList::from_scores(&[3.0, 2.0, 1.0], &[0, 1, 2]).unwrap();
        assert_eq!(c_index_error(&reversed, 3).unwrap(), 1.0);

        let scores = [2.0, 1.0, 3.0, 2.0];
        let ratings = [0, 1, 1, 2];
        let expected = brute_c_index(&scores, &ratings);
        assert_eq!(expected, 0.4);
        let l = ScoredList::from_scores(&scores, &ratings).unwrap();
        assert_eq!(c_index_error(&l, 3).unwrap(), expected);
    }

    #[test]
    fn c_index_errors() {
        let one = ScoredList::from_scores(&[1.0, 2.0], &[1, 1]).unwrap();
        assert_eq!(c_index_error(&one, 2), Err(MetricError::SingleRating));
        let l = ScoredList::from_scores(&[1.0, 2.0], &[0, 3]).unwrap();
        assert!(matches!(
            c_index_error(&l, 3),
            Err(MetricError::RatingOutOfRange { rating: 3, .. })
        ));
    }

    #[test]
    fn auc_fixtures() {
        let good = ScoredList::from_scores(&[2.0, 1.0], &[1, 0]).unwrap();
        assert_eq!(auc(&good).unwrap(), 1.0);
        let bad = ScoredList::from_scores(&[1.0, 2.0], &[1, 0]).unwrap();
        assert_eq!(auc(&bad).unwrap(), 0.0);
        let mixed = ScoredList::from_scores(&[3.0, 1.0, 2.0, 0.0], &[1, 1, 0, 0]).unwrap();
        assert_eq!(auc(&mixed).unwrap(), 0.75);
        let three = ScoredList::from_scores(&[3.0, 1.0, 2.0], &[0, 1, 2]).unwrap();
        assert_eq!(auc(&three), Err(MetricError::NotBipartite(3)));
    }

    #[test]
    fn rejects_non_finite_scores() {
        assert!(ScoredList::from_scores(&[f64::NAN], &[0]).is_err());
    }
}
