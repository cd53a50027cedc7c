mod common;

use multirank::data::{mix_seed, parse_dataset_str};
use multirank::metrics::MetricError;
use multirank::stump::candidate_thresholds;
use multirank::{
    auc, best_stump, c_index_error, dcg, deduplicate, edge_r, ndcg, split_holdout, Dataset, Instance, ScoredList,
    SplitSpec, Stump, ThresholdPolicy, WeightedBipartiteView,
};
use proptest::prelude::*;

fn brute_c_index(scores: &[f64], ratings: &[usize]) -> Option<f64> {
    let (mut bad, mut total) = (0u64, 0u64);
    for a in 0..scores.len() {
        for b in 0..scores.len() {
            if ratings[a] > ratings[b] {
                total += 1;
                if scores[a] < scores[b] {
                    bad += 1;
                }
            }
        }
    }
    (total > 0).then(|| bad as f64 / total as f64)
}

fn scored_ratings() -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
    (1usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec((-50i32..50).prop_map(f64::from), n),
            prop::collection::vec(0usize..5, n),
        )
    })
}

fn bipartite_lists() -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(-20.0f64..20.0, n),
            prop::collection::vec(0usize..2, n).prop_filter("both classes", |r| r.contains(&0) && r.contains(&1)),
        )
    })
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    prop::collection::vec(
        (
            0usize..4,
            prop::collection::btree_map(1u32..6, (-4i32..4).prop_map(|v| f64::from(v) * 0.5), 0..4),
        ),
        1..30,
    )
    .prop_map(|rows| {
        let instances = rows
            .into_iter()
            .enumerate()
            .map(|(k, (rating, fs))| Instance::new(format!("r{k}"), fs.into_iter().collect(), rating).unwrap())
            .collect();
        Dataset::new(instances, 4).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dcg_matches_positional_sum(ratings in prop::collection::vec(0usize..6, 1..60)) {
        let n = ratings.len();
        let mut expected = 0.0;
        for (pos, &r) in ratings.iter().enumerate() {
            expected += r as f64 * (n - (pos + 1)) as f64;
        }
        prop_assert!((dcg(&ratings).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ndcg_is_a_fraction((scores, ratings) in scored_ratings()) {
        let v = ndcg(&ScoredList::from_scores(&scores, &ratings).unwrap()).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
    }

    #[test]
    fn metrics_ignore_monotone_rescaling((scores, ratings) in scored_ratings()) {
        let warped: Vec<f64> = scores.iter().map(|s| s * s * s + 7.0 * s - 3.0).collect();
        let a = ScoredList::from_scores(&scores, &ratings).unwrap();
        let b = ScoredList::from_scores(&warped, &ratings).unwrap();
        prop_assert_eq!(ndcg(&a).unwrap(), ndcg(&b).unwrap());
        prop_assert_eq!(c_index_error(&a, 5), c_index_error(&b, 5));
    }

    #[test]
    fn c_index_matches_pair_enumeration((scores, ratings) in scored_ratings()) {
        let list = ScoredList::from_scores(&scores, &ratings).unwrap();
        match brute_c_index(&scores, &ratings) {
            Some(e) => prop_assert!((c_index_error(&list, 5).unwrap() - e).abs() < 1e-12),
            None => prop_assert_eq!(c_index_error(&list, 5), Err(MetricError::SingleRating)),
        }
    }

    #[test]
    fn negated_scores_complement_the_error(
        perm in Just((0..25).collect::<Vec<i32>>()).prop_shuffle(),
        ratings in prop::collection::vec(0usize..4, 25),
    ) {
        prop_assume!(ratings.iter().any(|&r| r != ratings[0]));
        let scores: Vec<f64> = perm.iter().map(|&p| f64::from(p)).collect();
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        let e = c_index_error(&ScoredList::from_scores(&scores, &ratings).unwrap(), 4).unwrap();
        let f = c_index_error(&ScoredList::from_scores(&negated, &ratings).unwrap(), 4).unwrap();
        prop_assert!((e + f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_complements_c_index((scores, ratings) in bipartite_lists()) {
        let list = ScoredList::from_scores(&scores, &ratings).unwrap();
        let sum = auc(&list).unwrap() + c_index_error(&list, 2).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dedup_is_idempotent(d in dataset_strategy()) {
        let once = deduplicate(&d);
        prop_assert_eq!(deduplicate(&once), once.clone());
        // every original instance is represented by a kept one with at least its rating
        for x in d.instances() {
            let kept = once.instances().iter().find(|y| y.features() == x.features()).unwrap();
            prop_assert!(kept.rating() >= x.rating());
        }
    }

    #[test]
    fn text_round_trip(d in dataset_strategy()) {
        let back = parse_dataset_str(&d.to_text(), Some(d.num_ratings())).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn holdout_split_partitions(d in dataset_strategy(), frac in 0.1f64..0.9, seed in any::<u64>(), rep in 0usize..3) {
        let spec = SplitSpec::new(frac, 3, seed).unwrap();
        let split = split_holdout(&d, &spec, rep).unwrap();
        let mut ids: Vec<&str> = split.train.instances().iter().chain(split.holdout.instances()).map(|x| x.id()).collect();
        prop_assert_eq!(ids.len(), d.len());
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), d.len());
        for (rating, &n) in d.class_sizes().iter().enumerate() {
            let held = split.holdout.instances().iter().filter(|x| x.rating() == rating).count();
            if n >= 2 {
                prop_assert!(held >= 1 && held < n);
            } else {
                prop_assert_eq!(held, 0);
            }
        }
        let again = split_holdout(&d, &spec, rep).unwrap();
        prop_assert_eq!(again.holdout, split.holdout);
    }

    #[test]
    fn factorized_edge_matches_pair_sum(seed in any::<u64>(), m in 1usize..12, n in 1usize..12, theta in -1.5f64..1.5, r0 in 0u8..2, feature in 1u32..5) {
        let mut rng = common::rng(seed);
        let xs = common::random_bipartite(&mut rng, m, n, 4, 0.2);
        let (pos, neg) = common::sides(&xs);
        let raw_v: Vec<f64> = (0..m).map(|k| ((mix_seed(seed, k as u64) % 1000) + 1) as f64).collect();
        let raw_w: Vec<f64> = (0..n).map(|k| ((mix_seed(seed, 100 + k as u64) % 1000) + 1) as f64).collect();
        let (sv, sw) = (raw_v.iter().sum::<f64>(), raw_w.iter().sum::<f64>());
        let v: Vec<f64> = raw_v.iter().map(|x| x / sv).collect();
        let w: Vec<f64> = raw_w.iter().map(|x| x / sw).collect();
        let view = WeightedBipartiteView::new(
            pos.iter().copied().zip(v.iter().copied()).collect(),
            neg.iter().copied().zip(w.iter().copied()).collect(),
        ).unwrap();
        let s = Stump::new(feature, theta, r0).unwrap();
        let hp: Vec<u8> = pos.iter().map(|x| s.eval(x)).collect();
        let hn: Vec<u8> = neg.iter().map(|x| s.eval(x)).collect();
        prop_assert!((edge_r(&s, &view) - common::pairwise_edge(&v, &w, &hp, &hn)).abs() < 1e-12);

        // swapping the roles of the two sides negates the edge
        let swapped = WeightedBipartiteView::new(
            neg.iter().copied().zip(w.iter().copied()).collect(),
            pos.iter().copied().zip(v.iter().copied()).collect(),
        ).unwrap();
        prop_assert!((edge_r(&s, &swapped) + edge_r(&s, &view)).abs() < 1e-12);
    }

    #[test]
    fn best_stump_is_the_exhaustive_maximum(seed in any::<u64>(), m in 1usize..10, n in 1usize..10) {
        let mut rng = common::rng(seed);
        let xs = common::random_bipartite(&mut rng, m, n, 3, 0.2);
        let (pos, neg) = common::sides(&xs);
        let view = WeightedBipartiteView::uniform(&pos, &neg).unwrap();
        let (v, w) = (vec![1.0 / m as f64; m], vec![1.0 / n as f64; n]);

        let mut best = 0.0f64;
        for feature in 1..=3u32 {
            let mut values: Vec<f64> = xs.iter().filter_map(|x| x.feature(feature)).collect();
            if values.is_empty() {
                continue;
            }
            values.sort_by(f64::total_cmp);
            let mut thetas = vec![values[0] - 1.0];
            thetas.extend(values);
            for theta in thetas {
                for r0 in [0u8, 1] {
                    let s = Stump::new(feature, theta, r0).unwrap();
                    let hp: Vec<u8> = pos.iter().map(|x| s.eval(x)).collect();
                    let hn: Vec<u8> = neg.iter().map(|x| s.eval(x)).collect();
                    best = best.max(common::pairwise_edge(&v, &w, &hp, &hn).abs());
                }
            }
        }
        match best_stump(&view, &[1, 2, 3], ThresholdPolicy::All) {
            Ok((s, r)) => {
                prop_assert!((r.abs() - best).abs() < 1e-12);
                prop_assert!((edge_r(&s, &view) - r).abs() < 1e-12);
            }
            Err(_) => prop_assert!(best < 1e-12),
        }
    }

    #[test]
    fn quantile_thresholds_are_a_subset(values in prop::collection::vec(-100i32..100, 1..80), count in 1usize..20) {
        let instances: Vec<Instance> = values
            .iter()
            .enumerate()
            .map(|(k, &v)| Instance::new(format!("q{k}"), vec![(1, f64::from(v))], k % 2).unwrap())
            .collect();
        let d = Dataset::new(instances, 2).unwrap();
        let all = candidate_thresholds(&d, 1, ThresholdPolicy::All);
        let some = candidate_thresholds(&d, 1, ThresholdPolicy::Count(count));
        prop_assert_eq!(some[0], all[0]);
        prop_assert!(some.len() <= count + 1);
        prop_assert!(some.windows(2).all(|p| p[0] < p[1]));
        prop_assert!(some.iter().all(|t| all.contains(t)));
    }
}
