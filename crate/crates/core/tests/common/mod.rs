#![allow(dead_code)]

use multirank::{Dataset, Instance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random instance over features `1..=features`, each present with probability
/// `1 - missing`. Half the time values come from a coarse grid so ties show up.
pub fn random_instance(rng: &mut ChaCha8Rng, id: String, features: u32, missing: f64, rating: usize) -> Instance {
    let coarse = rng.gen_bool(0.5);
    let mut fs = Vec::new();
    for idx in 1..=features {
        if rng.gen_bool(missing) {
            continue;
        }
        let v: f64 = if coarse {
            f64::from(rng.gen_range(-3i32..=3))
        } else {
            rng.gen_range(-1.0..1.0)
        };
        fs.push((idx, v));
    }
    Instance::new(id, fs, rating).unwrap()
}

/// `m` positives (rating 1) followed by `n` negatives (rating 0).
pub fn random_bipartite(rng: &mut ChaCha8Rng, m: usize, n: usize, features: u32, missing: f64) -> Vec<Instance> {
    (0..m + n)
        .map(|k| random_instance(rng, format!("x{k}"), features, missing, usize::from(k < m)))
        .collect()
}

pub fn sides(xs: &[Instance]) -> (Vec<&Instance>, Vec<&Instance>) {
    xs.iter().partition(|x| x.rating() == 1)
}

/// Explicit `sum_ij D(i,j) (h(x_i) - h(x_j))` for a product distribution.
pub fn pairwise_edge(v: &[f64], w: &[f64], hp: &[u8], hn: &[u8]) -> f64 {
    let mut r = 0.0;
    for (vi, &hi) in v.iter().zip(hp) {
        for (wj, &hj) in w.iter().zip(hn) {
            r += vi * wj * (f64::from(hi) - f64::from(hj));
        }
    }
    r
}

/// Four ratings by quartile of feature 1 (uniform on [0,1)), features 2..=5 pure noise.
/// With `flip > 0` each rating is replaced by a different random one with that probability.
pub fn quartile_dataset(seed: u64, n: usize, flip: f64) -> Dataset {
    let mut rng = rng(seed);
    let instances = (0..n)
        .map(|k| {
            let x1: f64 = rng.gen();
            let mut rating = ((x1 * 4.0) as usize).min(3);
            let mut fs = vec![(1, x1)];
            for idx in 2..=5 {
                fs.push((idx, rng.gen::<f64>()));
            }
            if flip > 0.0 && rng.gen_bool(flip) {
                rating = (rating + rng.gen_range(1..4)) % 4;
            }
            Instance::new(format!("s{seed}_{k}"), fs, rating).unwrap()
        })
        .collect();
    Dataset::new(instances, 4).unwrap()
}

/// Random multipartite dataset with `l` levels where feature 1 carries some signal.
pub fn random_multipartite(rng: &mut ChaCha8Rng, n: usize, l: usize, features: u32) -> Dataset {
    let instances = (0..n)
        .map(|k| {
            let rating = rng.gen_range(0..l);
            let mut fs = Vec::new();
            for idx in 1..=features {
                if idx > 1 && rng.gen_bool(0.2) {
                    continue;
                }
                let base = if idx == 1 { rating as f64 } else { 0.0 };
                fs.push((idx, base + rng.gen_range(-1.0..1.0)));
            }
            Instance::new(format!("m{k}"), fs, rating).unwrap()
        })
        .collect();
    Dataset::new(instances, l).unwrap()
}
