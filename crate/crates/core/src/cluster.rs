//! Lloyd's k-means with k-means++ seeding.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::sampling;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once no centroid moves by more than this (Euclidean).
    pub tol: f64,
    /// Independent seedings; the lowest inertia wins.
    pub restarts: usize,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iter: 300,
            tol: 1e-8,
            restarts: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    /// Cluster of each row; clusters are numbered by first appearance.
    pub labels: Vec<usize>,
    pub centroids: DMatrix<f64>,
    pub inertia: f64,
    pub iterations: usize,
}

impl KMeansResult {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.centroids.nrows()];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }
}

fn sq_dist(data: &DMatrix<f64>, i: usize, c: &DMatrix<f64>, j: usize) -> f64 {
    let mut acc = 0.0;
    for d in 0..data.ncols() {
        let x = data[(i, d)] - c[(j, d)];
        acc += x * x;
    }
    acc
}

fn distinct_rows(data: &DMatrix<f64>) -> usize {
    let mut rows: Vec<Vec<u64>> = (0..data.nrows())
        .map(|i| data.row(i).iter().map(|v| (v + 0.0).to_bits()).collect())
        .collect();
    rows.sort();
    rows.dedup();
    rows.len()
}

fn seed_plus_plus<R: Rng>(data: &DMatrix<f64>, k: usize, rng: &mut R) -> DMatrix<f64> {
    let n = data.nrows();
    let mut centroids = DMatrix::zeros(k, data.ncols());
    let first = rng.random_range(0..n);
    centroids.set_row(0, &data.row(first));
    let mut best: Vec<f64> = (0..n).map(|i| sq_dist(data, i, &centroids, 0)).collect();
    for c in 1..k {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in best.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.set_row(c, &data.row(pick));
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(sq_dist(data, i, &centroids, c));
        }
    }
    centroids
}

fn lloyd(data: &DMatrix<f64>, mut centroids: DMatrix<f64>, cfg: &KMeansConfig) -> KMeansResult {
    let (n, k) = (data.nrows(), cfg.k);
    let mut labels = vec![0; n];
    let mut iterations = 0;
    loop {
        for (i, l) in labels.iter_mut().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for j in 0..k {
                let d = sq_dist(data, i, &centroids, j);
                if d < best.0 {
                    best = (d, j);
                }
            }
            *l = best.1;
        }
        iterations += 1;
        let mut next = DMatrix::zeros(k, data.ncols());
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for d in 0..data.ncols() {
                next[(l, d)] += data[(i, d)];
            }
        }
        let mut shift: f64 = 0.0;
        for j in 0..k {
            if counts[j] == 0 {
                // an emptied cluster keeps its centroid
                next.set_row(j, &centroids.row(j));
            } else {
                for d in 0..data.ncols() {
                    next[(j, d)] /= counts[j] as f64;
                }
            }
            shift = shift.max((next.row(j) - centroids.row(j)).norm());
        }
        centroids = next;
        if shift <= cfg.tol || iterations >= cfg.max_iter {
            break;
        }
    }
    let inertia = labels.iter().enumerate().map(|(i, &l)| sq_dist(data, i, &centroids, l)).sum();
    KMeansResult {
        labels,
        centroids,
        inertia,
        iterations,
    }
}

fn canonical(mut r: KMeansResult) -> KMeansResult {
    let k = r.centroids.nrows();
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &l in &r.labels {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
    }
    for m in map.iter_mut().filter(|m| **m == usize::MAX) {
        *m = next;
        next += 1;
    }
    let mut centroids = r.centroids.clone();
    for (old, &new) in map.iter().enumerate() {
        centroids.set_row(new, &r.centroids.row(old));
    }
    r.labels.iter_mut().for_each(|l| *l = map[*l]);
    r.centroids = centroids;
    r
}

/// Clusters the rows of `data`.
pub fn kmeans(data: &DMatrix<f64>, cfg: &KMeansConfig) -> Result<KMeansResult> {
    if cfg.k == 0 || cfg.max_iter == 0 || cfg.restarts == 0 {
        return Err(Error::InvalidParameter("k, max_iter and restarts must be positive".into()));
    }
    let distinct = distinct_rows(data);
    if cfg.k > distinct {
        return Err(Error::InvalidParameter(format!(
            "k = {} exceeds the number of distinct points ({distinct})",
            cfg.k
        )));
    }
    let mut rng = sampling::rng(cfg.seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..cfg.restarts {
        let r = lloyd(data, seed_plus_plus(data, cfg.k, &mut rng), cfg);
        if best.as_ref().is_none_or(|b| r.inertia < b.inertia) {
            best = Some(r);
        }
    }
    Ok(canonical(best.expect("at least one restart")))
}
