//! Seeded random instances: orthonormal frames and SPD matrices with a
//! prescribed spectrum.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{SpdMatrix, SymmetricMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Gram–Schmidt (two passes) on the columns of `a`.
///
/// Columns that collapse numerically are left as zero; for Gaussian input
/// this does not happen.
pub fn gram_schmidt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q = a.clone();
    for k in 0..q.ncols() {
        for _ in 0..2 {
            for j in 0..k {
                let proj = q.column(j).dot(&q.column(k));
                let qj = q.column(j).into_owned();
                q.column_mut(k).axpy(-proj, &qj, 1.0);
            }
        }
        let norm = q.column(k).norm();
        if norm > 0.0 {
            q.column_mut(k).scale_mut(1.0 / norm);
        }
    }
    q
}

/// Random `n×k` matrix with orthonormal columns.
pub fn random_orthonormal<R: Rng>(n: usize, k: usize, rng: &mut R) -> DMatrix<f64> {
    gram_schmidt(&gaussian_matrix(n, k, rng))
}

/// Uniform sample of `[lo, hi]` on a log scale.
pub fn log_uniform<R: Rng>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
}

/// `Q diag(values) Qᵀ` with a random orthonormal `Q`.
pub fn spd_with_spectrum<R: Rng>(values: &[f64], rng: &mut R) -> SpdMatrix {
    let q = random_orthonormal(values.len(), values.len(), rng);
    SpdMatrix::new(SymmetricMatrix::from_spectrum(&q, values).expect("finite spectrum"))
        .expect("positive spectrum")
}

/// Random SPD matrix with eigenvalues log-uniform in `[min_eig, 1]`; the
/// extremes are pinned so the condition number is exactly `1 / min_eig`.
pub fn random_spd<R: Rng>(n: usize, min_eig: f64, rng: &mut R) -> SpdMatrix {
    let mut values: Vec<f64> = (0..n).map(|_| log_uniform(min_eig, 1.0, rng)).collect();
    if n >= 2 {
        values[0] = 1.0;
        values[n - 1] = min_eig;
    }
    spd_with_spectrum(&values, rng)
}
