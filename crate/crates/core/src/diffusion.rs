//! Doubly normalized Gaussian diffusion operators over point clouds.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io;
use crate::linalg::{EigenSystem, SpdMatrix, SymmetricMatrix};

/// `N` points in `ℝ^d`, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    points: DMatrix<f64>,
    ids: Vec<usize>,
}

impl Dataset {
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        let n = points.nrows();
        Self::with_ids(points, (0..n).collect())
    }

    pub fn with_ids(points: DMatrix<f64>, ids: Vec<usize>) -> Result<Self> {
        if points.nrows() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a dataset needs at least 2 points, got {}",
                points.nrows()
            )));
        }
        if ids.len() != points.nrows() {
            return Err(Error::DimensionMismatch {
                expected: points.nrows(),
                found: ids.len(),
            });
        }
        for j in 0..points.ncols() {
            for i in 0..points.nrows() {
                if !points[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self { points, ids })
    }

    pub fn n_points(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    /// CSV (one point per row) or `.rmra` binary.
    pub fn load(path: &Path) -> Result<Self> {
        Self::new(io::read_any(path)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthRule {
    /// `σ = median pairwise distance × bandwidth_scale`.
    MedianTimesScale,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub bandwidth_scale: f64,
    pub rule: BandwidthRule,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            bandwidth_scale: 1.0,
            rule: BandwidthRule::MedianTimesScale,
        }
    }
}

impl KernelConfig {
    pub fn median_times(scale: f64) -> Self {
        Self {
            bandwidth_scale: scale,
            rule: BandwidthRule::MedianTimesScale,
        }
    }

    pub fn fixed(sigma: f64) -> Self {
        Self {
            bandwidth_scale: 1.0,
            rule: BandwidthRule::Fixed(sigma),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_scale > 0.0) || !self.bandwidth_scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bandwidth scale must be positive, got {}",
                self.bandwidth_scale
            )));
        }
        if let BandwidthRule::Fixed(s) = self.rule {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidParameter(format!("fixed sigma must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// Squared Euclidean distances, zero diagonal.
///
/// Rows are computed in parallel; each entry is a fixed-order sum, so the
/// result does not depend on the thread count.
pub fn pairwise_sq_dists(ds: &Dataset) -> SymmetricMatrix {
    let n = ds.n_points();
    let pts = ds.points();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let (a, b) = if i <= j { (i, j) } else { (j, i) };
                    let mut acc = 0.0;
                    for c in 0..pts.ncols() {
                        let d = pts[(a, c)] - pts[(b, c)];
                        acc += d * d;
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let m = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rows[i][j] });
    SymmetricMatrix::new(m).expect("finite distances")
}

/// Lower median of the off-diagonal (non-squared) distances.
pub fn median_distance(d2: &SymmetricMatrix) -> f64 {
    let n = d2.dim();
    let mut d: Vec<f64> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for j in 0..n {
        for i in 0..j {
            d.push(d2.get(i, j).max(0.0).sqrt());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let k = (d.len() - 1) / 2;
    *d.select_nth_unstable_by(k, f64::total_cmp).1
}

/// Resolves `σ` for the given squared distances.
pub fn bandwidth(d2: &SymmetricMatrix, cfg: &KernelConfig) -> Result<f64> {
    cfg.validate()?;
    match cfg.rule {
        BandwidthRule::Fixed(s) => Ok(s),
        BandwidthRule::MedianTimesScale => {
            let med = median_distance(d2);
            if !(med > 0.0) {
                return Err(Error::ZeroBandwidth);
            }
            Ok(med * cfg.bandwidth_scale)
        }
    }
}

/// `K[i,j] = exp(−D2[i,j] / σ²)`; returns the kernel and the resolved `σ`.
///
/// The Gaussian kernel is positive-definite for distinct points; when that
/// fails numerically (coincident or very close points) the plain symmetric
/// matrix is still usable, so [`gaussian_kernel_sym`] is the infallible form.
pub fn gaussian_kernel(d2: &SymmetricMatrix, cfg: &KernelConfig) -> Result<(SpdMatrix, f64)> {
    let (k, sigma) = gaussian_kernel_sym(d2, cfg)?;
    Ok((SpdMatrix::with_tolerance(k, 0.0)?, sigma))
}

pub fn gaussian_kernel_sym(d2: &SymmetricMatrix, cfg: &KernelConfig) -> Result<(SymmetricMatrix, f64)> {
    let sigma = bandwidth(d2, cfg)?;
    let s2 = sigma * sigma;
    let k = d2.as_matrix().map(|v| (-v / s2).exp());
    Ok((SymmetricMatrix::new(k)?, sigma))
}

/// The symmetric diffusion operator and the degrees `D` of the second
/// normalization.
#[derive(Clone, Debug)]
pub struct DiffusionOperator {
    pub w: SymmetricMatrix,
    pub degree: DVector<f64>,
    pub sigma: Option<f64>,
}

/// `Ŵ = D̂⁻¹ K D̂⁻¹`, then `W = D^{-1/2} Ŵ D^{-1/2}`.
pub fn normalize_kernel(k: &SymmetricMatrix) -> Result<DiffusionOperator> {
    let n = k.dim();
    let km = k.as_matrix();
    let row_sums = |m: &DMatrix<f64>| -> Result<DVector<f64>> {
        let s = DVector::from_fn(n, |i, _| m.row(i).sum());
        if let Some(i) = s.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParameter(format!("row {i} of the kernel has non-positive sum {}", s[i])));
        }
        Ok(s)
    };
    let d_hat = row_sums(km)?;
    let w_hat = DMatrix::from_fn(n, n, |i, j| km[(i, j)] / (d_hat[i] * d_hat[j]));
    let degree = row_sums(&w_hat)?;
    let inv_sqrt = degree.map(|d| 1.0 / d.sqrt());
    let w = DMatrix::from_fn(n, n, |i, j| w_hat[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    Ok(DiffusionOperator {
        w: SymmetricMatrix::new(w)?,
        degree,
        sigma: None,
    })
}

/// Distances, kernel and normalization in one call.
pub fn diffusion_operator(ds: &Dataset, cfg: &KernelConfig) -> Result<DiffusionOperator> {
    let d2 = pairwise_sq_dists(ds);
    let (k, sigma) = gaussian_kernel_sym(&d2, cfg)?;
    let mut op = normalize_kernel(&k)?;
    op.sigma = Some(sigma);
    Ok(op)
}

/// Right (`D^{-1/2}ψ`) and left (`D^{1/2}ψ`) eigenvectors of the
/// row-stochastic diffusion-maps operator `D^{-1}Ŵ`.
#[derive(Clone, Debug)]
pub struct DiffusionMaps {
    pub values: DVector<f64>,
    pub right: DMatrix<f64>,
    pub left: DMatrix<f64>,
}

pub fn dm_eigenvectors(eig: &EigenSystem, degree: &DVector<f64>) -> Result<DiffusionMaps> {
    if eig.vectors.nrows() != degree.len() {
        return Err(Error::DimensionMismatch {
            expected: eig.vectors.nrows(),
            found: degree.len(),
        });
    }
    let mut right = eig.vectors.clone();
    let mut left = eig.vectors.clone();
    for i in 0..degree.len() {
        let s = degree[i].sqrt();
        right.row_mut(i).scale_mut(1.0 / s);
        left.row_mut(i).scale_mut(s);
    }
    Ok(DiffusionMaps {
        values: eig.values.clone(),
        right,
        left,
    })
}
