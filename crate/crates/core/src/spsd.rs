//! Fixed-rank SPSD geometry.
//!
//! A rank-`r` SPSD matrix is carried as `V Λ Vᵀ` with `V` an `N×r` Stiefel
//! point. Geodesics between two such matrices are approximated by combining
//! a Grassmann geodesic between the ranges with an SPD geodesic between the
//! aligned `r×r` cores.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::io;
use crate::linalg::{
    orthonormality_error, sym_eig, thin_qr, EigenOrdering, LowRankSymmetric, SpdMatrix, SymmetricMatrix,
};
use crate::spd::{self, GeodesicParam};

/// Default relative eigenvalue threshold for the numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Tolerated negative drift of a PSD spectrum, relative to `λ_max`.
pub const NEGATIVE_DRIFT_TOL: f64 = 1e-10;

/// Singular values of `sin Θ` below this are treated as zero by the
/// pseudo-inverse.
pub const SIN_PINV_TOL: f64 = 1e-12;

const SVD_MAX_ITER: usize = 10_000;
const ORTHO_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum RankPolicy {
    /// Keep exactly this many leading eigenpairs.
    Fixed(usize),
    /// Keep eigenpairs with `λ > tol · λ_max`.
    Relative(f64),
}

impl Default for RankPolicy {
    fn default() -> Self {
        RankPolicy::Relative(DEFAULT_RANK_TOL)
    }
}

/// Rank-`r` factorization `V diag(λ) Vᵀ`, `λ` strictly positive and descending.
#[derive(Clone, Debug, PartialEq)]
pub struct SpsdFactors {
    v: DMatrix<f64>,
    lambda: DVector<f64>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct FactorsSidecar {
    n: usize,
    r: usize,
}

impl SpsdFactors {
    pub fn new(v: DMatrix<f64>, lambda: DVector<f64>) -> Result<Self> {
        if v.ncols() != lambda.len() {
            return Err(Error::DimensionMismatch {
                expected: v.ncols(),
                found: lambda.len(),
            });
        }
        let dev = orthonormality_error(&v);
        if dev > 1e-10 {
            return Err(Error::NotOrthonormal { deviation: dev });
        }
        for &l in lambda.iter() {
            if !(l > 0.0) {
                return Err(Error::NotPositiveDefinite { min_eig: l, tol: 0.0 });
            }
        }
        Ok(Self { v, lambda })
    }

    /// Diagonalizes an SPD core expressed in an orthonormal `basis`.
    pub fn from_core(basis: &DMatrix<f64>, core: &SymmetricMatrix) -> Result<Self> {
        let e = sym_eig(core, EigenOrdering::ByValueDesc)?;
        if let Some(&bad) = e.values.iter().find(|l| !(**l > 0.0)) {
            return Err(Error::NotPositiveDefinite { min_eig: bad, tol: 0.0 });
        }
        Self::new(basis * &e.vectors, e.values)
    }

    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        self.v.ncols()
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    pub fn lambda_matrix(&self) -> SpdMatrix {
        SpdMatrix::with_tolerance(
            SymmetricMatrix::from_diagonal(self.lambda.as_slice()).expect("finite"),
            0.0,
        )
        .expect("positive")
    }

    pub fn to_dense(&self) -> Result<SymmetricMatrix> {
        SymmetricMatrix::from_spectrum(&self.v, self.lambda.as_slice())
    }

    /// Keeps the leading `r` eigenpairs.
    pub fn truncate(&self, r: usize) -> Result<Self> {
        if r > self.rank() || r == 0 {
            return Err(Error::RankUnavailable {
                requested: r,
                available: self.rank(),
            });
        }
        Ok(Self {
            v: self.v.columns(0, r).into_owned(),
            lambda: self.lambda.rows(0, r).into_owned(),
        })
    }

    /// `{dir}/{stem}_V.rmra`, `{dir}/{stem}_Lambda.rmra` and `{dir}/{stem}.json`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        io::write_matrix(&dir.join(format!("{stem}_V.rmra")), &self.v)?;
        io::write_matrix(
            &dir.join(format!("{stem}_Lambda.rmra")),
            &DMatrix::from_diagonal(&self.lambda),
        )?;
        io::write_json(
            &dir.join(format!("{stem}.json")),
            &FactorsSidecar {
                n: self.n(),
                r: self.rank(),
            },
        )
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let side: FactorsSidecar = io::read_json(&dir.join(format!("{stem}.json")))?;
        let v = io::read_matrix(&dir.join(format!("{stem}_V.rmra")))?;
        let lam = io::read_matrix(&dir.join(format!("{stem}_Lambda.rmra")))?;
        if v.shape() != (side.n, side.r) || lam.shape() != (side.r, side.r) {
            return Err(Error::Format {
                path: dir.join(format!("{stem}.json")),
                reason: "factor shapes disagree with sidecar".into(),
            });
        }
        Self::new(v, lam.diagonal())
    }
}

/// Top-`r` eigenpairs of a PSD matrix.
pub fn spsd_factorize(m: &SymmetricMatrix, policy: RankPolicy) -> Result<SpsdFactors> {
    let e = sym_eig(m, EigenOrdering::ByValueDesc)?;
    let lmax = e.max_value();
    if !(lmax > 0.0) {
        return Err(Error::RankUnavailable {
            requested: match policy {
                RankPolicy::Fixed(r) => r,
                RankPolicy::Relative(_) => 1,
            },
            available: 0,
        });
    }
    let lmin = e.min_value();
    if lmin < -NEGATIVE_DRIFT_TOL * lmax {
        return Err(Error::NotPositiveSemidefinite {
            eigenvalue: lmin,
            floor: NEGATIVE_DRIFT_TOL * lmax,
        });
    }
    let available = e.values.iter().filter(|&&l| l > DEFAULT_RANK_TOL * lmax).count();
    let r = match policy {
        RankPolicy::Fixed(r) => {
            if r == 0 || r > available {
                return Err(Error::RankUnavailable {
                    requested: r,
                    available,
                });
            }
            r
        }
        RankPolicy::Relative(tol) => {
            if !(tol > 0.0) {
                return Err(Error::InvalidParameter(format!("rank tolerance {tol} must be positive")));
            }
            e.values.iter().filter(|&&l| l > tol * lmax).count().max(1)
        }
    };
    SpsdFactors::new(e.vectors.columns(0, r).into_owned(), e.values.rows(0, r).into_owned())
}

/// SVD `V2ᵀ V1 = O2 Σ O1ᵀ`, `Σ` descending and clamped to `[0, 1]`,
/// `Θ = arccos Σ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalAngles {
    pub o1: DMatrix<f64>,
    pub o2: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub theta: DVector<f64>,
}

pub fn principal_angles(v1: &DMatrix<f64>, v2: &DMatrix<f64>) -> Result<PrincipalAngles> {
    if v1.shape() != v2.shape() {
        return Err(Error::DimensionMismatch {
            expected: v1.ncols(),
            found: v2.ncols(),
        });
    }
    for v in [v1, v2] {
        let dev = orthonormality_error(v);
        if dev > ORTHO_TOL {
            return Err(Error::NotOrthonormal { deviation: dev });
        }
    }
    let overlap = v2.transpose() * v1;
    let svd = nalgebra::SVD::try_new(overlap, true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or(Error::SvdNoConvergence { iterations: SVD_MAX_ITER })?;
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let r = v1.ncols();
    let mut idx: Vec<usize> = (0..r).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let mut o1 = DMatrix::zeros(r, r);
    let mut o2 = DMatrix::zeros(r, r);
    let mut sigma = DVector::zeros(r);
    for (k, &src) in idx.iter().enumerate() {
        o2.set_column(k, &u.column(src));
        o1.set_column(k, &vt.row(src).transpose());
        sigma[k] = svd.singular_values[src].clamp(0.0, 1.0);
    }
    let theta = sigma.map(f64::acos);
    Ok(PrincipalAngles { o1, o2, sigma, theta })
}

/// `(Q, R)` with `Q R = U1 cos(Θp) + X sin(Θp)` and `Q` orthonormal.
fn grassmann_qr(pa: &PrincipalAngles, v1: &DMatrix<f64>, v2: &DMatrix<f64>, p: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let u1 = v1 * &pa.o1;
    let u2 = v2 * &pa.o2;
    let mut x = &u2 - &u1 * (u1.transpose() * &u2);
    for (k, th) in pa.theta.iter().enumerate() {
        let s = th.sin();
        let inv = if s < SIN_PINV_TOL { 0.0 } else { 1.0 / s };
        x.column_mut(k).scale_mut(inv);
    }
    let mut u = u1;
    for (k, th) in pa.theta.iter().enumerate() {
        let (s, c) = (th * p).sin_cos();
        u.column_mut(k).scale_mut(c);
        let xk = x.column(k).into_owned();
        u.column_mut(k).axpy(s, &xk, 1.0);
    }
    thin_qr(&u)
}

/// Grassmann geodesic `U(p) = U1 cos(Θp) + X sin(Θp)`, re-orthonormalized.
pub fn grassmann_geodesic(pa: &PrincipalAngles, v1: &DMatrix<f64>, v2: &DMatrix<f64>, p: GeodesicParam) -> DMatrix<f64> {
    grassmann_qr(pa, v1, v2, p.value()).0
}

/// The pieces of one approximate SPSD geodesic evaluation.
#[derive(Clone, Debug)]
pub struct SpsdGeodesic {
    /// Orthonormal basis of `U(p)`.
    pub basis: DMatrix<f64>,
    /// Triangular factor relating the raw Grassmann point to `basis`.
    pub basis_r: DMatrix<f64>,
    /// `R(p) = R1 #_p R2`.
    pub core: SpdMatrix,
    pub r1: SpdMatrix,
    pub r2: SpdMatrix,
    pub angles: PrincipalAngles,
}

impl SpsdGeodesic {
    /// `X` re-expressed in `basis`: `R_qr X R_qrᵀ`.
    pub fn lift_core(&self, x: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        x.congruence(&self.basis_r)
    }
}

fn aligned_core(o: &DMatrix<f64>, lambda: &DVector<f64>) -> Result<SpdMatrix> {
    let d = SymmetricMatrix::from_diagonal(lambda.as_slice())?;
    SpdMatrix::new(d.congruence(&o.transpose())?)
}

/// Evaluates the SPSD geodesic from `g1` toward `g2` at `p`.
pub fn spsd_geodesic_parts(g1: &SpsdFactors, g2: &SpsdFactors, p: GeodesicParam) -> Result<SpsdGeodesic> {
    if g1.n() != g2.n() {
        return Err(Error::DimensionMismatch {
            expected: g1.n(),
            found: g2.n(),
        });
    }
    if g1.rank() != g2.rank() {
        return Err(Error::RankMismatch {
            left: g1.rank(),
            right: g2.rank(),
        });
    }
    let angles = principal_angles(g1.v(), g2.v())?;
    let r1 = aligned_core(&angles.o1, g1.lambda())?;
    let r2 = aligned_core(&angles.o2, g2.lambda())?;
    let core = spd::geodesic(&r1, &r2, p)?;
    let (basis, basis_r) = grassmann_qr(&angles, g1.v(), g2.v(), p.value());
    Ok(SpsdGeodesic {
        basis,
        basis_r,
        core,
        r1,
        r2,
        angles,
    })
}

/// `γ̃(p) = U(p) (R1 #_p R2) U(p)ᵀ` in factored form.
pub fn spsd_geodesic(g1: &SpsdFactors, g2: &SpsdFactors, p: GeodesicParam) -> Result<SpsdFactors> {
    let parts = spsd_geodesic_parts(g1, g2, p)?;
    SpsdFactors::from_core(&parts.basis, &parts.lift_core(parts.core.as_symmetric())?)
}

/// SPSD counterpart of the geodesic midpoint operator.
pub fn spsd_compose_s(w1: &SpsdFactors, w2: &SpsdFactors) -> Result<SpsdFactors> {
    spsd_geodesic(w1, w2, GeodesicParam::MIDPOINT)
}

/// `F = U_{S→W1}(1) Log_{R_S}(R_{W1}) U_{S→W1}(1)ᵀ`.
pub fn spsd_compose_f(s: &SpsdFactors, w1: &SpsdFactors) -> Result<LowRankSymmetric> {
    let parts = spsd_geodesic_parts(s, w1, GeodesicParam::new(1.0)?)?;
    let log = spd::log_map(&parts.r1, parts.r2.as_symmetric())?;
    Ok(LowRankSymmetric {
        core: parts.lift_core(&log)?,
        basis: parts.basis,
    })
}
