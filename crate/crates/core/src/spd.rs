//! Affine-invariant geometry of the SPD cone: geodesics, distance and the
//! exponential / logarithmic maps.
//!
//! Geodesics and the log map work from Cholesky factors and the SVD of
//! `L1⁻¹ L2`, which is the eigendecomposition of the whitened pair without
//! squaring its condition number. The exp map whitens by `W^{-1/2}`.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

use crate::linalg::{symmetrize, sym_eig, EigenOrdering, SpdMatrix, SymmetricMatrix};

/// Largest condition number accepted for a base point.
pub const MAX_CONDITION: f64 = 1e12;

/// Position along a geodesic, `0 ≤ p ≤ 1`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
pub struct GeodesicParam(f64);

impl GeodesicParam {
    pub const MIDPOINT: GeodesicParam = GeodesicParam(0.5);

    pub fn new(p: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&p) {
            Ok(Self(p))
        } else {
            Err(Error::InvalidParameter(format!("geodesic parameter {p} outside [0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for GeodesicParam {
    fn default() -> Self {
        Self::MIDPOINT
    }
}

fn check_pair(a: &SpdMatrix, b: &SymmetricMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

fn check_conditioning(w: &SpdMatrix) -> Result<()> {
    let cond = w.condition_number();
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned {
            condition: cond,
            limit: MAX_CONDITION,
        });
    }
    Ok(())
}

/// `W^{-1/2} X W^{-1/2}`.
fn whiten(w: &SpdMatrix, x: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    x.congruence(w.invsqrtm().as_matrix())
}

/// `W^{1/2} X W^{1/2}`.
fn color(w: &SpdMatrix, x: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    x.congruence(w.sqrtm().as_matrix())
}

const SVD_MAX_ITER: usize = 10_000;

fn cholesky(w: &SymmetricMatrix) -> Result<DMatrix<f64>> {
    match w.as_matrix().clone().cholesky() {
        Some(c) => Ok(c.l()),
        None => Err(Error::Domain {
            function: "log",
            eigenvalue: sym_eig(w, EigenOrdering::ByValueDesc)?.min_value(),
        }),
    }
}

/// A pair seen from its first point. With `W1 = L1 L1ᵀ`, `W2 = L2 L2ᵀ` and
/// `L1⁻¹ L2 = V Σ Uᵀ`, the whitened matrix `L1⁻¹ W2 L1⁻ᵀ` equals `V Σ² Vᵀ`.
/// Taking the SVD of the factor keeps the condition number at `√(κ1 κ2)`
/// instead of `κ1 κ2`.
struct PairFrame {
    l1: DMatrix<f64>,
    v: DMatrix<f64>,
    sigma: Vec<f64>,
}

impl PairFrame {
    fn new(w1: &SymmetricMatrix, w2: &SymmetricMatrix) -> Result<Self> {
        let l1 = cholesky(w1)?;
        let l2 = cholesky(w2)?;
        let c = l1
            .solve_lower_triangular(&l2)
            .ok_or_else(|| Error::NotPositiveDefinite {
                min_eig: 0.0,
                tol: 0.0,
            })?;
        let svd = nalgebra::SVD::try_new(c, true, false, f64::EPSILON, SVD_MAX_ITER)
            .ok_or(Error::SvdNoConvergence { iterations: SVD_MAX_ITER })?;
        let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
        if let Some(&bad) = sigma.iter().find(|s| !(**s > 0.0)) {
            return Err(Error::Domain {
                function: "log",
                eigenvalue: bad * bad,
            });
        }
        Ok(Self {
            l1,
            v: svd.u.expect("requested"),
            sigma,
        })
    }

    /// `L1 V diag(f(σ)) Vᵀ L1ᵀ`.
    fn assemble(&self, f: impl Fn(f64) -> f64) -> Result<SymmetricMatrix> {
        let mut lv = &self.l1 * &self.v;
        let mut scaled = lv.clone();
        for (k, &s) in self.sigma.iter().enumerate() {
            scaled.column_mut(k).scale_mut(f(s));
        }
        lv = scaled * lv.transpose();
        symmetrize(&lv)
    }
}

/// `γ(p) = W1^{1/2} (W1^{-1/2} W2 W1^{-1/2})^p W1^{1/2}`.
pub fn geodesic(w1: &SpdMatrix, w2: &SpdMatrix, p: GeodesicParam) -> Result<SpdMatrix> {
    check_pair(w1, w2.as_symmetric())?;
    check_conditioning(w1)?;
    let p = p.value();
    if p == 0.0 {
        return Ok(w1.clone());
    }
    let frame = PairFrame::new(w1.as_symmetric(), w2.as_symmetric())?;
    SpdMatrix::new(frame.assemble(|s| s.powf(2.0 * p))?)
}

/// `γ(p)` together with `Log_{γ(p)}(W1)`, both from one factorization.
pub fn geodesic_with_log(w1: &SpdMatrix, w2: &SpdMatrix, p: GeodesicParam) -> Result<(SpdMatrix, SymmetricMatrix)> {
    check_pair(w1, w2.as_symmetric())?;
    check_conditioning(w1)?;
    let p = p.value();
    if p == 0.0 {
        return Ok((w1.clone(), SymmetricMatrix::zeros(w1.dim())));
    }
    let frame = PairFrame::new(w1.as_symmetric(), w2.as_symmetric())?;
    let s = SpdMatrix::new(frame.assemble(|s| s.powf(2.0 * p))?)?;
    // with G = Σ^p Vᵀ L1ᵀ, S = GᵀG and G⁻ᵀ W1 G⁻¹ = Σ^{-2p}
    let f = frame.assemble(|s| -2.0 * p * s.powf(2.0 * p) * s.ln())?;
    Ok((s, f))
}

/// The two-matrix Fréchet mean, i.e. the geodesic midpoint.
pub fn midpoint(w1: &SpdMatrix, w2: &SpdMatrix) -> Result<SpdMatrix> {
    geodesic(w1, w2, GeodesicParam::MIDPOINT)
}

/// `‖log(W1^{-1/2} W2 W1^{-1/2})‖_F`.
pub fn riemannian_distance(w1: &SpdMatrix, w2: &SpdMatrix) -> Result<f64> {
    check_pair(w1, w2.as_symmetric())?;
    check_conditioning(w1)?;
    let frame = PairFrame::new(w1.as_symmetric(), w2.as_symmetric())?;
    Ok(frame.sigma.iter().map(|s| (2.0 * s.ln()).powi(2)).sum::<f64>().sqrt())
}

/// `Exp_W(D) = W^{1/2} exp(W^{-1/2} D W^{-1/2}) W^{1/2}`.
pub fn exp_map(w: &SpdMatrix, d: &SymmetricMatrix) -> Result<SpdMatrix> {
    check_pair(w, d)?;
    let inner = whiten(w, d)?;
    let e = sym_eig(&inner, EigenOrdering::ByValueDesc)?.apply("exp", f64::exp)?;
    SpdMatrix::new(color(w, &e)?)
}

/// `Log_W(V) = W^{1/2} log(W^{-1/2} V W^{-1/2}) W^{1/2}`.
pub fn log_map(w: &SpdMatrix, v: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    check_pair(w, v)?;
    check_conditioning(w)?;
    PairFrame::new(w.as_symmetric(), v)?.assemble(|s| 2.0 * s.ln())
}
