//! Dense symmetric matrices, their eigendecomposition and spectral matrix
//! functions.
//!
//! Every operator in the crate is carried by a [`SymmetricMatrix`]. Exact
//! symmetry is enforced at construction and re-enforced after every spectral
//! function and congruence product, so chained Riemannian operations never
//! drift out of the symmetric (or SPD) set through round-off.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Iteration budget handed to the implicit QR sweep of the eigensolver.
pub const EIG_MAX_ITER: usize = 10_000;

/// Default relative floor for SPD validation: `λ_min > 1e-12 · λ_max`.
pub const SPD_REL_TOL: f64 = 1e-12;

/// Relative gap under which neighbouring eigenvalues are treated as one cluster.
pub const DEGENERATE_REL_GAP: f64 = 1e-10;

/// `(M + Mᵀ) / 2` for any square matrix.
///
/// The result is bitwise symmetric: both triangles are produced by the same
/// commutative floating-point sum.
pub fn symmetrize(m: &DMatrix<f64>) -> Result<SymmetricMatrix> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let n = m.nrows();
    let mut out = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = if i == j {
                m[(i, i)]
            } else {
                (m[(i, j)] + m[(j, i)]) * 0.5
            };
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    SymmetricMatrix::check_finite(&out)?;
    Ok(SymmetricMatrix { m: out })
}

/// A dense, exactly symmetric, finite `N×N` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    m: DMatrix<f64>,
}

impl SymmetricMatrix {
    /// Symmetrizes and validates `m`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        symmetrize(&m)
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: DMatrix::zeros(n, n),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// `V diag(values) Vᵀ`.
    pub fn from_spectrum(vectors: &DMatrix<f64>, values: &[f64]) -> Result<Self> {
        if vectors.ncols() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: vectors.ncols(),
                found: values.len(),
            });
        }
        let mut scaled = vectors.clone();
        for (k, &v) in values.iter().enumerate() {
            scaled.column_mut(k).scale_mut(v);
        }
        Self::new(&scaled * vectors.transpose())
    }

    fn check_finite(m: &DMatrix<f64>) -> Result<()> {
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if !m[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { m: &self.m * s }
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Self {
            m: &self.m + &other.m,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Self {
            m: &self.m - &other.m,
        })
    }

    pub fn same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    /// `A M Aᵀ`, re-symmetrized.
    pub fn congruence(&self, a: &DMatrix<f64>) -> Result<Self> {
        if a.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: a.ncols(),
            });
        }
        symmetrize(&(a * &self.m * a.transpose()))
    }

    /// `‖M − other‖_F / ‖other‖_F` (absolute when `other` is zero).
    pub fn rel_diff(&self, other: &Self) -> f64 {
        let denom = other.frobenius_norm();
        let diff = (&self.m - &other.m).norm();
        if denom > 0.0 {
            diff / denom
        } else {
            diff
        }
    }

    pub fn eig(&self, ordering: EigenOrdering) -> Result<EigenSystem> {
        sym_eig(self, ordering)
    }
}

/// Order in which eigenpairs are reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum EigenOrdering {
    ByValueDesc,
    ByAbsValueDesc,
}

/// Full spectral decomposition `M = V diag(values) Vᵀ`.
///
/// Column `k` of `vectors` is the unit eigenvector for `values[k]`; its entry
/// of largest magnitude is non-negative.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSystem {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
    pub ordering: EigenOrdering,
}

/// Symmetric eigendecomposition (Householder tridiagonalization followed by
/// implicit QR). Deterministic for identical input bytes.
pub fn sym_eig(m: &SymmetricMatrix, ordering: EigenOrdering) -> Result<EigenSystem> {
    let n = m.dim();
    if n == 0 {
        return Ok(EigenSystem {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
            ordering,
        });
    }
    let raw = SymmetricEigen::try_new(m.m.clone(), f64::EPSILON, EIG_MAX_ITER).ok_or(
        Error::EigenNoConvergence {
            iterations: EIG_MAX_ITER,
        },
    )?;
    Ok(EigenSystem::from_unordered(
        raw.eigenvalues.as_slice(),
        &raw.eigenvectors,
        ordering,
    ))
}

impl EigenSystem {
    /// Sorts raw eigenpairs and fixes eigenvector signs.
    ///
    /// Ties are broken by signed value (descending), then by input position.
    pub fn from_unordered(values: &[f64], vectors: &DMatrix<f64>, ordering: EigenOrdering) -> Self {
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| {
            let (va, vb) = (values[a], values[b]);
            let primary = match ordering {
                EigenOrdering::ByValueDesc => vb.total_cmp(&va),
                EigenOrdering::ByAbsValueDesc => vb.abs().total_cmp(&va.abs()),
            };
            primary.then(vb.total_cmp(&va)).then(a.cmp(&b))
        });
        let n = vectors.nrows();
        let mut out_vecs = DMatrix::<f64>::zeros(n, idx.len());
        let mut out_vals = DVector::<f64>::zeros(idx.len());
        for (k, &src) in idx.iter().enumerate() {
            out_vals[k] = values[src];
            let mut col = vectors.column(src).into_owned();
            fix_sign(&mut col);
            out_vecs.set_column(k, &col);
        }
        EigenSystem {
            values: out_vals,
            vectors: out_vecs,
            ordering,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Maximal runs of adjacent eigenvalues whose consecutive gaps are below
    /// `rel_gap · max|λ|`. Singleton runs are included.
    pub fn clusters(&self, rel_gap: f64) -> Vec<std::ops::Range<usize>> {
        let tol = rel_gap * self.max_abs();
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.len() {
            if k == self.len() || (self.values[k] - self.values[k - 1]).abs() >= tol {
                out.push(start..k);
                start = k;
            }
        }
        out
    }

    /// Runs flagged as numerically degenerate (length > 1) at the default gap.
    pub fn degenerate_clusters(&self) -> Vec<std::ops::Range<usize>> {
        self.clusters(DEGENERATE_REL_GAP)
            .into_iter()
            .filter(|r| r.len() > 1)
            .collect()
    }

    /// `V diag(f(λ)) Vᵀ`, re-symmetrized. `name` labels domain errors.
    pub fn apply<F: Fn(f64) -> f64>(&self, name: &'static str, f: F) -> Result<SymmetricMatrix> {
        let mut fv = Vec::with_capacity(self.len());
        for &l in self.values.iter() {
            let y = f(l);
            if !y.is_finite() {
                return Err(Error::Domain {
                    function: name,
                    eigenvalue: l,
                });
            }
            fv.push(y);
        }
        SymmetricMatrix::from_spectrum(&self.vectors, &fv)
    }

    /// `V diag(values) Vᵀ`.
    pub fn reconstruct(&self) -> Result<SymmetricMatrix> {
        SymmetricMatrix::from_spectrum(&self.vectors, self.values.as_slice())
    }

    /// Re-sorts under another ordering.
    pub fn reorder(&self, ordering: EigenOrdering) -> EigenSystem {
        EigenSystem::from_unordered(self.values.as_slice(), &self.vectors, ordering)
    }
}

fn fix_sign(col: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..col.len() {
        if col[i].abs() > col[best].abs() {
            best = i;
        }
    }
    if !col.is_empty() && col[best] < 0.0 {
        col.neg_mut();
    }
}

/// `f(M) = V f(Λ) Vᵀ` for an arbitrary scalar function.
pub fn matrix_function<F: Fn(f64) -> f64>(m: &SymmetricMatrix, name: &'static str, f: F) -> Result<SymmetricMatrix> {
    sym_eig(m, EigenOrdering::ByValueDesc)?.apply(name, f)
}

fn positive(name: &'static str, l: f64) -> Result<()> {
    if l > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            function: name,
            eigenvalue: l,
        })
    }
}

pub fn expm(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    matrix_function(m, "exp", f64::exp)
}

pub fn logm(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    logm_eig(&sym_eig(m, EigenOrdering::ByValueDesc)?)
}

pub fn sqrtm(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let e = sym_eig(m, EigenOrdering::ByValueDesc)?;
    for &l in e.values.iter() {
        if l < 0.0 {
            return Err(Error::Domain {
                function: "sqrt",
                eigenvalue: l,
            });
        }
    }
    e.apply("sqrt", f64::sqrt)
}

pub fn invsqrtm(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    powm(m, -0.5)
}

/// `M^p`. Non-positive eigenvalues are rejected unless `p` is 0 or 1.
pub fn powm(m: &SymmetricMatrix, p: f64) -> Result<SymmetricMatrix> {
    if p == 0.0 {
        return Ok(SymmetricMatrix::identity(m.dim()));
    }
    if p == 1.0 {
        return Ok(m.clone());
    }
    powm_eig(&sym_eig(m, EigenOrdering::ByValueDesc)?, p)
}

pub(crate) fn logm_eig(e: &EigenSystem) -> Result<SymmetricMatrix> {
    for &l in e.values.iter() {
        positive("log", l)?;
    }
    e.apply("log", f64::ln)
}

pub(crate) fn powm_eig(e: &EigenSystem, p: f64) -> Result<SymmetricMatrix> {
    for &l in e.values.iter() {
        positive("pow", l)?;
    }
    e.apply("pow", |l| l.powf(p))
}

/// Symmetric positive-definite matrix with its cached eigendecomposition.
#[derive(Clone, Debug)]
pub struct SpdMatrix {
    base: SymmetricMatrix,
    eig: EigenSystem,
    min_eig_tol: f64,
}

impl SpdMatrix {
    /// Validates with the relative default floor `1e-12 · λ_max`.
    pub fn new(base: SymmetricMatrix) -> Result<Self> {
        let eig = sym_eig(&base, EigenOrdering::ByValueDesc)?;
        let tol = SPD_REL_TOL * eig.max_value().max(0.0);
        Self::validated(base, eig, tol)
    }

    /// Validates against an explicit absolute floor.
    pub fn with_tolerance(base: SymmetricMatrix, min_eig_tol: f64) -> Result<Self> {
        let eig = sym_eig(&base, EigenOrdering::ByValueDesc)?;
        Self::validated(base, eig, min_eig_tol)
    }

    fn validated(base: SymmetricMatrix, eig: EigenSystem, tol: f64) -> Result<Self> {
        let min = eig.min_value();
        if base.dim() == 0 || !(min > tol) || !(min > 0.0) {
            return Err(Error::NotPositiveDefinite {
                min_eig: min,
                tol,
            });
        }
        Ok(Self {
            base,
            eig,
            min_eig_tol: tol,
        })
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        Self::new(SymmetricMatrix::from_row_slice(n, data)?)
    }

    pub fn identity(n: usize) -> Self {
        Self::new(SymmetricMatrix::identity(n)).expect("identity is SPD")
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(SymmetricMatrix::from_diagonal(diag)?)
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn as_symmetric(&self) -> &SymmetricMatrix {
        &self.base
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        self.base.as_matrix()
    }

    pub fn into_symmetric(self) -> SymmetricMatrix {
        self.base
    }

    pub fn eigen(&self) -> &EigenSystem {
        &self.eig
    }

    pub fn min_eig_tol(&self) -> f64 {
        self.min_eig_tol
    }

    pub fn condition_number(&self) -> f64 {
        self.eig.max_value() / self.eig.min_value()
    }

    pub fn sqrtm(&self) -> SymmetricMatrix {
        self.eig.apply("sqrt", f64::sqrt).expect("SPD spectrum")
    }

    pub fn invsqrtm(&self) -> SymmetricMatrix {
        self.eig.apply("pow", |l| 1.0 / l.sqrt()).expect("SPD spectrum")
    }

    pub fn logm(&self) -> SymmetricMatrix {
        self.eig.apply("log", f64::ln).expect("SPD spectrum")
    }

    pub fn powm(&self, p: f64) -> SymmetricMatrix {
        if p == 0.0 {
            return SymmetricMatrix::identity(self.dim());
        }
        if p == 1.0 {
            return self.base.clone();
        }
        self.eig.apply("pow", |l| l.powf(p)).expect("SPD spectrum")
    }

    pub fn inverse(&self) -> SymmetricMatrix {
        self.eig.apply("inverse", |l| 1.0 / l).expect("SPD spectrum")
    }
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.base == other.base
    }
}

impl AsRef<SymmetricMatrix> for SpdMatrix {
    fn as_ref(&self) -> &SymmetricMatrix {
        &self.base
    }
}

/// Symmetric matrix held as `B C Bᵀ` with `B` (`N×r`) orthonormal and `C`
/// symmetric `r×r`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRankSymmetric {
    pub basis: DMatrix<f64>,
    pub core: SymmetricMatrix,
}

impl LowRankSymmetric {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn to_dense(&self) -> Result<SymmetricMatrix> {
        self.core.congruence(&self.basis)
    }

    /// The `r` eigenpairs carried by the core; the orthogonal complement has
    /// eigenvalue zero and is not materialized.
    pub fn eig(&self, ordering: EigenOrdering) -> Result<EigenSystem> {
        let inner = sym_eig(&self.core, ordering)?;
        let vectors = &self.basis * &inner.vectors;
        Ok(EigenSystem::from_unordered(
            inner.values.as_slice(),
            &vectors,
            ordering,
        ))
    }
}

/// Largest absolute deviation of `VᵀV` from the identity.
pub fn orthonormality_error(v: &DMatrix<f64>) -> f64 {
    let g = v.transpose() * v;
    let mut worst = 0.0_f64;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Thin QR with the diagonal of `R` made non-negative: returns `(Q, R)`.
pub fn thin_qr(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for k in 0..r.nrows().min(q.ncols()) {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
            r.row_mut(k).neg_mut();
        }
    }
    (q, r)
}
