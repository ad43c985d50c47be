//! Executable oracles for the spectral properties of `S` and `F`.
//!
//! Every check builds its instances from an explicit seed and returns a
//! [`Report`]; nothing here panics on a failed property.

pub mod nonsym;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::composite::{self, ComposeOptions, Routing};
use crate::datagen::{self, SpectralPair};
use crate::error::{Error, Result};
use crate::linalg::{orthonormality_error, sym_eig, EigenOrdering, EigenSystem, SpdMatrix, SymmetricMatrix};
use crate::sampling::{self, gaussian_matrix, log_uniform, random_orthonormal};
use crate::spd::GeodesicParam;

/// Expected eigenvalues closer than this are compared as one subspace.
pub const CLUSTER_GAP: f64 = 1e-6;

/// Result of one oracle, serialized as the `verify` JSON report.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Report {
    pub oracle: String,
    pub instances: usize,
    pub max_residual: f64,
    pub budget: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl Report {
    pub fn new(oracle: &str, budget: f64) -> Self {
        Self {
            oracle: oracle.to_string(),
            instances: 0,
            max_residual: 0.0,
            budget,
            pass: true,
            extra: BTreeMap::new(),
        }
    }

    /// Folds one instance's residual into the report.
    pub fn record(&mut self, residual: f64, ok: bool) {
        self.instances += 1;
        self.max_residual = self.max_residual.max(residual);
        if !residual.is_finite() {
            self.max_residual = f64::INFINITY;
        }
        self.pass &= ok && residual.is_finite();
    }

    pub fn record_max(&mut self, key: &str, value: f64) {
        let e = self.extra.entry(key.to_string()).or_insert(f64::NEG_INFINITY);
        *e = e.max(value);
    }

    pub fn merge(mut self, other: Report) -> Report {
        self.instances += other.instances;
        self.max_residual = self.max_residual.max(other.max_residual);
        self.pass &= other.pass;
        for (k, v) in other.extra {
            self.record_max(&k, v);
        }
        self
    }
}

/// Two operators with a fully shared eigenbasis.
#[derive(Clone, Debug, PartialEq)]
pub struct CommonSpectrumSpec {
    pub psi: DMatrix<f64>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
}

impl CommonSpectrumSpec {
    pub fn n(&self) -> usize {
        self.psi.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.psi.ncols() != n || self.lambda1.len() != n || self.lambda2.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.lambda1.len().min(self.lambda2.len()).min(self.psi.ncols()),
            });
        }
        let dev = orthonormality_error(&self.psi);
        if dev > 1e-10 {
            return Err(Error::NotOrthonormal { deviation: dev });
        }
        for &l in self.lambda1.iter().chain(&self.lambda2) {
            if !(l > 0.0 && l <= 1.0) {
                return Err(Error::InvalidParameter(format!("eigenvalue {l} outside (0, 1]")));
            }
        }
        Ok(())
    }

    /// Gram–Schmidt basis from a seeded Gaussian; eigenvalues log-uniform in
    /// `[lo, 1]`.
    pub fn random(n: usize, lo: f64, seed: u64) -> Self {
        let mut rng = sampling::rng(seed);
        let psi = random_orthonormal(n, n, &mut rng);
        let lambda1 = (0..n).map(|_| log_uniform(lo, 1.0, &mut rng)).collect();
        let lambda2 = (0..n).map(|_| log_uniform(lo, 1.0, &mut rng)).collect();
        Self { psi, lambda1, lambda2 }
    }

    pub fn toy() -> Self {
        let SpectralPair {
            psi, lambda1, lambda2, ..
        } = datagen::toy_spd_pair();
        Self { psi, lambda1, lambda2 }
    }
}

/// `W_k = Ψ diag(λ⁽ᵏ⁾) Ψᵀ`.
pub fn make_common_pair(spec: &CommonSpectrumSpec) -> Result<(SpdMatrix, SpdMatrix)> {
    spec.validate()?;
    let w1 = SpdMatrix::new(SymmetricMatrix::from_spectrum(&spec.psi, &spec.lambda1)?)?;
    let w2 = SpdMatrix::new(SymmetricMatrix::from_spectrum(&spec.psi, &spec.lambda2)?)?;
    Ok((w1, w2))
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Sine of the largest principal angle between `span(a)` and `span(b)`
/// (both orthonormal, same width).
fn subspace_sine(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let resid = a - b * (b.transpose() * a);
    spectral_norm(&resid).min(1.0)
}

/// Comparison of a computed spectrum with predicted eigenpairs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumMatch {
    pub value_error: f64,
    /// Largest angle between a predicted eigenvector with an isolated
    /// eigenvalue and the matching computed one.
    pub vector_angle: f64,
    /// Largest principal angle over clusters of nearly equal eigenvalues.
    pub subspace_angle: f64,
}

/// Matches `computed` (sorted by descending value) against `expected[i]`
/// carried by `psi[:, i]`.
pub fn match_spectrum(computed: &EigenSystem, expected: &[f64], psi: &DMatrix<f64>) -> SpectrumMatch {
    let computed = computed.reorder(EigenOrdering::ByValueDesc);
    let mut order: Vec<usize> = (0..expected.len()).collect();
    order.sort_by(|&a, &b| expected[b].total_cmp(&expected[a]).then(a.cmp(&b)));
    let mut out = SpectrumMatch {
        value_error: 0.0,
        vector_angle: 0.0,
        subspace_angle: 0.0,
    };
    for (k, &i) in order.iter().enumerate() {
        out.value_error = out.value_error.max((computed.values[k] - expected[i]).abs());
    }
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && expected[order[end - 1]] - expected[order[end]] < CLUSTER_GAP {
            end += 1;
        }
        let cols: Vec<_> = order[start..end].iter().map(|&i| psi.column(i).into_owned()).collect();
        let a = DMatrix::from_columns(&cols);
        let b = computed.vectors.columns(start, end - start).into_owned();
        let angle = subspace_sine(&a, &b).asin();
        if end - start == 1 {
            out.vector_angle = out.vector_angle.max(angle);
        } else {
            out.subspace_angle = out.subspace_angle.max(angle);
        }
        start = end;
    }
    out
}

fn theorem1_values(spec: &CommonSpectrumSpec) -> Vec<f64> {
    spec.lambda1.iter().zip(&spec.lambda2).map(|(a, b)| (a * b).sqrt()).collect()
}

fn theorem2_values(spec: &CommonSpectrumSpec) -> Vec<f64> {
    spec.lambda1
        .iter()
        .zip(&spec.lambda2)
        .map(|(a, b)| 0.5 * (a * b).sqrt() * (a.ln() - b.ln()))
        .collect()
}

pub const THEOREM12_VALUE_TOL: f64 = 1e-9;
pub const THEOREM1_ANGLE_TOL: f64 = 1e-7;

/// Eigenvalues of `S` equal `√(λ⁽¹⁾λ⁽²⁾)` on the shared eigenvectors.
pub fn check_theorem1(w1: &SpdMatrix, w2: &SpdMatrix, spec: &CommonSpectrumSpec) -> Result<Report> {
    let s = composite::compose_s(w1, w2, GeodesicParam::MIDPOINT)?;
    let m = match_spectrum(s.eigen(), &theorem1_values(spec), &spec.psi);
    let mut r = Report::new("theorem1", THEOREM12_VALUE_TOL);
    r.record(m.value_error, m.value_error < THEOREM12_VALUE_TOL && m.vector_angle < THEOREM1_ANGLE_TOL);
    r.record_max("vector_angle", m.vector_angle);
    r.record_max("subspace_angle", m.subspace_angle);
    Ok(r)
}

/// Eigenvalues of `F` equal `½√(λ⁽¹⁾λ⁽²⁾) ln(λ⁽¹⁾/λ⁽²⁾)`, with the sign of
/// `λ⁽¹⁾ − λ⁽²⁾`.
pub fn check_theorem2(w1: &SpdMatrix, w2: &SpdMatrix, spec: &CommonSpectrumSpec) -> Result<Report> {
    let f = composite::compose_f(w1, w2, GeodesicParam::MIDPOINT)?;
    let e = sym_eig(&f, EigenOrdering::ByValueDesc)?;
    let m = match_spectrum(&e, &theorem2_values(spec), &spec.psi);
    let mut sign_ok = true;
    for i in 0..spec.n() {
        let d = spec.lambda1[i] - spec.lambda2[i];
        if d.abs() > 1e-8 {
            let psi = spec.psi.column(i);
            let rq = psi.dot(&(f.as_matrix() * psi));
            sign_ok &= rq.signum() == d.signum();
        }
    }
    let mut r = Report::new("theorem2", THEOREM12_VALUE_TOL);
    r.record(m.value_error, m.value_error < THEOREM12_VALUE_TOL && sign_ok);
    r.record_max("vector_angle", m.vector_angle);
    r.record_max("subspace_angle", m.subspace_angle);
    r.record_max("sign_mismatch", if sign_ok { 0.0 } else { 1.0 });
    Ok(r)
}

fn check_unit(v: &DVector<f64>) -> Result<()> {
    let norm = v.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnitVector { norm });
    }
    Ok(())
}

/// `‖(M − λI)v‖₂` for a unit vector `v`.
pub fn pseudo_residual(m: &SymmetricMatrix, lambda: f64, v: &DVector<f64>) -> Result<f64> {
    if v.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: v.len(),
        });
    }
    check_unit(v)?;
    Ok((m.as_matrix() * v - v * lambda).norm())
}

/// Rank-one `B` with `(M + B)v = λv`: `Bu = −⟨u, v⟩(M − λI)v`.
pub fn rank_one_completion(m: &SymmetricMatrix, lambda: f64, v: &DVector<f64>) -> Result<DMatrix<f64>> {
    pseudo_residual(m, lambda, v)?;
    let r = m.as_matrix() * v - v * lambda;
    Ok(-(r * v.transpose()))
}

/// One instance where a single eigenvector of `W1` is a perturbation of the
/// matching eigenvector of `W2`.
#[derive(Clone, Debug)]
pub struct PerturbedPair {
    pub w1: SpdMatrix,
    pub w2: SpdMatrix,
    pub psi1: DVector<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    /// `‖ψ⁽¹⁾ − ψ⁽²⁾‖₂`.
    pub perturbation: f64,
}

/// Admissible size of `‖ψ_ε‖` for a target residual `eps_s`:
/// `√λ⁽²⁾ / (λ̃⁽²⁾_max √λ⁽¹⁾) · eps_s` with `λ̃⁽²⁾_max = ‖W2 − λ⁽²⁾I‖`.
pub fn theorem3_budget(spec: &CommonSpectrumSpec, j: usize, eps_s: f64) -> Result<f64> {
    let l2 = spec.lambda2[j];
    let tilde = spec.lambda2.iter().map(|l| (l - l2).abs()).fold(0.0, f64::max);
    if !(tilde > 0.0) {
        return Err(Error::Hypothesis(
            "W2 is a multiple of the identity; the perturbation budget is undefined".into(),
        ));
    }
    Ok(l2.sqrt() / (tilde * spec.lambda1[j].sqrt()) * eps_s)
}

/// Rotates `ψ_j` of `W2` by exactly `perturbation` (chord length) in a
/// random direction, re-orthonormalizes the other columns around it and
/// rebuilds `W1`.
pub fn perturb_common_pair(spec: &CommonSpectrumSpec, j: usize, perturbation: f64, seed: u64) -> Result<PerturbedPair> {
    spec.validate()?;
    let n = spec.n();
    if j >= n {
        return Err(Error::OutOfBounds(format!("index {j} outside 0..{n}")));
    }
    if !(0.0..=2.0).contains(&perturbation) {
        return Err(Error::InvalidParameter(format!("perturbation {perturbation} outside [0, 2]")));
    }
    let mut rng = sampling::rng(seed);
    let psi2 = spec.psi.column(j).into_owned();
    let mut w = gaussian_matrix(n, 1, &mut rng).column(0).into_owned();
    w -= &psi2 * psi2.dot(&w);
    w /= w.norm();
    let phi = 2.0 * (perturbation / 2.0).asin();
    let psi1 = &psi2 * phi.cos() + &w * phi.sin();

    let mut cols = vec![psi1.clone()];
    let mut lam1 = vec![spec.lambda1[j]];
    for k in (0..n).filter(|&k| k != j) {
        let mut v = spec.psi.column(k).into_owned();
        for _ in 0..2 {
            for c in &cols {
                let d = c.dot(&v);
                v -= c * d;
            }
        }
        v /= v.norm();
        cols.push(v);
        lam1.push(spec.lambda1[k]);
    }
    let u1 = DMatrix::from_columns(&cols);
    let w1 = SpdMatrix::new(SymmetricMatrix::from_spectrum(&u1, &lam1)?)?;
    let w2 = SpdMatrix::new(SymmetricMatrix::from_spectrum(&spec.psi, &spec.lambda2)?)?;
    Ok(PerturbedPair {
        w1,
        w2,
        psi1,
        lambda1: spec.lambda1[j],
        lambda2: spec.lambda2[j],
        perturbation,
    })
}

/// `‖(S − √(λ⁽¹⁾λ⁽²⁾)I) ψ⁽¹⁾‖` for a perturbed pair.
pub fn theorem3_residual(pair: &PerturbedPair) -> Result<f64> {
    let s = composite::compose_s(&pair.w1, &pair.w2, GeodesicParam::MIDPOINT)?;
    pseudo_residual(s.as_symmetric(), (pair.lambda1 * pair.lambda2).sqrt(), &pair.psi1)
}

/// One trial: the perturbation uses the full budget for `eps_s`.
pub fn check_theorem3(spec: &CommonSpectrumSpec, j: usize, eps_s: f64, seed: u64) -> Result<Report> {
    let budget = theorem3_budget(spec, j, eps_s)?;
    let pair = perturb_common_pair(spec, j, budget.min(2.0), seed)?;
    let res = theorem3_residual(&pair)?;
    let allowed = eps_s + 10.0 * eps_s * eps_s;
    let mut r = Report::new(&format!("theorem3[eps={eps_s:e}]"), allowed);
    r.record(res, res <= allowed);
    r.record_max("residual_over_eps", res / eps_s);
    Ok(r)
}

/// `trials` seeded instances of size `n` at one `eps_s`.
pub fn theorem3_suite(n: usize, eps_s: f64, trials: u64, seed0: u64) -> Result<Report> {
    let reports: Vec<Report> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let spec = CommonSpectrumSpec::random(n, 1e-3, seed0 + k);
            check_theorem3(&spec, 0, eps_s, seed0 + k + 1_000_003)
        })
        .collect::<Result<_>>()?;
    Ok(fold(&format!("theorem3[eps={eps_s:e}]"), eps_s + 10.0 * eps_s * eps_s, reports))
}

fn fold(name: &str, budget: f64, reports: Vec<Report>) -> Report {
    let mut out = Report::new(name, budget);
    for r in reports {
        out = out.merge(r);
    }
    out
}

/// Two eigenbases `U1` and `U2 ≈ U1 + εA` with distinct eigenvalue ratios.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSpec {
    pub base: CommonSpectrumSpec,
    /// Default `ε` for single evaluations.
    pub epsilon: f64,
    pub a: DMatrix<f64>,
    pub c: f64,
    pub gamma: Vec<f64>,
}

/// `γᵢ = min over k with ℓ_k ≠ ℓᵢ of |ℓᵢ − ℓ_k|`, `ℓ = λ⁽²⁾/λ⁽¹⁾`.
pub fn spectral_gaps(lambda1: &[f64], lambda2: &[f64]) -> Vec<f64> {
    let ratios: Vec<f64> = lambda2.iter().zip(lambda1).map(|(b, a)| b / a).collect();
    ratios
        .iter()
        .map(|&li| {
            ratios
                .iter()
                .filter(|&&lk| lk != li)
                .map(|lk| (li - lk).abs())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

pub const GAP_FLOOR: f64 = 1e-8;

impl PerturbationSpec {
    /// Ratios `λ⁽²⁾/λ⁽¹⁾ = 0.5 + gap·k` in shuffled order; `λ⁽¹⁾`
    /// log-uniform in `[0.05, 1/max ratio]` so both spectra stay in `(0, 1]`;
    /// `A` Gaussian scaled to unit spectral norm.
    pub fn random(n: usize, gap: f64, seed: u64) -> Result<Self> {
        let mut rng = sampling::rng(seed);
        let psi = random_orthonormal(n, n, &mut rng);
        let mut ratios: Vec<f64> = (0..n).map(|k| 0.5 + gap * k as f64).collect();
        let top = ratios.last().copied().unwrap_or(1.0).max(1.0);
        if 0.05 * top > 1.0 {
            return Err(Error::InvalidParameter(format!("gap {gap} too wide for n = {n}")));
        }
        let lambda1: Vec<f64> = (0..n).map(|_| log_uniform(0.05, 1.0 / top, &mut rng)).collect();
        ratios.shuffle(&mut rng);
        let lambda2: Vec<f64> = lambda1.iter().zip(&ratios).map(|(l, r)| l * r).collect();
        let mut a = gaussian_matrix(n, n, &mut rng);
        a /= spectral_norm(&a);
        let spec = Self {
            gamma: spectral_gaps(&lambda1, &lambda2),
            base: CommonSpectrumSpec { psi, lambda1, lambda2 },
            epsilon: 1e-3,
            a,
            c: 2.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        let norm = spectral_norm(&self.a);
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter(format!("perturbation direction has norm {norm}, expected 1")));
        }
        if !(self.c >= 1.0) {
            return Err(Error::InvalidParameter(format!("ratio bound c = {} must be >= 1", self.c)));
        }
        for (a, b) in self.base.lambda1.iter().zip(&self.base.lambda2) {
            let l = b / a;
            if l < 1.0 / self.c - 1e-12 || l > self.c + 1e-12 {
                return Err(Error::Hypothesis(format!("ratio {l} outside [1/c, c] with c = {}", self.c)));
            }
        }
        let ratios: Vec<f64> = self.base.lambda2.iter().zip(&self.base.lambda1).map(|(b, a)| b / a).collect();
        for i in 0..ratios.len() {
            for k in 0..i {
                if (ratios[i] - ratios[k]).abs() < GAP_FLOOR {
                    return Err(Error::Hypothesis(format!(
                        "eigenvalue ratios {i} and {k} coincide ({}); the gap hypothesis fails",
                        ratios[i]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn gamma_min(&self) -> f64 {
        self.gamma.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `√c ln c / minᵢ(γᵢ √λᵢ⁽¹⁾)`.
    pub fn implied_constant(&self) -> f64 {
        let denom = self
            .gamma
            .iter()
            .zip(&self.base.lambda1)
            .map(|(g, l)| g * l.sqrt())
            .fold(f64::INFINITY, f64::min);
        self.c.sqrt() * self.c.ln() / denom
    }

    /// `‖(F − ½√(λⱼ⁽¹⁾λⱼ⁽²⁾) ln(λⱼ⁽¹⁾/λⱼ⁽²⁾) I) ψⱼ⁽¹⁾‖` at perturbation size `eps`.
    pub fn residual(&self, j: usize, eps: f64) -> Result<f64> {
        let u1 = &self.base.psi;
        let u2 = if eps == 0.0 {
            u1.clone()
        } else {
            crate::linalg::thin_qr(&(u1 + &self.a * eps)).0
        };
        let (l1, l2) = (&self.base.lambda1, &self.base.lambda2);
        let w1 = SpdMatrix::new(SymmetricMatrix::from_spectrum(u1, l1)?)?;
        let w2 = SpdMatrix::new(SymmetricMatrix::from_spectrum(&u2, l2)?)?;
        let f = composite::compose_f(&w1, &w2, GeodesicParam::MIDPOINT)?;
        let lam = 0.5 * (l1[j] * l2[j]).sqrt() * (l1[j] / l2[j]).ln();
        pseudo_residual(&f, lam, &u1.column(j).into_owned())
    }
}

pub const THEOREM4_EPS: [f64; 3] = [1e-2, 1e-3, 1e-4];
pub const THEOREM4_MAX_SPREAD: f64 = 4.0;

/// Empirical `O(ε)` check: `residual/ε` must stay within a factor 4 over
/// the sweep, and consecutive residuals must shrink by a factor in
/// `[0.05, 0.5]` per decade.
pub fn check_theorem4(pspec: &PerturbationSpec, j: usize) -> Result<Report> {
    pspec.validate()?;
    let scaled: Vec<f64> = THEOREM4_EPS
        .iter()
        .map(|&e| pspec.residual(j, e).map(|r| r / e))
        .collect::<Result<_>>()?;
    let hi = scaled.iter().copied().fold(0.0, f64::max);
    let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = hi / lo;
    let decay_ok = scaled.windows(2).all(|w| {
        let ratio = w[1] * 0.1 / w[0];
        (0.05..=0.5).contains(&ratio)
    });
    let mut r = Report::new("theorem4", THEOREM4_MAX_SPREAD);
    r.record(spread, spread < THEOREM4_MAX_SPREAD && decay_ok);
    r.record_max("empirical_constant", hi);
    r.record_max("implied_constant", pspec.implied_constant());
    r.record_max("gamma_min", pspec.gamma_min());
    Ok(r)
}

pub fn theorem4_suite(n: usize, gap: f64, specs: u64, seed0: u64) -> Result<Report> {
    let reports: Vec<Report> = (0..specs)
        .into_par_iter()
        .map(|k| check_theorem4(&PerturbationSpec::random(n, gap, seed0 + k)?, 0))
        .collect::<Result<_>>()?;
    Ok(fold("theorem4", THEOREM4_MAX_SPREAD, reports))
}

/// Relative Frobenius distance; falls back to `scale` when `b` vanishes.
fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>, scale: f64) -> f64 {
    let d = (a - b).norm();
    let bn = b.norm();
    let denom = if bn > 1e-12 * scale { bn } else { scale };
    if denom == 0.0 {
        d
    } else {
        d / denom
    }
}

pub const EQUIVALENT_FORMS_TOL: f64 = 1e-9;

/// `S = (W2 W1⁻¹)^{1/2} W1` and `F = log(W1 S⁻¹) S`, evaluated with general
/// (nonsymmetric) matrix functions and compared with the geodesic forms.
pub fn check_equivalent_forms(w1: &SpdMatrix, w2: &SpdMatrix) -> Result<Report> {
    let s = composite::compose_s(w1, w2, GeodesicParam::MIDPOINT)?;
    let f = composite::compose_f(w1, w2, GeodesicParam::MIDPOINT)?;
    let (s_alt, f_alt) = nonsym::product_forms(w1.as_matrix(), w2.as_matrix())?;
    let ds = rel(&s_alt, s.as_matrix(), s.as_matrix().norm());
    let df = rel(&f_alt, f.as_matrix(), s.as_matrix().norm());
    let mut r = Report::new("equivalent_forms", EQUIVALENT_FORMS_TOL);
    r.record(ds.max(df), ds <= EQUIVALENT_FORMS_TOL && df <= EQUIVALENT_FORMS_TOL);
    r.record_max("s_discrepancy", ds);
    r.record_max("f_discrepancy", df);
    Ok(r)
}

pub const RECONSTRUCTION_TOL: f64 = 1e-8;

/// `Exp_S(±F)` returns `W1` and `W2`.
pub fn check_reconstruction(w1: &SpdMatrix, w2: &SpdMatrix) -> Result<Report> {
    let pair = composite::compose_spd(w1.as_symmetric(), w2.as_symmetric())?;
    let (a, b) = composite::reconstruct(&pair)?;
    let e1 = a.as_symmetric().rel_diff(w1.as_symmetric());
    let e2 = b.as_symmetric().rel_diff(w2.as_symmetric());
    let mut r = Report::new("reconstruction", RECONSTRUCTION_TOL);
    r.record(e1.max(e2), e1.max(e2) <= RECONSTRUCTION_TOL);
    Ok(r)
}

/// Random SPD pair with condition numbers up to `max_cond` and size in
/// `[min_n, max_n]`.
pub fn random_spd_pair(seed: u64, min_n: usize, max_n: usize, max_cond: f64) -> (SpdMatrix, SpdMatrix) {
    use rand::Rng;
    let mut rng = sampling::rng(seed);
    let n = rng.random_range(min_n..=max_n);
    let c1 = log_uniform(1.0, max_cond, &mut rng);
    let c2 = log_uniform(1.0, max_cond, &mut rng);
    let a = sampling::random_spd(n, 1.0 / c1, &mut rng);
    let b = sampling::random_spd(n, 1.0 / c2, &mut rng);
    (a, b)
}

/// Theorems 1 and 2 over `seeds` random common-spectrum instances.
pub fn common_spectrum_suite(n: usize, seeds: u64, seed0: u64) -> Result<(Report, Report)> {
    let pairs: Vec<(Report, Report)> = (0..seeds)
        .into_par_iter()
        .map(|k| {
            let spec = CommonSpectrumSpec::random(n, 1e-3, seed0 + k);
            let (w1, w2) = make_common_pair(&spec)?;
            Ok((check_theorem1(&w1, &w2, &spec)?, check_theorem2(&w1, &w2, &spec)?))
        })
        .collect::<Result<_>>()?;
    let (a, b): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok((fold("theorem1", THEOREM12_VALUE_TOL, a), fold("theorem2", THEOREM12_VALUE_TOL, b)))
}

/// Equivalent forms and reconstruction over random pairs.
pub fn random_pair_suite(seeds: u64, seed0: u64) -> Result<(Report, Report)> {
    let pairs: Vec<(Report, Report)> = (0..seeds)
        .into_par_iter()
        .map(|k| {
            let (w1, w2) = random_spd_pair(seed0 + k, 2, 50, 1e6);
            Ok((check_equivalent_forms(&w1, &w2)?, check_reconstruction(&w1, &w2)?))
        })
        .collect::<Result<_>>()?;
    let (a, b): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok((
        fold("equivalent_forms", EQUIVALENT_FORMS_TOL, a),
        fold("reconstruction", RECONSTRUCTION_TOL, b),
    ))
}

pub const SPSD_TOY_TOL: f64 = 1e-8;
pub const SPSD_NULL_TOL: f64 = 1e-10;

/// The rank-3 toy pair through the SPSD path, compared eigenvector by
/// eigenvector with the full-rank toy pair through the SPD path.
pub fn check_spsd_toy() -> Result<Report> {
    let full = datagen::toy_spd_pair();
    let low = datagen::toy_spsd_pair();
    let spd_pair = composite::compose_spd(&full.m1, &full.m2)?;
    let spsd_pair = composite::compose(
        &low.m1,
        &low.m2,
        &ComposeOptions {
            routing: Routing::Spsd,
            ..Default::default()
        },
    )?;
    let dense = [
        (spd_pair.s.to_dense()?, spsd_pair.s.to_dense()?),
        (spd_pair.f.to_dense()?, spsd_pair.f.to_dense()?),
    ];
    let mut worst: f64 = 0.0;
    let mut null: f64 = 0.0;
    for (reference, got) in &dense {
        for k in 0..3 {
            let psi = full.psi.column(k);
            let want = psi.dot(&(reference.as_matrix() * psi));
            let g = got.as_matrix() * psi;
            worst = worst.max((psi.dot(&g) - want).abs());
            // ψ_k must stay an eigenvector
            worst = worst.max((g - psi * want).norm());
        }
        null = null.max((got.as_matrix() * full.psi.column(3)).norm());
    }
    let mut r = Report::new("spsd_toy", SPSD_TOY_TOL);
    r.record(worst, worst <= SPSD_TOY_TOL && null < SPSD_NULL_TOL);
    r.record_max("psi4_magnitude", null);
    Ok(r)
}

/// The full-rank toy pair against the closed forms.
pub fn check_spd_toy() -> Result<Report> {
    let spec = CommonSpectrumSpec::toy();
    let (w1, w2) = make_common_pair(&spec)?;
    let a = check_theorem1(&w1, &w2, &spec)?;
    let b = check_theorem2(&w1, &w2, &spec)?;
    let mut r = fold("spd_toy", THEOREM12_VALUE_TOL, vec![a, b]);
    r.pass &= r.extra.get("subspace_angle").copied().unwrap_or(0.0) < THEOREM1_ANGLE_TOL;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_pair_matches_printed_matrices() {
        let (w1, _) = make_common_pair(&CommonSpectrumSpec::toy()).unwrap();
        assert!((w1.as_symmetric().get(0, 0) - 0.4275).abs() < 1e-15);
    }

    #[test]
    fn equal_spectra_give_equal_operators() {
        let mut spec = CommonSpectrumSpec::random(6, 1e-2, 3);
        spec.lambda2 = spec.lambda1.clone();
        let (a, b) = make_common_pair(&spec).unwrap();
        assert_eq!(a, b);
        let r = check_theorem1(&a, &b, &spec).unwrap();
        assert!(r.max_residual < 1e-12 && r.pass);
        let f = composite::compose_f(&a, &b, GeodesicParam::MIDPOINT).unwrap();
        assert!(f.frobenius_norm() < 1e-12);
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut spec = CommonSpectrumSpec::random(4, 1e-2, 1);
        spec.lambda1[0] = 1.5;
        assert!(make_common_pair(&spec).is_err());
        let mut spec = CommonSpectrumSpec::random(4, 1e-2, 1);
        spec.psi[(0, 0)] += 0.1;
        assert!(matches!(make_common_pair(&spec), Err(Error::NotOrthonormal { .. })));
    }

    #[test]
    fn random_theorems_1_2() {
        let (a, b) = common_spectrum_suite(20, 5, 100).unwrap();
        assert!(a.pass && b.pass, "{a:?} {b:?}");
        assert!(a.max_residual < 1e-9);
    }

    #[test]
    fn toy_closed_forms() {
        let r = check_spd_toy().unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.max_residual < 1e-10);
    }

    #[test]
    fn pseudo_residual_examples() {
        let m = SymmetricMatrix::from_diagonal(&[1.0, 2.0]).unwrap();
        let e1 = DVector::from_column_slice(&[1.0, 0.0]);
        assert_eq!(pseudo_residual(&m, 1.0, &e1).unwrap(), 0.0);
        let th: f64 = 0.3;
        let v = DVector::from_column_slice(&[th.cos(), th.sin()]);
        assert!((pseudo_residual(&m, 1.0, &v).unwrap() - th.sin()).abs() < 1e-15);
        assert_eq!(pseudo_residual(&m, 1.0, &v).unwrap(), pseudo_residual(&m, 1.0, &-v.clone()).unwrap());
        let bad = DVector::from_column_slice(&[1.0, 1.0]);
        assert!(matches!(pseudo_residual(&m, 1.0, &bad), Err(Error::NotUnitVector { .. })));
    }

    #[test]
    fn rank_one_examples() {
        let m = SymmetricMatrix::from_diagonal(&[1.0, 2.0]).unwrap();
        let e1 = DVector::from_column_slice(&[1.0, 0.0]);
        assert_eq!(rank_one_completion(&m, 1.0, &e1).unwrap(), DMatrix::zeros(2, 2));
        let b = rank_one_completion(&m, 1.5, &e1).unwrap();
        assert!((spectral_norm(&b) - 0.5).abs() < 1e-15);
        let fixed = (m.as_matrix() + &b) * &e1;
        assert!((fixed - &e1 * 1.5).norm() < 1e-15);

        let mut rng = sampling::rng(5);
        for _ in 0..10 {
            let m = sampling::random_spd(6, 1e-2, &mut rng).into_symmetric();
            let v = random_orthonormal(6, 1, &mut rng).column(0).into_owned();
            let b = rank_one_completion(&m, 0.3, &v).unwrap();
            let res = pseudo_residual(&m, 0.3, &v).unwrap();
            assert!((spectral_norm(&b) - res).abs() < 1e-12);
            assert!(((m.as_matrix() + &b) * &v - &v * 0.3).norm() < 1e-14);
        }
    }

    #[test]
    fn theorem3_zero_perturbation_is_theorem1() {
        let spec = CommonSpectrumSpec::random(10, 1e-3, 8);
        let pair = perturb_common_pair(&spec, 0, 0.0, 1).unwrap();
        let res = theorem3_residual(&pair).unwrap();
        assert!(res < 1e-12, "{res}");
    }

    #[test]
    fn theorem3_small_run() {
        for eps in [1e-2, 1e-3] {
            let r = theorem3_suite(20, eps, 10, 0).unwrap();
            assert!(r.pass, "{r:?}");
        }
        let a = theorem3_suite(20, 1e-2, 10, 0).unwrap();
        let b = theorem3_suite(20, 1e-3, 10, 0).unwrap();
        assert!(b.max_residual / a.max_residual <= 0.2);
    }

    #[test]
    fn theorem4_linear_decay() {
        let spec = PerturbationSpec::random(10, 0.1, 0).unwrap();
        assert!(spec.residual(0, 0.0).unwrap() < 1e-9);
        let r = check_theorem4(&spec, 0).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(spec.gamma_min() >= 0.1 - 1e-12);
    }

    #[test]
    fn theorem4_refuses_equal_ratios() {
        let mut spec = PerturbationSpec::random(6, 0.1, 1).unwrap();
        spec.base.lambda2 = spec.base.lambda1.iter().map(|l| l * 0.8).collect();
        assert!(matches!(check_theorem4(&spec, 0), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn implied_constant_grows_as_gap_shrinks() {
        let wide = PerturbationSpec::random(10, 0.1, 3).unwrap();
        let narrow = PerturbationSpec::random(10, 0.02, 3).unwrap();
        assert!(narrow.implied_constant() > wide.implied_constant());
    }

    #[test]
    fn equivalent_forms_examples() {
        let w = crate::testutil::random_spd(5, 1e-2, 2);
        let r = check_equivalent_forms(&w, &w).unwrap();
        assert!(r.max_residual < 1e-12, "{r:?}");
        let spec = CommonSpectrumSpec::toy();
        let (a, b) = make_common_pair(&spec).unwrap();
        assert!(check_equivalent_forms(&a, &b).unwrap().max_residual <= 1e-10);
        let (a, b) = random_spd_pair(4, 2, 50, 1e6);
        let r = check_equivalent_forms(&a, &b).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn spsd_toy_matches_spd_toy() {
        let r = check_spsd_toy().unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn report_json_shape() {
        let r = Report::new("x", 1.0);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for k in ["oracle", "instances", "max_residual", "budget", "pass"] {
            assert!(v.get(k).is_some());
        }
    }
}
