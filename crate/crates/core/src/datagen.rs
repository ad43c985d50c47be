//! Synthetic inputs: the 4×4 toy pairs, the double-gyre flow and the
//! pair of 3D tori embedded in 4D.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::diffusion::Dataset;
use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;
use crate::sampling;

/// Two matrices sharing the eigenbasis `psi`.
#[derive(Clone, Debug)]
pub struct SpectralPair {
    pub m1: SymmetricMatrix,
    pub m2: SymmetricMatrix,
    pub psi: DMatrix<f64>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
}

/// The ±½ eigenbasis of the toy example; column `k` is `ψ_{k+1}`.
pub fn toy_eigenbasis() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 1.0, 1.0, 1.0, //
            1.0, 1.0, -1.0, -1.0, //
            1.0, -1.0, -1.0, 1.0, //
            1.0, -1.0, 1.0, -1.0,
        ],
    ) * 0.5
}

fn toy_pair(lambda1: [f64; 4], lambda2: [f64; 4]) -> SpectralPair {
    let psi = toy_eigenbasis();
    SpectralPair {
        m1: SymmetricMatrix::from_spectrum(&psi, &lambda1).expect("finite"),
        m2: SymmetricMatrix::from_spectrum(&psi, &lambda2).expect("finite"),
        psi,
        lambda1: lambda1.to_vec(),
        lambda2: lambda2.to_vec(),
    }
}

/// Full-rank toy pair.
pub fn toy_spd_pair() -> SpectralPair {
    toy_pair([0.5, 1.0, 0.01, 0.2], [0.01, 1.0, 0.5, 0.2])
}

/// Rank-3 toy pair: as [`toy_spd_pair`] with the `ψ₄` eigenvalue set to zero.
pub fn toy_spsd_pair() -> SpectralPair {
    toy_pair([0.5, 1.0, 0.01, 0.0], [0.01, 1.0, 0.5, 0.0])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    Rk4,
    Euler,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GyreConfig {
    pub n: usize,
    pub t: usize,
    /// Time between recorded frames.
    pub dt: f64,
    /// Integration steps per frame interval.
    pub substeps: usize,
    pub c1: f64,
    pub c2: f64,
    pub seed: u64,
    pub integrator: Integrator,
}

impl Default for GyreConfig {
    fn default() -> Self {
        Self {
            n: 2500,
            t: 256,
            dt: 1.0 / 256.0,
            substeps: 1,
            c1: 2.0,
            c2: 10.0,
            seed: 0,
            integrator: Integrator::Rk4,
        }
    }
}

impl GyreConfig {
    /// `n` trajectories over `t` frames spanning the unit time interval
    /// (`dt = 1/t`), integrated with steps no longer than 1/256.
    pub fn desk(n: usize, t: usize, seed: u64) -> Self {
        let dt = 1.0 / t as f64;
        Self {
            n,
            t,
            dt,
            substeps: Self::substeps_for(dt),
            seed,
            ..Self::default()
        }
    }

    /// Smallest substep count keeping the inner step at or below 1/256.
    pub fn substeps_for(dt: f64) -> usize {
        ((dt * 256.0 - 1e-9).ceil() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.t < 2 || self.substeps < 1 {
            return Err(Error::InvalidParameter(format!(
                "gyre needs n >= 1, t >= 2, substeps >= 1 (got n={}, t={}, substeps={})",
                self.n, self.t, self.substeps
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        Ok(())
    }
}

/// `g(t) = t²(3 − 2t)`.
pub fn gyre_switch(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// `(ẋ, ẏ) = (−∂H/∂y, ∂H/∂x)` for the blended Hamiltonian.
pub fn gyre_velocity(x: f64, y: f64, t: f64, c1: f64, c2: f64) -> (f64, f64) {
    let g = gyre_switch(t);
    let (s2x, c2x) = (2.0 * PI * x).sin_cos();
    let (sy, cy) = (PI * y).sin_cos();
    let (sx, cx) = (PI * x).sin_cos();
    let (s2y, c2y) = (2.0 * PI * y).sin_cos();
    let dh1_dx = c1 * 2.0 * PI * c2x * sy;
    let dh1_dy = c1 * PI * s2x * cy;
    let dh2_dx = c2 * PI * cx * s2y;
    let dh2_dy = c2 * 2.0 * PI * sx * c2y;
    (
        -((1.0 - g) * dh1_dy + g * dh2_dy),
        (1.0 - g) * dh1_dx + g * dh2_dx,
    )
}

/// One fixed step of a non-autonomous planar field.
pub fn step<F: Fn(f64, f64, f64) -> (f64, f64)>(
    field: &F,
    integrator: Integrator,
    (x, y): (f64, f64),
    t: f64,
    h: f64,
) -> (f64, f64) {
    match integrator {
        Integrator::Euler => {
            let (u, v) = field(x, y, t);
            (x + h * u, y + h * v)
        }
        Integrator::Rk4 => {
            let k1 = field(x, y, t);
            let k2 = field(x + 0.5 * h * k1.0, y + 0.5 * h * k1.1, t + 0.5 * h);
            let k3 = field(x + 0.5 * h * k2.0, y + 0.5 * h * k2.1, t + 0.5 * h);
            let k4 = field(x + h * k3.0, y + h * k3.1, t + h);
            (
                x + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
                y + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
            )
        }
    }
}

/// `T` frames of `N` tracked points; row `i` of every frame is the same
/// particle.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySet {
    pub frames: Vec<Dataset>,
    pub times: Vec<f64>,
}

impl TrajectorySet {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn n_points(&self) -> usize {
        self.frames.first().map_or(0, Dataset::n_points)
    }
}

/// Integrates the double gyre; frame `k` (0-based) is recorded at `t = k·dt`.
pub fn double_gyre(cfg: &GyreConfig) -> Result<TrajectorySet> {
    cfg.validate()?;
    let mut rng = sampling::rng(cfg.seed);
    let starts: Vec<(f64, f64)> = (0..cfg.n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
    let field = |x: f64, y: f64, t: f64| gyre_velocity(x, y, t, cfg.c1, cfg.c2);
    let h = cfg.dt / cfg.substeps as f64;
    let paths: Vec<Vec<(f64, f64)>> = starts
        .par_iter()
        .map(|&p0| {
            let mut p = p0;
            let mut out = Vec::with_capacity(cfg.t);
            for k in 0..cfg.t {
                out.push(p);
                if k + 1 < cfg.t {
                    for s in 0..cfg.substeps {
                        let t = k as f64 * cfg.dt + s as f64 * h;
                        p = step(&field, cfg.integrator, p, t, h);
                    }
                }
            }
            out
        })
        .collect();
    let mut frames = Vec::with_capacity(cfg.t);
    for k in 0..cfg.t {
        let pts = DMatrix::from_fn(cfg.n, 2, |i, c| if c == 0 { paths[i][k].0 } else { paths[i][k].1 });
        frames.push(Dataset::new(pts)?);
    }
    Ok(TrajectorySet {
        frames,
        times: (0..cfg.t).map(|k| k as f64 * cfg.dt).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TorusVariant {
    /// Both embeddings share `θ₃`.
    Common,
    /// The second embedding uses an independent `θ₄` in place of `θ₃`.
    Unique,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusConfig {
    pub n: usize,
    pub r: f64,
    pub big_r: f64,
    pub outer_r: f64,
    pub seed: u64,
    pub variant: TorusVariant,
}

impl Default for TorusConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            r: 2.0,
            big_r: 7.0,
            outer_r: 15.0,
            seed: 0,
            variant: TorusVariant::Common,
        }
    }
}

impl TorusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("tori need n >= 2, got {}", self.n)));
        }
        if !(0.0 < self.r && self.r < self.big_r && self.big_r < self.outer_r) {
            return Err(Error::InvalidParameter(format!(
                "radii must satisfy 0 < r < R < R~ (got {}, {}, {})",
                self.r, self.big_r, self.outer_r
            )));
        }
        Ok(())
    }

    /// 3D torus point embedded in 4D; `a` rotates the tube, `b` the inner
    /// circle, `c` the outer revolution.
    pub fn embed(&self, a: f64, b: f64, c: f64) -> [f64; 4] {
        let tube = self.big_r + self.r * b.cos();
        let ring = self.outer_r + tube * a.cos();
        [ring * c.cos(), ring * c.sin(), tube * a.sin(), self.r * b.sin()]
    }
}

#[derive(Clone, Debug)]
pub struct TorusSample {
    pub x1: Dataset,
    pub x2: Dataset,
    /// `N×4`, columns `θ₁..θ₄`.
    pub angles: DMatrix<f64>,
}

/// Correspondence-aligned samples of the two tori.
pub fn tori(cfg: &TorusConfig) -> Result<TorusSample> {
    cfg.validate()?;
    let mut rng = sampling::rng(cfg.seed);
    let tau = 2.0 * PI;
    let angles = DMatrix::from_fn(cfg.n, 4, |_, _| tau * rng.random::<f64>());
    let mut x1 = DMatrix::zeros(cfg.n, 4);
    let mut x2 = DMatrix::zeros(cfg.n, 4);
    for i in 0..cfg.n {
        let (t1, t2, t3, t4) = (angles[(i, 0)], angles[(i, 1)], angles[(i, 2)], angles[(i, 3)]);
        let c2 = match cfg.variant {
            TorusVariant::Common => t3,
            TorusVariant::Unique => t4,
        };
        let p1 = cfg.embed(t1, t2, t3);
        let p2 = cfg.embed(t2, t1, c2);
        for c in 0..4 {
            x1[(i, c)] = p1[c];
            x2[(i, c)] = p2[c];
        }
    }
    Ok(TorusSample {
        x1: Dataset::new(x1)?,
        x2: Dataset::new(x2)?,
        angles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_basis_is_orthonormal() {
        let psi = toy_eigenbasis();
        assert!((psi.transpose() * &psi - DMatrix::identity(4, 4)).amax() < 1e-15);
    }

    #[test]
    fn toy_entries_and_spectrum() {
        let toy = toy_spd_pair();
        assert!((toy.m1.get(0, 0) - 0.4275).abs() < 1e-15);
        let e = toy.m1.eig(crate::linalg::EigenOrdering::ByValueDesc).unwrap();
        for (got, want) in e.values.iter().zip([1.0, 0.5, 0.2, 0.01]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn spsd_toy_has_rank_three() {
        let toy = toy_spsd_pair();
        let psi4 = toy.psi.column(3);
        assert!((toy.m1.as_matrix() * psi4).norm() < 1e-14);
        let e = toy.m1.eig(crate::linalg::EigenOrdering::ByValueDesc).unwrap();
        assert!(e.values[3].abs() < 1e-14);
        let diff = toy_spd_pair().m1.as_matrix() - toy.m1.as_matrix();
        assert!((diff - psi4 * psi4.transpose() * 0.2).amax() < 1e-14);
    }

    #[test]
    fn switch_function() {
        assert_eq!(gyre_switch(0.0), 0.0);
        assert_eq!(gyre_switch(1.0), 1.0);
        assert_eq!(gyre_switch(0.5), 0.5);
    }

    #[test]
    fn gyre_velocity_samples() {
        let (u, v) = gyre_velocity(0.25, 0.0, 0.0, 2.0, 10.0);
        assert!((u + 2.0 * PI).abs() < 1e-12 && v.abs() < 1e-12);
        let (u, v) = gyre_velocity(0.5, 0.5, 1.0, 2.0, 10.0);
        assert!((u - 20.0 * PI).abs() < 1e-12 && v.abs() < 1e-12);
    }

    #[test]
    fn gyre_is_seeded() {
        let cfg = GyreConfig::desk(20, 8, 3);
        let a = double_gyre(&cfg).unwrap();
        let b = double_gyre(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
        assert_eq!(a.times[1], 0.125);
    }

    fn endpoint(dt_div: usize) -> (f64, f64) {
        let field = |x: f64, y: f64, t: f64| gyre_velocity(x, y, t, 2.0, 10.0);
        let h = 1.0 / 512.0 / dt_div as f64;
        let mut p = (0.3, 0.6);
        for k in 0..(512 * dt_div) {
            p = step(&field, Integrator::Rk4, p, k as f64 * h, h);
        }
        p
    }

    #[test]
    fn rk4_is_fourth_order() {
        let reference = endpoint(8);
        let err = |p: (f64, f64)| ((p.0 - reference.0).powi(2) + (p.1 - reference.1).powi(2)).sqrt();
        let ratio = err(endpoint(1)) / err(endpoint(2));
        assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn frozen_field_conserves_h1() {
        let field = |x: f64, y: f64, _t: f64| gyre_velocity(x, y, 0.0, 2.0, 0.0);
        let h1 = |(x, y): (f64, f64)| 2.0 * (2.0 * PI * x).sin() * (PI * y).sin();
        let mut p = (0.2, 0.3);
        let start = h1(p);
        let dt = 1.0 / 4096.0;
        for k in 0..4096 {
            p = step(&field, Integrator::Rk4, p, k as f64 * dt, dt);
        }
        assert!((h1(p) - start).abs() < 1e-6);
    }

    #[test]
    fn torus_origin_point() {
        let cfg = TorusConfig::default();
        assert_eq!(cfg.embed(0.0, 0.0, 0.0), [24.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn torus_samples() {
        let s = tori(&TorusConfig { n: 50, ..Default::default() }).unwrap();
        for i in 0..50 {
            assert!(s.x1.points()[(i, 3)].powi(2) <= 4.0 + 1e-12);
        }
        let u = tori(&TorusConfig {
            n: 50,
            variant: TorusVariant::Unique,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(u.x1, s.x1);
        assert_ne!(u.x2, s.x2);
    }
}
