//! Riemannian multi-resolution analysis.
//!
//! Diffusion operators built from point clouds are combined on the manifold
//! of symmetric positive-definite matrices (or its fixed-rank semi-definite
//! counterpart). For two operators `W1`, `W2`:
//!
//! * `S = W1 # W2`, the geodesic midpoint, emphasizes components the two
//!   share with similar strength;
//! * `F = Log_S(W1)` emphasizes shared components whose strength differs,
//!   with the sign telling which input dominates.
//!
//! Applied recursively over a time series of `2^m` operators this yields a
//! dyadic tree of `(S, F)` pairs; see [`tree`].
//!
//! ```
//! use rmra::{composite, datagen};
//!
//! let toy = datagen::toy_spd_pair();
//! let pair = composite::compose_spd(&toy.m1, &toy.m2).unwrap();
//!
//! // the second eigenvector is common with eigenvalue 1 in both inputs
//! let s = pair.s.eig();
//! assert!((s.values[0] - 1.0).abs() < 1e-12);
//! // and F, which separates the first and third, gives it nothing
//! let psi = toy.psi.column(1);
//! let f = pair.f.to_dense().unwrap();
//! assert!((f.as_matrix() * psi).norm() < 1e-12);
//! ```

pub mod cli;
pub mod cluster;
pub mod composite;
pub mod datagen;
pub mod diffusion;
pub mod error;
pub mod io;
pub mod linalg;
pub mod sampling;
pub mod spd;
pub mod spsd;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{EigenOrdering, EigenSystem, SpdMatrix, SymmetricMatrix};
pub use spd::GeodesicParam;
pub use spsd::SpsdFactors;

#[cfg(test)]
pub(crate) mod testutil {
    use crate::linalg::SpdMatrix;
    use crate::sampling;

    pub fn random_spd(n: usize, min_eig: f64, seed: u64) -> SpdMatrix {
        sampling::random_spd(n, min_eig, &mut sampling::rng(seed))
    }
}
