//! Diffusion operator of a noisy circle. The two leading non-trivial
//! eigenvectors should trace cos and sin of the angle.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rmra::diffusion::{diffusion_operator, dm_eigenvectors, Dataset, KernelConfig};
use rmra::linalg::{sym_eig, EigenOrdering};
use rmra::sampling::rng;

fn main() -> rmra::Result<()> {
    let n = 300;
    let mut r = rng(5);
    let angles: Vec<f64> = (0..n).map(|_| 2.0 * PI * r.random::<f64>()).collect();
    let points = DMatrix::from_fn(n, 2, |i, j| {
        let noise = 0.02 * (r.random::<f64>() - 0.5);
        if j == 0 {
            angles[i].cos() + noise
        } else {
            angles[i].sin() + noise
        }
    });
    let ds = Dataset::new(points)?;
    let op = diffusion_operator(&ds, &KernelConfig::median_times(0.5))?;
    println!("sigma = {:.4}", op.sigma.unwrap_or(f64::NAN));

    let eig = sym_eig(&op.w, EigenOrdering::ByValueDesc)?;
    println!("leading eigenvalues {:?}", &eig.values.as_slice()[..5]);
    let dm = dm_eigenvectors(&eig, &op.degree)?;

    // the pair (psi_2, psi_3) spans the first Fourier mode
    let c: nalgebra::DVector<f64> = nalgebra::DVector::from_iterator(n, angles.iter().map(|a| a.cos()));
    let s: nalgebra::DVector<f64> = nalgebra::DVector::from_iterator(n, angles.iter().map(|a| a.sin()));
    let basis = DMatrix::from_columns(&[dm.right.column(1), dm.right.column(2)]);
    let q = rmra::linalg::thin_qr(&basis).0;
    for (name, f) in [("cos", c), ("sin", s)] {
        let f = &f / f.norm();
        let captured = (q.transpose() * &f).norm();
        println!("{name}(theta) captured by span(psi_2, psi_3): {captured:.4}");
    }
    Ok(())
}
