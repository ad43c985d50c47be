//! The toy pair with the fourth eigenvalue removed goes through the
//! fixed-rank path: Grassmann geodesic of the ranges plus an SPD geodesic of
//! the cores.

use rmra::composite::{self, ComposeOptions, Routing};
use rmra::datagen;
use rmra::spsd::{principal_angles, spsd_factorize, RankPolicy};

fn main() -> rmra::Result<()> {
    let toy = datagen::toy_spsd_pair();
    let g1 = spsd_factorize(&toy.m1, RankPolicy::default())?;
    let g2 = spsd_factorize(&toy.m2, RankPolicy::default())?;
    println!("ranks {} and {}", g1.rank(), g2.rank());
    let pa = principal_angles(g1.v(), g2.v())?;
    println!("principal angles {:?}", pa.theta.as_slice());

    let opts = ComposeOptions {
        routing: Routing::Auto,
        ..Default::default()
    };
    let pair = composite::compose(&toy.m1, &toy.m2, &opts)?;
    println!("route {:?}", pair.route);

    let s = pair.s.to_dense()?;
    let f = pair.f.to_dense()?;
    for k in 0..4 {
        let psi = toy.psi.column(k);
        println!(
            "psi_{}: S {:>10.6}  F {:>+10.6}",
            k + 1,
            psi.dot(&(s.as_matrix() * psi)),
            psi.dot(&(f.as_matrix() * psi))
        );
    }
    Ok(())
}
