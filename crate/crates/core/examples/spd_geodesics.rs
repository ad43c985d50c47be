//! Walks the affine-invariant geodesic between two random SPD matrices and
//! checks that distances add up along it.

use rmra::sampling::{random_spd, rng};
use rmra::spd::{exp_map, geodesic, log_map, riemannian_distance, GeodesicParam};

fn main() -> rmra::Result<()> {
    let mut r = rng(11);
    let a = random_spd(6, 1e-2, &mut r);
    let b = random_spd(6, 1e-2, &mut r);
    let total = riemannian_distance(&a, &b)?;
    println!("d(A, B) = {total:.6}");
    for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let g = geodesic(&a, &b, GeodesicParam::new(p)?)?;
        let da = riemannian_distance(&a, &g)?;
        let db = riemannian_distance(&g, &b)?;
        println!("p = {p:<4}  d(A,g) = {da:.6}  d(g,B) = {db:.6}  sum - d(A,B) = {:+.1e}", da + db - total);
    }
    let v = log_map(&a, b.as_symmetric())?;
    let back = exp_map(&a, &v)?;
    println!("Exp_A(Log_A(B)) vs B: {:.1e}", back.as_symmetric().rel_diff(b.as_symmetric()));
    Ok(())
}
