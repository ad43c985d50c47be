//! Runs the verification oracles at small scale and prints the reports.
//!
//! `cargo run --release --example oracles -- [seeds]`

use rmra::verify;

fn main() -> rmra::Result<()> {
    let seeds = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let mut reports = vec![verify::check_spd_toy()?, verify::check_spsd_toy()?];
    let (t1, t2) = verify::common_spectrum_suite(20, seeds, 0)?;
    reports.extend([t1, t2]);
    for eps in verify::THEOREM4_EPS {
        reports.push(verify::theorem3_suite(20, eps, seeds, 0)?);
    }
    reports.push(verify::theorem4_suite(10, 0.1, seeds, 0)?);
    let (eq, rec) = verify::random_pair_suite(seeds, 0)?;
    reports.extend([eq, rec]);

    for r in &reports {
        println!(
            "{:<22} {:>4} instances  max {:>10.3e}  budget {:>9.2e}  {}",
            r.oracle,
            r.instances,
            r.max_residual,
            r.budget,
            if r.pass { "ok" } else { "FAILED" }
        );
    }

    // the F residual is linear in the perturbation; its constant is what
    // the gap bound overestimates
    let spec = verify::PerturbationSpec::random(10, 0.1, 0)?;
    for eps in verify::THEOREM4_EPS {
        let res = spec.residual(0, eps)?;
        println!("eps {eps:.0e}: residual {res:.3e}, residual/eps {:.4}", res / eps);
    }
    println!("implied constant {:.2}", spec.implied_constant());
    Ok(())
}
