//! Two tori sharing three angles with θ₁ and θ₂ swapped between them. F's
//! positive eigenvectors follow the angle dominant in the first torus,
//! the negative ones the angle dominant in the second.

use nalgebra::DVector;
use rmra::composite::{self, ComposeOptions, Selection};
use rmra::datagen::{tori, TorusConfig, TorusVariant};
use rmra::diffusion::{diffusion_operator, KernelConfig};

fn corr(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let (a, b) = (a.add_scalar(-a.mean()), b.add_scalar(-b.mean()));
    a.dot(&b) / (a.norm() * b.norm())
}

fn main() -> rmra::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let sample = tori(&TorusConfig {
        n,
        seed: 1,
        variant: TorusVariant::Common,
        ..Default::default()
    })?;
    let kc = KernelConfig::median_times(1.0);
    let w1 = diffusion_operator(&sample.x1, &kc)?.w;
    let w2 = diffusion_operator(&sample.x2, &kc)?.w;
    let pair = composite::compose(&w1, &w2, &ComposeOptions::default())?;
    println!("route {:?}", pair.route);

    let emb = composite::embed_eigen(&pair.f.eig()?, 4, Selection::Signed { positive: 2, negative: 2 })?;
    let feats = [
        ("cos t1", sample.angles.column(0).map(f64::cos)),
        ("sin t1", sample.angles.column(0).map(f64::sin)),
        ("cos t2", sample.angles.column(1).map(f64::cos)),
        ("sin t2", sample.angles.column(1).map(f64::sin)),
        ("cos t3", sample.angles.column(2).map(f64::cos)),
    ];
    print!("{:>12}", "eigenvalue");
    for (name, _) in &feats {
        print!("{name:>9}");
    }
    println!();
    for k in 0..4 {
        let v = emb.vectors.column(k).into_owned();
        print!("{:>+12.5}", emb.values[k]);
        for (_, f) in &feats {
            print!("{:>9.3}", corr(&v, f).abs());
        }
        println!();
    }
    Ok(())
}
