//! Composes the four-dimensional toy pair and prints the spectra of S and F
//! next to the closed forms `√(λ₁λ₂)` and `½√(λ₁λ₂) ln(λ₁/λ₂)`.

use rmra::composite::{self, Selection};
use rmra::datagen;
use rmra::linalg::{sym_eig, EigenOrdering};

fn main() -> rmra::Result<()> {
    let toy = datagen::toy_spd_pair();
    let pair = composite::compose_spd(&toy.m1, &toy.m2)?;
    let s = pair.s.to_dense()?;
    let f = pair.f.to_dense()?;

    println!("  k   lambda1   lambda2    S(psi_k)   closed     F(psi_k)   closed");
    for k in 0..4 {
        let psi = toy.psi.column(k);
        let (a, b) = (toy.lambda1[k], toy.lambda2[k]);
        let rs = psi.dot(&(s.as_matrix() * psi));
        let rf = psi.dot(&(f.as_matrix() * psi));
        println!(
            "  {}   {a:<8}  {b:<8}  {rs:>9.6}  {:>9.6}  {rf:>+9.6}  {:>+9.6}",
            k + 1,
            (a * b).sqrt(),
            0.5 * (a * b).sqrt() * (a / b).ln()
        );
    }

    let e = sym_eig(&s, EigenOrdering::ByValueDesc)?;
    println!("\nS spectrum {:?}", e.values.as_slice());
    let signed = composite::embed(&f, 2, Selection::Signed { positive: 1, negative: 1 })?;
    println!("F signed pair {:?}", signed.values.as_slice());

    let (w1, w2) = composite::reconstruct(&pair)?;
    println!(
        "Exp_S(+F) vs W1: {:.1e}, Exp_S(-F) vs W2: {:.1e}",
        w1.as_symmetric().rel_diff(&toy.m1),
        w2.as_symmetric().rel_diff(&toy.m2)
    );
    Ok(())
}
