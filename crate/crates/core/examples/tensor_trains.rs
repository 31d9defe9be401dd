//! MPS and MPO arithmetic: products, sums, expectation values and truncation.

use tnlearn::sampling::seeded_rng;
use tnlearn::tt::{Mpo, Mps};
use tnlearn::Result;

fn main() -> Result<()> {
    let mut rng = seeded_rng(1);
    let n = 5;
    let a = Mpo::random_gaussian(&Mpo::uniform_ranks(n, 2), &mut rng)?;
    let b = Mpo::random_gaussian(&Mpo::uniform_ranks(n, 3), &mut rng)?;
    let psi = Mps::random_gaussian(&Mpo::uniform_ranks(n, 2), &mut rng)?;

    println!("ranks A {:?}, B {:?}", a.bond_ranks(), b.bond_ranks());
    println!("ranks A.B {:?}", a.multiply(&b)?.bond_ranks());
    println!("ranks A+B {:?}", a.add(&b)?.bond_ranks());
    println!("Tr A = {:.5}", a.trace());
    println!("<psi|A|psi> = {:.5}", a.sandwich(&psi)?);
    println!("|A psi|^2 = {:.5}", a.apply(&psi)?.norm_sqr());

    let sum = a.add(&b)?;
    for chi in [1, 2, 4, 5] {
        let t = sum.truncate_with_report(chi)?;
        println!("truncate A+B to {chi}: largest discarded weight {:.3e}", t.discarded.iter().fold(0.0f64, |a, x| a.max(*x)));
    }
    Ok(())
}
