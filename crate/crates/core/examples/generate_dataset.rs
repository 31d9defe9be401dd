//! Random density MPO, random product measurements and a saved dataset.

use tnlearn::sampling::{random_density_mpo, seeded_rng, Dataset};
use tnlearn::Result;

fn main() -> Result<()> {
    let rho = random_density_mpo(4, 2, &mut seeded_rng(7))?;
    println!("rho: ranks {:?}, trace {:.6}", rho.bond_ranks(), rho.trace());

    let data = Dataset::generate(&rho, 8, 42, Some(2))?;
    for r in data.records.iter().take(4) {
        println!("p = {:.6}", r.probability);
    }

    let path = std::env::temp_dir().join("tnlearn_example.jsonl");
    data.save(&path)?;
    let back = Dataset::load(&path)?;
    println!("{} records round-tripped through {}: {}", back.len(), path.display(), back == data);
    Ok(())
}
