//! How much of a rank-4 state survives truncation to operator rank chi_M^2.

use tnlearn::experiments::{run_experiment, ExperimentConfig, ExperimentKind};
use tnlearn::Result;

fn main() -> Result<()> {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::Truncation);
    cfg.chi_s = vec![4];
    cfg.chi_m = vec![1, 2, 3, 4];
    cfg.repeats = 20;
    let out = run_experiment(&cfg, None)?;
    print!("{}", out.table("truncation").expect("truncation table").to_csv_string()?);
    Ok(())
}
