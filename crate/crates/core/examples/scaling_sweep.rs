//! Minimum training-set size to reach R2 = 0.5 as the qubit count grows.

use tnlearn::experiments::{run_experiment, ExperimentConfig, ExperimentKind};
use tnlearn::Result;

fn main() -> Result<()> {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::Scaling);
    cfg.n_qubits = vec![2, 3, 4];
    cfg.train_sizes = (1..=15).map(|k| 10 * k).collect();
    cfg.repeats = 3;
    let out = run_experiment(&cfg, None)?;
    print!("{}", out.table("scaling_summary").expect("summary table").to_csv_string()?);
    Ok(())
}
