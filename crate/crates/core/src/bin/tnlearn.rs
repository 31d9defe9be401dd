use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tnlearn::circuit::{noisy_circuit_density, CircuitSpec};
use tnlearn::experiments::{run_experiment, ExperimentConfig, ExperimentKind};
use tnlearn::learner::{init_model, r_squared, train, LpsModel, TrainConfig};
use tnlearn::sampling::{derive_seed, random_density_mpo, seeded_rng, Dataset};
use tnlearn::tt::Mpo;
use tnlearn::Result;

#[derive(Parser)]
#[command(name = "tnlearn", version, about = "Learn locally purified tensor-network models from measurement data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from a random density MPO, or from a saved one with --rho.
    Gen {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "chi-s")]
        chi_s: Option<usize>,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth MPO file to sample from instead of a random one.
        #[arg(long, conflicts_with = "chi_s")]
        rho: Option<PathBuf>,
        /// Where to save the generated ground truth.
        #[arg(long = "rho-out")]
        rho_out: Option<PathBuf>,
    },
    /// Noisy hardware-efficient-ansatz density MPO.
    Circuit {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit Ω to a dataset with plain SGD.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long = "chi-m")]
        chi_m: usize,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 5)]
        batch: usize,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "eval-every", default_value_t = 50)]
        eval_every: usize,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long = "model-out")]
        model_out: PathBuf,
        #[arg(long = "trace-out")]
        trace_out: Option<PathBuf>,
    },
    /// Print R² and residual statistics of a model on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Run a configured experiment and write its tables.
    Exp {
        kind: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { n, chi_s, m, seed, out, rho, rho_out } => {
            let (rho, chi_s, source) = match rho {
                Some(path) => (Mpo::load(&path)?, None, Some(path.display().to_string())),
                None => {
                    let (Some(n), Some(chi)) = (n, chi_s) else {
                        return Err(tnlearn::Error::Argument("gen needs --n and --chi-s, or --rho".into()));
                    };
                    let rho = random_density_mpo(n, chi, &mut seeded_rng(derive_seed(seed, &[0])))?;
                    (rho, Some(chi), None)
                }
            };
            if n.is_some_and(|n| n != rho.n_sites()) {
                return Err(tnlearn::Error::Argument("--n disagrees with the MPO".into()));
            }
            let mut data = Dataset::generate(&rho, m, derive_seed(seed, &[1]), chi_s)?;
            data.meta.source = source;
            data.save(&out)?;
            if let Some(path) = rho_out {
                rho.save(path)?;
            }
            println!("wrote {} records on {} qubits to {}", data.len(), data.n_qubits(), out.display());
        }
        Command::Circuit { n, depth, gamma, seed, out } => {
            let rho = noisy_circuit_density(&CircuitSpec { n_qubits: n, depth, seed, gamma })?;
            rho.save(&out)?;
            println!("wrote density MPO with bond ranks {:?} to {}", rho.bond_ranks(), out.display());
        }
        Command::Train { data, chi_m, steps, batch, lr, seed, eval_every, test, model_out, trace_out } => {
            let train_set = Dataset::load(&data)?;
            let test_set = test.map(Dataset::load).transpose()?;
            let model = init_model(train_set.n_qubits(), chi_m, &mut seeded_rng(derive_seed(seed, &[0])))?;
            let cfg = TrainConfig {
                steps,
                batch_size: batch,
                learning_rate: lr,
                seed: derive_seed(seed, &[1]),
                eval_every,
            };
            let (model, trace) = train(&model, &train_set, &cfg, test_set.as_ref())?;
            model.save(&model_out)?;
            if let Some(path) = trace_out {
                trace.write_csv(fs::File::create(path)?)?;
            }
            let last = trace.rows.last().expect("final row");
            let show = |x: Option<f64>| x.map_or("undefined".to_string(), |v| format!("{v:.6}"));
            println!(
                "step {} loss_prime {:.6e} r2_train {} r2_test {}",
                last.step,
                last.loss_prime,
                show(last.r2_train),
                show(last.r2_test)
            );
        }
        Command::Eval { model, data } => {
            let model = LpsModel::load(model)?;
            let data = Dataset::load(data)?;
            let preds = model.predict_all(&data.records);
            let truths = data.probabilities();
            let eps: Vec<f64> = preds.iter().zip(&truths).map(|(p, t)| p - t).collect();
            let n = eps.len() as f64;
            let mean = eps.iter().sum::<f64>() / n;
            let std = if eps.len() > 1 {
                (eps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let max_abs = eps.iter().fold(0.0f64, |a, e| a.max(e.abs()));
            let outliers = eps.iter().filter(|e| e.abs() > 3.0 * std).count();
            match r_squared(&preds, &truths) {
                Ok(r2) => println!("r2 {r2:.6}"),
                Err(e) => println!("r2 undefined ({e})"),
            }
            println!("records {}", eps.len());
            println!("residual_mean {mean:.6e}");
            println!("residual_std {std:.6e}");
            println!("residual_max_abs {max_abs:.6e}");
            println!("outliers_3sigma {outliers}");
        }
        Command::Exp { kind, config, out, jobs } => {
            let kind: ExperimentKind = kind.parse()?;
            let mut cfg = match config {
                Some(path) => ExperimentConfig::load(path)?,
                None => ExperimentConfig::defaults(kind),
            };
            if cfg.kind != kind {
                return Err(tnlearn::Error::Argument(format!(
                    "config describes a {} experiment, not {kind}",
                    cfg.kind
                )));
            }
            if out.is_some() {
                cfg.out = out;
            }
            let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("results").join(kind.name()));
            let output = run_experiment(&cfg, jobs)?;
            for path in output.write(&dir)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
