//! Seeded, configuration-driven experiment drivers.
//!
//! Every grid cell draws its random streams from `derive_seed(master, coords)`,
//! so a table does not depend on how many worker threads produced it.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::{noisy_circuit_density, CircuitSpec};
use crate::error::{Error, Result};
use crate::learner::{distribution_fidelity, init_model, r_squared, train, LpsModel, TrainConfig};
use crate::sampling::{
    derive_seed, exact_probability, generate_records, random_density_mpo, random_measurement, seeded_rng, Dataset,
    GENERATOR_VERSION,
};
use crate::tt::Mpo;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Scaling,
    Circuit,
    Truncation,
    R2map,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Scaling => "scaling",
            Self::Circuit => "circuit",
            Self::Truncation => "truncation",
            Self::R2map => "r2map",
        }
    }

    fn seed_tag(self) -> u64 {
        match self {
            // the map is the raw scaling grid, so both share their streams
            Self::Scaling | Self::R2map => 1,
            Self::Circuit => 2,
            Self::Truncation => 3,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaling" => Ok(Self::Scaling),
            "circuit" => Ok(Self::Circuit),
            "truncation" => Ok(Self::Truncation),
            "r2map" => Ok(Self::R2map),
            other => Err(Error::Argument(format!("unknown experiment kind {other:?}"))),
        }
    }
}

/// Fully resolved experiment description.
///
/// In a TOML file only `kind` is required; missing keys take the defaults of
/// [`ExperimentConfig::defaults`] for that kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub n_qubits: Vec<usize>,
    /// Training-set sizes `M`; scaling also uses each as the test-set size.
    pub train_sizes: Vec<usize>,
    pub chi_s: Vec<usize>,
    pub chi_m: Vec<usize>,
    pub depths: Vec<usize>,
    pub gammas: Vec<f64>,
    pub steps: usize,
    pub repeats: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Moving-average window over the `M` grid.
    pub window: usize,
    pub threshold: f64,
    /// Number of independent evaluation sets (circuit).
    pub eval_sets: usize,
    /// Measurements per evaluation set (circuit) or per reference state (truncation).
    pub eval_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = Self {
            kind,
            seed: 0,
            n_qubits: (2..=7).collect(),
            train_sizes: (1..=40).map(|k| 10 * k).collect(),
            chi_s: vec![2],
            chi_m: vec![4],
            depths: vec![2],
            gammas: vec![0.0],
            steps: 1000,
            repeats: 1,
            batch_size: 5,
            learning_rate: 0.01,
            window: 11,
            threshold: 0.5,
            eval_sets: 30,
            eval_size: 100,
            out: None,
        };
        match kind {
            ExperimentKind::Scaling | ExperimentKind::R2map => base,
            ExperimentKind::Circuit => Self {
                n_qubits: vec![8],
                train_sizes: vec![500],
                gammas: vec![0.0, 0.5, 1.0],
                steps: 5000,
                // larger rates diverge on peaked pure states at N = 8
                learning_rate: 5e-4,
                ..base
            },
            ExperimentKind::Truncation => Self {
                n_qubits: vec![6],
                chi_s: vec![2, 4, 8],
                chi_m: (1..=8).collect(),
                repeats: 100,
                ..base
            },
        }
    }

    /// Parses TOML, filling absent keys from the defaults for its `kind`.
    pub fn from_toml(text: &str) -> Result<Self> {
        let user: toml::Table = toml::from_str(text)?;
        let kind: ExperimentKind = match user.get("kind") {
            Some(toml::Value::String(s)) => s.parse()?,
            _ => return Err(Error::Argument("config needs a string `kind`".into())),
        };
        let mut merged = toml::Table::try_from(Self::defaults(kind))
            .map_err(|e| Error::Format(format!("serializing defaults: {e}")))?;
        merged.extend(user);
        let cfg: Self = merged.try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = |name: &str, len: usize| {
            if len == 0 {
                Err(Error::Argument(format!("grid `{name}` is empty")))
            } else {
                Ok(())
            }
        };
        nonempty("n_qubits", self.n_qubits.len())?;
        if self.repeats == 0 {
            return Err(Error::Argument("repeats must be at least 1".into()));
        }
        if self.n_qubits.contains(&0) {
            return Err(Error::Argument("qubit counts must be positive".into()));
        }
        match self.kind {
            ExperimentKind::Scaling | ExperimentKind::R2map => {
                nonempty("train_sizes", self.train_sizes.len())?;
                nonempty("chi_s", self.chi_s.len())?;
                nonempty("chi_m", self.chi_m.len())?;
                if self.train_sizes.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Argument("train_sizes must be strictly increasing".into()));
                }
                if self.window.is_multiple_of(2) {
                    return Err(Error::Argument(format!("window {} is not odd", self.window)));
                }
            }
            ExperimentKind::Circuit => {
                nonempty("train_sizes", self.train_sizes.len())?;
                nonempty("chi_m", self.chi_m.len())?;
                nonempty("depths", self.depths.len())?;
                nonempty("gammas", self.gammas.len())?;
                if self.gammas.iter().any(|g| !(0.0..=1.0).contains(g)) {
                    return Err(Error::Argument("gammas must lie in [0, 1]".into()));
                }
                if self.eval_sets == 0 || self.eval_size < 2 {
                    return Err(Error::Argument("need eval_sets ≥ 1 and eval_size ≥ 2".into()));
                }
            }
            ExperimentKind::Truncation => {
                nonempty("chi_s", self.chi_s.len())?;
                nonempty("chi_m", self.chi_m.len())?;
                if self.eval_size < 2 {
                    return Err(Error::Argument("need eval_size ≥ 2".into()));
                }
            }
        }
        if matches!(self.kind, ExperimentKind::Truncation) {
            return Ok(());
        }
        if self.train_sizes.contains(&0) || self.chi_m.contains(&0) || self.chi_s.contains(&0) {
            return Err(Error::Argument("sizes and ranks must be positive".into()));
        }
        if self.train_sizes.iter().any(|&m| m < self.batch_size) {
            return Err(Error::Argument("every train size must hold at least one batch".into()));
        }
        Ok(())
    }

    /// sha256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let canonical = Self { out: None, ..self.clone() };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            steps: self.steps,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed,
            eval_every: self.steps.max(1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Missing,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(v) => Some(v as f64),
            Cell::Real(v) => Some(v),
            Cell::Missing => None,
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            Cell::Real(v)
        } else {
            Cell::Missing
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::from)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            // shortest representation that parses back to the same f64
            Cell::Real(v) => write!(f, "{v:?}"),
            Cell::Missing => Ok(()),
        }
    }
}

/// Rectangular table of named numeric columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Dimension(format!(
                "row of {} cells in table {} with {} columns",
                row.len(),
                self.name,
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Argument(format!("table {} has no column {name}", self.name)))
    }

    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let k = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[k].as_f64()).collect())
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.write_record(row.iter().map(Cell::to_string))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
    pub generator: String,
}

impl Provenance {
    pub fn of(config: &ExperimentConfig) -> Self {
        Self {
            experiment: config.kind,
            config: Self::stored(config),
            config_hash: config.hash(),
            seed: config.seed,
            code_version: CODE_VERSION.into(),
            generator: GENERATOR_VERSION.into(),
        }
    }

    fn stored(config: &ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig { out: None, ..config.clone() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub provenance: Provenance,
    pub tables: Vec<ResultTable>,
}

impl ExperimentOutput {
    pub fn table(&self, name: &str) -> Result<&ResultTable> {
        self.tables
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Argument(format!("no table named {name}")))
    }

    /// Writes `<name>.csv` with a `<name>.meta.json` sidecar per table and
    /// returns the CSV paths.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for t in &self.tables {
            let csv_path = dir.join(format!("{}.csv", t.name));
            t.write_csv(fs::File::create(&csv_path)?)?;
            let meta = serde_json::json!({
                "table": t.name,
                "columns": t.columns,
                "rows": t.rows.len(),
                "provenance": self.provenance,
            });
            fs::write(dir.join(format!("{}.meta.json", t.name)), serde_json::to_string_pretty(&meta)?)?;
            written.push(csv_path);
        }
        Ok(written)
    }
}

/// Centered moving average whose window shrinks symmetrically at the edges.
pub fn moving_average(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Argument(format!("window {window} must be odd and positive")));
    }
    if window > values.len() {
        return Err(Error::Argument(format!("window {window} exceeds {} values", values.len())));
    }
    let h = window / 2;
    let n = values.len();
    Ok((0..n)
        .map(|i| {
            let half = h.min(i).min(n - 1 - i);
            let s = &values[i - half..=i + half];
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect())
}

/// Runs the configured experiment on `jobs` worker threads (all cores when `None`).
pub fn run_experiment(config: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::Argument("jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    let tables = pool.install(|| match config.kind {
        ExperimentKind::Scaling => exp_scaling(config),
        ExperimentKind::R2map => exp_r2map(config).map(|t| vec![t]),
        ExperimentKind::Circuit => exp_circuit(config),
        ExperimentKind::Truncation => exp_truncation(config),
    })?;
    Ok(ExperimentOutput { provenance: Provenance::of(config), tables })
}

struct Trained {
    model: LpsModel,
    r2_train: Option<f64>,
    loss_prime: f64,
}

fn fit(rho: &Mpo, n: usize, chi_m: usize, m: usize, config: &ExperimentConfig, seeds: [u64; 3]) -> Result<(Trained, Dataset)> {
    let [data_seed, init_seed, sgd_seed] = seeds;
    let train_set = Dataset::generate(rho, m, data_seed, None)?;
    let model = init_model(n, chi_m, &mut seeded_rng(init_seed))?;
    let (model, trace) = train(&model, &train_set, &config.train_config(sgd_seed), None)?;
    let last = trace.rows.last().expect("trace has a final row");
    let out = Trained { r2_train: last.r2_train, loss_prime: last.loss_prime, model };
    Ok((out, train_set))
}

#[derive(Clone, Debug)]
struct ScalingCell {
    n: usize,
    chi_s: usize,
    chi_m: usize,
    m: usize,
    repeat: usize,
}

struct ScalingResult {
    r2_test: Option<f64>,
    r2_train: Option<f64>,
    loss_prime: f64,
}

fn scaling_cells(config: &ExperimentConfig) -> Vec<ScalingCell> {
    let mut cells = Vec::new();
    for &chi_s in &config.chi_s {
        for &chi_m in &config.chi_m {
            for &n in &config.n_qubits {
                for &m in &config.train_sizes {
                    for repeat in 0..config.repeats {
                        cells.push(ScalingCell { n, chi_s, chi_m, m, repeat });
                    }
                }
            }
        }
    }
    cells
}

fn run_scaling_cell(config: &ExperimentConfig, c: &ScalingCell) -> Result<ScalingResult> {
    let tag = ExperimentKind::Scaling.seed_tag();
    let (n, m, rep) = (c.n as u64, c.m as u64, c.repeat as u64);
    // one reference state per (N, χ_S, repeat), shared along the M axis
    let truth_seed = derive_seed(config.seed, &[tag, 0, c.chi_s as u64, n, rep]);
    let rho = random_density_mpo(c.n, c.chi_s, &mut seeded_rng(truth_seed))?;
    let cell = |stream: u64| derive_seed(config.seed, &[tag, stream, c.chi_s as u64, c.chi_m as u64, n, m, rep]);
    let (fitted, _) = fit(&rho, c.n, c.chi_m, c.m, config, [cell(1), cell(2), cell(3)])?;
    let test_set = Dataset::generate(&rho, c.m, cell(4), None)?;
    let preds = fitted.model.predict_all(&test_set.records);
    Ok(ScalingResult {
        r2_test: r_squared(&preds, &test_set.probabilities()).ok(),
        r2_train: fitted.r2_train,
        loss_prime: fitted.loss_prime,
    })
}

fn scaling_grid(config: &ExperimentConfig) -> Result<(Vec<ScalingCell>, Vec<ScalingResult>)> {
    let cells = scaling_cells(config);
    let results = cells
        .par_iter()
        .map(|c| run_scaling_cell(config, c))
        .collect::<Result<Vec<_>>>()?;
    Ok((cells, results))
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn finite_r2(r: &ScalingResult) -> Option<f64> {
    r.r2_test.filter(|v| v.is_finite())
}

/// Mean test `R²` over repeats; absent when any repeat is non-finite.
fn raw_mean(reps: &[ScalingResult]) -> Option<f64> {
    if reps.iter().any(|r| finite_r2(r).is_none()) {
        return None;
    }
    mean_defined(reps.iter().map(finite_r2))
}

/// Per-fit score entering the smoothed curve: `R²` floored at the trivial
/// model's 0, with diverged or undefined fits scoring 0.
fn success_score(r2: Option<f64>) -> f64 {
    r2.map_or(0.0, |v| v.max(0.0))
}

/// Test `R²` over the `(N, M)` grid, its moving average along `M`, and the
/// smallest `M` whose averaged score reaches the threshold.
///
/// Tables: `scaling_cells` (one row per repeat), `scaling` (repeat means,
/// scores, smoothed curve and count of non-finite fits) and
/// `scaling_summary` (`m_min` empty with `reached = 0` when the threshold is
/// never met).
pub fn exp_scaling(config: &ExperimentConfig) -> Result<Vec<ResultTable>> {
    let (cells, results) = scaling_grid(config)?;
    let mut raw = ResultTable::new(
        "scaling_cells",
        &["chi_s", "chi_m", "n_qubits", "train_size", "repeat", "r2_test", "r2_train", "loss_prime"],
    );
    for (c, r) in cells.iter().zip(&results) {
        raw.push(vec![
            c.chi_s.into(),
            c.chi_m.into(),
            c.n.into(),
            c.m.into(),
            c.repeat.into(),
            r.r2_test.into(),
            r.r2_train.into(),
            r.loss_prime.into(),
        ])?;
    }

    let mut curve = ResultTable::new(
        "scaling",
        &["chi_s", "chi_m", "n_qubits", "train_size", "r2_raw", "r2_score", "r2_smoothed", "failed"],
    );
    let mut summary = ResultTable::new("scaling_summary", &["chi_s", "chi_m", "n_qubits", "m_min", "reached"]);
    // grid sizes shorter than the window use the widest odd window that fits
    let k = config.train_sizes.len();
    let window = config.window.min(if k % 2 == 1 { k } else { k - 1 });
    let per_n = config.repeats * k;
    for (block, chunk) in cells.chunks(per_n).zip(results.chunks(per_n)) {
        let first = &block[0];
        let mut raw_means = Vec::with_capacity(k);
        let mut scores = Vec::with_capacity(k);
        let mut failures = Vec::with_capacity(k);
        for reps in chunk.chunks(config.repeats) {
            let failed = reps.iter().filter(|r| finite_r2(r).is_none()).count();
            raw_means.push(raw_mean(reps));
            scores.push(reps.iter().map(|r| success_score(finite_r2(r))).sum::<f64>() / reps.len() as f64);
            failures.push(failed);
        }
        let smoothed = moving_average(&scores, window)?;
        for (i, &m) in config.train_sizes.iter().enumerate() {
            curve.push(vec![
                first.chi_s.into(),
                first.chi_m.into(),
                first.n.into(),
                m.into(),
                raw_means[i].into(),
                scores[i].into(),
                smoothed[i].into(),
                failures[i].into(),
            ])?;
        }
        let m_min = config
            .train_sizes
            .iter()
            .zip(&smoothed)
            .find(|(_, &s)| s >= config.threshold)
            .map(|(&m, _)| m);
        summary.push(vec![
            first.chi_s.into(),
            first.chi_m.into(),
            first.n.into(),
            m_min.map_or(Cell::Missing, Cell::from),
            usize::from(m_min.is_some()).into(),
        ])?;
    }
    Ok(vec![raw, curve, summary])
}

/// The raw `(N, M)` grid of test `R²` (repeat means) as a dense map.
pub fn exp_r2map(config: &ExperimentConfig) -> Result<ResultTable> {
    let (cells, results) = scaling_grid(config)?;
    let mut map = ResultTable::new("r2map", &["chi_s", "chi_m", "n_qubits", "train_size", "r2"]);
    for (block, chunk) in cells.chunks(config.repeats).zip(results.chunks(config.repeats)) {
        let c = &block[0];
        map.push(vec![
            c.chi_s.into(),
            c.chi_m.into(),
            c.n.into(),
            c.m.into(),
            raw_mean(chunk).into(),
        ])?;
    }
    Ok(map)
}

#[derive(Clone, Debug)]
struct CircuitCell {
    n: usize,
    depth: usize,
    gamma_index: usize,
    gamma: f64,
    chi_m: usize,
    m: usize,
    repeat: usize,
}

struct EvalSet {
    exact: Vec<f64>,
    predicted: Vec<f64>,
}

struct CircuitResult {
    sets: Vec<EvalSet>,
    r2_train: Option<f64>,
    loss_prime: f64,
}

fn run_circuit_cell(config: &ExperimentConfig, c: &CircuitCell) -> Result<CircuitResult> {
    let tag = ExperimentKind::Circuit.seed_tag();
    let (n, d, rep) = (c.n as u64, c.depth as u64, c.repeat as u64);
    // the same circuit is reused across noise strengths
    let spec = CircuitSpec {
        n_qubits: c.n,
        depth: c.depth,
        seed: derive_seed(config.seed, &[tag, 0, n, d, rep]),
        gamma: c.gamma,
    };
    let rho = noisy_circuit_density(&spec)?;
    let cell = |stream: u64| {
        derive_seed(config.seed, &[tag, stream, n, d, c.gamma_index as u64, c.chi_m as u64, c.m as u64, rep])
    };
    let (fitted, _) = fit(&rho, c.n, c.chi_m, c.m, config, [cell(1), cell(2), cell(3)])?;
    let mut rng = seeded_rng(cell(4));
    let sets = (0..config.eval_sets)
        .map(|_| {
            let records = generate_records(&rho, config.eval_size, &mut rng)?;
            Ok(EvalSet {
                exact: records.iter().map(|r| r.probability).collect(),
                predicted: fitted.model.predict_all(&records),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CircuitResult { sets, r2_train: fitted.r2_train, loss_prime: fitted.loss_prime })
}

/// Sample standard deviation (n − 1 denominator).
fn sample_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Noisy hardware-efficient-ansatz states learned from `M` records.
///
/// Tables: `circuit_summary` (fidelity, residual spread, outlier fraction,
/// ratios per cell), `circuit_curves` (per-set pairs sorted by exact
/// probability, averaged rank-wise over the sets) and `circuit_residuals`
/// (every evaluation measurement).
pub fn exp_circuit(config: &ExperimentConfig) -> Result<Vec<ResultTable>> {
    let mut cells = Vec::new();
    for &n in &config.n_qubits {
        for &depth in &config.depths {
            for (gamma_index, &gamma) in config.gammas.iter().enumerate() {
                for &chi_m in &config.chi_m {
                    for &m in &config.train_sizes {
                        for repeat in 0..config.repeats {
                            cells.push(CircuitCell { n, depth, gamma_index, gamma, chi_m, m, repeat });
                        }
                    }
                }
            }
        }
    }
    let results = cells
        .par_iter()
        .map(|c| run_circuit_cell(config, c))
        .collect::<Result<Vec<_>>>()?;

    let key = ["n_qubits", "depth", "gamma", "chi_m", "train_size", "repeat"];
    let with_key = |extra: &[&'static str]| -> Vec<&'static str> { key.iter().chain(extra).copied().collect() };
    let mut summary = ResultTable::new(
        "circuit_summary",
        &with_key(&[
            "fidelity",
            "fidelity_min",
            "fidelity_max",
            "fidelity_curve",
            "r2_eval",
            "sigma_eps",
            "outlier_fraction",
            "ratio_mean",
            "ratio_std",
            "r2_train",
            "loss_prime",
        ]),
    );
    let mut curves = ResultTable::new("circuit_curves", &with_key(&["rank", "p_exact", "p_predict"]));
    let mut residuals = ResultTable::new(
        "circuit_residuals",
        &with_key(&["set", "index", "p_exact", "p_predict", "residual", "ratio"]),
    );

    for (c, r) in cells.iter().zip(&results) {
        let key_cells = || -> Vec<Cell> {
            vec![c.n.into(), c.depth.into(), c.gamma.into(), c.chi_m.into(), c.m.into(), c.repeat.into()]
        };
        // a diverged fit has no fidelity; its cells are left missing
        let fids = r
            .sets
            .iter()
            .map(|s| distribution_fidelity(&s.predicted, &s.exact))
            .collect::<Result<Vec<_>>>()
            .ok();

        let size = config.eval_size;
        let mut curve_exact = vec![0.0; size];
        let mut curve_pred = vec![0.0; size];
        for s in &r.sets {
            let mut pairs: Vec<(f64, f64)> = s.exact.iter().copied().zip(s.predicted.iter().copied()).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (k, (e, p)) in pairs.into_iter().enumerate() {
                curve_exact[k] += e;
                curve_pred[k] += p;
            }
        }
        let sets = r.sets.len() as f64;
        curve_exact.iter_mut().chain(curve_pred.iter_mut()).for_each(|x| *x /= sets);
        for k in 0..size {
            let mut row = key_cells();
            row.extend::<[Cell; 3]>([k.into(), curve_exact[k].into(), curve_pred[k].into()]);
            curves.push(row)?;
        }

        let all_exact: Vec<f64> = r.sets.iter().flat_map(|s| s.exact.iter().copied()).collect();
        let all_pred: Vec<f64> = r.sets.iter().flat_map(|s| s.predicted.iter().copied()).collect();
        let eps: Vec<f64> = all_pred.iter().zip(&all_exact).map(|(p, e)| p - e).collect();
        let sigma = sample_std(&eps);
        let outliers = sigma
            .is_finite()
            .then(|| eps.iter().filter(|e| e.abs() > 3.0 * sigma).count() as f64 / eps.len() as f64);
        let ratios: Vec<f64> = all_pred.iter().zip(&all_exact).filter(|(_, &e)| e > 0.0).map(|(p, e)| p / e).collect();
        let ratio_mean = (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64);
        let ratio_std = (ratios.len() > 1).then(|| sample_std(&ratios));

        for (set, s) in r.sets.iter().enumerate() {
            for (index, (&e, &p)) in s.exact.iter().zip(&s.predicted).enumerate() {
                let mut row = key_cells();
                let ratio = (e > 0.0).then(|| p / e);
                row.extend::<[Cell; 6]>([set.into(), index.into(), e.into(), p.into(), (p - e).into(), ratio.into()]);
                residuals.push(row)?;
            }
        }

        let mut row = key_cells();
        row.extend::<[Cell; 11]>([
            fids.as_ref().map(|f| f.iter().sum::<f64>() / f.len() as f64).into(),
            fids.as_ref().map(|f| f.iter().copied().fold(f64::INFINITY, f64::min)).into(),
            fids.as_ref().map(|f| f.iter().copied().fold(f64::NEG_INFINITY, f64::max)).into(),
            distribution_fidelity(&curve_pred, &curve_exact).ok().into(),
            r_squared(&all_pred, &all_exact).ok().into(),
            sigma.into(),
            outliers.into(),
            ratio_mean.into(),
            ratio_std.into(),
            r.r2_train.into(),
            r.loss_prime.into(),
        ]);
        summary.push(row)?;
    }
    Ok(vec![summary, curves, residuals])
}

#[derive(Clone, Debug)]
struct TruncationCell {
    n: usize,
    chi_s: usize,
    chi_m: usize,
    repeat: usize,
}

/// Capacity bound: a random ground truth truncated to operator rank `χ_M²`.
///
/// The reference state and measurements depend only on `(N, χ_S, repeat)`,
/// so every `χ_M` in a row of the grid truncates the same operators.
/// Tables: `truncation_cells` (one row per repeat) and `truncation`
/// (mean `R²` and its standard error).
pub fn exp_truncation(config: &ExperimentConfig) -> Result<Vec<ResultTable>> {
    let tag = ExperimentKind::Truncation.seed_tag();
    let mut cells = Vec::new();
    for &n in &config.n_qubits {
        for &chi_s in &config.chi_s {
            for &chi_m in &config.chi_m {
                for repeat in 0..config.repeats {
                    cells.push(TruncationCell { n, chi_s, chi_m, repeat });
                }
            }
        }
    }
    let results = cells
        .par_iter()
        .map(|c| -> Result<(Option<f64>, f64)> {
            let coords = [c.n as u64, c.chi_s as u64, c.repeat as u64];
            let seed = |stream: u64| derive_seed(config.seed, &[tag, stream, coords[0], coords[1], coords[2]]);
            let rho = random_density_mpo(c.n, c.chi_s, &mut seeded_rng(seed(0)))?;
            let report = rho.truncate_with_report(c.chi_m * c.chi_m)?;
            let mut rng = seeded_rng(seed(1));
            let mut exact = Vec::with_capacity(config.eval_size);
            let mut approx = Vec::with_capacity(config.eval_size);
            for _ in 0..config.eval_size {
                let m = random_measurement(c.n, &mut rng)?;
                exact.push(exact_probability(&rho, &m)?);
                approx.push(report.mpo.sandwich(&m.to_mps())?.re);
            }
            let discarded = report.discarded.iter().map(|d| d * d).sum::<f64>().sqrt();
            Ok((r_squared(&approx, &exact).ok(), discarded))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut raw = ResultTable::new("truncation_cells", &["n_qubits", "chi_s", "chi_m", "repeat", "r2", "discarded"]);
    for (c, (r2, disc)) in cells.iter().zip(&results) {
        raw.push(vec![c.n.into(), c.chi_s.into(), c.chi_m.into(), c.repeat.into(), (*r2).into(), (*disc).into()])?;
    }
    let mut summary = ResultTable::new("truncation", &["n_qubits", "chi_s", "chi_m", "repeats", "r2_mean", "r2_stderr"]);
    for (block, chunk) in cells.chunks(config.repeats).zip(results.chunks(config.repeats)) {
        let c = &block[0];
        let v: Vec<f64> = chunk.iter().filter_map(|(r, _)| *r).collect();
        let mean = mean_defined(v.iter().map(|x| Some(*x)));
        let stderr = (v.len() > 1).then(|| sample_std(&v) / (v.len() as f64).sqrt());
        summary.push(vec![c.n.into(), c.chi_s.into(), c.chi_m.into(), v.len().into(), mean.into(), stderr.into()])?;
    }
    Ok(vec![raw, summary])
}
