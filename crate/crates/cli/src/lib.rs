//! Command implementations behind the `nzprop` binary.
//!
//! Every command returns `Ok(())` or a [`CliError`] that maps onto the process
//! exit code: 1 for I/O problems, 2 for invalid input, 3 when a simulation grid
//! ran only partially.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use nzprop::pipeline::{EstimateResult, EstimatorConfig};
use nzprop::simgen::{run_grid, DependenceKind, SimScenario, SimSummary};
use nzprop::spectral::{choose_k, eigh_sym, CorrelationMatrix, FactorCount};
use nzprop::{estimate_pi, McpConfig, PhaseConfig};

/// Environment variable that overrides the configured worker count.
pub const THREADS_ENV: &str = "NZPROP_THREADS";

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Partial(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Validation(_) => 2,
            CliError::Partial(_) => 3,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<nzprop::Error> for CliError {
    fn from(e: nzprop::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// Worker count: `"auto"` or a positive integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Threads {
    #[default]
    Auto,
    Count(usize),
}

impl Threads {
    pub fn parse(s: &str) -> CliResult<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Threads::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Threads::Count(n)),
            _ => Err(CliError::Validation(format!(
                "threads must be \"auto\" or a positive integer, got '{s}'"
            ))),
        }
    }

    pub fn count(self) -> Option<usize> {
        match self {
            Threads::Auto => None,
            Threads::Count(n) => Some(n),
        }
    }
}

impl fmt::Display for Threads {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threads::Auto => f.write_str("auto"),
            Threads::Count(n) => write!(f, "{n}"),
        }
    }
}

impl Serialize for Threads {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Threads::Auto => s.serialize_str("auto"),
            Threads::Count(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Threads {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(i64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) if n > 0 => Ok(Threads::Count(n as usize)),
            Raw::Count(n) => Err(serde::de::Error::custom(format!(
                "threads must be positive, got {n}"
            ))),
            Raw::Name(s) => Threads::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

/// Phase-function settings other than `gamma`, which lives at the top level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseSettings {
    pub n_quad: usize,
    pub sigma_floor: f64,
}

impl Default for PhaseSettings {
    fn default() -> Self {
        let p = PhaseConfig::default();
        Self {
            n_quad: p.n_quad,
            sigma_floor: p.sigma_floor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub delta: f64,
    pub gamma: f64,
    pub mcp: McpConfig,
    pub phase: PhaseSettings,
    pub threads: Threads,
    /// Seed for simulation scenarios that do not set their own.
    pub seed: u64,
    pub output_format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            gamma: PhaseConfig::default().gamma,
            mcp: McpConfig::default(),
            phase: PhaseSettings::default(),
            threads: Threads::Auto,
            seed: 0,
            output_format: OutputFormat::Json,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::from_toml(&read_text(path)?)
    }

    pub fn estimator(&self) -> EstimatorConfig {
        EstimatorConfig {
            delta: self.delta,
            mcp: self.mcp,
            phase: PhaseConfig {
                gamma: self.gamma,
                n_quad: self.phase.n_quad,
                sigma_floor: self.phase.sigma_floor,
            },
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(CliError::Validation(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        let est = self.estimator();
        est.mcp.validate()?;
        est.phase.validate()?;
        Ok(())
    }

    /// Configured thread count, overridden by [`THREADS_ENV`] when set.
    pub fn effective_threads(&self) -> CliResult<Threads> {
        match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => Threads::parse(&v),
            _ => Ok(self.threads),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "nzprop",
    version,
    about = "Estimate the proportion of nonzero Normal means under known dependence"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the nonzero proportion from an observation and its correlation matrix.
    Estimate {
        /// One value per line.
        #[arg(long)]
        z: PathBuf,
        /// Dense m x m CSV, no header.
        #[arg(long)]
        sigma: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a grid of simulation scenarios and write the bias / std-dev table.
    Simulate {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the replication count of every scenario.
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// List the leading eigenvalues and the factor counts of a correlation matrix.
    Spectrum {
        #[arg(long)]
        sigma: PathBuf,
        #[arg(long, default_value_t = 20)]
        top: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Execute a parsed command, writing results to `out` and diagnostics to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Estimate { z, sigma, config } => {
            let cfg = load_config(config.as_deref())?;
            cmd_estimate(&z, &sigma, &cfg, out, err)
        }
        Command::Simulate {
            grid,
            out: path,
            replicates,
        } => cmd_simulate(&grid, &path, replicates, err),
        Command::Spectrum { sigma, top, config } => {
            let cfg = load_config(config.as_deref())?;
            cmd_spectrum(&sigma, top, &cfg, out, err)
        }
    }
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn parse_real(text: &str, path: &Path, line: usize) -> CliResult<f64> {
    let v: f64 = text.trim().parse().map_err(|_| {
        CliError::Validation(format!(
            "{}:{line}: '{}' is not a number",
            path.display(),
            text.trim()
        ))
    })?;
    if !v.is_finite() {
        return Err(CliError::Validation(format!(
            "{}:{line}: value is not finite",
            path.display()
        )));
    }
    Ok(v)
}

/// One real per line; blank lines are skipped.
pub fn read_vector(path: &Path) -> CliResult<Vec<f64>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let field = line.strip_suffix(',').unwrap_or(line);
        if field.contains(',') {
            return Err(CliError::Validation(format!(
                "{}:{}: expected a single column",
                path.display(),
                i + 1
            )));
        }
        out.push(parse_real(field, path, i + 1)?);
    }
    Ok(out)
}

/// Dense square matrix from a header-less CSV file.
pub fn read_matrix(path: &Path) -> CliResult<CorrelationMatrix> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .map(|f| parse_real(f, path, i + 1))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    let m = rows.len();
    if m == 0 {
        return Err(CliError::Validation(format!(
            "{}: matrix is empty",
            path.display()
        )));
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(CliError::Validation(format!(
            "{}: sigma must be square, but it has {m} rows and row {} has {} columns",
            path.display(),
            i + 1,
            row.len()
        )));
    }
    Ok(CorrelationMatrix::from_rows(&rows)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub version: String,
    pub m: usize,
    pub delta: f64,
    pub gamma: f64,
    #[serde(flatten)]
    pub result: EstimateResult,
}

pub fn cmd_estimate(
    z_path: &Path,
    sigma_path: &Path,
    cfg: &RunConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<()> {
    let z = read_vector(z_path)?;
    let sigma = read_matrix(sigma_path)?;
    if z.len() != sigma.dim() {
        return Err(CliError::Validation(format!(
            "dimension mismatch: z has {} entries but sigma is {}x{}",
            z.len(),
            sigma.dim(),
            sigma.dim()
        )));
    }
    let est = cfg.estimator();
    let result = estimate_pi(&z, &sigma, est.delta, &est.mcp, &est.phase)?;
    for w in &result.warnings {
        writeln!(err, "warning: {w}").ok();
    }
    let record = EstimateRecord {
        version: VERSION.into(),
        m: z.len(),
        delta: est.delta,
        gamma: est.phase.gamma,
        result,
    };
    let text = match cfg.output_format {
        OutputFormat::Json => json_line(&record)?,
        OutputFormat::Csv => estimate_csv(&record)?,
    };
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

fn json_line<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Validation(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn estimate_csv(r: &EstimateRecord) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let x = &r.result;
    let rows: [(&str, String); 14] = [
        ("version", r.version.clone()),
        ("m", r.m.to_string()),
        ("delta", r.delta.to_string()),
        ("gamma", r.gamma.to_string()),
        ("pi_tilde", x.pi_tilde.to_string()),
        ("pi0_tilde", x.pi0_tilde.to_string()),
        ("pi_tilde_clipped", x.pi_tilde_clipped.to_string()),
        ("k_used", x.k_used.to_string()),
        ("t_star", x.t_star.to_string()),
        ("gamma_m", x.gamma_m.to_string()),
        ("lambda_star", x.lambda_star.to_string()),
        ("cppls_converged", x.cppls_converged.to_string()),
        ("objective_monotone", x.objective_monotone.to_string()),
        ("warnings", x.warnings.join("; ")),
    ];
    w.write_record(["field", "value"]).map_err(csv_err)?;
    for (k, v) in rows {
        w.write_record([k, v.as_str()]).map_err(csv_err)?;
    }
    finish_csv(w)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Validation(format!("csv: {e}"))
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> CliResult<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Validation(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::Validation(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub version: String,
    pub m: usize,
    pub eigenvalues: Vec<f64>,
    pub factor_counts: Vec<FactorCountRecord>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorCountRecord {
    pub delta: f64,
    pub k: usize,
    pub tail_norm: f64,
    pub bound: f64,
    pub satisfied: bool,
}

impl FactorCountRecord {
    fn new(delta: f64, c: FactorCount) -> Self {
        Self {
            delta,
            k: c.k,
            tail_norm: c.tail_norm,
            bound: c.bound,
            satisfied: c.satisfied,
        }
    }
}

/// Exponents reported by `spectrum`.
pub const SPECTRUM_DELTAS: [f64; 3] = [0.3, 0.5, 0.7];

pub fn cmd_spectrum(
    sigma_path: &Path,
    top: usize,
    cfg: &RunConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<()> {
    let sigma = read_matrix(sigma_path)?;
    let m = sigma.dim();
    let spec = eigh_sym(&sigma)?;
    let mut warnings = Vec::new();
    if top > m {
        warnings.push(format!(
            "requested {top} eigenvalues but m = {m}; listing {m}"
        ));
    }
    let factor_counts = SPECTRUM_DELTAS
        .iter()
        .map(|&d| choose_k(&spec, d).map(|c| FactorCountRecord::new(d, c)))
        .collect::<nzprop::Result<Vec<_>>>()?;
    for w in &warnings {
        writeln!(err, "warning: {w}").ok();
    }
    let record = SpectrumRecord {
        version: VERSION.into(),
        m,
        eigenvalues: spec.eigenvalues()[..top.min(m)].to_vec(),
        factor_counts,
        warnings,
    };
    let text = match cfg.output_format {
        OutputFormat::Json => json_line(&record)?,
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["rank", "eigenvalue"]).map_err(csv_err)?;
            for (i, l) in record.eigenvalues.iter().enumerate() {
                w.write_record([(i + 1).to_string(), l.to_string()])
                    .map_err(csv_err)?;
            }
            let mut s = finish_csv(w)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["delta", "k", "tail_norm", "bound", "satisfied"])
                .map_err(csv_err)?;
            for c in &record.factor_counts {
                w.write_record([
                    c.delta.to_string(),
                    c.k.to_string(),
                    c.tail_norm.to_string(),
                    c.bound.to_string(),
                    c.satisfied.to_string(),
                ])
                .map_err(csv_err)?;
            }
            s.push('\n');
            s.push_str(&finish_csv(w)?);
            s
        }
    };
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

/// Cartesian product of scenario parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub kinds: Vec<String>,
    pub pis: Vec<f64>,
    pub mu_stars: Vec<f64>,
    #[serde(default = "default_sweep_ms")]
    pub ms: Vec<usize>,
    #[serde(default = "default_sweep_reps")]
    pub replications: usize,
    /// Defaults to the run configuration's seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_sweep_ms() -> Vec<usize> {
    vec![2000]
}

fn default_sweep_reps() -> usize {
    100
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    #[serde(default)]
    config: Option<RunConfig>,
    #[serde(default)]
    scenarios: Vec<toml::Value>,
    #[serde(default)]
    sweeps: Vec<Sweep>,
}

/// A grid file after parsing: the run configuration, the accepted scenarios in
/// declaration order and the rejected entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub config: RunConfig,
    pub scenarios: Vec<(usize, SimScenario)>,
    pub rejects: Vec<Reject>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reject {
    /// Position of the entry in declaration order (scenarios first, then sweep expansions).
    pub index: usize,
    pub entry: String,
    pub reason: String,
}

impl Grid {
    pub fn parse(text: &str) -> CliResult<Self> {
        let file: GridFile =
            toml::from_str(text).map_err(|e| CliError::Validation(format!("grid: {e}")))?;
        let config = file.config.unwrap_or_default();
        config.validate()?;
        let mut scenarios = Vec::new();
        let mut rejects = Vec::new();
        let mut index = 0;
        for mut value in file.scenarios {
            if let Some(table) = value.as_table_mut() {
                if !table.contains_key("seed") {
                    table.insert("seed".into(), toml::Value::Integer(config.seed as i64));
                }
            }
            let entry = value.to_string().replace('\n', " ");
            match value.try_into::<SimScenario>() {
                Ok(s) => match s.validate() {
                    Ok(()) => scenarios.push((index, s)),
                    Err(e) => rejects.push(Reject {
                        index,
                        entry,
                        reason: e.to_string(),
                    }),
                },
                Err(e) => rejects.push(Reject {
                    index,
                    entry,
                    reason: e.to_string().trim().to_string(),
                }),
            }
            index += 1;
        }
        for sweep in file.sweeps {
            for kind in &sweep.kinds {
                for &m in &sweep.ms {
                    for &mu_star in &sweep.mu_stars {
                        for &pi in &sweep.pis {
                            let entry = format!("{kind} m={m} pi={pi} mu_star={mu_star}");
                            let parsed = kind.parse::<DependenceKind>().and_then(|k| {
                                let seed = sweep.seed.unwrap_or(config.seed);
                                let s =
                                    SimScenario::new(k, m, pi, mu_star, sweep.replications, seed);
                                s.validate().map(|_| s)
                            });
                            match parsed {
                                Ok(s) => scenarios.push((index, s)),
                                Err(e) => rejects.push(Reject {
                                    index,
                                    entry,
                                    reason: e.to_string(),
                                }),
                            }
                            index += 1;
                        }
                    }
                }
            }
        }
        Ok(Grid {
            config,
            scenarios,
            rejects,
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::parse(&read_text(path)?)
    }
}

/// One line of the simulation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub kind: String,
    pub pi: f64,
    pub mu_star: f64,
    pub m: usize,
    pub reps: usize,
    pub seed: u64,
    pub estimator: String,
    pub bias: Option<f64>,
    pub std_dev: Option<f64>,
}

pub const TABLE_HEADER: [&str; 9] = [
    "kind",
    "pi",
    "mu_star",
    "m",
    "reps",
    "seed",
    "estimator",
    "bias",
    "std_dev",
];

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn table_rows(summary: &SimSummary) -> [TableRow; 2] {
    let s = &summary.scenario;
    let row = |name: &str, stats: &nzprop::simgen::EstimatorStats| TableRow {
        kind: s.kind.name().to_string(),
        pi: s.pi,
        mu_star: s.mu_star,
        m: s.m,
        reps: s.replications,
        seed: s.seed,
        estimator: name.to_string(),
        bias: finite(stats.bias),
        std_dev: finite(stats.std_dev),
    };
    [
        row("new", &summary.new),
        row("benjamini", &summary.benjamini),
    ]
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(suffix);
    out.with_file_name(name)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Writes the table to `out_path` (JSON when the extension is `.json`, CSV
/// otherwise), per-replication estimates to `<out>.replications.csv` and any
/// rejected scenarios to `<out>.rejects.csv`.
pub fn cmd_simulate(
    grid_path: &Path,
    out_path: &Path,
    replicates: Option<usize>,
    err: &mut dyn Write,
) -> CliResult<()> {
    let mut grid = Grid::load(grid_path)?;
    if let Some(r) = replicates {
        if r == 0 {
            return Err(CliError::Validation(
                "--replicates must be at least 1".into(),
            ));
        }
        grid.scenarios
            .iter_mut()
            .for_each(|(_, s)| s.replications = r);
    }
    let threads = grid.config.effective_threads()?;
    let est = grid.config.estimator();
    let scenarios: Vec<SimScenario> = grid.scenarios.iter().map(|(_, s)| *s).collect();
    let results = run_grid(&scenarios, &est, threads.count())?;

    let mut rejects = grid.rejects.clone();
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for ((index, scenario), result) in grid.scenarios.iter().zip(results) {
        match result {
            Ok(summary) => {
                rows.extend(table_rows(&summary));
                summaries.push(summary);
            }
            Err(e) => rejects.push(Reject {
                index: *index,
                entry: format!(
                    "{} m={} pi={} mu_star={}",
                    scenario.kind, scenario.m, scenario.pi, scenario.mu_star
                ),
                reason: e.to_string(),
            }),
        }
    }
    rejects.sort_by_key(|r| r.index);

    let as_json = out_path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let table = if as_json {
        json_line(&rows)?
    } else {
        render_table(&rows)?
    };
    write_file(out_path, table.as_bytes())?;
    write_file(
        &sidecar(out_path, ".replications.csv"),
        render_replications(&summaries)?.as_bytes(),
    )?;

    let rejects_path = sidecar(out_path, ".rejects.csv");
    if rejects.is_empty() && !scenarios.is_empty() {
        if rejects_path.exists() {
            fs::remove_file(&rejects_path).map_err(|e| CliError::io(&rejects_path, e))?;
        }
        return Ok(());
    }
    for r in &rejects {
        writeln!(
            err,
            "rejected scenario #{} ({}): {}",
            r.index, r.entry, r.reason
        )
        .ok();
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "entry", "reason"])
        .map_err(csv_err)?;
    for r in &rejects {
        w.write_record([r.index.to_string(), r.entry.clone(), r.reason.clone()])
            .map_err(csv_err)?;
    }
    write_file(&rejects_path, finish_csv(w)?.as_bytes())?;
    if scenarios.is_empty() && rejects.is_empty() {
        return Err(CliError::Partial("the grid lists no scenarios".into()));
    }
    Err(CliError::Partial(format!(
        "{} scenario(s) rejected; see {}",
        rejects.len(),
        rejects_path.display()
    )))
}

pub fn render_table(rows: &[TableRow]) -> CliResult<String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(TABLE_HEADER).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    finish_csv(w)
}

fn render_replications(summaries: &[SimSummary]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "kind",
        "pi",
        "mu_star",
        "m",
        "seed",
        "rep",
        "new",
        "benjamini",
        "k",
        "objective_monotone",
        "errors",
    ])
    .map_err(csv_err)?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for s in summaries {
        let sc = &s.scenario;
        for r in &s.replications {
            w.write_record([
                sc.kind.name().to_string(),
                sc.pi.to_string(),
                sc.mu_star.to_string(),
                sc.m.to_string(),
                sc.seed.to_string(),
                r.rep.to_string(),
                opt(r.new),
                opt(r.benjamini),
                r.k_used.map(|k| k.to_string()).unwrap_or_default(),
                r.objective_monotone
                    .map(|b| b.to_string())
                    .unwrap_or_default(),
                r.errors.join("; "),
            ])
            .map_err(csv_err)?;
        }
    }
    finish_csv(w)
}
