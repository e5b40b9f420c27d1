//! Monte-Carlo benchmark: sparse mean vectors, five dependence structures,
//! seeded replications and bias / standard-deviation summaries.
//!
//! Replication `r` of a scenario with seed `s` draws from a ChaCha8 stream
//! seeded with `s` and positioned on stream number `r`, so any replication can
//! be regenerated on its own and the outcome does not depend on scheduling.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pipeline::{benjamini_pi0, z_to_pvalues, Estimator, EstimatorConfig};
use crate::spectral::{eigh_sym, CorrelationMatrix, SymmetricSpectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DependenceKind {
    /// 95% independent coordinates; the last 5% load on the first `0.01m`
    /// coordinates with alternating weights ±0.2.
    Block,
    /// Every pair has correlation 0.5.
    EqualCorr,
    /// Three common factors with weights −1/4, 1/5, −1/8.
    ThreeFactors,
    /// One coordinate drives all the others with weight −1/√2.
    TwoComponents,
    /// `0.4 H + 0.6 I` with `H` the row-correlation matrix of a random `m × 4` matrix.
    Unstructured,
}

impl DependenceKind {
    pub const ALL: [DependenceKind; 5] = [
        DependenceKind::Block,
        DependenceKind::EqualCorr,
        DependenceKind::ThreeFactors,
        DependenceKind::TwoComponents,
        DependenceKind::Unstructured,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DependenceKind::Block => "Block",
            DependenceKind::EqualCorr => "EqualCorr",
            DependenceKind::ThreeFactors => "ThreeFactors",
            DependenceKind::TwoComponents => "TwoComponents",
            DependenceKind::Unstructured => "Unstructured",
        }
    }

    /// Whether `Σ` is the same for every replication.
    pub fn is_fixed(self) -> bool {
        self != DependenceKind::Unstructured
    }

    /// Check that `m` suits the construction.
    pub fn check_dim(self, m: usize) -> Result<()> {
        match self {
            DependenceKind::Block => {
                if m < 100 || !m.is_multiple_of(100) {
                    return Err(invalid(format!(
                        "Block needs m to be a positive multiple of 100 so that 0.95m and 0.01m are integers, got {m}"
                    )));
                }
                if block_shared(m) as f64 * BLOCK_WEIGHT * BLOCK_WEIGHT > 1.0 {
                    return Err(invalid(format!(
                        "Block needs m <= 2500 for the tail variance to stay at 1, got {m}"
                    )));
                }
            }
            _ => {
                if m < 2 {
                    return Err(invalid(format!("m must be at least 2, got {m}")));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for DependenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DependenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .collect::<String>()
            .to_lowercase();
        DependenceKind::ALL
            .into_iter()
            .find(|k| k.name().to_lowercase() == key)
            .ok_or_else(|| invalid(format!("unknown dependence kind '{s}'")))
    }
}

const BLOCK_WEIGHT: f64 = 0.2;
const THREE_FACTOR_WEIGHTS: [f64; 3] = [-0.25, 0.2, -0.125];
const UNSTRUCTURED_WEIGHT: f64 = 0.4;
const UNSTRUCTURED_RANK: usize = 4;

fn block_shared(m: usize) -> usize {
    m / 100
}

fn block_head(m: usize) -> usize {
    m - m / 20
}

fn three_factor_variance() -> f64 {
    1.0 + THREE_FACTOR_WEIGHTS.iter().map(|w| w * w).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScenario {
    pub kind: DependenceKind,
    #[serde(default = "default_m")]
    pub m: usize,
    pub pi: f64,
    pub mu_star: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_m() -> usize {
    2000
}

fn default_replications() -> usize {
    100
}

impl SimScenario {
    pub fn new(
        kind: DependenceKind,
        m: usize,
        pi: f64,
        mu_star: f64,
        replications: usize,
        seed: u64,
    ) -> Self {
        Self {
            kind,
            m,
            pi,
            mu_star,
            replications,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.check_dim(self.m)?;
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(invalid(format!("pi must lie in [0, 1], got {}", self.pi)));
        }
        if !(self.mu_star > 0.0) || !self.mu_star.is_finite() {
            return Err(invalid(format!(
                "mu_star must be positive, got {}",
                self.mu_star
            )));
        }
        if self.replications == 0 {
            return Err(invalid("replications must be at least 1"));
        }
        Ok(())
    }

    /// Number of zero means, `m(1 − π)` rounded half up.
    pub fn null_count(&self) -> usize {
        null_count(self.m, self.pi)
    }

    /// The fraction of nonzero means actually generated.
    pub fn realized_pi(&self) -> f64 {
        (self.m - self.null_count()) as f64 / self.m as f64
    }
}

fn null_count(m: usize, pi: f64) -> usize {
    ((m as f64 * (1.0 - pi)) + 0.5).floor().min(m as f64) as usize
}

/// RNG for replication `rep` of a scenario seeded with `seed`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Sparse mean vector: the first `round(m(1 − π))` entries are zero, the rest
/// have magnitude `U[μ*, μ* + 1]` and a fair random sign.
pub fn gen_mu<R: Rng + ?Sized>(m: usize, pi: f64, mu_star: f64, rng: &mut R) -> Vec<f64> {
    let m0 = null_count(m, pi);
    let mut mu = vec![0.0; m];
    for x in &mut mu[m0..] {
        let mag = mu_star + rng.random::<f64>();
        *x = if rng.random::<bool>() { mag } else { -mag };
    }
    mu
}

fn normals<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Closed-form correlation matrix of a structure with a fixed `Σ`.
pub fn structured_sigma(kind: DependenceKind, m: usize) -> Result<CorrelationMatrix> {
    kind.check_dim(m)?;
    let mut data = vec![0.0; m * m];
    for i in 0..m {
        data[i * m + i] = 1.0;
    }
    let mut set = |i: usize, j: usize, v: f64| {
        data[i * m + j] = v;
        data[j * m + i] = v;
    };
    match kind {
        DependenceKind::Block => {
            let c0 = block_shared(m);
            let head = block_head(m);
            let tail_cov = c0 as f64 * BLOCK_WEIGHT * BLOCK_WEIGHT;
            for i in head..m {
                for j in 0..c0 {
                    set(j, i, alternating(j) * BLOCK_WEIGHT);
                }
                for j in head..i {
                    set(j, i, tail_cov);
                }
            }
        }
        DependenceKind::EqualCorr => {
            for i in 0..m {
                for j in 0..i {
                    set(j, i, 0.5);
                }
            }
        }
        DependenceKind::ThreeFactors => {
            let rho = (three_factor_variance() - 1.0) / three_factor_variance();
            for i in 0..m {
                for j in 0..i {
                    set(j, i, rho);
                }
            }
        }
        DependenceKind::TwoComponents => {
            let lead = -std::f64::consts::FRAC_1_SQRT_2;
            for i in 1..m {
                set(0, i, lead);
                for j in 1..i {
                    set(j, i, 0.5);
                }
            }
        }
        DependenceKind::Unstructured => {
            return Err(invalid(
                "the Unstructured correlation matrix is random; use unstructured_sigma",
            ));
        }
    }
    CorrelationMatrix::new(m, data)
}

fn alternating(j: usize) -> f64 {
    if j.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// One draw of `Z* ~ N(0, Σ)` for a fixed-`Σ` structure, built directly from
/// independent standard normals.
pub fn draw_structured<R: Rng + ?Sized>(
    kind: DependenceKind,
    m: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    kind.check_dim(m)?;
    let z = match kind {
        DependenceKind::Block => {
            let eps = normals(m, rng);
            let c0 = block_shared(m);
            let head = block_head(m);
            let shared: f64 = (0..c0)
                .map(|j| alternating(j) * BLOCK_WEIGHT * eps[j])
                .sum();
            let own = (1.0 - c0 as f64 * BLOCK_WEIGHT * BLOCK_WEIGHT).sqrt();
            let mut z = eps.clone();
            for i in head..m {
                z[i] = shared + own * eps[i];
            }
            z
        }
        DependenceKind::EqualCorr => {
            let common: f64 = rng.sample(StandardNormal);
            let h = std::f64::consts::FRAC_1_SQRT_2;
            normals(m, rng)
                .into_iter()
                .map(|e| h * common + h * e)
                .collect()
        }
        DependenceKind::ThreeFactors => {
            let f = normals(3, rng);
            let shared: f64 = THREE_FACTOR_WEIGHTS
                .iter()
                .zip(&f)
                .map(|(w, x)| w * x)
                .sum();
            let scale = three_factor_variance().sqrt();
            normals(m, rng)
                .into_iter()
                .map(|e| (shared + e) / scale)
                .collect()
        }
        DependenceKind::TwoComponents => {
            let eps = normals(m, rng);
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let mut z = Vec::with_capacity(m);
            z.push(eps[0]);
            z.extend(eps[1..].iter().map(|e| h * (e - eps[0])));
            z
        }
        DependenceKind::Unstructured => {
            return Err(invalid(
                "the Unstructured structure has no fixed Σ; use gen_dependence",
            ));
        }
    };
    Ok(z)
}

/// `0.4 H + 0.6 I`, where `H_ij` is the cosine similarity between rows `i` and
/// `j` of an `m × 4` standard normal matrix.
pub fn unstructured_sigma<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<CorrelationMatrix> {
    DependenceKind::Unstructured.check_dim(m)?;
    let mut q = normals(m * UNSTRUCTURED_RANK, rng);
    for row in q.chunks_mut(UNSTRUCTURED_RANK) {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(invalid(
                "degenerate zero row in the Unstructured factor matrix",
            ));
        }
        row.iter_mut().for_each(|x| *x /= norm);
    }
    let mut data = vec![0.0; m * m];
    for i in 0..m {
        let qi = &q[i * UNSTRUCTURED_RANK..(i + 1) * UNSTRUCTURED_RANK];
        data[i * m + i] = 1.0;
        for j in 0..i {
            let qj = &q[j * UNSTRUCTURED_RANK..(j + 1) * UNSTRUCTURED_RANK];
            let h: f64 = qi.iter().zip(qj).map(|(a, b)| a * b).sum();
            let v = UNSTRUCTURED_WEIGHT * h;
            data[i * m + j] = v;
            data[j * m + i] = v;
        }
    }
    CorrelationMatrix::new(m, data)
}

/// One draw of `Z*` together with its exact correlation matrix.
///
/// For the Unstructured structure a fresh `Σ` is drawn and `Z* = Σ^{1/2} ε`
/// uses the symmetric square root.
pub fn gen_dependence<R: Rng + ?Sized>(
    kind: DependenceKind,
    m: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, CorrelationMatrix)> {
    if kind.is_fixed() {
        let z = draw_structured(kind, m, rng)?;
        return Ok((z, structured_sigma(kind, m)?));
    }
    let (z, sigma, _) = draw_unstructured(m, rng)?;
    Ok((z, sigma))
}

fn draw_unstructured<R: Rng + ?Sized>(
    m: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, CorrelationMatrix, SymmetricSpectrum)> {
    let sigma = unstructured_sigma(m, rng)?;
    let spectrum = eigh_sym(&sigma)?;
    let z = spectrum.sqrt_apply(&normals(m, rng));
    Ok((z, sigma, spectrum))
}

/// Eigendecompositions of fixed-`Σ` structures, shared across scenarios.
#[derive(Debug, Default)]
pub struct SpectrumCache {
    entries: Mutex<HashMap<(DependenceKind, usize), Arc<SymmetricSpectrum>>>,
}

impl SpectrumCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, kind: DependenceKind, m: usize) -> Result<Arc<SymmetricSpectrum>> {
        if let Some(s) = self
            .entries
            .lock()
            .expect("cache lock poisoned")
            .get(&(kind, m))
        {
            return Ok(Arc::clone(s));
        }
        let spectrum = Arc::new(eigh_sym(&structured_sigma(kind, m)?)?);
        self.entries
            .lock()
            .expect("cache lock poisoned")
            .entry((kind, m))
            .or_insert_with(|| Arc::clone(&spectrum));
        Ok(spectrum)
    }
}

/// Outcome of a single replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep: usize,
    /// Proposed estimator; `None` if it failed.
    pub new: Option<f64>,
    /// Median-based p-value estimator of the nonzero proportion.
    pub benjamini: Option<f64>,
    pub k_used: Option<usize>,
    pub objective_monotone: Option<bool>,
    pub cppls_converged: Option<bool>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorStats {
    /// `mean(estimate) − π`.
    pub bias: f64,
    /// Sample standard deviation (divisor `n − 1`); NaN for fewer than 2 values.
    pub std_dev: f64,
    /// Number of replications that produced an estimate.
    pub n: usize,
}

impl EstimatorStats {
    pub fn from_estimates(estimates: &[f64], pi: f64) -> Self {
        let n = estimates.len();
        if n == 0 {
            return Self {
                bias: f64::NAN,
                std_dev: f64::NAN,
                n,
            };
        }
        let mean = estimates.iter().sum::<f64>() / n as f64;
        let std_dev = if n < 2 {
            f64::NAN
        } else {
            (estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self {
            bias: mean - pi,
            std_dev,
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub scenario: SimScenario,
    pub new: EstimatorStats,
    pub benjamini: EstimatorStats,
    /// How often each factor count was selected.
    pub k_counts: BTreeMap<usize, usize>,
    pub replications: Vec<ReplicationRecord>,
    pub failures: usize,
}

impl SimSummary {
    pub fn new_estimates(&self) -> Vec<f64> {
        self.replications.iter().filter_map(|r| r.new).collect()
    }

    pub fn benjamini_estimates(&self) -> Vec<f64> {
        self.replications
            .iter()
            .filter_map(|r| r.benjamini)
            .collect()
    }
}

/// Run one replication in isolation.
pub fn run_replication(
    scenario: &SimScenario,
    rep: usize,
    cfg: &EstimatorConfig,
    fixed: Option<&Estimator>,
) -> ReplicationRecord {
    let mut rng = replication_rng(scenario.seed, rep as u64);
    let mut record = ReplicationRecord {
        rep,
        new: None,
        benjamini: None,
        k_used: None,
        objective_monotone: None,
        cppls_converged: None,
        errors: Vec::new(),
    };
    let mu = gen_mu(scenario.m, scenario.pi, scenario.mu_star, &mut rng);
    let drawn = match fixed {
        Some(_) => draw_structured(scenario.kind, scenario.m, &mut rng).map(|z| (z, None)),
        None => draw_unstructured(scenario.m, &mut rng).and_then(|(z, _, spectrum)| {
            Estimator::from_spectrum(&spectrum, cfg.delta, &cfg.mcp, &cfg.phase)
                .map(|e| (z, Some(e)))
        }),
    };
    let (z_star, owned) = match drawn {
        Ok(v) => v,
        Err(e) => {
            record.errors.push(e.to_string());
            return record;
        }
    };
    let estimator = match (fixed, owned.as_ref()) {
        (Some(e), _) | (None, Some(e)) => e,
        (None, None) => unreachable!("an estimator is always available after a successful draw"),
    };
    let z: Vec<f64> = mu.iter().zip(&z_star).map(|(a, b)| a + b).collect();

    match estimator.estimate(&z) {
        Ok(r) => {
            record.new = Some(r.pi_tilde);
            record.k_used = Some(r.k_used);
            record.objective_monotone = Some(r.objective_monotone);
            record.cppls_converged = Some(r.cppls_converged);
        }
        Err(e) => record.errors.push(format!("new estimator: {e}")),
    }
    match z_to_pvalues(&z).and_then(|p| benjamini_pi0(p.values())) {
        Ok(b) if !b.degenerate => record.benjamini = Some(b.pi),
        Ok(_) => record
            .errors
            .push("benjamini estimator: degenerate median p-value".into()),
        Err(e) => record.errors.push(format!("benjamini estimator: {e}")),
    }
    record
}

/// All replications of one scenario, run in parallel on the current rayon
/// pool and aggregated in replication order.
pub fn run_scenario(
    scenario: &SimScenario,
    cfg: &EstimatorConfig,
    cache: &SpectrumCache,
) -> Result<SimSummary> {
    scenario.validate()?;
    let fixed = if scenario.kind.is_fixed() {
        let spectrum = cache.get(scenario.kind, scenario.m)?;
        Some(Estimator::from_spectrum(
            &spectrum, cfg.delta, &cfg.mcp, &cfg.phase,
        )?)
    } else {
        cfg.mcp.validate()?;
        cfg.phase.validate()?;
        None
    };
    let records: Vec<ReplicationRecord> = (0..scenario.replications)
        .into_par_iter()
        .map(|rep| run_replication(scenario, rep, cfg, fixed.as_ref()))
        .collect();
    Ok(summarize(*scenario, records))
}

fn summarize(scenario: SimScenario, replications: Vec<ReplicationRecord>) -> SimSummary {
    let news: Vec<f64> = replications.iter().filter_map(|r| r.new).collect();
    let bens: Vec<f64> = replications.iter().filter_map(|r| r.benjamini).collect();
    let mut k_counts = BTreeMap::new();
    for k in replications.iter().filter_map(|r| r.k_used) {
        *k_counts.entry(k).or_insert(0) += 1;
    }
    let failures = replications.iter().filter(|r| !r.errors.is_empty()).count();
    SimSummary {
        scenario,
        new: EstimatorStats::from_estimates(&news, scenario.pi),
        benjamini: EstimatorStats::from_estimates(&bens, scenario.pi),
        k_counts,
        replications,
        failures,
    }
}

/// Run scenarios in order on a dedicated pool of `threads` workers
/// (`None`: rayon's default). Each scenario reports its own error.
pub fn run_grid(
    scenarios: &[SimScenario],
    cfg: &EstimatorConfig,
    threads: Option<usize>,
) -> Result<Vec<Result<SimSummary>>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(invalid("thread count must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| invalid(format!("cannot start thread pool: {e}")))?;
    let cache = SpectrumCache::new();
    Ok(pool.install(|| {
        scenarios
            .iter()
            .map(|s| run_scenario(s, cfg, &cache))
            .collect()
    }))
}
