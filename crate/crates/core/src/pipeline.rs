//! End-to-end estimator and the p-value baseline.

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::cppls::{fit_cppls, McpConfig};
use crate::error::{ensure_finite, invalid, Result};
use crate::ftm::{amplification_warning, empirical_phase_with, PhaseConfig, PhaseKernel};
use crate::spectral::{
    eigh_sym, pfa_for_delta, CorrelationMatrix, FactorCount, PfaDecomposition, SymmetricSpectrum,
};

/// Tuning shared by every call of the estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Weak-dependence exponent used to pick the number of factors.
    pub delta: f64,
    pub mcp: McpConfig,
    pub phase: PhaseConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            mcp: McpConfig::default(),
            phase: PhaseConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    /// Raw estimate of the proportion of nonzero means; may leave `[0, 1]`.
    pub pi_tilde: f64,
    /// `1 − pi_tilde`.
    pub pi0_tilde: f64,
    /// `pi_tilde` clipped to `[0, 1]`, for convenience only.
    pub pi_tilde_clipped: f64,
    pub k_used: usize,
    pub t_star: f64,
    pub gamma_m: f64,
    pub lambda_star: f64,
    pub cppls_converged: bool,
    pub cppls_iterations: usize,
    /// Whether the CPPLS objective trace never increased.
    pub objective_monotone: bool,
    pub objective_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Everything in the estimator that depends on `Σ` and the configuration but
/// not on the observation. Build once, then call [`Estimator::estimate`] for
/// any number of observations sharing the same correlation matrix.
#[derive(Debug, Clone)]
pub struct Estimator {
    pfa: PfaDecomposition,
    count: FactorCount,
    kernel: PhaseKernel,
    mcp: McpConfig,
    gamma: f64,
}

impl Estimator {
    pub fn new(
        sigma: &CorrelationMatrix,
        delta: f64,
        mcp: &McpConfig,
        phase: &PhaseConfig,
    ) -> Result<Self> {
        if sigma.dim() < 2 {
            return Err(invalid(format!("need m >= 2, got m = {}", sigma.dim())));
        }
        let spectrum = eigh_sym(sigma)?;
        Self::from_spectrum(&spectrum, delta, mcp, phase)
    }

    pub fn from_spectrum(
        spectrum: &SymmetricSpectrum,
        delta: f64,
        mcp: &McpConfig,
        phase: &PhaseConfig,
    ) -> Result<Self> {
        let m = spectrum.dim();
        if m < 2 {
            return Err(invalid(format!("need m >= 2, got m = {m}")));
        }
        mcp.validate()?;
        phase.validate()?;
        let (pfa, count) = pfa_for_delta(spectrum, delta)?;
        let kernel = PhaseKernel::new(phase.frequency(m), phase)?;
        Ok(Self {
            pfa,
            count,
            kernel,
            mcp: *mcp,
            gamma: phase.gamma,
        })
    }

    pub fn pfa(&self) -> &PfaDecomposition {
        &self.pfa
    }

    pub fn factor_count(&self) -> FactorCount {
        self.count
    }

    pub fn t_star(&self) -> f64 {
        self.kernel.t()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn estimate(&self, z: &[f64]) -> Result<EstimateResult> {
        let m = self.pfa.dim();
        if z.len() != m {
            return Err(invalid(format!(
                "z has length {} but the correlation matrix is {m}x{m}",
                z.len()
            )));
        }
        ensure_finite("z", z)?;
        let fit = fit_cppls(z, &self.pfa, &self.mcp)?;
        let v_hat: Vec<f64> = z.iter().zip(&fit.eta_hat).map(|(a, b)| a - b).collect();
        let pi_tilde = empirical_phase_with(&self.kernel, &v_hat, self.pfa.minor_sd())?;

        let mut warnings = Vec::new();
        if !self.count.satisfied {
            warnings.push(format!(
                "no k meets the weak-dependence bound for delta = {}; using k = {}",
                self.pfa.delta().unwrap_or(f64::NAN),
                self.count.k
            ));
        }
        warnings.extend(fit.warnings.iter().cloned());
        warnings.extend(amplification_warning(self.kernel.t(), self.pfa.minor_sd()));

        Ok(EstimateResult {
            pi_tilde,
            pi0_tilde: 1.0 - pi_tilde,
            pi_tilde_clipped: pi_tilde.clamp(0.0, 1.0),
            k_used: self.pfa.k(),
            t_star: self.kernel.t(),
            gamma_m: self.pfa.gamma_m(),
            lambda_star: fit.lambda_star,
            cppls_converged: fit.converged,
            cppls_iterations: fit.n_iters,
            objective_monotone: fit.objective_is_monotone(),
            objective_trace: fit.objective_trace,
            warnings,
        })
    }
}

/// Estimate the proportion of nonzero means of `z ~ N(μ, Σ)`.
///
/// Runs the eigendecomposition, picks `k` for `delta`, fits the factors with
/// CPPLS and evaluates the phase-function estimator on `z − G_k ŵ` at
/// `t* = sqrt(2γ log m)`.
pub fn estimate_pi(
    z: &[f64],
    sigma: &CorrelationMatrix,
    delta: f64,
    mcp: &McpConfig,
    phase: &PhaseConfig,
) -> Result<EstimateResult> {
    if z.len() != sigma.dim() {
        return Err(invalid(format!(
            "z has length {} but sigma is {}x{}",
            z.len(),
            sigma.dim(),
            sigma.dim()
        )));
    }
    Estimator::new(sigma, delta, mcp, phase)?.estimate(z)
}

/// Two-sided-magnitude p-values `1 − Φ(|z_i|)`, each in `[0, 0.5]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PvalueVector {
    values: Vec<f64>,
}

impl PvalueVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Upper normal tail `1 − Φ(x)` for `x ≥ 0`, without cancellation.
pub fn normal_upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

pub fn z_to_pvalues(z: &[f64]) -> Result<PvalueVector> {
    ensure_finite("z", z)?;
    Ok(PvalueVector {
        values: z.iter().map(|x| normal_upper_tail(x.abs())).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenjaminiEstimate {
    /// Estimated null proportion; may exceed 1 and is `+∞` when degenerate.
    pub pi0: f64,
    /// `1 − pi0`.
    pub pi: f64,
    /// The order statistic used by the formula equals 1.
    pub degenerate: bool,
}

/// Median-based null-proportion estimator
/// `(m − ⌊m/2⌋ + 1) / (m (1 − p_(⌊m/2⌋)))`, with `p_(j)` the `j`-th smallest p-value.
pub fn benjamini_pi0(p: &[f64]) -> Result<BenjaminiEstimate> {
    let m = p.len();
    if m < 2 {
        return Err(invalid(format!("need at least 2 p-values, got {m}")));
    }
    ensure_finite("p", p)?;
    if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(invalid("p-values must lie in [0, 1]"));
    }
    let half = m / 2;
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    let p_half = sorted[half - 1];
    if p_half >= 1.0 {
        return Ok(BenjaminiEstimate {
            pi0: f64::INFINITY,
            pi: f64::NEG_INFINITY,
            degenerate: true,
        });
    }
    let pi0 = (m - half + 1) as f64 / (m as f64 * (1.0 - p_half));
    Ok(BenjaminiEstimate {
        pi0,
        pi: 1.0 - pi0,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_observation_identity_is_pinned() {
        // m^{-1} Σ (1 − κ_1(t*; 0)) with t* = sqrt(0.5 log m), from 40-digit quadrature.
        let cases = [
            (100, 1.517_427_129_385_146_4, -0.247_070_626_824_219_5),
            (10, 1.072_983_013_144_673_6, -0.108_232_334_340_692_97),
        ];
        for (m, t, pi) in cases {
            let sigma = CorrelationMatrix::identity(m);
            let r = estimate_pi(
                &vec![0.0; m],
                &sigma,
                0.5,
                &McpConfig::default(),
                &PhaseConfig::default(),
            )
            .unwrap();
            assert_eq!(r.k_used, 0);
            assert!((r.t_star - t).abs() < 1e-14);
            assert!((r.pi_tilde - pi).abs() < 1e-12, "m={m}: {}", r.pi_tilde);
            assert_eq!(r.pi0_tilde, 1.0 - r.pi_tilde);
            assert_eq!(r.pi_tilde_clipped, 0.0);
        }
    }

    #[test]
    fn t_star_follows_gamma() {
        let phase = PhaseConfig {
            gamma: 0.5,
            ..PhaseConfig::default()
        };
        let sigma = CorrelationMatrix::identity(50);
        let r = estimate_pi(&vec![0.1; 50], &sigma, 0.5, &McpConfig::default(), &phase).unwrap();
        assert_eq!(r.t_star, (2.0 * 0.5 * 50f64.ln()).sqrt());
    }

    #[test]
    fn sign_flip_is_exact() {
        let sigma = CorrelationMatrix::equicorrelation(40, 0.5).unwrap();
        let z: Vec<f64> = (0..40)
            .map(|i| ((i * 37 % 17) as f64 - 8.0) / 3.0)
            .collect();
        let neg: Vec<f64> = z.iter().map(|x| -x).collect();
        let cfg = (McpConfig::default(), PhaseConfig::default());
        let a = estimate_pi(&z, &sigma, 0.5, &cfg.0, &cfg.1).unwrap();
        let b = estimate_pi(&neg, &sigma, 0.5, &cfg.0, &cfg.1).unwrap();
        assert_eq!(a.pi_tilde.to_bits(), b.pi_tilde.to_bits());
        assert_eq!(a.k_used, 1);
    }

    #[test]
    fn rejects_bad_shapes() {
        let sigma = CorrelationMatrix::identity(5);
        let cfg = (McpConfig::default(), PhaseConfig::default());
        assert!(estimate_pi(&[0.0; 4], &sigma, 0.5, &cfg.0, &cfg.1).is_err());
        assert!(estimate_pi(&[0.0], &CorrelationMatrix::identity(1), 0.5, &cfg.0, &cfg.1).is_err());
        assert!(estimate_pi(&[0.0, f64::NAN, 0.0, 0.0, 0.0], &sigma, 0.5, &cfg.0, &cfg.1).is_err());
    }

    #[test]
    fn pvalue_examples() {
        let p = z_to_pvalues(&[0.0, 1.959964, -1.959964, 1.0, 3.0, 5.0, 8.0, 10.0, 20.0]).unwrap();
        let v = p.values();
        assert_eq!(v[0], 0.5);
        assert!((v[1] - 0.025).abs() < 1e-6);
        assert_eq!(v[1], v[2]);
        // Reference tail probabilities from 40-digit arithmetic.
        let exact = [
            0.158_655_253_931_457_05,
            0.001_349_898_031_630_094_5,
            2.866_515_718_791_939e-7,
            6.220_960_574_271_784e-16,
            7.619_853_024_160_526e-24,
            2.753_624_118_606_234e-89,
        ];
        for (got, want) in v[3..].iter().zip(exact) {
            assert!((got - want).abs() <= 1e-12 * want, "{got:e} vs {want:e}");
        }
        assert!(z_to_pvalues(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn benjamini_examples() {
        let b = benjamini_pi0(&[0.4, 0.1, 0.3, 0.2]).unwrap();
        assert!((b.pi0 - 0.9375).abs() < 1e-15);
        assert!((b.pi - 0.0625).abs() < 1e-15);
        let b = benjamini_pi0(&[0.5; 10]).unwrap();
        assert!((b.pi0 - 1.2).abs() < 1e-15);
        let b = benjamini_pi0(&[1.0, 1.0, 1.0, 0.2]).unwrap();
        assert!(b.degenerate && b.pi0.is_infinite());
        assert!(benjamini_pi0(&[0.3]).is_err());
        assert!(benjamini_pi0(&[0.3, 1.5]).is_err());
    }
}
