//! Fourier-transform phase functions with heterogeneous noise levels.
//!
//! With the triangular smoothing density `ω(ζ) = (1 − |ζ|)_+`,
//!
//! ```text
//! κ_σ(t; x) = ∫_{-1}^{1} ω(ζ) exp(t²ζ²σ²/2) cos(tζx) dζ
//! ψ(t; μ)   = ∫_{-1}^{1} ω(ζ) cos(tμζ) dζ = (sin(tμ/2) / (tμ/2))²
//! ```
//!
//! satisfy `E[κ_σ(t; X)] = ψ(t; μ)` for `X ~ N(μ, σ²)`, so averaging
//! `1 − κ_{σ_j}(t; x_j)` over coordinates estimates the phase function
//! `m^{-1} Σ_j (1 − ψ(t; μ_j))` even when every coordinate has its own `σ_j`.
//!
//! Both integrands are even in `ζ`; the half-range integral on `[0, 1]` is
//! evaluated with composite 4-point Gauss–Legendre.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Result};

/// Above this value of `t · max σ_j` the exponential weight amplifies noise
/// strongly enough to deserve a diagnostic.
pub const AMPLIFICATION_WARN: f64 = 3.0;

const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseConfig {
    /// Frequency scale: the estimator evaluates the phase at `sqrt(2γ log m)`.
    pub gamma: f64,
    /// Number of quadrature panels on `[0, 1]`; each panel uses 4 nodes.
    pub n_quad: usize,
    /// Minor standard deviations below this are treated as exactly zero.
    pub sigma_floor: f64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            n_quad: 500,
            sigma_floor: 1e-12,
        }
    }
}

impl PhaseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if self.n_quad < 2 || !self.n_quad.is_multiple_of(2) {
            return Err(invalid(format!(
                "n_quad must be an even integer >= 2, got {}",
                self.n_quad
            )));
        }
        if !(self.sigma_floor >= 0.0) || !self.sigma_floor.is_finite() {
            return Err(invalid(format!(
                "sigma_floor must be non-negative, got {}",
                self.sigma_floor
            )));
        }
        Ok(())
    }

    /// `sqrt(2γ log m)`.
    pub fn frequency(&self, m: usize) -> f64 {
        (2.0 * self.gamma * (m as f64).ln()).sqrt()
    }
}

/// Triangular density on `[-1, 1]`.
pub fn omega_tri(zeta: f64) -> f64 {
    let a = zeta.abs();
    if a <= 1.0 {
        1.0 - a
    } else {
        0.0
    }
}

/// Quadrature rule for `2∫_0^1 (1 − ζ) f(ζ) dζ` at a fixed frequency `t`.
#[derive(Debug, Clone)]
pub struct PhaseKernel {
    t: f64,
    /// `2 (1 − ζ_j) w_j`.
    weights: Vec<f64>,
    /// `t ζ_j`.
    freqs: Vec<f64>,
    /// `(t ζ_j)² / 2`.
    half_sq: Vec<f64>,
    sigma_floor: f64,
}

impl PhaseKernel {
    pub fn new(t: f64, cfg: &PhaseConfig) -> Result<Self> {
        cfg.validate()?;
        if !(t >= 0.0) || !t.is_finite() {
            return Err(invalid(format!(
                "frequency t must be finite and non-negative, got {t}"
            )));
        }
        let panels = cfg.n_quad;
        let h = 1.0 / panels as f64;
        let mut weights = Vec::with_capacity(4 * panels);
        let mut freqs = Vec::with_capacity(4 * panels);
        let mut half_sq = Vec::with_capacity(4 * panels);
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for (node, w) in GL4_NODES.iter().zip(GL4_WEIGHTS) {
                let zeta = mid + 0.5 * h * node;
                let tz = t * zeta;
                weights.push(2.0 * (1.0 - zeta) * 0.5 * h * w);
                freqs.push(tz);
                half_sq.push(0.5 * tz * tz);
            }
        }
        Ok(Self {
            t,
            weights,
            freqs,
            half_sq,
            sigma_floor: cfg.sigma_floor,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `κ_σ(t; x)`. Even in `x` bit for bit.
    pub fn kappa(&self, x: f64, sigma: f64) -> f64 {
        let ax = x.abs();
        if sigma < self.sigma_floor || sigma == 0.0 {
            return self
                .weights
                .iter()
                .zip(&self.freqs)
                .map(|(w, f)| w * (f * ax).cos())
                .sum();
        }
        let s2 = sigma * sigma;
        self.weights
            .iter()
            .zip(&self.freqs)
            .zip(&self.half_sq)
            .map(|((w, f), q)| w * (q * s2).exp() * (f * ax).cos())
            .sum()
    }
}

/// `κ_σ(t; x)` by quadrature.
pub fn kappa_sigma(t: f64, x: f64, sigma: f64, cfg: &PhaseConfig) -> Result<f64> {
    if !x.is_finite() || !sigma.is_finite() {
        return Err(invalid("kappa_sigma inputs must be finite"));
    }
    if sigma < 0.0 {
        return Err(invalid(format!("sigma must be non-negative, got {sigma}")));
    }
    Ok(PhaseKernel::new(t, cfg)?.kappa(x, sigma))
}

/// `ψ(t; μ)`, the Fejér kernel `(sin(tμ/2) / (tμ/2))²`.
pub fn oracle_psi(t: f64, mu: f64) -> f64 {
    let half = 0.5 * t * mu;
    if half == 0.0 {
        return 1.0;
    }
    let s = half.sin() / half;
    s * s
}

/// Underlying phase function `m^{-1} Σ_j (1 − ψ(t; μ_j))`.
pub fn oracle_phase(t: f64, mu: &[f64]) -> f64 {
    if mu.is_empty() {
        return 0.0;
    }
    mu.iter().map(|&m| 1.0 - oracle_psi(t, m)).sum::<f64>() / mu.len() as f64
}

/// Empirical phase function `m^{-1} Σ_j (1 − κ_{σ_j}(t; v*_j))`.
pub fn empirical_phase(t: f64, v_star: &[f64], minor_sd: &[f64], cfg: &PhaseConfig) -> Result<f64> {
    let kernel = PhaseKernel::new(t, cfg)?;
    empirical_phase_with(&kernel, v_star, minor_sd)
}

/// [`empirical_phase`] with a prebuilt kernel, for repeated evaluation at one `t`.
pub fn empirical_phase_with(kernel: &PhaseKernel, v_star: &[f64], minor_sd: &[f64]) -> Result<f64> {
    if v_star.len() != minor_sd.len() {
        return Err(invalid(format!(
            "v* has length {} but minor_sd has length {}",
            v_star.len(),
            minor_sd.len()
        )));
    }
    if v_star.is_empty() {
        return Err(invalid("empirical phase needs at least one coordinate"));
    }
    ensure_finite("v*", v_star)?;
    ensure_finite("minor_sd", minor_sd)?;
    if minor_sd.iter().any(|&s| s < 0.0) {
        return Err(invalid("minor standard deviations must be non-negative"));
    }
    let total: f64 = v_star
        .iter()
        .zip(minor_sd)
        .map(|(&x, &s)| 1.0 - kernel.kappa(x, s))
        .sum();
    Ok(total / v_star.len() as f64)
}

/// Diagnostic for the noise-amplification regime `t · max σ_j > 3`.
pub fn amplification_warning(t: f64, minor_sd: &[f64]) -> Option<String> {
    let max_sd = minor_sd.iter().copied().fold(0.0, f64::max);
    (t * max_sd > AMPLIFICATION_WARN).then(|| {
        format!(
            "t * max(minor_sd) = {:.3} exceeds {AMPLIFICATION_WARN}: phase estimate is noise-amplified",
            t * max_sd
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_basics() {
        assert_eq!(omega_tri(0.0), 1.0);
        assert_eq!(omega_tri(1.0), 0.0);
        assert_eq!(omega_tri(-1.0), 0.0);
        assert_eq!(omega_tri(2.0), 0.0);
        assert_eq!(omega_tri(0.3), omega_tri(-0.3));
        // Midpoint rule is exact on each linear piece away from the kink.
        let n = 2000;
        let h = 2.0 / n as f64;
        let total: f64 = (0..n)
            .map(|i| omega_tri(-1.0 + (i as f64 + 0.5) * h) * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn kappa_at_zero_frequency_is_one() {
        let cfg = PhaseConfig::default();
        for &(x, s) in &[(0.0, 0.0), (3.0, 0.5), (-7.0, 1.0)] {
            assert!((kappa_sigma(0.0, x, s, &cfg).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn kappa_is_even_in_x() {
        let cfg = PhaseConfig::default();
        for &x in &[0.1, 1.7, 12.0] {
            assert_eq!(
                kappa_sigma(2.0, x, 0.7, &cfg).unwrap(),
                kappa_sigma(2.0, -x, 0.7, &cfg).unwrap()
            );
        }
    }

    #[test]
    fn kappa_matches_high_precision_value() {
        // 2∫_0^1 (1−ζ) exp(2ζ² · 0.49) cos(2ζ) dζ from 40-digit adaptive quadrature.
        let v = kappa_sigma(2.0, 1.0, 0.7, &PhaseConfig::default()).unwrap();
        assert!((v - 0.766_439_707_378_350_2).abs() < 1e-13);
    }

    #[test]
    fn kappa_rejects_bad_inputs() {
        let cfg = PhaseConfig::default();
        assert!(kappa_sigma(1.0, f64::NAN, 0.5, &cfg).is_err());
        assert!(kappa_sigma(1.0, 0.0, -0.5, &cfg).is_err());
        assert!(kappa_sigma(-1.0, 0.0, 0.5, &cfg).is_err());
        assert!(kappa_sigma(f64::INFINITY, 0.0, 0.5, &cfg).is_err());
    }

    #[test]
    fn psi_examples() {
        assert_eq!(oracle_psi(3.0, 0.0), 1.0);
        assert!(oracle_psi(1.0, 2.0 * std::f64::consts::PI).abs() < 1e-30);
        assert_eq!(oracle_psi(1.3, 0.8), oracle_psi(1.3, -0.8));
        assert!((oracle_psi(1.0, 0.5) - 0.979_339_504_877_018_3).abs() < 1e-15);
        assert!((oracle_psi(1.0, 3.0) - 0.442_220_554_800_099).abs() < 1e-15);
    }

    #[test]
    fn psi_agrees_with_quadrature() {
        // With σ = 0 the κ quadrature computes ψ by a different route.
        let cfg = PhaseConfig::default();
        for &t in &[0.5, 1.0, 2.0, 3.9] {
            for &mu in &[0.0, 0.3, 1.0, 2.5, std::f64::consts::PI, 7.0] {
                let q = kappa_sigma(t, mu, 0.0, &cfg).unwrap();
                assert!((q - oracle_psi(t, mu)).abs() < 1e-12, "t={t} μ={mu}");
            }
        }
    }

    #[test]
    fn oracle_phase_examples() {
        assert_eq!(oracle_phase(2.0, &[0.0; 10]), 0.0);
        let t = 1.0;
        let v = oracle_phase(t, &[0.0, 2.0 * std::f64::consts::PI / t]);
        assert!((v - 0.5).abs() < 1e-15);
        for &t in &[0.1, 1.0, 5.0] {
            let v = oracle_phase(t, &[0.0, 0.4, -2.0, 9.0]);
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn empirical_phase_examples() {
        let cfg = PhaseConfig::default();
        assert!(
            empirical_phase(0.0, &[1.0, -3.0], &[0.5, 1.0], &cfg)
                .unwrap()
                .abs()
                < 1e-14
        );
        // 1 − 2∫_0^1 (1−ζ) e^{ζ²/8} dζ from 40-digit adaptive quadrature.
        let v = empirical_phase(1.0, &[0.0], &[0.5], &cfg).unwrap();
        assert!((v - (-0.021_366_022_379_098_17)).abs() < 1e-14);

        let v_star = [0.3, -1.2, 4.0, 0.0];
        let sd = [0.5, 0.7, 0.2, 1.0];
        let flipped: Vec<f64> = v_star.iter().map(|x| -x).collect();
        assert_eq!(
            empirical_phase(2.0, &v_star, &sd, &cfg).unwrap(),
            empirical_phase(2.0, &flipped, &sd, &cfg).unwrap()
        );
        assert!(empirical_phase(2.0, &v_star, &sd[..3], &cfg).is_err());
    }

    #[test]
    fn sigma_floor_treats_tiny_sd_as_zero() {
        let cfg = PhaseConfig {
            sigma_floor: 1e-3,
            ..PhaseConfig::default()
        };
        let a = empirical_phase(2.0, &[0.7], &[5e-4], &cfg).unwrap();
        let b = empirical_phase(2.0, &[0.7], &[0.0], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quadrature_converges_on_stress_grid() {
        let coarse = PhaseConfig::default();
        let fine = PhaseConfig {
            n_quad: 2 * coarse.n_quad,
            ..coarse
        };
        let t_max = (2.0 * 2000f64.ln()).sqrt();
        for &t in &[0.5, 1.0, 2.0, 2.757, t_max] {
            let kc = PhaseKernel::new(t, &coarse).unwrap();
            let kf = PhaseKernel::new(t, &fine).unwrap();
            for &s in &[0.0, 0.5, 0.7, 1.0] {
                for &x in &[0.0, 0.3, 1.0, 3.0, 10.0, 25.0, 50.0] {
                    let d = (kc.kappa(x, s) - kf.kappa(x, s)).abs();
                    assert!(d <= 1e-9, "t={t} σ={s} x={x}: {d:e}");
                }
            }
        }
    }

    #[test]
    fn amplification_diagnostic() {
        assert!(amplification_warning(2.0, &[0.5, 1.0]).is_none());
        assert!(amplification_warning(4.0, &[0.5, 1.0]).is_some());
    }

    #[test]
    fn config_validation() {
        assert!(PhaseConfig::default().validate().is_ok());
        assert!(PhaseConfig {
            gamma: 0.0,
            ..PhaseConfig::default()
        }
        .validate()
        .is_err());
        assert!(PhaseConfig {
            gamma: 1.0,
            ..PhaseConfig::default()
        }
        .validate()
        .is_err());
        assert!(PhaseConfig {
            n_quad: 3,
            ..PhaseConfig::default()
        }
        .validate()
        .is_err());
        assert!(PhaseConfig {
            n_quad: 0,
            ..PhaseConfig::default()
        }
        .validate()
        .is_err());
    }
}
