use nzprop::pipeline::{benjamini_pi0, estimate_pi, z_to_pvalues, Estimator, EstimatorConfig};
use nzprop::simgen::{draw_structured, gen_mu, replication_rng, structured_sigma, DependenceKind};
use nzprop::{CorrelationMatrix, McpConfig, PhaseConfig};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pvalues_are_monotone_in_magnitude(a in -40.0f64..40.0, b in -40.0f64..40.0) {
        let p = z_to_pvalues(&[a, b]).unwrap();
        let p = p.values();
        prop_assert!(p.iter().all(|v| (0.0..=0.5).contains(v)));
        if a.abs() <= b.abs() {
            prop_assert!(p[0] >= p[1]);
        }
    }

    #[test]
    fn benjamini_is_permutation_invariant(mut p in prop::collection::vec(0.0f64..1.0, 2..40)) {
        let a = benjamini_pi0(&p).unwrap();
        p.reverse();
        prop_assert_eq!(a, benjamini_pi0(&p).unwrap());
    }

    #[test]
    fn estimate_is_sign_flip_invariant(z in prop::collection::vec(-6.0f64..6.0, 25), rho in 0.0f64..0.8) {
        let sigma = CorrelationMatrix::equicorrelation(25, rho).unwrap();
        let (mcp, phase) = (McpConfig::default(), PhaseConfig::default());
        let a = estimate_pi(&z, &sigma, 0.5, &mcp, &phase).unwrap();
        let neg: Vec<f64> = z.iter().map(|x| -x).collect();
        let b = estimate_pi(&neg, &sigma, 0.5, &mcp, &phase).unwrap();
        prop_assert_eq!(a.pi_tilde.to_bits(), b.pi_tilde.to_bits());
        prop_assert_eq!(a.pi0_tilde, 1.0 - a.pi_tilde);
    }
}

#[test]
fn gamma_choices_agree_on_equicorrelation() {
    let m = 2000;
    let sigma = structured_sigma(DependenceKind::EqualCorr, m).unwrap();
    let spectrum = nzprop::eigh_sym(&sigma).unwrap();
    let cfg = EstimatorConfig::default();
    let estimators: Vec<Estimator> = [0.3, 0.5, 0.7]
        .iter()
        .map(|&g| {
            let phase = PhaseConfig {
                gamma: g,
                ..cfg.phase
            };
            Estimator::from_spectrum(&spectrum, cfg.delta, &cfg.mcp, &phase).unwrap()
        })
        .collect();
    let seeds = 20;
    let mut agree = 0;
    for seed in 0..seeds {
        let mut rng = replication_rng(500, seed);
        let mu = gen_mu(m, 0.2, 3.0, &mut rng);
        let z_star = draw_structured(DependenceKind::EqualCorr, m, &mut rng).unwrap();
        let z: Vec<f64> = mu.iter().zip(&z_star).map(|(a, b)| a + b).collect();
        let est: Vec<f64> = estimators
            .iter()
            .map(|e| e.estimate(&z).unwrap().pi_tilde)
            .collect();
        let spread = est.iter().cloned().fold(f64::MIN, f64::max)
            - est.iter().cloned().fold(f64::MAX, f64::min);
        if spread <= 0.05 {
            agree += 1;
        }
    }
    assert!(agree as f64 >= 0.9 * seeds as f64, "{agree}/{seeds}");
}

#[test]
fn identity_null_mean_is_near_zero() {
    let m = 500;
    let est = Estimator::new(
        &CorrelationMatrix::identity(m),
        0.5,
        &McpConfig::default(),
        &PhaseConfig::default(),
    )
    .unwrap();
    let n = 60;
    let total: f64 = (0..n)
        .map(|seed| {
            let mut rng = replication_rng(77, seed);
            let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            est.estimate(&z).unwrap().pi_tilde
        })
        .sum();
    assert!((total / n as f64).abs() <= 0.05);
}
