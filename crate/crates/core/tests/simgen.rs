use nzprop::eigh_sym;
use nzprop::pipeline::EstimatorConfig;
use nzprop::simgen::{
    draw_structured, gen_dependence, gen_mu, replication_rng, run_grid, run_scenario,
    structured_sigma, unstructured_sigma, DependenceKind, SimScenario, SpectrumCache,
};
use rand::Rng;
use rand_distr::StandardNormal;

/// Largest entrywise gap between the sample correlation of `n` draws and `Σ`.
fn max_correlation_gap(
    m: usize,
    n: usize,
    sigma: &[f64],
    mut draw: impl FnMut() -> Vec<f64>,
) -> f64 {
    let mut acc = vec![0.0; m * m];
    for _ in 0..n {
        let z = draw();
        for i in 0..m {
            let zi = z[i];
            let row = &mut acc[i * m..i * m + i + 1];
            for (a, zj) in row.iter_mut().zip(&z[..=i]) {
                *a += zi * zj;
            }
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in 0..=i {
            let c = acc[i * m + j] / (acc[i * m + i] * acc[j * m + j]).sqrt();
            worst = worst.max((c - sigma[i * m + j]).abs());
        }
    }
    worst
}

#[test]
fn generators_match_their_correlation_matrices() {
    // The maximum of ~2·10^4 entrywise sampling errors with standard error
    // n^{-1/2} is about 4.5 n^{-1/2}; 4·10^5 draws keep it near 0.007.
    let m = 200;
    let n = 400_000;
    for kind in DependenceKind::ALL {
        let mut rng = replication_rng(99, kind as u64);
        let gap = if kind.is_fixed() {
            let sigma = structured_sigma(kind, m).unwrap();
            max_correlation_gap(m, n, sigma.as_slice(), || {
                draw_structured(kind, m, &mut rng).unwrap()
            })
        } else {
            let sigma = unstructured_sigma(m, &mut rng).unwrap();
            let spec = eigh_sym(&sigma).unwrap();
            max_correlation_gap(m, n, sigma.as_slice(), || {
                let eps: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
                spec.sqrt_apply(&eps)
            })
        };
        assert!(gap <= 0.01, "{kind}: {gap}");
    }
}

#[test]
fn gen_dependence_returns_valid_matrices() {
    let mut rng = replication_rng(4, 0);
    for kind in DependenceKind::ALL {
        let (z, sigma) = gen_dependence(kind, 100, &mut rng).unwrap();
        assert_eq!(z.len(), 100);
        assert!((0..100).all(|i| sigma.get(i, i) == 1.0));
    }
    assert!(gen_dependence(DependenceKind::Block, 130, &mut rng).is_err());
}

#[test]
fn dominant_eigenvalues_at_full_size() {
    let m = 2000;
    for kind in [DependenceKind::EqualCorr, DependenceKind::TwoComponents] {
        let spec = eigh_sym(&structured_sigma(kind, m).unwrap()).unwrap();
        let l = spec.eigenvalues();
        assert!(l[0] / l[1] >= 100.0, "{kind}: {} / {}", l[0], l[1]);
    }
    let spec = eigh_sym(&structured_sigma(DependenceKind::EqualCorr, m).unwrap()).unwrap();
    assert!((spec.eigenvalues()[0] - 1000.5).abs() < 1e-8);

    let sigma = unstructured_sigma(m, &mut replication_rng(8, 0)).unwrap();
    let l = eigh_sym(&sigma).unwrap().eigenvalues().to_vec();
    assert!(l[3] / l[4] >= 5.0, "{} / {}", l[3], l[4]);
}

#[test]
fn mean_vector_magnitudes() {
    let mut rng = replication_rng(12, 0);
    let mu = gen_mu(10_000, 1.0, 2.0, &mut rng);
    let mean_abs = mu.iter().map(|x| x.abs()).sum::<f64>() / mu.len() as f64;
    let se = (1.0f64 / 12.0 / mu.len() as f64).sqrt();
    assert!((mean_abs - 2.5).abs() <= 3.0 * se, "{mean_abs}");
    let positive = mu.iter().filter(|x| **x > 0.0).count() as f64 / mu.len() as f64;
    assert!((positive - 0.5).abs() < 0.02);
}

#[test]
fn null_scenarios_are_calibrated() {
    let cfg = EstimatorConfig::default();
    let cache = SpectrumCache::new();
    for kind in [
        DependenceKind::EqualCorr,
        DependenceKind::Block,
        DependenceKind::ThreeFactors,
    ] {
        let s = SimScenario::new(kind, 500, 0.0, 3.0, 50, 21);
        let summary = run_scenario(&s, &cfg, &cache).unwrap();
        assert!(
            summary.new.bias.abs() <= 0.05,
            "{kind}: {}",
            summary.new.bias
        );
    }
}

#[test]
fn grid_is_identical_across_thread_counts() {
    let scenarios = [
        SimScenario::new(DependenceKind::TwoComponents, 200, 0.2, 2.0, 6, 3),
        SimScenario::new(DependenceKind::Unstructured, 80, 0.3, 3.0, 3, 4),
        SimScenario::new(DependenceKind::Block, 150, 0.3, 3.0, 3, 4),
    ];
    let cfg = EstimatorConfig::default();
    let one = run_grid(&scenarios, &cfg, Some(1)).unwrap();
    let four = run_grid(&scenarios, &cfg, Some(4)).unwrap();
    assert_eq!(one, four);
    assert!(one[2].is_err());
    let first = one[0].as_ref().unwrap();
    assert_eq!(first.replications.len(), 6);
    assert!(first
        .replications
        .iter()
        .all(|r| r.objective_monotone == Some(true)));
}
