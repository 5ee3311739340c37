mod common;

use common::{brute_force_y_n, cohort, hurst, pure_noise_model, smooth_path};
use fracdrift::estimator::{estimate_cohort, Cohort, CohortStats, EstimationResult, EstimatorConfig, GateReport};
use fracdrift::fbm::{FbmGrid, Regime};
use fracdrift::inference::{
    build_interval, compute_frak_y_n, compute_y_n, normal_quantile, variance_proxy, VarianceProxy,
};
use fracdrift::model::BuiltinModel;
use fracdrift::sde::SamplePath;
use fracdrift::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn result_with(d_n: f64, center: f64) -> EstimationResult {
    EstimationResult {
        stats: CohortStats { d_n, i_n: 0.0, m_n: 1.0, n_paths: 50 },
        r_n: center,
        theta_bar: center,
        gate: GateReport { passed: true, lhs: 0.0, rhs: 1.0 },
        theta_bar_gated: center,
        theta_bar_truncated: center,
        iterations: 2,
        final_step: 0.0,
        converged: true,
        max_step_ratio: 0.0,
        regime: Regime::Young,
        caveats: vec![],
    }
}

#[test]
fn half_width_example() {
    let iv = build_interval(&result_with(1.0, 0.9), VarianceProxy::YN, 1.0, 50, 0.95).unwrap();
    assert!((iv.half_width - 2.0 * 2.241_403 / 50f64.sqrt()).abs() < 1e-5);
    assert!((iv.half_width - 0.63396).abs() < 1e-5);
    assert_eq!(iv.center, 0.9);
    assert!(iv.contains(1.0));
}

#[test]
fn zero_proxy_gives_point_interval() {
    let iv = build_interval(&result_with(0.7, 1.2), VarianceProxy::YN, 0.0, 50, 0.95).unwrap();
    assert_eq!((iv.lower(), iv.upper()), (1.2, 1.2));
}

#[test]
fn quadrupling_paths_halves_width() {
    let r = result_with(0.8, 1.0);
    let a = build_interval(&r, VarianceProxy::YN, 2.0, 25, 0.9).unwrap();
    let b = build_interval(&r, VarianceProxy::YN, 2.0, 100, 0.9).unwrap();
    assert!((a.half_width - 2.0 * b.half_width).abs() < 1e-14);
}

#[test]
fn interval_rejects_bad_input() {
    assert!(build_interval(&result_with(0.0, 1.0), VarianceProxy::YN, 1.0, 5, 0.95).is_err());
    assert!(build_interval(&result_with(1.0, 1.0), VarianceProxy::YN, 1.0, 5, 1.0).is_err());
    assert!(build_interval(&result_with(1.0, 1.0), VarianceProxy::YN, -1.0, 5, 0.9).is_err());
}

#[test]
fn quantile_examples() {
    assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
    assert!((normal_quantile(0.9875).unwrap() - 2.241_403).abs() < 1e-6);
    for p in [0.01, 0.2, 0.37] {
        assert!((normal_quantile(1.0 - p).unwrap() + normal_quantile(p).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn y_n_vanishes_without_pi_and_phi() {
    let m = pure_noise_model();
    let p = cohort(BuiltinModel::A, 0.7, 1.0, 50, 3, 1);
    let c = Cohort::new(&p, &m, hurst(0.7)).unwrap();
    assert_eq!(compute_y_n(&c).unwrap(), 0.0);
}

#[test]
fn y_n_constant_path_matches_brute_force() {
    let g = FbmGrid::new(1.5, 24).unwrap();
    let p = [SamplePath::from_observations(g, vec![0.0; 25], vec![0.8; 25]).unwrap()];
    for model in BuiltinModel::ALL {
        let m = model.spec();
        for h in [0.6, 0.75, 0.9] {
            let c = Cohort::new(&p, &m, hurst(h)).unwrap();
            let fast = compute_y_n(&c).unwrap();
            let slow = brute_force_y_n(&p, &m, hurst(h));
            assert!(((fast - slow) / slow).abs() <= 1e-3, "{} H {h}: {fast} vs {slow}", m.name);
        }
    }
}

#[test]
fn y_n_matches_brute_force_on_smooth_paths() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..4 {
        let model = BuiltinModel::ALL[trial % 3];
        let h = [0.6, 0.7, 0.9][trial % 3];
        let m = model.spec();
        let paths: Vec<SamplePath> = (0..3).map(|_| smooth_path(&mut rng, 1.0, 24)).collect();
        let c = Cohort::new(&paths, &m, hurst(h)).unwrap();
        let fast = compute_y_n(&c).unwrap();
        let slow = brute_force_y_n(&paths, &m, hurst(h));
        assert!(((fast - slow) / slow).abs() <= 1e-3, "trial {trial}: {fast} vs {slow}");
    }
}

/// `Y_N*`: signed pair term plus the exp-weighted trace correction at `theta0`.
fn y_n_star(c: &Cohort<'_>, theta0: f64) -> f64 {
    let h = c.hurst();
    let m = c.model();
    let g = c.grid();
    let beta = 2.0 * h.value() - 1.0;
    let origin = fracdrift::quadrature::PowerKernel::new(beta, g.step(), g.n_steps());
    let times = g.times();
    let w = c.young_path_integrals(theta0);
    let total: f64 = c
        .paths()
        .iter()
        .zip(w)
        .map(|(p, wi)| {
            let pi: Vec<f64> = p.x_path.iter().map(|&x| m.pi(x)).collect();
            let bracket: Vec<f64> = (0..times.len())
                .map(|j| {
                    if j == 0 {
                        pi[0] * pi[0] / beta
                    } else {
                        pi[j] * c.weights().integrate_row(j, &pi[..=j]) / times[j].powf(beta)
                    }
                })
                .collect();
            2.0 * h.alpha() * origin.origin_dot(&bracket) + (h.alpha() * wi).powi(2)
        })
        .sum();
    total / (c.len() as f64 * g.t_final().powi(2))
}

#[test]
fn y_n_dominates_exp_weighted_variant() {
    for model in [BuiltinModel::A, BuiltinModel::B] {
        for seed in 0..5 {
            let m = model.spec();
            let p = cohort(model, 0.7, 1.0, 200, 10, seed);
            let c = Cohort::new(&p, &m, hurst(0.7)).unwrap();
            let (y, ys) = (compute_y_n(&c).unwrap(), y_n_star(&c, 1.0));
            assert!(y >= 0.0 && ys <= y, "{ys} > {y}");
        }
    }
}

#[test]
fn frak_y_n_properties() {
    let h = hurst(0.4);
    for model in [BuiltinModel::A, BuiltinModel::B] {
        let m = model.spec();
        let p = cohort(model, 0.4, 1.0, 200, 8, 3);
        let c = Cohort::new(&p, &m, h).unwrap();
        let mut prev = 0.0;
        for tm in [1.0, 2.0, 5.0, 10.0] {
            let v = compute_frak_y_n(&c, tm).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        let doubled: Vec<SamplePath> = p.iter().chain(p.iter()).cloned().collect();
        let d = Cohort::new(&doubled, &m, h).unwrap();
        let (a, b) = (compute_frak_y_n(&c, 3.0).unwrap(), compute_frak_y_n(&d, 3.0).unwrap());
        assert!((a - b).abs() < 1e-12 * a);
        // Squared centred residual at theta0 = 1 never exceeds the proxy.
        let star = c.skorokhod_residuals(1.0).iter().map(|r| r * r).sum::<f64>() / c.len() as f64;
        assert!(star <= compute_frak_y_n(&c, 1.0).unwrap());
        assert!(star <= compute_frak_y_n(&c, 4.0).unwrap());
    }
}

#[test]
fn frak_y_n_vanishes_without_drift() {
    let m = pure_noise_model();
    let p = cohort(BuiltinModel::A, 0.4, 1.0, 50, 3, 1);
    let c = Cohort::new(&p, &m, hurst(0.4)).unwrap();
    assert_eq!(compute_frak_y_n(&c, 5.0).unwrap(), 0.0);
}

#[test]
fn proxies_check_regime_and_theta_max() {
    let m = BuiltinModel::A.spec();
    let young = cohort(BuiltinModel::A, 0.7, 1.0, 50, 3, 1);
    let rough = cohort(BuiltinModel::A, 0.4, 1.0, 50, 3, 1);
    let cy = Cohort::new(&young, &m, hurst(0.7)).unwrap();
    let cr = Cohort::new(&rough, &m, hurst(0.4)).unwrap();
    assert!(matches!(compute_y_n(&cr), Err(Error::RegimeMismatch(_))));
    assert!(matches!(compute_frak_y_n(&cy, 2.0), Err(Error::RegimeMismatch(_))));
    assert!(matches!(variance_proxy(&cr, None), Err(Error::Config(_))));
    assert_eq!(variance_proxy(&cy, None).unwrap().0, VarianceProxy::YN);
    assert_eq!(variance_proxy(&cr, Some(3.0)).unwrap().0, VarianceProxy::FrakYN);
}

#[test]
fn interval_is_centred_on_gated_estimate() {
    let m = BuiltinModel::A.spec();
    let p = cohort(BuiltinModel::A, 0.7, 1.0, 200, 30, 12);
    let c = Cohort::new(&p, &m, hurst(0.7)).unwrap();
    let r = estimate_cohort(&c, &EstimatorConfig::default()).unwrap();
    let (kind, v) = variance_proxy(&c, None).unwrap();
    let iv = build_interval(&r, kind, v, 30, 0.95).unwrap();
    assert_eq!(iv.center, r.theta_bar_gated);
    assert_eq!(iv.gate_passed, r.gate.passed);
}
