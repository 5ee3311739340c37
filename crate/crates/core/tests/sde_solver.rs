mod common;

use common::{hurst, ou_solution, pure_noise_model, simpson};
use fracdrift::fbm::{FbmGrid, FbmPath, FbmSampler};
use fracdrift::model::BuiltinModel;
use fracdrift::sde::{
    antiderivative_increment, integrate, integrate_with, numeric_antiderivative_increment,
    quadratic_drift_functional, SamplePath, Scheme,
};

fn fbm(h: f64, n: usize, seed: u64, index: u64) -> FbmPath {
    let grid = FbmGrid::new(1.0, n).unwrap();
    FbmSampler::new(grid, hurst(h)).unwrap().sample(seed, index)
}

/// Restricts a fine path to every `factor`-th node.
fn coarsen(p: &FbmPath, factor: usize) -> FbmPath {
    let n = (p.values.len() - 1) / factor;
    FbmPath {
        grid: FbmGrid::new(p.grid.t_final(), n).unwrap(),
        values: p.values.iter().step_by(factor).copied().collect(),
    }
}

#[test]
fn pure_noise_reproduces_driver() {
    let p = fbm(0.7, 200, 3, 0);
    let m = pure_noise_model();
    let x = integrate(&m, 1.0, 0.25, &p, hurst(0.7)).unwrap();
    for (xv, bv) in x.x_path.iter().zip(&p.values) {
        assert!((xv - (0.25 + bv)).abs() < 1e-12);
    }
}

#[test]
fn ou_matches_explicit_solution() {
    let model = BuiltinModel::A.spec();
    for idx in 0..5 {
        let p = fbm(0.7, 500, 11, idx);
        let x = integrate(&model, 1.0, 1.0, &p, hurst(0.7)).unwrap();
        let exact = ou_solution(&p.values, p.grid.step(), 1.0, 1.0);
        let err = x.x_path.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 10.0 * p.grid.step(), "path {idx}: error {err}");
    }
}

fn strong_order(model: BuiltinModel, h: f64, scheme: Scheme) -> f64 {
    let spec = model.spec();
    let levels = [128usize, 256, 512, 1024];
    let fine_n = 4096;
    let mut errs = vec![0.0; levels.len()];
    let paths = 20;
    for idx in 0..paths {
        let fine = fbm(h, fine_n, 77, idx);
        let reference = integrate_with(&spec, 1.0, 1.0, &fine, scheme).unwrap();
        for (l, &n) in levels.iter().enumerate() {
            let factor = fine_n / n;
            let x = integrate_with(&spec, 1.0, 1.0, &coarsen(&fine, factor), scheme).unwrap();
            let e = x
                .x_path
                .iter()
                .enumerate()
                .map(|(k, v)| (v - reference.x_path[k * factor]).abs())
                .fold(0.0, f64::max);
            errs[l] += e / paths as f64;
        }
    }
    let xs: Vec<f64> = levels.iter().map(|&n| (1.0 / n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    common::ls_slope(&xs, &ys)
}

#[test]
fn default_scheme_converges_at_first_order_in_young_regime() {
    for m in BuiltinModel::ALL {
        let order = strong_order(m, 0.7, Scheme::default_for(hurst(0.7).regime()));
        assert!(order >= 0.8, "model {}: order {order}", m.name());
    }
}

#[test]
fn euler_is_first_order_for_additive_noise() {
    let order = strong_order(BuiltinModel::A, 0.7, Scheme::Euler);
    assert!(order >= 0.8, "order {order}");
}

#[test]
fn milstein_reduces_to_euler_for_constant_sigma() {
    let p = fbm(0.4, 300, 5, 0);
    let m = BuiltinModel::A.spec();
    let a = integrate_with(&m, 1.0, 1.0, &p, Scheme::Euler).unwrap();
    let b = integrate_with(&m, 1.0, 1.0, &p, Scheme::Milstein).unwrap();
    assert_eq!(a.x_path, b.x_path);
}

#[test]
fn model_a_is_affine_in_initial_value() {
    let p = fbm(0.7, 300, 5, 1);
    let m = BuiltinModel::A.spec();
    let run = |x0: f64| integrate(&m, 1.0, x0, &p, hurst(0.7)).unwrap().x_path;
    let (a, b, c) = (run(0.0), run(1.0), run(3.0));
    for k in 0..a.len() {
        // Superposition: X(x0) = X(0) + x0 (X(1) - X(0)).
        assert!((c[k] - (a[k] + 3.0 * (b[k] - a[k]))).abs() < 1e-12);
    }
}

#[test]
fn integration_is_deterministic() {
    let p = fbm(0.45, 300, 8, 2);
    let m = BuiltinModel::C.spec();
    let a = integrate(&m, 1.0, 1.0, &p, hurst(0.45)).unwrap();
    let b = integrate(&m, 1.0, 1.0, &p, hurst(0.45)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn drift_energy_matches_simpson() {
    let m = BuiltinModel::A.spec();
    let p = fbm(0.7, 500, 4, 0);
    let x = integrate(&m, 1.0, 1.0, &p, hurst(0.7)).unwrap();
    // Simpson on the piecewise-linear interpolant: refine each cell to two
    // sub-intervals so Simpson sees the interpolated midpoints.
    let mut refined = Vec::with_capacity(2 * x.x_path.len());
    for w in x.x_path.windows(2) {
        refined.push(w[0]);
        refined.push(0.5 * (w[0] + w[1]));
    }
    refined.push(*x.x_path.last().unwrap());
    let sq: Vec<f64> = refined.iter().map(|v| v * v).collect();
    let oracle = simpson(&sq, 0.5 * x.grid.step());
    let got = quadratic_drift_functional(&x, &m);
    assert!(((got - oracle) / oracle).abs() < 1e-3, "{got} vs {oracle}");
}

#[test]
fn drift_energy_examples() {
    let g = FbmGrid::new(2.0, 10).unwrap();
    let flat = SamplePath::from_observations(g, vec![0.0; 11], vec![1.5; 11]).unwrap();
    let m = BuiltinModel::A.spec();
    assert!((quadratic_drift_functional(&flat, &m) - 2.0 * 2.25).abs() < 1e-12);
    assert_eq!(quadratic_drift_functional(&flat, &pure_noise_model()), 0.0);
    assert_eq!(antiderivative_increment(&flat, &m), 0.0);
}

#[test]
fn antiderivative_examples() {
    let m = BuiltinModel::A.spec();
    let g = FbmGrid::new(1.0, 1).unwrap();
    let p = SamplePath::from_observations(g, vec![0.0, 0.1], vec![1.0, 2.0]).unwrap();
    assert!((antiderivative_increment(&p, &m) + 1.5).abs() < 1e-15);
    for (x0, xt) in [(1.0, 2.0), (-0.3, 4.0), (2.5, -1.0)] {
        let closed = -(xt * xt - x0 * x0) / 2.0;
        assert!((numeric_antiderivative_increment(&m, x0, xt) - closed).abs() < 1e-9);
    }
}
