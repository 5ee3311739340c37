//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::num::NonZeroUsize;
use std::sync::Arc;

use fracdrift::fbm::{FbmGrid, FbmSampler, HurstParam};
use fracdrift::kernels::PathKernels;
use fracdrift::model::{BuiltinModel, ModelFlags, ModelSpec};
use fracdrift::sde::{integrate, integrate_with, SamplePath, Scheme};
use gauss_quad::GaussLegendre;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn hurst(h: f64) -> HurstParam {
    HurstParam::new(h).unwrap()
}

/// `count` paths of `model` on `[0, t_final]` with `n` steps.
pub fn cohort(
    model: BuiltinModel,
    h: f64,
    t_final: f64,
    n: usize,
    count: usize,
    seed: u64,
) -> Vec<SamplePath> {
    let hp = hurst(h);
    let grid = FbmGrid::new(t_final, n).unwrap();
    let sampler = FbmSampler::new(grid, hp).unwrap();
    let spec = model.spec();
    (0..count as u64)
        .map(|i| integrate(&spec, 1.0, 1.0, &sampler.sample(seed, i), hp).unwrap())
        .collect()
}

/// Model with `b = -sigma` so that `psi = 0` while `phi = -2 sigma^2 sigma'`.
pub fn psi_free_model() -> ModelSpec {
    let sigma = |x: f64| 1.0 + (-x * x).exp();
    let dsigma = |x: f64| -2.0 * x * (-x * x).exp();
    ModelSpec {
        name: "psi_free".into(),
        b: Arc::new(move |x| -sigma(x)),
        b_prime: Arc::new(move |x| -dsigma(x)),
        sigma: Arc::new(sigma),
        sigma_prime: Arc::new(dsigma),
        sigma_second: None,
        b_antideriv: None,
        sup_phi: 8.0,
        sup_psi: 0.0,
        flags: ModelFlags {
            b_prime_nonpositive: false,
            phi_nonpositive: false,
            psi_nonpositive: true,
            b_bounded: true,
        },
    }
}

/// Constant drift `b = -1` and `sigma = 1`, so that `phi = psi = 0`.
pub fn phi_free_model() -> ModelSpec {
    ModelSpec {
        name: "phi_free".into(),
        b: Arc::new(|_| -1.0),
        b_prime: Arc::new(|_| 0.0),
        sigma: Arc::new(|_| 1.0),
        sigma_prime: Arc::new(|_| 0.0),
        sigma_second: Some(Arc::new(|_| 0.0)),
        b_antideriv: Some(Arc::new(|x| -x)),
        sup_phi: 0.0,
        sup_psi: 0.0,
        flags: ModelFlags {
            b_prime_nonpositive: true,
            phi_nonpositive: true,
            psi_nonpositive: true,
            b_bounded: true,
        },
    }
}

/// Drift-free, unit-noise model.
pub fn pure_noise_model() -> ModelSpec {
    let mut m = phi_free_model();
    m.name = "pure_noise".into();
    m.b = Arc::new(|_| 0.0);
    m.b_antideriv = Some(Arc::new(|_| 0.0));
    m
}

/// Composite Simpson rule (even number of intervals) on grid samples.
pub fn simpson(values: &[f64], dt: f64) -> f64 {
    let n = values.len() - 1;
    assert!(n % 2 == 0, "Simpson needs an even number of intervals");
    let mut acc = values[0] + values[n];
    for (k, v) in values.iter().enumerate().take(n).skip(1) {
        acc += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * dt / 3.0
}

/// Explicit fractional OU solution on the same driving path:
/// `X_t = e^{-theta t} x0 + B_t - theta int_0^t e^{-theta (t - s)} B_s ds`.
pub fn ou_solution(b: &[f64], dt: f64, theta: f64, x0: f64) -> Vec<f64> {
    let decay = (-theta * dt).exp();
    let mut conv = 0.0;
    let mut out = Vec::with_capacity(b.len());
    out.push(x0);
    for k in 1..b.len() {
        conv = decay * conv + 0.5 * dt * (decay * b[k - 1] + b[k]);
        let t = k as f64 * dt;
        out.push((-theta * t).exp() * x0 + b[k] - theta * conv);
    }
    out
}

/// First-variation process started at grid index `s`, integrated jointly with
/// `X` by the Milstein scheme:
/// `dD = theta b'(X) D dt + sigma'(X) D dB`, `D_s = sigma(X_s)`.
pub fn variation_solution(model: &ModelSpec, theta: f64, path: &SamplePath, s: usize) -> Vec<f64> {
    let d2 = model.sigma_second.clone().expect("variation oracle needs sigma''");
    let dt = path.grid.step();
    let mut out = vec![0.0; path.x_path.len()];
    let mut d = (model.sigma)(path.x_path[s]);
    out[s] = d;
    for k in s..path.x_path.len() - 1 {
        let x = path.x_path[k];
        let db = path.b_path[k + 1] - path.b_path[k];
        let sp = (model.sigma_prime)(x);
        let corr = 0.5 * (sp * sp + (model.sigma)(x) * d2(x)) * db * db;
        d *= 1.0 + theta * (model.b_prime)(x) * dt + sp * db + corr;
        out[k + 1] = d;
    }
    out
}

/// Piecewise-linear interpolant of grid samples.
pub fn interp(values: &[f64], dt: f64, t: f64) -> f64 {
    let u = (t / dt).clamp(0.0, (values.len() - 1) as f64);
    let k = (u.floor() as usize).min(values.len() - 2);
    let w = u - k as f64;
    values[k] * (1.0 - w) + values[k + 1] * w
}

/// Composite Gauss–Legendre nodes and weights, `q` per grid cell.
pub fn composite_nodes(n: usize, dt: f64, q: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(NonZeroUsize::new(q).unwrap());
    let mut out = Vec::with_capacity(n * q);
    for c in 0..n {
        let (a, b) = (c as f64 * dt, (c + 1) as f64 * dt);
        for (x, w) in gl.iter() {
            out.push((0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w));
        }
    }
    out
}

/// Exact `int_0^T f(s) |t - s|^kappa ds` for the interpolant `f` of `values`,
/// at an arbitrary `t`, by closed-form per-cell moments.
pub fn kernel_integral_at(values: &[f64], dt: f64, kappa: f64, t: f64) -> f64 {
    let e1 = kappa + 1.0;
    let e2 = kappa + 2.0;
    // Moments of (a + b s) over [c0, c1] entirely on one side of t.
    let side = |c0: f64, c1: f64, f0: f64, f1: f64| -> f64 {
        if c1 <= c0 {
            return 0.0;
        }
        let slope = (f1 - f0) / (c1 - c0);
        let a = f0 - slope * c0;
        if c1 <= t {
            let m0 = ((t - c0).powf(e1) - (t - c1).powf(e1)) / e1;
            let m1 = t * m0 - ((t - c0).powf(e2) - (t - c1).powf(e2)) / e2;
            a * m0 + slope * m1
        } else {
            let m0 = ((c1 - t).powf(e1) - (c0 - t).powf(e1)) / e1;
            let m1 = t * m0 + ((c1 - t).powf(e2) - (c0 - t).powf(e2)) / e2;
            a * m0 + slope * m1
        }
    };
    let mut acc = 0.0;
    for c in 0..values.len() - 1 {
        let (c0, c1) = (c as f64 * dt, (c + 1) as f64 * dt);
        let (f0, f1) = (values[c], values[c + 1]);
        if c1 <= t || c0 >= t {
            acc += side(c0, c1, f0, f1);
        } else {
            let ft = interp(values, dt, t);
            acc += side(c0, t, f0, ft) + side(t, c1, ft, f1);
        }
    }
    acc
}

/// Brute-force `Y_N` for paths observed on a coarse grid: the pair term by
/// outer Gauss–Legendre and exact inner moments, the four-fold term by an
/// explicit quadruple loop whose inner variables use the substitution
/// `w = (u - u')^{kappa+1}` to absorb the singular weight.
pub fn brute_force_y_n(paths: &[SamplePath], model: &ModelSpec, h: HurstParam) -> f64 {
    let grid = paths[0].grid;
    let dt = grid.step();
    let t_final = grid.t_final();
    let kappa = h.kernel_exponent();
    let e1 = kappa + 1.0;
    let outer = composite_nodes(grid.n_steps(), dt, 8);
    let gl_inner = GaussLegendre::new(NonZeroUsize::new(8).unwrap());
    let inner_ref: Vec<(f64, f64)> = gl_inner.iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
    let mut total = 0.0;
    for p in paths {
        let abs_pi: Vec<f64> = p.x_path.iter().map(|&x| model.pi(x).abs()).collect();
        let phi: Vec<f64> = p.x_path.iter().map(|&x| model.phi(x)).collect();
        let pair: f64 = outer
            .iter()
            .map(|&(t, w)| w * interp(&abs_pi, dt, t) * kernel_integral_at(&abs_pi, dt, kappa, t))
            .sum();
        // Inner nodes for u' in [0, u]: u' = u - w^{1/e1}, weight dw / e1 with
        // w in [0, u^{e1}].
        let inner = |u: f64| -> Vec<(f64, f64)> {
            let top = u.powf(e1);
            inner_ref
                .iter()
                .map(|&(x, wt)| {
                    let w = x * top;
                    (u - w.powf(1.0 / e1), wt * top / e1)
                })
                .collect()
        };
        let mut quad = 0.0;
        for &(u, wu) in &outer {
            let iu = inner(u);
            let fu = interp(&phi, dt, u);
            for &(v, wv) in &outer {
                let iv = inner(v);
                let fv = interp(&phi, dt, v);
                for &(_ub, wub) in &iu {
                    for &(_vb, wvb) in &iv {
                        quad += wu * wv * wub * wvb * fu * fv;
                    }
                }
            }
        }
        total += h.alpha() * pair + h.alpha() * h.alpha() * quad;
    }
    total / (paths.len() as f64 * t_final * t_final)
}

/// Scheme used for oracle comparisons when a test needs plain Euler.
pub fn euler_path(model: &ModelSpec, fbm: &fracdrift::fbm::FbmPath, x0: f64) -> SamplePath {
    integrate_with(model, 1.0, x0, fbm, Scheme::Euler).unwrap()
}

/// Sample mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Least-squares slope of `ys` on `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Max relative gap between the closed-form derivative and the variation
/// oracle over a 20 x 20 lattice of index pairs.
pub fn malliavin_discrepancy(model: BuiltinModel, h: f64, seed: u64) -> f64 {
    let n = 500;
    let spec = model.spec();
    let path = &cohort(model, h, 1.0, n, 1, seed)[0];
    let k = PathKernels::new(path, &spec);
    let lattice: Vec<usize> = (0..20).map(|i| i * n / 20).collect();
    let mut worst = 0.0_f64;
    for &s in &lattice {
        let oracle = variation_solution(&spec, 1.0, path, s);
        for t in lattice.iter().map(|t| t + n / 20) {
            if t <= s {
                continue;
            }
            let d = k.malliavin_derivative(1.0, s, t);
            worst = worst.max(((d - oracle[t]) / oracle[t]).abs());
        }
    }
    worst
}


/// Smooth random path `a + b sin(c t + d)` on `n` steps of `[0, T]`.
pub fn smooth_path(rng: &mut ChaCha8Rng, t_final: f64, n: usize) -> SamplePath {
    let g = FbmGrid::new(t_final, n).unwrap();
    let (a, b, c, d) = (
        rng.random_range(-1.5..1.5),
        rng.random_range(0.1..1.0),
        rng.random_range(0.5..6.0),
        rng.random_range(0.0..6.0),
    );
    let x = g.times().iter().map(|t| a + b * (c * t + d).sin()).collect();
    SamplePath::from_observations(g, vec![0.0; n + 1], x).unwrap()
}
