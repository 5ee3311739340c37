//! Numerical check of the two-dimensional Young integral against the fBm
//! covariance.
//!
//! For a two-parameter integrand `x(s, t)` on `{0 <= s <= t <= T}` vanishing
//! like `|t - s|^alpha` on the diagonal, the double Riemann sums
//!
//! `sum_j sum_{i <= j} x(t_i, t_j) Delta R(cell_i x cell_j)`
//!
//! over rectangular increments of `R` converge to
//! `alpha_H int_0^T int_0^t x(s, t) (t - s)^{2H-2} ds dt`. On a uniform grid
//! the increment of cell pair `(i, j)` is `dt^{2H} gamma(j - i)`, so a sum costs
//! O(n^2) evaluations of `x`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbm::{fbm_covariance, fgn_autocovariance, FbmGrid, HurstParam};
use crate::kernels::PsiPrefix;
use crate::model::ModelSpec;
use crate::quadrature::PowerKernel;
use crate::sde::SamplePath;

/// Path-dependent kernel `L(s, t) = phi(X_t) (exp(theta int_s^t psi) - 1)`,
/// linearly interpolated between grid nodes.
#[derive(Clone, Debug)]
pub struct PathKernelData {
    t_final: f64,
    dt: f64,
    phi: Vec<f64>,
    psi: Vec<f64>,
    prefix: Vec<f64>,
    theta: f64,
}

impl PathKernelData {
    pub fn new(path: &SamplePath, model: &ModelSpec, theta: f64) -> Self {
        Self {
            t_final: path.grid.t_final(),
            dt: path.grid.step(),
            phi: path.x_path.iter().map(|&x| model.phi(x)).collect(),
            psi: path.x_path.iter().map(|&x| model.psi(x)).collect(),
            prefix: PsiPrefix::new(path, model).values().to_vec(),
            theta,
        }
    }

    fn interp(&self, v: &[f64], t: f64) -> f64 {
        let u = (t / self.dt).clamp(0.0, (v.len() - 1) as f64);
        let k = (u.floor() as usize).min(v.len() - 2);
        let w = u - k as f64;
        v[k] * (1.0 - w) + v[k + 1] * w
    }

    fn eval(&self, s: f64, t: f64) -> f64 {
        let dp = self.interp(&self.prefix, t) - self.interp(&self.prefix, s);
        self.interp(&self.phi, t) * (self.theta * dp).exp_m1()
    }

    /// `lim_{s -> t} L(s, t) / (t - s) = theta phi(X_t) psi(X_t)`.
    fn diagonal_slope(&self, t: f64) -> f64 {
        self.theta * self.interp(&self.phi, t) * self.interp(&self.psi, t)
    }

    fn lipschitz_const(&self) -> f64 {
        let sup = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let (phi, psi) = (sup(&self.phi), sup(&self.psi));
        self.theta.abs() * phi * psi * (self.theta.abs() * psi * self.t_final).exp()
    }
}

#[derive(Clone, Debug)]
enum Family {
    Zero,
    /// `(t - s)^alpha`.
    Power(f64),
    PathKernel(Box<PathKernelData>),
}

/// Two-parameter integrand with a Hölder-type bound
/// `|x(s, t)| <= holder_const |t - s|^holder_alpha`.
#[derive(Clone, Debug)]
pub struct TestIntegrand {
    family: Family,
    pub holder_alpha: f64,
    pub holder_const: f64,
}

impl TestIntegrand {
    pub fn zero() -> Self {
        Self {
            family: Family::Zero,
            holder_alpha: 1.0,
            holder_const: 0.0,
        }
    }

    /// `x(s, t) = (t - s)^alpha` with `alpha >= 0`.
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "power integrand needs a finite alpha >= 0, got {alpha}"
            )));
        }
        Ok(Self {
            family: Family::Power(alpha),
            holder_alpha: alpha,
            holder_const: 1.0,
        })
    }

    /// The `L` kernel of one path at a fixed `theta`; Lipschitz on the diagonal.
    pub fn path_kernel(path: &SamplePath, model: &ModelSpec, theta: f64) -> Self {
        let data = PathKernelData::new(path, model, theta);
        let holder_const = data.lipschitz_const();
        Self {
            family: Family::PathKernel(Box::new(data)),
            holder_alpha: 1.0,
            holder_const,
        }
    }

    pub fn eval(&self, s: f64, t: f64) -> f64 {
        match &self.family {
            Family::Zero => 0.0,
            Family::Power(a) => (t - s).abs().powf(*a),
            Family::PathKernel(d) => d.eval(s, t),
        }
    }

    pub fn label(&self) -> String {
        match &self.family {
            Family::Zero => "zero".into(),
            Family::Power(a) => format!("power({a})"),
            Family::PathKernel(d) => format!("path_kernel(theta={})", d.theta),
        }
    }

    /// `x(s, t) / (t - s)^beta` with its diagonal limit, where `beta` is the
    /// exact vanishing order used to regularise the quadrature.
    fn scaled(&self, s: f64, t: f64) -> f64 {
        match &self.family {
            Family::Zero => 0.0,
            Family::Power(_) => 1.0,
            Family::PathKernel(d) => {
                if t - s <= 0.0 {
                    d.diagonal_slope(t)
                } else {
                    d.eval(s, t) / (t - s)
                }
            }
        }
    }

    fn vanishing_order(&self) -> f64 {
        match &self.family {
            Family::Zero => 0.0,
            Family::Power(a) => *a,
            Family::PathKernel(_) => 1.0,
        }
    }

    /// Closed-form value of the weighted double integral, where known.
    pub fn reference(&self, h: HurstParam, t_final: f64) -> Option<f64> {
        match &self.family {
            Family::Zero => Some(0.0),
            Family::Power(a) => Some(power_limit(*a, h, t_final)),
            Family::PathKernel(_) => None,
        }
    }

    /// Spot-checks the Hölder bound on a `points x points` lattice.
    pub fn check_holder_bound(&self, t_final: f64, points: usize) -> bool {
        let n = points.max(2);
        (0..n).all(|j| {
            let t = t_final * j as f64 / (n - 1) as f64;
            (0..=j).all(|i| {
                let s = t_final * i as f64 / (n - 1) as f64;
                let bound = self.holder_const * (t - s).powf(self.holder_alpha);
                self.eval(s, t).abs() <= bound * (1.0 + 1e-9) + 1e-15
            })
        })
    }
}

/// `alpha_H T^{2H+alpha} / ((2H + alpha - 1)(2H + alpha))`.
pub fn power_limit(alpha: f64, h: HurstParam, t_final: f64) -> f64 {
    let e = 2.0 * h.value() + alpha;
    h.alpha() * t_final.powf(e) / ((e - 1.0) * e)
}

/// `R(s, t) - R(s, v) - (R(u, t) - R(u, v))`.
pub fn rectangular_increment(s: f64, t: f64, u: f64, v: f64, h: HurstParam) -> f64 {
    fbm_covariance(s, t, h) - fbm_covariance(s, v, h)
        - (fbm_covariance(u, t, h) - fbm_covariance(u, v, h))
}

/// Increment over the cell pair `[t_i, t_{i+1}] x [t_j, t_{j+1}]` in the form
/// `(|t_{i+1}-t_j|^{2H} + |t_{j+1}-t_i|^{2H} - |t_{i+1}-t_{j+1}|^{2H} - |t_i-t_j|^{2H}) / 2`.
pub fn cell_increment(ti: f64, ti1: f64, tj: f64, tj1: f64, h: HurstParam) -> f64 {
    let p = |x: f64| x.abs().powf(2.0 * h.value());
    0.5 * (p(ti1 - tj) + p(tj1 - ti) - p(ti1 - tj1) - p(ti - tj))
}

/// Double Riemann sum over the lower-triangular cell pairs of a uniform
/// dissection of `[0, t_final]` into `n` cells.
pub fn riemann_sum(x: &TestIntegrand, h: HurstParam, t_final: f64, n: usize) -> f64 {
    let dt = t_final / n as f64;
    let scale = dt.powf(2.0 * h.value());
    let gamma: Vec<f64> = (0..n).map(|k| scale * fgn_autocovariance(k, h)).collect();
    (0..n)
        .map(|j| {
            let tj = j as f64 * dt;
            (0..=j)
                .map(|i| x.eval(i as f64 * dt, tj) * gamma[j - i])
                .sum::<f64>()
        })
        .sum()
}

/// Part of [`riemann_sum`] from cell pairs with `j - i <= 1`.
pub fn diagonal_band_sum(x: &TestIntegrand, h: HurstParam, t_final: f64, n: usize) -> f64 {
    let dt = t_final / n as f64;
    let scale = dt.powf(2.0 * h.value());
    let (g0, g1) = (scale * fgn_autocovariance(0, h), scale * fgn_autocovariance(1, h));
    (0..n)
        .map(|j| {
            let tj = j as f64 * dt;
            let mut acc = x.eval(tj, tj) * g0;
            if j >= 1 {
                acc += x.eval(tj - dt, tj) * g1;
            }
            acc
        })
        .sum()
}

/// `alpha_H int_0^T int_0^t x(s, t) (t - s)^{2H-2} ds dt` by product
/// integration on `grid`.
///
/// The integrand is written as `y(s, t) (t - s)^beta` with `beta` its exact
/// vanishing order, and `y` is interpolated against the integrable weight
/// `(t - s)^{2H-2+beta}`. The inner integral behaves like `t^{2H-1+beta}` near
/// the origin and is treated the same way in the outer variable.
pub fn weighted_double_integral(x: &TestIntegrand, h: HurstParam, grid: FbmGrid) -> Result<f64> {
    if matches!(x.family, Family::Zero) {
        return Ok(0.0);
    }
    let kappa = h.kernel_exponent() + x.vanishing_order();
    if kappa <= -1.0 {
        return Err(Error::InvalidArgument(format!(
            "integrand of order {} does not vanish fast enough for H = {}",
            x.vanishing_order(),
            h.value()
        )));
    }
    let n = grid.n_steps();
    let inner_kernel = PowerKernel::new(kappa, grid.step(), n);
    let outer_kernel = PowerKernel::new(kappa + 1.0, grid.step(), n);
    let times = grid.times();
    let mut bracket = vec![0.0; n + 1];
    bracket[0] = x.scaled(0.0, 0.0) / (kappa + 1.0);
    let mut row = vec![0.0; n + 1];
    for j in 1..=n {
        let t = times[j];
        for i in 0..=j {
            row[i] = x.scaled(times[i], t);
        }
        bracket[j] = inner_kernel.dot_to(j, &row[..=j]) / t.powf(kappa + 1.0);
    }
    Ok(h.alpha() * outer_kernel.origin_dot(&bracket))
}

/// One row of the convergence report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub riemann_sum: f64,
    pub reference: f64,
    pub abs_error: f64,
}

/// Riemann sums at each partition size against a fixed reference value.
pub fn convergence_rows(
    x: &TestIntegrand,
    h: HurstParam,
    t_final: f64,
    sizes: &[usize],
    reference: f64,
) -> Vec<ConvergenceRow> {
    sizes
        .par_iter()
        .map(|&n| {
            let r = riemann_sum(x, h, t_final, n);
            ConvergenceRow {
                n,
                riemann_sum: r,
                reference,
                abs_error: (r - reference).abs(),
            }
        })
        .collect()
}

/// Least-squares slope of `log2 abs_error` against `log2 n`, negated so that
/// a positive value is the convergence order.
pub fn empirical_order(rows: &[ConvergenceRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.n as f64).log2(), r.abs_error.log2()))
        .collect();
    -slope(&pts)
}

pub(crate) fn slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Writes the report with columns `n,riemann_sum,reference,abs_error`.
pub fn write_convergence_csv<W: Write>(out: W, rows: &[ConvergenceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_convergence_file(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    write_convergence_csv(std::fs::File::create(path)?, rows)
}
