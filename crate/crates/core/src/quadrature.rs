//! Uniform-grid quadrature: trapezoid rules and product integration against
//! power weights `|t - s|^kappa`.
//!
//! [`PowerKernel`] integrates the piecewise-linear interpolant of grid values
//! exactly against the weight, so the only error is interpolation error. Per
//! cell at distance `[m, m+1]` (in units of the step) two moments are tabulated:
//!
//! * `far[m]  = int_0^1 w (m + w)^kappa dw`, the weight of the endpoint farther
//!   from the singularity,
//! * `near[m] = int_0^1 (1 - w) (m + w)^kappa dw`, the weight of the closer one.
//!
//! Their sum is the cell mass `int_m^{m+1} u^kappa du`, computed with
//! `expm1`/`ln_1p` so that row masses match `t^{kappa+1} / (kappa + 1)` to
//! rounding.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

/// Composite trapezoid rule over equally spaced samples.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dt * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Running trapezoid integrals; `out[0] = 0` and `out[k] = int_0^{t_k}`.
pub fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    if !values.is_empty() {
        out.push(0.0);
    }
    for w in values.windows(2) {
        acc += 0.5 * dt * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Product-integration weights for `|t - s|^kappa` on a uniform grid.
#[derive(Clone, Debug)]
pub struct PowerKernel {
    kappa: f64,
    dt: f64,
    /// Scaled by `dt^{kappa+1}`.
    near: Vec<f64>,
    far: Vec<f64>,
    /// `near[d] + far[d - 1]` for `d >= 1`; `combined[0] = near[0]`.
    combined: Vec<f64>,
}

impl PowerKernel {
    /// Tables for distances up to `max_cells` steps. `kappa` must exceed `-2`;
    /// for `kappa <= -1` the diagonal weight `near[0]` is infinite and only
    /// [`PowerKernel::dot_to_vanishing`] is meaningful.
    pub fn new(kappa: f64, dt: f64, max_cells: usize) -> Self {
        assert!(kappa > -2.0, "power kernel needs kappa > -2, got {kappa}");
        assert!(dt > 0.0);
        let gl = GaussLegendre::new(NonZeroUsize::new(16).expect("16 > 0"));
        let scale = dt.powf(kappa + 1.0);
        let len = max_cells.max(1);
        let mut near = Vec::with_capacity(len);
        let mut far = Vec::with_capacity(len);
        for m in 0..len {
            let (mass, f) = if m == 0 {
                let mass = if kappa > -1.0 {
                    1.0 / (kappa + 1.0)
                } else {
                    f64::INFINITY
                };
                (mass, 1.0 / (kappa + 2.0))
            } else {
                let mf = m as f64;
                let mass = cell_mass(mf, kappa);
                let f = gl.integrate(0.0, 1.0, |w| w * (mf + w).powf(kappa));
                (mass, f)
            };
            let n = if m == 0 && kappa > -1.0 {
                1.0 / ((kappa + 1.0) * (kappa + 2.0))
            } else {
                mass - f
            };
            near.push(scale * n);
            far.push(scale * f);
        }
        let combined = (0..len)
            .map(|d| if d == 0 { near[0] } else { near[d] + far[d - 1] })
            .collect();
        Self {
            kappa,
            dt,
            near,
            far,
            combined,
        }
    }

    #[inline]
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn max_cells(&self) -> usize {
        self.near.len()
    }

    /// Weight of node `i` in `int_0^{t_j} g(s) (t_j - s)^kappa ds`.
    pub fn weight(&self, j: usize, i: usize) -> f64 {
        assert!(i <= j && j <= self.max_cells());
        let mut w = 0.0;
        if i >= 1 {
            w += self.near[j - i];
        }
        if i < j {
            w += self.far[j - i - 1];
        }
        w
    }

    /// `int_0^{t_j} g(s) (t_j - s)^kappa ds` for the interpolant of `v[0..=j]`.
    pub fn dot_to(&self, j: usize, v: &[f64]) -> f64 {
        if j == 0 {
            return 0.0;
        }
        self.dot_to_vanishing(j, v) + self.near[0] * v[j]
    }

    /// As [`PowerKernel::dot_to`] for integrands with `g(t_j) = 0`: the
    /// diagonal cell is the linear ramp from `v[j-1]` to zero, whose moment is
    /// finite for every `kappa > -2`.
    pub fn dot_to_vanishing(&self, j: usize, v: &[f64]) -> f64 {
        if j == 0 {
            return 0.0;
        }
        let mut acc = self.far[j - 1] * v[0];
        for i in 1..j {
            acc += self.combined[j - i] * v[i];
        }
        acc
    }

    /// `int_0^{t_n} g(t) t^kappa dt` for the interpolant of `v[0..=n]`.
    pub fn origin_dot(&self, v: &[f64]) -> f64 {
        let n = v.len() - 1;
        if n == 0 {
            return 0.0;
        }
        assert!(n <= self.max_cells());
        let mut acc = self.near[0] * v[0] + self.far[n - 1] * v[n];
        for (k, &vk) in v.iter().enumerate().take(n).skip(1) {
            acc += self.combined[k] * vk;
        }
        acc
    }

    /// Exact `int_0^{t_j} (t_j - s)^kappa ds` for `kappa > -1`.
    pub fn row_mass(&self, j: usize) -> f64 {
        (j as f64 * self.dt).powf(self.kappa + 1.0) / (self.kappa + 1.0)
    }
}

/// `int_m^{m+1} u^kappa du` for `m >= 1`.
fn cell_mass(m: f64, kappa: f64) -> f64 {
    let l = (1.0 / m).ln_1p();
    let e = kappa + 1.0;
    if e.abs() < 1e-300 {
        l
    } else {
        m.powf(e) * (e * l).exp_m1() / e
    }
}

/// Cell-pair weights for `int_0^T f(t) int_0^t g(s) (t - s)^kappa ds dt` with
/// `f` and `g` both piecewise linear, exact up to rounding.
///
/// For cells `a <= b` at distance `d = b - a`, `m[d][p][q]` is the integral of
/// the `p`-th hat half of `g` on cell `a` against the `q`-th hat half of `f` on
/// cell `b` (0 = left node, 1 = right node). Near the diagonal the moments come
/// from truncated-power primitives; from distance 3 on the integrand is smooth
/// and an 8 x 8 Gauss–Legendre rule is used to avoid cancellation.
#[derive(Clone, Debug)]
pub struct PairKernel {
    dt: f64,
    m: Vec<[[f64; 2]; 2]>,
}

const PAIR_CLOSED_FORM_CELLS: usize = 3;

impl PairKernel {
    /// Requires `kappa > -1`.
    pub fn new(kappa: f64, dt: f64, max_cells: usize) -> Self {
        assert!(kappa > -1.0, "pair kernel needs kappa > -1, got {kappa}");
        let gl = GaussLegendre::new(NonZeroUsize::new(8).expect("8 > 0"));
        let nodes: Vec<(f64, f64)> = gl.iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
        let scale = dt.powf(kappa + 2.0);
        let m = (0..max_cells.max(1))
            .map(|d| {
                let q = if d < PAIR_CLOSED_FORM_CELLS {
                    pair_moments_closed(d as f64, kappa)
                } else {
                    let mut q = [[0.0; 2]; 2];
                    for &(u, wu) in &nodes {
                        for &(v, wv) in &nodes {
                            let k = wu * wv * (d as f64 + v - u).powf(kappa);
                            q[0][0] += k;
                            q[1][0] += k * u;
                            q[0][1] += k * v;
                            q[1][1] += k * u * v;
                        }
                    }
                    q
                };
                // Monomials u^p v^q to hat halves (1 - u, u) x (1 - v, v).
                let b00 = q[0][0] - q[1][0] - q[0][1] + q[1][1];
                let b01 = q[0][1] - q[1][1];
                let b10 = q[1][0] - q[1][1];
                let b11 = q[1][1];
                [[scale * b00, scale * b01], [scale * b10, scale * b11]]
            })
            .collect();
        Self { dt, m }
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `int_0^{t_n} f(t) int_0^t g(s) (t - s)^kappa ds dt` for the interpolants
    /// of `g[0..=n]` and `f[0..=n]`.
    pub fn triangle(&self, g: &[f64], f: &[f64]) -> f64 {
        assert_eq!(g.len(), f.len());
        let n = g.len() - 1;
        assert!(n <= self.m.len());
        let mut acc = 0.0;
        for b in 0..n {
            let (f0, f1) = (f[b], f[b + 1]);
            for a in 0..=b {
                let w = &self.m[b - a];
                let (g0, g1) = (g[a], g[a + 1]);
                acc += g0 * (w[0][0] * f0 + w[0][1] * f1) + g1 * (w[1][0] * f0 + w[1][1] * f1);
            }
        }
        acc
    }
}

/// `int_0^1 int_0^1 u^p v^q (d + v - u)_+^kappa du dv` by repeated
/// integration by parts on truncated powers.
fn pair_moments_closed(d: f64, kappa: f64) -> [[f64; 2]; 2] {
    let prim = |k: i32, x: f64| -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let mut denom = 1.0;
        for i in 1..=k {
            denom *= kappa + i as f64;
        }
        x.powf(kappa + k as f64) / denom
    };
    let b = |x: f64| prim(2, x);
    let c = |x: f64| prim(3, x);
    let e = |x: f64| prim(4, x);
    let q00 = b(d + 1.0) - 2.0 * b(d) + b(d - 1.0);
    let q10 = -(b(d) - b(d - 1.0)) + c(d + 1.0) - 2.0 * c(d) + c(d - 1.0);
    let q01 = (b(d + 1.0) - c(d + 1.0) + c(d)) - (b(d) - c(d) + c(d - 1.0));
    let q11 = -(b(d) - c(d) + c(d - 1.0)) + (c(d + 1.0) - e(d + 1.0) + e(d))
        - (c(d) - e(d) + e(d - 1.0));
    [[q00, q01], [q10, q11]]
}
