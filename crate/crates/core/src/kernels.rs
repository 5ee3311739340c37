//! Path kernels built from `psi = b' - sigma' b / sigma`.
//!
//! Every object here depends on the path only through the running integral
//! `P_k = int_0^{t_k} psi(X_u) du`, so `int_s^t psi = P_t - P_s` costs O(1):
//!
//! * Malliavin derivative `D_s X_t = sigma(X_t) exp(theta (P_t - P_s))` for `s < t`,
//! * `lambda_bar(s, t) = exp(theta (P_t - P_s))` and `lambda = lambda_bar - 1`,
//! * `L(s, t) = phi(X_t) lambda(s, t)`,
//! * `Lambda_t(theta) = -H t^{2H-1} + alpha_H int_0^t (1 - lambda_bar(s, t)) (t-s)^{2H-2} ds`.
//!
//! Integrals against `|t - s|^{2H-2}` go through [`SingularWeights`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::{FbmGrid, HurstParam};
use crate::model::ModelSpec;
use crate::quadrature::{cumulative_trapezoid, PowerKernel};
use crate::sde::SamplePath;

/// Above this spread of `a P` the factorised `exp(a P_j) exp(-a P_i)` could
/// overflow, and rows are evaluated pairwise instead.
const FACTORISATION_LIMIT: f64 = 500.0;

/// Running trapezoid integral of `psi(X)` along one path.
#[derive(Clone, Debug, PartialEq)]
pub struct PsiPrefix {
    values: Vec<f64>,
}

impl PsiPrefix {
    pub fn new(path: &SamplePath, model: &ModelSpec) -> Self {
        let psi: Vec<f64> = path.x_path.iter().map(|&x| model.psi(x)).collect();
        Self {
            values: cumulative_trapezoid(&psi, path.grid.step()),
        }
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `int_{t_s}^{t_t} psi(X_u) du`.
    #[inline]
    pub fn delta(&self, s_idx: usize, t_idx: usize) -> f64 {
        self.values[t_idx] - self.values[s_idx]
    }
}

/// Whether integrands fed to the weights are known to vanish on the diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Contract {
    General,
    VanishingAtDiagonal,
}

/// Product-integration weights for `|t_j - s|^{2H-2}` on one grid.
#[derive(Clone, Debug)]
pub struct SingularWeights {
    kernel: PowerKernel,
    contract: Contract,
}

impl SingularWeights {
    /// Weight of node `i` in the row for target `j`.
    pub fn weight(&self, j: usize, i: usize) -> f64 {
        if self.contract == Contract::VanishingAtDiagonal && i == j {
            return 0.0;
        }
        self.kernel.weight(j, i)
    }

    /// `int_0^{t_j} g(s) |t_j - s|^{2H-2} ds` for the interpolant of `g[0..=j]`.
    pub fn integrate_row(&self, j: usize, g: &[f64]) -> f64 {
        match self.contract {
            Contract::General => self.kernel.dot_to(j, g),
            Contract::VanishingAtDiagonal => self.kernel.dot_to_vanishing(j, g),
        }
    }

    pub fn contract(&self) -> Contract {
        self.contract
    }

    pub fn kernel(&self) -> &PowerKernel {
        &self.kernel
    }
}

/// Weights for general integrands; requires an integrable kernel (`H > 1/2`).
pub fn build_singular_weights(grid: FbmGrid, h: HurstParam) -> Result<SingularWeights> {
    build_singular_weights_with(grid, h, Contract::General)
}

pub fn build_singular_weights_with(
    grid: FbmGrid,
    h: HurstParam,
    contract: Contract,
) -> Result<SingularWeights> {
    let kappa = h.kernel_exponent();
    if contract == Contract::General && kappa <= -1.0 {
        return Err(Error::InvalidArgument(format!(
            "kernel |t-s|^{kappa} is not integrable; only integrands vanishing on the diagonal are allowed"
        )));
    }
    Ok(SingularWeights {
        kernel: PowerKernel::new(kappa, grid.step(), grid.n_steps()),
        contract,
    })
}

/// Kernel evaluations for one path.
#[derive(Clone, Debug)]
pub struct PathKernels<'a> {
    path: &'a SamplePath,
    model: &'a ModelSpec,
    prefix: PsiPrefix,
}

impl<'a> PathKernels<'a> {
    pub fn new(path: &'a SamplePath, model: &'a ModelSpec) -> Self {
        Self {
            path,
            model,
            prefix: PsiPrefix::new(path, model),
        }
    }

    pub fn prefix(&self) -> &PsiPrefix {
        &self.prefix
    }

    pub fn malliavin_derivative(&self, theta0: f64, s_idx: usize, t_idx: usize) -> f64 {
        if s_idx >= t_idx {
            return 0.0;
        }
        (self.model.sigma)(self.path.x_path[t_idx]) * self.lambda_bar(theta0, s_idx, t_idx)
    }

    pub fn lambda_bar(&self, theta: f64, s_idx: usize, t_idx: usize) -> f64 {
        debug_assert!(s_idx <= t_idx);
        (theta * self.prefix.delta(s_idx, t_idx)).exp()
    }

    pub fn lambda(&self, theta: f64, s_idx: usize, t_idx: usize) -> f64 {
        debug_assert!(s_idx <= t_idx);
        (theta * self.prefix.delta(s_idx, t_idx)).exp_m1()
    }

    pub fn l_kernel(&self, theta: f64, s_idx: usize, t_idx: usize) -> f64 {
        if s_idx >= t_idx {
            return 0.0;
        }
        self.model.phi(self.path.x_path[t_idx]) * self.lambda(theta, s_idx, t_idx)
    }

    /// `Lambda_{t_j}(theta)`. The value at `t = 0` is taken as 0: the
    /// integral part vanishes there and the point carries no mass in any
    /// time integral of `Lambda`.
    pub fn big_lambda(
        &self,
        theta: f64,
        t_idx: usize,
        h: HurstParam,
        weights: &SingularWeights,
    ) -> f64 {
        let hv = h.value();
        let t = self.path.grid.time(t_idx);
        if t_idx == 0 {
            return 0.0;
        }
        let head = -hv * t.powf(2.0 * hv - 1.0);
        let g: Vec<f64> = (0..=t_idx)
            .map(|i| -self.lambda(theta, i, t_idx))
            .collect();
        head + h.alpha() * weights.integrate_row(t_idx, &g)
    }

    /// `Lambda_{t_j}(theta)` for every grid index, O(n^2).
    pub fn big_lambda_all(&self, theta: f64, h: HurstParam, weights: &SingularWeights) -> Vec<f64> {
        let hv = h.value();
        let j_part = one_minus_exp_integrals(self.prefix.values(), theta, weights);
        (0..self.path.grid.len())
            .map(|k| {
                if k == 0 {
                    return 0.0;
                }
                let t = self.path.grid.time(k);
                -hv * t.powf(2.0 * hv - 1.0) + h.alpha() * j_part[k]
            })
            .collect()
    }
}

/// `K_j = int_0^{t_j} exp(a (P_j - P_s)) |t_j - s|^kappa ds` for every `j`.
pub fn exp_integrals(prefix: &[f64], a: f64, weights: &SingularWeights) -> Vec<f64> {
    let n = prefix.len() - 1;
    let mut out = vec![0.0; n + 1];
    if spread(prefix, a) <= FACTORISATION_LIMIT {
        let e: Vec<f64> = prefix.iter().map(|&p| (-a * p).exp()).collect();
        for (j, o) in out.iter_mut().enumerate().skip(1) {
            *o = (a * prefix[j]).exp() * weights.integrate_row(j, &e[..=j]);
        }
    } else {
        let mut row = vec![0.0; n + 1];
        for j in 1..=n {
            for i in 0..=j {
                row[i] = (a * (prefix[j] - prefix[i])).exp();
            }
            out[j] = weights.integrate_row(j, &row[..=j]);
        }
    }
    out
}

/// `J_j = int_0^{t_j} (1 - exp(a (P_j - P_s))) |t_j - s|^kappa ds` for every
/// `j`, using the vanishing-integrand rule on the diagonal cell.
pub fn one_minus_exp_integrals(prefix: &[f64], a: f64, weights: &SingularWeights) -> Vec<f64> {
    let k = weights.kernel();
    let n = prefix.len() - 1;
    let mut out = vec![0.0; n + 1];
    if a == 0.0 {
        return out;
    }
    if spread(prefix, a) <= FACTORISATION_LIMIT {
        let e: Vec<f64> = prefix.iter().map(|&p| (-a * p).exp()).collect();
        let ones = vec![1.0; n + 1];
        for (j, o) in out.iter_mut().enumerate().skip(1) {
            let mass = k.dot_to_vanishing(j, &ones[..=j]);
            *o = mass - (a * prefix[j]).exp() * k.dot_to_vanishing(j, &e[..=j]);
        }
    } else {
        let mut row = vec![0.0; n + 1];
        for j in 1..=n {
            for i in 0..=j {
                row[i] = -(a * (prefix[j] - prefix[i])).exp_m1();
            }
            out[j] = k.dot_to_vanishing(j, &row[..=j]);
        }
    }
    out
}

fn spread(prefix: &[f64], a: f64) -> f64 {
    let (lo, hi) = prefix
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    a.abs() * (hi - lo)
}
