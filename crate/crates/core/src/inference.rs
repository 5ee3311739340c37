//! Asymptotic confidence intervals for the gated estimator.
//!
//! Intervals have the form `center +- 2 sqrt(proxy) u_{1 - alpha/4} / (sqrt(N) D_N)`
//! where the variance proxy is `Y_N` in the Young regime and `frakY_N` in the
//! rough regime.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimator::{Cohort, EstimationResult};
use crate::fbm::Regime;
use crate::quadrature::{PairKernel, PowerKernel};

/// Inverse standard normal CDF.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("quantile level {p} outside (0, 1)")));
    }
    let n = Normal::standard();
    Ok(n.inverse_cdf(p))
}

/// `Y_N = (1/(N T^2)) sum_i [ 2 alpha_H int_0^T |pi_t| int_0^t |pi_s| (t-s)^{2H-2} ds dt
///                            + H^2 (int_0^T phi_u u^{2H-1} du)^2 ]`.
///
/// The pair term is integrated exactly for the piecewise-linear interpolant of
/// `|pi(X)|`. The second term is the quadruple integral of the proxy after integrating out
/// the two inner variables, which are separable.
pub fn compute_y_n(cohort: &Cohort<'_>) -> Result<f64> {
    let h = cohort.hurst();
    if h.regime() != Regime::Young {
        return Err(Error::RegimeMismatch(format!(
            "Y_N needs the Young regime, got H = {}",
            h.value()
        )));
    }
    let model = cohort.model();
    let grid = cohort.grid();
    let beta = 2.0 * h.value() - 1.0;
    let pair_kernel = PairKernel::new(h.kernel_exponent(), grid.step(), grid.n_steps());
    let origin = PowerKernel::new(beta, grid.step(), grid.n_steps());
    let total: f64 = cohort
        .paths()
        .iter()
        .map(|p| {
            let abs_pi: Vec<f64> = p.x_path.iter().map(|&x| model.pi(x).abs()).collect();
            let phi: Vec<f64> = p.x_path.iter().map(|&x| model.phi(x)).collect();
            let pair = 2.0 * h.alpha() * pair_kernel.triangle(&abs_pi, &abs_pi);
            let sep = h.value() * origin.origin_dot(&phi);
            pair + sep * sep
        })
        .sum();
    let t = grid.t_final();
    Ok(total / (cohort.len() as f64 * t * t))
}

/// `frakY_N = (1/(N T^2)) sum_i (|int b dX| + theta_max int b^2 + int phi Lambda(theta_max) dt)^2`.
pub fn compute_frak_y_n(cohort: &Cohort<'_>, theta_max: f64) -> Result<f64> {
    let h = cohort.hurst();
    if h.regime() != Regime::Rough {
        return Err(Error::RegimeMismatch(format!(
            "frakY_N needs the rough regime, got H = {}",
            h.value()
        )));
    }
    if !(theta_max > 0.0) {
        return Err(Error::Config(format!("theta_max must be positive, got {theta_max}")));
    }
    let lambda_terms = cohort.rough_path_integrals(theta_max);
    let total: f64 = cohort
        .antiderivative_increments()
        .zip(cohort.drift_energies())
        .zip(lambda_terms)
        .map(|((db, e), l)| (db.abs() + theta_max * e + l).powi(2))
        .sum();
    let t = cohort.grid().t_final();
    Ok(total / (cohort.len() as f64 * t * t))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceProxy {
    #[serde(rename = "Y_N")]
    YN,
    #[serde(rename = "FrakY_N")]
    FrakYN,
}

/// The proxy for the cohort's regime; `theta_max` is required when rough.
pub fn variance_proxy(
    cohort: &Cohort<'_>,
    theta_max: Option<f64>,
) -> Result<(VarianceProxy, f64)> {
    match cohort.hurst().regime() {
        Regime::Young => Ok((VarianceProxy::YN, compute_y_n(cohort)?)),
        Regime::Rough => {
            let tm = theta_max.ok_or_else(|| {
                Error::Config("theta_max is required in the rough regime".into())
            })?;
            Ok((VarianceProxy::FrakYN, compute_frak_y_n(cohort, tm)?))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub center: f64,
    pub half_width: f64,
    pub level: f64,
    pub proxy: VarianceProxy,
    pub proxy_value: f64,
    /// The interval is only meaningful when the gate passed.
    pub gate_passed: bool,
}

impl ConfidenceInterval {
    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower() <= x && x <= self.upper()
    }
}

/// Interval of nominal level `level = 1 - alpha` around the gated estimate.
pub fn build_interval(
    result: &EstimationResult,
    proxy: VarianceProxy,
    proxy_value: f64,
    n_paths: usize,
    level: f64,
) -> Result<ConfidenceInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level {level} outside (0, 1)")));
    }
    if !(proxy_value >= 0.0) || n_paths == 0 {
        return Err(Error::InvalidArgument(
            "proxy value must be nonnegative and n_paths positive".into(),
        ));
    }
    let d_n = result.stats.d_n;
    if !(d_n > 0.0) {
        return Err(Error::DegenerateCohort);
    }
    let alpha = 1.0 - level;
    let u = normal_quantile(1.0 - alpha / 4.0)?;
    Ok(ConfidenceInterval {
        center: result.theta_bar_gated,
        half_width: 2.0 / ((n_paths as f64).sqrt() * d_n) * proxy_value.sqrt() * u,
        level,
        proxy,
        proxy_value,
        gate_passed: result.gate.passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quantile_values() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        assert_relative_eq!(normal_quantile(0.9875).unwrap(), 2.241_402_727_604_947, epsilon = 1e-8);
        let q = normal_quantile(0.2).unwrap();
        assert_relative_eq!(normal_quantile(0.8).unwrap(), -q, epsilon = 1e-12);
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
    }
}
