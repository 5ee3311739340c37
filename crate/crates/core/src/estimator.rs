//! The fixed-point drift estimator.
//!
//! With `D_N` the average drift energy and `I_N` the normalised pathwise
//! integral `int b(X) dX`, the estimator is `theta_bar = I_N + R_N` where
//! `R_N` solves `R = Theta(R)`:
//!
//! * Young regime: `Theta(r) = -(alpha_H / (N T D_N)) sum_i W_i(r + I_N)` with
//!   `W_i(a) = int_0^T phi(X_t) int_0^t exp(a (P_t - P_s)) (t - s)^{2H-2} ds dt`;
//! * rough regime: `Theta(r) = (1 / (N T D_N)) sum_i int_0^T phi(X_t) Lambda_t(r + I_N) dt`.
//!
//! A contraction gate decides whether the fixed point is certified; the gated
//! and truncated variants zero the estimate when the gate fails or `D_N` is
//! below a threshold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::{FbmGrid, HurstParam, Regime};
use crate::kernels::{
    build_singular_weights_with, exp_integrals, one_minus_exp_integrals, Contract, PsiPrefix,
    SingularWeights,
};
use crate::model::ModelSpec;
use crate::quadrature::{trapezoid, PowerKernel};
use crate::sde::{antiderivative_increment, quadratic_drift_functional, SamplePath};

/// Cohort-level statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortStats {
    /// `D_N = (1/(N T)) sum_i int_0^T b(X^i)^2`.
    pub d_n: f64,
    /// `I_N = (1/(N T D_N)) sum_i (B(X^i_T) - B(x0))` with `B' = b`.
    pub i_n: f64,
    /// `M_N = exp(|psi|_inf |I_N| T)`.
    pub m_n: f64,
    pub n_paths: usize,
}

/// Per-path quantities reused across functional evaluations.
#[derive(Clone, Debug)]
struct PathFeatures {
    phi: Vec<f64>,
    prefix: Vec<f64>,
    drift_energy: f64,
    antiderivative_increment: f64,
}

/// Paths plus precomputed weights, ready for repeated evaluation of the
/// functional.
#[derive(Clone, Debug)]
pub struct Cohort<'a> {
    paths: &'a [SamplePath],
    model: &'a ModelSpec,
    hurst: HurstParam,
    grid: FbmGrid,
    features: Vec<PathFeatures>,
    weights: SingularWeights,
    /// Weights for `int_0^T g(t) t^{2H-1} dt`.
    origin: PowerKernel,
}

impl<'a> Cohort<'a> {
    pub fn new(paths: &'a [SamplePath], model: &'a ModelSpec, hurst: HurstParam) -> Result<Self> {
        let first = paths
            .first()
            .ok_or_else(|| Error::InvalidArgument("cohort needs at least one path".into()))?;
        let grid = first.grid;
        if paths.iter().any(|p| p.grid != grid) {
            return Err(Error::InvalidArgument("all paths must share one grid".into()));
        }
        let features = paths
            .par_iter()
            .map(|p| PathFeatures {
                phi: p.x_path.iter().map(|&x| model.phi(x)).collect(),
                prefix: PsiPrefix::new(p, model).values().to_vec(),
                drift_energy: quadratic_drift_functional(p, model),
                antiderivative_increment: antiderivative_increment(p, model),
            })
            .collect();
        let contract = match hurst.regime() {
            Regime::Young => Contract::General,
            Regime::Rough => Contract::VanishingAtDiagonal,
        };
        Ok(Self {
            paths,
            model,
            hurst,
            grid,
            features,
            weights: build_singular_weights_with(grid, hurst, contract)?,
            origin: PowerKernel::new(2.0 * hurst.value() - 1.0, grid.step(), grid.n_steps()),
        })
    }

    pub fn paths(&self) -> &'a [SamplePath] {
        self.paths
    }

    pub fn model(&self) -> &'a ModelSpec {
        self.model
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    pub fn grid(&self) -> FbmGrid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn weights(&self) -> &SingularWeights {
        &self.weights
    }

    pub fn drift_energies(&self) -> impl Iterator<Item = f64> + '_ {
        self.features.iter().map(|f| f.drift_energy)
    }

    pub fn antiderivative_increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.features.iter().map(|f| f.antiderivative_increment)
    }

    pub fn stats(&self) -> Result<CohortStats> {
        let t = self.grid.t_final();
        let n = self.len() as f64;
        let d_n = self.drift_energies().sum::<f64>() / (n * t);
        if !(d_n > 0.0) {
            return Err(Error::DegenerateCohort);
        }
        let i_n = self.antiderivative_increments().sum::<f64>() / (n * t * d_n);
        Ok(CohortStats {
            d_n,
            i_n,
            m_n: (self.model.sup_psi * i_n.abs() * t).exp(),
            n_paths: self.len(),
        })
    }

    /// `W_i(a)` for every path (Young regime only).
    pub fn young_path_integrals(&self, a: f64) -> Vec<f64> {
        let beta = 2.0 * self.hurst.value() - 1.0;
        let times = self.grid.times();
        self.features
            .par_iter()
            .map(|f| {
                let k = exp_integrals(&f.prefix, a, &self.weights);
                let bracket: Vec<f64> = (0..times.len())
                    .map(|j| {
                        if j == 0 {
                            f.phi[0] / beta
                        } else {
                            f.phi[j] * k[j] / times[j].powf(beta)
                        }
                    })
                    .collect();
                self.origin.origin_dot(&bracket)
            })
            .collect()
    }

    /// `int_0^T phi(X^i_t) Lambda^i_t(a) dt` for every path.
    pub fn rough_path_integrals(&self, a: f64) -> Vec<f64> {
        let h = self.hurst.value();
        let alpha = self.hurst.alpha();
        let dt = self.grid.step();
        self.features
            .par_iter()
            .map(|f| {
                let head = -h * self.origin.origin_dot(&f.phi);
                if alpha == 0.0 {
                    return head;
                }
                let j = one_minus_exp_integrals(&f.prefix, a, &self.weights);
                let prod: Vec<f64> = f.phi.iter().zip(&j).map(|(p, j)| p * j).collect();
                head + alpha * trapezoid(&prod, dt)
            })
            .collect()
    }

    /// Young-regime functional at `r` given the cohort statistics.
    pub fn theta_functional_young(&self, stats: &CohortStats, r: f64) -> Result<f64> {
        if self.hurst.regime() != Regime::Young {
            return Err(Error::RegimeMismatch(format!(
                "Young functional requested for H = {}",
                self.hurst.value()
            )));
        }
        let total: f64 = self.young_path_integrals(r + stats.i_n).iter().sum();
        Ok(-self.hurst.alpha() * total / self.normaliser(stats))
    }

    /// Rough-regime functional at `r` given the cohort statistics.
    pub fn theta_functional_rough(&self, stats: &CohortStats, r: f64) -> Result<f64> {
        if self.hurst.regime() != Regime::Rough {
            return Err(Error::RegimeMismatch(format!(
                "rough functional requested for H = {}",
                self.hurst.value()
            )));
        }
        let total: f64 = self.rough_path_integrals(r + stats.i_n).iter().sum();
        Ok(total / self.normaliser(stats))
    }

    /// The functional for the cohort's regime.
    pub fn theta_functional(&self, stats: &CohortStats, r: f64) -> f64 {
        match self.hurst.regime() {
            Regime::Young => self.theta_functional_young(stats, r),
            Regime::Rough => self.theta_functional_rough(stats, r),
        }
        .expect("regime matches by construction")
    }

    /// Largest `|Theta(r') - Theta(r)| / |r' - r|` over pairs from `rs`.
    pub fn empirical_lipschitz(&self, stats: &CohortStats, rs: &[f64]) -> f64 {
        let values: Vec<f64> = rs.iter().map(|&r| self.theta_functional(stats, r)).collect();
        let mut best = 0.0_f64;
        for i in 0..rs.len() {
            for j in i + 1..rs.len() {
                if rs[i] != rs[j] {
                    best = best.max((values[j] - values[i]).abs() / (rs[j] - rs[i]).abs());
                }
            }
        }
        best
    }

    /// Per-path centred Skorokhod expression at the true parameter: the
    /// pathwise integral minus the drift part and the trace correction. Its
    /// expectation is zero.
    pub fn skorokhod_residuals(&self, theta0: f64) -> Vec<f64> {
        let corrections = match self.hurst.regime() {
            Regime::Young => self
                .young_path_integrals(theta0)
                .into_iter()
                .map(|w| -self.hurst.alpha() * w)
                .collect::<Vec<_>>(),
            Regime::Rough => self.rough_path_integrals(theta0),
        };
        self.features
            .iter()
            .zip(corrections)
            .map(|(f, c)| f.antiderivative_increment - theta0 * f.drift_energy + c)
            .collect()
    }

    fn normaliser(&self, stats: &CohortStats) -> f64 {
        self.len() as f64 * self.grid.t_final() * stats.d_n
    }
}

/// Both sides of the contraction gate `T^{2H} M_N / D_N <= c / (alpha_bar |phi| |psi|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub passed: bool,
    pub lhs: f64,
    /// Infinite when either sup norm vanishes, since the functional is then constant.
    pub rhs: f64,
}

pub fn gate_delta(
    stats: &CohortStats,
    model: &ModelSpec,
    h: HurstParam,
    t_final: f64,
    c_contraction: f64,
) -> GateReport {
    let lhs = t_final.powf(2.0 * h.value()) * stats.m_n / stats.d_n;
    let denom = h.alpha_bar() * model.sup_phi * model.sup_psi;
    let rhs = if denom == 0.0 {
        f64::INFINITY
    } else {
        c_contraction / denom
    };
    GateReport {
        passed: lhs <= rhs,
        lhs,
        rhs,
    }
}

/// Outcome of a Picard iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub value: f64,
    /// Number of functional evaluations.
    pub iterations: usize,
    /// `|r_k - r_{k-1}|` at the last iterate.
    pub final_step: f64,
    pub converged: bool,
    /// Largest observed ratio of consecutive steps.
    pub max_step_ratio: f64,
}

/// Picard iteration from `r_0 = 0` until a step of at most `tol`.
pub fn fixed_point<F: FnMut(f64) -> f64>(mut f: F, tol: f64, max_iter: usize) -> FixedPointReport {
    let mut r = 0.0;
    let mut prev_step = f64::NAN;
    let mut max_ratio = 0.0_f64;
    for k in 1..=max_iter {
        let next = f(r);
        let step = (next - r).abs();
        if prev_step > 0.0 {
            max_ratio = max_ratio.max(step / prev_step);
        }
        r = next;
        if step <= tol || !r.is_finite() {
            return FixedPointReport {
                value: r,
                iterations: k,
                final_step: step,
                converged: r.is_finite(),
                max_step_ratio: max_ratio,
            };
        }
        prev_step = step;
    }
    FixedPointReport {
        value: r,
        iterations: max_iter,
        final_step: prev_step,
        converged: false,
        max_step_ratio: max_ratio,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Contraction constant `c` of the gate, in `(0, 1)`.
    pub c_contraction: f64,
    /// Truncation level for `D_N`; must be positive.
    pub d_trunc: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            c_contraction: 0.5,
            d_trunc: 0.01,
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_contraction > 0.0 && self.c_contraction < 1.0) {
            return Err(Error::Config(format!(
                "c_contraction must lie in (0, 1), got {}",
                self.c_contraction
            )));
        }
        if !(self.d_trunc > 0.0) {
            return Err(Error::Config(format!("d_trunc must be positive, got {}", self.d_trunc)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config("tol and max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub stats: CohortStats,
    /// Fixed point `R_N`.
    pub r_n: f64,
    /// `theta_bar = I_N + R_N`, reported whether or not the gate passed.
    pub theta_bar: f64,
    pub gate: GateReport,
    /// `theta_bar` if the gate passed, else 0.
    pub theta_bar_gated: f64,
    /// `theta_bar_gated` if `D_N >= d_trunc`, else 0.
    pub theta_bar_truncated: f64,
    pub iterations: usize,
    pub final_step: f64,
    pub converged: bool,
    pub max_step_ratio: f64,
    pub regime: Regime,
    /// Conditions under which the usual guarantees do not apply.
    pub caveats: Vec<String>,
}

impl EstimationResult {
    pub fn gate_passed(&self) -> bool {
        self.gate.passed
    }
}

pub fn estimate(
    paths: &[SamplePath],
    model: &ModelSpec,
    h: HurstParam,
    config: &EstimatorConfig,
) -> Result<EstimationResult> {
    let cohort = Cohort::new(paths, model, h)?;
    estimate_cohort(&cohort, config)
}

pub fn estimate_cohort(cohort: &Cohort<'_>, config: &EstimatorConfig) -> Result<EstimationResult> {
    config.validate()?;
    let model = cohort.model();
    let h = cohort.hurst();
    let t_final = cohort.grid().t_final();
    let stats = cohort.stats()?;
    let gate = gate_delta(&stats, model, h, t_final, config.c_contraction);

    let mut caveats = Vec::new();
    if !(model.flags.phi_nonpositive && model.flags.psi_nonpositive) {
        caveats.push("phi <= 0 and psi <= 0 are not both declared".to_string());
    }
    if h.regime() == Regime::Rough {
        if !model.flags.b_bounded {
            caveats.push("rough regime with unbounded drift".to_string());
        }
        if stats.i_n < 0.0 {
            caveats.push(format!("I_N = {} is negative", stats.i_n));
        }
    }

    let mut projected = false;
    let fp = fixed_point(
        |r| {
            let v = cohort.theta_functional(&stats, r);
            if v < 0.0 {
                projected = true;
                0.0
            } else {
                v
            }
        },
        config.tol,
        config.max_iter,
    );
    if projected {
        caveats.push("functional left R_+ and was projected to 0".to_string());
    }
    if !fp.converged {
        log::warn!(
            "Picard iteration did not converge after {} steps (last step {:e})",
            fp.iterations,
            fp.final_step
        );
    }

    let theta_bar = stats.i_n + fp.value;
    let theta_bar_gated = if gate.passed { theta_bar } else { 0.0 };
    let theta_bar_truncated = if stats.d_n >= config.d_trunc {
        theta_bar_gated
    } else {
        0.0
    };
    Ok(EstimationResult {
        stats,
        r_n: fp.value,
        theta_bar,
        gate,
        theta_bar_gated,
        theta_bar_truncated,
        iterations: fp.iterations,
        final_step: fp.final_step,
        converged: fp.converged,
        max_step_ratio: fp.max_step_ratio,
        regime: h.regime(),
        caveats,
    })
}
