//! Coefficient bundles for `dX = theta b(X) dt + sigma(X) dB`.
//!
//! A [`ModelSpec`] stores the drift shape `b`, the diffusion `sigma` and their
//! derivatives. The transforms used by the correction terms,
//!
//! * `pi  = b sigma`
//! * `phi = sigma (sigma b' + sigma' b)`
//! * `psi = b' - sigma' b / sigma`
//!
//! are always derived from those, never supplied separately. The sup norms of
//! `phi` and `psi` feed the contraction gate and cannot be recovered from data,
//! so each spec carries them as metadata.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Sign and boundedness properties the estimator's guarantees rely on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelFlags {
    pub b_prime_nonpositive: bool,
    pub phi_nonpositive: bool,
    pub psi_nonpositive: bool,
    pub b_bounded: bool,
}

#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    pub b: ScalarFn,
    pub b_prime: ScalarFn,
    pub sigma: ScalarFn,
    pub sigma_prime: ScalarFn,
    /// Only needed by the variation-equation check of the Malliavin derivative.
    pub sigma_second: Option<ScalarFn>,
    /// Closed-form antiderivative of `b`; `None` selects numeric quadrature.
    pub b_antideriv: Option<ScalarFn>,
    pub sup_phi: f64,
    pub sup_psi: f64,
    pub flags: ModelFlags,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("sup_phi", &self.sup_phi)
            .field("sup_psi", &self.sup_psi)
            .field("flags", &self.flags)
            .field("closed_form_antiderivative", &self.b_antideriv.is_some())
            .finish()
    }
}

impl ModelSpec {
    #[inline]
    pub fn pi(&self, x: f64) -> f64 {
        (self.b)(x) * (self.sigma)(x)
    }

    #[inline]
    pub fn phi(&self, x: f64) -> f64 {
        let s = (self.sigma)(x);
        s * (s * (self.b_prime)(x) + (self.sigma_prime)(x) * (self.b)(x))
    }

    #[inline]
    pub fn psi(&self, x: f64) -> f64 {
        (self.b_prime)(x) - (self.sigma_prime)(x) * (self.b)(x) / (self.sigma)(x)
    }

    /// Checks `inf |sigma| > 0`, the declared sup norms and the declared sign
    /// flags on a uniform lattice over `[lo, hi]`.
    pub fn validate_on(&self, lo: f64, hi: f64, points: usize) -> Result<()> {
        let mut inf_sigma = f64::INFINITY;
        for x in lattice(lo, hi, points) {
            let s = (self.sigma)(x);
            inf_sigma = inf_sigma.min(s.abs());
            let (phi, psi) = (self.phi(x), self.psi(x));
            if !(phi.is_finite() && psi.is_finite()) {
                return Err(Error::Config(format!(
                    "model {}: non-finite coefficient transform at x = {x}",
                    self.name
                )));
            }
            let slack = 1e-9 * (1.0 + self.sup_phi.max(self.sup_psi));
            if phi.abs() > self.sup_phi + slack || psi.abs() > self.sup_psi + slack {
                return Err(Error::Config(format!(
                    "model {}: declared sup norms ({}, {}) exceeded at x = {x} ({phi}, {psi})",
                    self.name, self.sup_phi, self.sup_psi
                )));
            }
            if (self.flags.phi_nonpositive && phi > 0.0)
                || (self.flags.psi_nonpositive && psi > 0.0)
                || (self.flags.b_prime_nonpositive && (self.b_prime)(x) > 0.0)
            {
                return Err(Error::Config(format!(
                    "model {}: declared sign flag violated at x = {x}",
                    self.name
                )));
            }
        }
        if inf_sigma <= 0.0 {
            return Err(Error::Config(format!(
                "model {}: sigma vanishes on [{lo}, {hi}]",
                self.name
            )));
        }
        Ok(())
    }
}

fn lattice(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    let n = points.max(2) - 1;
    (0..=n).map(move |k| lo + (hi - lo) * k as f64 / n as f64)
}

/// The three benchmark models: `b(x) = -x` with
/// `sigma = 1`, `1 + exp(-x^2)` and `pi + arctan(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BuiltinModel {
    A,
    B,
    C,
}

impl BuiltinModel {
    pub const ALL: [BuiltinModel; 3] = [BuiltinModel::A, BuiltinModel::B, BuiltinModel::C];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinModel::A => "A",
            BuiltinModel::B => "B",
            BuiltinModel::C => "C",
        }
    }

    pub fn spec(self) -> ModelSpec {
        let drift = DriftShape::Linear { rate: 1.0 };
        let diffusion = match self {
            BuiltinModel::A => DiffusionShape::Constant { level: 1.0 },
            BuiltinModel::B => DiffusionShape::GaussianBump {
                level: 1.0,
                amplitude: 1.0,
            },
            BuiltinModel::C => DiffusionShape::ArctanShift { level: PI },
        };
        let (sup_phi, sup_psi) = match self {
            BuiltinModel::A => (1.0, 1.0),
            BuiltinModel::B => (4.0, 1.0 + model_b_psi_excess()),
            BuiltinModel::C => ((1.5 * PI).powi(2), 1.0 + model_c_psi_excess()),
        };
        let mut spec = assemble(self.name().to_string(), drift, diffusion, sup_phi, sup_psi);
        spec.flags = ModelFlags {
            b_prime_nonpositive: true,
            phi_nonpositive: true,
            psi_nonpositive: true,
            b_bounded: false,
        };
        spec
    }
}

impl std::str::FromStr for BuiltinModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(BuiltinModel::A),
            "B" | "b" => Ok(BuiltinModel::B),
            "C" | "c" => Ok(BuiltinModel::C),
            other => Err(Error::Config(format!("unknown model {other:?}"))),
        }
    }
}

/// `max_{y >= 0} 2y / (e^y + 1)`; the maximiser solves `e^y (y - 1) = 1`.
fn model_b_psi_excess() -> f64 {
    let mut y = 1.28_f64;
    for _ in 0..50 {
        let g = y.exp() * (y - 1.0) - 1.0;
        let dg = y.exp() * y;
        y -= g / dg;
    }
    2.0 * y / (y.exp() + 1.0)
}

/// `max_{x < 0} (-x) / ((1 + x^2)(pi + arctan x))` by golden-section search;
/// the function is unimodal on `(-inf, 0)`.
fn model_c_psi_excess() -> f64 {
    let f = |x: f64| -x / ((1.0 + x * x) * (PI + x.atan()));
    let (mut lo, mut hi) = (-10.0_f64, 0.0_f64);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) > f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    f(0.5 * (lo + hi))
}

/// Drift shapes available to custom models.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftShape {
    /// `b(x) = -rate x`.
    Linear { rate: f64 },
    /// `b(x) = -arctan(scale x)`; bounded.
    Arctan { scale: f64 },
}

/// Diffusion shapes available to custom models.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiffusionShape {
    /// `sigma(x) = level`.
    Constant { level: f64 },
    /// `sigma(x) = level + amplitude exp(-x^2)`.
    GaussianBump { level: f64, amplitude: f64 },
    /// `sigma(x) = level + arctan(x)`.
    ArctanShift { level: f64 },
}

/// JSON description of a custom model. Sup norms and sign flags are computed
/// on a lattice over `sup_interval`, which should cover the range the paths
/// visit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    pub name: String,
    pub drift: DriftShape,
    pub diffusion: DiffusionShape,
    pub sup_interval: [f64; 2],
}

impl CoefficientSpec {
    pub fn build(&self) -> Result<ModelSpec> {
        let [lo, hi] = self.sup_interval;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!(
                "sup_interval must be a finite increasing pair, got [{lo}, {hi}]"
            )));
        }
        match self.diffusion {
            DiffusionShape::Constant { level } if level == 0.0 => {
                return Err(Error::Config("constant diffusion level must be nonzero".into()))
            }
            DiffusionShape::ArctanShift { level } if level.abs() <= 0.5 * PI => {
                return Err(Error::Config(
                    "arctan diffusion needs |level| > pi/2 to stay away from zero".into(),
                ))
            }
            DiffusionShape::GaussianBump { level, amplitude }
                if level == 0.0 || level * (level + amplitude) <= 0.0 =>
            {
                return Err(Error::Config(
                    "gaussian-bump diffusion must keep a constant sign".into(),
                ))
            }
            _ => {}
        }
        let mut spec = assemble(self.name.clone(), self.drift, self.diffusion, 0.0, 0.0);
        let mut flags = ModelFlags {
            b_prime_nonpositive: true,
            phi_nonpositive: true,
            psi_nonpositive: true,
            b_bounded: matches!(self.drift, DriftShape::Arctan { .. }),
        };
        let (mut sup_phi, mut sup_psi) = (0.0_f64, 0.0_f64);
        for x in lattice(lo, hi, 20_001) {
            let (phi, psi) = (spec.phi(x), spec.psi(x));
            sup_phi = sup_phi.max(phi.abs());
            sup_psi = sup_psi.max(psi.abs());
            flags.phi_nonpositive &= phi <= 0.0;
            flags.psi_nonpositive &= psi <= 0.0;
            flags.b_prime_nonpositive &= (spec.b_prime)(x) <= 0.0;
        }
        spec.sup_phi = sup_phi;
        spec.sup_psi = sup_psi;
        spec.flags = flags;
        Ok(spec)
    }
}

/// A builtin model name or a custom coefficient spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelChoice {
    Builtin(BuiltinModel),
    Custom(CoefficientSpec),
}

impl ModelChoice {
    pub fn build(&self) -> Result<ModelSpec> {
        match self {
            ModelChoice::Builtin(m) => Ok(m.spec()),
            ModelChoice::Custom(c) => c.build(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            ModelChoice::Builtin(m) => m.name().to_string(),
            ModelChoice::Custom(c) => c.name.clone(),
        }
    }
}

fn assemble(
    name: String,
    drift: DriftShape,
    diffusion: DiffusionShape,
    sup_phi: f64,
    sup_psi: f64,
) -> ModelSpec {
    let (b, b_prime, b_antideriv): (ScalarFn, ScalarFn, ScalarFn) = match drift {
        DriftShape::Linear { rate } => (
            Arc::new(move |x| -rate * x),
            Arc::new(move |_| -rate),
            Arc::new(move |x| -0.5 * rate * x * x),
        ),
        DriftShape::Arctan { scale } => (
            Arc::new(move |x: f64| -(scale * x).atan()),
            Arc::new(move |x: f64| -scale / (1.0 + (scale * x).powi(2))),
            Arc::new(move |x: f64| {
                let u = scale * x;
                if scale == 0.0 {
                    0.0
                } else {
                    -(u * u.atan() - 0.5 * u.ln_1p_sq()) / scale
                }
            }),
        ),
    };
    let (sigma, sigma_prime, sigma_second): (ScalarFn, ScalarFn, ScalarFn) = match diffusion {
        DiffusionShape::Constant { level } => (
            Arc::new(move |_| level),
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
        ),
        DiffusionShape::GaussianBump { level, amplitude } => (
            Arc::new(move |x: f64| level + amplitude * (-x * x).exp()),
            Arc::new(move |x: f64| -2.0 * amplitude * x * (-x * x).exp()),
            Arc::new(move |x: f64| amplitude * (4.0 * x * x - 2.0) * (-x * x).exp()),
        ),
        DiffusionShape::ArctanShift { level } => (
            Arc::new(move |x: f64| level + x.atan()),
            Arc::new(|x: f64| 1.0 / (1.0 + x * x)),
            Arc::new(|x: f64| -2.0 * x / (1.0 + x * x).powi(2)),
        ),
    };
    ModelSpec {
        name,
        b,
        b_prime,
        sigma,
        sigma_prime,
        sigma_second: Some(sigma_second),
        b_antideriv: Some(b_antideriv),
        sup_phi,
        sup_psi,
        flags: ModelFlags {
            b_prime_nonpositive: false,
            phi_nonpositive: false,
            psi_nonpositive: false,
            b_bounded: false,
        },
    }
}

trait Ln1pSq {
    /// `ln(1 + x^2)` without overflow for large `|x|`.
    fn ln_1p_sq(self) -> f64;
}

impl Ln1pSq for f64 {
    fn ln_1p_sq(self) -> f64 {
        let a = self.abs();
        if a > 1e150 {
            2.0 * a.ln()
        } else {
            (a * a).ln_1p()
        }
    }
}
