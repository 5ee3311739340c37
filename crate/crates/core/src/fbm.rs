//! Fractional Brownian motion on uniform grids.
//!
//! Paths are built from fractional Gaussian noise (fGn) generated on the unit
//! lattice and rescaled by `dt^H`, using self-similarity. The default generator
//! is circulant embedding (Davies–Harte): the first row of the circulant
//! extension of the fGn covariance is diagonalised by one FFT, after which each
//! path costs one complex FFT of length `2n`. When the embedding has eigenvalues
//! below `-eigen_tolerance` the sampler falls back to a dense Cholesky factor of
//! the increment covariance.
//!
//! Every path is drawn from its own ChaCha stream keyed by `(seed, index)`, so a
//! batch is reproducible independently of how it is scheduled across threads.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which pathwise integration theory applies to a given Hurst index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `H > 1/2`: Young integrals.
    Young,
    /// `1/3 < H <= 1/2`: rough-path integrals.
    Rough,
}

/// Hurst index restricted to `(1/3, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(h: f64) -> Result<Self> {
        if h.is_finite() && h > 1.0 / 3.0 && h < 1.0 {
            Ok(Self(h))
        } else {
            Err(Error::InvalidHurst(h))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `H = 1/2` is treated as rough.
    pub fn regime(self) -> Regime {
        if self.0 > 0.5 {
            Regime::Young
        } else {
            Regime::Rough
        }
    }

    /// `alpha_H = H (2H - 1)`, the weight of the kernel `|t - s|^{2H-2}`.
    #[inline]
    pub fn alpha(self) -> f64 {
        self.0 * (2.0 * self.0 - 1.0)
    }

    /// `|alpha_H| / (2H (2H + 1))`, the constant in the contraction bound.
    #[inline]
    pub fn alpha_bar(self) -> f64 {
        self.alpha().abs() / (2.0 * self.0 * (2.0 * self.0 + 1.0))
    }

    /// Exponent of the singular kernel, `2H - 2`.
    #[inline]
    pub fn kernel_exponent(self) -> f64 {
        2.0 * self.0 - 2.0
    }
}

impl TryFrom<f64> for HurstParam {
    type Error = Error;

    fn try_from(h: f64) -> Result<Self> {
        Self::new(h)
    }
}

impl From<HurstParam> for f64 {
    fn from(h: HurstParam) -> f64 {
        h.0
    }
}

/// Uniform grid `t_k = k * t_final / n_steps`, `k = 0..=n_steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FbmGrid {
    t_final: f64,
    n_steps: usize,
}

impl FbmGrid {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "t_final must be positive, got {t_final}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be positive".into()));
        }
        Ok(Self { t_final, n_steps })
    }

    #[inline]
    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid points, `n_steps + 1`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn step(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_final
        } else {
            k as f64 * self.step()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }
}

/// One fBm realisation on a grid; `values[0] == 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct FbmPath {
    pub grid: FbmGrid,
    pub values: Vec<f64>,
}

impl FbmPath {
    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Autocovariance of unit-spacing fGn:
/// `gamma(k) = (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2`.
pub fn fgn_autocovariance(k: usize, h: HurstParam) -> f64 {
    let two_h = 2.0 * h.value();
    let k = k as f64;
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
}

/// `R(s, t) = (s^{2H} + t^{2H} - |t - s|^{2H}) / 2`.
pub fn fbm_covariance(s: f64, t: f64, h: HurstParam) -> f64 {
    let two_h = 2.0 * h.value();
    0.5 * (s.powf(two_h) + t.powf(two_h) - (t - s).abs().powf(two_h))
}

/// `d/dt R(s, t) = H (t^{2H-1} - (t - s)^{2H-1})` for `0 <= s < t`.
pub fn partial2_covariance(s: f64, t: f64, h: HurstParam) -> Result<f64> {
    if !(s >= 0.0 && s < t) {
        return Err(Error::InvalidArgument(format!(
            "partial2_covariance needs 0 <= s < t, got s = {s}, t = {t}"
        )));
    }
    let e = 2.0 * h.value() - 1.0;
    Ok(h.value() * (t.powf(e) - (t - s).powf(e)))
}

/// Generator actually used for a batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMethod {
    CirculantEmbedding,
    Cholesky,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MethodPreference {
    /// Circulant embedding, Cholesky only if the embedding is not PSD.
    #[default]
    Auto,
    /// Always use the dense Cholesky factor.
    Cholesky,
}

#[derive(Clone, Copy, Debug)]
pub struct SamplerOptions {
    pub preference: MethodPreference,
    /// Eigenvalues in `[-eigen_tolerance, 0)` are clamped to zero.
    pub eigen_tolerance: f64,
    /// Largest `n_steps` for which a dense Cholesky factor is built.
    pub cholesky_cap: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            preference: MethodPreference::Auto,
            eigen_tolerance: 1e-10,
            cholesky_cap: 4096,
        }
    }
}

enum Backend {
    Circulant {
        /// `sqrt(lambda_k / m)` for the `m = 2n` circulant eigenvalues.
        scaled_roots: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Cholesky {
        /// Row-major lower-triangular factor, row `i` has `i + 1` entries.
        lower: Vec<f64>,
    },
}

/// Reusable fBm sampler for a fixed `(grid, H)`.
pub struct FbmSampler {
    grid: FbmGrid,
    hurst: HurstParam,
    min_eigenvalue: Option<f64>,
    backend: Backend,
}

impl std::fmt::Debug for FbmSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbmSampler")
            .field("grid", &self.grid)
            .field("hurst", &self.hurst)
            .field("method", &self.method())
            .field("min_eigenvalue", &self.min_eigenvalue)
            .finish()
    }
}

impl FbmSampler {
    pub fn new(grid: FbmGrid, hurst: HurstParam) -> Result<Self> {
        Self::with_options(grid, hurst, SamplerOptions::default())
    }

    pub fn with_options(grid: FbmGrid, hurst: HurstParam, opts: SamplerOptions) -> Result<Self> {
        let n = grid.n_steps();
        let mut min_eigenvalue = None;
        if opts.preference == MethodPreference::Auto {
            let m = 2 * n;
            let mut row: Vec<Complex<f64>> = (0..m)
                .map(|k| {
                    let lag = if k <= n { k } else { m - k };
                    Complex::new(fgn_autocovariance(lag, hurst), 0.0)
                })
                .collect();
            let mut planner = FftPlanner::new();
            let fft = planner.plan_fft_forward(m);
            fft.process(&mut row);
            let min = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
            min_eigenvalue = Some(min);
            if min >= -opts.eigen_tolerance {
                let scaled_roots = row
                    .iter()
                    .map(|c| (c.re.max(0.0) / m as f64).sqrt())
                    .collect();
                return Ok(Self {
                    grid,
                    hurst,
                    min_eigenvalue,
                    backend: Backend::Circulant { scaled_roots, fft },
                });
            }
            log::warn!(
                "circulant embedding has eigenvalue {min:e} for n = {n}, H = {}; using Cholesky",
                hurst.value()
            );
        }
        if n > opts.cholesky_cap {
            return Err(Error::CholeskyCapExceeded {
                n_steps: n,
                cap: opts.cholesky_cap,
            });
        }
        let lower = toeplitz_cholesky(n, hurst)?;
        Ok(Self {
            grid,
            hurst,
            min_eigenvalue,
            backend: Backend::Cholesky { lower },
        })
    }

    pub fn grid(&self) -> FbmGrid {
        self.grid
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    pub fn method(&self) -> GenerationMethod {
        match self.backend {
            Backend::Circulant { .. } => GenerationMethod::CirculantEmbedding,
            Backend::Cholesky { .. } => GenerationMethod::Cholesky,
        }
    }

    /// Smallest circulant eigenvalue, when the embedding was attempted.
    pub fn min_eigenvalue(&self) -> Option<f64> {
        self.min_eigenvalue
    }

    /// Unit-lattice fGn sample of length `n_steps`.
    fn unit_noise(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = self.grid.n_steps();
        match &self.backend {
            Backend::Circulant { scaled_roots, fft } => {
                let mut buf: Vec<Complex<f64>> = scaled_roots
                    .iter()
                    .map(|&r| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex::new(r * re, r * im)
                    })
                    .collect();
                fft.process(&mut buf);
                buf.truncate(n);
                buf.into_iter().map(|c| c.re).collect()
            }
            Backend::Cholesky { lower } => {
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let mut out = vec![0.0; n];
                let mut offset = 0;
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &lower[offset..offset + i + 1];
                    *o = row.iter().zip(&z).map(|(l, z)| l * z).sum();
                    offset += i + 1;
                }
                out
            }
        }
    }

    /// Path number `index` of the batch keyed by `seed`.
    pub fn sample(&self, seed: u64, index: u64) -> FbmPath {
        let mut rng = path_rng(seed, index);
        let scale = self.grid.step().powf(self.hurst.value());
        let noise = self.unit_noise(&mut rng);
        let mut values = Vec::with_capacity(noise.len() + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for dz in noise {
            acc += scale * dz;
            values.push(acc);
        }
        FbmPath {
            grid: self.grid,
            values,
        }
    }

    /// Paths `0..count` of the batch keyed by `seed`.
    pub fn sample_many(&self, seed: u64, count: usize) -> Vec<FbmPath> {
        (0..count as u64)
            .into_par_iter()
            .map(|i| self.sample(seed, i))
            .collect()
    }
}

/// A batch of paths together with the generator that produced them.
#[derive(Clone, Debug)]
pub struct FbmBatch {
    pub paths: Vec<FbmPath>,
    pub method: GenerationMethod,
}

/// `count` independent fBm paths, deterministic in `(grid, h, count, seed)`.
pub fn sample_paths(grid: FbmGrid, h: HurstParam, count: usize, seed: u64) -> Result<FbmBatch> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let sampler = FbmSampler::new(grid, h)?;
    Ok(FbmBatch {
        paths: sampler.sample_many(seed, count),
        method: sampler.method(),
    })
}

/// RNG for stream `index` under `seed`; streams never overlap.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Mixes a salt into a seed (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn toeplitz_cholesky(n: usize, h: HurstParam) -> Result<Vec<f64>> {
    let gamma: Vec<f64> = (0..n).map(|k| fgn_autocovariance(k, h)).collect();
    let mut lower = vec![0.0; n * (n + 1) / 2];
    let start = |i: usize| i * (i + 1) / 2;
    for i in 0..n {
        for j in 0..=i {
            let (ri, rj) = (start(i), start(j));
            let dot: f64 = lower[ri..ri + j]
                .iter()
                .zip(&lower[rj..rj + j])
                .map(|(a, b)| a * b)
                .sum();
            let v = gamma[i - j] - dot;
            if i == j {
                if v <= 0.0 {
                    return Err(Error::NotPositiveDefinite(i));
                }
                lower[ri + i] = v.sqrt();
            } else {
                lower[ri + j] = v / lower[rj + j];
            }
        }
    }
    Ok(lower)
}
