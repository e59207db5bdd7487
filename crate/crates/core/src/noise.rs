//! Lévy noise: triplet description, exact increment samplers and the
//! per-particle block sampler that drives every integrator.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::distr::Open01;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::names::parse_tagged;
use crate::rng::{substreams, Domain};

/// Jump component of a Lévy triplet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum JumpPart {
    None,
    /// Rotationally invariant stable jumps with symbol `-scale^alpha |u|^alpha`.
    AlphaStable {
        alpha: f64,
        scale: f64,
    },
    /// Jumps at rate `rate_lambda` with Normal(0, jump_sdev²) sizes.
    CompoundPoisson {
        rate_lambda: f64,
        jump_sdev: f64,
    },
}

/// A Lévy process described by its characteristics `(b, σ², ν)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyNoiseSpec {
    pub drift_b: f64,
    pub gaussian_sigma: f64,
    pub jump_part: JumpPart,
}

impl LevyNoiseSpec {
    pub const NONE: LevyNoiseSpec = LevyNoiseSpec {
        drift_b: 0.0,
        gaussian_sigma: 0.0,
        jump_part: JumpPart::None,
    };

    pub fn brownian(sigma: f64) -> Self {
        Self {
            gaussian_sigma: sigma,
            ..Self::NONE
        }
    }

    pub fn alpha_stable(alpha: f64) -> Self {
        Self {
            jump_part: JumpPart::AlphaStable { alpha, scale: 1.0 },
            ..Self::NONE
        }
    }

    /// Characteristics `(0, σ², λ·N(0,1))` of the flocking experiments.
    pub fn brownian_with_jumps(sigma: f64, rate_lambda: f64) -> Self {
        Self {
            drift_b: 0.0,
            gaussian_sigma: sigma,
            jump_part: JumpPart::CompoundPoisson {
                rate_lambda,
                jump_sdev: 1.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.drift_b.is_finite() {
            return invalid("noise drift must be finite");
        }
        if !(self.gaussian_sigma >= 0.0 && self.gaussian_sigma.is_finite()) {
            return invalid(format!(
                "gaussian sigma must be >= 0, got {}",
                self.gaussian_sigma
            ));
        }
        match self.jump_part {
            JumpPart::None => {}
            JumpPart::AlphaStable { alpha, scale } => {
                if !(alpha > 0.0 && alpha < 2.0) {
                    return invalid(format!("stable index must lie in (0, 2), got {alpha}"));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return invalid(format!("stable scale must be positive, got {scale}"));
                }
                if alpha <= 1.0 {
                    log::warn!("stable index {alpha} <= 1: no finite first moment, error bounds do not apply");
                }
            }
            JumpPart::CompoundPoisson {
                rate_lambda,
                jump_sdev,
            } => {
                if !(rate_lambda >= 0.0 && rate_lambda.is_finite()) {
                    return invalid(format!("jump rate must be >= 0, got {rate_lambda}"));
                }
                if !(jump_sdev > 0.0 && jump_sdev.is_finite()) {
                    return invalid(format!("jump sdev must be positive, got {jump_sdev}"));
                }
            }
        }
        Ok(())
    }

    /// Validate against the state dimension as well.
    pub fn validate_for_dim(&self, dim: usize) -> Result<()> {
        self.validate()?;
        if dim > 1 && matches!(self.jump_part, JumpPart::AlphaStable { .. }) {
            return invalid("stable jumps are only supported in one dimension");
        }
        Ok(())
    }

    /// Closed-form characteristic function of `L(t)`, one coordinate.
    pub fn char_function(&self, u: f64, t: f64) -> Complex64 {
        let mut exponent = Complex64::new(
            -0.5 * self.gaussian_sigma * self.gaussian_sigma * u * u,
            self.drift_b * u,
        );
        match self.jump_part {
            JumpPart::None => {}
            JumpPart::AlphaStable { alpha, scale } => exponent.re -= (scale * u.abs()).powf(alpha),
            JumpPart::CompoundPoisson {
                rate_lambda,
                jump_sdev,
            } => exponent.re += rate_lambda * ((-0.5 * jump_sdev * jump_sdev * u * u).exp() - 1.0),
        }
        (exponent * t).exp()
    }
}

impl Default for LevyNoiseSpec {
    fn default() -> Self {
        Self::NONE
    }
}

impl fmt::Display for JumpPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpPart::None => write!(f, "none"),
            JumpPart::AlphaStable { alpha, scale } => {
                write!(f, "alpha_stable:alpha={alpha},scale={scale}")
            }
            JumpPart::CompoundPoisson {
                rate_lambda,
                jump_sdev,
            } => {
                write!(f, "compound_poisson:rate={rate_lambda},sdev={jump_sdev}")
            }
        }
    }
}

impl FromStr for JumpPart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = parse_tagged(s);
        match t.tag {
            "none" => {
                t.keyed(&[])?;
                Ok(JumpPart::None)
            }
            "alpha_stable" | "stable" => {
                const KEYS: &[&str] = &["alpha", "scale"];
                Ok(JumpPart::AlphaStable {
                    alpha: t.require(KEYS, "alpha")?,
                    scale: t.get(KEYS, "scale")?.unwrap_or(1.0),
                })
            }
            "compound_poisson" => {
                const KEYS: &[&str] = &["rate", "sdev"];
                Ok(JumpPart::CompoundPoisson {
                    rate_lambda: t.require(KEYS, "rate")?,
                    jump_sdev: t.get(KEYS, "sdev")?.unwrap_or(1.0),
                })
            }
            other => Err(Error::InvalidConfig(format!(
                "unknown jump family `{other}`"
            ))),
        }
    }
}

impl TryFrom<String> for JumpPart {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<JumpPart> for String {
    fn from(j: JumpPart) -> String {
        j.to_string()
    }
}

/// Standard symmetric stable variate, characteristic function `exp(-|u|^alpha)`,
/// by the Chambers–Mallows–Stuck transform of a uniform angle and an
/// exponential. Valid on `(0, 2]`; at `alpha = 2` it is Normal(0, 2).
fn standard_symmetric_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.sample::<f64, _>(Open01) - 0.5);
    let w = -rng.sample::<f64, _>(Open01).ln();
    if alpha == 1.0 {
        return v.tan();
    }
    let cos_v = v.cos();
    (alpha * v).sin() / cos_v.powf(1.0 / alpha)
        * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// One increment of the standard symmetric α-stable process over `dt`:
/// `dt^(1/alpha) · S` with `S` standard.
pub fn sample_alpha_stable_increment<R: Rng + ?Sized>(
    alpha: f64,
    dt: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return invalid(format!("stable index must lie in (0, 2], got {alpha}"));
    }
    if !(dt >= 0.0 && dt.is_finite()) {
        return invalid(format!("time step must be >= 0, got {dt}"));
    }
    if dt == 0.0 {
        return Ok(0.0);
    }
    Ok(dt.powf(1.0 / alpha) * standard_symmetric_stable(alpha, rng))
}

/// One increment of a compound Poisson process with Gaussian jumps over `dt`.
pub fn sample_compound_poisson_increment<R: Rng + ?Sized>(
    rate_lambda: f64,
    jump_sdev: f64,
    dt: f64,
    rng: &mut R,
) -> Result<f64> {
    let jumps = JumpSampler::new(
        JumpPart::CompoundPoisson {
            rate_lambda,
            jump_sdev,
        },
        dt,
    )?;
    Ok(jumps.sample(rng))
}

/// Jump sampler with its per-`dt` constants precomputed.
#[derive(Debug, Clone)]
enum JumpSampler {
    None,
    Stable { alpha: f64, factor: f64 },
    Poisson { count: Poisson<f64>, sdev: f64 },
}

impl JumpSampler {
    fn new(part: JumpPart, dt: f64) -> Result<Self> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return invalid(format!("time step must be >= 0, got {dt}"));
        }
        Ok(match part {
            JumpPart::None => JumpSampler::None,
            JumpPart::AlphaStable { alpha, scale } => {
                if !(alpha > 0.0 && alpha <= 2.0) {
                    return invalid(format!("stable index must lie in (0, 2], got {alpha}"));
                }
                if dt == 0.0 {
                    JumpSampler::None
                } else {
                    JumpSampler::Stable {
                        alpha,
                        factor: scale * dt.powf(1.0 / alpha),
                    }
                }
            }
            JumpPart::CompoundPoisson {
                rate_lambda,
                jump_sdev,
            } => {
                if !(rate_lambda >= 0.0 && rate_lambda.is_finite()) {
                    return invalid(format!("jump rate must be >= 0, got {rate_lambda}"));
                }
                if !(jump_sdev > 0.0) {
                    return invalid(format!("jump sdev must be positive, got {jump_sdev}"));
                }
                let mean = rate_lambda * dt;
                if mean == 0.0 {
                    JumpSampler::None
                } else {
                    let count = Poisson::new(mean).map_err(|e| {
                        Error::InvalidParameter(format!("poisson mean {mean}: {e}"))
                    })?;
                    JumpSampler::Poisson {
                        count,
                        sdev: jump_sdev,
                    }
                }
            }
        })
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JumpSampler::None => 0.0,
            JumpSampler::Stable { alpha, factor } => {
                factor * standard_symmetric_stable(*alpha, rng)
            }
            JumpSampler::Poisson { count, sdev } => {
                let m = count.sample(rng) as u64;
                (0..m)
                    .map(|_| sdev * rng.sample::<f64, _>(StandardNormal))
                    .sum()
            }
        }
    }
}

/// Samples `L(t + dt) - L(t)` for one coordinate of a fixed spec.
#[derive(Debug, Clone)]
pub struct IncrementSampler {
    drift: f64,
    diffusion: f64,
    jumps: JumpSampler,
}

impl IncrementSampler {
    pub fn new(spec: &LevyNoiseSpec, dt: f64) -> Result<Self> {
        spec.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return invalid(format!("time step must be positive, got {dt}"));
        }
        Ok(Self {
            drift: spec.drift_b * dt,
            diffusion: spec.gaussian_sigma * dt.sqrt(),
            jumps: JumpSampler::new(spec.jump_part, dt)?,
        })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut x = self.drift;
        if self.diffusion != 0.0 {
            x += self.diffusion * rng.sample::<f64, _>(StandardNormal);
        }
        x + self.jumps.sample(rng)
    }
}

/// Per-particle increments over one fine step, stored row-major `N × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrementBlock {
    pub increments: Vec<f64>,
    pub dim: usize,
    pub dt: f64,
}

impl NoiseIncrementBlock {
    pub fn zeros(n_particles: usize, dim: usize, dt: f64) -> Self {
        Self {
            increments: vec![0.0; n_particles * dim],
            dim,
            dt,
        }
    }

    pub fn n_particles(&self) -> usize {
        self.increments.len() / self.dim.max(1)
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.increments[i * self.dim..(i + 1) * self.dim]
    }

    /// FNV-1a over the bit patterns, for checking that two consumers saw the
    /// same noise.
    pub fn checksum(&self) -> u64 {
        self.increments
            .iter()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, x| {
                (h ^ x.to_bits()).wrapping_mul(0x0000_0100_0000_01b3)
            })
    }
}

/// Noise source for an ensemble: one independent stream per particle.
///
/// The `k`-th block drawn depends only on the seed and `k`, so two dynamics
/// fed from equally-seeded sources see identical noise paths.
#[derive(Debug, Clone)]
pub struct ParticleNoise {
    sampler: IncrementSampler,
    streams: Vec<ChaCha8Rng>,
    dim: usize,
    dt: f64,
    parallel: bool,
}

impl ParticleNoise {
    pub fn new(
        spec: &LevyNoiseSpec,
        n_particles: usize,
        dim: usize,
        dt: f64,
        seed: u64,
    ) -> Result<Self> {
        if n_particles == 0 || dim == 0 {
            return invalid("noise needs at least one particle and one dimension");
        }
        spec.validate_for_dim(dim)?;
        Ok(Self {
            sampler: IncrementSampler::new(spec, dt)?,
            streams: substreams(seed, Domain::Noise, n_particles),
            dim,
            dt,
            parallel: false,
        })
    }

    /// Sample particles on the rayon pool. Output is unchanged.
    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn block(&self) -> NoiseIncrementBlock {
        NoiseIncrementBlock::zeros(self.streams.len(), self.dim, self.dt)
    }

    pub fn fill(&mut self, block: &mut NoiseIncrementBlock) {
        debug_assert_eq!(block.increments.len(), self.streams.len() * self.dim);
        block.dt = self.dt;
        block.dim = self.dim;
        let sampler = &self.sampler;
        if self.parallel {
            self.streams
                .par_iter_mut()
                .zip(block.increments.par_chunks_exact_mut(self.dim))
                .for_each(|(rng, row)| row.iter_mut().for_each(|x| *x = sampler.sample(rng)));
        } else {
            for (rng, row) in self
                .streams
                .iter_mut()
                .zip(block.increments.chunks_exact_mut(self.dim))
            {
                for x in row {
                    *x = sampler.sample(rng);
                }
            }
        }
    }

    pub fn next_block(&mut self) -> NoiseIncrementBlock {
        let mut b = self.block();
        self.fill(&mut b);
        b
    }
}

/// One block of increments for `n_particles` particles, each from its own
/// substream of `seed`.
pub fn sample_increment_block(
    spec: &LevyNoiseSpec,
    n_particles: usize,
    dim: usize,
    dt: f64,
    seed: u64,
) -> Result<NoiseIncrementBlock> {
    Ok(ParticleNoise::new(spec, n_particles, dim, dt, seed)?.next_block())
}

/// `(1/n) Σ exp(i u x_k)`.
pub fn empirical_char_function(samples: &[f64], u: f64) -> Result<Complex64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("characteristic function of no samples"));
    }
    let (re, im) = samples.iter().fold((0.0, 0.0), |(re, im), &x| {
        let (s, c) = (u * x).sin_cos();
        (re + c, im + s)
    });
    let n = samples.len() as f64;
    Ok(Complex64::new(re / n, im / n))
}
