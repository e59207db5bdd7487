//! Initial particle laws. The semicircle law is sampled with a random-walk
//! Metropolis–Hastings chain; an exact inverse-CDF sampler is kept alongside
//! for cross-checking.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::names::parse_tagged;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InitialLaw {
    /// Density `(2 / (π r²)) √(r² - x²)` on `|x| <= r`.
    Semicircle {
        radius: f64,
    },
    /// Density proportional to `ρ₀(scale · x)` with `ρ₀` the radius-2
    /// semicircle, i.e. a semicircle of radius `2 / scale`.
    ScaledSemicircle {
        scale: f64,
    },
    PointMass {
        x: f64,
    },
    UniformBox {
        lo: f64,
        hi: f64,
    },
}

impl InitialLaw {
    pub const STANDARD_SEMICIRCLE: InitialLaw = InitialLaw::Semicircle { radius: 2.0 };

    pub fn validate(&self) -> Result<()> {
        match *self {
            InitialLaw::Semicircle { radius } if !(radius > 0.0 && radius.is_finite()) => {
                invalid(format!("semicircle radius must be positive, got {radius}"))
            }
            InitialLaw::ScaledSemicircle { scale } if !(scale > 0.0 && scale.is_finite()) => {
                invalid(format!("semicircle scale must be positive, got {scale}"))
            }
            InitialLaw::PointMass { x } if !x.is_finite() => invalid("point mass must be finite"),
            InitialLaw::UniformBox { lo, hi } if !(lo < hi && lo.is_finite() && hi.is_finite()) => {
                invalid(format!("uniform box needs lo < hi, got [{lo}, {hi}]"))
            }
            _ => Ok(()),
        }
    }

    /// Radius of the semicircle this law reduces to, if any.
    pub fn semicircle_radius(&self) -> Option<f64> {
        match *self {
            InitialLaw::Semicircle { radius } => Some(radius),
            InitialLaw::ScaledSemicircle { scale } => Some(2.0 / scale),
            _ => None,
        }
    }
}

impl fmt::Display for InitialLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialLaw::Semicircle { radius } => write!(f, "semicircle:r={radius}"),
            InitialLaw::ScaledSemicircle { scale } => write!(f, "semicircle_scaled:s={scale}"),
            InitialLaw::PointMass { x } => write!(f, "point:x={x}"),
            InitialLaw::UniformBox { lo, hi } => write!(f, "uniform:{lo},{hi}"),
        }
    }
}

impl FromStr for InitialLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = parse_tagged(s);
        let law = match t.tag {
            "semicircle" => InitialLaw::Semicircle {
                radius: t.get(&["r"], "r")?.unwrap_or(2.0),
            },
            "semicircle_scaled" => InitialLaw::ScaledSemicircle {
                scale: t.require(&["s"], "s")?,
            },
            "point" => InitialLaw::PointMass {
                x: t.require(&["x"], "x")?,
            },
            "uniform" => match t.positional()?[..] {
                [lo, hi] => InitialLaw::UniformBox { lo, hi },
                _ => return invalid("uniform law is written `uniform:<lo>,<hi>`"),
            },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown initial law `{other}`"
                )))
            }
        };
        law.validate()?;
        Ok(law)
    }
}

impl TryFrom<String> for InitialLaw {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<InitialLaw> for String {
    fn from(l: InitialLaw) -> String {
        l.to_string()
    }
}

pub fn semicircle_density(x: f64, radius: f64) -> f64 {
    if x.abs() > radius {
        0.0
    } else {
        2.0 / (PI * radius * radius) * (radius * radius - x * x).sqrt()
    }
}

/// Closed-form CDF of the semicircle law.
pub fn semicircle_cdf(x: f64, radius: f64) -> f64 {
    if x <= -radius {
        return 0.0;
    }
    if x >= radius {
        return 1.0;
    }
    let u = x / radius;
    0.5 + (u * (1.0 - u * u).sqrt() + u.asin()) / PI
}

/// Random-walk Metropolis–Hastings tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhSettings {
    /// Proposal standard deviation, in units of the support radius divided by 2.
    pub step: f64,
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for MhSettings {
    fn default() -> Self {
        Self {
            step: 0.5,
            burn_in: 1000,
            thin: 10,
        }
    }
}

/// Draw `n` samples from a semicircle of the given radius by random-walk
/// Metropolis–Hastings started at the mode.
pub fn metropolis_semicircle<R: Rng + ?Sized>(
    radius: f64,
    n: usize,
    settings: MhSettings,
    rng: &mut R,
) -> Vec<f64> {
    let step = settings.step * radius / 2.0;
    let r2 = radius * radius;
    // Unnormalized density squared, to skip the square root in the ratio.
    let weight = |x: f64| r2 - x * x;
    let mut x = 0.0f64;
    let mut wx = weight(x);
    let mut out = Vec::with_capacity(n);
    let total = settings.burn_in + n * settings.thin.max(1);
    for k in 1..=total {
        let y = x + step * rng.sample::<f64, _>(StandardNormal);
        let wy = weight(y);
        if wy > 0.0 {
            let u: f64 = rng.random();
            if u * u * wx < wy {
                x = y;
                wx = wy;
            }
        }
        if k > settings.burn_in && (k - settings.burn_in).is_multiple_of(settings.thin.max(1)) {
            out.push(x);
        }
    }
    out
}

/// Exact semicircle sampler by inverting the closed-form CDF.
pub fn inverse_cdf_semicircle<R: Rng + ?Sized>(radius: f64, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let target: f64 = rng.random();
            let (mut lo, mut hi) = (-radius, radius);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if semicircle_cdf(mid, radius) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

pub fn sample_initial<R: Rng + ?Sized>(
    law: &InitialLaw,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    law.validate()?;
    if n == 0 {
        return invalid("need at least one sample");
    }
    Ok(match *law {
        InitialLaw::Semicircle { .. } | InitialLaw::ScaledSemicircle { .. } => {
            let radius = law.semicircle_radius().unwrap_or(2.0);
            metropolis_semicircle(radius, n, MhSettings::default(), rng)
        }
        InitialLaw::PointMass { x } => vec![x; n],
        InitialLaw::UniformBox { lo, hi } => (0..n).map(|_| rng.random_range(lo..hi)).collect(),
    })
}
