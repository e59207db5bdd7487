//! Confining potentials and pairwise interaction kernels.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::ParticleEnsemble;
use crate::error::{invalid, Error, Result};
use crate::names::parse_tagged;

/// Regularity constants of a kernel: `|K| <= bound`, `K` is `lipschitz`-Lipschitz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMetadata {
    pub bound: f64,
    pub lipschitz: f64,
}

/// A pairwise force `K(x_j - x_i)` acting on particle `i`.
pub trait PairKernel: Send + Sync {
    /// Add `K(displacement)` to `out`.
    fn accumulate(&self, displacement: &[f64], out: &mut [f64]);

    /// Scalar form for one-dimensional states.
    fn evaluate_1d(&self, displacement: f64) -> f64 {
        let mut out = [0.0];
        self.accumulate(&[displacement], &mut out);
        out[0]
    }

    fn metadata(&self) -> KernelMetadata;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InteractionKernel {
    Zero,
    /// `K(x) = x / (1 + |x|²)`.
    SmoothBounded,
    /// Velocity alignment `θ Φ(|x_j - x_i|)(v_j - v_i)`, `Φ(r) = (1 + r²)^-β`.
    /// Exerts no positional force; it drives second-order dynamics.
    CuckerSmale {
        beta: f64,
        theta: f64,
    },
}

impl InteractionKernel {
    pub fn is_second_order(&self) -> bool {
        matches!(self, InteractionKernel::CuckerSmale { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if let InteractionKernel::CuckerSmale { beta, theta } = *self {
            if !(beta >= 0.0 && beta.is_finite()) {
                return invalid(format!("cucker_smale beta must be >= 0, got {beta}"));
            }
            if !(theta >= 0.0 && theta.is_finite()) {
                return invalid(format!("cucker_smale theta must be >= 0, got {theta}"));
            }
        }
        Ok(())
    }

    /// Communication weight `Φ(r)` of the alignment kernel; `0` for other families.
    #[inline]
    pub fn alignment_weight(&self, r: f64) -> f64 {
        match *self {
            InteractionKernel::CuckerSmale { beta, .. } => (1.0 + r * r).powf(-beta),
            _ => 0.0,
        }
    }
}

impl PairKernel for InteractionKernel {
    #[inline]
    fn accumulate(&self, displacement: &[f64], out: &mut [f64]) {
        if let InteractionKernel::SmoothBounded = self {
            let r2: f64 = displacement.iter().map(|d| d * d).sum();
            let s = 1.0 / (1.0 + r2);
            for (o, d) in out.iter_mut().zip(displacement) {
                *o += d * s;
            }
        }
    }

    #[inline]
    fn evaluate_1d(&self, d: f64) -> f64 {
        match self {
            InteractionKernel::SmoothBounded => d / (1.0 + d * d),
            _ => 0.0,
        }
    }

    fn metadata(&self) -> KernelMetadata {
        match self {
            InteractionKernel::SmoothBounded => KernelMetadata {
                bound: 0.5,
                lipschitz: 1.0,
            },
            _ => KernelMetadata {
                bound: 0.0,
                lipschitz: 0.0,
            },
        }
    }
}

impl fmt::Display for InteractionKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InteractionKernel::Zero => write!(f, "zero"),
            InteractionKernel::SmoothBounded => write!(f, "smooth_bounded"),
            InteractionKernel::CuckerSmale { beta, theta } => {
                write!(f, "cucker_smale:beta={beta},theta={theta}")
            }
        }
    }
}

impl FromStr for InteractionKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = parse_tagged(s);
        let kernel = match t.tag {
            "zero" => {
                t.keyed(&[])?;
                InteractionKernel::Zero
            }
            "smooth_bounded" => {
                t.keyed(&[])?;
                InteractionKernel::SmoothBounded
            }
            "cucker_smale" => {
                const KEYS: &[&str] = &["beta", "theta"];
                InteractionKernel::CuckerSmale {
                    beta: t.require(KEYS, "beta")?,
                    theta: t.get(KEYS, "theta")?.unwrap_or(1.0),
                }
            }
            other => return Err(Error::InvalidConfig(format!("unknown kernel `{other}`"))),
        };
        kernel.validate()?;
        Ok(kernel)
    }
}

impl TryFrom<String> for InteractionKernel {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<InteractionKernel> for String {
    fn from(k: InteractionKernel) -> String {
        k.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ConfiningPotential {
    None,
    /// `V(x) = a|x|²/2`, so `∇V(x) = a x`.
    Quadratic {
        a: f64,
    },
}

impl ConfiningPotential {
    /// Strong convexity constant `λ_V`.
    pub fn convexity(&self) -> f64 {
        match self {
            ConfiningPotential::None => 0.0,
            ConfiningPotential::Quadratic { a } => *a,
        }
    }

    /// Lipschitz constant `L_V` of the gradient.
    pub fn gradient_lipschitz(&self) -> f64 {
        self.convexity()
    }

    /// Coefficient `a` of the linear restoring force.
    #[inline]
    pub fn stiffness(&self) -> f64 {
        self.convexity()
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let a = self.stiffness();
        x.iter().map(|xi| a * xi).collect()
    }
}

impl fmt::Display for ConfiningPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfiningPotential::None => write!(f, "none"),
            ConfiningPotential::Quadratic { a } => write!(f, "quadratic:a={a}"),
        }
    }
}

impl FromStr for ConfiningPotential {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = parse_tagged(s);
        match t.tag {
            "none" => {
                t.keyed(&[])?;
                Ok(ConfiningPotential::None)
            }
            "quadratic" => {
                let a = t.require(&["a"], "a")?;
                if !(a >= 0.0 && a.is_finite()) {
                    return invalid(format!("quadratic stiffness must be >= 0, got {a}"));
                }
                Ok(ConfiningPotential::Quadratic { a })
            }
            other => Err(Error::InvalidConfig(format!("unknown potential `{other}`"))),
        }
    }
}

impl TryFrom<String> for ConfiningPotential {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ConfiningPotential> for String {
    fn from(p: ConfiningPotential) -> String {
        p.to_string()
    }
}

pub fn grad_potential(pot: &ConfiningPotential, x: &[f64]) -> Vec<f64> {
    pot.grad(x)
}

/// Whether the declared constants satisfy `λ_V > 2 L_K`, the contraction
/// condition behind uniform-in-time estimates. Logs a warning (once per
/// process) when violated.
pub fn check_contraction(pot: &ConfiningPotential, kernel: &impl PairKernel) -> bool {
    static WARNED: std::sync::atomic::AtomicBool = std::sync::atomic::AtomicBool::new(false);
    let lk = kernel.metadata().lipschitz;
    let ok = pot.convexity() - 2.0 * lk > 0.0;
    if !ok && lk > 0.0 && !WARNED.swap(true, std::sync::atomic::Ordering::Relaxed) {
        log::warn!(
            "potential convexity {} does not dominate 2 x kernel Lipschitz constant {lk}",
            pot.convexity()
        );
    }
    ok
}

/// Measured `(max |K|, max difference quotient)` on a 1-d grid over `[-radius, radius]`.
pub fn spot_check_1d(kernel: &impl PairKernel, radius: f64, points: usize) -> (f64, f64) {
    let h = 2.0 * radius / (points - 1) as f64;
    let vals: Vec<f64> = (0..points)
        .map(|k| kernel.evaluate_1d(-radius + h * k as f64))
        .collect();
    let bound = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lip = vals
        .windows(2)
        .fold(0.0f64, |m, w| m.max((w[1] - w[0]).abs() / h));
    (bound, lip)
}

/// `(1/(N-1)) Σ_{j≠i} K(x_j - x_i)`; zero when `N = 1`.
pub fn full_mean_force<K: PairKernel + ?Sized>(
    i: usize,
    ensemble: &ParticleEnsemble,
    kernel: &K,
) -> Result<Vec<f64>> {
    let n = ensemble.n_particles();
    if i >= n {
        return invalid(format!("particle {i} out of range for {n} particles"));
    }
    let mut out = vec![0.0; ensemble.dim];
    let all: Vec<usize> = (0..n).collect();
    group_mean_force_into(i, &all, &ensemble.positions, ensemble.dim, kernel, &mut out);
    Ok(out)
}

/// Mean force of the listed `mates` on particle `i` (which is skipped),
/// normalized by `1/(mates.len() - 1)`. Writes into `out`.
#[inline]
pub(crate) fn group_mean_force_into<K: PairKernel + ?Sized>(
    i: usize,
    mates: &[usize],
    positions: &[f64],
    dim: usize,
    kernel: &K,
    out: &mut [f64],
) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let others = mates.len().saturating_sub(1);
    if others == 0 {
        return;
    }
    let w = 1.0 / others as f64;
    if dim == 1 {
        let xi = positions[i];
        let s: f64 = mates
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| kernel.evaluate_1d(positions[j] - xi))
            .sum();
        out[0] = w * s;
        return;
    }
    let xi = &positions[i * dim..(i + 1) * dim];
    let mut d = vec![0.0; dim];
    for &j in mates.iter().filter(|&&j| j != i) {
        for ((dk, xj), xi) in d.iter_mut().zip(&positions[j * dim..(j + 1) * dim]).zip(xi) {
            *dk = xj - xi;
        }
        kernel.accumulate(&d, out);
    }
    out.iter_mut().for_each(|o| *o *= w);
}

/// Full mean force on every particle; returns the number of kernel evaluations.
pub(crate) fn full_mean_forces_into<K: PairKernel + ?Sized>(
    positions: &[f64],
    dim: usize,
    kernel: &K,
    out: &mut [f64],
    parallel: bool,
) -> u64 {
    let n = positions.len() / dim;
    if n < 2 {
        out.iter_mut().for_each(|o| *o = 0.0);
        return 0;
    }
    let w = 1.0 / (n - 1) as f64;
    let row = |i: usize, o: &mut [f64]| {
        if dim == 1 {
            // Same summation order as a single batch holding every index,
            // so the two paths agree bitwise.
            let xi = positions[i];
            let s: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| kernel.evaluate_1d(positions[j] - xi))
                .sum();
            o[0] = w * s;
        } else {
            let all: Vec<usize> = (0..n).collect();
            group_mean_force_into(i, &all, positions, dim, kernel, o);
        }
    };
    if parallel {
        out.par_chunks_exact_mut(dim)
            .enumerate()
            .for_each(|(i, o)| row(i, o));
    } else {
        out.chunks_exact_mut(dim)
            .enumerate()
            .for_each(|(i, o)| row(i, o));
    }
    (n * (n - 1)) as u64
}
