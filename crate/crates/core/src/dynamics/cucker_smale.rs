//! Stochastic Cucker–Smale flocking:
//!
//! ```text
//! dx_i = v_i dt
//! dv_i = (θ/N) Σ_j Φ(|x_j - x_i|)(v_j - v_i) dt + (v_i(t-) - v_c(t)) dL_i
//! ```
//!
//! The batched variant replaces `θ/N Σ_j` by `θ/(p-1) Σ` over batch-mates.
//! The noise term is never batched.

use rayon::prelude::*;

use crate::batching::BatchPartition;
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::forces::InteractionKernel;
use crate::noise::NoiseIncrementBlock;

use super::{check_block, SimulationConfig};

fn alignment(
    i: usize,
    others: impl Iterator<Item = usize>,
    x: &[f64],
    v: &[f64],
    dim: usize,
    kernel: &InteractionKernel,
    out: &mut [f64],
) {
    let xi = &x[i * dim..(i + 1) * dim];
    let vi = &v[i * dim..(i + 1) * dim];
    for j in others.filter(|&j| j != i) {
        let xj = &x[j * dim..(j + 1) * dim];
        let r = xi
            .iter()
            .zip(xj)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let w = kernel.alignment_weight(r);
        for ((o, a), b) in out.iter_mut().zip(vi).zip(&v[j * dim..(j + 1) * dim]) {
            *o += w * (b - a);
        }
    }
}

/// In-place Euler step. `partition = None` is the full model.
pub(crate) fn advance(
    state: &mut ParticleEnsemble,
    cfg: &SimulationConfig,
    partition: Option<&BatchPartition>,
    noise: &NoiseIncrementBlock,
    drift: &mut Vec<f64>,
    step: u64,
) -> Result<u64> {
    let InteractionKernel::CuckerSmale { theta, .. } = cfg.kernel else {
        return Err(Error::InvalidConfig(
            "second-order step needs a cucker_smale kernel".into(),
        ));
    };
    let dim = state.dim;
    let n = state.n_particles();
    let v = state
        .velocities
        .as_mut()
        .ok_or_else(|| Error::InvalidParameter("second-order step needs velocities".into()))?;
    if let Some(p) = partition {
        if p.n_particles() != n {
            return Err(Error::ShapeMismatch(format!(
                "partition of {} indices for {n} particles",
                p.n_particles()
            )));
        }
    }

    // Mean velocity as v_0 + mean(v_i - v_0): exact when all velocities agree,
    // so consensus stays absorbing.
    let mut vc = vec![0.0; dim];
    for row in v.chunks_exact(dim) {
        for ((c, a), b) in vc.iter_mut().zip(row).zip(&v[..dim]) {
            *c += a - b;
        }
    }
    for (c, b) in vc.iter_mut().zip(&v[..dim]) {
        *c = b + *c / n as f64;
    }

    drift.clear();
    drift.resize(n * dim, 0.0);
    let x = &state.positions;
    let kernel = &cfg.kernel;
    let (weight, evals) = match partition {
        None => (theta / n as f64, (n * (n - 1)) as u64),
        Some(p) => (
            theta / (p.batch_size() - 1) as f64,
            (n * (p.batch_size() - 1)) as u64,
        ),
    };
    let vr: &[f64] = v;
    let row = |i: usize, out: &mut [f64]| {
        match partition {
            None => alignment(i, 0..n, x, vr, dim, kernel, out),
            Some(p) => alignment(i, p.mates(i).iter().copied(), x, vr, dim, kernel, out),
        }
        out.iter_mut().for_each(|o| *o *= weight);
    };
    if cfg.parallel {
        drift
            .par_chunks_exact_mut(dim)
            .enumerate()
            .for_each(|(i, o)| row(i, o));
    } else {
        drift
            .chunks_exact_mut(dim)
            .enumerate()
            .for_each(|(i, o)| row(i, o));
    }

    let tau = cfg.fine_step;
    for (((xk, vk), dk), (k, dl)) in state
        .positions
        .iter_mut()
        .zip(v.iter_mut())
        .zip(drift.iter())
        .zip(noise.increments.iter().enumerate())
    {
        *xk += tau * *vk;
        *vk += tau * dk + (*vk - vc[k % dim]) * dl;
    }
    state.t = (step + 1) as f64 * tau;
    state.check_finite(step)?;
    Ok(evals)
}

/// One fine Euler step of the stochastic Cucker–Smale system, batched when a
/// partition is given.
pub fn step_cucker_smale(
    state: &ParticleEnsemble,
    cfg: &SimulationConfig,
    partition: Option<&BatchPartition>,
    noise: &NoiseIncrementBlock,
) -> Result<ParticleEnsemble> {
    check_block(state, cfg, noise)?;
    let mut next = state.clone();
    let step = (state.t / cfg.fine_step).round() as u64;
    advance(&mut next, cfg, partition, noise, &mut Vec::new(), step)?;
    next.t = state.t + cfg.fine_step;
    Ok(next)
}
