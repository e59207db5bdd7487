//! Forward Euler steps of the first-order system
//! `dX = (-∇V(X) + mean-field force) dt + dL`.

use crate::batching::{batch_mean_forces_into, BatchPartition};
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::forces::full_mean_forces_into;
use crate::noise::NoiseIncrementBlock;

use super::{check_block, SimulationConfig};

/// Which particles interact during a step.
#[derive(Debug, Clone, Copy)]
pub enum Interaction<'a> {
    Full,
    Batched(&'a BatchPartition),
}

/// In-place Euler step reusing `forces` as scratch. Returns kernel evaluations.
pub(crate) fn advance(
    state: &mut ParticleEnsemble,
    cfg: &SimulationConfig,
    interaction: Interaction<'_>,
    noise: &NoiseIncrementBlock,
    forces: &mut Vec<f64>,
    step: u64,
) -> Result<u64> {
    let dim = state.dim;
    forces.resize(state.positions.len(), 0.0);
    let evals = match interaction {
        Interaction::Full => {
            full_mean_forces_into(&state.positions, dim, &cfg.kernel, forces, cfg.parallel)
        }
        Interaction::Batched(part) => {
            if part.n_particles() != state.n_particles() {
                return Err(Error::ShapeMismatch(format!(
                    "partition of {} indices for {} particles",
                    part.n_particles(),
                    state.n_particles()
                )));
            }
            batch_mean_forces_into(
                part,
                &state.positions,
                dim,
                &cfg.kernel,
                forces,
                cfg.parallel,
            )
        }
    };
    let tau = cfg.fine_step;
    let a = cfg.potential.stiffness();
    for ((x, f), dl) in state
        .positions
        .iter_mut()
        .zip(forces.iter())
        .zip(&noise.increments)
    {
        *x += tau * (f - a * *x) + dl;
    }
    state.t = (step + 1) as f64 * tau;
    state.check_finite(step)?;
    Ok(evals)
}

fn step_with(
    state: &ParticleEnsemble,
    cfg: &SimulationConfig,
    interaction: Interaction<'_>,
    noise: &NoiseIncrementBlock,
) -> Result<ParticleEnsemble> {
    check_block(state, cfg, noise)?;
    let mut next = state.clone();
    let step = (state.t / cfg.fine_step).round() as u64;
    advance(&mut next, cfg, interaction, noise, &mut Vec::new(), step)?;
    next.t = state.t + cfg.fine_step;
    Ok(next)
}

/// One fine step with all-pairs interaction.
pub fn step_full(
    state: &ParticleEnsemble,
    cfg: &SimulationConfig,
    noise: &NoiseIncrementBlock,
) -> Result<ParticleEnsemble> {
    step_with(state, cfg, Interaction::Full, noise)
}

/// One fine step with interactions restricted to the batches of `partition`.
pub fn step_rbm(
    state: &ParticleEnsemble,
    cfg: &SimulationConfig,
    partition: &BatchPartition,
    noise: &NoiseIncrementBlock,
) -> Result<ParticleEnsemble> {
    step_with(state, cfg, Interaction::Batched(partition), noise)
}
