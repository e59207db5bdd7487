//! Simulation of interacting particle systems driven by Lévy noise, with the
//! random batch method and synchronous coupling to measure its error.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batching;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod forces;
pub mod initial;
pub mod metrics;
mod names;
pub mod noise;
pub mod rng;

pub use batching::{batch_mean_force, random_partition, BatchPartition};
pub use dynamics::{
    initial_state, run, run_coupled, run_coupled_with, run_from, step_cucker_smale, step_full,
    step_rbm, CoupledRun, Mode, Observer, RunRecord, SimulationConfig,
};
pub use ensemble::ParticleEnsemble;
pub use error::{Error, Result};
pub use forces::{
    full_mean_force, grad_potential, ConfiningPotential, InteractionKernel, PairKernel,
};
pub use initial::{sample_initial, InitialLaw};
pub use metrics::ErrorSeries;
pub use names::parse_real;
pub use noise::{JumpPart, LevyNoiseSpec, NoiseIncrementBlock};
