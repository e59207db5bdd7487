//! Time stepping of the full interacting particle system, its random batch
//! approximation, and the synchronously coupled pair.
//!
//! Both dynamics draw noise from [`ParticleNoise`] streams keyed by the run
//! seed, and partitions from a separate batch stream, so the noise path is
//! the same whatever the batch schedule.

mod cucker_smale;
mod first_order;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::batching::{random_partition, BatchPartition};
use crate::ensemble::ParticleEnsemble;
use crate::error::{invalid, Error, Result};
use crate::forces::{check_contraction, ConfiningPotential, InteractionKernel};
use crate::initial::{sample_initial, InitialLaw};
use crate::metrics::{coupled_error_e1, coupled_error_e2, ErrorSeries};
use crate::noise::{LevyNoiseSpec, NoiseIncrementBlock, ParticleNoise};
use crate::rng::{substream, Domain};

pub use cucker_smale::step_cucker_smale;
pub use first_order::{step_full, step_rbm, Interaction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Full,
    Rbm,
    Coupled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n_particles: usize,
    pub dim: usize,
    pub batch_size: usize,
    /// Euler step τ.
    pub fine_step: f64,
    /// Batch window κ; a multiple of τ.
    pub batch_step: f64,
    /// Horizon T; a multiple of κ.
    pub horizon: f64,
    pub potential: ConfiningPotential,
    pub kernel: InteractionKernel,
    pub noise: LevyNoiseSpec,
    pub initial: InitialLaw,
    /// Velocity law for second-order systems.
    pub initial_velocity: InitialLaw,
    pub seed: u64,
    pub mode: Mode,
    /// Evaluate forces and sample noise on the rayon pool.
    pub parallel: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_particles: 100,
            dim: 1,
            batch_size: 2,
            fine_step: 2f64.powi(-12),
            batch_step: 2f64.powi(-7),
            horizon: 1.0,
            potential: ConfiningPotential::Quadratic { a: 1.0 },
            kernel: InteractionKernel::SmoothBounded,
            noise: LevyNoiseSpec::alpha_stable(1.5),
            initial: InitialLaw::STANDARD_SEMICIRCLE,
            initial_velocity: InitialLaw::ScaledSemicircle { scale: 0.1 },
            seed: 0,
            mode: Mode::Coupled,
            parallel: false,
        }
    }
}

/// Integer step counts derived from `(τ, κ, T)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub steps_per_window: u64,
    pub windows: u64,
}

impl Schedule {
    pub fn total_steps(&self) -> u64 {
        self.steps_per_window * self.windows
    }
}

fn integer_ratio(num: f64, den: f64, what: &str) -> Result<u64> {
    let r = num / den;
    let k = r.round();
    if !(k >= 1.0) || (r - k).abs() > 1e-9 * k {
        return invalid(format!("{what} must be a positive integer, got {r}"));
    }
    Ok(k as u64)
}

impl SimulationConfig {
    pub fn uses_batches(&self) -> bool {
        self.mode != Mode::Full
    }

    pub fn validate(&self) -> Result<Schedule> {
        if self.n_particles == 0 || self.dim == 0 {
            return invalid("need at least one particle and one dimension");
        }
        for (name, v) in [
            ("fine_step", self.fine_step),
            ("batch_step", self.batch_step),
            ("horizon", self.horizon),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        if self.uses_batches() {
            let (n, p) = (self.n_particles, self.batch_size);
            if p < 2 || n < p || n % p != 0 {
                return invalid(format!("batch size {p} must be >= 2 and divide {n}"));
            }
        }
        self.noise.validate_for_dim(self.dim)?;
        self.kernel.validate()?;
        self.initial.validate()?;
        if self.kernel.is_second_order() {
            self.initial_velocity.validate()?;
            if self.potential.stiffness() != 0.0 {
                return invalid("second-order dynamics take no confining potential");
            }
        } else {
            check_contraction(&self.potential, &self.kernel);
        }
        Ok(Schedule {
            steps_per_window: integer_ratio(
                self.batch_step,
                self.fine_step,
                "batch_step / fine_step",
            )?,
            windows: integer_ratio(self.horizon, self.batch_step, "horizon / batch_step")?,
        })
    }

    pub fn noise_source(&self) -> Result<ParticleNoise> {
        Ok(ParticleNoise::new(
            &self.noise,
            self.n_particles,
            self.dim,
            self.fine_step,
            self.seed,
        )?
        .with_parallel(self.parallel))
    }
}

pub(crate) fn check_block(
    state: &ParticleEnsemble,
    cfg: &SimulationConfig,
    noise: &NoiseIncrementBlock,
) -> Result<()> {
    if noise.increments.len() != state.positions.len() || noise.dim != state.dim {
        return Err(Error::ShapeMismatch(format!(
            "noise block of {} entries for {} coordinates",
            noise.increments.len(),
            state.positions.len()
        )));
    }
    if noise.dt != cfg.fine_step {
        return invalid(format!(
            "noise block covers {} but the step is {}",
            noise.dt, cfg.fine_step
        ));
    }
    Ok(())
}

/// Sample the initial ensemble of `cfg` from its dedicated substreams.
pub fn initial_state(cfg: &SimulationConfig) -> Result<ParticleEnsemble> {
    let count = cfg.n_particles * cfg.dim;
    let mut rng = substream(cfg.seed, Domain::InitialPosition, 0);
    let positions = sample_initial(&cfg.initial, count, &mut rng)?;
    let state = ParticleEnsemble::new(positions, cfg.dim)?;
    if cfg.kernel.is_second_order() {
        let mut rng = substream(cfg.seed, Domain::InitialVelocity, 0);
        state.with_velocities(sample_initial(&cfg.initial_velocity, count, &mut rng)?)
    } else {
        Ok(state)
    }
}

/// Called at the end of every batch window `m = 1..=T/κ` with the state at `t_m`.
pub trait Observer {
    fn observe(&mut self, window: u64, state: &ParticleEnsemble);
}

impl<F: FnMut(u64, &ParticleEnsemble)> Observer for F {
    fn observe(&mut self, window: u64, state: &ParticleEnsemble) {
        self(window, state)
    }
}

/// Records `(t_m, mean_i |X_i(t_m)|)`.
#[derive(Debug, Clone, Default)]
pub struct MeanAbsObserver {
    pub times: Vec<f64>,
    pub mean_abs: Vec<f64>,
}

impl Observer for MeanAbsObserver {
    fn observe(&mut self, _window: u64, state: &ParticleEnsemble) {
        let n = state.n_particles() as f64;
        let s: f64 = state
            .positions
            .chunks_exact(state.dim)
            .map(|x| x.iter().map(|c| c * c).sum::<f64>().sqrt())
            .sum();
        self.times.push(state.t);
        self.mean_abs.push(s / n);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub final_state: ParticleEnsemble,
    pub kernel_evals: u64,
    pub steps: u64,
    pub windows: u64,
    /// Seconds spent in the time loop (initial sampling excluded).
    pub wall_clock: f64,
}

/// Stepper state shared by every run loop.
struct Engine {
    noise: ParticleNoise,
    block: NoiseIncrementBlock,
    batch_rng: rand_chacha::ChaCha8Rng,
    partition: Option<BatchPartition>,
    scratch: Vec<f64>,
}

impl Engine {
    fn new(cfg: &SimulationConfig) -> Result<Self> {
        let noise = cfg.noise_source()?;
        let block = noise.block();
        let mut batch_rng = substream(cfg.seed, Domain::Batch, 0);
        let partition = if cfg.uses_batches() {
            Some(random_partition(
                cfg.n_particles,
                cfg.batch_size,
                &mut batch_rng,
            )?)
        } else {
            None
        };
        Ok(Self {
            noise,
            block,
            batch_rng,
            partition,
            scratch: Vec::new(),
        })
    }

    fn reshuffle(&mut self, window: u64) {
        // The first partition was drawn in `new`.
        if window > 0 {
            if let Some(p) = self.partition.as_mut() {
                p.reshuffle(&mut self.batch_rng);
            }
        }
    }

    fn advance(
        &mut self,
        state: &mut ParticleEnsemble,
        cfg: &SimulationConfig,
        batched: bool,
        step: u64,
    ) -> Result<u64> {
        let part = if batched {
            self.partition.as_ref()
        } else {
            None
        };
        if cfg.kernel.is_second_order() {
            cucker_smale::advance(state, cfg, part, &self.block, &mut self.scratch, step)
        } else {
            let inter = match part {
                Some(p) => Interaction::Batched(p),
                None => Interaction::Full,
            };
            first_order::advance(state, cfg, inter, &self.block, &mut self.scratch, step)
        }
    }
}

/// Run a single dynamics (`Full` or `Rbm`) from the configured initial law.
pub fn run(cfg: &SimulationConfig, observers: &mut [&mut dyn Observer]) -> Result<RunRecord> {
    run_from(cfg, initial_state(cfg)?, observers)
}

/// Run a single dynamics from a given initial state.
pub fn run_from(
    cfg: &SimulationConfig,
    initial: ParticleEnsemble,
    observers: &mut [&mut dyn Observer],
) -> Result<RunRecord> {
    let schedule = cfg.validate()?;
    if cfg.mode == Mode::Coupled {
        return invalid("coupled mode runs through run_coupled");
    }
    check_initial(cfg, &initial)?;
    let batched = cfg.mode == Mode::Rbm;
    let mut engine = Engine::new(cfg)?;
    let mut state = initial;
    let mut evals = 0;
    let start = Instant::now();
    let mut step = 0u64;
    for m in 0..schedule.windows {
        engine.reshuffle(m);
        for _ in 0..schedule.steps_per_window {
            engine.noise.fill(&mut engine.block);
            evals += engine.advance(&mut state, cfg, batched, step)?;
            step += 1;
        }
        for obs in observers.iter_mut() {
            obs.observe(m + 1, &state);
        }
    }
    Ok(RunRecord {
        final_state: state,
        kernel_evals: evals,
        steps: step,
        windows: schedule.windows,
        wall_clock: start.elapsed().as_secs_f64(),
    })
}

fn check_initial(cfg: &SimulationConfig, initial: &ParticleEnsemble) -> Result<()> {
    if initial.n_particles() != cfg.n_particles || initial.dim != cfg.dim {
        return Err(Error::ShapeMismatch(format!(
            "initial state {}x{} for a {}x{} configuration",
            initial.n_particles(),
            initial.dim,
            cfg.n_particles,
            cfg.dim
        )));
    }
    if cfg.kernel.is_second_order() && initial.velocities.is_none() {
        return invalid("second-order dynamics need initial velocities");
    }
    initial.check_finite(0)
}

/// Full and random batch ensembles after a coupled run.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub series: ErrorSeries,
    pub full: ParticleEnsemble,
    pub rbm: ParticleEnsemble,
    pub full_kernel_evals: u64,
    pub rbm_kernel_evals: u64,
}

/// Run the full and batched dynamics side by side on identical noise and
/// record `Ê₁`, `Ê₂` at every window boundary.
pub fn run_coupled(cfg: &SimulationConfig) -> Result<CoupledRun> {
    run_coupled_with(cfg, initial_state(cfg)?, |_, _, _| {})
}

/// As [`run_coupled`], from a given state, calling `observe(m, full, rbm)` at
/// every window boundary.
pub fn run_coupled_with(
    cfg: &SimulationConfig,
    initial: ParticleEnsemble,
    mut observe: impl FnMut(u64, &ParticleEnsemble, &ParticleEnsemble),
) -> Result<CoupledRun> {
    let schedule = cfg.validate()?;
    if cfg.mode != Mode::Coupled {
        return invalid("run_coupled needs mode = coupled");
    }
    check_initial(cfg, &initial)?;
    let mut engine = Engine::new(cfg)?;
    let mut full = initial.clone();
    let mut rbm = initial;
    let mut series = ErrorSeries::default();
    let (mut full_evals, mut rbm_evals) = (0, 0);
    let start = Instant::now();
    let mut step = 0u64;
    for m in 0..schedule.windows {
        engine.reshuffle(m);
        for _ in 0..schedule.steps_per_window {
            engine.noise.fill(&mut engine.block);
            full_evals += engine.advance(&mut full, cfg, false, step)?;
            rbm_evals += engine.advance(&mut rbm, cfg, true, step)?;
            step += 1;
        }
        series.times.push(full.t);
        series.e1.push(coupled_error_e1(&full, &rbm)?);
        series.e2.push(coupled_error_e2(&full, &rbm)?);
        observe(m + 1, &full, &rbm);
    }
    series.wall_clock = start.elapsed().as_secs_f64();
    series.kernel_eval_count = full_evals + rbm_evals;
    Ok(CoupledRun {
        series,
        full,
        rbm,
        full_kernel_evals: full_evals,
        rbm_kernel_evals: rbm_evals,
    })
}
