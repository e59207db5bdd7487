//! Experiment config files: flat `key = value` TOML.
//!
//! ```toml
//! kind = "rate_sweep"          # rate_sweep | long_time | cost_bench | cucker_smale
//! n_particles = 50
//! batch_size = 2
//! fine_step = "2^-12"          # reals may be numbers or "2^k" strings
//! batch_step = "2^-7"
//! horizon = 1
//! potential = "quadratic:a=1"  # or "none"
//! kernel = "smooth_bounded"    # "zero", "cucker_smale:beta=5,theta=1"
//! noise_drift = 0
//! noise_sigma = 0
//! noise_jump = "alpha_stable:alpha=1.5"   # "none", "compound_poisson:rate=0.1,sdev=1"
//! initial = "semicircle:r=2"
//! initial_velocity = "semicircle_scaled:s=0.1"
//! seed = 0
//! n_seeds = 20
//! kappas = ["2^-4", "2^-5", "2^-6", "2^-7"]
//! n_values = [50, 100]
//! t_values = [1, 2, 4, 8, 16]
//! a_values = [1, 0]
//! format = "csv"               # or "json"
//! ```
//!
//! Unknown keys are rejected. Omitted sweep lists default to the single base
//! value (`batch_step`, `n_particles`, `horizon`, the potential's `a`).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{Mode, SimulationConfig};
use crate::error::{invalid, Error, Result};
use crate::forces::{ConfiningPotential, InteractionKernel};
use crate::initial::InitialLaw;
use crate::names::parse_real;
use crate::noise::{JumpPart, LevyNoiseSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RateSweep,
    LongTime,
    CostBench,
    CuckerSmale,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::RateSweep => "rate_sweep",
            ExperimentKind::LongTime => "long_time",
            ExperimentKind::CostBench => "cost_bench",
            ExperimentKind::CuckerSmale => "cucker_smale",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmitFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub base: SimulationConfig,
    pub kappas: Vec<f64>,
    pub n_values: Vec<usize>,
    pub t_values: Vec<f64>,
    /// Quadratic stiffness values; `0` means no confinement.
    pub a_values: Vec<f64>,
    pub n_seeds: usize,
    pub output: Option<PathBuf>,
    pub format: EmitFormat,
    /// Record wall-clock seconds in result rows. Off by default except for
    /// the cost benchmark, so that outputs are byte-reproducible.
    pub timing: bool,
    /// Flocking is declared when `D_v(T) < flock_threshold · D_v(0)`.
    pub flock_threshold: f64,
}

/// A real written as a number or as a `"2^-12"` string.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Real {
    Num(f64),
    Text(String),
}

impl Real {
    fn get(&self) -> Result<f64> {
        match self {
            Real::Num(x) => Ok(*x),
            Real::Text(s) => parse_real(s),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    kind: Option<ExperimentKind>,
    mode: Option<Mode>,
    n_particles: Option<usize>,
    dim: Option<usize>,
    batch_size: Option<usize>,
    fine_step: Option<Real>,
    batch_step: Option<Real>,
    horizon: Option<Real>,
    potential: Option<ConfiningPotential>,
    kernel: Option<InteractionKernel>,
    noise_drift: Option<Real>,
    noise_sigma: Option<Real>,
    noise_jump: Option<JumpPart>,
    initial: Option<InitialLaw>,
    initial_velocity: Option<InitialLaw>,
    seed: Option<u64>,
    parallel_forces: Option<bool>,
    kappas: Option<Vec<Real>>,
    n_values: Option<Vec<usize>>,
    t_values: Option<Vec<Real>>,
    a_values: Option<Vec<Real>>,
    n_seeds: Option<usize>,
    output: Option<PathBuf>,
    format: Option<EmitFormat>,
    timing: Option<bool>,
    flock_threshold: Option<Real>,
}

fn reals(v: &Option<Vec<Real>>) -> Result<Option<Vec<f64>>> {
    v.as_ref()
        .map(|xs| xs.iter().map(Real::get).collect())
        .transpose()
}

fn real(v: &Option<Real>) -> Result<Option<f64>> {
    v.as_ref().map(Real::get).transpose()
}

impl ExperimentConfig {
    /// Defaults for each experiment kind, matching the desk-scale protocol.
    pub fn preset(kind: ExperimentKind) -> Self {
        let base = SimulationConfig::default();
        let mut cfg = ExperimentConfig {
            kind,
            kappas: vec![base.batch_step],
            n_values: vec![base.n_particles],
            t_values: vec![base.horizon],
            a_values: vec![1.0],
            n_seeds: 20,
            output: None,
            format: EmitFormat::Csv,
            timing: false,
            flock_threshold: 0.05,
            base,
        };
        match kind {
            ExperimentKind::RateSweep => {
                cfg.base.n_particles = 50;
                cfg.n_values = vec![50];
                cfg.kappas = (4..=7).map(|k| 2f64.powi(-k)).collect();
            }
            ExperimentKind::LongTime => {
                cfg.t_values = vec![1.0, 2.0, 4.0, 8.0, 16.0];
                cfg.a_values = vec![1.0, 0.0];
            }
            ExperimentKind::CostBench => {
                cfg.n_values = vec![50, 100, 200, 500, 1000];
                cfg.n_seeds = 3;
                cfg.timing = true;
            }
            ExperimentKind::CuckerSmale => {
                cfg.base.n_particles = 16;
                cfg.base.fine_step = 2f64.powi(-8);
                cfg.base.batch_step = 2f64.powi(-4);
                cfg.base.horizon = 20.0;
                cfg.base.potential = ConfiningPotential::None;
                cfg.base.kernel = InteractionKernel::CuckerSmale {
                    beta: 5.0,
                    theta: 1.0,
                };
                cfg.base.noise = LevyNoiseSpec::brownian_with_jumps(1.0, 0.1);
                cfg.n_values = vec![16];
                cfg.kappas = vec![cfg.base.batch_step];
                cfg.t_values = vec![20.0];
                cfg.a_values = vec![0.0];
                cfg.n_seeds = 10;
            }
        }
        cfg
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with(text, None)
    }

    /// Like [`parse`](Self::parse), but `kind` may be omitted from the file;
    /// if present it must equal `kind`.
    pub fn parse_as(text: &str, kind: ExperimentKind) -> Result<Self> {
        Self::parse_with(text, Some(kind))
    }

    fn parse_with(text: &str, expected: Option<ExperimentKind>) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        let kind = match (file.kind, expected) {
            (Some(k), Some(e)) if k != e => {
                return Err(Error::InvalidConfig(format!(
                    "config is for {}, not {}",
                    k.name(),
                    e.name()
                )));
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => return Err(Error::InvalidConfig("missing `kind`".into())),
        };
        let mut cfg = Self::preset(kind);
        let b = &mut cfg.base;
        macro_rules! set {
            ($field:expr, $val:expr) => {
                if let Some(v) = $val {
                    $field = v;
                }
            };
        }
        set!(b.mode, file.mode);
        set!(b.n_particles, file.n_particles);
        set!(b.dim, file.dim);
        set!(b.batch_size, file.batch_size);
        set!(b.fine_step, real(&file.fine_step)?);
        set!(b.batch_step, real(&file.batch_step)?);
        set!(b.horizon, real(&file.horizon)?);
        set!(b.potential, file.potential);
        set!(b.kernel, file.kernel);
        set!(b.noise.drift_b, real(&file.noise_drift)?);
        set!(b.noise.gaussian_sigma, real(&file.noise_sigma)?);
        set!(b.noise.jump_part, file.noise_jump);
        set!(b.initial, file.initial);
        set!(b.initial_velocity, file.initial_velocity);
        set!(b.seed, file.seed);
        set!(b.parallel, file.parallel_forces);

        // Sweep lists fall back to the base values when the base was overridden.
        cfg.kappas = reals(&file.kappas)?.unwrap_or_else(|| {
            if file.batch_step.is_some() {
                vec![cfg.base.batch_step]
            } else {
                cfg.kappas.clone()
            }
        });
        cfg.n_values = file.n_values.clone().unwrap_or_else(|| {
            if file.n_particles.is_some() {
                vec![cfg.base.n_particles]
            } else {
                cfg.n_values.clone()
            }
        });
        cfg.t_values = reals(&file.t_values)?.unwrap_or_else(|| {
            if file.horizon.is_some() {
                vec![cfg.base.horizon]
            } else {
                cfg.t_values.clone()
            }
        });
        cfg.a_values = reals(&file.a_values)?.unwrap_or_else(|| {
            if file.potential.is_some() {
                vec![cfg.base.potential.stiffness()]
            } else {
                cfg.a_values.clone()
            }
        });
        set!(cfg.n_seeds, file.n_seeds);
        cfg.output = file.output;
        set!(cfg.format, file.format);
        set!(cfg.timing, file.timing);
        set!(cfg.flock_threshold, real(&file.flock_threshold)?);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with(path, None)
    }

    pub fn load_as(path: &Path, kind: ExperimentKind) -> Result<Self> {
        Self::load_with(path, Some(kind))
    }

    fn load_with(path: &Path, kind: Option<ExperimentKind>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_with(&text, kind).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Serialize back to the config file format.
    pub fn to_config_string(&self) -> String {
        let b = &self.base;
        let list = |xs: &[f64]| {
            xs.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut s = String::new();
        let _ = writeln!(s, "kind = \"{}\"", self.kind.name());
        let mode = match b.mode {
            Mode::Full => "full",
            Mode::Rbm => "rbm",
            Mode::Coupled => "coupled",
        };
        let _ = writeln!(s, "mode = \"{mode}\"");
        let _ = writeln!(s, "n_particles = {}", b.n_particles);
        let _ = writeln!(s, "dim = {}", b.dim);
        let _ = writeln!(s, "batch_size = {}", b.batch_size);
        let _ = writeln!(s, "fine_step = {:?}", b.fine_step);
        let _ = writeln!(s, "batch_step = {:?}", b.batch_step);
        let _ = writeln!(s, "horizon = {:?}", b.horizon);
        let _ = writeln!(s, "potential = \"{}\"", b.potential);
        let _ = writeln!(s, "kernel = \"{}\"", b.kernel);
        let _ = writeln!(s, "noise_drift = {:?}", b.noise.drift_b);
        let _ = writeln!(s, "noise_sigma = {:?}", b.noise.gaussian_sigma);
        let _ = writeln!(s, "noise_jump = \"{}\"", b.noise.jump_part);
        let _ = writeln!(s, "initial = \"{}\"", b.initial);
        let _ = writeln!(s, "initial_velocity = \"{}\"", b.initial_velocity);
        let _ = writeln!(s, "seed = {}", b.seed);
        let _ = writeln!(s, "parallel_forces = {}", b.parallel);
        let _ = writeln!(s, "kappas = [{}]", list(&self.kappas));
        let _ = writeln!(
            s,
            "n_values = [{}]",
            self.n_values
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        );
        let _ = writeln!(s, "t_values = [{}]", list(&self.t_values));
        let _ = writeln!(s, "a_values = [{}]", list(&self.a_values));
        let _ = writeln!(s, "n_seeds = {}", self.n_seeds);
        if let Some(out) = &self.output {
            let _ = writeln!(s, "output = {:?}", out.display().to_string());
        }
        let fmt = match self.format {
            EmitFormat::Csv => "csv",
            EmitFormat::Json => "json",
        };
        let _ = writeln!(s, "format = \"{fmt}\"");
        let _ = writeln!(s, "timing = {}", self.timing);
        let _ = writeln!(s, "flock_threshold = {:?}", self.flock_threshold);
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappas.is_empty()
            || self.n_values.is_empty()
            || self.t_values.is_empty()
            || self.a_values.is_empty()
        {
            return invalid("sweep lists must be non-empty");
        }
        if self.n_seeds == 0 {
            return invalid("n_seeds must be positive");
        }
        if !(self.flock_threshold > 0.0) {
            return invalid("flock_threshold must be positive");
        }
        if self.a_values.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return invalid("a_values must be >= 0");
        }
        for sim in self.sweep_configs() {
            sim.validate()?;
        }
        Ok(())
    }

    /// One simulation config per sweep point this experiment will run.
    pub(crate) fn sweep_configs(&self) -> Vec<SimulationConfig> {
        let mut out = Vec::new();
        let t_max = self.t_values.iter().copied().fold(0.0, f64::max);
        for &a in &self.a_values {
            for &n in &self.n_values {
                for &kappa in &self.kappas {
                    let mut c = self.base.clone();
                    c.n_particles = n;
                    c.batch_step = kappa;
                    c.horizon = t_max;
                    if !c.kernel.is_second_order() {
                        c.potential = if a == 0.0 {
                            ConfiningPotential::None
                        } else {
                            ConfiningPotential::Quadratic { a }
                        };
                    }
                    out.push(c);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RATE: &str = r#"
        kind = "rate_sweep"
        n_particles = 50
        fine_step = "2^-12"
        kappas = ["2^-4", "2^-5", "2^-6", "2^-7"]
        noise_jump = "alpha_stable:alpha=1.5"
        potential = "quadratic:a=1"
        n_seeds = 20
    "#;

    #[test]
    fn parses_rate_sweep() {
        let cfg = ExperimentConfig::parse(RATE).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::RateSweep);
        assert_eq!(cfg.kappas, vec![0.0625, 0.03125, 0.015625, 0.0078125]);
        assert_eq!(cfg.base.fine_step, 1.0 / 4096.0);
        assert_eq!(cfg.n_values, vec![50]);
        assert_eq!(cfg.a_values, vec![1.0]);
        assert_eq!(cfg.sweep_configs().len(), 4);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let err = ExperimentConfig::parse("kind = \"rate_sweep\"\nkapas = [1]").unwrap_err();
        assert!(err.to_string().contains("kapas"), "{err}");
        assert!(ExperimentConfig::parse("n_seeds = 3").is_err());
        assert!(ExperimentConfig::parse("kind = \"rate_sweep\"\nkernel = \"coulomb\"").is_err());
    }

    #[test]
    fn invalid_sweeps_are_rejected() {
        let off_grid = "kind = \"rate_sweep\"\nfine_step = 0.01\nkappas = [0.015]";
        assert!(ExperimentConfig::parse(off_grid).is_err());
        assert!(ExperimentConfig::parse("kind = \"rate_sweep\"\nkappas = []").is_err());
        assert!(ExperimentConfig::parse("kind = \"rate_sweep\"\nn_seeds = 0").is_err());
    }

    #[test]
    fn round_trips_through_text() {
        for kind in [
            ExperimentKind::RateSweep,
            ExperimentKind::LongTime,
            ExperimentKind::CostBench,
            ExperimentKind::CuckerSmale,
        ] {
            let mut cfg = ExperimentConfig::preset(kind);
            cfg.output = Some(PathBuf::from("out/result.csv"));
            let text = cfg.to_config_string();
            assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg, "{text}");
        }
    }

    #[test]
    fn noise_keys_build_the_spec() {
        let cfg = ExperimentConfig::parse(
            "kind = \"cucker_smale\"\nnoise_sigma = 0\nnoise_jump = \"compound_poisson:rate=0.1\"",
        )
        .unwrap();
        assert_eq!(cfg.base.noise, LevyNoiseSpec::brownian_with_jumps(0.0, 0.1));
        assert_eq!(cfg.base.n_particles, 16);
    }
}
