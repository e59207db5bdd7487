//! Experiment orchestration: sweeps over the simulation configuration,
//! replicated over seeds, aggregated into a [`ResultTable`].
//!
//! Replicate `k` of every sweep point uses the same derived seed, so points
//! differ only in the swept parameter (common random numbers).

mod config;
mod runners;
mod table;

pub use config::{EmitFormat, ExperimentConfig, ExperimentKind};
pub use runners::{
    flocking_verdict, run_cost_bench, run_cucker_smale, run_long_time, run_rate_sweep,
    traces_to_csv, CuckerSmaleOutcome, VelocityTrace,
};
pub use table::{emit, format_real, ResultTable, Row, COLUMNS};

use crate::error::Result;

/// Output of any experiment kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub table: ResultTable,
    pub traces: Vec<VelocityTrace>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let table = match cfg.kind {
        ExperimentKind::RateSweep => run_rate_sweep(cfg)?,
        ExperimentKind::LongTime => run_long_time(cfg)?,
        ExperimentKind::CostBench => run_cost_bench(cfg)?,
        ExperimentKind::CuckerSmale => {
            let out = run_cucker_smale(cfg)?;
            return Ok(ExperimentOutput {
                table: out.table,
                traces: out.traces,
            });
        }
    };
    Ok(ExperimentOutput {
        table,
        traces: Vec::new(),
    })
}
