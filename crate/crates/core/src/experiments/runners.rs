use rayon::prelude::*;

use crate::dynamics::{initial_state, run_coupled_with, run_from, Mode, SimulationConfig};
use crate::ensemble::ParticleEnsemble;
use crate::error::{invalid, Result};
use crate::metrics::{
    coupled_error_e1, fit_loglog_slope, flocking_diameters, mean_and_se, wasserstein_1d,
};
use crate::rng::derive_seed;

use super::config::{ExperimentConfig, ExperimentKind};
use super::table::{ResultTable, Row};

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.kind != kind {
        return invalid(format!(
            "expected a {} config, got {}",
            kind.name(),
            cfg.kind.name()
        ));
    }
    cfg.validate()
}

fn seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.n_seeds as u64)
        .map(|k| derive_seed(cfg.base.seed, k))
        .collect()
}

fn sweep_id(c: &SimulationConfig) -> String {
    format!(
        "a={},N={},kappa={}",
        c.potential.stiffness(),
        c.n_particles,
        c.batch_step
    )
}

/// Whether `t` is (numerically) one of the requested output times.
fn requested(t: f64, ts: &[f64]) -> bool {
    ts.iter().any(|&s| (s - t).abs() <= 1e-9 * s.max(1.0))
}

/// Coupled runs over every (a, N, κ) point and seed, with one row per
/// requested time.
fn coupled_rows(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let name = cfg.kind.name();
    let jobs: Vec<(SimulationConfig, u64)> = cfg
        .sweep_configs()
        .into_iter()
        .flat_map(|c| seeds(cfg).into_iter().map(move |s| (c.clone(), s)))
        .collect();
    let per_job: Vec<Result<Vec<Row>>> = jobs
        .par_iter()
        .map(|(base, seed)| {
            let sim = SimulationConfig {
                seed: *seed,
                mode: Mode::Coupled,
                ..base.clone()
            };
            let id = sweep_id(&sim);
            let mut rows = Vec::new();
            let mut failure = None;
            let run = run_coupled_with(&sim, initial_state(&sim)?, |_, full, rbm| {
                if !requested(full.t, &cfg.t_values) {
                    return;
                }
                let w1 = if full.dim == 1 {
                    wasserstein_1d(&full.positions, &rbm.positions, 1).ok()
                } else {
                    None
                };
                match coupled_error_e1(full, rbm) {
                    Ok(e1) => rows.push(Row {
                        seed: Some(*seed),
                        mode: Some("coupled".into()),
                        a: Some(sim.potential.stiffness()),
                        n: Some(sim.n_particles),
                        kappa: Some(sim.batch_step),
                        t: Some(full.t),
                        e1: Some(e1),
                        w1,
                        ..Row::new(name, id.clone())
                    }),
                    Err(e) => failure = Some(e),
                }
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
            if let Some(last) = rows.last_mut() {
                last.kernel_evals = Some(run.series.kernel_eval_count);
                if cfg.timing {
                    last.wall_clock = Some(run.series.wall_clock);
                }
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_job {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Mean and standard error of `e1` over seeds, per (config, t).
fn aggregate(rows: &[Row], ts: &[f64]) -> Vec<Row> {
    let mut out = Vec::new();
    let mut ids: Vec<&str> = Vec::new();
    for r in rows {
        if !ids.contains(&r.config_id.as_str()) {
            ids.push(&r.config_id);
        }
    }
    for id in ids {
        for &t in ts {
            let group: Vec<&Row> = rows
                .iter()
                .filter(|r| r.config_id == id && r.t.is_some_and(|rt| requested(rt, &[t])))
                .collect();
            let Some(first) = group.first() else { continue };
            let e1: Vec<f64> = group.iter().filter_map(|r| r.e1).collect();
            let w1: Vec<f64> = group.iter().filter_map(|r| r.w1).collect();
            let (mean, se) = mean_and_se(&e1);
            out.push(Row {
                seed: None,
                e1: Some(mean),
                e1_se: se.is_finite().then_some(se),
                w1: (!w1.is_empty()).then(|| mean_and_se(&w1).0),
                kernel_evals: None,
                wall_clock: None,
                ..(*first).clone()
            });
        }
    }
    out
}

pub fn run_rate_sweep(cfg: &ExperimentConfig) -> Result<ResultTable> {
    expect_kind(cfg, ExperimentKind::RateSweep)?;
    let rows = coupled_rows(cfg)?;
    let summary = aggregate(&rows, &cfg.t_values);
    let mut table = ResultTable { rows };
    // slope of mean Ê₁ against κ, per (a, N, T)
    let mut fits = Vec::new();
    for &a in &cfg.a_values {
        for &n in &cfg.n_values {
            for &t in &cfg.t_values {
                let pts: Vec<(f64, f64)> = summary
                    .iter()
                    .filter(|r| {
                        r.a == Some(a)
                            && r.n == Some(n)
                            && r.t.is_some_and(|rt| requested(rt, &[t]))
                    })
                    .filter_map(|r| Some((r.kappa?, r.e1?)))
                    .collect();
                let slope = if pts.len() >= 2 {
                    let (ks, es): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                    fit_loglog_slope(&ks, &es).ok().map(|s| s.0)
                } else {
                    None
                };
                fits.push(Row {
                    a: Some(a),
                    n: Some(n),
                    t: Some(t),
                    slope,
                    ..Row::new(cfg.kind.name(), format!("a={a},N={n},T={t}"))
                });
            }
        }
    }
    table.rows.extend(summary);
    table.rows.extend(fits);
    Ok(table)
}

pub fn run_long_time(cfg: &ExperimentConfig) -> Result<ResultTable> {
    expect_kind(cfg, ExperimentKind::LongTime)?;
    let rows = coupled_rows(cfg)?;
    let summary = aggregate(&rows, &cfg.t_values);
    let mut table = ResultTable { rows };
    // growth exponent of mean Ê₁ in T, per (a, N, κ)
    let mut fits = Vec::new();
    for c in cfg.sweep_configs() {
        let id = sweep_id(&c);
        let pts: Vec<(f64, f64)> = summary
            .iter()
            .filter(|r| r.config_id == id)
            .filter_map(|r| Some((r.t?, r.e1?)))
            .collect();
        let slope = if pts.len() >= 2 {
            let (ts, es): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            fit_loglog_slope(&ts, &es).ok().map(|s| s.0)
        } else {
            None
        };
        fits.push(Row {
            a: Some(c.potential.stiffness()),
            n: Some(c.n_particles),
            kappa: Some(c.batch_step),
            slope,
            ..Row::new(cfg.kind.name(), format!("{id},fit=T"))
        });
    }
    table.rows.extend(summary);
    table.rows.extend(fits);
    Ok(table)
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Full => "full",
        Mode::Rbm => "rbm",
        Mode::Coupled => "coupled",
    }
}

/// Times full and batched runs sequentially, so that timings do not compete
/// for cores. Reports exact kernel-evaluation counts and fitted cost exponents.
pub fn run_cost_bench(cfg: &ExperimentConfig) -> Result<ResultTable> {
    expect_kind(cfg, ExperimentKind::CostBench)?;
    let name = cfg.kind.name();
    let mut table = ResultTable::default();
    let mut best: Vec<(Mode, usize, f64)> = Vec::new();
    let bases: Vec<SimulationConfig> = {
        // first (a, κ) only; the sweep is over N
        let mut all = cfg.sweep_configs();
        let first_n = cfg.n_values.len() * cfg.kappas.len();
        all.truncate(first_n);
        all.into_iter().step_by(cfg.kappas.len()).collect()
    };
    for base in &bases {
        for mode in [Mode::Full, Mode::Rbm] {
            let sim = SimulationConfig {
                mode,
                ..base.clone()
            };
            let init = initial_state(&sim)?;
            let id = format!("{},mode={}", sweep_id(&sim), mode_name(mode));
            let mut fastest = f64::INFINITY;
            for (rep, seed) in seeds(cfg).into_iter().enumerate() {
                let run = run_from(
                    &SimulationConfig {
                        seed,
                        ..sim.clone()
                    },
                    init.clone(),
                    &mut [],
                )?;
                fastest = fastest.min(run.wall_clock);
                table.push(Row {
                    seed: Some(seed),
                    mode: Some(mode_name(mode).into()),
                    a: Some(sim.potential.stiffness()),
                    n: Some(sim.n_particles),
                    kappa: Some(sim.batch_step),
                    t: Some(sim.horizon),
                    kernel_evals: Some(run.kernel_evals),
                    wall_clock: Some(run.wall_clock),
                    ..Row::new(name, id.clone())
                });
                log::debug!("cost bench {id} rep {rep}: {:.3}s", run.wall_clock);
            }
            best.push((mode, sim.n_particles, fastest));
            table.push(Row {
                mode: Some(mode_name(mode).into()),
                n: Some(sim.n_particles),
                kappa: Some(sim.batch_step),
                t: Some(sim.horizon),
                wall_clock: Some(fastest),
                ..Row::new(name, id)
            });
        }
    }
    for mode in [Mode::Full, Mode::Rbm] {
        let (ns, ts): (Vec<f64>, Vec<f64>) = best
            .iter()
            .filter(|b| b.0 == mode)
            .map(|b| (b.1 as f64, b.2))
            .unzip();
        let slope = if ns.len() >= 2 {
            fit_loglog_slope(&ns, &ts).ok().map(|s| s.0)
        } else {
            None
        };
        table.push(Row {
            mode: Some(mode_name(mode).into()),
            slope,
            ..Row::new(name, format!("mode={},fit=N", mode_name(mode)))
        });
    }
    Ok(table)
}

/// Velocity paths of one flocking run, sampled at window boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityTrace {
    pub mode: String,
    pub seed: u64,
    pub times: Vec<f64>,
    pub velocities: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CuckerSmaleOutcome {
    pub table: ResultTable,
    pub traces: Vec<VelocityTrace>,
}

/// `D_v(T) < threshold · D_v(0)`.
pub fn flocking_verdict(dv0: f64, dv_final: f64, threshold: f64) -> bool {
    dv_final < threshold * dv0
}

pub fn run_cucker_smale(cfg: &ExperimentConfig) -> Result<CuckerSmaleOutcome> {
    expect_kind(cfg, ExperimentKind::CuckerSmale)?;
    if !cfg.base.kernel.is_second_order() {
        return invalid("cucker_smale experiments need a cucker_smale kernel");
    }
    let name = cfg.kind.name();
    let base = cfg.sweep_configs().remove(0);
    let jobs: Vec<(Mode, u64)> = [Mode::Full, Mode::Rbm]
        .into_iter()
        .flat_map(|m| seeds(cfg).into_iter().map(move |s| (m, s)))
        .collect();
    let results: Vec<Result<(Vec<Row>, VelocityTrace)>> = jobs
        .par_iter()
        .map(|&(mode, seed)| {
            let sim = SimulationConfig {
                mode,
                seed,
                ..base.clone()
            };
            let id = format!(
                "{},sigma={},noise={}",
                sim.kernel, sim.noise.gaussian_sigma, sim.noise.jump_part
            );
            let init = initial_state(&sim)?;
            let mut snaps: Vec<ParticleEnsemble> = vec![init.clone()];
            let mut keep = |_: u64, s: &ParticleEnsemble| snaps.push(s.clone());
            let run = run_from(&sim, init, &mut [&mut keep])?;
            let mut rows = Vec::with_capacity(snaps.len());
            let mut trace = VelocityTrace {
                mode: mode_name(mode).into(),
                seed,
                times: Vec::new(),
                velocities: Vec::new(),
            };
            let (_, dv0) = flocking_diameters(&snaps[0])?;
            for s in &snaps {
                let (dx, dv) = flocking_diameters(s)?;
                trace.times.push(s.t);
                trace
                    .velocities
                    .push(s.velocities.clone().unwrap_or_default());
                rows.push(Row {
                    seed: Some(seed),
                    mode: Some(mode_name(mode).into()),
                    n: Some(sim.n_particles),
                    kappa: Some(sim.batch_step),
                    t: Some(s.t),
                    dx: Some(dx),
                    dv: Some(dv),
                    ..Row::new(name, id.clone())
                });
            }
            if let Some(last) = rows.last_mut() {
                let dv = last.dv.unwrap_or(f64::NAN);
                last.flocking = Some(f64::from(u8::from(flocking_verdict(
                    dv0,
                    dv,
                    cfg.flock_threshold,
                ))));
                last.kernel_evals = Some(run.kernel_evals);
                if cfg.timing {
                    last.wall_clock = Some(run.wall_clock);
                }
            }
            Ok((rows, trace))
        })
        .collect();
    let mut table = ResultTable::default();
    let mut traces = Vec::new();
    for r in results {
        let (rows, trace) = r?;
        table.rows.extend(rows);
        traces.push(trace);
    }
    for mode in [Mode::Full, Mode::Rbm] {
        let finals: Vec<&Row> = table
            .rows
            .iter()
            .filter(|r| r.flocking.is_some() && r.mode.as_deref() == Some(mode_name(mode)))
            .collect();
        let Some(first) = finals.first() else {
            continue;
        };
        let frac = finals.iter().filter_map(|r| r.flocking).sum::<f64>() / finals.len() as f64;
        let dx: Vec<f64> = finals.iter().filter_map(|r| r.dx).collect();
        let dv: Vec<f64> = finals.iter().filter_map(|r| r.dv).collect();
        let summary = Row {
            seed: None,
            flocking: Some(frac),
            dx: Some(mean_and_se(&dx).0),
            dv: Some(mean_and_se(&dv).0),
            kernel_evals: None,
            wall_clock: None,
            ..(*first).clone()
        };
        table.push(summary);
    }
    Ok(CuckerSmaleOutcome { table, traces })
}

/// Velocity traces as CSV: `mode,seed,t,v0,v1,...`.
pub fn traces_to_csv(traces: &[VelocityTrace]) -> Result<String> {
    use super::table::format_real;
    let width = traces
        .iter()
        .flat_map(|t| t.velocities.iter().map(Vec::len))
        .max()
        .unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| crate::error::Error::InvalidParameter(e.to_string());
    let mut header = vec!["mode".to_string(), "seed".into(), "t".into()];
    header.extend((0..width).map(|k| format!("v{k}")));
    w.write_record(&header).map_err(err)?;
    for tr in traces {
        for (t, v) in tr.times.iter().zip(&tr.velocities) {
            let mut rec = vec![tr.mode.clone(), tr.seed.to_string(), format_real(*t)];
            rec.extend(v.iter().map(|x| format_real(*x)));
            w.write_record(&rec).map_err(err)?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| crate::error::Error::InvalidParameter(e.to_string()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}
