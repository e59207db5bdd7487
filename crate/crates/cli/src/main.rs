use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rbm_levy::experiments::{
    emit, run_experiment, traces_to_csv, EmitFormat, ExperimentConfig, ExperimentKind, ResultTable,
};

mod plot;

/// Random batch simulation of interacting particles driven by Lévy noise.
#[derive(Parser)]
#[command(name = "rbm-levy", version)]
struct Cli {
    /// Worker threads for independent runs (default: all cores).
    #[arg(long, global = true, env = "RBM_LEVY_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error against batch step κ, with a log-log slope fit.
    RateSweep(RunArgs),
    /// Error against horizon T.
    LongTime(RunArgs),
    /// Wall clock and kernel evaluations against N.
    CostBench(RunArgs),
    /// Flocking scenarios for Cucker-Smale dynamics.
    CuckerSmale(RunArgs),
    /// Render a result CSV to an SVG chart.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file; omitted keys take the experiment's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (default: the config's `output`, else stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's output format.
    #[arg(long, value_parser = parse_format)]
    format: Option<EmitFormat>,
    /// Print the effective config and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct PlotArgs {
    /// Result CSV written by one of the experiment subcommands.
    #[arg(long, alias = "input")]
    config: PathBuf,
    /// SVG file to write.
    #[arg(long)]
    out: PathBuf,
}

fn parse_format(s: &str) -> Result<EmitFormat, String> {
    match s {
        "csv" => Ok(EmitFormat::Csv),
        "json" => Ok(EmitFormat::Json),
        _ => Err(format!("unknown format `{s}` (csv or json)")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let reason = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {reason}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool")?;
    }
    let (kind, args) = match cli.command {
        Command::RateSweep(a) => (ExperimentKind::RateSweep, a),
        Command::LongTime(a) => (ExperimentKind::LongTime, a),
        Command::CostBench(a) => (ExperimentKind::CostBench, a),
        Command::CuckerSmale(a) => (ExperimentKind::CuckerSmale, a),
        Command::Plot(p) => {
            let table = ResultTable::read_csv(&p.config)?;
            return plot::render(&table, &p.out);
        }
    };
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load_as(path, kind)?,
        None => ExperimentConfig::preset(kind),
    };
    if let Some(f) = args.format {
        cfg.format = f;
    }
    if args.dry_run {
        print!("{}", cfg.to_config_string());
        return Ok(());
    }
    let out_path = args.out.or_else(|| cfg.output.clone());
    log::info!("running {} ({} seeds)", kind.name(), cfg.n_seeds);
    let output = run_experiment(&cfg)?;
    match &out_path {
        Some(path) => {
            emit(&output.table, path, cfg.format)?;
            if !output.traces.is_empty() {
                let tpath = traces_path(path);
                std::fs::write(&tpath, traces_to_csv(&output.traces)?)
                    .with_context(|| format!("writing {}", tpath.display()))?;
            }
        }
        None => {
            let text = match cfg.format {
                EmitFormat::Csv => output.table.to_csv_string()?,
                EmitFormat::Json => output.table.to_json_string()?,
            };
            print!("{text}");
        }
    }
    Ok(())
}

/// `results/cs.csv` -> `results/cs_velocities.csv`.
fn traces_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}_velocities.csv"))
}
