//! Acceptance suite. Runs every criterion in sequence and prints one
//! PASS/FAIL line each. Exits nonzero if a criterion fails unexpectedly.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rbm_levy::dynamics::MeanAbsObserver;
use rbm_levy::experiments::{
    run_cost_bench, run_cucker_smale, run_long_time, run_rate_sweep, ExperimentConfig,
    ExperimentKind, ResultTable,
};
use rbm_levy::initial::{metropolis_semicircle, semicircle_cdf, MhSettings};
use rbm_levy::metrics::{mean_and_se, spearman, wasserstein_1d};
use rbm_levy::noise::{
    empirical_char_function, sample_alpha_stable_increment, sample_compound_poisson_increment,
};
use rbm_levy::{
    batch_mean_force, full_mean_force, run_coupled, run_from, BatchPartition, InitialLaw,
    InteractionKernel, JumpPart, LevyNoiseSpec, Mode, ParticleEnsemble, SimulationConfig,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Criterion {
    name: &'static str,
    run: fn() -> Outcome,
    /// Failing is the documented result; see README.
    known_failure: bool,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "convergence rate",
            run: convergence_rate,
            known_failure: false,
        },
        Criterion {
            name: "uniform-in-time error",
            run: uniform_in_time,
            known_failure: false,
        },
        Criterion {
            name: "cost scaling",
            run: cost_scaling,
            known_failure: false,
        },
        Criterion {
            name: "batch unbiasedness",
            run: batch_unbiasedness,
            known_failure: false,
        },
        Criterion {
            name: "sampler fidelity",
            run: sampler_fidelity,
            known_failure: false,
        },
        Criterion {
            name: "degeneracy identities",
            run: degeneracy,
            known_failure: false,
        },
        Criterion {
            name: "cucker-smale scenarios",
            run: cucker_smale,
            known_failure: true,
        },
        Criterion {
            name: "moment boundedness",
            run: moment_bound,
            known_failure: false,
        },
    ];
    let mut unexpected = 0;
    for (k, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = (c.run)();
        let secs = start.elapsed().as_secs_f64();
        let verdict = match (out.pass, c.known_failure) {
            (true, false) => "PASS",
            (true, true) => "PASS (listed as known failure)",
            (false, true) => "FAIL (known)",
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!(
            "[{verdict}] {}. {}: {} ({secs:.1}s)",
            k + 1,
            c.name,
            out.detail
        );
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn summary_rows<'a>(
    table: &'a ResultTable,
) -> impl Iterator<Item = &'a rbm_levy::experiments::Row> + 'a {
    table.rows.iter().filter(|r| r.seed.is_none())
}

fn convergence_rate() -> Outcome {
    let mut slopes = Vec::new();
    for n in [50, 100] {
        let mut cfg = ExperimentConfig::preset(ExperimentKind::RateSweep);
        cfg.n_values = vec![n];
        cfg.a_values = vec![1.0];
        let table = match run_rate_sweep(&cfg) {
            Ok(t) => t,
            Err(e) => return outcome(false, e.to_string()),
        };
        let slope = summary_rows(&table).find_map(|r| r.slope);
        match slope {
            Some(s) => slopes.push((n, s)),
            None => return outcome(false, format!("no slope for N={n}")),
        }
    }
    let pass = slopes.iter().all(|&(_, s)| (0.35..=0.65).contains(&s));
    let detail = slopes
        .iter()
        .map(|(n, s)| format!("N={n} slope {s:.3}"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(pass, format!("{detail}; band [0.35, 0.65]"))
}

fn uniform_in_time() -> Outcome {
    let cfg = ExperimentConfig::preset(ExperimentKind::LongTime);
    let table = match run_long_time(&cfg) {
        Ok(t) => t,
        Err(e) => return outcome(false, e.to_string()),
    };
    let series = |a: f64| -> Vec<(f64, f64, f64)> {
        summary_rows(&table)
            .filter(|r| r.a == Some(a) && r.e1.is_some())
            .map(|r| (r.t.unwrap(), r.e1.unwrap(), r.e1_se.unwrap_or(0.0)))
            .collect()
    };
    let confined = series(1.0);
    let free = series(0.0);
    let (Some(first), Some(last)) = (confined.first(), confined.last()) else {
        return outcome(false, "missing a=1 rows");
    };
    let ratio = last.1 / first.1;
    let mut inversions = 0;
    let mut within = true;
    for w in free.windows(2) {
        if w[1].1 < w[0].1 {
            inversions += 1;
            within &= w[0].1 - w[1].1 <= 2.0 * w[0].2.hypot(w[1].2);
        }
    }
    let ts: Vec<f64> = free.iter().map(|p| p.0).collect();
    let es: Vec<f64> = free.iter().map(|p| p.1).collect();
    let rho = spearman(&ts, &es).unwrap_or(f64::NAN);
    let pass = ratio <= 3.0 && free.len() == 5 && inversions <= 1 && within;
    outcome(
        pass,
        format!(
            "a=1: E1(16)/E1(1) = {ratio:.3} (limit 3); a=0: {inversions} inversion(s), spearman {rho:.2}, E1 {}",
            es.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn cost_scaling() -> Outcome {
    let cfg = ExperimentConfig::preset(ExperimentKind::CostBench);
    let table = match run_cost_bench(&cfg) {
        Ok(t) => t,
        Err(e) => return outcome(false, e.to_string()),
    };
    let steps = (cfg.base.horizon / cfg.base.fine_step).round() as u64;
    let p = cfg.base.batch_size as u64;
    let mut counts_ok = true;
    for r in table.rows.iter().filter(|r| r.seed.is_some()) {
        let n = r.n.unwrap() as u64;
        let expected = match r.mode.as_deref() {
            Some("full") => steps * n * (n - 1),
            _ => steps * n * (p - 1),
        };
        counts_ok &= r.kernel_evals == Some(expected);
    }
    let slope =
        |m: &str| summary_rows(&table).find(|r| r.mode.as_deref() == Some(m) && r.slope.is_some());
    let full = slope("full").and_then(|r| r.slope).unwrap_or(f64::NAN);
    let rbm = slope("rbm").and_then(|r| r.slope).unwrap_or(f64::NAN);
    let pass = counts_ok && (1.7..=2.3).contains(&full) && (0.8..=1.3).contains(&rbm);
    outcome(
        pass,
        format!("kernel counts exact: {counts_ok}; wall-clock exponent full {full:.3} in [1.7, 2.3], rbm {rbm:.3} in [0.8, 1.3]"),
    )
}

/// Every partition of `0..n` into unordered batches of size `p`.
fn all_partitions(n: usize, p: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(rest: Vec<usize>, p: usize, acc: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        let Some((&head, tail)) = rest.split_first() else {
            out.push(acc.clone());
            return;
        };
        // choose p-1 mates for the smallest remaining index
        let mut pick = vec![0usize; p - 1];
        fn choose(
            tail: &[usize],
            start: usize,
            depth: usize,
            pick: &mut Vec<usize>,
            f: &mut dyn FnMut(&[usize]),
        ) {
            if depth == pick.len() {
                f(pick);
                return;
            }
            for k in start..tail.len() {
                pick[depth] = k;
                choose(tail, k + 1, depth + 1, pick, f);
            }
        }
        let mut chosen: Vec<Vec<usize>> = Vec::new();
        choose(tail, 0, 0, &mut pick, &mut |ix| chosen.push(ix.to_vec()));
        for ix in chosen {
            let mut batch = vec![head];
            batch.extend(ix.iter().map(|&k| tail[k]));
            let remaining: Vec<usize> = tail
                .iter()
                .enumerate()
                .filter(|(k, _)| !ix.contains(k))
                .map(|(_, &v)| v)
                .collect();
            acc.push(batch);
            rec(remaining, p, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    rec((0..n).collect(), p, &mut Vec::new(), &mut out);
    out
}

fn batch_unbiasedness() -> Outcome {
    let kernel = InteractionKernel::SmoothBounded;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut counts = Vec::new();
    for (n, p) in [(4, 2), (6, 2), (6, 3)] {
        let parts: Vec<BatchPartition> = all_partitions(n, p)
            .iter()
            .map(|b| BatchPartition::from_batches(b).unwrap())
            .collect();
        counts.push(format!("({n},{p}): {} partitions", parts.len()));
        for _ in 0..100 {
            let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let ens = ParticleEnsemble::from_1d(&xs);
            for i in 0..n {
                let full = full_mean_force(i, &ens, &kernel).unwrap()[0];
                let mean = parts
                    .iter()
                    .map(|b| batch_mean_force(i, b, &ens, &kernel).unwrap()[0])
                    .sum::<f64>()
                    / parts.len() as f64;
                let rel = (mean - full).abs() / full.abs().max(1e-300);
                worst = worst.max(rel);
            }
        }
    }
    outcome(
        worst <= 1e-12,
        format!(
            "{}; worst relative error {worst:.2e} (limit 1e-12)",
            counts.join(", ")
        ),
    )
}

fn sampler_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples: Vec<f64> = (0..1_000_000)
        .map(|_| sample_alpha_stable_increment(1.5, 1.0, &mut rng).unwrap())
        .collect();
    let mut cf_err = 0.0f64;
    for u in [0.25f64, 0.5, 1.0, 2.0] {
        let phi = empirical_char_function(&samples, u).unwrap();
        let exact = (-u.abs().powf(1.5)).exp();
        cf_err = cf_err.max((phi.re - exact).abs().hypot(phi.im));
    }

    let (lambda, t, sdev) = (0.5, 1.0, 1.0);
    let xs: Vec<f64> = (0..1_000_000)
        .map(|_| sample_compound_poisson_increment(lambda, sdev, t, &mut rng).unwrap())
        .collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    let expected = lambda * t * sdev * sdev;
    let var_rel = (var - expected).abs() / expected;

    let mut mh = metropolis_semicircle(2.0, 100_000, MhSettings::default(), &mut rng);
    mh.sort_by(f64::total_cmp);
    let n = mh.len() as f64;
    let ks = mh
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = semicircle_cdf(x, 2.0);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0f64, f64::max);

    let pass = cf_err <= 0.01 && var_rel <= 0.02 && ks < 0.01;
    outcome(
        pass,
        format!("stable cf max error {cf_err:.4} (limit 0.01); compound Poisson variance rel error {var_rel:.4} (limit 0.02); MH KS {ks:.4} (limit 0.01)"),
    )
}

fn brute_force_w1(a: &[f64], b: &[f64]) -> f64 {
    fn permute(k: usize, idx: &mut Vec<usize>, a: &[f64], b: &[f64], best: &mut f64) {
        if k == idx.len() {
            let c = idx
                .iter()
                .enumerate()
                .map(|(i, &j)| (a[i] - b[j]).abs())
                .sum::<f64>()
                / a.len() as f64;
            *best = best.min(c);
            return;
        }
        for s in k..idx.len() {
            idx.swap(k, s);
            permute(k + 1, idx, a, b, best);
            idx.swap(k, s);
        }
    }
    let mut best = f64::INFINITY;
    permute(0, &mut (0..a.len()).collect(), a, b, &mut best);
    best
}

fn degeneracy() -> Outcome {
    let base = SimulationConfig {
        n_particles: 8,
        horizon: 1.0,
        ..SimulationConfig::default()
    };
    let max_e1 = |cfg: &SimulationConfig| -> f64 {
        match run_coupled(cfg) {
            Ok(run) => run.series.e1.iter().fold(0.0f64, |m, &e| m.max(e)),
            Err(_) => f64::NAN,
        }
    };
    let single_batch = max_e1(&SimulationConfig {
        batch_size: 8,
        ..base.clone()
    });
    let zero_kernel = max_e1(&SimulationConfig {
        kernel: InteractionKernel::Zero,
        ..base.clone()
    });

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mu: Vec<f64> = (0..500).map(|_| rng.random_range(-5.0..5.0)).collect();
    let self_w1 = wasserstein_1d(&mu, &mu, 1).unwrap_or(f64::NAN);

    let mut worst = 0.0f64;
    for n in 1..=6 {
        for _ in 0..50 {
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let sorted = wasserstein_1d(&a, &b, 1).unwrap();
            let brute = brute_force_w1(&a, &b);
            worst = worst.max((sorted - brute).abs() / brute.max(1e-300));
        }
    }
    let pass = single_batch == 0.0 && zero_kernel == 0.0 && self_w1 == 0.0 && worst <= 1e-12;
    outcome(
        pass,
        format!("p=N max E1 {single_batch:e}; zero kernel max E1 {zero_kernel:e}; W1(mu,mu) {self_w1:e}; sorted vs brute-force W1 worst rel {worst:.1e}"),
    )
}

fn cucker_smale() -> Outcome {
    let scenarios = [
        (1.0, 0.1, true),
        (1.0, 0.0, true),
        (0.0, 0.1, false),
        (0.0, 0.0, false),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (sigma, lambda, expect_flock) in scenarios {
        let mut cfg = ExperimentConfig::preset(ExperimentKind::CuckerSmale);
        cfg.base.noise = LevyNoiseSpec {
            drift_b: 0.0,
            gaussian_sigma: sigma,
            jump_part: if lambda > 0.0 {
                JumpPart::CompoundPoisson {
                    rate_lambda: lambda,
                    jump_sdev: 1.0,
                }
            } else {
                JumpPart::None
            },
        };
        let out = match run_cucker_smale(&cfg) {
            Ok(o) => o,
            Err(e) => return outcome(false, e.to_string()),
        };
        let frac = |m: &str| {
            summary_rows(&out.table)
                .find(|r| r.mode.as_deref() == Some(m))
                .and_then(|r| r.flocking)
                .unwrap_or(f64::NAN)
        };
        let (full, rbm) = (frac("full"), frac("rbm"));
        let verdict = |f: f64| f > 0.5;
        pass &= verdict(full) == expect_flock && verdict(rbm) == expect_flock;
        parts.push(format!(
            "sigma={sigma},lambda={lambda}: flocking fraction full {full:.1} rbm {rbm:.1} (want {})",
            if expect_flock { "flock" } else { "no flock" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn moment_bound() -> Outcome {
    let cfg = SimulationConfig {
        n_particles: 1000,
        horizon: 16.0,
        mode: Mode::Rbm,
        initial: InitialLaw::STANDARD_SEMICIRCLE,
        ..SimulationConfig::default()
    };
    let init = match rbm_levy::initial_state(&cfg) {
        Ok(s) => s,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mut obs = MeanAbsObserver::default();
    if let Err(e) = run_from(&cfg, init, &mut [&mut obs]) {
        return outcome(false, e.to_string());
    }
    let Some(k1) = obs.times.iter().position(|&t| (t - 1.0).abs() < 1e-9) else {
        return outcome(false, "no record at t=1");
    };
    let at_one = obs.mean_abs[k1];
    let peak = obs.mean_abs.iter().fold(0.0f64, |m, &v| m.max(v));
    let (late_mean, _) = mean_and_se(&obs.mean_abs[k1..]);
    outcome(
        peak <= 3.0 * at_one,
        format!("mean |X| at t=1 {at_one:.4}, max over [0,16] {peak:.4} (limit {:.4}), mean over [1,16] {late_mean:.4}", 3.0 * at_one),
    )
}
