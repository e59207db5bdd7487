use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rbm-levy"));
    cmd.env_remove("RBM_LEVY_THREADS");
    cmd
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn one_line_error(out: &Output) -> String {
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(err.lines().count(), 1, "stderr: {err}");
    assert!(err.starts_with("error: "));
    err
}

const SMALL_SWEEP: &str = r#"
n_particles = 8
fine_step = "2^-8"
kappas = ["2^-4", "2^-5"]
n_seeds = 3
"#;

#[test]
fn rate_sweep_output_is_independent_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.toml", SMALL_SWEEP);
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}/sweep.csv"));
        let status = bin()
            .args(["--threads", threads, "rate-sweep", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.swap_remove(0)).unwrap();
    assert!(text.starts_with("experiment,config_id,seed,mode,a,n,kappa,t,e1,"));
}

#[test]
fn json_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.toml", SMALL_SWEEP);
    let out = bin()
        .args(["rate-sweep", "--format", "json", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.trim_start().starts_with('[') && text.contains("\"experiment\":\"rate_sweep\""));
}

#[test]
fn unknown_key_fails_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "n_particles = 8\nbatchsize = 2\n");
    let out = bin()
        .args(["rate-sweep", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    let err = one_line_error(&out);
    assert!(
        err.contains("batchsize") && err.contains("bad.toml"),
        "{err}"
    );
}

#[test]
fn config_for_another_experiment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "lt.toml", "kind = \"long_time\"\n");
    let out = bin()
        .args(["rate-sweep", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    let err = one_line_error(&out);
    assert!(err.contains("long_time"), "{err}");
}

#[test]
fn missing_config_file() {
    let out = bin()
        .args(["cost-bench", "--config", "/nonexistent/cb.toml"])
        .output()
        .unwrap();
    one_line_error(&out);
}

#[test]
fn threads_flag_wins_over_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.toml",
        "n_particles = 4\nfine_step = \"2^-6\"\nbatch_step = \"2^-4\"\nn_seeds = 1\n",
    );
    let bad_env = bin()
        .env("RBM_LEVY_THREADS", "0")
        .args(["rate-sweep", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    one_line_error(&bad_env);
    let ok = bin()
        .env("RBM_LEVY_THREADS", "0")
        .args(["--threads", "2", "rate-sweep", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(ok.status.success());
}

#[test]
fn dry_run_prints_effective_config() {
    let out = bin().args(["cucker-smale", "--dry-run"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("kind = \"cucker_smale\""));
    assert!(text.contains("cucker_smale:beta=5"));
}

#[test]
fn cucker_smale_writes_traces_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cs.toml",
        "n_particles = 4\nhorizon = 1\nn_seeds = 2\n",
    );
    let out = dir.path().join("cs.csv");
    let status = bin()
        .args(["cucker-smale", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let traces = std::fs::read_to_string(dir.path().join("cs_velocities.csv")).unwrap();
    assert!(traces.starts_with("mode,seed,t,v0,v1,v2,v3\n"));
    // 2 modes x 2 seeds x (16 windows + initial state)
    assert_eq!(traces.lines().count(), 1 + 2 * 2 * 17);

    let svg = dir.path().join("plots/cs.svg");
    let status = bin()
        .args(["plot", "--input"])
        .arg(&out)
        .arg("--out")
        .arg(&svg)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));
}

#[test]
fn plot_rejects_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let header = "experiment,config_id,seed,mode,a,n,kappa,t,e1,e1_se,w1,slope,dx,dv,flocking,kernel_evals,wall_clock\n";
    let csv = write(dir.path(), "empty.csv", header);
    let out = bin()
        .args(["plot", "--config"])
        .arg(&csv)
        .arg("--out")
        .arg(dir.path().join("x.svg"))
        .output()
        .unwrap();
    one_line_error(&out);
}
