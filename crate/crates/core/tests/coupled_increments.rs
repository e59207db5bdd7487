//! The coupled difference `Z = X_full - X_rbm` moves by O(κ) per batch window.

use rbm_levy::{initial_state, run_coupled_with, SimulationConfig};

/// Mean over particles, windows and seeds of `|Z(t_m + κ) - Z(t_m)|`.
fn mean_window_increment(kappa: f64) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for seed in 0..6 {
        let cfg = SimulationConfig {
            n_particles: 50,
            batch_step: kappa,
            seed,
            ..SimulationConfig::default()
        };
        let init = initial_state(&cfg).unwrap();
        let mut prev: Vec<f64> = vec![0.0; cfg.n_particles];
        run_coupled_with(&cfg, init, |_, full, rbm| {
            for (i, (a, b)) in full.positions.iter().zip(&rbm.positions).enumerate() {
                let z = a - b;
                total += (z - prev[i]).abs();
                prev[i] = z;
                count += 1;
            }
        })
        .unwrap();
    }
    total / count as f64
}

#[test]
fn window_increments_halve_with_kappa() {
    let means: Vec<f64> = [-5, -6, -7]
        .iter()
        .map(|&k| mean_window_increment(2f64.powi(k)))
        .collect();
    for w in means.windows(2) {
        let ratio = w[1] / w[0];
        assert!(
            (0.35..=0.65).contains(&ratio),
            "successive ratio {ratio} from {means:?}"
        );
    }
}
