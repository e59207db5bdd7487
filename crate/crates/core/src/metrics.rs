//! Error functionals and diagnostics.

use serde::{Deserialize, Serialize};

use crate::ensemble::ParticleEnsemble;
use crate::error::{invalid, Error, Result};

/// Time-indexed diagnostics of a coupled (or second-order) run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub times: Vec<f64>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub dx: Vec<f64>,
    pub dv: Vec<f64>,
    pub kernel_eval_count: u64,
    pub wall_clock: f64,
}

impl ErrorSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Value of `e1` at the record whose time is closest to `t`.
    pub fn e1_at(&self, t: f64) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.e1)
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            .map(|(_, &e)| e)
    }
}

fn check_pair(a: &ParticleEnsemble, b: &ParticleEnsemble) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{} ensembles",
            a.n_particles(),
            a.dim,
            b.n_particles(),
            b.dim
        )));
    }
    Ok(())
}

fn particle_distances<'a>(
    a: &'a ParticleEnsemble,
    b: &'a ParticleEnsemble,
) -> impl Iterator<Item = f64> + 'a {
    a.positions
        .chunks_exact(a.dim)
        .zip(b.positions.chunks_exact(b.dim))
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt()
        })
}

/// `(1/N) Σ |x_i - x̃_i|`.
pub fn coupled_error_e1(full: &ParticleEnsemble, rbm: &ParticleEnsemble) -> Result<f64> {
    check_pair(full, rbm)?;
    Ok(particle_distances(full, rbm).sum::<f64>() / full.n_particles() as f64)
}

/// `((1/N) Σ |x_i - x̃_i|²)^(1/2)`.
pub fn coupled_error_e2(full: &ParticleEnsemble, rbm: &ParticleEnsemble) -> Result<f64> {
    check_pair(full, rbm)?;
    Ok(
        (particle_distances(full, rbm).map(|d| d * d).sum::<f64>() / full.n_particles() as f64)
            .sqrt(),
    )
}

/// Wasserstein distance of order `order` between two equal-size empirical
/// measures on the line, by sorted pairing.
pub fn wasserstein_1d(a: &[f64], b: &[f64], order: u32) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} samples",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("wasserstein distance of empty samples"));
    }
    if order == 0 {
        return invalid("wasserstein order must be >= 1");
    }
    let sorted = |xs: &[f64]| {
        let mut v = xs.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (sa, sb) = (sorted(a), sorted(b));
    let p = f64::from(order);
    let sum: f64 = sa
        .iter()
        .zip(&sb)
        .map(|(x, y)| (x - y).abs().powi(order as i32))
        .sum();
    let mean = sum / a.len() as f64;
    Ok(if order == 1 { mean } else { mean.powf(1.0 / p) })
}

/// `(D_x, D_v)`: largest pairwise distance between positions and between velocities.
pub fn flocking_diameters(state: &ParticleEnsemble) -> Result<(f64, f64)> {
    let v = state
        .velocities
        .as_deref()
        .ok_or_else(|| Error::InvalidParameter("flocking diameters need velocities".into()))?;
    Ok((
        diameter(&state.positions, state.dim),
        diameter(v, state.dim),
    ))
}

fn diameter(xs: &[f64], dim: usize) -> f64 {
    if dim == 1 {
        let (lo, hi) = xs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        return if xs.is_empty() { 0.0 } else { hi - lo };
    }
    let rows: Vec<&[f64]> = xs.chunks_exact(dim).collect();
    let mut best = 0.0f64;
    for (i, a) in rows.iter().enumerate() {
        for b in &rows[i + 1..] {
            let d2: f64 = a.iter().zip(*b).map(|(p, q)| (p - q) * (p - q)).sum();
            best = best.max(d2);
        }
    }
    best.sqrt()
}

/// Least-squares line through `(ln x, ln y)`; returns `(slope, intercept)`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} x values, {} y values",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return invalid("need at least two points for a slope");
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return invalid("log-log fit needs positive finite values");
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return invalid("log-log fit needs at least two distinct x values");
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut m = k;
        while m + 1 < idx.len() && xs[idx[m + 1]] == xs[idx[k]] {
            m += 1;
        }
        let avg = (k + m) as f64 / 2.0 + 1.0;
        for &i in &idx[k..=m] {
            r[i] = avg;
        }
        k = m + 1;
    }
    r
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return invalid("spearman needs two equal-length series of at least two points");
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let (mx, _) = mean_and_se(&rx);
    let (my, _) = mean_and_se(&ry);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    Ok(cov / (vx * vy).sqrt())
}
