//! Random batches: uniform partitions of the particle indices into groups of
//! equal size, and the within-batch mean force.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::ensemble::ParticleEnsemble;
use crate::error::{invalid, Error, Result};
use crate::forces::{group_mean_force_into, PairKernel};

/// A partition of `0..n` into `n/p` batches of exactly `p` indices.
///
/// Batch `q` is `order[q*p .. (q+1)*p]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPartition {
    order: Vec<usize>,
    assignment: Vec<usize>,
    p: usize,
}

fn check_sizes(n: usize, p: usize) -> Result<()> {
    if p < 2 {
        return invalid(format!("batch size must be at least 2, got {p}"));
    }
    if n < p || !n.is_multiple_of(p) {
        return invalid(format!("batch size {p} does not divide particle count {n}"));
    }
    Ok(())
}

impl BatchPartition {
    /// Build from explicit batches, e.g. `[[0, 1], [2, 3]]`.
    pub fn from_batches(batches: &[Vec<usize>]) -> Result<Self> {
        let p = batches.first().map_or(0, Vec::len);
        let n = batches.iter().map(Vec::len).sum();
        check_sizes(n, p)?;
        if batches.iter().any(|b| b.len() != p) {
            return invalid("batches must all have the same size");
        }
        let order: Vec<usize> = batches.iter().flatten().copied().collect();
        Self::from_order(order, p)
    }

    fn from_order(order: Vec<usize>, p: usize) -> Result<Self> {
        let n = order.len();
        let mut assignment = vec![usize::MAX; n];
        for (k, &i) in order.iter().enumerate() {
            if i >= n || assignment[i] != usize::MAX {
                return Err(Error::InvalidParameter(format!(
                    "index {i} is out of range or repeated"
                )));
            }
            assignment[i] = k / p;
        }
        Ok(Self {
            order,
            assignment,
            p,
        })
    }

    /// The trivial partition with a single batch `0..n`.
    pub fn single(n: usize) -> Result<Self> {
        check_sizes(n, n)?;
        Self::from_order((0..n).collect(), n)
    }

    pub fn n_particles(&self) -> usize {
        self.order.len()
    }

    pub fn batch_size(&self) -> usize {
        self.p
    }

    pub fn n_batches(&self) -> usize {
        self.order.len() / self.p
    }

    pub fn batch(&self, q: usize) -> &[usize] {
        &self.order[q * self.p..(q + 1) * self.p]
    }

    pub fn batches(&self) -> impl Iterator<Item = &[usize]> {
        self.order.chunks_exact(self.p)
    }

    /// Batch id of particle `i`.
    pub fn batch_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    /// The batch containing `i` (including `i` itself).
    pub fn mates(&self, i: usize) -> &[usize] {
        self.batch(self.assignment[i])
    }

    /// Every batch is disjoint, of size `p`, and together they cover `0..n`.
    pub fn is_valid(&self) -> bool {
        let n = self.order.len();
        let mut seen = vec![false; n];
        for (q, b) in self.batches().enumerate() {
            if b.len() != self.p {
                return false;
            }
            for &i in b {
                if i >= n || seen[i] || self.assignment[i] != q {
                    return false;
                }
                seen[i] = true;
            }
        }
        seen.into_iter().all(|s| s) && n.is_multiple_of(self.p)
    }

    /// Canonical form: batches sorted internally and by first element.
    pub fn canonical(&self) -> Vec<Vec<usize>> {
        let mut bs: Vec<Vec<usize>> = self
            .batches()
            .map(|b| {
                let mut b = b.to_vec();
                b.sort_unstable();
                b
            })
            .collect();
        bs.sort();
        bs
    }

    /// Reshuffle in place: Fisher–Yates on the index order, then chunking.
    /// Members are kept ascending within each batch so that force sums run in
    /// index order.
    pub fn reshuffle<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.order.shuffle(rng);
        for b in self.order.chunks_exact_mut(self.p) {
            b.sort_unstable();
        }
        for (k, &i) in self.order.iter().enumerate() {
            self.assignment[i] = k / self.p;
        }
    }
}

/// Draw a partition of `0..n` into batches of size `p`, uniformly over all
/// such partitions.
pub fn random_partition<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    rng: &mut R,
) -> Result<BatchPartition> {
    check_sizes(n, p)?;
    let mut part = BatchPartition::from_order((0..n).collect(), p)?;
    part.reshuffle(rng);
    Ok(part)
}

/// `(1/(p-1)) Σ_{j in batch(i), j≠i} K(x_j - x_i)`.
pub fn batch_mean_force<K: PairKernel + ?Sized>(
    i: usize,
    partition: &BatchPartition,
    ensemble: &ParticleEnsemble,
    kernel: &K,
) -> Result<Vec<f64>> {
    let n = ensemble.n_particles();
    if partition.n_particles() != n {
        return Err(Error::ShapeMismatch(format!(
            "partition of {} indices for {n} particles",
            partition.n_particles()
        )));
    }
    if i >= n {
        return invalid(format!("particle {i} out of range for {n} particles"));
    }
    let mut out = vec![0.0; ensemble.dim];
    group_mean_force_into(
        i,
        partition.mates(i),
        &ensemble.positions,
        ensemble.dim,
        kernel,
        &mut out,
    );
    Ok(out)
}

/// Batch mean force on every particle; returns the number of kernel evaluations.
pub(crate) fn batch_mean_forces_into<K: PairKernel + ?Sized>(
    partition: &BatchPartition,
    positions: &[f64],
    dim: usize,
    kernel: &K,
    out: &mut [f64],
    parallel: bool,
) -> u64 {
    let row = |i: usize, o: &mut [f64]| {
        group_mean_force_into(i, partition.mates(i), positions, dim, kernel, o)
    };
    if parallel {
        out.par_chunks_exact_mut(dim)
            .enumerate()
            .for_each(|(i, o)| row(i, o));
    } else {
        out.chunks_exact_mut(dim)
            .enumerate()
            .for_each(|(i, o)| row(i, o));
    }
    (partition.n_particles() * (partition.batch_size() - 1)) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forces::{full_mean_force, InteractionKernel};
    use crate::rng::{substream, Domain};
    use std::collections::HashMap;

    const K: InteractionKernel = InteractionKernel::SmoothBounded;

    #[test]
    fn rejects_bad_sizes() {
        let mut rng = substream(0, Domain::Aux(0), 0);
        assert!(random_partition(10, 3, &mut rng).is_err());
        assert!(random_partition(10, 1, &mut rng).is_err());
        assert!(random_partition(4, 8, &mut rng).is_err());
        assert!(BatchPartition::from_batches(&[vec![0, 1], vec![1, 2]]).is_err());
        assert!(BatchPartition::from_batches(&[vec![0, 1], vec![2]]).is_err());
    }

    #[test]
    fn two_particles_have_one_partition() {
        let mut rng = substream(1, Domain::Aux(0), 0);
        for _ in 0..100 {
            let part = random_partition(2, 2, &mut rng).unwrap();
            assert_eq!(part.canonical(), vec![vec![0, 1]]);
        }
    }

    #[test]
    fn four_particles_partitions_are_uniform() {
        let mut rng = substream(2, Domain::Aux(0), 0);
        let draws = 100_000;
        let mut counts: HashMap<Vec<Vec<usize>>, usize> = HashMap::new();
        for _ in 0..draws {
            *counts
                .entry(random_partition(4, 2, &mut rng).unwrap().canonical())
                .or_default() += 1;
        }
        assert_eq!(counts.len(), 3);
        for (k, c) in counts {
            let f = c as f64 / draws as f64;
            assert!((f - 1.0 / 3.0).abs() < 0.01, "{k:?}: {f}");
        }
    }

    #[test]
    fn random_draws_are_valid() {
        let mut rng = substream(3, Domain::Aux(0), 0);
        for (n, p) in [(10, 2), (12, 3), (12, 4)] {
            for _ in 0..10_000 {
                let part = random_partition(n, p, &mut rng).unwrap();
                assert!(part.is_valid());
                assert_eq!(part.n_batches(), n / p);
            }
        }
    }

    #[test]
    fn batch_mate_inclusion_probability() {
        let (n, p) = (10usize, 2usize);
        let draws = 100_000;
        let mut rng = substream(4, Domain::Aux(0), 0);
        let hits = (0..draws)
            .filter(|_| {
                let part = random_partition(n, p, &mut rng).unwrap();
                part.batch_of(0) == part.batch_of(7)
            })
            .count();
        let q = (p - 1) as f64 / (n - 1) as f64;
        let sd = (q * (1.0 - q) / draws as f64).sqrt();
        let f = hits as f64 / draws as f64;
        assert!((f - q).abs() <= 3.0 * sd, "{f} vs {q}");
    }

    #[test]
    fn coincident_positions_give_zero() {
        let e = ParticleEnsemble::from_1d(&[0.3; 6]);
        let mut rng = substream(5, Domain::Aux(0), 0);
        let part = random_partition(6, 3, &mut rng).unwrap();
        for i in 0..6 {
            assert_eq!(batch_mean_force(i, &part, &e, &K).unwrap(), vec![0.0]);
        }
    }

    #[test]
    fn single_batch_equals_full_force() {
        let e = ParticleEnsemble::from_1d(&[-1.0, 0.3, 2.5, 4.0, -7.0]);
        let part = BatchPartition::single(5).unwrap();
        for i in 0..5 {
            assert_eq!(
                batch_mean_force(i, &part, &e, &K).unwrap(),
                full_mean_force(i, &e, &K).unwrap()
            );
        }
    }

    #[test]
    fn average_over_partitions_of_four() {
        let e = ParticleEnsemble::from_1d(&[-1.0, 0.0, 1.0, 2.0]);
        let all = [
            vec![vec![0, 1], vec![2, 3]],
            vec![vec![0, 2], vec![1, 3]],
            vec![vec![0, 3], vec![1, 2]],
        ];
        let mean: f64 = all
            .iter()
            .map(|b| {
                batch_mean_force(0, &BatchPartition::from_batches(b).unwrap(), &e, &K).unwrap()[0]
            })
            .sum::<f64>()
            / 3.0;
        // K(1) + K(2) + K(3) over three
        let full = (0.5 + 0.4 + 0.3) / 3.0;
        assert!((mean - full).abs() < 1e-15);
        assert!((full_mean_force(0, &e, &K).unwrap()[0] - full).abs() < 1e-15);
    }

    #[test]
    fn partition_size_mismatch() {
        let e = ParticleEnsemble::from_1d(&[0.0, 1.0]);
        let part = BatchPartition::single(4).unwrap();
        assert!(batch_mean_force(0, &part, &e, &K).is_err());
    }
}
