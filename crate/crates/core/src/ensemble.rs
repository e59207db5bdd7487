use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Particle states at one time point, stored row-major `N × d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    pub positions: Vec<f64>,
    pub velocities: Option<Vec<f64>>,
    pub dim: usize,
    pub t: f64,
}

impl ParticleEnsemble {
    pub fn new(positions: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || positions.is_empty() || !positions.len().is_multiple_of(dim) {
            return invalid(format!(
                "{} coordinates do not form particles of dimension {dim}",
                positions.len()
            ));
        }
        Ok(Self {
            positions,
            velocities: None,
            dim,
            t: 0.0,
        })
    }

    pub fn from_1d(xs: &[f64]) -> Self {
        Self {
            positions: xs.to_vec(),
            velocities: None,
            dim: 1,
            t: 0.0,
        }
    }

    pub fn with_velocities(mut self, velocities: Vec<f64>) -> Result<Self> {
        if velocities.len() != self.positions.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} velocity coordinates for {} position coordinates",
                velocities.len(),
                self.positions.len()
            )));
        }
        self.velocities = Some(velocities);
        Ok(self)
    }

    pub fn n_particles(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocity(&self, i: usize) -> Option<&[f64]> {
        self.velocities
            .as_ref()
            .map(|v| &v[i * self.dim..(i + 1) * self.dim])
    }

    /// Fail with the offending particle if any coordinate is NaN or infinite.
    pub fn check_finite(&self, step: u64) -> Result<()> {
        let bad = |xs: &[f64]| xs.iter().position(|x| !x.is_finite()).map(|k| k / self.dim);
        let particle = bad(&self.positions).or_else(|| self.velocities.as_deref().and_then(bad));
        match particle {
            Some(particle) => Err(Error::NonFinite { step, particle }),
            None => Ok(()),
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dim == other.dim && self.positions.len() == other.positions.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checks() {
        assert!(ParticleEnsemble::new(vec![0.0; 6], 4).is_err());
        let e = ParticleEnsemble::new(vec![0.0; 6], 3).unwrap();
        assert_eq!(e.n_particles(), 2);
        assert!(e.clone().with_velocities(vec![0.0; 5]).is_err());
    }

    #[test]
    fn non_finite_reports_particle() {
        let mut e = ParticleEnsemble::from_1d(&[0.0, 1.0, 2.0]);
        assert!(e.check_finite(0).is_ok());
        e.positions[2] = f64::NAN;
        match e.check_finite(17) {
            Err(Error::NonFinite { step, particle }) => assert_eq!((step, particle), (17, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
