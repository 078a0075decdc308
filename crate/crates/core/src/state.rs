//! Phase-space points `z = (x, v)`.

use crate::error::{domain, Result};

/// A point in position-velocity space `R^d x R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl PhaseState {
    /// Builds a state, checking that both blocks have the same length `d >= 1`
    /// and only finite entries.
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if x.is_empty() || x.len() != v.len() {
            return domain(format!(
                "position and velocity must have equal nonzero length (got {} and {})",
                x.len(),
                v.len()
            ));
        }
        if x.iter().chain(v.iter()).any(|c| !c.is_finite()) {
            return domain("phase state entries must be finite");
        }
        Ok(Self { x, v })
    }

    /// The origin of `R^{2d}`.
    pub fn zeros(d: usize) -> Self {
        Self {
            x: vec![0.0; d],
            v: vec![0.0; d],
        }
    }

    /// One-dimensional convenience constructor.
    pub fn scalar(x: f64, v: f64) -> Self {
        Self { x: vec![x], v: vec![v] }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Euclidean distance in `R^{2d}`.
    pub fn euclidean_distance(&self, other: &PhaseState) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .chain(self.v.iter().zip(&other.v))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Euclidean norm of a slice.
pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|c| c * c).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_blocks() {
        assert!(PhaseState::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(PhaseState::new(vec![], vec![]).is_err());
        assert!(PhaseState::new(vec![f64::NAN], vec![0.0]).is_err());
        assert!(PhaseState::new(vec![1.0, 2.0], vec![0.0, 3.0]).is_ok());
    }

    #[test]
    fn euclidean_distance_uses_both_blocks() {
        let a = PhaseState::scalar(3.0, 0.0);
        let b = PhaseState::scalar(0.0, 4.0);
        assert_eq!(a.euclidean_distance(&b), 5.0);
    }
}
