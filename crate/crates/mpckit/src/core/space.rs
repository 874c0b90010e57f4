//! Action spaces: per-dimension boxes for continuous control and finite sets
//! for discrete control.

use thiserror::Error;

use super::seq::ActionSequence;

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("bound lengths differ: low has {low}, high has {high}")]
    LengthMismatch { low: usize, high: usize },
    #[error("bounds must be finite with low <= high (dim {dim}: {low} .. {high})")]
    BadBounds { dim: usize, low: f64, high: f64 },
    #[error("sequence width {found} does not match the {expected}-dim space")]
    DimMismatch { expected: usize, found: usize },
}

/// Box-bounded continuous actions, one (low, high) pair per dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousActionSpace {
    low: Vec<f64>,
    high: Vec<f64>,
}

impl ContinuousActionSpace {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self, SpaceError> {
        if low.len() != high.len() {
            return Err(SpaceError::LengthMismatch {
                low: low.len(),
                high: high.len(),
            });
        }
        for (dim, (&lo, &hi)) in low.iter().zip(&high).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(SpaceError::BadBounds { dim, low: lo, high: hi });
            }
        }
        Ok(Self { low, high })
    }

    /// [-bound, bound] in every dimension.
    pub fn symmetric(dims: usize, bound: f64) -> Self {
        Self::new(vec![-bound; dims], vec![bound; dims]).expect("symmetric bounds are valid")
    }

    pub fn dims(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    /// Elementwise clamp of every step to the box. Idempotent; in-bounds
    /// values pass through bit-exactly.
    pub fn clip(&self, seq: &ActionSequence) -> Result<ActionSequence, SpaceError> {
        let mut out = seq.clone();
        self.clip_in_place(&mut out)?;
        Ok(out)
    }

    pub fn clip_in_place(&self, seq: &mut ActionSequence) -> Result<(), SpaceError> {
        if seq.dims() != self.dims() {
            return Err(SpaceError::DimMismatch {
                expected: self.dims(),
                found: seq.dims(),
            });
        }
        for mut row in seq.values_mut().rows_mut() {
            for (d, v) in row.iter_mut().enumerate() {
                *v = v.clamp(self.low[d], self.high[d]);
            }
        }
        Ok(())
    }

    pub fn contains(&self, seq: &ActionSequence) -> bool {
        seq.dims() == self.dims()
            && seq
                .values()
                .rows()
                .into_iter()
                .all(|row| row.iter().enumerate().all(|(d, &v)| v >= self.low[d] && v <= self.high[d]))
    }
}

/// A finite action set 0..cardinality.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiscreteActionSpace {
    cardinality: usize,
}

impl DiscreteActionSpace {
    pub fn new(cardinality: usize) -> Self {
        assert!(cardinality > 0, "discrete space needs at least one action");
        Self { cardinality }
    }

    pub fn cardinality(&self) -> usize {
        self.cardinality
    }
}
