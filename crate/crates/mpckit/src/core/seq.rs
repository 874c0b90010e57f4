//! Plans and states as plain dense arrays.

use ndarray::{Array1, Array2};

/// A length-H plan: row t holds the action applied at step t. For discrete
/// solvers the row is a probability (or one-hot) vector over the action set.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSequence {
    values: Array2<f64>,
}

impl ActionSequence {
    pub fn zeros(horizon: usize, dims: usize) -> Self {
        Self {
            values: Array2::zeros((horizon, dims)),
        }
    }

    pub fn from_array(values: Array2<f64>) -> Self {
        Self { values }
    }

    /// One-hot encode a discrete action path.
    pub fn from_indices(indices: &[usize], cardinality: usize) -> Self {
        let mut values = Array2::zeros((indices.len(), cardinality));
        for (t, &a) in indices.iter().enumerate() {
            assert!(a < cardinality, "action {a} out of range 0..{cardinality}");
            values[[t, a]] = 1.0;
        }
        Self { values }
    }

    /// Uniform rows over a discrete action set.
    pub fn uniform_rows(horizon: usize, cardinality: usize) -> Self {
        Self {
            values: Array2::from_elem((horizon, cardinality), 1.0 / cardinality as f64),
        }
    }

    pub fn horizon(&self) -> usize {
        self.values.nrows()
    }

    pub fn dims(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn step(&self, t: usize) -> Array1<f64> {
        self.values.row(t).to_owned()
    }

    /// Per-row argmax with ties resolved to the lowest index.
    pub fn decode_rows(&self) -> Vec<usize> {
        self.values
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0;
                for (i, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }

    /// True when every row is a probability vector within `tol` of summing
    /// to one.
    pub fn rows_are_stochastic(&self, tol: f64) -> bool {
        self.values.rows().into_iter().all(|row| {
            row.iter().all(|&v| v >= 0.0) && (row.sum() - 1.0).abs() <= tol
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// A world state as a flat vector; the layout is documented per world.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVec(pub Vec<f64>);

impl StateVec {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn distance(&self, other: &StateVec) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl From<Vec<f64>> for StateVec {
    fn from(v: Vec<f64>) -> Self {
        StateVec(v)
    }
}
