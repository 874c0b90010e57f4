//! Cost-model traits shared by every solver, plus finite-difference
//! differentiation for models without an analytic gradient.

use ndarray::Array2;
use rayon::prelude::*;

use super::seq::{ActionSequence, StateVec};

/// Trajectory cost oracle. `batched_cost` must be a pure function of
/// (s0, candidate): implementations may evaluate candidates in parallel but
/// results are gathered positionally, so the returned vector never depends
/// on thread scheduling.
pub trait CostModel: Send + Sync {
    fn batched_cost(&self, s0: &StateVec, candidates: &[ActionSequence]) -> Vec<f64>;

    fn cost(&self, s0: &StateVec, seq: &ActionSequence) -> f64 {
        self.batched_cost(s0, std::slice::from_ref(seq))[0]
    }

    /// Analytic cost and gradient, when the model has one. Models backed by
    /// a non-smooth rollout may return the gradient of a smooth surrogate;
    /// that is documented on the model.
    fn cost_and_grad(&self, s0: &StateVec, seq: &ActionSequence) -> Option<(f64, Array2<f64>)> {
        let _ = (s0, seq);
        None
    }

    /// Inequality constraint values g_j(s0, A) with the convention g <= 0
    /// feasible. None when the model is unconstrained.
    fn constraints(&self, s0: &StateVec, seq: &ActionSequence) -> Option<Vec<f64>> {
        let _ = (s0, seq);
        None
    }

    /// Gradients of each constraint with respect to the action matrix.
    fn constraint_grads(&self, s0: &StateVec, seq: &ActionSequence) -> Option<Vec<Array2<f64>>> {
        let _ = (s0, seq);
        None
    }
}

/// One-step predictor with an action Jacobian; required by solvers that
/// optimize virtual intermediate states.
pub trait DynamicsModel: CostModel {
    fn state_dim(&self) -> usize;
    fn predict(&self, s: &StateVec, action: &[f64]) -> StateVec;
    /// d state' / d action, state_dim x action_dim.
    fn action_jacobian(&self, s: &StateVec, action: &[f64]) -> Array2<f64>;
}

/// What a solver hands back. `wall_time_s` is measurement, not payload:
/// determinism guarantees cover every other field.
#[derive(Clone, Debug)]
pub struct SolverResult {
    pub best_sequence: ActionSequence,
    pub best_cost: f64,
    pub iterations: u32,
    pub cost_evaluations: u64,
    pub wall_time_s: f64,
}

pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Central finite differences, (J(A + h e) - J(A - h e)) / 2h per entry.
/// All probes go through one `batched_cost` call.
pub fn finite_difference_gradient(
    model: &dyn CostModel,
    s0: &StateVec,
    seq: &ActionSequence,
    step: f64,
) -> Array2<f64> {
    let (h, d) = (seq.horizon(), seq.dims());
    let mut probes = Vec::with_capacity(2 * h * d);
    for t in 0..h {
        for j in 0..d {
            let mut plus = seq.clone();
            plus.values_mut()[[t, j]] += step;
            let mut minus = seq.clone();
            minus.values_mut()[[t, j]] -= step;
            probes.push(plus);
            probes.push(minus);
        }
    }
    let costs = model.batched_cost(s0, &probes);
    let mut grad = Array2::zeros((h, d));
    for (idx, g) in grad.iter_mut().enumerate() {
        *g = (costs[2 * idx] - costs[2 * idx + 1]) / (2.0 * step);
    }
    grad
}

/// Adapter that equips any cost model with a finite-difference
/// `cost_and_grad`. Constraints pass through untouched.
pub struct FiniteDifference<M> {
    pub model: M,
    pub step: f64,
}

impl<M: CostModel> FiniteDifference<M> {
    pub fn new(model: M) -> Self {
        Self {
            model,
            step: DEFAULT_FD_STEP,
        }
    }
}

impl<M: CostModel> CostModel for FiniteDifference<M> {
    fn batched_cost(&self, s0: &StateVec, candidates: &[ActionSequence]) -> Vec<f64> {
        self.model.batched_cost(s0, candidates)
    }

    fn cost_and_grad(&self, s0: &StateVec, seq: &ActionSequence) -> Option<(f64, Array2<f64>)> {
        let cost = self.model.cost(s0, seq);
        Some((cost, finite_difference_gradient(&self.model, s0, seq, self.step)))
    }

    fn constraints(&self, s0: &StateVec, seq: &ActionSequence) -> Option<Vec<f64>> {
        self.model.constraints(s0, seq)
    }

    fn constraint_grads(&self, s0: &StateVec, seq: &ActionSequence) -> Option<Vec<Array2<f64>>> {
        self.model.constraint_grads(s0, seq)
    }
}

/// Helper for models whose rollouts are embarrassingly parallel: map a pure
/// per-candidate cost over the batch on the rayon pool, gathering by index.
pub fn parallel_costs<F>(candidates: &[ActionSequence], per_candidate: F) -> Vec<f64>
where
    F: Fn(&ActionSequence) -> f64 + Send + Sync,
{
    candidates.par_iter().map(|c| per_candidate(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    /// J(A) = sum_t ||a_t - c||^2, gradient 2(a - c).
    struct OffsetQuadratic {
        target: f64,
    }

    impl CostModel for OffsetQuadratic {
        fn batched_cost(&self, _s0: &StateVec, candidates: &[ActionSequence]) -> Vec<f64> {
            parallel_costs(candidates, |seq| {
                seq.values().iter().map(|&a| (a - self.target) * (a - self.target)).sum()
            })
        }
    }

    /// Non-quadratic smooth cost with a known gradient, for order checks.
    struct SmoothCubic;

    impl SmoothCubic {
        fn grad(&self, seq: &ActionSequence) -> Array2<f64> {
            seq.values().mapv(|a| a.cos() + 3.0 * 0.1 * a * a)
        }
    }

    impl CostModel for SmoothCubic {
        fn batched_cost(&self, _s0: &StateVec, candidates: &[ActionSequence]) -> Vec<f64> {
            candidates
                .iter()
                .map(|seq| seq.values().iter().map(|&a| a.sin() + 0.1 * a * a * a).sum())
                .collect()
        }
    }

    #[test]
    fn central_differences_match_the_quadratic_oracle() {
        // gradient of sum ||a - 0.3||^2 at A = 0 is -0.6 in every entry
        let model = OffsetQuadratic { target: 0.3 };
        let s0 = StateVec(vec![]);
        let seq = ActionSequence::zeros(3, 2);
        let grad = finite_difference_gradient(&model, &s0, &seq, DEFAULT_FD_STEP);
        for &g in grad.iter() {
            assert!((g - (-0.6)).abs() <= 1e-6, "entry {g}");
        }
    }

    #[test]
    fn finite_differences_converge_at_second_order() {
        let model = SmoothCubic;
        let s0 = StateVec(vec![]);
        let values = ndarray::array![[0.7, -0.4], [1.2, 0.1], [-0.9, 0.5]];
        let seq = ActionSequence::from_array(values);
        let exact = model.grad(&seq);

        let err = |h: f64| {
            let fd = finite_difference_gradient(&model, &s0, &seq, h);
            (&fd - &exact).iter().map(|e| e.abs()).fold(0.0, f64::max)
        };
        let ratio = err(1e-3) / err(5e-4);
        assert!((3.2..=4.8).contains(&ratio), "O(h^2) ratio was {ratio}");
    }

    #[test]
    fn zero_horizon_costs_nothing() {
        let model = OffsetQuadratic { target: 0.3 };
        let s0 = StateVec(vec![]);
        let seq = ActionSequence::zeros(0, 2);
        assert_eq!(model.cost(&s0, &seq), 0.0);
        let grad = finite_difference_gradient(&model, &s0, &seq, DEFAULT_FD_STEP);
        assert_eq!(grad.len(), 0);
    }

    #[test]
    fn fd_adapter_reports_cost_and_grad_together() {
        let model = FiniteDifference::new(OffsetQuadratic { target: 0.3 });
        let s0 = StateVec(vec![]);
        let seq = ActionSequence::zeros(2, 2);
        let (cost, grad) = model.cost_and_grad(&s0, &seq).unwrap();
        assert!((cost - 4.0 * 0.09).abs() < 1e-12);
        assert!(grad.iter().all(|g| (g + 0.6).abs() <= 1e-6));
    }
}
