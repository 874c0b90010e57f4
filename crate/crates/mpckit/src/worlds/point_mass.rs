//! Free 2-D point mass under semi-implicit Euler with linear drag. The
//! rollout is affine in the actions, so the trajectory cost has an exact
//! adjoint gradient. Used standalone and as the smooth planning surrogate
//! for the walled two-room world.

use ndarray::{array, Array1, Array2};

use crate::core::{ActionSequence, CostModel, DynamicsModel, StateVec};

/// State is (x, y, v_x, v_y); actions are accelerations (a_x, a_y).
#[derive(Clone, Debug)]
pub struct PointMassModel {
    pub dt: f64,
    pub drag: f64,
    /// Weight of the squared-action term in the cost.
    pub action_weight: f64,
    /// Goal position (x, y).
    pub goal: [f64; 2],
    /// Radius of the action-norm constraint ||a_t||^2 <= bound^2.
    pub action_bound: f64,
}

impl PointMassModel {
    pub fn new(dt: f64, drag: f64, goal: [f64; 2]) -> Self {
        Self {
            dt,
            drag,
            action_weight: 0.01,
            goal,
            action_bound: 1.0,
        }
    }

    fn state_matrix(&self) -> Array2<f64> {
        let keep = 1.0 - self.drag;
        let dt = self.dt;
        array![
            [1.0, 0.0, dt * keep, 0.0],
            [0.0, 1.0, 0.0, dt * keep],
            [0.0, 0.0, keep, 0.0],
            [0.0, 0.0, 0.0, keep],
        ]
    }

    fn action_matrix(&self) -> Array2<f64> {
        let dt = self.dt;
        array![[dt * dt, 0.0], [0.0, dt * dt], [dt, 0.0], [0.0, dt]]
    }

    /// d(stage cost)/d(state) at a successor state: position error only.
    fn stage_state_grad(&self, s: &[f64]) -> Array1<f64> {
        array![
            2.0 * (s[0] - self.goal[0]),
            2.0 * (s[1] - self.goal[1]),
            0.0,
            0.0
        ]
    }

    fn stage_cost(&self, s: &[f64], action: &[f64]) -> f64 {
        let dx = s[0] - self.goal[0];
        let dy = s[1] - self.goal[1];
        let effort: f64 = action.iter().map(|a| a * a).sum();
        dx * dx + dy * dy + self.action_weight * effort
    }

    fn rollout_states(&self, s0: &StateVec, seq: &ActionSequence) -> Vec<[f64; 4]> {
        let mut states = Vec::with_capacity(seq.horizon() + 1);
        states.push([s0.0[0], s0.0[1], s0.0[2], s0.0[3]]);
        for t in 0..seq.horizon() {
            let s = states[t];
            let a = [seq.values()[[t, 0]], seq.values()[[t, 1]]];
            states.push(self.advance(&s, &a));
        }
        states
    }

    fn advance(&self, s: &[f64; 4], a: &[f64; 2]) -> [f64; 4] {
        let keep = 1.0 - self.drag;
        let vx = keep * s[2] + self.dt * a[0];
        let vy = keep * s[3] + self.dt * a[1];
        [s[0] + self.dt * vx, s[1] + self.dt * vy, vx, vy]
    }
}

impl CostModel for PointMassModel {
    fn batched_cost(&self, s0: &StateVec, candidates: &[ActionSequence]) -> Vec<f64> {
        crate::core::parallel_costs(candidates, |seq| {
            let states = self.rollout_states(s0, seq);
            (0..seq.horizon())
                .map(|t| {
                    let a = [seq.values()[[t, 0]], seq.values()[[t, 1]]];
                    self.stage_cost(&states[t + 1], &a)
                })
                .sum()
        })
    }

    fn cost_and_grad(&self, s0: &StateVec, seq: &ActionSequence) -> Option<(f64, Array2<f64>)> {
        let h = seq.horizon();
        let states = self.rollout_states(s0, seq);
        let cost = (0..h)
            .map(|t| {
                let a = [seq.values()[[t, 0]], seq.values()[[t, 1]]];
                self.stage_cost(&states[t + 1], &a)
            })
            .sum();

        let f_t = self.state_matrix().reversed_axes();
        let g_t = self.action_matrix().reversed_axes();
        let mut grad = Array2::zeros((h, 2));
        let mut adjoint: Array1<f64> = Array1::zeros(4);
        for t in (0..h).rev() {
            adjoint += &self.stage_state_grad(&states[t + 1]);
            let ga = g_t.dot(&adjoint);
            grad[[t, 0]] = ga[0] + 2.0 * self.action_weight * seq.values()[[t, 0]];
            grad[[t, 1]] = ga[1] + 2.0 * self.action_weight * seq.values()[[t, 1]];
            adjoint = f_t.dot(&adjoint);
        }
        Some((cost, grad))
    }

    fn constraints(&self, _s0: &StateVec, seq: &ActionSequence) -> Option<Vec<f64>> {
        let r2 = self.action_bound * self.action_bound;
        Some(
            seq.values()
                .rows()
                .into_iter()
                .map(|row| row.iter().map(|a| a * a).sum::<f64>() - r2)
                .collect(),
        )
    }

    fn constraint_grads(&self, _s0: &StateVec, seq: &ActionSequence) -> Option<Vec<Array2<f64>>> {
        let (h, d) = (seq.horizon(), seq.dims());
        Some(
            (0..h)
                .map(|t| {
                    let mut g = Array2::zeros((h, d));
                    for j in 0..d {
                        g[[t, j]] = 2.0 * seq.values()[[t, j]];
                    }
                    g
                })
                .collect(),
        )
    }
}

impl DynamicsModel for PointMassModel {
    fn state_dim(&self) -> usize {
        4
    }

    fn predict(&self, s: &StateVec, action: &[f64]) -> StateVec {
        let next = self.advance(
            &[s.0[0], s.0[1], s.0[2], s.0[3]],
            &[action[0], action[1]],
        );
        StateVec(next.to_vec())
    }

    fn action_jacobian(&self, _s: &StateVec, _action: &[f64]) -> Array2<f64> {
        self.action_matrix()
    }
}
