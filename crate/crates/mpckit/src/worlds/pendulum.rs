//! Torque-limited pendulum swing-up. State is (angle, angular velocity) with
//! the angle measured from hanging; the goal is upright at rest. The world
//! step wraps the angle into (-pi, pi]; the planning model leaves it
//! unwrapped so gradients stay smooth.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::core::{
    ActionSequence, ContinuousActionSpace, CostModel, DynamicsModel, RandomStream, StateVec,
};

use super::variation::{sample_variation, FactorSpec, FactorValues, ResetOptions, VariationSpace};
use super::{Action, ActionSpaceKind, WorldError, WorldInstance};

pub(crate) const DT: f64 = 0.05;
const ACTION_WEIGHT: f64 = 0.01;
const ANGLE_TOLERANCE: f64 = 0.1;
const SPEED_TOLERANCE: f64 = 1.0;

/// Maps an angle into (-pi, pi].
pub fn wrap_angle(x: f64) -> f64 {
    PI - (PI - x).rem_euclid(2.0 * PI)
}

#[derive(Clone, Copy, Debug)]
struct Params {
    gravity: f64,
    length: f64,
    mass: f64,
    damping: f64,
    max_torque: f64,
}

impl Params {
    fn from_values(values: &FactorValues) -> Self {
        Self {
            gravity: values["physics.gravity"][0],
            length: values["physics.length"][0],
            mass: values["physics.mass"][0],
            damping: values["physics.damping"][0],
            max_torque: values["actuator.max_torque"][0],
        }
    }
}

/// One semi-implicit Euler step on the unwrapped state.
fn advance(p: &Params, theta: f64, omega: f64, torque: f64) -> (f64, f64) {
    let accel = (p.gravity / p.length) * theta.sin()
        + torque / (p.mass * p.length * p.length)
        - p.damping * omega;
    let omega_next = omega + DT * accel;
    let theta_next = theta + DT * omega_next;
    (theta_next, omega_next)
}

fn factor_specs() -> Vec<FactorSpec> {
    vec![
        FactorSpec::boxed("agent.start_angle", vec![-PI], vec![PI], vec![0.0]),
        FactorSpec::boxed("physics.gravity", vec![5.0], vec![15.0], vec![9.8]),
        FactorSpec::boxed("physics.length", vec![0.5], vec![2.0], vec![1.0]),
        FactorSpec::boxed("physics.mass", vec![0.5], vec![2.0], vec![1.0]),
        FactorSpec::boxed("physics.damping", vec![0.0], vec![0.5], vec![0.1]),
        FactorSpec::boxed("actuator.max_torque", vec![1.0], vec![5.0], vec![2.0]),
        FactorSpec::fixed("physics.dt", vec![DT]),
    ]
}

#[derive(Clone, Debug)]
pub struct Pendulum {
    params: Params,
    variation: FactorValues,
    state: StateVec,
    goal: StateVec,
}

impl Pendulum {
    pub fn new() -> Self {
        let variation = Self::space().defaults();
        let params = Params::from_values(&variation);
        Self {
            params,
            state: StateVec(vec![0.0, 0.0]),
            goal: StateVec(vec![PI, 0.0]),
            variation,
        }
    }

    fn space() -> VariationSpace {
        VariationSpace::new(factor_specs())
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

impl WorldInstance for Pendulum {
    fn id(&self) -> &'static str {
        "pendulum"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn action_space(&self) -> ActionSpaceKind {
        ActionSpaceKind::Continuous(ContinuousActionSpace::symmetric(1, self.params.max_torque))
    }

    fn max_steps(&self) -> usize {
        200
    }

    fn variation_space(&self) -> VariationSpace {
        Self::space()
    }

    fn reset(
        &mut self,
        rng: &RandomStream,
        options: &ResetOptions,
    ) -> Result<(StateVec, FactorValues), WorldError> {
        let values = sample_variation(&Self::space(), rng, options)?;
        self.params = Params::from_values(&values);
        self.state = StateVec(vec![values["agent.start_angle"][0], 0.0]);
        self.goal = StateVec(vec![PI, 0.0]);
        self.variation = values.clone();
        Ok((self.state.clone(), values))
    }

    fn restore(
        &mut self,
        state: StateVec,
        variation: FactorValues,
        goal: StateVec,
    ) -> Result<(), WorldError> {
        if state.dim() != 2 || goal.dim() != 2 {
            return Err(WorldError::BadState(format!(
                "pendulum wants 2-dim state and goal, got {} and {}",
                state.dim(),
                goal.dim()
            )));
        }
        if !state.0.iter().chain(&goal.0).all(|v| v.is_finite()) {
            return Err(WorldError::BadState("non-finite state or goal".into()));
        }
        let space = Self::space();
        for key in [
            "physics.gravity",
            "physics.length",
            "physics.mass",
            "physics.damping",
            "actuator.max_torque",
        ] {
            let spec = space.get(key).expect("catalog key");
            let value = variation.get(key).ok_or_else(|| WorldError::UnknownFactor {
                key: key.to_string(),
            })?;
            if value.len() != spec.dim() {
                return Err(WorldError::FactorDimMismatch {
                    key: key.to_string(),
                    expected: spec.dim(),
                    found: value.len(),
                });
            }
        }
        self.params = Params::from_values(&variation);
        self.variation = variation;
        self.state = state;
        self.goal = goal;
        Ok(())
    }

    fn step(&mut self, action: &Action) -> Result<(StateVec, bool), WorldError> {
        let torque = match action {
            Action::Continuous(a) if a.len() == 1 && a[0].is_finite() => {
                a[0].clamp(-self.params.max_torque, self.params.max_torque)
            }
            Action::Continuous(a) => {
                return Err(WorldError::BadAction(format!(
                    "pendulum wants 1 finite torque, got {a:?}"
                )))
            }
            Action::Discrete(_) => {
                return Err(WorldError::BadAction("pendulum takes continuous actions".into()))
            }
        };
        let (theta, omega) = advance(&self.params, self.state.0[0], self.state.0[1], torque);
        self.state = StateVec(vec![wrap_angle(theta), omega]);
        let done = self.success(&self.state, &self.goal);
        Ok((self.state.clone(), done))
    }

    fn state(&self) -> &StateVec {
        &self.state
    }

    fn goal(&self) -> &StateVec {
        &self.goal
    }

    fn success(&self, state: &StateVec, goal: &StateVec) -> bool {
        wrap_angle(state.0[0] - goal.0[0]).abs() <= ANGLE_TOLERANCE
            && (state.0[1] - goal.0[1]).abs() <= SPEED_TOLERANCE
    }

    fn cost_model(&self, goal: &StateVec) -> Box<dyn CostModel + Send + Sync> {
        Box::new(self.model(goal))
    }

    fn dynamics_model(&self, goal: &StateVec) -> Option<Box<dyn DynamicsModel + Send + Sync>> {
        Some(Box::new(self.model(goal)))
    }

    fn clone_world(&self) -> Box<dyn WorldInstance> {
        Box::new(self.clone())
    }
}

impl Pendulum {
    fn model(&self, goal: &StateVec) -> PendulumModel {
        PendulumModel {
            params: self.params,
            action_weight: ACTION_WEIGHT,
            goal: [goal.0[0], goal.0[1]],
        }
    }
}

/// Planning model on the unwrapped angle. Stage cost embeds the state as
/// (cos theta, sin theta, 0.2 * omega) and measures squared distance to the
/// embedded goal, so the angular error is periodic without any wrapping.
#[derive(Clone, Copy, Debug)]
pub struct PendulumModel {
    params: Params,
    pub action_weight: f64,
    pub goal: [f64; 2],
}

impl PendulumModel {
    pub fn new(
        gravity: f64,
        length: f64,
        mass: f64,
        damping: f64,
        max_torque: f64,
        goal: [f64; 2],
    ) -> Self {
        Self {
            params: Params {
                gravity,
                length,
                mass,
                damping,
                max_torque,
            },
            action_weight: ACTION_WEIGHT,
            goal,
        }
    }

    fn stage_cost(&self, theta: f64, omega: f64) -> f64 {
        let dc = theta.cos() - self.goal[0].cos();
        let ds = theta.sin() - self.goal[0].sin();
        let dv = 0.2 * (omega - self.goal[1]);
        dc * dc + ds * ds + dv * dv
    }

    /// Gradient of the stage cost in (theta, omega).
    fn stage_state_grad(&self, theta: f64, omega: f64) -> [f64; 2] {
        [
            2.0 * (theta - self.goal[0]).sin(),
            0.08 * (omega - self.goal[1]),
        ]
    }

    /// Jacobian of the Euler step in (theta, omega), evaluated pre-step.
    fn state_jacobian(&self, theta: f64) -> [[f64; 2]; 2] {
        let p = &self.params;
        let dd = DT * (p.gravity / p.length) * theta.cos();
        let keep = 1.0 - DT * p.damping;
        [[1.0 + DT * dd, DT * keep], [dd, keep]]
    }

    fn torque_column(&self) -> [f64; 2] {
        let gain = 1.0 / (self.params.mass * self.params.length * self.params.length);
        [DT * DT * gain, DT * gain]
    }

    fn rollout(&self, s0: &StateVec, seq: &ActionSequence) -> Vec<(f64, f64)> {
        let mut chain = Vec::with_capacity(seq.horizon() + 1);
        chain.push((s0.0[0], s0.0[1]));
        for t in 0..seq.horizon() {
            let (theta, omega) = chain[t];
            chain.push(advance(&self.params, theta, omega, seq.values()[[t, 0]]));
        }
        chain
    }
}

impl CostModel for PendulumModel {
    fn batched_cost(&self, s0: &StateVec, candidates: &[ActionSequence]) -> Vec<f64> {
        crate::core::parallel_costs(candidates, |seq| {
            let mut theta = s0.0[0];
            let mut omega = s0.0[1];
            let mut total = 0.0;
            for t in 0..seq.horizon() {
                let u = seq.values()[[t, 0]];
                let next = advance(&self.params, theta, omega, u);
                theta = next.0;
                omega = next.1;
                total += self.stage_cost(theta, omega) + self.action_weight * u * u;
            }
            total
        })
    }

    fn cost_and_grad(&self, s0: &StateVec, seq: &ActionSequence) -> Option<(f64, Array2<f64>)> {
        let horizon = seq.horizon();
        let chain = self.rollout(s0, seq);
        let mut cost = 0.0;
        for (t, &(theta, omega)) in chain.iter().enumerate().skip(1) {
            let u = seq.values()[[t - 1, 0]];
            cost += self.stage_cost(theta, omega) + self.action_weight * u * u;
        }

        let b = self.torque_column();
        let mut grad = Array2::zeros((horizon, 1));
        let mut lambda = [0.0f64; 2];
        for t in (0..horizon).rev() {
            let (theta_next, omega_next) = chain[t + 1];
            let stage = self.stage_state_grad(theta_next, omega_next);
            lambda[0] += stage[0];
            lambda[1] += stage[1];
            let u = seq.values()[[t, 0]];
            grad[[t, 0]] = b[0] * lambda[0] + b[1] * lambda[1] + 2.0 * self.action_weight * u;
            let f = self.state_jacobian(chain[t].0);
            lambda = [
                f[0][0] * lambda[0] + f[1][0] * lambda[1],
                f[0][1] * lambda[0] + f[1][1] * lambda[1],
            ];
        }
        Some((cost, grad))
    }

    fn constraints(&self, _s0: &StateVec, seq: &ActionSequence) -> Option<Vec<f64>> {
        let bound = self.params.max_torque * self.params.max_torque;
        Some(
            (0..seq.horizon())
                .map(|t| {
                    let u = seq.values()[[t, 0]];
                    u * u - bound
                })
                .collect(),
        )
    }

    fn constraint_grads(&self, _s0: &StateVec, seq: &ActionSequence) -> Option<Vec<Array2<f64>>> {
        let horizon = seq.horizon();
        Some(
            (0..horizon)
                .map(|t| {
                    let mut g = Array2::zeros((horizon, 1));
                    g[[t, 0]] = 2.0 * seq.values()[[t, 0]];
                    g
                })
                .collect(),
        )
    }
}

impl DynamicsModel for PendulumModel {
    fn state_dim(&self) -> usize {
        2
    }

    fn predict(&self, s: &StateVec, action: &[f64]) -> StateVec {
        let (theta, omega) = advance(&self.params, s.0[0], s.0[1], action[0]);
        StateVec(vec![theta, omega])
    }

    fn action_jacobian(&self, _s: &StateVec, _action: &[f64]) -> Array2<f64> {
        let b = self.torque_column();
        Array2::from_shape_vec((2, 1), vec![b[0], b[1]]).expect("2x1")
    }
}

/// Proportional-derivative torque toward upright; gravity in this convention
/// assists the swing, so no energy pumping phase is needed.
pub fn expert_action(variation: &FactorValues, state: &StateVec, goal: &StateVec) -> f64 {
    let max_torque = variation["actuator.max_torque"][0];
    let error = wrap_angle(goal.0[0] - state.0[0]);
    (2.0 * error - 2.0 * state.0[1]).clamp(-max_torque, max_torque)
}
