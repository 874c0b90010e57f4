//! Two-room navigation: a point agent in the unit square, a vertical wall at
//! x = 0.5 with a door gap, acceleration control. The walled dynamics are
//! exact for stepping and rollout costs; the gradient path uses the wall-free
//! point-mass surrogate.

use ndarray::Array2;

use crate::core::{ActionSequence, ContinuousActionSpace, CostModel, DynamicsModel, RandomStream, StateVec};

use super::point_mass::PointMassModel;
use super::variation::{
    sample_variation, Constraint, FactorSpec, FactorValues, ResetOptions, VariationSpace,
};
use super::{Action, ActionSpaceKind, WorldError, WorldInstance};

const WALL_X: f64 = 0.5;
const SKIN: f64 = 1e-3;
const SUCCESS_RADIUS: f64 = 0.05;
const ACTION_WEIGHT: f64 = 0.01;

#[derive(Clone, Copy, Debug)]
struct Params {
    dt: f64,
    drag: f64,
    v_max: f64,
    door_center: f64,
    door_width: f64,
}

impl Params {
    fn from_values(values: &FactorValues) -> Self {
        Self {
            dt: values["physics.dt"][0],
            drag: values["physics.drag"][0],
            v_max: values["physics.v_max"][0],
            door_center: values["wall.door_center"][0],
            door_width: values["wall.door_width"][0],
        }
    }

    fn door_contains(&self, y: f64) -> bool {
        (y - self.door_center).abs() <= self.door_width / 2.0
    }
}

/// One semi-implicit Euler step with wall and boundary collision handling.
fn walled_step(p: &Params, s: &[f64; 4], action: &[f64; 2]) -> [f64; 4] {
    let a = [action[0].clamp(-1.0, 1.0), action[1].clamp(-1.0, 1.0)];
    let keep = 1.0 - p.drag;
    let mut vx = (keep * s[2] + p.dt * a[0]).clamp(-p.v_max, p.v_max);
    let mut vy = (keep * s[3] + p.dt * a[1]).clamp(-p.v_max, p.v_max);
    let mut x = s[0] + p.dt * vx;
    let mut y = s[1] + p.dt * vy;

    // wall rule: a segment crossing x = 0.5 outside the door stops at the
    // wall face on the incoming side
    let crossed = (s[0] < WALL_X && x >= WALL_X) || (s[0] > WALL_X && x <= WALL_X);
    if crossed {
        let t = (WALL_X - s[0]) / (x - s[0]);
        let y_at_wall = s[1] + t * (y - s[1]);
        if !p.door_contains(y_at_wall) {
            x = if s[0] < WALL_X { WALL_X - SKIN } else { WALL_X + SKIN };
            vx = 0.0;
        }
    }

    if x < 0.0 {
        x = SKIN;
        vx = 0.0;
    } else if x > 1.0 {
        x = 1.0 - SKIN;
        vx = 0.0;
    }
    if y < 0.0 {
        y = SKIN;
        vy = 0.0;
    } else if y > 1.0 {
        y = 1.0 - SKIN;
        vy = 0.0;
    }
    [x, y, vx, vy]
}

fn factor_specs() -> Vec<FactorSpec> {
    vec![
        FactorSpec::boxed("agent.start", vec![0.05, 0.05], vec![0.95, 0.95], vec![0.25, 0.5]),
        FactorSpec::boxed("goal.position", vec![0.05, 0.05], vec![0.95, 0.95], vec![0.75, 0.5]),
        FactorSpec::boxed("wall.door_center", vec![0.2], vec![0.8], vec![0.5]),
        FactorSpec::boxed("wall.door_width", vec![0.1], vec![0.3], vec![0.2]),
        FactorSpec::boxed("physics.dt", vec![0.05], vec![0.15], vec![0.1]),
        FactorSpec::boxed("physics.drag", vec![0.0], vec![0.3], vec![0.1]),
        FactorSpec::boxed("physics.v_max", vec![0.5], vec![2.0], vec![1.0]),
    ]
}

fn rooms_constraint() -> Constraint {
    Constraint {
        name: "start and goal in different rooms",
        keys: vec!["agent.start", "goal.position"],
        check: std::sync::Arc::new(|v: &FactorValues| {
            (v["agent.start"][0] < WALL_X) != (v["goal.position"][0] < WALL_X)
        }),
    }
}

#[derive(Clone, Debug)]
pub struct TwoRoom {
    params: Params,
    variation: FactorValues,
    state: StateVec,
    goal: StateVec,
}

impl TwoRoom {
    pub fn new() -> Self {
        let space = Self::space();
        let variation = space.defaults();
        let params = Params::from_values(&variation);
        let start = &variation["agent.start"];
        let goal = &variation["goal.position"];
        Self {
            params,
            state: StateVec(vec![start[0], start[1], 0.0, 0.0]),
            goal: StateVec(vec![goal[0], goal[1], 0.0, 0.0]),
            variation,
        }
    }

    fn space() -> VariationSpace {
        VariationSpace::new(factor_specs()).with_constraint(rooms_constraint())
    }
}

impl Default for TwoRoom {
    fn default() -> Self {
        Self::new()
    }
}

impl WorldInstance for TwoRoom {
    fn id(&self) -> &'static str {
        "tworoom"
    }

    fn state_dim(&self) -> usize {
        4
    }

    fn action_space(&self) -> ActionSpaceKind {
        ActionSpaceKind::Continuous(ContinuousActionSpace::symmetric(2, 1.0))
    }

    fn max_steps(&self) -> usize {
        100
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
        let start = &values["agent.start"];
        let goal = &values["goal.position"];
        self.state = StateVec(vec![start[0], start[1], 0.0, 0.0]);
        self.goal = StateVec(vec![goal[0], goal[1], 0.0, 0.0]);
        self.variation = values.clone();
        Ok((self.state.clone(), values))
    }

    fn restore(
        &mut self,
        state: StateVec,
        variation: FactorValues,
        goal: StateVec,
    ) -> Result<(), WorldError> {
        if state.dim() != 4 || goal.dim() != 4 {
            return Err(WorldError::BadState(format!(
                "tworoom wants 4-dim state and goal, got {} and {}",
                state.dim(),
                goal.dim()
            )));
        }
        if !state.0.iter().chain(&goal.0).all(|v| v.is_finite()) {
            return Err(WorldError::BadState("non-finite state or goal".into()));
        }
        let space = Self::space();
        for key in ["physics.dt", "physics.drag", "physics.v_max", "wall.door_center", "wall.door_width"] {
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
        let a = match action {
            Action::Continuous(a) if a.len() == 2 && a.iter().all(|v| v.is_finite()) => {
                [a[0], a[1]]
            }
            Action::Continuous(a) => {
                return Err(WorldError::BadAction(format!(
                    "tworoom wants 2 finite components, got {a:?}"
                )))
            }
            Action::Discrete(_) => {
                return Err(WorldError::BadAction("tworoom takes continuous actions".into()))
            }
        };
        let s = [self.state.0[0], self.state.0[1], self.state.0[2], self.state.0[3]];
        let next = walled_step(&self.params, &s, &a);
        self.state = StateVec(next.to_vec());
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
        let dx = state.0[0] - goal.0[0];
        let dy = state.0[1] - goal.0[1];
        (dx * dx + dy * dy).sqrt() <= SUCCESS_RADIUS
    }

    fn cost_model(&self, goal: &StateVec) -> Box<dyn CostModel + Send + Sync> {
        Box::new(TwoRoomCost {
            params: self.params,
            surrogate: self.surrogate(goal),
        })
    }

    fn dynamics_model(&self, goal: &StateVec) -> Option<Box<dyn DynamicsModel + Send + Sync>> {
        Some(Box::new(self.surrogate(goal)))
    }

    fn clone_world(&self) -> Box<dyn WorldInstance> {
        Box::new(self.clone())
    }
}

impl TwoRoom {
    fn surrogate(&self, goal: &StateVec) -> PointMassModel {
        PointMassModel::new(self.params.dt, self.params.drag, [goal.0[0], goal.0[1]])
    }
}

/// Waypoint controller: heads straight for the goal when both points share a
/// room, otherwise routes through the door first, aiming a little beyond the
/// wall so the crossing commits.
pub fn expert_action(variation: &FactorValues, state: &StateVec, goal: &StateVec) -> [f64; 2] {
    let (x, y, vx, vy) = (state.0[0], state.0[1], state.0[2], state.0[3]);
    let same_room = (x < WALL_X) == (goal.0[0] < WALL_X);
    let (tx, ty) = if same_room {
        (goal.0[0], goal.0[1])
    } else {
        let center = variation["wall.door_center"][0];
        let beyond = if x < WALL_X { WALL_X + 0.05 } else { WALL_X - 0.05 };
        (beyond, center)
    };
    let kp = 8.0;
    let kd = 4.0;
    [
        (kp * (tx - x) - kd * vx).clamp(-1.0, 1.0),
        (kp * (ty - y) - kd * vy).clamp(-1.0, 1.0),
    ]
}

/// Rollout costs on the true walled dynamics; gradients and constraints come
/// from the wall-free surrogate, whose rollout is affine.
struct TwoRoomCost {
    params: Params,
    surrogate: PointMassModel,
}

impl CostModel for TwoRoomCost {
    fn batched_cost(&self, s0: &StateVec, candidates: &[ActionSequence]) -> Vec<f64> {
        let goal = self.surrogate.goal;
        crate::core::parallel_costs(candidates, |seq| {
            let mut s = [s0.0[0], s0.0[1], s0.0[2], s0.0[3]];
            let mut total = 0.0;
            for t in 0..seq.horizon() {
                let a = [seq.values()[[t, 0]], seq.values()[[t, 1]]];
                s = walled_step(&self.params, &s, &a);
                let dx = s[0] - goal[0];
                let dy = s[1] - goal[1];
                total += dx * dx + dy * dy + ACTION_WEIGHT * (a[0] * a[0] + a[1] * a[1]);
            }
            total
        })
    }

    fn cost_and_grad(&self, s0: &StateVec, seq: &ActionSequence) -> Option<(f64, Array2<f64>)> {
        self.surrogate.cost_and_grad(s0, seq)
    }

    fn constraints(&self, s0: &StateVec, seq: &ActionSequence) -> Option<Vec<f64>> {
        self.surrogate.constraints(s0, seq)
    }

    fn constraint_grads(&self, s0: &StateVec, seq: &ActionSequence) -> Option<Vec<Array2<f64>>> {
        self.surrogate.constraint_grads(s0, seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::make_rng;

    fn pinned_params() -> FactorValues {
        let mut v = TwoRoom::space().defaults();
        v.insert("physics.drag".into(), vec![0.0]);
        v
    }

    #[test]
    fn same_seed_resets_identically() {
        let mut w1 = TwoRoom::new();
        let mut w2 = TwoRoom::new();
        let rng = make_rng(77);
        let (s1, v1) = w1.reset(&rng, &ResetOptions::sample_all()).unwrap();
        let (s2, v2) = w2.reset(&rng, &ResetOptions::sample_all()).unwrap();
        assert_eq!(s1.0, s2.0);
        assert_eq!(v1, v2);
    }

    #[test]
    fn pinned_goal_passes_through() {
        let mut w = TwoRoom::new();
        let rng = make_rng(78);
        let options = ResetOptions::default().pin("goal.position", vec![0.9, 0.9]);
        let (_, values) = w.reset(&rng, &options).unwrap();
        assert_eq!(values["goal.position"], vec![0.9, 0.9]);
        assert_eq!(w.goal().0, vec![0.9, 0.9, 0.0, 0.0]);
    }

    #[test]
    fn sampled_factors_stay_in_bounds_and_rooms_differ() {
        let mut w = TwoRoom::new();
        let space = TwoRoom::space();
        for seed in 0..1000u64 {
            let rng = make_rng(seed);
            let (_, values) = w.reset(&rng, &ResetOptions::sample_all()).unwrap();
            for spec in space.factors() {
                assert!(spec.admits(&values[&spec.key]), "{}", spec.key);
            }
            assert_ne!(
                values["agent.start"][0] < 0.5,
                values["goal.position"][0] < 0.5
            );
        }
    }

    #[test]
    fn rest_with_no_action_is_a_fixed_point() {
        let mut w = TwoRoom::new();
        w.restore(
            StateVec(vec![0.3, 0.3, 0.0, 0.0]),
            pinned_params(),
            StateVec(vec![0.75, 0.5, 0.0, 0.0]),
        )
        .unwrap();
        let (s, _) = w.step(&Action::Continuous(vec![0.0, 0.0])).unwrap();
        assert_eq!(s.0, vec![0.3, 0.3, 0.0, 0.0]);
    }

    #[test]
    fn the_euler_step_matches_the_hand_computation() {
        // rest, a = (1, 0), dt = 0.1, no drag: v = (0.1, 0), x moves 0.01
        let mut w = TwoRoom::new();
        w.restore(
            StateVec(vec![0.25, 0.5, 0.0, 0.0]),
            pinned_params(),
            StateVec(vec![0.75, 0.5, 0.0, 0.0]),
        )
        .unwrap();
        let (s, _) = w.step(&Action::Continuous(vec![1.0, 0.0])).unwrap();
        assert_eq!(s.0, vec![0.26, 0.5, 0.1, 0.0]);
    }

    #[test]
    fn the_wall_stops_a_crossing_outside_the_door() {
        let mut w = TwoRoom::new();
        w.restore(
            StateVec(vec![0.49, 0.1, 1.0, 0.0]),
            pinned_params(),
            StateVec(vec![0.75, 0.5, 0.0, 0.0]),
        )
        .unwrap();
        let (s, _) = w.step(&Action::Continuous(vec![1.0, 0.0])).unwrap();
        assert_eq!(s.0[0], 0.5 - 1e-3);
        assert_eq!(s.0[2], 0.0);
        assert_eq!(s.0[1], 0.1);
    }

    #[test]
    fn the_door_lets_a_crossing_through() {
        let mut w = TwoRoom::new();
        // default door spans y in [0.4, 0.6]
        w.restore(
            StateVec(vec![0.49, 0.5, 1.0, 0.0]),
            pinned_params(),
            StateVec(vec![0.75, 0.5, 0.0, 0.0]),
        )
        .unwrap();
        let (s, _) = w.step(&Action::Continuous(vec![1.0, 0.0])).unwrap();
        assert!(s.0[0] > 0.5, "crossed to x = {}", s.0[0]);
        assert!(s.0[2] > 0.0);
    }

    #[test]
    fn crossing_from_the_right_clamps_to_the_right_face() {
        let mut w = TwoRoom::new();
        w.restore(
            StateVec(vec![0.51, 0.9, -1.0, 0.0]),
            pinned_params(),
            StateVec(vec![0.25, 0.5, 0.0, 0.0]),
        )
        .unwrap();
        let (s, _) = w.step(&Action::Continuous(vec![-1.0, 0.0])).unwrap();
        assert_eq!(s.0[0], 0.5 + 1e-3);
        assert_eq!(s.0[2], 0.0);
    }

    #[test]
    fn the_domain_boundary_clamps_with_an_inset() {
        let mut w = TwoRoom::new();
        w.restore(
            StateVec(vec![0.25, 0.995, 0.0, 1.0]),
            pinned_params(),
            StateVec(vec![0.75, 0.5, 0.0, 0.0]),
        )
        .unwrap();
        let (s, _) = w.step(&Action::Continuous(vec![0.0, 1.0])).unwrap();
        assert_eq!(s.0[1], 1.0 - 1e-3);
        assert_eq!(s.0[3], 0.0);
    }

    #[test]
    fn velocity_saturates_at_v_max() {
        let mut w = TwoRoom::new();
        let mut values = pinned_params();
        values.insert("physics.v_max".into(), vec![0.5]);
        w.restore(
            StateVec(vec![0.1, 0.5, 0.0, 0.0]),
            values,
            StateVec(vec![0.9, 0.5, 0.0, 0.0]),
        )
        .unwrap();
        for _ in 0..20 {
            w.step(&Action::Continuous(vec![1.0, 0.0])).unwrap();
        }
        assert!(w.state().0[2] <= 0.5 + 1e-12);
    }

    #[test]
    fn success_is_a_position_disc() {
        let w = TwoRoom::new();
        let goal = StateVec(vec![0.75, 0.5, 0.0, 0.0]);
        assert!(w.success(&StateVec(vec![0.75, 0.549, 0.9, 0.9]), &goal));
        assert!(!w.success(&StateVec(vec![0.75, 0.551, 0.0, 0.0]), &goal));
    }

    #[test]
    fn stepping_onto_the_goal_terminates() {
        let mut w = TwoRoom::new();
        w.restore(
            StateVec(vec![0.74, 0.5, 0.5, 0.0]),
            pinned_params(),
            StateVec(vec![0.75, 0.5, 0.0, 0.0]),
        )
        .unwrap();
        let (_, done) = w.step(&Action::Continuous(vec![0.0, 0.0])).unwrap();
        assert!(done);
    }

    #[test]
    fn bad_actions_are_rejected() {
        let mut w = TwoRoom::new();
        assert!(matches!(
            w.step(&Action::Continuous(vec![0.0])),
            Err(WorldError::BadAction(_))
        ));
        assert!(matches!(
            w.step(&Action::Discrete(3)),
            Err(WorldError::BadAction(_))
        ));
        assert!(matches!(
            w.step(&Action::Continuous(vec![f64::NAN, 0.0])),
            Err(WorldError::BadAction(_))
        ));
    }

    #[test]
    fn trajectories_are_bit_exact_across_runs() {
        let run = || {
            let mut w = TwoRoom::new();
            let rng = make_rng(79);
            w.reset(&rng, &ResetOptions::sample_all()).unwrap();
            let mut trace = Vec::new();
            for k in 0..50 {
                let a = vec![(k as f64 * 0.37).sin(), (k as f64 * 0.73).cos()];
                let (s, _) = w.step(&Action::Continuous(a)).unwrap();
                trace.extend(s.0.iter().map(|v| v.to_bits()));
            }
            trace
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn the_rollout_cost_sees_the_wall_but_the_gradient_path_does_not() {
        let mut w = TwoRoom::new();
        let goal = StateVec(vec![0.75, 0.2, 0.0, 0.0]);
        w.restore(StateVec(vec![0.25, 0.2, 0.0, 0.0]), pinned_params(), goal.clone())
            .unwrap();
        let model = w.cost_model(&goal);

        // a full push to the right at y = 0.2 hits the wall far from the door
        let mut crossing = ActionSequence::zeros(30, 2);
        crossing.values_mut().column_mut(0).fill(1.0);
        let walled = model.batched_cost(w.state(), std::slice::from_ref(&crossing))[0];
        let (free, _) = model.cost_and_grad(w.state(), &crossing).unwrap();
        assert_ne!(walled, free, "the wall must change the rollout");

        // a gentle out-and-back inside the left room never touches the wall
        let mut inside = ActionSequence::zeros(10, 2);
        for t in 0..10 {
            inside.values_mut()[[t, 0]] = if t < 5 { 0.2 } else { -0.2 };
        }
        let walled_in = model.batched_cost(w.state(), std::slice::from_ref(&inside))[0];
        let (free_in, _) = model.cost_and_grad(w.state(), &inside).unwrap();
        assert!(
            (walled_in - free_in).abs() <= 1e-12,
            "{walled_in} vs {free_in}"
        );
    }

    #[test]
    fn at_goal_rest_costs_nothing() {
        let w = TwoRoom::new();
        let goal = StateVec(vec![0.75, 0.5, 0.0, 0.0]);
        let model = w.cost_model(&goal);
        let seq = ActionSequence::zeros(10, 2);
        let cost = model.batched_cost(&goal, std::slice::from_ref(&seq))[0];
        assert_eq!(cost, 0.0);
        let (surrogate_cost, grad) = model.cost_and_grad(&goal, &seq).unwrap();
        assert_eq!(surrogate_cost, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }
}
