//! Discrete gridworld: unit moves on a W-by-W board with hash-generated wall
//! layouts. The planning model is a relaxed, wall-free variant whose rows are
//! action probabilities; at one-hot rows on an empty layout it reproduces the
//! discrete rollout exactly.

use ndarray::Array2;

use crate::core::{ActionSequence, CostModel, DynamicsModel, RandomStream, StateVec};

use super::variation::{
    fnv1a, sample_variation, Constraint, FactorSpec, FactorValues, ResetOptions, VariationSpace,
};
use super::{Action, ActionSpaceKind, WorldError, WorldInstance};

const ACTION_WEIGHT: f64 = 0.01;
pub const NUM_ACTIONS: usize = 5;

/// Column displacements for up, down, left, right, stay.
const MOVES: [(i64, i64); NUM_ACTIONS] = [(0, 1), (0, -1), (-1, 0), (1, 0), (0, 0)];

/// Maps a unit-interval coordinate to a cell index on a side of `size`.
pub fn cell_of(value: f64, size: usize) -> usize {
    ((value * size as f64).floor() as i64).clamp(0, size as i64 - 1) as usize
}

/// Deterministic wall layout; seed 0 is always empty, other seeds fill about
/// a fifth of the board.
pub fn walls_for(seed: u64, size: usize) -> Vec<bool> {
    if seed == 0 {
        return vec![false; size * size];
    }
    let mut walls = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let mut bytes = [0u8; 16];
            bytes[..4].copy_from_slice(&(seed as u32).to_le_bytes());
            bytes[4..8].copy_from_slice(&(size as u32).to_le_bytes());
            bytes[8..12].copy_from_slice(&(x as u32).to_le_bytes());
            bytes[12..].copy_from_slice(&(y as u32).to_le_bytes());
            walls.push(fnv1a(&bytes) % 5 == 0);
        }
    }
    walls
}

/// Breadth-first distances to `goal` over free cells; `u32::MAX` marks
/// unreachable cells and walls.
pub(crate) fn bfs_distances(walls: &[bool], size: usize, goal: (usize, usize)) -> Vec<u32> {
    let mut dist = vec![u32::MAX; size * size];
    let goal_idx = goal.1 * size + goal.0;
    if walls[goal_idx] {
        return dist;
    }
    dist[goal_idx] = 0;
    let mut queue = std::collections::VecDeque::from([goal]);
    while let Some((x, y)) = queue.pop_front() {
        let d = dist[y * size + x];
        for (dx, dy) in &MOVES[..4] {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx < 0 || ny < 0 || nx >= size as i64 || ny >= size as i64 {
                continue;
            }
            let idx = ny as usize * size + nx as usize;
            if !walls[idx] && dist[idx] == u32::MAX {
                dist[idx] = d + 1;
                queue.push_back((nx as usize, ny as usize));
            }
        }
    }
    dist
}

fn grid_geometry(values: &FactorValues) -> (usize, u64) {
    (
        values["grid.size"][0] as usize,
        values["layout.seed"][0] as u64,
    )
}

fn factor_specs() -> Vec<FactorSpec> {
    let sizes = vec![vec![6.0], vec![8.0], vec![10.0], vec![12.0]];
    let seeds = (0..8).map(|s| vec![s as f64]).collect();
    vec![
        FactorSpec::boxed("agent.start", vec![0.0, 0.0], vec![1.0, 1.0], vec![0.1, 0.1]),
        FactorSpec::boxed("goal.position", vec![0.0, 0.0], vec![1.0, 1.0], vec![0.9, 0.9]),
        FactorSpec::discrete("grid.size", sizes, vec![8.0]),
        FactorSpec::discrete("layout.seed", seeds, vec![0.0]),
    ]
}

fn connected_constraint() -> Constraint {
    Constraint {
        name: "start and goal connected",
        keys: vec!["agent.start", "goal.position", "layout.seed", "grid.size"],
        check: std::sync::Arc::new(|v: &FactorValues| {
            let (size, seed) = grid_geometry(v);
            let start = (cell_of(v["agent.start"][0], size), cell_of(v["agent.start"][1], size));
            let goal = (
                cell_of(v["goal.position"][0], size),
                cell_of(v["goal.position"][1], size),
            );
            if start == goal {
                return false;
            }
            let walls = walls_for(seed, size);
            if walls[start.1 * size + start.0] {
                return false;
            }
            bfs_distances(&walls, size, goal)[start.1 * size + start.0] != u32::MAX
        }),
    }
}

#[derive(Clone, Debug)]
pub struct Gridworld {
    size: usize,
    walls: Vec<bool>,
    variation: FactorValues,
    state: StateVec,
    goal: StateVec,
}

impl Gridworld {
    pub fn new() -> Self {
        let variation = Self::space().defaults();
        let (size, seed) = grid_geometry(&variation);
        let start = cell_state(&variation["agent.start"], size);
        let goal = cell_state(&variation["goal.position"], size);
        Self {
            size,
            walls: walls_for(seed, size),
            variation,
            state: start,
            goal,
        }
    }

    fn space() -> VariationSpace {
        VariationSpace::new(factor_specs()).with_constraint(connected_constraint())
    }

    fn cell(&self, state: &StateVec) -> (usize, usize) {
        (
            (state.0[0].round() as i64).clamp(0, self.size as i64 - 1) as usize,
            (state.0[1].round() as i64).clamp(0, self.size as i64 - 1) as usize,
        )
    }
}

fn cell_state(unit: &[f64], size: usize) -> StateVec {
    StateVec(vec![
        cell_of(unit[0], size) as f64,
        cell_of(unit[1], size) as f64,
    ])
}

impl Default for Gridworld {
    fn default() -> Self {
        Self::new()
    }
}

impl WorldInstance for Gridworld {
    fn id(&self) -> &'static str {
        "gridworld"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn action_space(&self) -> ActionSpaceKind {
        ActionSpaceKind::Discrete(NUM_ACTIONS)
    }

    fn max_steps(&self) -> usize {
        4 * self.size
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
        let (size, seed) = grid_geometry(&values);
        self.size = size;
        self.walls = walls_for(seed, size);
        self.state = cell_state(&values["agent.start"], size);
        self.goal = cell_state(&values["goal.position"], size);
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
                "gridworld wants 2-dim state and goal, got {} and {}",
                state.dim(),
                goal.dim()
            )));
        }
        for key in ["grid.size", "layout.seed"] {
            if !variation.contains_key(key) {
                return Err(WorldError::UnknownFactor {
                    key: key.to_string(),
                });
            }
        }
        let (size, seed) = grid_geometry(&variation);
        if !(1..=64).contains(&size) {
            return Err(WorldError::BadState(format!("grid size {size} out of range")));
        }
        self.size = size;
        self.walls = walls_for(seed, size);
        self.variation = variation;
        self.state = state;
        self.goal = goal;
        Ok(())
    }

    fn step(&mut self, action: &Action) -> Result<(StateVec, bool), WorldError> {
        let index = match action {
            Action::Discrete(i) if *i < NUM_ACTIONS => *i,
            Action::Discrete(i) => {
                return Err(WorldError::BadAction(format!(
                    "gridworld has {NUM_ACTIONS} actions, got index {i}"
                )))
            }
            Action::Continuous(_) => {
                return Err(WorldError::BadAction("gridworld takes discrete actions".into()))
            }
        };
        let (x, y) = self.cell(&self.state);
        let (dx, dy) = MOVES[index];
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        let blocked = nx < 0
            || ny < 0
            || nx >= self.size as i64
            || ny >= self.size as i64
            || self.walls[ny as usize * self.size + nx as usize];
        if !blocked {
            self.state = StateVec(vec![nx as f64, ny as f64]);
        }
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
        self.cell(state) == self.cell(goal)
    }

    fn cost_model(&self, goal: &StateVec) -> Box<dyn CostModel + Send + Sync> {
        Box::new(RelaxedGridCost {
            size: self.size,
            action_weight: ACTION_WEIGHT,
            goal: [goal.0[0], goal.0[1]],
        })
    }

    fn dynamics_model(&self, _goal: &StateVec) -> Option<Box<dyn DynamicsModel + Send + Sync>> {
        None
    }

    fn clone_world(&self) -> Box<dyn WorldInstance> {
        Box::new(self.clone())
    }
}

/// Wall-free relaxation over action-probability rows: the position moves by
/// the expected displacement, clipped to the board.
pub struct RelaxedGridCost {
    pub size: usize,
    pub action_weight: f64,
    pub goal: [f64; 2],
}

impl RelaxedGridCost {
    /// Expected displacement of one probability row.
    fn drift(row: &[f64]) -> [f64; 2] {
        let mut d = [0.0, 0.0];
        for (a, &(mx, my)) in MOVES.iter().enumerate() {
            d[0] += row[a] * mx as f64;
            d[1] += row[a] * my as f64;
        }
        d
    }

    fn clip(&self, v: f64) -> f64 {
        v.clamp(0.0, self.size as f64 - 1.0)
    }
}

impl CostModel for RelaxedGridCost {
    fn batched_cost(&self, s0: &StateVec, candidates: &[ActionSequence]) -> Vec<f64> {
        crate::core::parallel_costs(candidates, |seq| {
            let mut p = [s0.0[0], s0.0[1]];
            let mut total = 0.0;
            for t in 0..seq.horizon() {
                let row = seq.values().row(t);
                let row = row.as_slice().expect("contiguous row");
                let d = Self::drift(row);
                p = [self.clip(p[0] + d[0]), self.clip(p[1] + d[1])];
                let dx = p[0] - self.goal[0];
                let dy = p[1] - self.goal[1];
                let effort: f64 = row.iter().map(|&q| q * q).sum();
                total += dx * dx + dy * dy + self.action_weight * effort;
            }
            total
        })
    }

    fn cost_and_grad(&self, s0: &StateVec, seq: &ActionSequence) -> Option<(f64, Array2<f64>)> {
        let horizon = seq.horizon();
        let bound = self.size as f64 - 1.0;
        let mut states = Vec::with_capacity(horizon + 1);
        let mut masks = Vec::with_capacity(horizon);
        states.push([s0.0[0], s0.0[1]]);
        let mut cost = 0.0;
        for t in 0..horizon {
            let row = seq.values().row(t);
            let row = row.as_slice().expect("contiguous row");
            let d = Self::drift(row);
            let p = states[t];
            let raw = [p[0] + d[0], p[1] + d[1]];
            let mask = [
                (0.0..=bound).contains(&raw[0]) as u8 as f64,
                (0.0..=bound).contains(&raw[1]) as u8 as f64,
            ];
            let clipped = [self.clip(raw[0]), self.clip(raw[1])];
            let dx = clipped[0] - self.goal[0];
            let dy = clipped[1] - self.goal[1];
            let effort: f64 = row.iter().map(|&q| q * q).sum();
            cost += dx * dx + dy * dy + self.action_weight * effort;
            states.push(clipped);
            masks.push(mask);
        }

        let mut grad = Array2::zeros((horizon, NUM_ACTIONS));
        let mut lambda = [0.0f64; 2];
        for t in (0..horizon).rev() {
            let p = states[t + 1];
            lambda[0] += 2.0 * (p[0] - self.goal[0]);
            lambda[1] += 2.0 * (p[1] - self.goal[1]);
            let masked = [masks[t][0] * lambda[0], masks[t][1] * lambda[1]];
            for (a, &(mx, my)) in MOVES.iter().enumerate() {
                grad[[t, a]] = mx as f64 * masked[0]
                    + my as f64 * masked[1]
                    + 2.0 * self.action_weight * seq.values()[[t, a]];
            }
            lambda = masked;
        }
        Some((cost, grad))
    }

    fn constraints(&self, _s0: &StateVec, seq: &ActionSequence) -> Option<Vec<f64>> {
        Some(
            (0..seq.horizon())
                .map(|t| {
                    let row = seq.values().row(t);
                    row.iter().map(|&q| q * q).sum::<f64>() - 1.0
                })
                .collect(),
        )
    }

    fn constraint_grads(&self, _s0: &StateVec, seq: &ActionSequence) -> Option<Vec<Array2<f64>>> {
        let horizon = seq.horizon();
        Some(
            (0..horizon)
                .map(|t| {
                    let mut g = Array2::zeros((horizon, NUM_ACTIONS));
                    for a in 0..NUM_ACTIONS {
                        g[[t, a]] = 2.0 * seq.values()[[t, a]];
                    }
                    g
                })
                .collect(),
        )
    }
}

/// Shortest-path expert: the move that decreases the BFS distance to the
/// goal, staying put at the goal or when cut off.
pub fn expert_action(variation: &FactorValues, state: &StateVec, goal: &StateVec) -> usize {
    let (size, seed) = grid_geometry(variation);
    let walls = walls_for(seed, size);
    let clamp = |v: f64| (v.round() as i64).clamp(0, size as i64 - 1) as usize;
    let (x, y) = (clamp(state.0[0]), clamp(state.0[1]));
    let goal_cell = (clamp(goal.0[0]), clamp(goal.0[1]));
    if (x, y) == goal_cell {
        return 4;
    }
    let dist = bfs_distances(&walls, size, goal_cell);
    let here = dist[y * size + x];
    if here == u32::MAX {
        return 4;
    }
    let mut best = (4usize, here);
    for (a, (dx, dy)) in MOVES[..4].iter().enumerate() {
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        if nx < 0 || ny < 0 || nx >= size as i64 || ny >= size as i64 {
            continue;
        }
        let d = dist[ny as usize * size + nx as usize];
        if d < best.1 {
            best = (a, d);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{finite_difference_gradient, make_rng};

    fn world_with_layout(seed: u64) -> Gridworld {
        let mut w = Gridworld::new();
        let mut values = Gridworld::space().defaults();
        values.insert("layout.seed".into(), vec![seed as f64]);
        w.restore(StateVec(vec![0.0, 0.0]), values, StateVec(vec![7.0, 7.0]))
            .unwrap();
        w
    }

    #[test]
    fn stay_is_a_fixed_point() {
        let mut w = Gridworld::new();
        let before = w.state().clone();
        let (s, _) = w.step(&Action::Discrete(4)).unwrap();
        assert_eq!(s.0, before.0);
    }

    #[test]
    fn unit_moves_go_where_they_say() {
        let mut w = world_with_layout(0);
        w.restore(
            StateVec(vec![3.0, 3.0]),
            w.variation.clone(),
            StateVec(vec![7.0, 7.0]),
        )
        .unwrap();
        let expect = [(3.0, 4.0), (3.0, 2.0), (2.0, 3.0), (4.0, 3.0), (3.0, 3.0)];
        for (action, (ex, ey)) in expect.iter().enumerate() {
            let mut w = w.clone();
            w.step(&Action::Discrete(action)).unwrap();
            assert_eq!(w.state().0, vec![*ex, *ey], "action {action}");
        }
    }

    #[test]
    fn the_boundary_blocks_moves_off_the_board() {
        let mut w = world_with_layout(0);
        let (s, _) = w.step(&Action::Discrete(1)).unwrap();
        assert_eq!(s.0, vec![0.0, 0.0]);
        let (s, _) = w.step(&Action::Discrete(2)).unwrap();
        assert_eq!(s.0, vec![0.0, 0.0]);
    }

    #[test]
    fn walls_block_moves_into_them() {
        // find a free cell with a wall neighbor in layout 1
        let size = 8;
        let walls = walls_for(1, size);
        let mut found = false;
        'scan: for y in 0..size {
            for x in 0..size {
                if walls[y * size + x] {
                    continue;
                }
                for (a, (dx, dy)) in MOVES[..4].iter().enumerate() {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= size as i64 || ny >= size as i64 {
                        continue;
                    }
                    if walls[ny as usize * size + nx as usize] {
                        let mut w = world_with_layout(1);
                        w.restore(
                            StateVec(vec![x as f64, y as f64]),
                            w.variation.clone(),
                            StateVec(vec![7.0, 7.0]),
                        )
                        .unwrap();
                        let (s, _) = w.step(&Action::Discrete(a)).unwrap();
                        assert_eq!(s.0, vec![x as f64, y as f64]);
                        found = true;
                        break 'scan;
                    }
                }
            }
        }
        assert!(found, "layout 1 has no wall adjacency to test against");
    }

    #[test]
    fn layout_zero_is_empty_and_layouts_are_deterministic() {
        assert!(walls_for(0, 12).iter().all(|&w| !w));
        assert_eq!(walls_for(3, 10), walls_for(3, 10));
        assert_ne!(walls_for(3, 10), walls_for(4, 10));
        for seed in 1..8 {
            let walls = walls_for(seed, 12);
            let density = walls.iter().filter(|&&w| w).count() as f64 / walls.len() as f64;
            assert!((0.05..=0.35).contains(&density), "seed {seed}: {density}");
        }
    }

    #[test]
    fn reset_maps_unit_coordinates_to_cells() {
        let mut w = Gridworld::new();
        let rng = make_rng(7);
        let (s, values) = w.reset(&rng, &ResetOptions::default()).unwrap();
        assert_eq!(values["agent.start"], vec![0.1, 0.1]);
        assert_eq!(s.0, vec![0.0, 0.0]);
        assert_eq!(w.goal().0, vec![7.0, 7.0]);
    }

    #[test]
    fn sampled_resets_are_connected_and_distinct() {
        let mut w = Gridworld::new();
        for seed in 0..500u64 {
            let rng = make_rng(seed);
            let (_, v) = w.reset(&rng, &ResetOptions::sample_all()).unwrap();
            let (size, layout) = grid_geometry(&v);
            let walls = walls_for(layout, size);
            let start = w.cell(w.state());
            let goal = w.cell(w.goal());
            assert_ne!(start, goal);
            assert!(!walls[start.1 * size + start.0]);
            assert_ne!(
                bfs_distances(&walls, size, goal)[start.1 * size + start.0],
                u32::MAX
            );
        }
    }

    #[test]
    fn pinning_start_onto_the_goal_exhausts_the_constraint() {
        let mut w = Gridworld::new();
        let rng = make_rng(9);
        let options = ResetOptions::sample_all()
            .pin("agent.start", vec![0.5, 0.5])
            .pin("goal.position", vec![0.5, 0.5]);
        match w.reset(&rng, &options) {
            Err(WorldError::ConstraintExhausted { name, .. }) => {
                assert_eq!(name, "start and goal connected");
            }
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn pinning_every_constraint_key_skips_the_check() {
        // degenerate but fully pinned geometry is accepted verbatim
        let mut w = Gridworld::new();
        let rng = make_rng(9);
        let options = ResetOptions::default()
            .pin("agent.start", vec![0.5, 0.5])
            .pin("goal.position", vec![0.5, 0.5])
            .pin("layout.seed", vec![0.0])
            .pin("grid.size", vec![8.0]);
        let (s, _) = w.reset(&rng, &options).unwrap();
        assert_eq!(s.0, w.goal().0);
    }

    #[test]
    fn relaxed_one_hot_rollouts_match_the_discrete_world_exactly() {
        let rng = make_rng(31);
        for trial in 0..50u64 {
            let r = rng.split(trial);
            let indices: Vec<usize> = (0..12)
                .map(|t| r.split(t).choice(NUM_ACTIONS))
                .collect();
            let mut w = world_with_layout(0);
            let goal = StateVec(vec![7.0, 7.0]);
            let model = w.cost_model(&goal);

            let mut discrete = 0.0;
            for &a in &indices {
                let (s, _) = w.step(&Action::Discrete(a)).unwrap();
                let dx = s.0[0] - goal.0[0];
                let dy = s.0[1] - goal.0[1];
                discrete += dx * dx + dy * dy + ACTION_WEIGHT;
            }

            let seq = ActionSequence::from_indices(&indices, NUM_ACTIONS);
            let relaxed = model.batched_cost(&StateVec(vec![0.0, 0.0]), std::slice::from_ref(&seq))[0];
            assert_eq!(relaxed, discrete, "trial {trial}: {indices:?}");
        }
    }

    #[test]
    fn at_goal_with_zero_rows_costs_nothing() {
        let w = Gridworld::new();
        let goal = StateVec(vec![7.0, 7.0]);
        let model = w.cost_model(&goal);
        let seq = ActionSequence::zeros(6, NUM_ACTIONS);
        let cost = model.batched_cost(&goal, std::slice::from_ref(&seq))[0];
        assert_eq!(cost, 0.0);
        let (c, grad) = model.cost_and_grad(&goal, &seq).unwrap();
        assert_eq!(c, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn the_relaxed_gradient_matches_finite_differences() {
        let rng = make_rng(44);
        let model = RelaxedGridCost {
            size: 12,
            action_weight: ACTION_WEIGHT,
            goal: [9.0, 2.0],
        };
        for instance in 0..20u64 {
            let r = rng.split(instance);
            let s0 = StateVec(vec![
                r.split(100).uniform_in(3.0, 9.0),
                r.split(101).uniform_in(3.0, 9.0),
            ]);
            let horizon = 6;
            let mut seq = ActionSequence::zeros(horizon, NUM_ACTIONS);
            for t in 0..horizon {
                let mut row: Vec<f64> = (0..NUM_ACTIONS)
                    .map(|a| r.split((t * NUM_ACTIONS + a) as u64).open_uniform())
                    .collect();
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|q| *q /= total);
                for (a, &q) in row.iter().enumerate() {
                    seq.values_mut()[[t, a]] = q;
                }
            }
            let (_, analytic) = model.cost_and_grad(&s0, &seq).unwrap();
            let numeric = finite_difference_gradient(&model, &s0, &seq, 1e-4);
            let diff = (&analytic - &numeric).mapv(|d| d * d).sum().sqrt();
            let scale = analytic.mapv(|g| g * g).sum().sqrt().max(1e-12);
            assert!(
                diff / scale <= 1e-5,
                "instance {instance}: relative error {}",
                diff / scale
            );
        }
    }

    #[test]
    fn the_expert_walks_the_shortest_path() {
        for layout in 0..8u64 {
            let mut w = Gridworld::new();
            let rng = make_rng(500 + layout);
            let options = ResetOptions::sample_keys(&["agent.start", "goal.position"])
                .pin("layout.seed", vec![layout as f64]);
            w.reset(&rng, &options).unwrap();
            let mut done = false;
            for _ in 0..w.max_steps() {
                let a = expert_action(&w.variation, w.state(), w.goal());
                let (_, d) = w.step(&Action::Discrete(a)).unwrap();
                if d {
                    done = true;
                    break;
                }
            }
            assert!(done, "layout {layout} never reached the goal");
        }
    }

    #[test]
    fn bad_actions_are_rejected() {
        let mut w = Gridworld::new();
        assert!(matches!(
            w.step(&Action::Discrete(5)),
            Err(WorldError::BadAction(_))
        ));
        assert!(matches!(
            w.step(&Action::Continuous(vec![1.0, 0.0])),
            Err(WorldError::BadAction(_))
        ));
    }
}
