//! First-order solvers: multi-start gradient descent on continuous plans,
//! projected gradient descent on relaxed discrete plans, and an augmented
//! Lagrangian loop for inequality-constrained planning.

use std::time::Instant;

use ndarray::Array2;

use crate::core::{
    ActionSequence, ContinuousActionSpace, CostModel, DiscreteActionSpace, RandomStream,
    SolverResult, StateVec,
};
use crate::noise::sample_gaussian;

use super::{argmin, project_simplex, sanitize_costs, SolverError};

#[derive(Clone, Debug)]
pub struct GradientConfig {
    /// Independent restarts; candidate 1 is the init (or zeros) unperturbed.
    pub num_candidates: usize,
    /// Gradient steps per candidate.
    pub steps: usize,
    pub step_size: f64,
    /// Sigma of the perturbation that spreads candidates 2..N around the init.
    pub scale: f64,
    /// Global-norm gradient clip; 0 disables.
    pub grad_clip: f64,
    /// Per-step exploration noise injected into the iterate; 0 disables.
    pub action_noise: f64,
}

impl Default for GradientConfig {
    fn default() -> Self {
        Self {
            num_candidates: 8,
            steps: 100,
            step_size: 0.1,
            scale: 0.5,
            grad_clip: 0.0,
            action_noise: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LagrangianConfig {
    /// Inner minimization settings (candidates, steps per outer round, eta).
    pub inner: GradientConfig,
    pub outer_iterations: usize,
    pub rho0: f64,
    pub rho_scale: f64,
    pub rho_max: f64,
}

impl Default for LagrangianConfig {
    fn default() -> Self {
        Self {
            inner: GradientConfig {
                steps: 50,
                ..GradientConfig::default()
            },
            outer_iterations: 10,
            rho0: 1.0,
            rho_scale: 1.5,
            rho_max: 10.0,
        }
    }
}

fn clip_global_norm(grad: &mut Array2<f64>, threshold: f64) {
    if threshold <= 0.0 {
        return;
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > threshold {
        *grad *= threshold / norm;
    }
}

fn spread_candidates(
    base: &ActionSequence,
    count: usize,
    scale: f64,
    rng: &mut RandomStream,
) -> Vec<Array2<f64>> {
    let mut out = Vec::with_capacity(count);
    out.push(base.values().clone());
    for eps in sample_gaussian(rng, base.horizon(), base.dims(), scale, count - 1) {
        out.push(base.values() + &eps);
    }
    out
}

/// Multi-start gradient descent. Requires an analytic `cost_and_grad` (wrap
/// the model in `FiniteDifference` otherwise); iterates are clipped to the
/// bounds after every step and the lowest-cost final candidate wins.
pub fn gd(
    model: &dyn CostModel,
    s0: &StateVec,
    space: &ContinuousActionSpace,
    horizon: usize,
    cfg: &GradientConfig,
    init: Option<&ActionSequence>,
    rng: &mut RandomStream,
) -> Result<SolverResult, SolverError> {
    let start = Instant::now();
    let dims = space.dims();
    if cfg.num_candidates == 0 {
        return Err(SolverError::BadConfig("num_candidates must be >= 1".into()));
    }
    if let Some(seq) = init {
        if seq.horizon() != horizon || seq.dims() != dims {
            return Err(SolverError::BadConfig("init shape mismatch".into()));
        }
    }

    let base = init
        .cloned()
        .unwrap_or_else(|| ActionSequence::zeros(horizon, dims));
    let mut candidates = spread_candidates(&base, cfg.num_candidates, cfg.scale, rng);
    for c in &mut candidates {
        let mut seq = ActionSequence::from_array(std::mem::take(c));
        space.clip_in_place(&mut seq)?;
        *c = seq.into_values();
    }
    let mut evals = 0u64;

    for k in 0..cfg.steps {
        // exploration noise is drawn on the solver stream before the
        // (parallelizable) gradient evaluations
        let noise = if cfg.action_noise > 0.0 {
            Some(sample_gaussian(rng, horizon, dims, cfg.action_noise, candidates.len()))
        } else {
            None
        };
        for (i, c) in candidates.iter_mut().enumerate() {
            let seq = ActionSequence::from_array(c.clone());
            let (_, mut grad) = model
                .cost_and_grad(s0, &seq)
                .ok_or(SolverError::NotDifferentiable)?;
            evals += 1;
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(SolverError::NonFiniteGradient { iteration: k });
            }
            clip_global_norm(&mut grad, cfg.grad_clip);
            *c -= &(cfg.step_size * &grad);
            if let Some(noise) = &noise {
                *c += &noise[i];
            }
            let mut seq = ActionSequence::from_array(std::mem::take(c));
            space.clip_in_place(&mut seq)?;
            *c = seq.into_values();
        }
    }

    let finals: Vec<ActionSequence> = candidates
        .into_iter()
        .map(ActionSequence::from_array)
        .collect();
    let mut costs = model.batched_cost(s0, &finals);
    evals += finals.len() as u64;
    sanitize_costs(&mut costs)?;
    let best = argmin(&costs);
    Ok(SolverResult {
        best_sequence: finals[best].clone(),
        best_cost: costs[best],
        iterations: cfg.steps as u32,
        cost_evaluations: evals,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Projected gradient descent over relaxed (row-stochastic) discrete plans.
/// Returns the decoded one-hot result alongside the relaxed matrix it was
/// decoded from.
pub fn projected_gradient(
    model: &dyn CostModel,
    s0: &StateVec,
    space: &DiscreteActionSpace,
    horizon: usize,
    cfg: &GradientConfig,
    init: Option<&ActionSequence>,
    rng: &mut RandomStream,
) -> Result<(SolverResult, ActionSequence), SolverError> {
    let start = Instant::now();
    let cards = space.cardinality();
    if cfg.num_candidates == 0 {
        return Err(SolverError::BadConfig("num_candidates must be >= 1".into()));
    }
    if let Some(seq) = init {
        if seq.horizon() != horizon || seq.dims() != cards {
            return Err(SolverError::BadConfig("init shape mismatch".into()));
        }
    }

    let project_rows = |m: &mut Array2<f64>| {
        for mut row in m.rows_mut() {
            let p = project_simplex(row.as_slice().expect("row is contiguous"));
            for (dst, src) in row.iter_mut().zip(p) {
                *dst = src;
            }
        }
    };

    let base = init
        .cloned()
        .unwrap_or_else(|| ActionSequence::uniform_rows(horizon, cards));
    let mut candidates = spread_candidates(&base, cfg.num_candidates, cfg.scale, rng);
    // candidate 1 keeps the init verbatim; the spread ones get projected back
    for c in candidates.iter_mut().skip(1) {
        project_rows(c);
    }
    let mut evals = 0u64;

    for k in 0..cfg.steps {
        let noise = if cfg.action_noise > 0.0 {
            Some(sample_gaussian(rng, horizon, cards, cfg.action_noise, candidates.len()))
        } else {
            None
        };
        for (i, c) in candidates.iter_mut().enumerate() {
            let seq = ActionSequence::from_array(c.clone());
            let (_, grad) = model
                .cost_and_grad(s0, &seq)
                .ok_or(SolverError::NotDifferentiable)?;
            evals += 1;
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(SolverError::NonFiniteGradient { iteration: k });
            }
            *c -= &(cfg.step_size * &grad);
            if let Some(noise) = &noise {
                *c += &noise[i];
            }
            project_rows(c);
        }
    }

    let finals: Vec<ActionSequence> = candidates
        .into_iter()
        .map(ActionSequence::from_array)
        .collect();
    let mut costs = model.batched_cost(s0, &finals);
    evals += finals.len() as u64;
    sanitize_costs(&mut costs)?;
    let best = argmin(&costs);
    let relaxed = finals[best].clone();
    let decoded = ActionSequence::from_indices(&relaxed.decode_rows(), cards);
    let mut final_cost = model.batched_cost(s0, std::slice::from_ref(&decoded));
    evals += 1;
    sanitize_costs(&mut final_cost)?;
    Ok((
        SolverResult {
            best_sequence: decoded,
            best_cost: final_cost[0],
            iterations: cfg.steps as u32,
            cost_evaluations: evals,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        relaxed,
    ))
}

/// Augmented Lagrangian planning for models exposing inequality constraints
/// (g <= 0 feasible). Returns the solver result plus the multiplier vector
/// after every outer iteration.
pub fn lagrangian(
    model: &dyn CostModel,
    s0: &StateVec,
    space: &ContinuousActionSpace,
    horizon: usize,
    cfg: &LagrangianConfig,
    init: Option<&ActionSequence>,
    rng: &mut RandomStream,
) -> Result<(SolverResult, Vec<Vec<f64>>), SolverError> {
    let start = Instant::now();
    let dims = space.dims();
    let inner = &cfg.inner;
    if inner.num_candidates == 0 {
        return Err(SolverError::BadConfig("num_candidates must be >= 1".into()));
    }
    if cfg.rho0 < 0.0 || cfg.rho_scale < 1.0 || cfg.rho_max < cfg.rho0 {
        return Err(SolverError::BadConfig(
            "need rho0 >= 0, rho_scale >= 1, rho_max >= rho0".into(),
        ));
    }
    if let Some(seq) = init {
        if seq.horizon() != horizon || seq.dims() != dims {
            return Err(SolverError::BadConfig("init shape mismatch".into()));
        }
    }

    let base = init
        .cloned()
        .unwrap_or_else(|| ActionSequence::zeros(horizon, dims));
    let mut candidates = spread_candidates(&base, inner.num_candidates, inner.scale, rng);
    for c in &mut candidates {
        let mut seq = ActionSequence::from_array(std::mem::take(c));
        space.clip_in_place(&mut seq)?;
        *c = seq.into_values();
    }

    let probe = ActionSequence::from_array(candidates[0].clone());
    let num_constraints = model
        .constraints(s0, &probe)
        .ok_or(SolverError::MissingModelPiece("constraints"))?
        .len();

    let mut multipliers = vec![0.0; num_constraints];
    let mut rho = cfg.rho0;
    let mut history = Vec::with_capacity(cfg.outer_iterations);
    let mut evals = 0u64;

    for outer in 0..cfg.outer_iterations {
        for k in 0..inner.steps {
            let noise = if inner.action_noise > 0.0 {
                Some(sample_gaussian(rng, horizon, dims, inner.action_noise, candidates.len()))
            } else {
                None
            };
            for (i, c) in candidates.iter_mut().enumerate() {
                let seq = ActionSequence::from_array(c.clone());
                let (_, mut grad) = model
                    .cost_and_grad(s0, &seq)
                    .ok_or(SolverError::NotDifferentiable)?;
                evals += 1;
                let values = model
                    .constraints(s0, &seq)
                    .ok_or(SolverError::MissingModelPiece("constraints"))?;
                let grads = model
                    .constraint_grads(s0, &seq)
                    .ok_or(SolverError::MissingModelPiece("constraint gradients"))?;
                for ((&g, ggrad), &lambda) in values.iter().zip(&grads).zip(&multipliers) {
                    let weight = lambda + 2.0 * rho * g.max(0.0);
                    if weight != 0.0 {
                        grad += &(weight * ggrad);
                    }
                }
                if grad.iter().any(|g| !g.is_finite()) {
                    return Err(SolverError::NonFiniteGradient {
                        iteration: outer * inner.steps + k,
                    });
                }
                clip_global_norm(&mut grad, inner.grad_clip);
                *c -= &(inner.step_size * &grad);
                if let Some(noise) = &noise {
                    *c += &noise[i];
                }
                let mut seq = ActionSequence::from_array(std::mem::take(c));
                space.clip_in_place(&mut seq)?;
                *c = seq.into_values();
            }
        }

        // dual ascent on the mean violation across candidates
        let mut mean_violation = vec![0.0; num_constraints];
        for c in &candidates {
            let seq = ActionSequence::from_array(c.clone());
            let values = model
                .constraints(s0, &seq)
                .ok_or(SolverError::MissingModelPiece("constraints"))?;
            for (acc, v) in mean_violation.iter_mut().zip(values) {
                *acc += v / candidates.len() as f64;
            }
        }
        for (lambda, &v) in multipliers.iter_mut().zip(&mean_violation) {
            *lambda = (*lambda + rho * v).max(0.0);
        }
        rho = (rho * cfg.rho_scale).min(cfg.rho_max);
        history.push(multipliers.clone());
    }

    let finals: Vec<ActionSequence> = candidates
        .into_iter()
        .map(ActionSequence::from_array)
        .collect();
    let mut costs = model.batched_cost(s0, &finals);
    evals += finals.len() as u64;
    sanitize_costs(&mut costs)?;
    let best = argmin(&costs);
    Ok((
        SolverResult {
            best_sequence: finals[best].clone(),
            best_cost: costs[best],
            iterations: cfg.outer_iterations as u32,
            cost_evaluations: evals,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        history,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::make_rng;
    use ndarray::array;

    /// J(A) = sum (a - c)^2 with analytic gradient and the action-norm
    /// constraint ||a_t||^2 <= radius^2 exposed per step.
    struct ConstrainedQuadratic {
        target: f64,
        radius: Option<f64>,
    }

    impl CostModel for ConstrainedQuadratic {
        fn batched_cost(&self, _s0: &StateVec, candidates: &[ActionSequence]) -> Vec<f64> {
            candidates
                .iter()
                .map(|c| c.values().iter().map(|&a| (a - self.target) * (a - self.target)).sum())
                .collect()
        }

        fn cost_and_grad(&self, s0: &StateVec, seq: &ActionSequence) -> Option<(f64, Array2<f64>)> {
            let cost = self.batched_cost(s0, std::slice::from_ref(seq))[0];
            Some((cost, seq.values().mapv(|a| 2.0 * (a - self.target))))
        }

        fn constraints(&self, _s0: &StateVec, seq: &ActionSequence) -> Option<Vec<f64>> {
            let r = self.radius?;
            Some(
                seq.values()
                    .rows()
                    .into_iter()
                    .map(|row| row.iter().map(|a| a * a).sum::<f64>() - r * r)
                    .collect(),
            )
        }

        fn constraint_grads(&self, _s0: &StateVec, seq: &ActionSequence) -> Option<Vec<Array2<f64>>> {
            self.radius?;
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

    #[test]
    fn gd_reaches_the_pinned_one_dimensional_optimum() {
        // optimum 0.9 in [-1, 1], eta 0.1, 200 steps -> within 1e-3
        let model = ConstrainedQuadratic {
            target: 0.9,
            radius: None,
        };
        let space = ContinuousActionSpace::symmetric(1, 1.0);
        let cfg = GradientConfig {
            num_candidates: 1,
            steps: 200,
            step_size: 0.1,
            scale: 0.0,
            grad_clip: 0.0,
            action_noise: 0.0,
        };
        let mut rng = make_rng(31);
        let out = gd(&model, &StateVec(vec![]), &space, 1, &cfg, None, &mut rng).unwrap();
        assert!((out.best_sequence.values()[[0, 0]] - 0.9).abs() <= 1e-3);
    }

    #[test]
    fn gd_requires_a_differentiable_model() {
        struct NoGrad;
        impl CostModel for NoGrad {
            fn batched_cost(&self, _s0: &StateVec, candidates: &[ActionSequence]) -> Vec<f64> {
                vec![0.0; candidates.len()]
            }
        }
        let space = ContinuousActionSpace::symmetric(1, 1.0);
        let cfg = GradientConfig::default();
        let mut rng = make_rng(32);
        assert!(matches!(
            gd(&NoGrad, &StateVec(vec![]), &space, 1, &cfg, None, &mut rng),
            Err(SolverError::NotDifferentiable)
        ));
    }

    #[test]
    fn gd_names_the_iteration_on_non_finite_gradients() {
        struct NanGrad;
        impl CostModel for NanGrad {
            fn batched_cost(&self, _s0: &StateVec, candidates: &[ActionSequence]) -> Vec<f64> {
                vec![0.0; candidates.len()]
            }
            fn cost_and_grad(&self, _s0: &StateVec, seq: &ActionSequence) -> Option<(f64, Array2<f64>)> {
                Some((0.0, seq.values().mapv(|_| f64::NAN)))
            }
        }
        let space = ContinuousActionSpace::symmetric(1, 1.0);
        let cfg = GradientConfig {
            num_candidates: 1,
            steps: 5,
            ..GradientConfig::default()
        };
        let mut rng = make_rng(33);
        match gd(&NanGrad, &StateVec(vec![]), &space, 1, &cfg, None, &mut rng) {
            Err(SolverError::NonFiniteGradient { iteration: 0 }) => {}
            other => panic!("expected NonFiniteGradient at iteration 0, got {other:?}"),
        }
    }

    #[test]
    fn gradient_clipping_caps_the_global_norm() {
        let mut g = array![[3.0, 4.0]];
        clip_global_norm(&mut g, 1.0);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() <= 1e-12);
        assert!((g[[0, 0] ] - 0.6).abs() <= 1e-12);
        // zero threshold disables
        let mut g = array![[3.0, 4.0]];
        clip_global_norm(&mut g, 0.0);
        assert_eq!(g, array![[3.0, 4.0]]);
    }

    #[test]
    fn lagrangian_honors_an_active_constraint() {
        // free optimum 0.9, constraint a^2 <= 0.25 -> constrained optimum 0.5
        let model = ConstrainedQuadratic {
            target: 0.9,
            radius: Some(0.5),
        };
        let space = ContinuousActionSpace::symmetric(1, 1.0);
        let cfg = LagrangianConfig {
            inner: GradientConfig {
                num_candidates: 4,
                steps: 100,
                step_size: 0.02,
                scale: 0.3,
                grad_clip: 0.0,
                action_noise: 0.0,
            },
            outer_iterations: 12,
            rho0: 1.0,
            rho_scale: 1.5,
            rho_max: 10.0,
        };
        let mut rng = make_rng(34);
        let (out, history) = lagrangian(&model, &StateVec(vec![]), &space, 1, &cfg, None, &mut rng).unwrap();
        assert!(
            (out.best_sequence.values()[[0, 0]] - 0.5).abs() <= 0.05,
            "constrained optimum {}",
            out.best_sequence.values()[[0, 0]]
        );
        assert_eq!(history.len(), 12);
        assert!(history.iter().flatten().all(|&l| l >= 0.0));
        // the active constraint's multiplier should end up positive
        assert!(history.last().unwrap()[0] > 0.0);
    }

    #[test]
    fn lagrangian_with_inactive_constraints_matches_plain_gd() {
        // g(a) = a^2 - 100 is never active in [-1, 1]; multipliers stay 0 and
        // the trajectory equals gd run for the same total number of steps
        let model = ConstrainedQuadratic {
            target: 0.7,
            radius: Some(10.0),
        };
        let space = ContinuousActionSpace::symmetric(2, 1.0);
        let inner = GradientConfig {
            num_candidates: 3,
            steps: 20,
            step_size: 0.05,
            scale: 0.4,
            grad_clip: 0.0,
            action_noise: 0.0,
        };
        let cfg = LagrangianConfig {
            inner: inner.clone(),
            outer_iterations: 5,
            rho0: 1.0,
            rho_scale: 2.0,
            rho_max: 100.0,
        };
        let mut rng = make_rng(35);
        let (constrained, history) =
            lagrangian(&model, &StateVec(vec![]), &space, 3, &cfg, None, &mut rng).unwrap();
        assert!(history.iter().flatten().all(|&l| l == 0.0));

        let gd_cfg = GradientConfig {
            steps: inner.steps * cfg.outer_iterations,
            ..inner
        };
        let mut rng = make_rng(35);
        let plain = gd(&model, &StateVec(vec![]), &space, 3, &gd_cfg, None, &mut rng).unwrap();
        let diff = (constrained.best_sequence.values() - plain.best_sequence.values())
            .iter()
            .map(|d| d.abs())
            .fold(0.0, f64::max);
        assert!(diff <= 1e-3, "paired runs diverged by {diff}");
    }

    #[test]
    fn lagrangian_requires_constraints() {
        let model = ConstrainedQuadratic {
            target: 0.5,
            radius: None,
        };
        let space = ContinuousActionSpace::symmetric(1, 1.0);
        let mut rng = make_rng(36);
        assert!(matches!(
            lagrangian(&model, &StateVec(vec![]), &space, 1, &LagrangianConfig::default(), None, &mut rng),
            Err(SolverError::MissingModelPiece("constraints"))
        ));
    }

    /// Relaxed-path cost: expected disagreement with a target path, linear in
    /// the row probabilities, so PGD has a well-defined gradient.
    struct RelaxedPathCost {
        target: Vec<usize>,
    }

    impl CostModel for RelaxedPathCost {
        fn batched_cost(&self, _s0: &StateVec, candidates: &[ActionSequence]) -> Vec<f64> {
            candidates
                .iter()
                .map(|c| {
                    c.values()
                        .rows()
                        .into_iter()
                        .zip(&self.target)
                        .map(|(row, &want)| 1.0 - row[want])
                        .sum()
                })
                .collect()
        }

        fn cost_and_grad(&self, s0: &StateVec, seq: &ActionSequence) -> Option<(f64, Array2<f64>)> {
            let cost = self.batched_cost(s0, std::slice::from_ref(seq))[0];
            let mut grad = Array2::zeros((seq.horizon(), seq.dims()));
            for (t, &want) in self.target.iter().enumerate() {
                grad[[t, want]] = -1.0;
            }
            Some((cost, grad))
        }
    }

    #[test]
    fn pgd_concentrates_mass_on_the_best_path() {
        let model = RelaxedPathCost {
            target: vec![2, 0, 1],
        };
        let space = DiscreteActionSpace::new(3);
        let cfg = GradientConfig {
            num_candidates: 4,
            steps: 50,
            step_size: 0.5,
            scale: 0.1,
            grad_clip: 0.0,
            action_noise: 0.0,
        };
        let mut rng = make_rng(37);
        let (out, relaxed) =
            projected_gradient(&model, &StateVec(vec![]), &space, 3, &cfg, None, &mut rng).unwrap();
        assert_eq!(out.best_sequence.decode_rows(), vec![2, 0, 1]);
        assert!(relaxed.rows_are_stochastic(1e-9));
        for (t, &want) in [2usize, 0, 1].iter().enumerate() {
            assert!(relaxed.values()[[t, want]] >= 0.9, "row {t} mass {relaxed:?}");
        }
    }

    #[test]
    fn pgd_with_no_steps_returns_a_one_hot_init_unchanged() {
        let model = RelaxedPathCost {
            target: vec![0, 0],
        };
        let space = DiscreteActionSpace::new(4);
        let init = ActionSequence::from_indices(&[3, 1], 4);
        let cfg = GradientConfig {
            num_candidates: 1,
            steps: 0,
            step_size: 0.5,
            scale: 0.0,
            grad_clip: 0.0,
            action_noise: 0.0,
        };
        let mut rng = make_rng(38);
        let (out, relaxed) =
            projected_gradient(&model, &StateVec(vec![]), &space, 2, &cfg, Some(&init), &mut rng).unwrap();
        assert_eq!(out.best_sequence.values(), init.values());
        assert_eq!(relaxed.values(), init.values());
    }

    #[test]
    fn pgd_rows_stay_on_the_simplex_under_noise() {
        let model = RelaxedPathCost {
            target: vec![1, 2],
        };
        let space = DiscreteActionSpace::new(3);
        let cfg = GradientConfig {
            num_candidates: 3,
            steps: 25,
            step_size: 0.3,
            scale: 0.2,
            grad_clip: 0.0,
            action_noise: 0.05,
        };
        let mut rng = make_rng(39);
        let (_, relaxed) =
            projected_gradient(&model, &StateVec(vec![]), &space, 2, &cfg, None, &mut rng).unwrap();
        assert!(relaxed.rows_are_stochastic(1e-9));
    }
}
