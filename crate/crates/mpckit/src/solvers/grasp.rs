//! Gradient search over virtual state chains: optimizes a sequence of
//! intermediate states with both endpoints pinned (start at the current
//! state, end at the goal) together with the actions that connect them,
//! optionally re-synchronized by short warm-started sampling solves.

use std::time::Instant;

use crate::core::{
    ActionSequence, ContinuousActionSpace, DynamicsModel, RandomStream, SolverResult, StateVec,
};

use super::{cem, sanitize_costs, CemConfig, SolverError};

/// Per-iteration scalar schedule.
#[derive(Clone, Debug)]
pub enum Schedule {
    Constant(f64),
    /// Linear ramp over the run; a single-iteration run sits at `from`.
    Linear { from: f64, to: f64 },
    /// Explicit per-iteration values; the last value repeats if the run is
    /// longer than the list.
    Values(Vec<f64>),
}

impl Schedule {
    pub fn at(&self, k: usize, total: usize) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::Linear { from, to } => {
                if total <= 1 {
                    *from
                } else {
                    from + (to - from) * (k as f64 / (total - 1) as f64)
                }
            }
            Schedule::Values(values) => values[k.min(values.len() - 1)],
        }
    }
}

#[derive(Clone, Debug)]
pub struct GraspConfig {
    pub iterations: usize,
    /// Step size for the action update.
    pub action_step: f64,
    /// Step size pulling each virtual state toward its own prediction;
    /// stable below 0.5.
    pub state_step: f64,
    /// Weight of the pull toward the goal applied to every prediction.
    pub goal_weight: Schedule,
    /// Sigma of the exploration noise injected into interior states.
    pub state_noise: Schedule,
    /// Run the sync solver every this many iterations; 0 disables.
    pub sync_every: usize,
    /// Warm-started sampling solve used at sync points.
    pub sync: CemConfig,
}

impl Default for GraspConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            action_step: 0.2,
            state_step: 0.2,
            goal_weight: Schedule::Linear { from: 0.0, to: 1.0 },
            state_noise: Schedule::Constant(0.0),
            sync_every: 0,
            sync: CemConfig {
                num_candidates: 100,
                iterations: 3,
                num_elites: 10,
                scale: 0.2,
            },
        }
    }
}

/// Per-iteration diagnostics: the (first, last) virtual states after each
/// update, and the chain loss before it.
#[derive(Clone, Debug, Default)]
pub struct GraspTrace {
    pub boundary: Vec<(StateVec, StateVec)>,
    pub loss: Vec<f64>,
}

fn check_schedule(s: &Schedule, what: &str) -> Result<(), SolverError> {
    if let Schedule::Values(v) = s {
        if v.is_empty() {
            return Err(SolverError::BadConfig(format!("{what} schedule is empty")));
        }
    }
    Ok(())
}

/// Virtual-chain gradient search toward `goal`. The chain starts as a linear
/// interpolation from `s0` to `goal`; each iteration rolls the current plan
/// through the model one step at a time from the (noised) chain states,
/// updates actions to reduce prediction defects plus a goal pull, and relaxes
/// interior states toward their predictions. Both endpoints stay pinned.
pub fn grasp(
    model: &dyn DynamicsModel,
    s0: &StateVec,
    goal: &StateVec,
    space: &ContinuousActionSpace,
    horizon: usize,
    cfg: &GraspConfig,
    init: Option<&ActionSequence>,
    rng: &mut RandomStream,
) -> Result<(SolverResult, GraspTrace), SolverError> {
    let start = Instant::now();
    let sd = model.state_dim();
    let dims = space.dims();
    if horizon == 0 {
        return Err(SolverError::BadConfig("horizon must be >= 1".into()));
    }
    if s0.dim() != sd || goal.dim() != sd {
        return Err(SolverError::BadConfig(format!(
            "state dim mismatch: model wants {sd}, got start {} and goal {}",
            s0.dim(),
            goal.dim()
        )));
    }
    if cfg.action_step < 0.0 || !(0.0..0.5).contains(&cfg.state_step) {
        return Err(SolverError::BadConfig(
            "need action_step >= 0 and state_step in [0, 0.5)".into(),
        ));
    }
    check_schedule(&cfg.goal_weight, "goal_weight")?;
    check_schedule(&cfg.state_noise, "state_noise")?;
    if let Some(seq) = init {
        if seq.horizon() != horizon || seq.dims() != dims {
            return Err(SolverError::BadConfig("init shape mismatch".into()));
        }
    }

    let mut plan = init
        .cloned()
        .unwrap_or_else(|| ActionSequence::zeros(horizon, dims));
    space.clip_in_place(&mut plan)?;
    let mut evals = 0u64;

    // z[0] = s0 and z[horizon] = goal are pinned for the whole run
    let mut chain: Vec<StateVec> = (0..=horizon)
        .map(|t| {
            let w = t as f64 / horizon as f64;
            StateVec(
                s0.0.iter()
                    .zip(&goal.0)
                    .map(|(a, b)| a + w * (b - a))
                    .collect(),
            )
        })
        .collect();

    let mut trace = GraspTrace::default();

    for k in 0..cfg.iterations {
        let gamma = cfg.goal_weight.at(k, cfg.iterations);
        let sigma = cfg.state_noise.at(k, cfg.iterations);

        chain[0] = s0.clone();
        chain[horizon] = goal.clone();

        // one-step predictions from the chain, not a full rollout
        let predictions: Vec<StateVec> = (0..horizon)
            .map(|t| {
                let row = plan.values().row(t);
                model.predict(&chain[t], row.as_slice().expect("row is contiguous"))
            })
            .collect();

        let mut loss = 0.0;
        for t in 0..horizon {
            let defect: f64 = predictions[t]
                .0
                .iter()
                .zip(&chain[t + 1].0)
                .map(|(p, z)| (p - z) * (p - z))
                .sum();
            let pull: f64 = predictions[t]
                .0
                .iter()
                .zip(&goal.0)
                .map(|(p, g)| (p - g) * (p - g))
                .sum();
            loss += defect + gamma * pull;
        }

        for t in 0..horizon {
            let residual: Vec<f64> = predictions[t]
                .0
                .iter()
                .zip(&chain[t + 1].0)
                .zip(&goal.0)
                .map(|((p, z), g)| 2.0 * (p - z) + 2.0 * gamma * (p - g))
                .collect();
            let row = plan.values().row(t).to_owned();
            let jac = model.action_jacobian(&chain[t], row.as_slice().expect("row is contiguous"));
            for j in 0..dims {
                let g: f64 = (0..sd).map(|i| jac[[i, j]] * residual[i]).sum();
                if !g.is_finite() {
                    return Err(SolverError::NonFiniteGradient { iteration: k });
                }
                plan.values_mut()[[t, j]] -= cfg.action_step * g;
            }
        }
        space.clip_in_place(&mut plan)?;

        for tau in 1..horizon {
            for (z, p) in chain[tau].0.iter_mut().zip(&predictions[tau - 1].0) {
                *z -= cfg.state_step * 2.0 * (*z - p);
            }
        }
        // exploration noise lands on the updated interior states
        if sigma > 0.0 {
            for z in chain.iter_mut().take(horizon).skip(1) {
                for x in &mut z.0 {
                    *x += sigma * rng.normal();
                }
            }
        }
        chain[0] = s0.clone();
        chain[horizon] = goal.clone();

        trace.boundary.push((chain[0].clone(), chain[horizon].clone()));
        trace.loss.push(loss);

        if cfg.sync_every > 0 && k > 0 && (k + 1) % cfg.sync_every == 0 {
            let synced = cem(model, s0, space, horizon, &cfg.sync, Some(&plan), rng)?;
            evals += synced.cost_evaluations;
            plan = synced.best_sequence;
        }
    }

    let mut cost = model.batched_cost(s0, std::slice::from_ref(&plan));
    evals += 1;
    sanitize_costs(&mut cost)?;
    Ok((
        SolverResult {
            best_sequence: plan,
            best_cost: cost[0],
            iterations: cfg.iterations as u32,
            cost_evaluations: evals,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        trace,
    ))
}
