//! Sampling-based solvers: single-pass predictive sampling, the
//! cross-entropy method, exponential-weight averaging (MPPI), and the
//! colored-noise CEM variant with elite retention and momentum.

use std::time::Instant;

use ndarray::Array2;

use crate::core::{ActionSequence, ContinuousActionSpace, CostModel, RandomStream, SolverResult, StateVec};
use crate::noise::{sample_colored, sample_gaussian};

use super::{
    argmin, elite_indices, floor_sigma, refit_gaussian, sanitize_costs, softmin_weights,
    SolverError,
};

#[derive(Clone, Debug)]
pub struct PredictiveSamplingConfig {
    pub num_candidates: usize,
    /// Standard deviation of the perturbations around the nominal plan.
    pub scale: f64,
}

impl Default for PredictiveSamplingConfig {
    fn default() -> Self {
        Self {
            num_candidates: 300,
            scale: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CemConfig {
    pub num_candidates: usize,
    pub iterations: usize,
    pub num_elites: usize,
    /// Initial per-dimension sampling sigma.
    pub scale: f64,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self {
            num_candidates: 300,
            iterations: 30,
            num_elites: 30,
            scale: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MppiConfig {
    pub num_candidates: usize,
    pub iterations: usize,
    /// Weight averaging is restricted to this many lowest-cost candidates;
    /// set equal to `num_candidates` for the classic estimator.
    pub num_elites: usize,
    pub temperature: f64,
    /// Fixed sampling sigma; MPPI never adapts it.
    pub scale: f64,
}

impl Default for MppiConfig {
    fn default() -> Self {
        Self {
            num_candidates: 300,
            iterations: 30,
            num_elites: 300,
            temperature: 1.0,
            scale: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IcemConfig {
    pub num_candidates: usize,
    pub iterations: usize,
    pub num_elites: usize,
    /// How many elites survive into the next candidate pool.
    pub elites_kept: usize,
    /// Colored-noise exponent; 0 is white.
    pub beta: f64,
    /// Blend factor toward the previous mean/sigma (1 freezes them).
    pub momentum: f64,
    pub scale: f64,
}

impl Default for IcemConfig {
    fn default() -> Self {
        Self {
            num_candidates: 300,
            iterations: 30,
            num_elites: 30,
            elites_kept: 10,
            beta: 2.0,
            momentum: 0.1,
            scale: 1.0,
        }
    }
}

fn check_population(candidates: usize, elites: usize) -> Result<(), SolverError> {
    if candidates == 0 {
        return Err(SolverError::BadConfig("num_candidates must be >= 1".into()));
    }
    if elites == 0 || elites > candidates {
        return Err(SolverError::BadConfig(format!(
            "num_elites must be in 1..={candidates}, got {elites}"
        )));
    }
    Ok(())
}

fn check_init(init: Option<&ActionSequence>, horizon: usize, dims: usize) -> Result<(), SolverError> {
    if let Some(seq) = init {
        if seq.horizon() != horizon || seq.dims() != dims {
            return Err(SolverError::BadConfig(format!(
                "init shape ({}, {}) does not match requested ({horizon}, {dims})",
                seq.horizon(),
                seq.dims()
            )));
        }
    }
    Ok(())
}

/// One batch of perturbations around a nominal plan, the nominal included
/// unperturbed as candidate 1; returns the lowest-cost candidate.
pub fn predictive_sampling(
    model: &dyn CostModel,
    s0: &StateVec,
    space: &ContinuousActionSpace,
    horizon: usize,
    cfg: &PredictiveSamplingConfig,
    init: Option<&ActionSequence>,
    rng: &mut RandomStream,
) -> Result<SolverResult, SolverError> {
    let start = Instant::now();
    let dims = space.dims();
    check_population(cfg.num_candidates, 1)?;
    check_init(init, horizon, dims)?;

    let nominal = init
        .cloned()
        .unwrap_or_else(|| ActionSequence::zeros(horizon, dims));
    let mut candidates = Vec::with_capacity(cfg.num_candidates);
    candidates.push(nominal.clone());
    for eps in sample_gaussian(rng, horizon, dims, cfg.scale, cfg.num_candidates - 1) {
        candidates.push(ActionSequence::from_array(nominal.values() + &eps));
    }
    for c in &mut candidates {
        space.clip_in_place(c)?;
    }

    let mut costs = model.batched_cost(s0, &candidates);
    sanitize_costs(&mut costs)?;
    let best = argmin(&costs);
    Ok(SolverResult {
        best_sequence: candidates.swap_remove(best),
        best_cost: costs[best],
        iterations: 1,
        cost_evaluations: cfg.num_candidates as u64,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Cross-entropy method: iteratively refit a diagonal Gaussian to the elite
/// set. Candidate 1 of every batch is the current mean unperturbed; the
/// final mean and its cost are returned.
pub fn cem(
    model: &dyn CostModel,
    s0: &StateVec,
    space: &ContinuousActionSpace,
    horizon: usize,
    cfg: &CemConfig,
    init: Option<&ActionSequence>,
    rng: &mut RandomStream,
) -> Result<SolverResult, SolverError> {
    let start = Instant::now();
    let dims = space.dims();
    check_population(cfg.num_candidates, cfg.num_elites)?;
    check_init(init, horizon, dims)?;

    let mut mean = init
        .cloned()
        .unwrap_or_else(|| ActionSequence::zeros(horizon, dims))
        .into_values();
    let mut sigma = Array2::from_elem((horizon, dims), cfg.scale);
    let mut evals = 0u64;

    for _ in 0..cfg.iterations {
        let mut candidates = Vec::with_capacity(cfg.num_candidates);
        candidates.push(ActionSequence::from_array(mean.clone()));
        for eps in sample_gaussian(rng, horizon, dims, 1.0, cfg.num_candidates - 1) {
            candidates.push(ActionSequence::from_array(&mean + &(&sigma * &eps)));
        }
        for c in &mut candidates {
            space.clip_in_place(c)?;
        }
        let mut costs = model.batched_cost(s0, &candidates);
        evals += candidates.len() as u64;
        sanitize_costs(&mut costs)?;

        let elites: Vec<&Array2<f64>> = elite_indices(&costs, cfg.num_elites)
            .into_iter()
            .map(|i| candidates[i].values())
            .collect();
        let (new_mean, mut refit) = refit_gaussian(&elites, &mean);
        floor_sigma(&mut refit, &sigma);
        mean = new_mean;
        sigma = refit;
    }

    let mut best = ActionSequence::from_array(mean);
    space.clip_in_place(&mut best)?;
    let mut final_cost = model.batched_cost(s0, std::slice::from_ref(&best));
    evals += 1;
    sanitize_costs(&mut final_cost)?;
    Ok(SolverResult {
        best_sequence: best,
        best_cost: final_cost[0],
        iterations: cfg.iterations as u32,
        cost_evaluations: evals,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Exponentially weighted averaging over a fixed-scale Gaussian population.
/// With `num_elites == num_candidates` this is the classic estimator; smaller
/// values restrict the average to the best candidates.
pub fn mppi(
    model: &dyn CostModel,
    s0: &StateVec,
    space: &ContinuousActionSpace,
    horizon: usize,
    cfg: &MppiConfig,
    init: Option<&ActionSequence>,
    rng: &mut RandomStream,
) -> Result<SolverResult, SolverError> {
    let start = Instant::now();
    let dims = space.dims();
    check_population(cfg.num_candidates, cfg.num_elites)?;
    check_init(init, horizon, dims)?;
    if !(cfg.temperature > 0.0) {
        return Err(SolverError::BadConfig(format!(
            "temperature must be positive, got {}",
            cfg.temperature
        )));
    }

    let mut mean = init
        .cloned()
        .unwrap_or_else(|| ActionSequence::zeros(horizon, dims))
        .into_values();
    let mut evals = 0u64;

    for _ in 0..cfg.iterations {
        let mut candidates = Vec::with_capacity(cfg.num_candidates);
        candidates.push(ActionSequence::from_array(mean.clone()));
        for eps in sample_gaussian(rng, horizon, dims, cfg.scale, cfg.num_candidates - 1) {
            candidates.push(ActionSequence::from_array(&mean + &eps));
        }
        for c in &mut candidates {
            space.clip_in_place(c)?;
        }
        let mut costs = model.batched_cost(s0, &candidates);
        evals += candidates.len() as u64;
        sanitize_costs(&mut costs)?;

        let selected = elite_indices(&costs, cfg.num_elites);
        let elite_costs: Vec<f64> = selected.iter().map(|&i| costs[i]).collect();
        let weights = softmin_weights(&elite_costs, cfg.temperature);
        // incremental weighted average: exact no-op when every elite == mean
        let mut shift = Array2::zeros(mean.raw_dim());
        for (&i, &w) in selected.iter().zip(&weights) {
            shift += &(w * &(candidates[i].values() - &mean));
        }
        mean += &shift;
    }

    let mut best = ActionSequence::from_array(mean);
    space.clip_in_place(&mut best)?;
    let mut final_cost = model.batched_cost(s0, std::slice::from_ref(&best));
    evals += 1;
    sanitize_costs(&mut final_cost)?;
    Ok(SolverResult {
        best_sequence: best,
        best_cost: final_cost[0],
        iterations: cfg.iterations as u32,
        cost_evaluations: evals,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// CEM with temporally colored noise, elite retention across iterations, and
/// momentum on the sampling distribution.
pub fn icem(
    model: &dyn CostModel,
    s0: &StateVec,
    space: &ContinuousActionSpace,
    horizon: usize,
    cfg: &IcemConfig,
    init: Option<&ActionSequence>,
    rng: &mut RandomStream,
) -> Result<SolverResult, SolverError> {
    let start = Instant::now();
    let dims = space.dims();
    check_population(cfg.num_candidates, cfg.num_elites)?;
    check_init(init, horizon, dims)?;
    if !(0.0..=1.0).contains(&cfg.momentum) {
        return Err(SolverError::BadConfig(format!(
            "momentum must lie in [0, 1], got {}",
            cfg.momentum
        )));
    }

    let mut mean = init
        .cloned()
        .unwrap_or_else(|| ActionSequence::zeros(horizon, dims))
        .into_values();
    let mut sigma = Array2::from_elem((horizon, dims), cfg.scale);
    let mut retained: Vec<Array2<f64>> = Vec::new();
    let mut evals = 0u64;
    let alpha = cfg.momentum;

    for iter in 0..cfg.iterations {
        let mut candidates = Vec::with_capacity(cfg.num_candidates);
        candidates.push(ActionSequence::from_array(mean.clone()));
        for xi in sample_colored(rng, cfg.beta, horizon, dims, cfg.num_candidates - 1) {
            candidates.push(ActionSequence::from_array(&mean + &(&sigma * &xi)));
        }
        // retained elites re-enter the pool before clipping and evaluation
        if iter > 0 {
            let keep = cfg.elites_kept.min(retained.len()).min(candidates.len() - 1);
            for (slot, kept) in candidates[1..1 + keep].iter_mut().zip(&retained) {
                *slot = ActionSequence::from_array(kept.clone());
            }
        }
        for c in &mut candidates {
            space.clip_in_place(c)?;
        }
        let mut costs = model.batched_cost(s0, &candidates);
        evals += candidates.len() as u64;
        sanitize_costs(&mut costs)?;

        let order = elite_indices(&costs, cfg.num_elites);
        let elites: Vec<&Array2<f64>> = order.iter().map(|&i| candidates[i].values()).collect();
        let (fit_mean, mut fit_sigma) = refit_gaussian(&elites, &mean);
        floor_sigma(&mut fit_sigma, &sigma);
        mean = alpha * &mean + (1.0 - alpha) * &fit_mean;
        sigma = alpha * &sigma + (1.0 - alpha) * &fit_sigma;
        retained = order.iter().map(|&i| candidates[i].values().clone()).collect();
    }

    let mut best = ActionSequence::from_array(mean);
    space.clip_in_place(&mut best)?;
    let mut final_cost = model.batched_cost(s0, std::slice::from_ref(&best));
    evals += 1;
    sanitize_costs(&mut final_cost)?;
    Ok(SolverResult {
        best_sequence: best,
        best_cost: final_cost[0],
        iterations: cfg.iterations as u32,
        cost_evaluations: evals,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
