//! Cross-entropy search over discrete action paths via per-step categorical
//! distributions.

use std::time::Instant;

use ndarray::Array2;

use crate::core::{ActionSequence, CostModel, DiscreteActionSpace, RandomStream, SolverResult, StateVec};
use crate::noise::gumbel_max_sample;

use super::{elite_indices, sanitize_costs, SolverError};

#[derive(Clone, Debug)]
pub struct CategoricalCemConfig {
    pub num_candidates: usize,
    pub iterations: usize,
    pub num_elites: usize,
    /// Blend factor toward the previous distribution (1 freezes it).
    pub momentum: f64,
    /// Additive smoothing applied to the elite frequencies; 0 disables.
    pub smoothing: f64,
}

impl Default for CategoricalCemConfig {
    fn default() -> Self {
        Self {
            num_candidates: 300,
            iterations: 30,
            num_elites: 30,
            momentum: 0.1,
            smoothing: 0.01,
        }
    }
}

/// Additive smoothing per row: (p + delta) / (1 + cards * delta). Keeps every
/// probability strictly positive without changing the per-row ordering.
fn smooth_rows(freq: &mut Array2<f64>, delta: f64) {
    if delta <= 0.0 {
        return;
    }
    let cards = freq.ncols() as f64;
    freq.mapv_inplace(|p| (p + delta) / (1.0 + cards * delta));
}

fn mode_rows(dist: &Array2<f64>) -> ActionSequence {
    let picks: Vec<usize> = dist
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (i, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect();
    ActionSequence::from_indices(&picks, dist.ncols())
}

/// Iteratively refit per-step categorical distributions to the elite set.
/// Candidate 1 of every batch is the current per-step mode; samples are
/// drawn by Gumbel-max and evaluated as exact one-hot rows. Returns the
/// final mode decoded as a one-hot sequence. An init sequence, when given,
/// replaces the uniform table as the starting distribution.
pub fn categorical_cem(
    model: &dyn CostModel,
    s0: &StateVec,
    space: &DiscreteActionSpace,
    horizon: usize,
    cfg: &CategoricalCemConfig,
    init: Option<&ActionSequence>,
    rng: &mut RandomStream,
) -> Result<SolverResult, SolverError> {
    let start = Instant::now();
    let cards = space.cardinality();
    if cfg.num_candidates == 0 {
        return Err(SolverError::BadConfig("num_candidates must be >= 1".into()));
    }
    if cfg.num_elites == 0 || cfg.num_elites > cfg.num_candidates {
        return Err(SolverError::BadConfig(format!(
            "num_elites must be in 1..={}, got {}",
            cfg.num_candidates, cfg.num_elites
        )));
    }
    if !(0.0..=1.0).contains(&cfg.momentum) {
        return Err(SolverError::BadConfig(format!(
            "momentum must lie in [0, 1], got {}",
            cfg.momentum
        )));
    }
    if cfg.smoothing < 0.0 {
        return Err(SolverError::BadConfig("smoothing must be >= 0".into()));
    }
    if let Some(seq) = init {
        if seq.horizon() != horizon || seq.dims() != cards {
            return Err(SolverError::BadConfig(format!(
                "init shape {}x{} does not match {horizon}x{cards}",
                seq.horizon(),
                seq.dims()
            )));
        }
        if !seq.rows_are_stochastic(1e-9) {
            return Err(SolverError::BadConfig(
                "init rows must be probability distributions".into(),
            ));
        }
    }

    let mut dist = match init {
        Some(seq) => seq.values().clone(),
        None => Array2::from_elem((horizon, cards), 1.0 / cards as f64),
    };
    let mut evals = 0u64;
    let alpha = cfg.momentum;

    for _ in 0..cfg.iterations {
        let mut candidates = Vec::with_capacity(cfg.num_candidates);
        candidates.push(mode_rows(&dist));
        for _ in 1..cfg.num_candidates {
            let picks: Result<Vec<usize>, _> = (0..horizon)
                .map(|t| gumbel_max_sample(rng, dist.row(t).as_slice().expect("row is contiguous")))
                .collect();
            let picks = picks.map_err(|e| SolverError::BadConfig(e.to_string()))?;
            candidates.push(ActionSequence::from_indices(&picks, cards));
        }

        let mut costs = model.batched_cost(s0, &candidates);
        evals += candidates.len() as u64;
        sanitize_costs(&mut costs)?;

        let elites = elite_indices(&costs, cfg.num_elites);
        let mut freq = Array2::zeros((horizon, cards));
        for &i in &elites {
            for (t, &a) in candidates[i].decode_rows().iter().enumerate() {
                freq[[t, a]] += 1.0 / cfg.num_elites as f64;
            }
        }
        smooth_rows(&mut freq, cfg.smoothing);
        dist = alpha * &dist + (1.0 - alpha) * &freq;
    }

    let best = mode_rows(&dist);
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
