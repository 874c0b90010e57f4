//! Every continuous solver against the same separable quadratic, printed as a
//! small scoreboard. The optimum is a_t = 0.3 in every coordinate, so
//! best_cost near zero means the solver found it.

use mpckit::core::{
    make_rng, parallel_costs, ActionSequence, ContinuousActionSpace, CostModel, SolverResult,
    StateVec,
};
use mpckit::solvers::{
    cem, gd, icem, mppi, predictive_sampling, CemConfig, GradientConfig, IcemConfig, MppiConfig,
    PredictiveSamplingConfig,
};
use ndarray::Array2;

struct OffsetQuadratic;

impl CostModel for OffsetQuadratic {
    fn batched_cost(&self, _s0: &StateVec, candidates: &[ActionSequence]) -> Vec<f64> {
        parallel_costs(candidates, |seq| {
            seq.values().iter().map(|&a| (a - 0.3) * (a - 0.3)).sum()
        })
    }

    fn cost_and_grad(&self, s0: &StateVec, seq: &ActionSequence) -> Option<(f64, Array2<f64>)> {
        Some((self.cost(s0, seq), seq.values().mapv(|a| 2.0 * (a - 0.3))))
    }
}

fn row(name: &str, out: &SolverResult) {
    let worst = out
        .best_sequence
        .values()
        .iter()
        .map(|&a| (a - 0.3).abs())
        .fold(0.0f64, f64::max);
    println!(
        "{name:<22} cost {:>9.2e}  max |a - 0.3| {:>8.2e}  evals {:>7}  {:>6.1} ms",
        out.best_cost,
        worst,
        out.cost_evaluations,
        out.wall_time_s * 1e3
    );
}

fn main() {
    let model = OffsetQuadratic;
    let s0 = StateVec(vec![]);
    let space = ContinuousActionSpace::symmetric(2, 1.0);
    let horizon = 4;

    let mut rng = make_rng(1);
    let cfg = CemConfig {
        num_candidates: 100,
        iterations: 10,
        num_elites: 10,
        scale: 1.0,
    };
    row("cem", &cem(&model, &s0, &space, horizon, &cfg, None, &mut rng).unwrap());

    let mut rng = make_rng(2);
    let cfg = IcemConfig {
        num_candidates: 100,
        iterations: 12,
        num_elites: 10,
        elites_kept: 5,
        beta: 2.0,
        momentum: 0.1,
        scale: 1.0,
    };
    row("icem", &icem(&model, &s0, &space, horizon, &cfg, None, &mut rng).unwrap());

    let mut rng = make_rng(3);
    let cfg = MppiConfig {
        num_candidates: 300,
        iterations: 30,
        num_elites: 300,
        temperature: 0.1,
        scale: 0.15,
    };
    row("mppi", &mppi(&model, &s0, &space, horizon, &cfg, None, &mut rng).unwrap());

    let mut rng = make_rng(4);
    let cfg = GradientConfig {
        num_candidates: 8,
        steps: 200,
        step_size: 0.1,
        scale: 0.5,
        grad_clip: 0.0,
        action_noise: 0.0,
    };
    row("gd", &gd(&model, &s0, &space, horizon, &cfg, None, &mut rng).unwrap());

    // one-shot best-of-N; in an MPC loop the winner seeds the next solve,
    // which is replicated here by hand
    let mut rng = make_rng(5);
    let cfg = PredictiveSamplingConfig {
        num_candidates: 2_000,
        scale: 0.1,
    };
    let mut nominal = ActionSequence::zeros(horizon, 2);
    let mut last = None;
    for _ in 0..30 {
        let out = predictive_sampling(&model, &s0, &space, horizon, &cfg, Some(&nominal), &mut rng)
            .unwrap();
        nominal = out.best_sequence.clone();
        last = Some(out);
    }
    row("predictive (30 warm)", &last.unwrap());
}
