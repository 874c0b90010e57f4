//! Plans under a per-step action-norm constraint. Plain gradient descent
//! ignores the constraint and saturates the box; the augmented Lagrangian
//! run settles on the constraint boundary and its multipliers show which
//! steps are active.

use mpckit::core::{make_rng, ActionSequence, ContinuousActionSpace, StateVec};
use mpckit::solvers::{gd, lagrangian, GradientConfig, LagrangianConfig};
use mpckit::worlds::PointMassModel;

fn max_step_norm(seq: &ActionSequence) -> f64 {
    seq.values()
        .rows()
        .into_iter()
        .map(|row| row.iter().map(|a| a * a).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn main() {
    let mut model = PointMassModel::new(0.1, 0.1, [0.9, 0.0]);
    model.action_bound = 0.4;
    let s0 = StateVec(vec![0.0; 4]);
    let space = ContinuousActionSpace::symmetric(2, 1.0);
    let horizon = 12;
    let inner = GradientConfig {
        num_candidates: 8,
        steps: 120,
        step_size: 0.1,
        scale: 0.5,
        grad_clip: 0.0,
        action_noise: 0.0,
    };

    let mut rng = make_rng(31);
    let free = gd(&model, &s0, &space, horizon, &inner, None, &mut rng).unwrap();
    println!(
        "unconstrained   cost {:8.4}  max step norm {:.3}",
        free.best_cost,
        max_step_norm(&free.best_sequence)
    );

    let cfg = LagrangianConfig {
        inner,
        outer_iterations: 10,
        rho0: 1.0,
        rho_scale: 2.0,
        rho_max: 100.0,
    };
    let mut rng = make_rng(32);
    let (tight, history) = lagrangian(&model, &s0, &space, horizon, &cfg, None, &mut rng).unwrap();
    println!(
        "norm bound 0.4  cost {:8.4}  max step norm {:.3}",
        tight.best_cost,
        max_step_norm(&tight.best_sequence)
    );

    println!("\nlargest multiplier after each outer iteration:");
    for (k, lambdas) in history.iter().enumerate() {
        let peak = lambdas.iter().cloned().fold(0.0, f64::max);
        let active = lambdas.iter().filter(|&&l| l > 1e-6).count();
        println!("  outer {k:>2}  max lambda {peak:8.4}  active steps {active}");
    }
}
