//! Euclidean projection onto the probability simplex.

/// Project `v` onto {x : x_i >= 0, sum x_i = 1} in O(n log n): sort
/// descending, find the largest prefix whose water level keeps every kept
/// coordinate positive, then shift and clamp.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "cannot project an empty vector");
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::make_rng;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn pinned_examples() {
        assert_close(&project_simplex(&[2.0, 0.0]), &[1.0, 0.0], 1e-12);
        assert_close(&project_simplex(&[0.4, 0.4]), &[0.5, 0.5], 1e-12);
        // already on the simplex: unchanged
        assert_close(&project_simplex(&[0.2, 0.5, 0.3]), &[0.2, 0.5, 0.3], 1e-12);
    }

    #[test]
    fn output_is_a_distribution_and_projection_is_idempotent() {
        let mut rng = make_rng(99);
        for _ in 0..200 {
            let n = 1 + rng.choice(6);
            let v: Vec<f64> = (0..n).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
            let p = project_simplex(&v);
            assert!(p.iter().all(|&x| x >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            assert_close(&project_simplex(&p), &p, 1e-9);
        }
    }

    #[test]
    fn matches_brute_force_on_a_grid() {
        // check optimality against a dense search over the 2-simplex
        let mut rng = make_rng(7);
        for _ in 0..20 {
            let v = [rng.uniform_in(-2.0, 2.0), rng.uniform_in(-2.0, 2.0), rng.uniform_in(-2.0, 2.0)];
            let p = project_simplex(&v);
            let ours: f64 = v.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum();
            let steps = 200;
            let mut best = f64::INFINITY;
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let x = [
                        i as f64 / steps as f64,
                        j as f64 / steps as f64,
                        (steps - i - j) as f64 / steps as f64,
                    ];
                    let d: f64 = v.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
                    best = best.min(d);
                }
            }
            assert!(ours <= best + 1e-3, "projection distance {ours} vs grid {best}");
        }
    }
}
