//! Measures the spectral tilt of the colored exploration noise: for each
//! beta the mean log-log periodogram slope should sit near -beta.

use mpckit::core::make_rng;
use mpckit::noise::sample_colored;
use rayon::prelude::*;

fn log_spaced_bins(lo: usize, hi: usize, n: usize) -> Vec<usize> {
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut ks: Vec<usize> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp().round() as usize)
        .collect();
    ks.dedup();
    ks
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

fn main() {
    let h = 512;
    let count = 2000;
    let ks = log_spaced_bins(1, 240, 40);
    let w = std::f64::consts::TAU / h as f64;
    let tables: Vec<(Vec<f64>, Vec<f64>)> = ks
        .iter()
        .map(|&k| {
            let mut c = vec![0.0; h];
            let mut s = vec![0.0; h];
            for t in 0..h {
                let phase = w * (k as f64) * (t as f64);
                c[t] = phase.cos();
                s[t] = phase.sin();
            }
            (c, s)
        })
        .collect();

    println!("{:>6}  {:>12}", "beta", "fitted slope");
    for (i, beta) in [0.0, 1.0, 2.0, 3.0].into_iter().enumerate() {
        let mut rng = make_rng(500 + i as u64);
        let series = sample_colored(&mut rng, beta, h, 1, count);
        let power = series
            .par_iter()
            .map(|m| {
                let col: Vec<f64> = m.column(0).to_vec();
                tables
                    .iter()
                    .map(|(c, s)| {
                        let mut re = 0.0;
                        let mut im = 0.0;
                        for t in 0..h {
                            re += col[t] * c[t];
                            im += col[t] * s[t];
                        }
                        re * re + im * im
                    })
                    .collect::<Vec<f64>>()
            })
            .reduce(
                || vec![0.0; ks.len()],
                |mut acc, row| {
                    for (a, b) in acc.iter_mut().zip(row) {
                        *a += b;
                    }
                    acc
                },
            );
        let xs: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
        let ys: Vec<f64> = power.iter().map(|p| (p / count as f64).ln()).collect();
        println!("{beta:>6.1}  {:>12.3}", ols_slope(&xs, &ys));
    }
}
