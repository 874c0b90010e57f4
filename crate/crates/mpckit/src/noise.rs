//! Structured noise for sampling-based solvers: white Gaussian matrices,
//! power-law (colored) time series, and Gumbel-max categorical draws.
//!
//! Colored series are built by frequency-domain shaping: independent Gaussian
//! coefficients per real-DFT bin scaled by f^(-beta/2), the zero-frequency
//! scale set to the lowest nonzero frequency's scale (finite DC power for
//! beta > 0), then an inverse real DFT and a per-series rescale to unit
//! empirical variance. The inverse transform is a direct O(H^2) evaluation;
//! at planning horizons (H <= 2048) this is cheap and keeps the crate free of
//! FFT dependencies. beta = 0 makes every scale 1, which is exactly the white
//! path. All coefficient draws happen on the caller's stream before the
//! transforms run (in parallel), so results never depend on thread count.

use ndarray::Array2;
use rayon::prelude::*;
use thiserror::Error;

use crate::core::RandomStream;

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("categorical weights must be finite and nonnegative (entry {index} = {value})")]
    BadWeight { index: usize, value: f64 },
    #[error("categorical weights sum to zero")]
    ZeroMass,
    #[error("categorical weights are empty")]
    Empty,
}

/// `count` matrices of shape (horizon, dims) with i.i.d. N(0, sigma^2)
/// entries, drawn row-major per matrix.
pub fn sample_gaussian(
    rng: &mut RandomStream,
    horizon: usize,
    dims: usize,
    sigma: f64,
    count: usize,
) -> Vec<Array2<f64>> {
    (0..count)
        .map(|_| Array2::from_shape_simple_fn((horizon, dims), || sigma * rng.normal()))
        .collect()
}

/// `count` matrices of shape (horizon, dims); each column is an independent
/// colored series with unit empirical variance. beta = 0 is white noise in
/// distribution; larger beta concentrates power at low frequencies
/// (PSD proportional to f^-beta). A length-1 series degenerates to a single
/// standard normal draw (no spectrum to shape, no variance to normalize).
pub fn sample_colored(
    rng: &mut RandomStream,
    beta: f64,
    horizon: usize,
    dims: usize,
    count: usize,
) -> Vec<Array2<f64>> {
    if horizon == 0 || dims == 0 {
        return (0..count).map(|_| Array2::zeros((horizon, dims))).collect();
    }
    if horizon == 1 {
        return sample_gaussian(rng, 1, dims, 1.0, count);
    }

    let h = horizon;
    let n_freq = h / 2 + 1;
    let mut scales = vec![0.0; n_freq];
    for (k, s) in scales.iter_mut().enumerate().skip(1) {
        *s = (k as f64 / h as f64).powf(-beta / 2.0);
    }
    scales[0] = scales[1];

    // Every draw happens here, sequentially, before any parallel work.
    let nyquist = if h % 2 == 0 { Some(h / 2) } else { None };
    let mut coeffs: Vec<Vec<(f64, f64)>> = Vec::with_capacity(count * dims);
    for _ in 0..count {
        for _ in 0..dims {
            let mut series = Vec::with_capacity(n_freq);
            for (k, &s) in scales.iter().enumerate() {
                let re = s * rng.normal();
                let im = if k == 0 || Some(k) == nyquist {
                    0.0
                } else {
                    s * rng.normal()
                };
                series.push((re, im));
            }
            coeffs.push(series);
        }
    }

    // cos/sin tables for bins 1..n_freq, reused by every series in the batch
    let w = std::f64::consts::TAU / h as f64;
    let mut cos_t = vec![0.0; (n_freq - 1) * h];
    let mut sin_t = vec![0.0; (n_freq - 1) * h];
    for k in 1..n_freq {
        for t in 0..h {
            let phase = w * (k as f64) * (t as f64);
            cos_t[(k - 1) * h + t] = phase.cos();
            sin_t[(k - 1) * h + t] = phase.sin();
        }
    }

    let series: Vec<Vec<f64>> = coeffs
        .par_iter()
        .map(|c| {
            let mut x = vec![c[0].0; h];
            for k in 1..n_freq {
                let (re, im) = c[k];
                let doubled = Some(k) != nyquist;
                let amp = if doubled { 2.0 * re } else { re };
                let base = (k - 1) * h;
                for t in 0..h {
                    x[t] += amp * cos_t[base + t];
                    if doubled {
                        x[t] -= 2.0 * im * sin_t[base + t];
                    }
                }
            }
            let mean = x.iter().sum::<f64>() / h as f64;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / h as f64;
            if var > 0.0 {
                let inv = 1.0 / var.sqrt();
                for v in &mut x {
                    *v *= inv;
                }
            }
            x
        })
        .collect();

    (0..count)
        .map(|i| {
            Array2::from_shape_fn((h, dims), |(t, d)| series[i * dims + d][t])
        })
        .collect()
}

/// One categorical draw from unnormalized nonnegative weights via the
/// Gumbel-max trick: argmax of ln(w_a) + Gumbel(0,1). Scale-invariant (w and
/// c*w draw identically on the same stream) and zero-weight entries are never
/// returned. Exactly `weights.len()` Gumbel draws are consumed per call.
pub fn gumbel_max_sample(rng: &mut RandomStream, weights: &[f64]) -> Result<usize, NoiseError> {
    if weights.is_empty() {
        return Err(NoiseError::Empty);
    }
    for (index, &value) in weights.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(NoiseError::BadWeight { index, value });
        }
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, &wgt) in weights.iter().enumerate() {
        let g = rng.gumbel();
        if wgt == 0.0 {
            continue;
        }
        let score = wgt.ln() + g;
        match best {
            Some((_, s)) if s >= score => {}
            _ => best = Some((i, score)),
        }
    }
    best.map(|(i, _)| i).ok_or(NoiseError::ZeroMass)
}
