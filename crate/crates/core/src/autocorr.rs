//! Integrated autocorrelation time with automatic windowing.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::{Error, Result, Scalar};

/// Window factor `c` in the rule `W >= c τ_int(W)`.
pub const WINDOW_FACTOR: f64 = 6.0;

/// Shortest trace accepted by [`integrated_autocorrelation`].
pub const MIN_TRACE_LEN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutocorrEstimate {
    /// `τ_int`, in units of trace samples; at least `1/2`.
    pub tau_int: f64,
    /// Summation window `W` that satisfied the windowing rule.
    pub window: usize,
    /// Set for a constant trace, where `τ_int` defaults to `1/2`.
    pub degenerate: bool,
}

/// `τ_int = 1/2 + Σ_{t=1}^{W} ρ̂(t)` with the smallest `W >= 6 τ_int(W)`.
pub fn integrated_autocorrelation<T: Scalar>(trace: &[T]) -> Result<AutocorrEstimate> {
    let n = trace.len();
    if n < MIN_TRACE_LEN {
        return Err(Error::param(
            "trace",
            "needs at least 100 samples",
            n,
        ));
    }
    let values: Vec<f64> = trace.iter().map(|v| v.to_f64_lossy()).collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let c0 = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let scale = mean.abs().max(f64::MIN_POSITIVE);
    if !(c0 > 1e-28 * scale * scale) {
        return Ok(AutocorrEstimate {
            tau_int: 0.5,
            window: 0,
            degenerate: true,
        });
    }
    let acov = autocovariance(&centered);
    let mut tau = 0.5;
    let mut window = n - 1;
    for t in 1..n {
        tau += acov[t] / acov[0];
        if t as f64 >= WINDOW_FACTOR * tau {
            window = t;
            break;
        }
    }
    Ok(AutocorrEstimate {
        tau_int: tau.max(0.5),
        window,
        degenerate: false,
    })
}

/// Biased autocovariance `C(t) = (1/n) Σ_i x_i x_{i+t}` for all lags via FFT.
fn autocovariance(centered: &[f64]) -> Vec<f64> {
    let n = centered.len();
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = centered
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    buf.iter()
        .take(n)
        .map(|z| z.re / (len as f64 * n as f64))
        .collect()
}
