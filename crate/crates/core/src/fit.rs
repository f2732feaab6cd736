//! Fit of the decay law `⟨n⟩ ≈ A |β - β₀|^{-ω₁} e^{-ω₂ β}`.
//!
//! For each candidate `β₀` on a grid the model is linear in
//! `(ω₁, ω₂, ln A)`: `ln⟨n⟩ = -ω₁ ln|β - β₀| - ω₂ β + ln A`. The candidate with
//! the smallest log-space RMS residual wins.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Fewest in-window points accepted by the fit.
pub const MIN_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta0Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for Beta0Grid {
    fn default() -> Self {
        Self {
            lo: 1.8,
            hi: 2.6,
            step: 0.005,
        }
    }
}

impl Beta0Grid {
    fn candidates(&self) -> impl Iterator<Item = f64> + '_ {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(move |i| self.lo + i as f64 * self.step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub beta0: f64,
    pub omega1: f64,
    pub omega2: f64,
    /// `ln A`.
    pub constant: f64,
    /// RMS of `ln⟨n⟩` residuals.
    pub residual_rms: f64,
    pub fit_window: (f64, f64),
    pub n_points: usize,
}

fn select(points: &[(f64, f64)], window: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = window;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::param("window", "must be a finite interval lo < hi", format!("[{lo}, {hi}]")));
    }
    let inside: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(b, n)| b >= lo && b <= hi && n > 0.0 && n.is_finite())
        .map(|(b, n)| (b, n.ln()))
        .collect();
    if inside.len() < MIN_POINTS {
        return Err(Error::Fit(format!(
            "{} usable points in [{lo}, {hi}], need at least {MIN_POINTS}",
            inside.len()
        )));
    }
    Ok(inside)
}

/// Linear least squares at fixed `β₀`; returns `(ω₁, ω₂, ln A, rms)`.
fn solve_linear(data: &[(f64, f64)], beta0: f64) -> Result<(f64, f64, f64, f64)> {
    let rows = data.len();
    let design = DMatrix::from_fn(rows, 3, |i, j| {
        let beta = data[i].0;
        match j {
            0 => -(beta - beta0).abs().ln(),
            1 => -beta,
            _ => 1.0,
        }
    });
    let target = DVector::from_iterator(rows, data.iter().map(|&(_, y)| y));
    let svd = design.clone().svd(true, true);
    let largest = svd.singular_values.max();
    let smallest = svd.singular_values.min();
    if !(smallest > 1e-12 * largest) {
        return Err(Error::Fit(format!(
            "singular design matrix at beta0 = {beta0} (condition {largest}/{smallest})"
        )));
    }
    let coef = svd
        .solve(&target, 1e-14 * largest)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let residual = &design * &coef - &target;
    let rms = (residual.norm_squared() / rows as f64).sqrt();
    Ok((coef[0], coef[1], coef[2], rms))
}

/// Grid search over `β₀` below the window, linear regression for the rest.
pub fn fit_decay_points(points: &[(f64, f64)], window: (f64, f64), grid: &Beta0Grid) -> Result<FitResult> {
    let data = select(points, window)?;
    let mut best: Option<FitResult> = None;
    for beta0 in grid.candidates().filter(|&b0| b0 < window.0) {
        let (omega1, omega2, constant, rms) = solve_linear(&data, beta0)?;
        if best.is_none_or(|b| rms < b.residual_rms) {
            best = Some(FitResult {
                beta0,
                omega1,
                omega2,
                constant,
                residual_rms: rms,
                fit_window: window,
                n_points: data.len(),
            });
        }
    }
    let fit = best.ok_or_else(|| {
        Error::Fit(format!(
            "no beta0 candidate in [{}, {}] lies below the window start {}",
            grid.lo, grid.hi, window.0
        ))
    })?;
    check_decay(fit)
}

/// Same regression with `β₀` held fixed.
pub fn fit_decay_fixed(points: &[(f64, f64)], window: (f64, f64), beta0: f64) -> Result<FitResult> {
    if !(beta0 < window.0) {
        return Err(Error::param("beta0", "must lie below the fit window", beta0));
    }
    let data = select(points, window)?;
    let (omega1, omega2, constant, rms) = solve_linear(&data, beta0)?;
    check_decay(FitResult {
        beta0,
        omega1,
        omega2,
        constant,
        residual_rms: rms,
        fit_window: window,
        n_points: data.len(),
    })
}

fn check_decay(fit: FitResult) -> Result<FitResult> {
    if fit.omega2 > 0.0 {
        Ok(fit)
    } else {
        Err(Error::Fit(format!("non-decaying fit, omega2 = {}", fit.omega2)))
    }
}

/// `A |β - β₀|^{-ω₁} e^{-ω₂ β}` on a uniform grid, each value multiplied by
/// `1 + noise·ξ` with standard normal `ξ` drawn from a seeded stream.
pub fn synthetic_decay(
    beta0: f64,
    omega1: f64,
    omega2: f64,
    window: (f64, f64),
    step: f64,
    noise: f64,
    seed: u64,
) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = ((window.1 - window.0) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|i| {
            let beta = window.0 + i as f64 * step;
            let clean = (beta - beta0).abs().powf(-omega1) * (-omega2 * beta).exp();
            let xi: f64 = rng.sample(StandardNormal);
            (beta, clean * (1.0 + noise * xi))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_data_is_recovered() {
        let pts = synthetic_decay(2.175, 0.14, 1.40, (2.3, 4.5), 0.01, 0.0, 0);
        let fit = fit_decay_points(&pts, (2.3, 4.5), &Beta0Grid::default()).unwrap();
        assert!((fit.beta0 - 2.175).abs() < 1e-9);
        assert!((fit.omega1 - 0.14).abs() < 1e-8);
        assert!((fit.omega2 - 1.40).abs() < 1e-8);
        assert!(fit.residual_rms < 1e-10);
    }

    #[test]
    fn noisy_data_within_five_percent() {
        let pts = synthetic_decay(2.175, 0.14, 1.40, (2.3, 4.5), 0.001, 0.01, 2024);
        let fit = fit_decay_points(&pts, (2.3, 4.5), &Beta0Grid::default()).unwrap();
        assert!((fit.beta0 / 2.175 - 1.0).abs() < 0.05, "{fit:?}");
        assert!((fit.omega1 / 0.14 - 1.0).abs() < 0.05, "{fit:?}");
        assert!((fit.omega2 / 1.40 - 1.0).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn pure_exponential() {
        let pts: Vec<(f64, f64)> = (0..100)
            .map(|i| {
                let b = 2.3 + 0.022 * i as f64;
                (b, 3.0 * (-1.2 * b).exp())
            })
            .collect();
        let fit = fit_decay_points(&pts, (2.3, 4.5), &Beta0Grid::default()).unwrap();
        assert!(fit.omega1.abs() < 0.02, "{fit:?}");
        assert!((fit.omega2 - 1.2).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let pts = synthetic_decay(2.175, 0.14, 1.40, (2.3, 2.35), 0.01, 0.0, 0);
        assert!(matches!(
            fit_decay_points(&pts, (2.3, 4.5), &Beta0Grid::default()),
            Err(Error::Fit(_))
        ));
        let pts = synthetic_decay(1.0, 0.14, 1.40, (1.5, 3.0), 0.01, 0.0, 0);
        assert!(fit_decay_points(&pts, (1.5, 3.0), &Beta0Grid::default()).is_err());
        // constant abscissa makes the design singular
        let flat: Vec<(f64, f64)> = (0..20).map(|_| (3.0, 0.1)).collect();
        assert!(matches!(fit_decay_fixed(&flat, (2.3, 4.5), 2.0), Err(Error::Fit(_))));
        assert!(fit_decay_fixed(&flat, (2.3, 4.5), 2.4).is_err());
    }
}
