//! Exact thermodynamics of the count-reduced Hamiltonian and the analytic
//! relations built on it: the unpunished closed form, the digamma
//! stationarity condition, the self-consistent risk closure and the
//! crossing temperature.

use crate::model::{check_beta, closed_form_density, EnergyModel, GameParams, RiskMode};
use crate::special::{self, ln_binomial, ln_gamma, log_sum_exp, pairwise_sum};
use crate::{Error, Result, Scalar};

pub use crate::special::{digamma, trigamma};

/// Equilibrium observables of one model at one inverse temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoResult<T> {
    pub log_partition: T,
    pub mean_density: T,
    /// `⟨n²⟩ - ⟨n⟩²` of the density `n = M/N`.
    pub density_variance: T,
    pub mean_energy: T,
}

/// Closed-form unpunished density `n̄ = 1/(1 + e^{-β(Δ-μ)})`.
pub fn pg_mean_density<T: Scalar>(p: &GameParams<T>, beta: T) -> Result<T> {
    if p.punishment() != T::zero() {
        return Err(Error::Mode(format!(
            "closed-form density requires punishment 0, got {}",
            p.punishment()
        )));
    }
    check_beta(beta)?;
    Ok(closed_form_density(p, beta))
}

/// `Z = Σ_m C(N,m) e^{-β E(m)}` evaluated in log space.
pub fn exact_thermo<T: Scalar>(model: &EnergyModel<T>, beta: T) -> Result<ThermoResult<T>> {
    check_beta(beta)?;
    if !model.alpha1().is_finite() || !model.alpha2().is_finite() {
        return Err(Error::param(
            "couplings",
            "must be finite",
            format!("alpha1={}, alpha2={}", model.alpha1(), model.alpha2()),
        ));
    }
    let n = model.n_players();
    let nf = T::of_usize(n);
    let energies: Vec<T> = (0..=n).map(|m| model.energy_at(m)).collect();
    let log_weights: Vec<T> = energies
        .iter()
        .enumerate()
        .map(|(m, &e)| ln_binomial::<T>(n, m) - beta * e)
        .collect();
    let log_partition = log_sum_exp(&log_weights);
    let raw: Vec<T> = log_weights.iter().map(|&lw| (lw - log_partition).exp()).collect();
    // renormalise to absorb the rounding of the large shift
    let total = pairwise_sum(&raw);
    let weights: Vec<T> = raw.iter().map(|&w| w / total).collect();

    let densities: Vec<T> = weights
        .iter()
        .enumerate()
        .map(|(m, &w)| w * T::of_usize(m) / nf)
        .collect();
    let mean_density = pairwise_sum(&densities);
    let spread: Vec<T> = weights
        .iter()
        .enumerate()
        .map(|(m, &w)| {
            let d = T::of_usize(m) / nf - mean_density;
            w * d * d
        })
        .collect();
    let weighted_energy: Vec<T> = weights.iter().zip(&energies).map(|(&w, &e)| w * e).collect();
    Ok(ThermoResult {
        log_partition,
        mean_density,
        density_variance: pairwise_sum(&spread),
        mean_energy: pairwise_sum(&weighted_energy),
    })
}

/// Damped fixed point of `ρ ↦ ⟨n⟩(model with risk closed at ρ)`, started
/// from `n̄`. Returns `ρ` with `|T(ρ) - ρ| < tol`.
pub fn self_consistent_density<T: Scalar>(
    p: &GameParams<T>,
    beta: T,
    tol: f64,
    max_iter: usize,
) -> Result<T> {
    check_beta(beta)?;
    let tol = T::of(tol);
    let half = T::of(0.5);
    let mode = RiskMode::SelfConsistent {
        tol: tol.to_f64_lossy(),
        max_iter,
    };
    let mut rho = closed_form_density(p, beta);
    let mut previous = rho;
    for _ in 0..max_iter {
        let next = exact_thermo(&EnergyModel::with_density(p, rho, mode), beta)?.mean_density;
        if (next - rho).abs() < tol {
            return Ok(rho);
        }
        previous = rho;
        rho = half * rho + half * next;
    }
    Err(Error::Convergence {
        iterations: max_iter,
        previous: previous.to_f64_lossy(),
        last: rho.to_f64_lossy(),
    })
}

/// Number of uniform grid points scanned for sign changes.
const ROOT_GRID: usize = 1024;

/// `f(ρ) = 2βα₂Nρ + βα₁ - Ψ(Nρ+1) + Ψ(N-Nρ+1)`, the stationarity condition
/// of the degeneracy summand in the cooperator count.
pub fn density_condition<T: Scalar>(model: &EnergyModel<T>, beta: T, rho: T) -> Result<T> {
    let n = T::of_usize(model.n_players());
    let m = n * rho;
    Ok(T::of(2.0) * beta * model.alpha2() * m + beta * model.alpha1() - digamma(m + T::one())?
        + digamma(n - m + T::one())?)
}

/// All roots of [`density_condition`] in `(0, 1)`, ascending.
pub fn density_condition_roots<T: Scalar>(model: &EnergyModel<T>, beta: T) -> Result<Vec<T>> {
    if !(beta > T::zero()) || !beta.is_finite() {
        return Err(Error::param("beta", "must be positive and finite", beta));
    }
    let f = |rho: T| density_condition(model, beta, rho);
    let last = T::of_usize(ROOT_GRID - 1);
    let mut roots = Vec::new();
    let mut lo = T::zero();
    let mut f_lo = f(lo)?;
    for i in 1..ROOT_GRID {
        let hi = T::of_usize(i) / last;
        let f_hi = f(hi)?;
        if f_hi == T::zero() && i < ROOT_GRID - 1 {
            roots.push(hi);
        } else if f_lo != T::zero() && (f_lo < T::zero()) != (f_hi < T::zero()) {
            roots.push(bisect(&f, lo, hi, f_lo)?);
        }
        lo = hi;
        f_lo = f_hi;
    }
    Ok(roots)
}

/// Roots of the density condition with the mean-field closed-form risk.
pub fn solve_density_condition<T: Scalar>(p: &GameParams<T>, beta: T) -> Result<Vec<T>> {
    let model = crate::model::build_energy_model(p, beta, RiskMode::MeanFieldClosedForm)?;
    density_condition_roots(&model, beta)
}

fn bisect<T: Scalar>(f: &impl Fn(T) -> Result<T>, mut lo: T, mut hi: T, mut f_lo: T) -> Result<T> {
    let width_tol = T::of(1e-12);
    let residual_tol = T::of(1e-10);
    for _ in 0..200 {
        let mid = T::of(0.5) * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid == T::zero() {
            return Ok(mid);
        }
        if (f_mid < T::zero()) == (f_lo < T::zero()) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo < width_tol && f_mid.abs() < residual_tol {
            return Ok(mid);
        }
        if hi - lo <= T::epsilon() * hi.max(T::one()) {
            break;
        }
    }
    Ok(if f_lo.abs() <= f(hi)?.abs() { lo } else { hi })
}

/// Continuous log degeneracy summand `ln C(N, Nρ) - β E(Nρ)`.
pub fn log_summand<T: Scalar>(model: &EnergyModel<T>, beta: T, rho: T) -> T {
    let n = T::of_usize(model.n_players());
    let m = n * rho;
    ln_gamma(n + T::one()) - ln_gamma(m + T::one()) - ln_gamma(n - m + T::one())
        + beta * (model.alpha2() * m + model.alpha1()) * m
}

/// Density and variance from the dominant stationary point of the summand.
///
/// Candidates are the roots of the density condition plus any endpoint
/// where the summand is locally maximal; the one with the largest summand
/// wins. The variance is the inverse curvature of the summand (Gaussian
/// approximation), divided by `N²`.
pub fn digamma_density<T: Scalar>(model: &EnergyModel<T>, beta: T) -> Result<(T, T)> {
    let mut candidates = density_condition_roots(model, beta)?;
    if density_condition(model, beta, T::zero())? < T::zero() {
        candidates.push(T::zero());
    }
    if density_condition(model, beta, T::one())? > T::zero() {
        candidates.push(T::one());
    }
    let rho = candidates
        .into_iter()
        .map(|r| (r, log_summand(model, beta, r)))
        .fold(None::<(T, T)>, |best, (r, s)| match best {
            Some((_, bs)) if bs >= s => best,
            _ => Some((r, s)),
        })
        .map(|(r, _)| r)
        .ok_or_else(|| Error::Numerical("no stationary point of the density condition".into()))?;
    let n = T::of_usize(model.n_players());
    let m = n * rho;
    let curvature = special::trigamma(m + T::one())? + special::trigamma(n - m + T::one())?
        - T::of(2.0) * beta * model.alpha2();
    let variance = if curvature > T::zero() {
        (curvature * n * n).recip()
    } else {
        T::nan()
    };
    Ok((rho, variance))
}

/// Inverse temperature where the punished density meets its unpunished
/// counterpart, `β* = ln 2 / (2c - b)`.
pub fn crossing_beta<T: Scalar>(b: T, c: T) -> Result<T> {
    let denom = T::of(2.0) * c - b;
    if !(denom > T::zero()) {
        return Err(Error::Domain(format!(
            "crossing requires 2c > b (b = {b}, c = {c})"
        )));
    }
    Ok(T::LN_2() / denom)
}
