//! Brute-force ground truth over all `2^N` strategy profiles.
//!
//! Every profile's energy is assembled player by player from the payoff
//! operators ([`configuration_energy`]), independently of the count-reduced
//! Hamiltonian the production solvers use.

use rayon::prelude::*;

use crate::analytic::ThermoResult;
use crate::model::{check_beta, closed_form_density, configuration_energy, Configuration, GameParams, RiskMode};
use crate::special::{log_sum_exp, pairwise_sum};
use crate::{Error, Result, Scalar};

/// Largest `N` accepted by the enumeration routines.
pub const MAX_PLAYERS: usize = 20;

/// Boltzmann measure over every profile, indexed by bit mask.
struct Enumeration<T> {
    n: usize,
    energies: Vec<T>,
    weights: Vec<T>,
    log_partition: T,
}

impl<T: Scalar> Enumeration<T> {
    fn build(energies: Vec<T>, beta: T, n: usize) -> Self {
        let log_weights: Vec<T> = energies.iter().map(|&e| -beta * e).collect();
        let log_partition = log_sum_exp(&log_weights);
        let weights = log_weights.iter().map(|&lw| (lw - log_partition).exp()).collect();
        Self {
            n,
            energies,
            weights,
            log_partition,
        }
    }

    fn expect(&self, f: impl Fn(u64) -> T + Sync) -> T {
        let terms: Vec<T> = self
            .weights
            .par_iter()
            .enumerate()
            .map(|(mask, &w)| w * f(mask as u64))
            .collect();
        pairwise_sum(&terms)
    }

    fn mean_density(&self) -> T {
        let nf = T::of_usize(self.n);
        self.expect(|mask| T::of_usize(mask.count_ones() as usize) / nf)
    }

    fn thermo(&self) -> ThermoResult<T> {
        let nf = T::of_usize(self.n);
        let mean = self.mean_density();
        let variance = self.expect(|mask| {
            let d = T::of_usize(mask.count_ones() as usize) / nf - mean;
            d * d
        });
        let mean_energy = self.expect(|mask| self.energies[mask as usize]);
        ThermoResult {
            log_partition: self.log_partition,
            mean_density: mean,
            density_variance: variance,
            mean_energy,
        }
    }
}

fn check_size<T: Scalar>(p: &GameParams<T>) -> Result<usize> {
    let n = p.n_players();
    if n > MAX_PLAYERS {
        return Err(Error::Capacity {
            what: "oracle players",
            value: n,
            cap: MAX_PLAYERS,
        });
    }
    Ok(n)
}

fn energies_at<T: Scalar>(p: &GameParams<T>, rho: T) -> Result<Vec<T>> {
    let n = p.n_players();
    (0..1u64 << n)
        .into_par_iter()
        .map(|mask| configuration_energy(&Configuration::from_mask(n, mask), p, rho))
        .collect()
}

fn measure<T: Scalar>(p: &GameParams<T>, beta: T, mode: RiskMode) -> Result<Enumeration<T>> {
    check_beta(beta)?;
    let n = check_size(p)?;
    match mode {
        RiskMode::Bare => {
            if p.punishment() > T::zero() {
                return Err(Error::Mode(format!(
                    "bare risk mode requires punishment 0, got {}",
                    p.punishment()
                )));
            }
            Ok(Enumeration::build(energies_at(p, T::zero())?, beta, n))
        }
        RiskMode::MeanFieldClosedForm => {
            let rho = closed_form_density(p, beta);
            Ok(Enumeration::build(energies_at(p, rho)?, beta, n))
        }
        RiskMode::SelfConsistent { tol, max_iter } => {
            // the risk term is affine in the density, so two tables suffice
            let e0 = energies_at(p, T::zero())?;
            let e1 = energies_at(p, T::one())?;
            let at = |rho: T| -> Vec<T> {
                e0.iter().zip(&e1).map(|(&a, &b)| a + rho * (b - a)).collect()
            };
            let tol = T::of(tol);
            let half = T::of(0.5);
            let mut rho = closed_form_density(p, beta);
            let mut previous = rho;
            for _ in 0..max_iter {
                let current = Enumeration::build(at(rho), beta, n);
                let next = current.mean_density();
                if (next - rho).abs() < tol {
                    return Ok(current);
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
    }
}

/// `ln Z`, `⟨n⟩`, density variance and `⟨H⟩` by exhaustive enumeration.
pub fn enumerate_thermo<T: Scalar>(p: &GameParams<T>, beta: T, mode: RiskMode) -> Result<ThermoResult<T>> {
    Ok(measure(p, beta, mode)?.thermo())
}

/// Connected correlation `⟨n_j n_k⟩ - ⟨n_j⟩⟨n_k⟩` of two players' strategies.
pub fn enumerate_pair_correlation<T: Scalar>(
    p: &GameParams<T>,
    beta: T,
    mode: RiskMode,
    j: usize,
    k: usize,
) -> Result<T> {
    if j == k {
        return Err(Error::param("k", "must differ from j", k));
    }
    let n = p.n_players();
    if j >= n || k >= n {
        return Err(Error::param("player index", "must be below N", j.max(k)));
    }
    let e = measure(p, beta, mode)?;
    let bit = |mask: u64, i: usize| if mask >> i & 1 == 1 { T::one() } else { T::zero() };
    let nj = e.expect(|mask| bit(mask, j));
    let nk = e.expect(|mask| bit(mask, k));
    let njk = e.expect(|mask| bit(mask, j) * bit(mask, k));
    Ok(njk - nj * nk)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState<T> {
    pub config: Configuration,
    pub energy: T,
    /// Several profiles share the minimal energy.
    pub degenerate: bool,
}

/// Minimum-energy profile in the fully rational limit.
///
/// Under the closed-form closure the density is the `β → ∞` limit of `n̄`;
/// under the self-consistent closure each profile is evaluated at its own
/// density `M/N`. Ties resolve to all-defect when it is among the minima,
/// otherwise to the lowest bit mask, and set `degenerate`.
pub fn nash_ground_state<T: Scalar>(p: &GameParams<T>, mode: RiskMode) -> Result<GroundState<T>> {
    let n = check_size(p)?;
    let nf = T::of_usize(n);
    let energies: Vec<T> = match mode {
        RiskMode::Bare | RiskMode::MeanFieldClosedForm => {
            let rho = match mode {
                RiskMode::Bare if p.punishment() > T::zero() => {
                    return Err(Error::Mode(format!(
                        "bare risk mode requires punishment 0, got {}",
                        p.punishment()
                    )))
                }
                RiskMode::Bare => T::zero(),
                _ => {
                    let drive = p.bare_coupling();
                    if drive > T::zero() {
                        T::one()
                    } else if drive < T::zero() {
                        T::zero()
                    } else {
                        T::of(0.5)
                    }
                }
            };
            energies_at(p, rho)?
        }
        RiskMode::SelfConsistent { .. } => (0..1u64 << n)
            .into_par_iter()
            .map(|mask| {
                let rho = T::of_usize(mask.count_ones() as usize) / nf;
                configuration_energy(&Configuration::from_mask(n, mask), p, rho)
            })
            .collect::<Result<_>>()?,
    };
    let min = energies.iter().copied().fold(T::infinity(), T::min);
    let tol = T::of(1e-12) * (T::one() + min.abs()) * nf.max(T::one());
    let ties: Vec<usize> = (0..energies.len())
        .filter(|&mask| energies[mask] - min <= tol)
        .collect();
    let best = if ties.contains(&0) { 0 } else { ties[0] };
    Ok(GroundState {
        config: Configuration::from_mask(n, best as u64),
        energy: energies[best],
        degenerate: ties.len() > 1,
    })
}
