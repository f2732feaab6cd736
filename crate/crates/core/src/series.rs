//! Stirling-number expansion of the punished partition function.
//!
//! With `x = βα₁`, `y = βα₂` and `ξ = 1/(1 + e^{-x})`,
//!
//! ```text
//! Z   = (1 + e^x)^N [1 + G(x, y)]
//! G   = Σ_{l=1}^{N} N!/(N-l)! C_l(y) ξ^l
//! C_l = Σ_{k≥1} y^k/k! S(2k, l)
//! ```
//!
//! Every term is non-negative for `y >= 0`, so all sums are accumulated as
//! log-sum-exp without sign bookkeeping.

use crate::model::EnergyModel;
use crate::special::{ln_factorial, ln_falling_factorial, log_sum_exp, softplus};
use crate::stirling::{StirlingTable, DEFAULT_CAP};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesParams {
    /// Largest `k` kept in `C_l`.
    pub truncation_k: usize,
    /// Replace `S(2k, l)` by `l^{2k}/l!`, giving `C_l ≈ (e^{y l²} - 1)/l!`.
    pub use_asymptotic_stirling: bool,
    /// Accumulate `C_l` in log space (otherwise plain summation).
    pub log_domain: bool,
}

impl Default for SeriesParams {
    fn default() -> Self {
        Self {
            truncation_k: 64,
            use_asymptotic_stirling: false,
            log_domain: true,
        }
    }
}

impl SeriesParams {
    pub fn with_truncation(truncation_k: usize) -> Self {
        Self {
            truncation_k,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.truncation_k < 1 {
            return Err(Error::param("truncation_k", "must be at least 1", self.truncation_k));
        }
        if 2 * self.truncation_k > DEFAULT_CAP {
            return Err(Error::Capacity {
                what: "2 * truncation_k",
                value: 2 * self.truncation_k,
                cap: DEFAULT_CAP,
            });
        }
        Ok(())
    }
}

/// A non-negative series value kept as its logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue<T> {
    pub ln_value: T,
    /// Set when the truncated series had not started to converge.
    pub truncated: bool,
}

impl<T: Scalar> SeriesValue<T> {
    pub fn value(&self) -> T {
        self.ln_value.exp()
    }
}

/// `C_l(y)`.
pub fn c_ell<T: Scalar>(y: T, ell: usize, sp: &SeriesParams) -> Result<SeriesValue<T>> {
    sp.validate()?;
    if ell < 1 {
        return Err(Error::param("ell", "must be at least 1", ell));
    }
    check_y(y)?;
    if sp.use_asymptotic_stirling {
        return Ok(SeriesValue {
            ln_value: asymptotic_ln_c(y, ell),
            truncated: false,
        });
    }
    let table = StirlingTable::shared(2 * sp.truncation_k)?;
    Ok(exact_ln_c(y, ell, sp, &table))
}

fn check_y<T: Scalar>(y: T) -> Result<()> {
    if y >= T::zero() && y.is_finite() {
        Ok(())
    } else {
        Err(Error::param("y", "must be finite and non-negative", y))
    }
}

fn asymptotic_ln_c<T: Scalar>(y: T, ell: usize) -> T {
    let l = T::of_usize(ell);
    let a = y * l * l;
    // ln(e^a - 1) without overflow
    let ln_expm1 = if a > T::of(30.0) {
        a + (-(-a).exp()).ln_1p()
    } else {
        a.exp_m1().ln()
    };
    ln_expm1 - ln_factorial::<T>(ell)
}

fn exact_ln_c<T: Scalar>(y: T, ell: usize, sp: &SeriesParams, table: &StirlingTable) -> SeriesValue<T> {
    let k_max = sp.truncation_k;
    let first_k = ell.div_ceil(2).max(1);
    if y == T::zero() {
        return SeriesValue {
            ln_value: T::neg_infinity(),
            truncated: false,
        };
    }
    if first_k > k_max {
        return SeriesValue {
            ln_value: T::neg_infinity(),
            truncated: true,
        };
    }
    let ln_y = y.ln();
    let terms: Vec<T> = (first_k..=k_max)
        .map(|k| {
            T::of_usize(k) * ln_y - ln_factorial::<T>(k) + T::of(table.ln(2 * k, ell))
        })
        .collect();
    // ratio test on the tail: still growing at K means the sum is unreliable
    let truncated = terms.len() >= 2 && terms[terms.len() - 1] >= terms[terms.len() - 2];
    let ln_value = if sp.log_domain {
        log_sum_exp(&terms)
    } else {
        terms.iter().fold(T::zero(), |acc, &t| acc + t.exp()).ln()
    };
    SeriesValue { ln_value, truncated }
}

/// Log terms `ln[N!/(N-l)! C_l ξ^l]` for `l = 1..=N`.
fn g_log_terms<T: Scalar>(x: T, y: T, n: usize, sp: &SeriesParams) -> Result<(Vec<T>, bool)> {
    sp.validate()?;
    check_y(y)?;
    let ln_xi = -softplus(-x);
    let table = if sp.use_asymptotic_stirling {
        None
    } else {
        Some(StirlingTable::shared(2 * sp.truncation_k)?)
    };
    let mut truncated = false;
    let mut terms = Vec::with_capacity(n);
    for ell in 1..=n {
        let c = match &table {
            Some(t) => exact_ln_c(y, ell, sp, t),
            None => SeriesValue {
                ln_value: asymptotic_ln_c(y, ell),
                truncated: false,
            },
        };
        // beyond l = 2K every exact C_l vanishes identically once truncated
        if c.ln_value == T::neg_infinity() && !c.truncated {
            terms.push(T::neg_infinity());
            continue;
        }
        truncated |= c.truncated;
        terms.push(ln_falling_factorial::<T>(n, ell) + c.ln_value + T::of_usize(ell) * ln_xi);
    }
    Ok((terms, truncated))
}

/// `G(x, y)` for `N` players.
pub fn g_function<T: Scalar>(x: T, y: T, n_players: usize, sp: &SeriesParams) -> Result<SeriesValue<T>> {
    let (terms, truncated) = g_log_terms(x, y, n_players, sp)?;
    Ok(SeriesValue {
        ln_value: log_sum_exp(&terms),
        truncated,
    })
}

fn scaled_arguments<T: Scalar>(model: &EnergyModel<T>, beta: T) -> Result<(T, T)> {
    crate::model::check_beta(beta)?;
    let x = beta * model.alpha1();
    let y = beta * model.alpha2();
    if !x.is_finite() {
        return Err(Error::param("x", "must be finite", x));
    }
    check_y(y)?;
    Ok((x, y))
}

/// `ln Z = N ln(1 + e^x) + ln(1 + G)`.
pub fn series_log_partition<T: Scalar>(model: &EnergyModel<T>, beta: T, sp: &SeriesParams) -> Result<T> {
    let (x, y) = scaled_arguments(model, beta)?;
    let n = model.n_players();
    let g = g_function(x, y, n, sp)?;
    let ln_z = T::of_usize(n) * softplus(x) + softplus(g.ln_value);
    if !ln_z.is_finite() {
        return Err(Error::Numerical(format!("series log partition is not finite: {ln_z}")));
    }
    Ok(ln_z)
}

/// `⟨n⟩ = ξ + (1/N)(1-ξ)/(1+G) Σ_l l N!/(N-l)! C_l ξ^l` at explicit `(x, y)`.
pub fn series_density_at<T: Scalar>(x: T, y: T, n_players: usize, sp: &SeriesParams) -> Result<T> {
    let (terms, _) = g_log_terms(x, y, n_players, sp)?;
    let ln_g = log_sum_exp(&terms);
    let weighted: Vec<T> = terms
        .iter()
        .enumerate()
        .map(|(i, &t)| t + T::of_usize(i + 1).ln())
        .collect();
    let ln_s1 = log_sum_exp(&weighted);
    let xi = crate::model::logistic(x);
    let ln_one_minus_xi = -softplus(x);
    let n = T::of_usize(n_players);
    let correction = (ln_one_minus_xi + ln_s1 - softplus(ln_g) - n.ln()).exp();
    let density = xi + correction;
    let slack = T::of(1e-9);
    if !density.is_finite() || density < -slack || density > T::one() + slack {
        return Err(Error::Numerical(format!(
            "series density {density} outside [0,1]"
        )));
    }
    Ok(density.max(T::zero()).min(T::one()))
}

/// Series cooperator density.
pub fn density_series<T: Scalar>(model: &EnergyModel<T>, beta: T, sp: &SeriesParams) -> Result<T> {
    let (x, y) = scaled_arguments(model, beta)?;
    series_density_at(x, y, model.n_players(), sp)
}

/// Upper bound `(G/(1+G))(1 + ξ/G) = (G + ξ)/(1 + G)` on the density.
pub fn density_upper_bound<T: Scalar>(x: T, y: T, n_players: usize, sp: &SeriesParams) -> Result<T> {
    let g = g_function(x, y, n_players, sp)?;
    if g.ln_value == T::neg_infinity() {
        return Err(Error::Domain(
            "density bound undefined for G = 0 (no two-body coupling)".into(),
        ));
    }
    let xi_complement = (-softplus(x)).exp();
    Ok(T::one() - xi_complement / (T::one() + g.value()))
}
