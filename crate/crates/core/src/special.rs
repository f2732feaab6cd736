//! Special functions and log-space helpers.

use crate::{Error, Result, Scalar};

/// Even Bernoulli numbers `B_2 .. B_12`.
const BERNOULLI_EVEN: [f64; 6] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
];

/// Arguments below this are shifted up by recurrence before the asymptotic
/// expansion is applied.
const ASYMPTOTIC_THRESHOLD: f64 = 10.0;

/// Digamma function `Ψ(z) = d ln Γ(z) / dz` for `z > 0`.
///
/// Upward recurrence `Ψ(z) = Ψ(z+1) - 1/z` until `z >= 10`, then
/// `ln z - 1/(2z) - Σ_{k=1}^{6} B_{2k} / (2k z^{2k})`.
pub fn digamma<T: Scalar>(z: T) -> Result<T> {
    if !(z > T::zero()) || !z.is_finite() {
        return Err(Error::Domain(format!("digamma requires z > 0, got {z}")));
    }
    let threshold = T::of(ASYMPTOTIC_THRESHOLD);
    let mut z = z;
    let mut shift = T::zero();
    while z < threshold {
        shift = shift + z.recip();
        z = z + T::one();
    }
    let inv2 = (z * z).recip();
    let mut series = T::zero();
    let mut pow = inv2;
    for (k, &b) in BERNOULLI_EVEN.iter().enumerate() {
        series = series + T::of(b / (2.0 * (k + 1) as f64)) * pow;
        pow = pow * inv2;
    }
    Ok(z.ln() - T::of(0.5) / z - series - shift)
}

/// Trigamma function `Ψ'(z)` for `z > 0`.
pub fn trigamma<T: Scalar>(z: T) -> Result<T> {
    if !(z > T::zero()) || !z.is_finite() {
        return Err(Error::Domain(format!("trigamma requires z > 0, got {z}")));
    }
    let threshold = T::of(ASYMPTOTIC_THRESHOLD);
    let mut z = z;
    let mut shift = T::zero();
    while z < threshold {
        shift = shift + (z * z).recip();
        z = z + T::one();
    }
    let inv = z.recip();
    let inv2 = inv * inv;
    let mut series = T::zero();
    let mut pow = inv2 * inv;
    for &b in BERNOULLI_EVEN.iter() {
        series = series + T::of(b) * pow;
        pow = pow * inv2;
    }
    Ok(inv + T::of(0.5) * inv2 + series + shift)
}

/// `ln Γ(x)` for `x > 0` via recurrence and the Stirling series.
pub fn ln_gamma<T: Scalar>(x: T) -> T {
    debug_assert!(x > T::zero());
    let threshold = T::of(ASYMPTOTIC_THRESHOLD);
    let mut x = x;
    let mut log_shift = T::zero();
    let mut prod = T::one();
    while x < threshold {
        prod = prod * x;
        x = x + T::one();
        if prod > T::of(1e200) {
            log_shift = log_shift + prod.ln();
            prod = T::one();
        }
    }
    log_shift = log_shift + prod.ln();
    let inv = x.recip();
    let inv2 = inv * inv;
    let mut series = T::zero();
    let mut pow = inv;
    for (k, &b) in BERNOULLI_EVEN.iter().enumerate() {
        let two_k = 2.0 * (k + 1) as f64;
        series = series + T::of(b / (two_k * (two_k - 1.0))) * pow;
        pow = pow * inv2;
    }
    let half_ln_two_pi = T::of(0.918_938_533_204_672_8);
    (x - T::of(0.5)) * x.ln() - x + half_ln_two_pi + series - log_shift
}

/// `ln C(n, k)`; `-∞` when `k > n`.
pub fn ln_binomial<T: Scalar>(n: usize, k: usize) -> T {
    if k > n {
        return T::neg_infinity();
    }
    // exact symmetry in k <-> n - k
    let k = k.min(n - k);
    if k == 0 {
        return T::zero();
    }
    ln_factorial::<T>(n) - ln_factorial::<T>(k) - ln_factorial::<T>(n - k)
}

/// `ln(n! / (n - l)!)`; `-∞` when `l > n`.
pub fn ln_falling_factorial<T: Scalar>(n: usize, l: usize) -> T {
    if l > n {
        return T::neg_infinity();
    }
    ln_factorial::<T>(n) - ln_factorial::<T>(n - l)
}

pub fn ln_factorial<T: Scalar>(n: usize) -> T {
    if n < 2 {
        T::zero()
    } else {
        ln_gamma(T::of_usize(n + 1))
    }
}

/// `ln Σ exp(v_i)`, stable for any magnitudes. `-∞` for an empty slice or
/// when every term is `-∞`.
pub fn log_sum_exp<T: Scalar>(values: &[T]) -> T {
    let Some((imax, &max)) = values
        .iter()
        .enumerate()
        .fold(None::<(usize, &T)>, |best, (i, v)| match best {
            Some((_, b)) if *b >= *v => best,
            _ => Some((i, v)),
        })
    else {
        return T::neg_infinity();
    };
    if max == T::neg_infinity() || max == T::infinity() {
        return max;
    }
    // the maximal term contributes exactly 1; ln_1p keeps small results accurate
    let rest = pairwise_sum_by(&values[..imax], |v| (v - max).exp())
        + pairwise_sum_by(&values[imax + 1..], |v| (v - max).exp());
    max + rest.ln_1p()
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Pairwise (cascade) summation with a fixed reduction order.
pub fn pairwise_sum<T: Scalar>(values: &[T]) -> T {
    pairwise_sum_by(values, |v| v)
}

pub(crate) fn pairwise_sum_by<T: Scalar>(values: &[T], f: impl Fn(T) -> T + Copy) -> T {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        values.iter().fold(T::zero(), |acc, &v| acc + f(v))
    } else {
        let (lo, hi) = values.split_at(values.len() / 2);
        pairwise_sum_by(lo, f) + pairwise_sum_by(hi, f)
    }
}
