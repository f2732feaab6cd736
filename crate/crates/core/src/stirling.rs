//! Stirling numbers of the second kind, exact and in log form.

use std::sync::{Arc, RwLock};

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use crate::{Error, Result};

/// Largest `n` served by [`stirling2`].
pub const DEFAULT_CAP: usize = 512;

/// `S(n, k)` together with `ln S(n, k)` (`-∞` for zero).
#[derive(Debug, Clone, PartialEq)]
pub struct Stirling2 {
    pub exact: BigUint,
    pub ln: f64,
}

/// Triangle of `S(n, k)` for `0 <= k <= n <= max_n`.
#[derive(Debug)]
pub struct StirlingTable {
    exact: Vec<Vec<BigUint>>,
    ln: Vec<Vec<f64>>,
}

impl StirlingTable {
    /// Builds rows `0..=max_n` from `S(n+1,k) = k S(n,k) + S(n,k-1)`.
    pub fn new(max_n: usize) -> Self {
        let mut exact: Vec<Vec<BigUint>> = Vec::with_capacity(max_n + 1);
        exact.push(vec![BigUint::from(1u32)]);
        for n in 0..max_n {
            let prev = &exact[n];
            let mut row = Vec::with_capacity(n + 2);
            row.push(BigUint::zero());
            for k in 1..=n + 1 {
                let stay = if k <= n { &prev[k] * k } else { BigUint::zero() };
                row.push(stay + &prev[k - 1]);
            }
            exact.push(row);
        }
        let ln = exact
            .iter()
            .map(|row| row.iter().map(ln_biguint).collect())
            .collect();
        Self { exact, ln }
    }

    pub fn max_n(&self) -> usize {
        self.exact.len() - 1
    }

    pub fn get(&self, n: usize, k: usize) -> Option<&BigUint> {
        self.exact.get(n).map(|row| row.get(k)).unwrap_or(None)
    }

    /// `ln S(n, k)`; `-∞` for `k > n` or `S = 0`. Panics if `n > max_n`.
    #[inline]
    pub fn ln(&self, n: usize, k: usize) -> f64 {
        let row = &self.ln[n];
        if k < row.len() {
            row[k]
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Process-wide table holding at least rows `0..=min_n`, grown on demand.
    pub fn shared(min_n: usize) -> Result<Arc<StirlingTable>> {
        if min_n > DEFAULT_CAP {
            return Err(Error::Capacity {
                what: "stirling n",
                value: min_n,
                cap: DEFAULT_CAP,
            });
        }
        static SHARED: RwLock<Option<Arc<StirlingTable>>> = RwLock::new(None);
        if let Some(t) = SHARED.read().expect("stirling table lock").as_ref() {
            if t.max_n() >= min_n {
                return Ok(Arc::clone(t));
            }
        }
        let mut guard = SHARED.write().expect("stirling table lock");
        match guard.as_ref() {
            Some(t) if t.max_n() >= min_n => Ok(Arc::clone(t)),
            _ => {
                // grow geometrically to amortise rebuilds
                let size = min_n.max(64).next_power_of_two().min(DEFAULT_CAP);
                let t = Arc::new(StirlingTable::new(size.max(min_n)));
                *guard = Some(Arc::clone(&t));
                Ok(t)
            }
        }
    }
}

/// `S(n, k)` for `n <= DEFAULT_CAP`.
pub fn stirling2(n: usize, k: usize) -> Result<Stirling2> {
    let table = StirlingTable::shared(n)?;
    let exact = table.get(n, k).cloned().unwrap_or_else(BigUint::zero);
    Ok(Stirling2 {
        ln: table.ln(n, k),
        exact,
    })
}

fn ln_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        x.to_f64().expect("bounded magnitude").ln()
    } else {
        let shift = bits - 64;
        let top = (x >> shift).to_f64().expect("64-bit mantissa");
        top.ln() + shift as f64 * std::f64::consts::LN_2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `S(n,k) = (1/k!) Σ_j (-1)^j C(k,j) (k-j)^n`, in exact integers.
    fn explicit(n: u32, k: u32) -> BigUint {
        use num_bigint::BigInt;
        let mut acc = BigInt::zero();
        let mut binom = BigInt::from(1);
        for j in 0..=k {
            let term = &binom * BigInt::from(k - j).pow(n);
            if j % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
            binom = binom * BigInt::from(k - j) / BigInt::from(j + 1);
        }
        let mut fact = BigInt::from(1);
        for i in 2..=k {
            fact *= i;
        }
        (acc / fact).to_biguint().unwrap()
    }

    #[test]
    fn small_values() {
        assert_eq!(stirling2(4, 2).unwrap().exact, BigUint::from(7u32));
        assert_eq!(stirling2(2, 3).unwrap().exact, BigUint::zero());
        assert_eq!(stirling2(2, 3).unwrap().ln, f64::NEG_INFINITY);
        assert_eq!(stirling2(0, 0).unwrap().exact, BigUint::from(1u32));
        assert_eq!(stirling2(5, 0).unwrap().exact, BigUint::zero());
        assert_eq!(stirling2(10, 3).unwrap().exact, BigUint::from(9330u32));
    }

    #[test]
    fn diagonal_is_one_up_to_cap() {
        let t = StirlingTable::shared(DEFAULT_CAP).unwrap();
        for n in 0..=DEFAULT_CAP {
            assert_eq!(t.get(n, n), Some(&BigUint::from(1u32)));
            assert_eq!(t.ln(n, n), 0.0);
        }
    }

    #[test]
    fn matches_explicit_formula() {
        for &(n, k) in &[(20u32, 7u32), (64, 13), (128, 40), (101, 2)] {
            let s = stirling2(n as usize, k as usize).unwrap();
            let e = explicit(n, k);
            assert_eq!(s.exact, e);
            assert!((s.ln - ln_biguint(&e)).abs() < 1e-12);
        }
    }

    #[test]
    fn large_log_values() {
        // S(n,2) = 2^(n-1) - 1
        let s = stirling2(500, 2).unwrap();
        assert!((s.ln - 499.0 * std::f64::consts::LN_2).abs() < 1e-10);
        // S(n, n-1) = C(n, 2)
        let s = stirling2(300, 299).unwrap();
        assert_eq!(s.exact, BigUint::from(300u32 * 299 / 2));
    }

    #[test]
    fn over_cap_is_capacity_error() {
        assert!(matches!(stirling2(DEFAULT_CAP + 1, 3), Err(Error::Capacity { .. })));
    }
}
