//! Exact counts of non-overlapping length-ξ event placements on rings and
//! lines, the closed forms built from them, and the bound on the ratio of
//! failing configurations between the targeted and the standard decoder.
//!
//! All arithmetic is exact. Every recursion step asserts that its rational
//! intermediate is integral.

use itertools::Itertools;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

pub const ENUMERATION_MAX_SITES: usize = 24;
pub const ENUMERATION_MAX_EVENTS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("{name} must be at least {min}, got {value}")]
    OutOfRange {
        name: &'static str,
        value: usize,
        min: usize,
    },
    #[error("k must be even and positive, got {0}")]
    OddK(usize),
    #[error("L = {size} is not an even multiple of xi = {xi}")]
    IncompatibleSize { size: usize, xi: usize },
    #[error(
        "enumeration is capped at l <= {ENUMERATION_MAX_SITES}, t <= {ENUMERATION_MAX_EVENTS} \
         (got l = {l}, t = {t}); use count_ring instead"
    )]
    CapExceeded { l: usize, t: usize },
}

fn at_least(name: &'static str, value: usize, min: usize) -> Result<(), OracleError> {
    if value < min {
        return Err(OracleError::OutOfRange { name, value, min });
    }
    Ok(())
}

fn ratio(n: usize, d: usize) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn to_uint(r: &BigRational, what: &str) -> BigUint {
    assert!(r.is_integer(), "{what} is not integral: {r}");
    r.to_integer()
        .to_biguint()
        .unwrap_or_else(|| panic!("{what} is negative: {r}"))
}

fn ring_exact(l: usize, t: usize, xi: usize) -> BigRational {
    if t == 0 {
        return BigRational::one();
    }
    if t * xi > l {
        return BigRational::zero();
    }
    if t == 1 {
        return ratio(l, 1);
    }
    // t ≥ 2 and tξ ≤ l imply l > ξ.
    let factor = ratio(l, t) * (BigRational::one() - ratio((t - 1) * (xi - 1), l - xi));
    let value = factor * ring_exact(l - xi, t - 1, xi);
    assert!(
        value.is_integer(),
        "N_{l}({t}) with xi = {xi} is not integral: {value}"
    );
    value
}

/// Placements of `t` non-overlapping arcs of length `xi` on a ring of `l` sites.
pub fn count_ring(l: usize, t: usize, xi: usize) -> Result<BigUint, OracleError> {
    at_least("l", l, 1)?;
    at_least("xi", xi, 1)?;
    Ok(to_uint(&ring_exact(l, t, xi), "N_l(t)"))
}

fn line_recursive(l: usize, t: usize, xi: usize) -> BigRational {
    if t == 0 {
        return BigRational::one();
    }
    if t * xi > l {
        return BigRational::zero();
    }
    let value = ring_exact(l, t, xi) - ratio(xi - 1, 1) * line_recursive(l - xi, t - 1, xi);
    assert!(
        value.is_integer(),
        "M_{l}({t}) with xi = {xi} is not integral: {value}"
    );
    value
}

fn line_direct(l: usize, t: usize, xi: usize) -> BigRational {
    if t == 0 {
        return BigRational::one();
    }
    if t * xi > l {
        return BigRational::zero();
    }
    (BigRational::one() - ratio(t * (xi - 1), l)) * ring_exact(l, t, xi)
}

/// Placements on the ring that leave one fixed site uncrossed, from the
/// recursion `M_l(t) = N_l(t) − (ξ−1)·M_{l−ξ}(t−1)`.
pub fn count_line(l: usize, t: usize, xi: usize) -> Result<BigUint, OracleError> {
    at_least("l", l, 1)?;
    at_least("xi", xi, 1)?;
    Ok(to_uint(&line_recursive(l, t, xi), "M_l(t)"))
}

/// The same count from `M_l(t) = (1 − t(ξ−1)/l)·N_l(t)`.
pub fn count_line_direct(l: usize, t: usize, xi: usize) -> Result<BigUint, OracleError> {
    at_least("l", l, 1)?;
    at_least("xi", xi, 1)?;
    Ok(to_uint(&line_direct(l, t, xi), "M_l(t)"))
}

fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

fn check_k(k: usize, xi: usize) -> Result<(), OracleError> {
    if k == 0 || k % 2 == 1 {
        return Err(OracleError::OddK(k));
    }
    at_least("xi", xi, 1)
}

/// `(2ξ/(ξ+1))·(k(ξ+1)/2)! / ((k/2)!·(kξ/2)!)`.
pub fn n_standard(k: usize, xi: usize) -> Result<BigUint, OracleError> {
    check_k(k, xi)?;
    let h = k / 2;
    let num = BigInt::from(2 * xi) * BigInt::from(factorial(h * (xi + 1)));
    let den = BigInt::from(xi + 1) * BigInt::from(factorial(h) * factorial(h * xi));
    Ok(to_uint(&BigRational::new(num, den), "N_st"))
}

/// `ξ·k! / ((k/2)!)²`.
pub fn n_special(k: usize, xi: usize) -> Result<BigUint, OracleError> {
    check_k(k, xi)?;
    let h = factorial(k / 2);
    let value = BigRational::new(
        BigInt::from(xi) * BigInt::from(factorial(k)),
        BigInt::from(&h * &h),
    );
    Ok(to_uint(&value, "N_sp"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioBound {
    pub size: usize,
    pub xi: usize,
    pub k: usize,
    pub n_standard: BigUint,
    pub n_special: BigUint,
    /// `N_sp / N_st`.
    pub exact: BigRational,
    /// `((ξ+1)/2)·(2/ξ)^{L/(2ξ)}`, exact because `L/(2ξ) = k/2` is an integer.
    pub bound: BigRational,
}

impl RatioBound {
    pub fn exact_f64(&self) -> f64 {
        self.exact.to_f64().unwrap_or(f64::NAN)
    }

    pub fn bound_f64(&self) -> f64 {
        self.bound.to_f64().unwrap_or(f64::NAN)
    }

    pub fn holds(&self) -> bool {
        self.exact <= self.bound
    }
}

pub fn ratio_bound(size: usize, xi: usize) -> Result<RatioBound, OracleError> {
    at_least("xi", xi, 1)?;
    if size == 0 || !size.is_multiple_of(2 * xi) {
        return Err(OracleError::IncompatibleSize { size, xi });
    }
    let k = size / xi;
    let n_st = n_standard(k, xi)?;
    let n_sp = n_special(k, xi)?;
    let exact = BigRational::new(BigInt::from(n_sp.clone()), BigInt::from(n_st.clone()));
    let bound = ratio(xi + 1, 2) * num_traits::pow(ratio(2, xi), k / 2);
    Ok(RatioBound {
        size,
        xi,
        k,
        n_standard: n_st,
        n_special: n_sp,
        exact,
        bound,
    })
}

/// Brute-force count of the placements `count_ring` computes, over all
/// start-position subsets.
pub fn enumerate_ring(l: usize, t: usize, xi: usize) -> Result<BigUint, OracleError> {
    at_least("l", l, 1)?;
    at_least("xi", xi, 1)?;
    if l > ENUMERATION_MAX_SITES || t > ENUMERATION_MAX_EVENTS {
        return Err(OracleError::CapExceeded { l, t });
    }
    let count = (0..l)
        .combinations(t)
        .filter(|starts| match (starts.first(), starts.last()) {
            (Some(&first), Some(&last)) => {
                starts.windows(2).all(|w| w[1] - w[0] >= xi) && first + l - last >= xi
            }
            _ => true,
        })
        .count();
    Ok(BigUint::from(count))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(n: u64) -> BigUint {
        BigUint::from(n)
    }

    #[test]
    fn ring_examples() {
        for l in 1..10 {
            assert_eq!(count_ring(l, 0, 3).unwrap(), u(1));
        }
        assert_eq!(count_ring(6, 2, 3).unwrap(), u(3));
        assert_eq!(count_ring(12, 2, 3).unwrap(), u(42));
        assert_eq!(count_ring(5, 2, 3).unwrap(), u(0));
        assert_eq!(count_ring(7, 1, 3).unwrap(), u(7));
    }

    #[test]
    fn line_examples() {
        assert_eq!(count_line(5, 1, 3).unwrap(), u(3));
        assert_eq!(count_line(6, 2, 3).unwrap(), u(1));
        assert_eq!(count_line_direct(6, 2, 3).unwrap(), u(1));
        assert_eq!(count_line(9, 0, 4).unwrap(), u(1));
    }

    #[test]
    fn line_by_brute_force() {
        // Placements on l sites in a row, no wrap.
        let brute = |l: usize, t: usize, xi: usize| {
            (0..l)
                .combinations(t)
                .filter(|s| {
                    s.windows(2).all(|w| w[1] - w[0] >= xi) && s.last().is_none_or(|&e| e + xi <= l)
                })
                .count()
        };
        for xi in 1..=4 {
            for t in 0..=3 {
                for l in 1..=14 {
                    assert_eq!(count_line(l, t, xi).unwrap(), u(brute(l, t, xi) as u64));
                }
            }
        }
    }

    #[test]
    fn closed_forms() {
        assert_eq!(n_standard(2, 3).unwrap(), u(6));
        assert_eq!(n_standard(4, 3).unwrap(), u(42));
        assert_eq!(n_special(2, 3).unwrap(), u(6));
        assert_eq!(n_special(4, 3).unwrap(), u(18));
        assert_eq!(n_standard(3, 3), Err(OracleError::OddK(3)));
        assert_eq!(n_special(0, 3), Err(OracleError::OddK(0)));
    }

    #[test]
    fn standard_matches_ring_count() {
        for k in (2..=8).step_by(2) {
            for xi in 1..=5 {
                assert_eq!(
                    n_standard(k, xi).unwrap(),
                    count_ring(k * xi, k / 2, xi).unwrap(),
                    "k = {k}, xi = {xi}"
                );
            }
        }
    }

    #[test]
    fn special_never_exceeds_standard() {
        for k in (4..=10).step_by(2) {
            for xi in 3..=5 {
                assert!(n_special(k, xi).unwrap() <= n_standard(k, xi).unwrap());
            }
        }
    }

    #[test]
    fn bound_values() {
        let r = ratio_bound(24, 3).unwrap();
        assert_eq!(r.bound, BigRational::new(32.into(), 81.into()));
        assert_eq!(r.k, 8);
        assert!(r.holds());
        let r = ratio_bound(12, 3).unwrap();
        assert_eq!(r.bound, BigRational::new(8.into(), 9.into()));
        assert_eq!(r.exact, BigRational::new(18.into(), 42.into()));
        assert_eq!(ratio_bound(6, 3).unwrap().exact, BigRational::one());
        assert!(matches!(
            ratio_bound(9, 3),
            Err(OracleError::IncompatibleSize { .. })
        ));
        let b: Vec<f64> = (1..8)
            .map(|h| ratio_bound(6 * h, 3).unwrap().bound_f64())
            .collect();
        assert!(b.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn enumeration_examples_and_caps() {
        assert_eq!(enumerate_ring(6, 2, 3).unwrap(), u(3));
        for xi in 1..=5 {
            assert_eq!(enumerate_ring(11, 1, xi).unwrap(), u(11));
        }
        assert!(matches!(
            enumerate_ring(25, 2, 3),
            Err(OracleError::CapExceeded { .. })
        ));
        assert!(matches!(
            enumerate_ring(10, 5, 1),
            Err(OracleError::CapExceeded { .. })
        ));
    }

    #[test]
    fn recursion_agrees_with_enumeration() {
        for l in 1..=ENUMERATION_MAX_SITES {
            for t in 0..=ENUMERATION_MAX_EVENTS {
                for xi in 1..=5 {
                    assert_eq!(
                        count_ring(l, t, xi).unwrap(),
                        enumerate_ring(l, t, xi).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn line_forms_agree() {
        for l in 1..=60 {
            for t in 0..=6 {
                for xi in 1..=7 {
                    assert_eq!(
                        count_line(l, t, xi).unwrap(),
                        count_line_direct(l, t, xi).unwrap()
                    );
                }
            }
        }
    }
}
