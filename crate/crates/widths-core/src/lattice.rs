//! The quantization lattice, exact counting, pinch bounds, the width table
//! ω_p = 2π⌊√p⌋, and the Weyl constant √π.
//!
//! Lattice values 2π(n₁+n₂+n₃) + μ(n₂+2n₃) are kept in exact form: an
//! integer multiple of 2π plus an integer multiple of the rational μ.
//! Comparisons bracket 2π between two rationals with 1e-18 denominators;
//! since every comparison with distinct 2π-multiples differs by at least
//! 2π − (rational part), the bracket always decides.

use num_rational::Ratio;
use thiserror::Error;

use crate::TAU;

pub type Rat = Ratio<i128>;

/// Rational bracket 2π ∈ (TAU_LO, TAU_HI); 2π = 6.283185307179586476925...
fn tau_lo() -> Rat {
    Rat::new(6_283_185_307_179_586_476, 1_000_000_000_000_000_000)
}
fn tau_hi() -> Rat {
    Rat::new(6_283_185_307_179_586_477, 1_000_000_000_000_000_000)
}

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("mu must be positive")]
    MuNotPositive,
    #[error("mu = {mu} is too large for working range m = {m}: need mu < 1/(2m)")]
    MuTooLarge { mu: f64, m: u64 },
    #[error("stratum j = {stratum}: expected {expected} values, found {got}")]
    AssertionFailed { stratum: u32, expected: usize, got: usize },
    #[error("width table covers p ≤ {p_max}, need at least 10^4")]
    TableTooSmall { p_max: u64 },
}

/// One lattice element 2π·tau + μ·steps, exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LatticeValue {
    pub tau: u32,
    pub steps: u32,
}

impl LatticeValue {
    pub fn to_f64(self, mu: Rat) -> f64 {
        TAU * self.tau as f64 + rat_f64(mu) * self.steps as f64
    }
}

pub fn rat_f64(r: Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Upper cutoff 2π·tau + offset for lattice enumeration, exact.
#[derive(Clone, Copy, Debug)]
pub struct LatticeBound {
    pub tau: u32,
    pub offset: Rat,
}

/// Sign of 2π·dt + r, decided through the rational bracket of 2π.
fn sign_mixed(dt: i64, r: Rat) -> std::cmp::Ordering {
    use std::cmp::Ordering::*;
    if dt == 0 {
        return r.cmp(&Rat::from_integer(0));
    }
    let dt = Rat::from_integer(dt as i128);
    let (lo, hi) = if dt > Rat::from_integer(0) {
        (dt * tau_lo() + r, dt * tau_hi() + r)
    } else {
        (dt * tau_hi() + r, dt * tau_lo() + r)
    };
    let zero = Rat::from_integer(0);
    if lo > zero {
        Greater
    } else if hi < zero {
        Less
    } else {
        // Would require 2π·dt to cancel a rational to below 1e-18·|dt|.
        panic!("2π bracket too coarse for comparison: dt = {dt}, r = {r}");
    }
}

/// Exact order of two lattice values given μ.
pub fn cmp_values(a: LatticeValue, b: LatticeValue, mu: Rat) -> std::cmp::Ordering {
    let dt = a.tau as i64 - b.tau as i64;
    let ds = a.steps as i128 - b.steps as i128;
    sign_mixed(dt, mu * Rat::from_integer(ds))
}

/// True iff 2π·v.tau + μ·v.steps ≤ 2π·bound.tau + bound.offset, exact.
pub fn value_le_bound(v: LatticeValue, bound: &LatticeBound, mu: Rat) -> bool {
    let dt = v.tau as i64 - bound.tau as i64;
    let r = mu * Rat::from_integer(v.steps as i128) - bound.offset;
    sign_mixed(dt, r) != std::cmp::Ordering::Greater
}

/// All lattice values {2π(n₁+n₂+n₃) + μ(n₂+2n₃)} in (0, bound], sorted
/// strictly increasing (2π is irrational and μ rational, so no collisions
/// across strata; within a stratum the step counts are distinct).
///
/// For fixed j = n₁+n₂+n₃ the attainable step counts n₂+2n₃ are exactly
/// 0..=2j, so enumeration is over (j, k) pairs rather than triples; the
/// triple-loop equivalence is enforced by an oracle test.
pub fn quantization_values(mu: Rat, bound: &LatticeBound) -> Result<Vec<LatticeValue>, LatticeError> {
    if mu <= Rat::from_integer(0) {
        return Err(LatticeError::MuNotPositive);
    }
    let mut out = Vec::new();
    let mut j: u32 = 1;
    loop {
        let base = LatticeValue { tau: j, steps: 0 };
        if !value_le_bound(base, bound, mu) {
            break;
        }
        for k in 0..=2 * j {
            let v = LatticeValue { tau: j, steps: k };
            if value_le_bound(v, bound, mu) {
                out.push(v);
            } else {
                break;
            }
        }
        j += 1;
    }
    out.sort_by(|a, b| cmp_values(*a, *b, mu));
    out.dedup();
    Ok(out)
}

/// Counting identity: #(lattice ∩ (0, 2πm+1]) = (m+1)² − 1 for μ < 1/(2m),
/// with the j-th stratum realizing exactly the 2j+1 step counts {0,…,2j}.
pub fn count_check(m: u32, mu: Rat) -> Result<usize, LatticeError> {
    if mu <= Rat::from_integer(0) {
        return Err(LatticeError::MuNotPositive);
    }
    if mu >= Rat::new(1, 2 * m as i128) {
        return Err(LatticeError::MuTooLarge { mu: rat_f64(mu), m: m as u64 });
    }
    let bound = LatticeBound { tau: m, offset: Rat::from_integer(1) };
    let values = quantization_values(mu, &bound)?;
    for j in 1..=m {
        let got: Vec<u32> = values.iter().filter(|v| v.tau == j).map(|v| v.steps).collect();
        let expected = (2 * j + 1) as usize;
        if got.len() != expected || got.iter().enumerate().any(|(i, &k)| k != i as u32) {
            return Err(LatticeError::AssertionFailed { stratum: j, expected, got: got.len() });
        }
    }
    let count = values.len();
    let expected = ((m as usize + 1) * (m as usize + 1)) - 1;
    if count != expected {
        return Err(LatticeError::AssertionFailed { stratum: 0, expected, got: count });
    }
    Ok(count)
}

pub fn isqrt(p: u64) -> u64 {
    let mut r = (p as f64).sqrt() as u64;
    while (r + 1) * (r + 1) <= p {
        r += 1;
    }
    while r * r > p {
        r -= 1;
    }
    r
}

/// Pinch interval [2πm, (2π+2μ)m] for the p-th width, m = ⌊√p⌋, re-derived
/// from lattice order statistics: the p-th smallest lattice value must be
/// the (p − m²)-th element of stratum m.
pub fn pinch_bounds(p: u64, mu: Rat) -> Result<(f64, f64), LatticeError> {
    let m = isqrt(p);
    if mu <= Rat::from_integer(0) {
        return Err(LatticeError::MuNotPositive);
    }
    if mu >= Rat::new(1, 2 * m as i128) {
        return Err(LatticeError::MuTooLarge { mu: rat_f64(mu), m });
    }
    let bound = LatticeBound { tau: m as u32, offset: Rat::from_integer(1) };
    let values = quantization_values(mu, &bound)?;
    // Strict increase is what makes "p-th smallest" well defined.
    for w in values.windows(2) {
        assert_eq!(cmp_values(w[0], w[1], mu), std::cmp::Ordering::Less);
    }
    let vp = values[(p - 1) as usize];
    assert_eq!(vp.tau as u64, m, "p-th lattice value left stratum m");
    assert_eq!(vp.steps as u64, p - m * m);
    let lower = TAU * m as f64;
    let upper = TAU * m as f64 + 2.0 * m as f64 * rat_f64(mu);
    Ok((lower, upper))
}

/// The width table ω_p = 2π⌊√p⌋ for 1 ≤ p ≤ p_max, kept symbolic: each
/// entry is an exact integer multiple of 2π.
#[derive(Clone, Copy, Debug)]
pub struct WidthTable {
    pub p_max: u64,
}

impl WidthTable {
    /// ω_p as a multiple of 2π, exact.
    pub fn multiple_of_tau(&self, p: u64) -> u64 {
        assert!(p >= 1 && p <= self.p_max, "p out of table range");
        isqrt(p)
    }

    pub fn value(&self, p: u64) -> f64 {
        TAU * self.multiple_of_tau(p) as f64
    }
}

pub fn width_table(p_max: u64) -> WidthTable {
    assert!(p_max >= 1);
    WidthTable { p_max }
}

/// Weyl constant a(1) = lim ω_p p^{−1/2} / vol(S²)^{1/2}, sampled at the
/// perfect squares where ⌊√p⌋ is exact, with one Richardson step (the
/// sampled sequence is already constant, so the step is a no-op guard).
pub fn weyl_constant(table: &WidthTable) -> Result<f64, LatticeError> {
    if table.p_max < 10_000 {
        return Err(LatticeError::TableTooSmall { p_max: table.p_max });
    }
    let m_max = isqrt(table.p_max);
    let sample = |m: u64| table.value(m * m) / (m as f64);
    let s_half = sample(m_max / 2);
    let s_full = sample(m_max);
    // First-order Richardson in 1/m.
    let limit = 2.0 * s_full - s_half;
    Ok(limit / (4.0 * std::f64::consts::PI).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mu(n: i128, d: i128) -> Rat {
        Rat::new(n, d)
    }

    #[test]
    fn small_enumerations() {
        // bound 2π+1, mu = 1/10: only the j = 1 stratum fits.
        let b = LatticeBound { tau: 1, offset: Rat::from_integer(1) };
        let vals = quantization_values(mu(1, 10), &b).unwrap();
        assert_eq!(vals, vec![
            LatticeValue { tau: 1, steps: 0 },
            LatticeValue { tau: 1, steps: 1 },
            LatticeValue { tau: 1, steps: 2 },
        ]);

        // bound 4π+1: 3 + 5 values.
        let b = LatticeBound { tau: 2, offset: Rat::from_integer(1) };
        assert_eq!(quantization_values(mu(1, 10), &b).unwrap().len(), 8);

        // mu = 1/2 saturates the boundary 2π+1 exactly (inclusive).
        let b = LatticeBound { tau: 1, offset: Rat::from_integer(1) };
        let vals = quantization_values(mu(1, 2), &b).unwrap();
        assert_eq!(vals.len(), 3);
        assert_eq!(vals[2], LatticeValue { tau: 1, steps: 2 });
    }

    #[test]
    fn counting_identity() {
        assert_eq!(count_check(1, mu(1, 10)).unwrap(), 3);
        assert_eq!(count_check(2, mu(1, 10)).unwrap(), 8);
        assert_eq!(count_check(10, mu(1, 25)).unwrap(), 120);
        assert!(matches!(
            count_check(10, mu(1, 10)),
            Err(LatticeError::MuTooLarge { .. })
        ));
    }

    #[test]
    fn pinch_examples() {
        let (lo, hi) = pinch_bounds(1, mu(1, 100)).unwrap();
        assert!((lo - TAU).abs() < 1e-12 && (hi - TAU - 0.02).abs() < 1e-12);
        let (lo, hi) = pinch_bounds(8, mu(1, 100)).unwrap();
        assert!((lo - 2.0 * TAU).abs() < 1e-12 && (hi - 2.0 * TAU - 0.04).abs() < 1e-12);
        let (lo, hi) = pinch_bounds(9, mu(1, 100)).unwrap();
        assert!((lo - 3.0 * TAU).abs() < 1e-12 && (hi - 3.0 * TAU - 0.06).abs() < 1e-12);
    }

    #[test]
    fn width_table_values() {
        let t = width_table(100);
        assert_eq!(t.multiple_of_tau(1), 1);
        assert_eq!(t.multiple_of_tau(3), 1);
        assert_eq!(t.multiple_of_tau(4), 2);
        assert_eq!(t.multiple_of_tau(8), 2);
        assert_eq!(t.multiple_of_tau(24), 4);
        assert_eq!(t.multiple_of_tau(100), 10);
    }

    #[test]
    fn weyl_constant_is_sqrt_pi() {
        let t = width_table(1_000_000);
        let a = weyl_constant(&t).unwrap();
        assert!((a - std::f64::consts::PI.sqrt()).abs() < 1e-14);
        assert!(matches!(
            weyl_constant(&width_table(100)),
            Err(LatticeError::TableTooSmall { .. })
        ));
    }

    #[test]
    fn isqrt_edges() {
        for p in 1..2000u64 {
            let m = isqrt(p);
            assert!(m * m <= p && (m + 1) * (m + 1) > p);
        }
    }
}
