//! Shared numeric comparison helpers. Predicates over reals and program
//! guards must agree, so both go through these tolerance-based comparators.

/// Tolerance for real comparisons in predicates and guards.
pub const REAL_EPS: f64 = 1e-9;

pub fn real_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= REAL_EPS
}

pub fn real_le(a: f64, b: f64) -> bool {
    a <= b + REAL_EPS
}

pub fn real_lt(a: f64, b: f64) -> bool {
    a < b - REAL_EPS
}
