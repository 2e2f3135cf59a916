//! Rational reconstruction modulo powers of two.

use num_integer::Integer;

use crate::error::{Error, Result};

/// A reduced fraction with positive (odd) denominator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fraction {
    pub num: i64,
    pub den: u64,
}

pub(crate) fn isqrt(x: u128) -> u128 {
    if x < 2 {
        return x;
    }
    let mut lo = 1u128;
    let mut hi = 1u128 << 64;
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if mid.checked_mul(mid).is_some_and(|sq| sq <= x) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

/// The numerator/denominator bound `floor(sqrt(2^(level-1)))`.
pub fn reconstruction_bound(level: u32) -> u64 {
    isqrt(1u128 << (level - 1)) as u64
}

/// Recovers `n/d` with `n ≡ u·d (mod 2^level)`, `|n| <= B`, `0 < d <= B`,
/// `gcd(n, d) = 1`, where `B = floor(sqrt(2^(level-1)))`.
///
/// Runs the extended Euclidean remainder sequence on `(2^level, u)` and stops
/// at the first remainder not exceeding `B`. Returns `Ok(None)` when no such
/// fraction exists.
pub fn rat_reconstruct(u: u64, level: u32) -> Result<Option<Fraction>> {
    if !(1..=64).contains(&level) {
        return Err(Error::OutOfRange(format!("level {level} outside 1..=64")));
    }
    let modulus = 1i128 << level;
    if (u as i128) >= modulus {
        return Err(Error::OutOfRange(format!("residue {u} >= 2^{level}")));
    }
    let bound = reconstruction_bound(level) as i128;

    let (mut r0, mut r1) = (modulus, u as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 > bound {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    let (mut n, mut d) = (r1, t1);
    if d < 0 {
        n = -n;
        d = -d;
    }
    if d == 0 || d > bound || n.gcd(&d) != 1 {
        return Ok(None);
    }
    Ok(Some(Fraction {
        num: n as i64,
        den: d as u64,
    }))
}
