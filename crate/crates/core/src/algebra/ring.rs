use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Coefficient ring of a scheme.
///
/// Modular rings store their elements as canonical `u64` representatives in
/// `0..modulus`; `Q` uses arbitrary-precision fractions in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ring {
    Z2,
    /// Integers modulo an odd prime below 2^16.
    Zp(u16),
    /// Integers modulo 2^level, 1 <= level <= 64.
    Z2k(u8),
    Q,
}

/// A single ring element.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Elem {
    Int(u64),
    Rat(BigRational),
}

impl Elem {
    pub fn is_zero(&self) -> bool {
        match self {
            Elem::Int(x) => *x == 0,
            Elem::Rat(q) => q.is_zero(),
        }
    }
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Elem::Int(x) => write!(f, "{x}"),
            Elem::Rat(q) => write!(f, "{q}"),
        }
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl Ring {
    pub fn zp(p: u64) -> Result<Ring> {
        if p == 2 {
            return Ok(Ring::Z2);
        }
        if p >= 1 << 16 || p % 2 == 0 || !is_prime(p) {
            return Err(Error::InvalidRing(format!(
                "Zp needs an odd prime below 65536, got {p}"
            )));
        }
        Ok(Ring::Zp(p as u16))
    }

    pub fn z2k(level: u32) -> Result<Ring> {
        if !(1..=64).contains(&level) {
            return Err(Error::InvalidRing(format!(
                "Z2k level must lie in 1..=64, got {level}"
            )));
        }
        Ok(Ring::Z2k(level as u8))
    }

    /// Re-checks the invariants of a ring built directly from its variants.
    pub fn validate(self) -> Result<Ring> {
        match self {
            Ring::Zp(p) => Ring::zp(p as u64).and_then(|r| {
                if r == Ring::Z2 {
                    Err(Error::InvalidRing("use Z2 rather than Zp(2)".into()))
                } else {
                    Ok(r)
                }
            }),
            Ring::Z2k(l) => Ring::z2k(l as u32),
            r => Ok(r),
        }
    }

    pub fn is_modular(self) -> bool {
        !matches!(self, Ring::Q)
    }

    pub fn is_field(self) -> bool {
        !matches!(self, Ring::Z2k(l) if l > 1)
    }

    /// The modulus of a modular ring (2^64 for `Z2k(64)`), `None` for `Q`.
    pub fn modulus(self) -> Option<u128> {
        match self {
            Ring::Z2 => Some(2),
            Ring::Zp(p) => Some(p as u128),
            Ring::Z2k(l) => Some(1u128 << l),
            Ring::Q => None,
        }
    }

    /// Short name used in directory layouts and reports, e.g. `Z2`, `Z3`, `Z2^16`, `Q`.
    pub fn name(self) -> String {
        match self {
            Ring::Z2 => "Z2".into(),
            Ring::Zp(p) => format!("Z{p}"),
            Ring::Z2k(l) => format!("Z2^{l}"),
            Ring::Q => "Q".into(),
        }
    }

    #[inline]
    fn mask(l: u8) -> u64 {
        if l >= 64 {
            u64::MAX
        } else {
            (1u64 << l) - 1
        }
    }

    #[inline]
    pub(crate) fn add(self, a: u64, b: u64) -> u64 {
        match self {
            Ring::Z2 => a ^ b,
            Ring::Zp(p) => {
                let s = a + b;
                if s >= p as u64 {
                    s - p as u64
                } else {
                    s
                }
            }
            Ring::Z2k(l) => a.wrapping_add(b) & Self::mask(l),
            Ring::Q => unreachable!("modular op on Q"),
        }
    }

    #[inline]
    pub(crate) fn neg(self, a: u64) -> u64 {
        match self {
            Ring::Z2 => a,
            Ring::Zp(p) => {
                if a == 0 {
                    0
                } else {
                    p as u64 - a
                }
            }
            Ring::Z2k(l) => a.wrapping_neg() & Self::mask(l),
            Ring::Q => unreachable!("modular op on Q"),
        }
    }

    #[inline]
    pub(crate) fn mul(self, a: u64, b: u64) -> u64 {
        match self {
            Ring::Z2 => a & b,
            Ring::Zp(p) => (a * b) % p as u64,
            Ring::Z2k(l) => a.wrapping_mul(b) & Self::mask(l),
            Ring::Q => unreachable!("modular op on Q"),
        }
    }

    /// Multiplicative inverse of a unit of a modular ring.
    pub(crate) fn inv(self, a: u64) -> Option<u64> {
        match self {
            Ring::Z2 => (a == 1).then_some(1),
            Ring::Zp(p) => {
                if a == 0 {
                    return None;
                }
                let e = BigInt::from(a).extended_gcd(&BigInt::from(p));
                let x = e.x.mod_floor(&BigInt::from(p));
                x.to_u64()
            }
            Ring::Z2k(l) => {
                if a % 2 == 0 {
                    return None;
                }
                // Newton iteration doubles the number of correct bits.
                let mut x: u64 = 1;
                for _ in 0..6 {
                    x = x.wrapping_mul(2u64.wrapping_sub(a.wrapping_mul(x)));
                }
                Some(x & Self::mask(l))
            }
            Ring::Q => unreachable!("modular op on Q"),
        }
    }

    pub fn reduce_i64(self, x: i64) -> Elem {
        match self {
            Ring::Q => Elem::Rat(BigRational::from_integer(BigInt::from(x))),
            _ => {
                let m = self.modulus().unwrap() as i128;
                Elem::Int((x as i128).rem_euclid(m) as u64)
            }
        }
    }

    pub(crate) fn reduce_bigint(self, x: &BigInt) -> u64 {
        let m = BigInt::from(self.modulus().expect("modular ring"));
        x.mod_floor(&m).to_u64().expect("reduced residue fits u64")
    }

    /// Image of a rational number in a modular ring; fails when the
    /// denominator is not invertible.
    pub fn reduce_rational(self, q: &BigRational) -> Result<Elem> {
        if self == Ring::Q {
            return Ok(Elem::Rat(q.clone()));
        }
        let n = self.reduce_bigint(q.numer());
        let d = self.reduce_bigint(q.denom());
        let dinv = self.inv(d).ok_or_else(|| {
            Error::OutOfRange(format!("{q} has no image in {}", self.name()))
        })?;
        Ok(Elem::Int(self.mul(n, dinv)))
    }

    /// Checks that `e` is a canonical element of this ring.
    pub fn check_elem(self, e: &Elem) -> Result<()> {
        match (self, e) {
            (Ring::Q, Elem::Rat(_)) => Ok(()),
            (Ring::Q, Elem::Int(_)) => Err(Error::RingMismatch {
                left: "Q".into(),
                right: "modular element".into(),
            }),
            (r, Elem::Int(x)) => {
                if (*x as u128) < r.modulus().unwrap() {
                    Ok(())
                } else {
                    Err(Error::OutOfRange(format!("{x} is not reduced mod {}", r.name())))
                }
            }
            (r, Elem::Rat(_)) => Err(Error::RingMismatch {
                left: r.name(),
                right: "rational element".into(),
            }),
        }
    }

    pub fn zero(self) -> Elem {
        match self {
            Ring::Q => Elem::Rat(BigRational::zero()),
            _ => Elem::Int(0),
        }
    }

    pub fn one(self) -> Elem {
        match self {
            Ring::Q => Elem::Rat(BigRational::one()),
            _ => Elem::Int(1),
        }
    }

    pub fn elem_add(self, a: &Elem, b: &Elem) -> Elem {
        match (a, b) {
            (Elem::Int(x), Elem::Int(y)) => Elem::Int(self.add(*x, *y)),
            (Elem::Rat(x), Elem::Rat(y)) => Elem::Rat(x + y),
            _ => panic!("mixed element kinds"),
        }
    }

    pub fn elem_neg(self, a: &Elem) -> Elem {
        match a {
            Elem::Int(x) => Elem::Int(self.neg(*x)),
            Elem::Rat(x) => Elem::Rat(-x),
        }
    }

    pub fn elem_mul(self, a: &Elem, b: &Elem) -> Elem {
        match (a, b) {
            (Elem::Int(x), Elem::Int(y)) => Elem::Int(self.mul(*x, *y)),
            (Elem::Rat(x), Elem::Rat(y)) => Elem::Rat(x * y),
            _ => panic!("mixed element kinds"),
        }
    }

    /// Signed representative of a modular element in `(-m/2, m/2]`, used for display.
    pub fn signed_repr(self, x: u64) -> i128 {
        let m = self.modulus().expect("modular ring") as i128;
        let x = x as i128;
        if 2 * x > m {
            x - m
        } else {
            x
        }
    }
}

impl fmt::Display for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Inverse of [`Ring::name`]; `Zp` with an explicit prime is also accepted.
impl std::str::FromStr for Ring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Ring> {
        let bad = || Error::UnsupportedRing(format!("'{s}' (expected Z2, Z<p>, Z2^<k> or Q)"));
        match s {
            "Z2" => Ok(Ring::Z2),
            "Q" => Ok(Ring::Q),
            _ => {
                if let Some(k) = s.strip_prefix("Z2^") {
                    Ring::z2k(k.parse().map_err(|_| bad())?)
                } else if let Some(p) = s.strip_prefix("Zp").or_else(|| s.strip_prefix('Z')) {
                    Ring::zp(p.parse().map_err(|_| bad())?)
                } else {
                    Err(bad())
                }
            }
        }
    }
}

impl serde::Serialize for Ring {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> serde::Deserialize<'de> for Ring {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Ring, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses rationals written as `a`, `-a`, or `a/b`.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim().parse::<BigInt>().ok()?, d.trim().parse::<BigInt>().ok()?),
        None => (s.parse::<BigInt>().ok()?, BigInt::one()),
    };
    if d.is_zero() {
        return None;
    }
    Some(BigRational::new(n, d))
}

/// Canonical text of a rational: `n` for integers, `n/d` otherwise.
pub fn format_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}
