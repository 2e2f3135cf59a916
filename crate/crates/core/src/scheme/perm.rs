use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Format, Scheme, Triple};
use crate::error::{Error, Result};

/// A permutation of the three format dimensions: the permuted format is
/// `(d[σ0], d[σ1], d[σ2])` where `d = (n, m, p)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FormatPerm([u8; 3]);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Generator {
    /// `(u, v, w) -> (v, w, u)`, format `(m, p, n)`.
    Rotate,
    /// `(u, v, w) -> (vᵀ, uᵀ, wᵀ)`, format `(p, m, n)`; from `(AB)ᵀ = BᵀAᵀ`.
    Transpose,
}

impl Generator {
    fn perm(self) -> [u8; 3] {
        match self {
            Generator::Rotate => [1, 2, 0],
            Generator::Transpose => [2, 1, 0],
        }
    }

    fn apply(self, t: &Triple) -> Triple {
        match self {
            Generator::Rotate => Triple::new(t.v().clone(), t.w().clone(), t.u().clone()),
            Generator::Transpose => {
                Triple::new(t.v().transpose(), t.u().transpose(), t.w().transpose())
            }
        }
    }
}

impl FormatPerm {
    pub const IDENTITY: FormatPerm = FormatPerm([0, 1, 2]);
    pub const ROTATE: FormatPerm = FormatPerm([1, 2, 0]);
    pub const ROTATE2: FormatPerm = FormatPerm([2, 0, 1]);
    pub const SWAP_NP: FormatPerm = FormatPerm([2, 1, 0]);
    pub const SWAP_NM: FormatPerm = FormatPerm([1, 0, 2]);
    pub const SWAP_MP: FormatPerm = FormatPerm([0, 2, 1]);

    /// All six permutations; identity first, then the rotations, then the swaps.
    pub const ALL: [FormatPerm; 6] = [
        FormatPerm::IDENTITY,
        FormatPerm::ROTATE,
        FormatPerm::ROTATE2,
        FormatPerm::SWAP_NP,
        FormatPerm::SWAP_NM,
        FormatPerm::SWAP_MP,
    ];

    pub fn new(p: [u8; 3]) -> Result<FormatPerm> {
        let mut seen = [false; 3];
        for &x in &p {
            if x > 2 || seen[x as usize] {
                return Err(Error::Structural(format!("{p:?} is not a permutation of 0..3")));
            }
            seen[x as usize] = true;
        }
        Ok(FormatPerm(p))
    }

    pub fn as_array(&self) -> [u8; 3] {
        self.0
    }

    pub fn apply_to(&self, f: Format) -> Format {
        let d = f.dims();
        Format::from_dims([d[self.0[0] as usize], d[self.0[1] as usize], d[self.0[2] as usize]])
            .expect("permuted dimensions stay positive")
    }

    /// `self` followed by `then`.
    pub fn then(&self, then: FormatPerm) -> FormatPerm {
        FormatPerm([
            self.0[then.0[0] as usize],
            self.0[then.0[1] as usize],
            self.0[then.0[2] as usize],
        ])
    }

    pub fn inverse(&self) -> FormatPerm {
        let mut inv = [0u8; 3];
        for (i, &x) in self.0.iter().enumerate() {
            inv[x as usize] = i as u8;
        }
        FormatPerm(inv)
    }

    /// Shortest generator word realizing this permutation.
    fn word(&self) -> Vec<Generator> {
        let mut frontier = vec![(FormatPerm::IDENTITY, Vec::new())];
        loop {
            let mut next = Vec::new();
            for (p, w) in frontier {
                if p == *self {
                    return w;
                }
                for g in [Generator::Rotate, Generator::Transpose] {
                    let mut w2 = w.clone();
                    w2.push(g);
                    next.push((p.then(FormatPerm(g.perm())), w2));
                }
            }
            frontier = next;
        }
    }

    /// Parses `id`, `rot`, `rot2`, `swap-np`, `swap-nm`, `swap-mp`, or a
    /// digit string such as `120`.
    pub fn parse(s: &str) -> Result<FormatPerm> {
        match s {
            "id" => Ok(FormatPerm::IDENTITY),
            "rot" => Ok(FormatPerm::ROTATE),
            "rot2" => Ok(FormatPerm::ROTATE2),
            "swap-np" | "swap" => Ok(FormatPerm::SWAP_NP),
            "swap-nm" => Ok(FormatPerm::SWAP_NM),
            "swap-mp" => Ok(FormatPerm::SWAP_MP),
            digits if digits.len() == 3 && digits.bytes().all(|b| b.is_ascii_digit()) => {
                let b = digits.as_bytes();
                FormatPerm::new([b[0] - b'0', b[1] - b'0', b[2] - b'0'])
            }
            other => Err(Error::Structural(format!("unknown permutation '{other}'"))),
        }
    }
}

impl fmt::Display for FormatPerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.0[0], self.0[1], self.0[2])
    }
}

pub(crate) fn permute_unchecked(s: &Scheme, sigma: FormatPerm) -> Scheme {
    let mut format = s.format();
    let mut triples: Vec<Triple> = s.triples().to_vec();
    for g in sigma.word() {
        format = FormatPerm(g.perm()).apply_to(format);
        triples = triples.iter().map(|t| g.apply(t)).collect();
    }
    debug_assert_eq!(format, sigma.apply_to(s.format()));
    Scheme::from_parts(format, s.ring(), triples)
}

/// Rewrites a verified scheme into a scheme for the permuted format, using
/// the rotation and transposition symmetries of the multiplication tensor.
pub fn permute_format(s: &Scheme, sigma: FormatPerm) -> Result<Scheme> {
    s.verify().map_err(Error::NotVerified)?;
    Ok(permute_unchecked(s, sigma))
}

/// Sorts a format to `n <= m <= p`, returning the first permutation in
/// [`FormatPerm::ALL`] order that realizes it.
pub fn canonical_format(f: Format) -> (Format, FormatPerm) {
    for sigma in FormatPerm::ALL {
        let g = sigma.apply_to(f);
        if g.n() <= g.m() && g.m() <= g.p() {
            return (g, sigma);
        }
    }
    unreachable!("some permutation sorts three numbers")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Ring;
    use crate::scheme::strassen;

    fn f(n: usize, m: usize, p: usize) -> Format {
        Format::new(n, m, p).unwrap()
    }

    #[test]
    fn every_permutation_verifies() {
        for ring in [Ring::Z2, Ring::Zp(5), Ring::Q] {
            let s = Scheme::standard(f(2, 3, 4), ring);
            for sigma in FormatPerm::ALL {
                let t = permute_format(&s, sigma).unwrap();
                assert_eq!(t.format(), sigma.apply_to(s.format()));
                assert_eq!(t.rank(), 24);
                assert!(t.is_verified(), "{sigma} over {ring}");
            }
        }
    }

    #[test]
    fn identity_is_noop() {
        let s = strassen(Ring::Zp(3));
        assert_eq!(permute_format(&s, FormatPerm::IDENTITY).unwrap(), s);
    }

    #[test]
    fn rotation_of_standard() {
        let s = Scheme::standard(f(2, 3, 4), Ring::Z2);
        let r = permute_format(&s, FormatPerm::ROTATE).unwrap();
        assert_eq!(r.format(), f(3, 4, 2));
        assert_eq!(r.rank(), 24);
        assert!(r.is_verified());
    }

    #[test]
    fn rotation_has_order_three() {
        let s = strassen(Ring::Zp(5));
        let mut t = s.clone();
        for _ in 0..3 {
            t = permute_format(&t, FormatPerm::ROTATE).unwrap();
        }
        assert_eq!(t, s);
    }

    #[test]
    fn inverse_restores() {
        let s = Scheme::standard(f(2, 3, 5), Ring::Q);
        for sigma in FormatPerm::ALL {
            let t = permute_format(&s, sigma).unwrap();
            let back = permute_format(&t, sigma.inverse()).unwrap();
            assert_eq!(back.format(), s.format());
            assert!(back.is_verified());
        }
    }

    #[test]
    fn non_verifying_input_rejected() {
        let s = Scheme::new(f(2, 2, 2), Ring::Z2, vec![]).unwrap();
        assert!(matches!(
            permute_format(&s, FormatPerm::ROTATE),
            Err(Error::NotVerified(_))
        ));
    }

    #[test]
    fn canonical_formats() {
        assert_eq!(canonical_format(f(2, 2, 3)), (f(2, 2, 3), FormatPerm::IDENTITY));
        let (g, sigma) = canonical_format(f(3, 2, 2));
        assert_eq!(g, f(2, 2, 3));
        assert_eq!(sigma.apply_to(f(3, 2, 2)), g);
        assert_eq!(canonical_format(f(5, 4, 4)), (f(4, 4, 5), FormatPerm::ROTATE));
        assert_eq!(canonical_format(f(8, 3, 6)).0, f(3, 6, 8));
    }

    #[test]
    fn parse_names() {
        assert_eq!(FormatPerm::parse("rot").unwrap(), FormatPerm::ROTATE);
        assert_eq!(FormatPerm::parse("021").unwrap(), FormatPerm::SWAP_MP);
        assert!(FormatPerm::parse("011").is_err());
        assert!(FormatPerm::parse("bogus").is_err());
    }
}
