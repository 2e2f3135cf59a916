//! Matrix multiplication schemes and their verification.
//!
//! A scheme of format `(n, m, p)` is a list of triples `(u, v, w)` with `u`
//! of shape `n x m`, `v` of shape `m x p` and `w` of shape `p x n`. The third
//! factor is stored transposed ("Brent orientation"): `w[k, i]` is the
//! coefficient of the product in output entry `c[i, k]`. With this layout the
//! cyclic symmetry of the matrix multiplication tensor is a plain rotation of
//! the three slots.
//!
//! Correctness is the system of Brent equations
//!
//! ```text
//! sum_l u_l[i, j] * v_l[j', k] * w_l[k', i'] = [j = j'] [k = k'] [i = i']
//! ```
//!
//! for all index tuples, checked exactly in the scheme's ring.

mod io;
mod perm;

use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algebra::{Elem, Mat, Ring};
use crate::error::{Error, Result};

pub use io::{read_scheme, scheme_from_json, scheme_to_json, write_scheme};
pub use perm::{canonical_format, permute_format, FormatPerm};

/// The dimensions `(n, m, p)` of the product of an `n x m` and an `m x p` matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[usize; 3]", into = "[usize; 3]")]
pub struct Format {
    n: usize,
    m: usize,
    p: usize,
}

impl Format {
    pub fn new(n: usize, m: usize, p: usize) -> Result<Format> {
        if n == 0 || m == 0 || p == 0 {
            return Err(Error::Shape(format!(
                "format ({n},{m},{p}) has a zero dimension"
            )));
        }
        Ok(Format { n, m, p })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.n, self.m, self.p]
    }

    pub fn from_dims(d: [usize; 3]) -> Result<Format> {
        Format::new(d[0], d[1], d[2])
    }

    /// `n * m * p`, the rank of the standard algorithm.
    pub fn volume(&self) -> usize {
        self.n * self.m * self.p
    }

    /// Shape `(rows, cols)` of the matrices stored in `slot`.
    pub fn slot_shape(&self, slot: Slot) -> (usize, usize) {
        match slot {
            Slot::U => (self.n, self.m),
            Slot::V => (self.m, self.p),
            Slot::W => (self.p, self.n),
        }
    }

    /// Compact label such as `368`, used for graph nodes.
    pub fn label(&self) -> String {
        format!("{}{}{}", self.n, self.m, self.p)
    }

    /// Directory name such as `3x6x8`.
    pub fn dir_name(&self) -> String {
        format!("{}x{}x{}", self.n, self.m, self.p)
    }
}

impl TryFrom<[usize; 3]> for Format {
    type Error = Error;

    fn try_from(d: [usize; 3]) -> Result<Format> {
        Format::from_dims(d)
    }
}

impl From<Format> for [usize; 3] {
    fn from(f: Format) -> [usize; 3] {
        f.dims()
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.n, self.m, self.p)
    }
}

/// One of the three factor positions of a triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    U,
    V,
    W,
}

impl Slot {
    pub const ALL: [Slot; 3] = [Slot::U, Slot::V, Slot::W];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Slot {
        Slot::ALL[i]
    }

    /// The slot that is neither `a` nor `b` (which must differ).
    pub fn remaining(a: Slot, b: Slot) -> Slot {
        debug_assert_ne!(a, b);
        Slot::from_index(3 - a.index() - b.index())
    }
}

/// A rank-one summand `u ⊗ v ⊗ w`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Triple {
    slots: [Mat; 3],
}

impl Triple {
    pub fn new(u: Mat, v: Mat, w: Mat) -> Triple {
        Triple { slots: [u, v, w] }
    }

    pub fn from_slots(slots: [Mat; 3]) -> Triple {
        Triple { slots }
    }

    pub fn u(&self) -> &Mat {
        &self.slots[0]
    }

    pub fn v(&self) -> &Mat {
        &self.slots[1]
    }

    pub fn w(&self) -> &Mat {
        &self.slots[2]
    }

    pub fn slot(&self, s: Slot) -> &Mat {
        &self.slots[s.index()]
    }

    pub(crate) fn slot_mut(&mut self, s: Slot) -> &mut Mat {
        &mut self.slots[s.index()]
    }

    pub fn slots(&self) -> &[Mat; 3] {
        &self.slots
    }

    pub fn into_slots(self) -> [Mat; 3] {
        self.slots
    }

    pub fn has_zero_slot(&self) -> bool {
        self.slots.iter().any(Mat::is_zero)
    }
}

/// One violated Brent equation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// `(i, j, j', k, k', i')`
    pub index: [usize; 6],
    pub expected: String,
    pub actual: String,
}

/// Why a scheme failed verification.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FailureReport {
    /// At most ten violated equations, in index order.
    pub violations: Vec<Violation>,
    pub total_violations: usize,
}

impl fmt::Display for FailureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} Brent equation(s) violated", self.total_violations)?;
        for v in &self.violations {
            let [i, j, j2, k, k2, i2] = v.index;
            write!(
                f,
                "; (i,j,j',k,k',i')=({i},{j},{j2},{k},{k2},{i2}) expected {} got {}",
                v.expected, v.actual
            )?;
        }
        Ok(())
    }
}

impl std::error::Error for FailureReport {}

const MAX_REPORTED: usize = 10;

/// A bilinear algorithm for a matrix product: format, ring and an ordered
/// list of triples. The rank is the number of triples.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Scheme {
    format: Format,
    ring: Ring,
    triples: Vec<Triple>,
}

impl Scheme {
    /// Builds a scheme after checking every triple's shapes and ring.
    pub fn new(format: Format, ring: Ring, triples: Vec<Triple>) -> Result<Scheme> {
        let ring = ring.validate()?;
        for (l, t) in triples.iter().enumerate() {
            for s in Slot::ALL {
                let m = t.slot(s);
                if m.ring() != ring {
                    return Err(Error::RingMismatch {
                        left: ring.name(),
                        right: format!("triple {l} slot {s:?} over {}", m.ring()),
                    });
                }
                if m.shape() != format.slot_shape(s) {
                    let (r, c) = format.slot_shape(s);
                    return Err(Error::Shape(format!(
                        "triple {l} slot {s:?} is {}x{}, expected {r}x{c}",
                        m.rows(),
                        m.cols()
                    )));
                }
            }
        }
        Ok(Scheme {
            format,
            ring,
            triples,
        })
    }

    /// Internal constructor for callers that maintain the shape invariant.
    pub(crate) fn from_parts(format: Format, ring: Ring, triples: Vec<Triple>) -> Scheme {
        debug_assert!(Scheme::new(format, ring, triples.clone()).is_ok());
        Scheme {
            format,
            ring,
            triples,
        }
    }

    /// The standard algorithm: one product `a[i,j] * b[j,k]` per `(i, j, k)`,
    /// as the triple `(E_ij, E_jk, E_ki)`.
    pub fn standard(format: Format, ring: Ring) -> Scheme {
        let [n, m, p] = format.dims();
        let mut triples = Vec::with_capacity(format.volume());
        for i in 0..n {
            for j in 0..m {
                for k in 0..p {
                    triples.push(Triple::new(
                        Mat::unit(ring, n, m, i, j),
                        Mat::unit(ring, m, p, j, k),
                        Mat::unit(ring, p, n, k, i),
                    ));
                }
            }
        }
        Scheme::from_parts(format, ring, triples)
    }

    pub fn format(&self) -> Format {
        self.format
    }

    pub fn ring(&self) -> Ring {
        self.ring
    }

    pub fn rank(&self) -> usize {
        self.triples.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn into_triples(self) -> Vec<Triple> {
        self.triples
    }

    pub(crate) fn triples_mut(&mut self) -> &mut Vec<Triple> {
        &mut self.triples
    }

    /// Checks all `(nmp)^2` Brent equations exactly.
    pub fn verify(&self) -> Result<(), FailureReport> {
        match self.ring {
            Ring::Q => self.verify_rational(),
            _ => self.verify_modular(),
        }
    }

    pub fn is_verified(&self) -> bool {
        self.verify().is_ok()
    }

    fn tensor_dims(&self) -> (usize, usize, usize) {
        let [n, m, p] = self.format.dims();
        (n * m, m * p, p * n)
    }

    fn expected_one(&self, a: usize, b: usize, c: usize) -> bool {
        let [n, m, p] = self.format.dims();
        let (i, j) = (a / m, a % m);
        let (j2, k) = (b / p, b % p);
        let (k2, i2) = (c / n, c % n);
        j == j2 && k == k2 && i == i2
    }

    fn index_tuple(&self, a: usize, b: usize, c: usize) -> [usize; 6] {
        let [n, m, p] = self.format.dims();
        [a / m, a % m, b / p, b % p, c / n, c % n]
    }

    fn verify_modular(&self) -> Result<(), FailureReport> {
        let ring = self.ring;
        let (da, db, dc) = self.tensor_dims();
        let mut t = vec![0u64; da * db * dc];
        let flat = |m: &Mat| -> Vec<(usize, u64)> {
            m.residues()
                .into_iter()
                .enumerate()
                .filter(|&(_, x)| x != 0)
                .collect()
        };
        for tr in &self.triples {
            let (us, vs, ws) = (flat(tr.u()), flat(tr.v()), flat(tr.w()));
            for &(a, x) in &us {
                for &(b, y) in &vs {
                    let xy = ring.mul(x, y);
                    let base = (a * db + b) * dc;
                    for &(c, z) in &ws {
                        t[base + c] = ring.add(t[base + c], ring.mul(xy, z));
                    }
                }
            }
        }
        let mut report = FailureReport {
            violations: Vec::new(),
            total_violations: 0,
        };
        for a in 0..da {
            for b in 0..db {
                for c in 0..dc {
                    let want = u64::from(self.expected_one(a, b, c));
                    let got = t[(a * db + b) * dc + c];
                    if got != want {
                        report.total_violations += 1;
                        if report.violations.len() < MAX_REPORTED {
                            report.violations.push(Violation {
                                index: self.index_tuple(a, b, c),
                                expected: want.to_string(),
                                actual: got.to_string(),
                            });
                        }
                    }
                }
            }
        }
        if report.total_violations == 0 {
            Ok(())
        } else {
            Err(report)
        }
    }

    fn verify_rational(&self) -> Result<(), FailureReport> {
        let (da, db, dc) = self.tensor_dims();
        let mut t = vec![BigRational::zero(); da * db * dc];
        let flat = |m: &Mat| -> Vec<(usize, BigRational)> {
            let cols = m.cols();
            m.nonzeros()
                .into_iter()
                .map(|(r, c, e)| match e {
                    Elem::Rat(q) => (r * cols + c, q),
                    Elem::Int(_) => unreachable!(),
                })
                .collect()
        };
        for tr in &self.triples {
            let (us, vs, ws) = (flat(tr.u()), flat(tr.v()), flat(tr.w()));
            for (a, x) in &us {
                for (b, y) in &vs {
                    let xy = x * y;
                    let base = (a * db + b) * dc;
                    for (c, z) in &ws {
                        t[base + c] += &xy * z;
                    }
                }
            }
        }
        let mut report = FailureReport {
            violations: Vec::new(),
            total_violations: 0,
        };
        for a in 0..da {
            for b in 0..db {
                for c in 0..dc {
                    let want = if self.expected_one(a, b, c) {
                        BigRational::one()
                    } else {
                        BigRational::zero()
                    };
                    let got = &t[(a * db + b) * dc + c];
                    if *got != want {
                        report.total_violations += 1;
                        if report.violations.len() < MAX_REPORTED {
                            report.violations.push(Violation {
                                index: self.index_tuple(a, b, c),
                                expected: want.to_string(),
                                actual: got.to_string(),
                            });
                        }
                    }
                }
            }
        }
        if report.total_violations == 0 {
            Ok(())
        } else {
            Err(report)
        }
    }

    /// Copy without triples that have a zero slot. Never applied implicitly.
    pub fn normalized(&self) -> Scheme {
        Scheme {
            format: self.format,
            ring: self.ring,
            triples: self
                .triples
                .iter()
                .filter(|t| !t.has_zero_slot())
                .cloned()
                .collect(),
        }
    }

    pub fn is_normalized(&self) -> bool {
        self.triples.iter().all(|t| !t.has_zero_slot())
    }

    /// Entrywise image of every coefficient in `target` (see [`Mat::map_ring`]).
    pub fn map_ring(&self, target: Ring) -> Result<Scheme> {
        let triples = self
            .triples
            .iter()
            .map(|t| {
                Ok(Triple::new(
                    t.u().map_ring(target)?,
                    t.v().map_ring(target)?,
                    t.w().map_ring(target)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Scheme::from_parts(self.format, target, triples))
    }

    /// Content hash of the exact serialization; sensitive to triple order.
    pub fn id(&self) -> SchemeId {
        SchemeId::digest(scheme_to_json(self).as_bytes())
    }

    /// Hash that ignores triple order: triples are sorted by their serialized
    /// bytes before hashing. Used to deduplicate pools.
    pub fn canonical_hash(&self) -> SchemeId {
        let mut rows: Vec<String> = self.triples.iter().map(io::triple_line).collect();
        rows.sort_unstable();
        let mut h = Sha256::new();
        h.update(self.format.dir_name().as_bytes());
        h.update(b"|");
        h.update(self.ring.name().as_bytes());
        for r in rows {
            h.update(b"|");
            h.update(r.as_bytes());
        }
        SchemeId(hex::encode(&h.finalize()[..16]))
    }
}

/// Hex digest identifying a scheme serialization.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SchemeId(pub String);

impl SchemeId {
    fn digest(bytes: &[u8]) -> SchemeId {
        SchemeId(hex::encode(&Sha256::digest(bytes)[..16]))
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Strassen's seven-multiplication scheme for `(2,2,2)`, with integer
/// coefficients mapped into `ring`.
pub fn strassen(ring: Ring) -> Scheme {
    // (A11 + A22)(B11 + B22), (A21 + A22)B11, A11(B12 - B22), A22(B21 - B11),
    // (A11 + A12)B22, (A21 - A11)(B11 + B12), (A12 - A22)(B21 + B22).
    // C11 = M1 + M4 - M5 + M7, C12 = M3 + M5, C21 = M2 + M4, C22 = M1 - M2 + M3 + M6.
    // u and v row-major 2x2; w is stored as w[k][i] = coefficient in C[i][k].
    let us: [[i64; 4]; 7] = [
        [1, 0, 0, 1],
        [0, 0, 1, 1],
        [1, 0, 0, 0],
        [0, 0, 0, 1],
        [1, 1, 0, 0],
        [-1, 0, 1, 0],
        [0, 1, 0, -1],
    ];
    let vs: [[i64; 4]; 7] = [
        [1, 0, 0, 1],
        [1, 0, 0, 0],
        [0, 1, 0, -1],
        [-1, 0, 1, 0],
        [0, 0, 0, 1],
        [1, 1, 0, 0],
        [0, 0, 1, 1],
    ];
    // C coefficients [C11, C12, C21, C22] per product.
    let cs: [[i64; 4]; 7] = [
        [1, 0, 0, 1],
        [0, 0, 1, -1],
        [0, 1, 0, 1],
        [1, 0, 1, 0],
        [-1, 1, 0, 0],
        [0, 0, 0, 1],
        [1, 0, 0, 0],
    ];
    let f = Format::new(2, 2, 2).unwrap();
    let triples = (0..7)
        .map(|l| {
            let c = cs[l];
            // w[k][i] = C[i][k]
            let w = [c[0], c[2], c[1], c[3]];
            Triple::new(
                Mat::from_i64s(ring, 2, 2, &us[l]).unwrap(),
                Mat::from_i64s(ring, 2, 2, &vs[l]).unwrap(),
                Mat::from_i64s(ring, 2, 2, &w).unwrap(),
            )
        })
        .collect();
    Scheme::from_parts(f, ring, triples)
}
