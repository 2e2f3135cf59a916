use std::fmt;
use std::hash::{Hash, Hasher};

use num_rational::BigRational;
use num_traits::Zero;
use rustc_hash::FxHasher;
use smallvec::SmallVec;

use super::ring::{format_rational, Elem, Ring};
use crate::error::{Error, Result};

/// Storage of a matrix. Every entry is a canonical representative.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Data {
    /// Z2: each row occupies `ceil(cols / 64)` machine words, unused high bits zero.
    Bits(SmallVec<[u64; 8]>),
    /// Zp and Z2k: one canonical residue per entry, row-major.
    Words(Vec<u64>),
    /// Q: one reduced fraction per entry, row-major.
    Rat(Vec<BigRational>),
}

/// Dense matrix over one of the supported rings.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mat {
    ring: Ring,
    rows: usize,
    cols: usize,
    data: Data,
}

#[inline]
fn words_per_row(cols: usize) -> usize {
    cols.div_ceil(64).max(1)
}

impl Mat {
    pub fn zeros(ring: Ring, rows: usize, cols: usize) -> Mat {
        let data = match ring {
            Ring::Z2 => Data::Bits(SmallVec::from_elem(0, rows * words_per_row(cols))),
            Ring::Q => Data::Rat(vec![BigRational::zero(); rows * cols]),
            _ => Data::Words(vec![0; rows * cols]),
        };
        Mat {
            ring,
            rows,
            cols,
            data,
        }
    }

    /// The single-entry matrix `E_{r,c}`.
    pub fn unit(ring: Ring, rows: usize, cols: usize, r: usize, c: usize) -> Mat {
        let mut m = Mat::zeros(ring, rows, cols);
        m.set(r, c, &ring.one());
        m
    }

    pub fn from_i64s(ring: Ring, rows: usize, cols: usize, entries: &[i64]) -> Result<Mat> {
        if entries.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        let mut m = Mat::zeros(ring, rows, cols);
        for (idx, &x) in entries.iter().enumerate() {
            m.set(idx / cols, idx % cols, &ring.reduce_i64(x));
        }
        Ok(m)
    }

    /// Builds a matrix from ring elements; each must already be canonical.
    pub fn from_elems(ring: Ring, rows: usize, cols: usize, entries: &[Elem]) -> Result<Mat> {
        if entries.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        let mut m = Mat::zeros(ring, rows, cols);
        for (idx, e) in entries.iter().enumerate() {
            ring.check_elem(e)?;
            m.set(idx / cols, idx % cols, e);
        }
        Ok(m)
    }

    pub fn ring(&self) -> Ring {
        self.ring
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> Elem {
        debug_assert!(r < self.rows && c < self.cols);
        match &self.data {
            Data::Bits(w) => {
                let wpr = words_per_row(self.cols);
                Elem::Int((w[r * wpr + c / 64] >> (c % 64)) & 1)
            }
            Data::Words(v) => Elem::Int(v[r * self.cols + c]),
            Data::Rat(v) => Elem::Rat(v[r * self.cols + c].clone()),
        }
    }

    /// Entry as a canonical residue. Panics for `Q`.
    #[inline]
    pub fn get_u64(&self, r: usize, c: usize) -> u64 {
        match &self.data {
            Data::Bits(w) => {
                let wpr = words_per_row(self.cols);
                (w[r * wpr + c / 64] >> (c % 64)) & 1
            }
            Data::Words(v) => v[r * self.cols + c],
            Data::Rat(_) => panic!("get_u64 on a rational matrix"),
        }
    }

    pub fn set(&mut self, r: usize, c: usize, e: &Elem) {
        assert!(r < self.rows && c < self.cols, "index out of bounds");
        let cols = self.cols;
        match (&mut self.data, e) {
            (Data::Bits(w), Elem::Int(x)) => {
                let wpr = words_per_row(cols);
                let bit = 1u64 << (c % 64);
                let word = &mut w[r * wpr + c / 64];
                if *x & 1 == 1 {
                    *word |= bit;
                } else {
                    *word &= !bit;
                }
            }
            (Data::Words(v), Elem::Int(x)) => v[r * cols + c] = *x,
            (Data::Rat(v), Elem::Rat(q)) => v[r * cols + c] = q.clone(),
            _ => panic!("element kind does not match the matrix ring"),
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.data {
            Data::Bits(w) => w.iter().all(|&x| x == 0),
            Data::Words(v) => v.iter().all(|&x| x == 0),
            Data::Rat(v) => v.iter().all(|q| q.is_zero()),
        }
    }

    pub fn nonzero_count(&self) -> usize {
        match &self.data {
            Data::Bits(w) => w.iter().map(|x| x.count_ones() as usize).sum(),
            Data::Words(v) => v.iter().filter(|&&x| x != 0).count(),
            Data::Rat(v) => v.iter().filter(|q| !q.is_zero()).count(),
        }
    }

    /// Nonzero entries as `(row, col, element)` in row-major order.
    pub fn nonzeros(&self) -> Vec<(usize, usize, Elem)> {
        let mut out = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let e = self.get(r, c);
                if !e.is_zero() {
                    out.push((r, c, e));
                }
            }
        }
        out
    }

    fn check_compatible(&self, other: &Mat) -> Result<()> {
        if self.ring != other.ring {
            return Err(Error::RingMismatch {
                left: self.ring.name(),
                right: other.ring.name(),
            });
        }
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    /// `self += lambda * other`, in place.
    pub fn add_scaled_assign(&mut self, lambda: &Elem, other: &Mat) -> Result<()> {
        self.check_compatible(other)?;
        let ring = self.ring;
        match (&mut self.data, &other.data, lambda) {
            (Data::Bits(a), Data::Bits(b), Elem::Int(l)) => {
                if *l & 1 == 1 {
                    for (x, y) in a.iter_mut().zip(b.iter()) {
                        *x ^= *y;
                    }
                }
            }
            (Data::Words(a), Data::Words(b), Elem::Int(l)) => {
                ring.check_elem(lambda)?;
                for (x, &y) in a.iter_mut().zip(b.iter()) {
                    *x = ring.add(*x, ring.mul(*l, y));
                }
            }
            (Data::Rat(a), Data::Rat(b), Elem::Rat(l)) => {
                for (x, y) in a.iter_mut().zip(b.iter()) {
                    *x += l * y;
                }
            }
            _ => {
                return Err(Error::RingMismatch {
                    left: ring.name(),
                    right: "scalar of another ring".into(),
                })
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &Mat) -> Result<Mat> {
        let mut out = self.clone();
        out.add_scaled_assign(&self.ring.one(), other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &Mat) -> Result<Mat> {
        let mut out = self.clone();
        out.add_scaled_assign(&self.ring.elem_neg(&self.ring.one()), other)?;
        Ok(out)
    }

    pub fn scale(&self, lambda: &Elem) -> Result<Mat> {
        self.ring.check_elem(lambda)?;
        let mut out = Mat::zeros(self.ring, self.rows, self.cols);
        out.add_scaled_assign(lambda, self)?;
        Ok(out)
    }

    pub fn neg(&self) -> Mat {
        self.scale(&self.ring.elem_neg(&self.ring.one()))
            .expect("negation stays in the ring")
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.ring, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let e = self.get(r, c);
                if !e.is_zero() {
                    out.set(c, r, &e);
                }
            }
        }
        out
    }

    /// Copy of this matrix placed at offset `(row_off, col_off)` inside a
    /// `rows x cols` zero matrix; entries falling outside are dropped.
    pub fn embedded(&self, rows: usize, cols: usize, row_off: usize, col_off: usize) -> Mat {
        let mut out = Mat::zeros(self.ring, rows, cols);
        for (r, c, e) in self.nonzeros() {
            let (rr, cc) = (r + row_off, c + col_off);
            if rr < rows && cc < cols {
                out.set(rr, cc, &e);
            }
        }
        out
    }

    /// Same matrix with trailing rows/columns added (zero) or removed.
    pub fn resized(&self, rows: usize, cols: usize) -> Mat {
        self.embedded(rows, cols, 0, 0)
    }

    /// Fast 64-bit content hash. Equal matrices hash equally; callers confirm
    /// equality with `==` before acting on a hash match.
    pub fn hash64(&self) -> u64 {
        let mut h = FxHasher::default();
        self.hash(&mut h);
        h.finish()
    }

    /// Canonical residues in row-major order. Panics for `Q`.
    pub fn residues(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(self.get_u64(r, c));
            }
        }
        out
    }

    /// Row `r` of a Z2 matrix as packed words.
    pub fn row_words(&self, r: usize) -> &[u64] {
        match &self.data {
            Data::Bits(w) => {
                let wpr = words_per_row(self.cols);
                &w[r * wpr..(r + 1) * wpr]
            }
            _ => panic!("row_words on a non-Z2 matrix"),
        }
    }

    /// Packs a Z2 matrix with at most 64 entries into one word, bit `r*cols + c`.
    pub fn pack_u64(&self) -> Option<u64> {
        if self.ring != Ring::Z2 || self.rows * self.cols > 64 {
            return None;
        }
        let mut x = 0u64;
        for r in 0..self.rows {
            for c in 0..self.cols {
                x |= self.get_u64(r, c) << (r * self.cols + c);
            }
        }
        Some(x)
    }

    pub fn unpack_u64(rows: usize, cols: usize, bits: u64) -> Mat {
        let mut m = Mat::zeros(Ring::Z2, rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if (bits >> (r * cols + c)) & 1 == 1 {
                    m.set(r, c, &Elem::Int(1));
                }
            }
        }
        m
    }

    /// Entrywise image in another ring.
    ///
    /// Supported: any modular ring to a modular ring whose modulus divides it
    /// (including Z2 into Z2k through 0/1 representatives, which is a ring map
    /// only for level 1 but is the standard embedding of coefficients for
    /// lifting), and Q into any modular ring where denominators are invertible.
    pub fn map_ring(&self, target: Ring) -> Result<Mat> {
        if target == self.ring {
            return Ok(self.clone());
        }
        let mut out = Mat::zeros(target, self.rows, self.cols);
        match self.ring {
            Ring::Q => {
                for (r, c, e) in self.nonzeros() {
                    let Elem::Rat(q) = e else { unreachable!() };
                    out.set(r, c, &target.reduce_rational(&q)?);
                }
            }
            src => {
                let tm = target.modulus().ok_or_else(|| {
                    Error::UnsupportedRing(format!("no canonical map from {src} to Q"))
                })?;
                let sm = src.modulus().unwrap();
                let embed_bits = src == Ring::Z2 && matches!(target, Ring::Z2k(_));
                if sm % tm != 0 && !embed_bits {
                    return Err(Error::UnsupportedRing(format!(
                        "no ring map from {src} to {target}"
                    )));
                }
                for r in 0..self.rows {
                    for c in 0..self.cols {
                        let x = self.get_u64(r, c) as u128 % tm;
                        if x != 0 {
                            out.set(r, c, &Elem::Int(x as u64));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Entries formatted for the exchange file: integers for modular rings,
    /// canonical fraction strings for Q.
    pub fn to_json_value(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = (0..self.rows)
            .map(|r| {
                serde_json::Value::Array(
                    (0..self.cols)
                        .map(|c| match self.get(r, c) {
                            Elem::Int(x) => serde_json::Value::from(x),
                            Elem::Rat(q) => serde_json::Value::from(format_rational(&q)),
                        })
                        .collect(),
                )
            })
            .collect();
        serde_json::Value::Array(rows)
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mat<{}>{}", self.ring, self)
    }
}

impl fmt::Display for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for r in 0..self.rows {
            if r > 0 {
                write!(f, ",")?;
            }
            write!(f, "[")?;
            for c in 0..self.cols {
                if c > 0 {
                    write!(f, ",")?;
                }
                match self.get(r, c) {
                    Elem::Int(x) => write!(f, "{x}")?,
                    Elem::Rat(q) => write!(f, "{}", format_rational(&q))?,
                }
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}
