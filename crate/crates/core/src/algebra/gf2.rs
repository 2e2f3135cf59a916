//! Linear systems over GF(2) on bit-packed rows.

use super::mat::Mat;
use super::ring::Ring;
use crate::error::{Error, Result};

/// Packed bit vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> BitVec {
        BitVec {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bools(bits: &[bool]) -> BitVec {
        let mut v = BitVec::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, b: bool) {
        let bit = 1u64 << (i % 64);
        if b {
            self.words[i / 64] |= bit;
        } else {
            self.words[i / 64] &= !bit;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|&i| self.get(i))
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }
}

/// `matrix * x = rhs` over GF(2); rows are equations, columns unknowns.
#[derive(Clone, Debug)]
pub struct LinSystemGF2 {
    matrix: Mat,
    rhs: BitVec,
}

impl LinSystemGF2 {
    pub fn new(matrix: Mat, rhs: BitVec) -> Result<LinSystemGF2> {
        if matrix.ring() != Ring::Z2 {
            return Err(Error::RingMismatch {
                left: matrix.ring().name(),
                right: "Z2".into(),
            });
        }
        if rhs.len() != matrix.rows() {
            return Err(Error::Shape(format!(
                "rhs has {} bits for {} equations",
                rhs.len(),
                matrix.rows()
            )));
        }
        Ok(LinSystemGF2 { matrix, rhs })
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn rhs(&self) -> &BitVec {
        &self.rhs
    }

    /// Checks `matrix * x == rhs` exactly.
    pub fn is_solution(&self, x: &BitVec) -> bool {
        if x.len() != self.matrix.cols() {
            return false;
        }
        (0..self.matrix.rows()).all(|r| {
            let dot = self
                .matrix
                .row_words(r)
                .iter()
                .zip(&x.words)
                .map(|(a, b)| (a & b).count_ones())
                .sum::<u32>();
            (dot % 2 == 1) == self.rhs.get(r)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Gf2Solution {
    Solution(BitVec),
    NoSolution,
}

impl Gf2Solution {
    pub fn solution(self) -> Option<BitVec> {
        match self {
            Gf2Solution::Solution(x) => Some(x),
            Gf2Solution::NoSolution => None,
        }
    }
}

/// Gaussian elimination over GF(2).
///
/// Columns are scanned left to right and the first remaining row with a one
/// in the current column becomes the pivot. Free variables are set to zero,
/// so the returned solution is a deterministic function of the system.
pub fn solve_gf2(sys: &LinSystemGF2) -> Gf2Solution {
    let rows = sys.matrix.rows();
    let cols = sys.matrix.cols();
    let wpr = cols.div_ceil(64).max(1);

    let mut a: Vec<u64> = Vec::with_capacity(rows * wpr);
    for r in 0..rows {
        a.extend_from_slice(sys.matrix.row_words(r));
    }
    let mut b: Vec<bool> = sys.rhs.to_bools();

    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut next = 0;
    for col in 0..cols {
        if next == rows {
            break;
        }
        let (w, bit) = (col / 64, 1u64 << (col % 64));
        let Some(found) = (next..rows).find(|&r| a[r * wpr + w] & bit != 0) else {
            continue;
        };
        if found != next {
            for k in 0..wpr {
                a.swap(found * wpr + k, next * wpr + k);
            }
            b.swap(found, next);
        }
        let (head, tail) = a.split_at_mut((next + 1) * wpr);
        let pivot_row = &head[next * wpr..];
        for (off, row) in tail.chunks_exact_mut(wpr).enumerate() {
            if row[w] & bit != 0 {
                for k in w..wpr {
                    row[k] ^= pivot_row[k];
                }
                b[next + 1 + off] ^= b[next];
            }
        }
        pivots.push((next, col));
        next += 1;
    }

    if b[next..].iter().any(|&x| x) {
        return Gf2Solution::NoSolution;
    }

    let mut x = BitVec::zeros(cols);
    for &(r, c) in pivots.iter().rev() {
        let row = &a[r * wpr..(r + 1) * wpr];
        let dot: u32 = row
            .iter()
            .zip(&x.words)
            .map(|(p, q)| (p & q).count_ones())
            .sum();
        x.set(c, b[r] ^ (dot % 2 == 1));
    }
    Gf2Solution::Solution(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn system(rows: usize, cols: usize, entries: &[i64], rhs: &[bool]) -> LinSystemGF2 {
        let m = Mat::from_i64s(Ring::Z2, rows, cols, entries).unwrap();
        LinSystemGF2::new(m, BitVec::from_bools(rhs)).unwrap()
    }

    #[test]
    fn identity_system() {
        let sys = system(2, 2, &[1, 0, 0, 1], &[true, true]);
        let x = solve_gf2(&sys).solution().unwrap();
        assert_eq!(x.to_bools(), vec![true, true]);
    }

    #[test]
    fn inconsistent_system() {
        let sys = system(2, 1, &[1, 1], &[true, false]);
        assert_eq!(solve_gf2(&sys), Gf2Solution::NoSolution);
    }

    #[test]
    fn free_variables_are_zero() {
        let sys = system(1, 2, &[1, 1], &[true]);
        let x = solve_gf2(&sys).solution().unwrap();
        assert_eq!(x.to_bools(), vec![true, false]);
    }

    #[test]
    fn rhs_length_checked() {
        let m = Mat::from_i64s(Ring::Z2, 2, 2, &[1, 0, 0, 1]).unwrap();
        assert!(LinSystemGF2::new(m, BitVec::zeros(3)).is_err());
        let m3 = Mat::from_i64s(Ring::Zp(3), 1, 1, &[1]).unwrap();
        assert!(LinSystemGF2::new(m3, BitVec::zeros(1)).is_err());
    }

    #[test]
    fn wide_system() {
        // x0 + x200 = 1, x200 = 1 over 201 unknowns.
        let mut m = Mat::zeros(Ring::Z2, 2, 201);
        m.set(0, 0, &crate::algebra::Elem::Int(1));
        m.set(0, 200, &crate::algebra::Elem::Int(1));
        m.set(1, 200, &crate::algebra::Elem::Int(1));
        let sys = LinSystemGF2::new(m, BitVec::from_bools(&[true, true])).unwrap();
        let x = solve_gf2(&sys).solution().unwrap();
        assert!(sys.is_solution(&x));
        assert!(!x.get(0) && x.get(200));
        assert_eq!(x.count_ones(), 1);
    }

    /// Exhaustive consistency check for tiny systems.
    fn brute_force_solvable(sys: &LinSystemGF2) -> bool {
        let n = sys.matrix().cols();
        (0u32..(1 << n)).any(|mask| {
            let x = BitVec::from_bools(&(0..n).map(|i| mask >> i & 1 == 1).collect::<Vec<_>>());
            sys.is_solution(&x)
        })
    }

    proptest! {
        #[test]
        fn solutions_satisfy_the_system(
            rows in 1usize..12,
            cols in 1usize..10,
            entries in proptest::collection::vec(0i64..2, 120),
            rhs in proptest::collection::vec(any::<bool>(), 12),
        ) {
            let sys = system(rows, cols, &entries[..rows * cols], &rhs[..rows]);
            match solve_gf2(&sys) {
                Gf2Solution::Solution(x) => prop_assert!(sys.is_solution(&x)),
                Gf2Solution::NoSolution => prop_assert!(!brute_force_solvable(&sys)),
            }
        }
    }
}
