//! Hensel lifting of schemes from Z2 to Z/2^l and rational reconstruction of
//! the lifted coefficients.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::algebra::{rat_reconstruct, solve_gf2, BitVec, Elem, Fraction, Gf2Solution, LinSystemGF2, Mat, Ring};
use crate::error::{Error, Result};
use crate::scheme::{Scheme, Triple};

pub const DEFAULT_TARGET_LEVEL: u32 = 32;

/// A scheme over `Z2k(level)` that verifies modulo `2^level`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftState {
    scheme: Scheme,
    level: u32,
    /// `history[i]` is whether the step from level `i + 1` was solvable.
    history: Vec<bool>,
}

impl LiftState {
    /// Starts from a verifying Z2 scheme at level 1.
    pub fn new(s: &Scheme) -> Result<LiftState> {
        if s.ring() != Ring::Z2 {
            return Err(Error::RingMismatch {
                left: s.ring().name(),
                right: "Z2".into(),
            });
        }
        s.verify().map_err(Error::NotVerified)?;
        Ok(LiftState {
            scheme: s.map_ring(Ring::Z2k(1))?,
            level: 1,
            history: Vec::new(),
        })
    }

    /// Resumes from a verifying scheme over `Z2k(l)`.
    pub fn from_modular(s: Scheme) -> Result<LiftState> {
        let Ring::Z2k(level) = s.ring() else {
            return Err(Error::UnsupportedRing(format!(
                "lifting resumes from Z2^k schemes, not {}",
                s.ring()
            )));
        };
        s.verify().map_err(Error::NotVerified)?;
        Ok(LiftState {
            scheme: s,
            level: level as u32,
            history: Vec::new(),
        })
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn history(&self) -> &[bool] {
        &self.history
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Lifted(LiftState),
    /// The linear system for the next bit has no solution.
    Unsolvable,
}

/// Coefficient layout: triple `t` owns columns `t*K .. (t+1)*K` with
/// `K = nm + mp + pn`, holding u, v, w in row-major order.
fn coefficients(s: &Scheme) -> Vec<u64> {
    let mut out = Vec::new();
    for t in s.triples() {
        for m in t.slots() {
            for r in 0..m.rows() {
                for c in 0..m.cols() {
                    out.push(m.get_u64(r, c));
                }
            }
        }
    }
    out
}

fn rebuild(s: &Scheme, ring: Ring, coeffs: &[Elem]) -> Scheme {
    let mut it = coeffs.iter();
    let triples = s
        .triples()
        .iter()
        .map(|t| {
            let slots = t.slots().clone().map(|m| {
                let mut out = Mat::zeros(ring, m.rows(), m.cols());
                for r in 0..m.rows() {
                    for c in 0..m.cols() {
                        out.set(r, c, it.next().expect("one coefficient per entry"));
                    }
                }
                out
            });
            Triple::from_slots(slots)
        })
        .collect();
    Scheme::new(s.format(), ring, triples).expect("shapes are copied from a valid scheme")
}

/// Brent residuals `sum_t u[a] v[b] w[c] - delta(a, b, c)` modulo 2^64, with
/// the equation `(a, b, c)` at index `(a * mp + b) * pn + c`.
fn residuals(s: &Scheme) -> Vec<u64> {
    let [n, m, p] = s.format().dims();
    let (nm, mp, pn) = (n * m, m * p, p * n);
    let mut res = vec![0u64; nm * mp * pn];
    let nz = |x: &Mat| -> Vec<(usize, u64)> {
        (0..x.rows())
            .flat_map(|r| (0..x.cols()).map(move |c| (r, c)))
            .enumerate()
            .map(|(i, (r, c))| (i, x.get_u64(r, c)))
            .filter(|&(_, v)| v != 0)
            .collect()
    };
    for t in s.triples() {
        let (us, vs, ws) = (nz(t.u()), nz(t.v()), nz(t.w()));
        for &(a, x) in &us {
            for &(b, y) in &vs {
                let xy = x.wrapping_mul(y);
                for &(c, z) in &ws {
                    let e = &mut res[(a * mp + b) * pn + c];
                    *e = e.wrapping_add(xy.wrapping_mul(z));
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..m {
            for k in 0..p {
                let e = &mut res[((i * m + j) * mp + j * p + k) * pn + k * n + i];
                *e = e.wrapping_sub(1);
            }
        }
    }
    res
}

/// Jacobian of the Brent system modulo 2 at `s`.
fn jacobian(s: &Scheme) -> Mat {
    let [n, m, p] = s.format().dims();
    let (nm, mp, pn) = (n * m, m * p, p * n);
    let k = nm + mp + pn;
    let mut jac = Mat::zeros(Ring::Z2, nm * mp * pn, s.rank() * k);
    let one = Elem::Int(1);
    let odd = |x: &Mat| -> Vec<usize> {
        (0..x.rows() * x.cols())
            .filter(|&i| x.get_u64(i / x.cols(), i % x.cols()) & 1 == 1)
            .collect()
    };
    for (t, tr) in s.triples().iter().enumerate() {
        let base = t * k;
        let (us, vs, ws) = (odd(tr.u()), odd(tr.v()), odd(tr.w()));
        for &b in &vs {
            for &c in &ws {
                for a in 0..nm {
                    jac.set((a * mp + b) * pn + c, base + a, &one);
                }
            }
        }
        for &a in &us {
            for &c in &ws {
                for b in 0..mp {
                    jac.set((a * mp + b) * pn + c, base + nm + b, &one);
                }
            }
        }
        for &a in &us {
            for &b in &vs {
                for c in 0..pn {
                    jac.set((a * mp + b) * pn + c, base + nm + mp + c, &one);
                }
            }
        }
    }
    jac
}

/// Raises the level by one. With `x` the current coefficients, the next ones
/// are `x + 2^l * d` where `d` solves `J d = residual / 2^l (mod 2)`; free
/// variables of the system are zero.
pub fn hensel_step(state: &LiftState) -> Result<StepOutcome> {
    let level = state.level;
    if level >= 64 {
        return Err(Error::OutOfRange("cannot lift beyond level 64".into()));
    }
    let s = &state.scheme;
    let rhs_bits: Vec<bool> = residuals(s)
        .into_iter()
        .map(|r| {
            debug_assert_eq!(r & ((1u64 << level) - 1), 0, "state verifies mod 2^level");
            (r >> level) & 1 == 1
        })
        .collect();
    let sys = LinSystemGF2::new(jacobian(s), BitVec::from_bools(&rhs_bits))?;
    let delta = match solve_gf2(&sys) {
        Gf2Solution::Solution(d) => d,
        Gf2Solution::NoSolution => return Ok(StepOutcome::Unsolvable),
    };
    let ring = Ring::Z2k(level as u8 + 1);
    let coeffs: Vec<Elem> = coefficients(s)
        .into_iter()
        .enumerate()
        .map(|(i, x)| Elem::Int(x | (delta.get(i) as u64) << level))
        .collect();
    let mut history = state.history.clone();
    history.push(true);
    Ok(StepOutcome::Lifted(LiftState {
        scheme: rebuild(s, ring, &coeffs),
        level: level + 1,
        history,
    }))
}

/// Entrywise reconstruction, or `None` if some entry has no legal fraction.
fn reconstruct(state: &LiftState) -> Result<Option<Vec<Fraction>>> {
    coefficients(&state.scheme)
        .into_iter()
        .map(|x| rat_reconstruct(x, state.level))
        .collect()
}

fn rational_scheme(template: &Scheme, fracs: &[Fraction]) -> Scheme {
    let coeffs: Vec<Elem> = fracs
        .iter()
        .map(|f| Elem::Rat(BigRational::new(BigInt::from(f.num), BigInt::from(f.den))))
        .collect();
    rebuild(template, Ring::Q, &coeffs)
}

fn prime_factors(mut x: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= x {
        if x % d == 0 {
            out.push(d);
            while x % d == 0 {
                x /= d;
            }
        }
        d += 1;
    }
    if x > 1 {
        out.push(x);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftReport {
    pub levels_reached: u32,
    pub solvable_per_level: Vec<bool>,
    pub reconstructed: bool,
    /// Distinct primes dividing some denominator of the rational scheme.
    pub denominator_primes: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LiftOutcome {
    /// Verifies exactly over Q.
    Rational(Scheme),
    /// Lifted to the target level without an exactly verifying reconstruction.
    Partial { level: u32, modular: Scheme },
    /// The step from `level` to `level + 1` has no solution.
    Unsolvable { level: u32, modular: Scheme },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftResult {
    pub outcome: LiftOutcome,
    pub report: LiftReport,
}

/// Lifts `s` towards `target_level`, reconstructing at every level. Stops
/// early once the reconstructions at `l - 2` and `l` agree and verify over Q.
pub fn lift_and_reconstruct(s: &Scheme, target_level: u32) -> Result<LiftResult> {
    if !(1..=64).contains(&target_level) {
        return Err(Error::OutOfRange(format!("target level {target_level} outside 1..=64")));
    }
    let mut state = LiftState::new(s)?;
    let mut seen: BTreeMap<u32, Vec<Fraction>> = BTreeMap::new();
    let report = |state: &LiftState, q: Option<&Scheme>, stuck: bool| {
        let mut primes: Vec<u64> = Vec::new();
        if let Some(q) = q {
            for t in q.triples() {
                for m in t.slots() {
                    for (_, _, e) in m.nonzeros() {
                        let Elem::Rat(r) = e else { unreachable!() };
                        let den: u64 = r.denom().try_into().expect("denominators fit reconstruction bounds");
                        primes.extend(prime_factors(den));
                    }
                }
            }
        }
        primes.sort_unstable();
        primes.dedup();
        let mut solvable = state.history.clone();
        if stuck {
            solvable.push(false);
        }
        LiftReport {
            levels_reached: state.level,
            solvable_per_level: solvable,
            reconstructed: q.is_some(),
            denominator_primes: primes,
        }
    };
    loop {
        let level = state.level;
        if let Some(fracs) = reconstruct(&state)? {
            let stable = level >= 3 && seen.get(&(level - 2)) == Some(&fracs);
            if stable || level == target_level {
                let q = rational_scheme(s, &fracs);
                if q.is_verified() {
                    return Ok(LiftResult {
                        report: report(&state, Some(&q), false),
                        outcome: LiftOutcome::Rational(q),
                    });
                }
            }
            seen.insert(level, fracs);
        }
        if level == target_level {
            return Ok(LiftResult {
                report: report(&state, None, false),
                outcome: LiftOutcome::Partial {
                    level,
                    modular: state.scheme,
                },
            });
        }
        match hensel_step(&state)? {
            StepOutcome::Lifted(next) => state = next,
            StepOutcome::Unsolvable => {
                return Ok(LiftResult {
                    report: report(&state, None, true),
                    outcome: LiftOutcome::Unsolvable {
                        level,
                        modular: state.scheme,
                    },
                })
            }
        }
    }
}

/// Tries each scheme in order and returns the first rational result with its
/// index, or the last failure.
pub fn lift_first(pool: &[Scheme], target_level: u32) -> Result<Option<(usize, LiftResult)>> {
    let mut last = None;
    for (i, s) in pool.iter().enumerate() {
        let r = lift_and_reconstruct(s, target_level)?;
        let done = matches!(r.outcome, LiftOutcome::Rational(_));
        last = Some((i, r));
        if done {
            break;
        }
    }
    Ok(last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moves::{apply_flip, apply_plus, apply_reduction, find_reduction, random_flip, random_plus_move};
    use crate::scheme::{strassen, Format};
    use num_traits::{One, Signed, Zero};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lift_to(s: &Scheme, level: u32) -> LiftState {
        let mut st = LiftState::new(s).unwrap();
        while st.level() < level {
            match hensel_step(&st).unwrap() {
                StepOutcome::Lifted(next) => st = next,
                StepOutcome::Unsolvable => panic!("unsolvable at {}", st.level()),
            }
        }
        st
    }

    #[test]
    fn every_step_verifies_and_reduces_to_the_start() {
        let s = strassen(Ring::Z2);
        let mut st = LiftState::new(&s).unwrap();
        for l in 1..16 {
            let StepOutcome::Lifted(next) = hensel_step(&st).unwrap() else {
                panic!("unsolvable at {l}");
            };
            assert_eq!(next.level(), l + 1);
            assert_eq!(next.scheme().ring(), Ring::Z2k(l as u8 + 1));
            assert!(next.scheme().is_verified());
            assert_eq!(next.scheme().map_ring(Ring::Z2).unwrap(), s);
            st = next;
        }
        assert_eq!(st.history(), vec![true; 15].as_slice());
    }

    #[test]
    fn standard_needs_no_correction() {
        let f = Format::new(2, 3, 2).unwrap();
        let s = Scheme::standard(f, Ring::Z2);
        let st = lift_to(&s, 10);
        assert_eq!(st.scheme(), &Scheme::standard(f, Ring::Z2k(10)));
    }

    #[test]
    fn strassen_reconstructs_to_signed_units() {
        let r = lift_and_reconstruct(&strassen(Ring::Z2), 16).unwrap();
        let LiftOutcome::Rational(q) = r.outcome else {
            panic!("no reconstruction: {:?}", r.report);
        };
        assert!(q.is_verified());
        for t in q.triples() {
            for m in t.slots() {
                for (_, _, e) in m.nonzeros() {
                    let Elem::Rat(x) = e else { unreachable!() };
                    assert!(x.abs().is_one(), "{x}");
                }
            }
        }
        assert!(r.report.reconstructed);
        assert!(r.report.denominator_primes.is_empty());
        assert!(r.report.levels_reached <= 16);
    }

    #[test]
    fn standard_333_reconstructs_to_itself() {
        let f = Format::new(3, 3, 3).unwrap();
        let r = lift_and_reconstruct(&Scheme::standard(f, Ring::Z2), DEFAULT_TARGET_LEVEL).unwrap();
        assert_eq!(r.outcome, LiftOutcome::Rational(Scheme::standard(f, Ring::Q)));
        assert_eq!(r.report.levels_reached, 3);
    }

    #[test]
    fn level_one_target_is_partial_or_rational() {
        let r = lift_and_reconstruct(&strassen(Ring::Z2), 1).unwrap();
        assert_eq!(r.report.levels_reached, 1);
        assert!(matches!(r.outcome, LiftOutcome::Partial { level: 1, .. }));
        assert!(lift_and_reconstruct(&strassen(Ring::Z2), 65).is_err());
    }

    fn walk_states(start: &Scheme, steps: usize, seed: u64) -> Vec<Scheme> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = start.clone();
        let mut out = Vec::new();
        for _ in 0..steps {
            if rng.gen_bool(0.05) {
                if let Some(mv) = random_plus_move(&s, &mut rng) {
                    s = apply_plus(&s, &mv).unwrap();
                }
            } else if let Some(mv) = random_flip(&s, &mut rng) {
                s = apply_flip(&s, &mv).unwrap();
            }
            if let Some(r) = find_reduction(&s) {
                s = apply_reduction(&s, &r).unwrap().scheme;
            }
            out.push(s.clone());
        }
        out
    }

    /// Column `i` of the Jacobian is the parity of the residual change when
    /// coefficient `i` grows by `2^level`, which is exact because residuals
    /// are linear in each single coefficient.
    #[test]
    fn jacobian_matches_finite_differences() {
        let f = Format::new(2, 2, 3).unwrap();
        for s in walk_states(&Scheme::standard(f, Ring::Z2), 40, 5).iter().step_by(8) {
            let st = lift_to_or_stop(s, 2);
            let level = st.level();
            let base = residuals(st.scheme());
            let jac = jacobian(st.scheme());
            let coeffs = coefficients(st.scheme());
            let ring = Ring::Z2k(level as u8 + 1);
            let modulus = 1u64 << (level + 1);
            for i in 0..coeffs.len() {
                let bumped: Vec<Elem> = coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, &x)| Elem::Int(if k == i { (x + (1 << level)) % modulus } else { x }))
                    .collect();
                let r2 = residuals(&rebuild(st.scheme(), ring, &bumped));
                for (row, (a, b)) in base.iter().zip(&r2).enumerate() {
                    let diff = (b.wrapping_sub(*a) % modulus) >> level;
                    assert_eq!(diff, jac.get_u64(row, i), "row {row} column {i}");
                }
            }
        }
    }

    fn lift_to_or_stop(s: &Scheme, level: u32) -> LiftState {
        let mut st = LiftState::new(s).unwrap();
        while st.level() < level {
            match hensel_step(&st).unwrap() {
                StepOutcome::Lifted(next) => st = next,
                StepOutcome::Unsolvable => break,
            }
        }
        st
    }

    /// A walk near the (2,2,2) schemes of rank 7 and 8 eventually hits a
    /// scheme whose lifting system is inconsistent.
    #[test]
    fn perturbed_scheme_hits_an_unsolvable_system() {
        let f = Format::new(2, 2, 2).unwrap();
        let states = walk_states(&Scheme::standard(f, Ring::Z2), 200, 1);
        let (s, r) = states
            .iter()
            .find_map(|s| {
                let r = lift_and_reconstruct(s, 8).unwrap();
                matches!(r.outcome, LiftOutcome::Unsolvable { .. }).then_some((s, r))
            })
            .expect("an unsolvable perturbation");
        let LiftOutcome::Unsolvable { level, modular } = r.outcome else { unreachable!() };
        assert!(modular.is_verified());
        assert_eq!(modular.map_ring(Ring::Z2).unwrap(), *s);
        let st = LiftState::from_modular(modular).unwrap();
        assert_eq!(hensel_step(&st).unwrap(), StepOutcome::Unsolvable);
        assert_eq!(r.report.levels_reached, level);
        assert_eq!(r.report.solvable_per_level.len(), level as usize);
        assert_eq!(r.report.solvable_per_level.last(), Some(&false));
        assert!(!r.report.reconstructed);
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn qmul(a: &Mat, b: &Mat) -> Mat {
        let mut out = Mat::zeros(Ring::Q, a.rows(), b.cols());
        for r in 0..a.rows() {
            for c in 0..b.cols() {
                let mut acc = BigRational::zero();
                for k in 0..a.cols() {
                    if let (Elem::Rat(x), Elem::Rat(y)) = (a.get(r, k), b.get(k, c)) {
                        acc += x * y;
                    }
                }
                out.set(r, c, &Elem::Rat(acc));
            }
        }
        out
    }

    fn qmat(rows: usize, entries: &[BigRational]) -> Mat {
        let e: Vec<Elem> = entries.iter().cloned().map(Elem::Rat).collect();
        Mat::from_elems(Ring::Q, rows, entries.len() / rows, &e).unwrap()
    }

    /// Strassen conjugated by matrices with inverse in Z[1/3] reduces mod 2,
    /// and the reconstruction verifies with 3-smooth denominators.
    #[test]
    fn conjugated_strassen_round_trips() {
        let a = qmat(2, &[q(1, 1), q(1, 1), q(1, 1), q(-2, 1)]);
        let a_inv = qmat(2, &[q(2, 3), q(1, 3), q(1, 3), q(-1, 3)]);
        let b = qmat(2, &[q(1, 1), q(0, 1), q(1, 1), q(1, 1)]);
        let b_inv = qmat(2, &[q(1, 1), q(0, 1), q(-1, 1), q(1, 1)]);
        let s = strassen(Ring::Q);
        let triples: Vec<Triple> = s
            .triples()
            .iter()
            .map(|t| {
                Triple::new(
                    qmul(&qmul(&a, t.u()), &b_inv),
                    qmul(&qmul(&b, t.v()), &a_inv),
                    qmul(&qmul(&a, t.w()), &a_inv),
                )
            })
            .collect();
        let conj = Scheme::new(s.format(), Ring::Q, triples).unwrap();
        assert!(conj.is_verified());
        let z2 = conj.map_ring(Ring::Z2).unwrap();
        assert!(z2.is_verified());
        let r = lift_and_reconstruct(&z2, DEFAULT_TARGET_LEVEL).unwrap();
        let LiftOutcome::Rational(out) = r.outcome else {
            panic!("no reconstruction: {:?}", r.report);
        };
        assert!(out.is_verified());
        assert!(r.report.denominator_primes.iter().all(|&p| p == 3));
        assert_eq!(out.map_ring(Ring::Z2).unwrap(), z2);
    }
}

