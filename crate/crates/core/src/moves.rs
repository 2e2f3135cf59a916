//! Flip, reduction and plus edges inside one format.
//!
//! Every operation here is pure: it takes a scheme by reference and returns a
//! new one. The random walker in [`crate::search`] keeps its own in-place
//! state and uses these only for cross-checking.

use rand::Rng;
use rustc_hash::FxHashMap;

use crate::algebra::{Elem, Mat, Ring};
use crate::error::{Error, Result};
use crate::scheme::{Scheme, Slot, Triple};

/// `triple_i[target] += λ·triple_j[target]` and
/// `triple_j[rest] -= λ·triple_i[rest]`, where `triple_i[shared] = triple_j[shared]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FlipMove {
    pub i: usize,
    pub j: usize,
    pub shared: Slot,
    pub target: Slot,
    pub lambda: Elem,
}

impl FlipMove {
    pub fn rest(&self) -> Slot {
        Slot::remaining(self.shared, self.target)
    }

    /// The move undoing this one.
    pub fn inverse(&self, ring: Ring) -> FlipMove {
        FlipMove {
            lambda: ring.elem_neg(&self.lambda),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ReductionMove {
    /// Drop a triple with a zero slot.
    ZeroTriple(usize),
    /// Two triples agreeing in `shared` collapse into one with `free` summed.
    MergePair {
        i: usize,
        j: usize,
        shared: [Slot; 2],
        free: Slot,
    },
}

/// Split triple `index` into copies holding `x` and `old - x` in `slot`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PlusMove {
    pub index: usize,
    pub slot: Slot,
    pub x: Mat,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reduced {
    pub scheme: Scheme,
    /// The merged free slot summed to zero, so both triples were dropped.
    pub merged_to_zero: bool,
}

impl Reduced {
    pub fn rank_drop(&self) -> usize {
        if self.merged_to_zero {
            2
        } else {
            1
        }
    }
}

/// Scalars used for flips: all nonzero residues over a prime field, `±1`
/// otherwise.
pub fn flip_scalars(ring: Ring) -> Vec<Elem> {
    match ring {
        Ring::Z2 => vec![Elem::Int(1)],
        Ring::Zp(p) => (1..p as u64).map(Elem::Int).collect(),
        _ => vec![ring.one(), ring.elem_neg(&ring.one())],
    }
}

fn random_scalar<R: Rng + ?Sized>(ring: Ring, rng: &mut R) -> Elem {
    match ring {
        Ring::Z2 => Elem::Int(1),
        Ring::Zp(p) => Elem::Int(rng.gen_range(1..p as u64)),
        _ if rng.gen() => ring.one(),
        _ => ring.elem_neg(&ring.one()),
    }
}

fn check_flip(s: &Scheme, mv: &FlipMove) -> Result<()> {
    let r = s.rank();
    if mv.i >= r || mv.j >= r || mv.i == mv.j {
        return Err(Error::RejectedMove(format!(
            "flip needs distinct indices below {r}, got {} and {}",
            mv.i, mv.j
        )));
    }
    if mv.shared == mv.target {
        return Err(Error::RejectedMove("shared and target slot coincide".into()));
    }
    if mv.lambda.is_zero() {
        return Err(Error::RejectedMove("flip scalar is zero".into()));
    }
    s.ring()
        .check_elem(&mv.lambda)
        .map_err(|e| Error::RejectedMove(e.to_string()))?;
    let t = s.triples();
    if t[mv.i].slot(mv.shared) != t[mv.j].slot(mv.shared) {
        return Err(Error::RejectedMove(format!(
            "triples {} and {} differ in slot {:?}",
            mv.i, mv.j, mv.shared
        )));
    }
    Ok(())
}

pub fn apply_flip(s: &Scheme, mv: &FlipMove) -> Result<Scheme> {
    check_flip(s, mv)?;
    let ring = s.ring();
    let mut out = s.clone();
    let triples = out.triples_mut();
    let rest = mv.rest();
    let jt = triples[mv.j].slot(mv.target).clone();
    let iu = triples[mv.i].slot(rest).clone();
    triples[mv.i].slot_mut(mv.target).add_scaled_assign(&mv.lambda, &jt)?;
    triples[mv.j]
        .slot_mut(rest)
        .add_scaled_assign(&ring.elem_neg(&mv.lambda), &iu)?;
    Ok(out)
}

/// Triples grouped by equal content in `slot`, groups ordered by first member.
fn slot_groups(s: &Scheme, slot: Slot) -> Vec<Vec<usize>> {
    let mut index: FxHashMap<&Mat, usize> = FxHashMap::default();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (l, t) in s.triples().iter().enumerate() {
        let g = *index.entry(t.slot(slot)).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(l);
    }
    groups
}

/// Every valid flip, ordered by shared slot, group, `(i, j)`, target, scalar.
pub fn enumerate_flips(s: &Scheme) -> impl Iterator<Item = FlipMove> {
    let scalars = flip_scalars(s.ring());
    let mut out = Vec::new();
    for shared in Slot::ALL {
        for g in slot_groups(s, shared) {
            for &i in &g {
                for &j in &g {
                    if i == j {
                        continue;
                    }
                    for target in Slot::ALL {
                        if target == shared {
                            continue;
                        }
                        for lambda in &scalars {
                            out.push(FlipMove {
                                i,
                                j,
                                shared,
                                target,
                                lambda: lambda.clone(),
                            });
                        }
                    }
                }
            }
        }
    }
    out.into_iter()
}

/// A uniformly random structural flip (pair, shared slot, target) with a
/// uniformly random nonzero scalar, or `None` when no two triples share a slot.
pub fn random_flip<R: Rng + ?Sized>(s: &Scheme, rng: &mut R) -> Option<FlipMove> {
    let mut pairs: Vec<(usize, usize, Slot)> = Vec::new();
    for shared in Slot::ALL {
        for g in slot_groups(s, shared) {
            for &i in &g {
                for &j in &g {
                    if i != j {
                        pairs.push((i, j, shared));
                    }
                }
            }
        }
    }
    if pairs.is_empty() {
        return None;
    }
    let (i, j, shared) = pairs[rng.gen_range(0..pairs.len())];
    let others: Vec<Slot> = Slot::ALL.into_iter().filter(|&t| t != shared).collect();
    Some(FlipMove {
        i,
        j,
        shared,
        target: others[rng.gen_range(0..2)],
        lambda: random_scalar(s.ring(), rng),
    })
}

/// The pair of equal slots of two triples, if at least two agree.
fn merge_slots(a: &Triple, b: &Triple) -> Option<([Slot; 2], Slot)> {
    let eq = Slot::ALL.map(|s| a.slot(s) == b.slot(s));
    match eq {
        [true, true, _] => Some(([Slot::U, Slot::V], Slot::W)),
        [true, false, true] => Some(([Slot::U, Slot::W], Slot::V)),
        [false, true, true] => Some(([Slot::V, Slot::W], Slot::U)),
        _ => None,
    }
}

/// The first available reduction: zero-slot triples by index, then mergeable
/// pairs in lexicographic `(i, j)` order.
pub fn find_reduction(s: &Scheme) -> Option<ReductionMove> {
    let t = s.triples();
    if let Some(l) = t.iter().position(Triple::has_zero_slot) {
        return Some(ReductionMove::ZeroTriple(l));
    }
    let hashes: Vec<[u64; 3]> = t.iter().map(|x| x.slots().each_ref().map(Mat::hash64)).collect();
    for i in 0..t.len() {
        for j in i + 1..t.len() {
            let agree = (0..3).filter(|&k| hashes[i][k] == hashes[j][k]).count();
            if agree < 2 {
                continue;
            }
            if let Some((shared, free)) = merge_slots(&t[i], &t[j]) {
                return Some(ReductionMove::MergePair { i, j, shared, free });
            }
        }
    }
    None
}

pub fn apply_reduction(s: &Scheme, mv: &ReductionMove) -> Result<Reduced> {
    let r = s.rank();
    let mut out = s.clone();
    match *mv {
        ReductionMove::ZeroTriple(l) => {
            if l >= r || !s.triples()[l].has_zero_slot() {
                return Err(Error::RejectedMove(format!("triple {l} has no zero slot")));
            }
            out.triples_mut().remove(l);
            Ok(Reduced {
                scheme: out,
                merged_to_zero: false,
            })
        }
        ReductionMove::MergePair { i, j, shared, free } => {
            let distinct = shared[0] != shared[1] && !shared.contains(&free);
            if i >= r || j >= r || i == j || !distinct {
                return Err(Error::RejectedMove(format!("invalid merge {mv:?}")));
            }
            let t = s.triples();
            if shared.iter().any(|&k| t[i].slot(k) != t[j].slot(k)) {
                return Err(Error::RejectedMove(format!(
                    "triples {i} and {j} differ in a shared slot"
                )));
            }
            let triples = out.triples_mut();
            let jf = triples[j].slot(free).clone();
            triples[i].slot_mut(free).add_scaled_assign(&s.ring().one(), &jf)?;
            let merged_to_zero = triples[i].slot(free).is_zero();
            let (lo, hi) = (i.min(j), i.max(j));
            if merged_to_zero {
                triples.remove(hi);
                triples.remove(lo);
            } else {
                triples.remove(j);
            }
            Ok(Reduced {
                scheme: out,
                merged_to_zero,
            })
        }
    }
}

pub fn apply_plus(s: &Scheme, mv: &PlusMove) -> Result<Scheme> {
    if mv.index >= s.rank() {
        return Err(Error::RejectedMove(format!("no triple {}", mv.index)));
    }
    let old = s.triples()[mv.index].slot(mv.slot);
    if mv.x.ring() != s.ring() || mv.x.shape() != old.shape() {
        return Err(Error::RejectedMove("split matrix has the wrong ring or shape".into()));
    }
    if mv.x.is_zero() || mv.x == *old {
        return Err(Error::RejectedMove(
            "split matrix must be nonzero and differ from the slot".into(),
        ));
    }
    let rest = old.sub(&mv.x)?;
    let mut out = s.clone();
    let triples = out.triples_mut();
    let mut second = triples[mv.index].clone();
    *second.slot_mut(mv.slot) = rest;
    *triples[mv.index].slot_mut(mv.slot) = mv.x.clone();
    triples.push(second);
    Ok(out)
}

/// Uniform over nonzero matrices of the given shape with at most two nonzero
/// entries.
pub(crate) fn random_sparse<R: Rng + ?Sized>(
    ring: Ring,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Mat {
    let cells = (rows * cols) as f64;
    let units = match ring.modulus() {
        Some(q) => (q - 1) as f64,
        None => 2.0,
    };
    let one = cells * units;
    let two = cells * (cells - 1.0) / 2.0 * units * units;
    let k = if rng.gen::<f64>() * (one + two) < one { 1 } else { 2 };
    let mut m = Mat::zeros(ring, rows, cols);
    let first = rng.gen_range(0..rows * cols);
    let mut picked = vec![first];
    if k == 2 {
        let mut second = rng.gen_range(0..rows * cols - 1);
        if second >= first {
            second += 1;
        }
        picked.push(second);
    }
    for c in picked {
        let e = match ring {
            Ring::Q => random_scalar(ring, rng),
            Ring::Z2 => Elem::Int(1),
            _ => Elem::Int(rng.gen_range(1..ring.modulus().unwrap() as u64)),
        };
        m.set(c / cols, c % cols, &e);
    }
    m
}

/// A random valid split: uniform triple and slot, `x` uniform over sparse
/// nonzero matrices. `None` if no valid split was found after a bounded
/// number of draws.
pub fn random_plus_move<R: Rng + ?Sized>(s: &Scheme, rng: &mut R) -> Option<PlusMove> {
    if s.rank() == 0 {
        return None;
    }
    for _ in 0..64 {
        let index = rng.gen_range(0..s.rank());
        let slot = Slot::from_index(rng.gen_range(0..3));
        let (rows, cols) = s.format().slot_shape(slot);
        let x = random_sparse(s.ring(), rows, cols, rng);
        if x != *s.triples()[index].slot(slot) {
            return Some(PlusMove { index, slot, x });
        }
    }
    None
}
