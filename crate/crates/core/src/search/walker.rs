//! In-place random walk state.
//!
//! Each slot keeps an index from slot value to the group of triples holding
//! that value. Flips only ever touch two (triple, slot) cells, so the index is
//! patched incrementally and the reduction check after a flip only inspects
//! the two groups that gained a member. Reductions and plus moves rebuild the
//! index from scratch.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::algebra::{Elem, Mat, Ring};
use crate::scheme::{Format, Scheme, Slot, Triple};

/// A slot value the walker can add, compare and hash.
pub(crate) trait SlotValue: Clone + PartialEq + Send + Sync {
    fn from_mat(m: &Mat) -> Self;
    fn to_mat(&self, ring: Ring, rows: usize, cols: usize) -> Mat;
    fn key(&self) -> u64;
    fn is_zero(&self) -> bool;
    /// `self += lambda * other` with `lambda` a canonical residue.
    fn add_scaled(&mut self, lambda: u64, other: &Self);
    /// Key width when keys are exact and small enough to index a table.
    fn direct_bits(_rows: usize, _cols: usize) -> Option<u32> {
        None
    }
}

/// Slots with at most this many entries use a direct-addressed key table.
const DIRECT_MAX_BITS: usize = 16;

/// A Z2 matrix with at most 64 entries, bit `r * cols + c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Bits(u64);

impl SlotValue for Bits {
    fn from_mat(m: &Mat) -> Self {
        Bits(m.pack_u64().expect("Z2 slot with at most 64 entries"))
    }

    fn to_mat(&self, _ring: Ring, rows: usize, cols: usize) -> Mat {
        Mat::unpack_u64(rows, cols, self.0)
    }

    #[inline]
    fn key(&self) -> u64 {
        self.0
    }

    #[inline]
    fn is_zero(&self) -> bool {
        self.0 == 0
    }

    #[inline]
    fn add_scaled(&mut self, lambda: u64, other: &Self) {
        if lambda & 1 == 1 {
            self.0 ^= other.0;
        }
    }

    fn direct_bits(rows: usize, cols: usize) -> Option<u32> {
        (rows * cols <= DIRECT_MAX_BITS).then_some((rows * cols) as u32)
    }
}

impl SlotValue for Mat {
    fn from_mat(m: &Mat) -> Self {
        m.clone()
    }

    fn to_mat(&self, _ring: Ring, _rows: usize, _cols: usize) -> Mat {
        self.clone()
    }

    fn key(&self) -> u64 {
        self.hash64()
    }

    fn is_zero(&self) -> bool {
        Mat::is_zero(self)
    }

    fn add_scaled(&mut self, lambda: u64, other: &Self) {
        self.add_scaled_assign(&Elem::Int(lambda), other)
            .expect("walker slots share ring and shape");
    }
}

const NONE: u32 = u32::MAX;

struct Group<V> {
    value: V,
    members: SmallVec<[u32; 4]>,
    /// Position in `SlotIndex::multi`, or `NONE` while the group has < 2 members.
    multi_pos: u32,
    /// Next group whose value has the same key.
    next: u32,
}

/// Groups of triples with equal value in one slot.
struct SlotIndex<V> {
    /// Key to the first group of a chain of groups sharing that key.
    map: FxHashMap<u64, u32>,
    /// Replaces `map` for exact keys below `2^bits`.
    direct: Option<Vec<u32>>,
    groups: Vec<Group<V>>,
    free: Vec<u32>,
    /// Groups with at least two members.
    multi: Vec<u32>,
}

impl<V: SlotValue> SlotIndex<V> {
    fn new(direct_bits: Option<u32>) -> Self {
        SlotIndex {
            map: FxHashMap::default(),
            direct: direct_bits.map(|b| vec![NONE; 1 << b]),
            groups: Vec::new(),
            free: Vec::new(),
            multi: Vec::new(),
        }
    }

    fn clear(&mut self) {
        if let Some(t) = &mut self.direct {
            for g in &self.groups {
                if !g.members.is_empty() {
                    t[g.value.key() as usize] = NONE;
                }
            }
        }
        self.map.clear();
        self.groups.clear();
        self.free.clear();
        self.multi.clear();
    }

    #[inline]
    fn head(&self, key: u64) -> u32 {
        match &self.direct {
            Some(t) => t[key as usize],
            None => self.map.get(&key).copied().unwrap_or(NONE),
        }
    }

    #[inline]
    fn set_head(&mut self, key: u64, g: u32) {
        match &mut self.direct {
            Some(t) => t[key as usize] = g,
            None if g == NONE => {
                self.map.remove(&key);
            }
            None => {
                self.map.insert(key, g);
            }
        }
    }

    /// Adds triple `l` with value `v`; returns its group and the group size
    /// before insertion.
    fn insert(&mut self, l: u32, v: &V) -> (u32, usize) {
        let key = v.key();
        let head = self.head(key);
        let mut g = head;
        while g != NONE && self.groups[g as usize].value != *v {
            g = self.groups[g as usize].next;
        }
        if g == NONE {
            let group = Group {
                value: v.clone(),
                members: SmallVec::new(),
                multi_pos: NONE,
                next: head,
            };
            g = match self.free.pop() {
                Some(g) => {
                    self.groups[g as usize] = group;
                    g
                }
                None => {
                    self.groups.push(group);
                    (self.groups.len() - 1) as u32
                }
            };
            self.set_head(key, g);
        }
        let group = &mut self.groups[g as usize];
        group.members.push(l);
        let before = group.members.len() - 1;
        if before == 1 {
            group.multi_pos = self.multi.len() as u32;
            self.multi.push(g);
        }
        (g, before)
    }

    /// Removes triple `l` from group `g`; returns the group size before removal.
    fn remove(&mut self, g: u32, l: u32) -> usize {
        let group = &mut self.groups[g as usize];
        let pos = group.members.iter().position(|&x| x == l).expect("member of its group");
        group.members.swap_remove(pos);
        let after = group.members.len();
        if after == 1 {
            let pos = group.multi_pos as usize;
            group.multi_pos = NONE;
            self.multi.swap_remove(pos);
            if let Some(&moved) = self.multi.get(pos) {
                self.groups[moved as usize].multi_pos = pos as u32;
            }
        } else if after == 0 {
            let next = group.next;
            let key = group.value.key();
            let head = self.head(key);
            if head == g {
                self.set_head(key, next);
            } else {
                let mut prev = head;
                while self.groups[prev as usize].next != g {
                    prev = self.groups[prev as usize].next;
                }
                self.groups[prev as usize].next = next;
            }
            self.free.push(g);
        }
        after + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Red {
    Zero(usize),
    Merge { i: usize, j: usize, free: usize },
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Flip {
    pub i: usize,
    pub j: usize,
    pub shared: usize,
    pub target: usize,
    pub lambda: u64,
}

fn pair_mut<T>(v: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    debug_assert_ne!(a, b);
    if a < b {
        let (lo, hi) = v.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = v.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}

/// Slot orders `(s1, s2, s3)` for plus moves.
const ORDERS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

pub(crate) struct Engine<V> {
    ring: Ring,
    format: Format,
    /// `p - 1` for Zp, 1 for Z2.
    minus_one: u64,
    triples: Vec<[V; 3]>,
    gid: Vec<[u32; 3]>,
    index: [SlotIndex<V>; 3],
    /// Ordered pairs sharing a slot, summed over slots: `Σ k(k-1)`.
    pairs: u64,
    slot_pairs: [u64; 3],
}

impl<V: SlotValue> Engine<V> {
    pub fn new(s: &Scheme) -> Self {
        let ring = s.ring();
        let minus_one = (ring.modulus().expect("modular ring") - 1) as u64;
        let triples = s
            .triples()
            .iter()
            .map(|t| t.slots().each_ref().map(V::from_mat))
            .collect();
        let mut e = Engine {
            ring,
            format: s.format(),
            minus_one,
            triples,
            gid: Vec::new(),
            index: Slot::ALL.map(|x| {
                let (rows, cols) = s.format().slot_shape(x);
                SlotIndex::new(V::direct_bits(rows, cols))
            }),
            pairs: 0,
            slot_pairs: [0; 3],
        };
        e.rebuild();
        e
    }

    pub fn rank(&self) -> usize {
        self.triples.len()
    }

    pub fn has_flips(&self) -> bool {
        self.pairs > 0
    }

    pub fn rebuild(&mut self) {
        for ix in &mut self.index {
            ix.clear();
        }
        self.pairs = 0;
        self.slot_pairs = [0; 3];
        self.gid.clear();
        self.gid.resize(self.triples.len(), [NONE; 3]);
        for l in 0..self.triples.len() {
            for s in 0..3 {
                self.attach(l, s);
            }
        }
    }

    #[inline]
    fn attach(&mut self, l: usize, s: usize) {
        let (g, before) = self.index[s].insert(l as u32, &self.triples[l][s]);
        self.gid[l][s] = g;
        self.pairs += 2 * before as u64;
        self.slot_pairs[s] += 2 * before as u64;
    }

    #[inline]
    fn detach(&mut self, l: usize, s: usize) {
        let before = self.index[s].remove(self.gid[l][s], l as u32);
        self.pairs -= 2 * (before as u64 - 1);
        self.slot_pairs[s] -= 2 * (before as u64 - 1);
    }

    fn neg(&self, x: u64) -> u64 {
        self.ring.neg(x)
    }

    /// A uniformly random flip, or `None` if no two triples share a slot.
    pub fn sample_flip(&self, rng: &mut ChaCha8Rng) -> Option<Flip> {
        if self.pairs == 0 {
            return None;
        }
        let r = rng.gen_range(0..2 * self.pairs);
        let target_bit = (r & 1) as usize;
        let mut x = r >> 1;
        for (s, ix) in self.index.iter().enumerate() {
            if x >= self.slot_pairs[s] {
                x -= self.slot_pairs[s];
                continue;
            }
            for &g in &ix.multi {
                let m = &ix.groups[g as usize].members;
                let k = m.len() as u64;
                let c = k * (k - 1);
                if x < c {
                    let a = x / (k - 1);
                    let mut b = x % (k - 1);
                    if b >= a {
                        b += 1;
                    }
                    let others = [[1, 2], [0, 2], [0, 1]][s];
                    let lambda = match self.ring {
                        Ring::Zp(p) => rng.gen_range(1..p as u64),
                        _ => 1,
                    };
                    return Some(Flip {
                        i: m[a as usize] as usize,
                        j: m[b as usize] as usize,
                        shared: s,
                        target: others[target_bit],
                        lambda,
                    });
                }
                x -= c;
            }
        }
        unreachable!("pair count matches groups")
    }

    /// Applies a flip and returns a reduction it enabled, if any.
    pub fn flip(&mut self, f: Flip) -> Option<Red> {
        let Flip {
            i,
            j,
            shared: s,
            target: t,
            lambda,
        } = f;
        let u = 3 - s - t;
        let neg_lambda = self.neg(lambda);

        self.detach(i, t);
        {
            let (ti, tj) = pair_mut(&mut self.triples, i, j);
            ti[t].add_scaled(lambda, &tj[t]);
        }
        self.attach(i, t);

        self.detach(j, u);
        {
            let (tj, ti) = pair_mut(&mut self.triples, j, i);
            tj[u].add_scaled(neg_lambda, &ti[u]);
        }
        self.attach(j, u);

        self.local_reduction(i, t, j, u)
    }

    /// Reductions involving `(i, slot a)` or `(j, slot b)`, the only cells a
    /// flip changes.
    fn local_reduction(&self, i: usize, a: usize, j: usize, b: usize) -> Option<Red> {
        for (l, s) in [(i, a), (j, b)] {
            if self.triples[l][s].is_zero() {
                return Some(Red::Zero(l));
            }
        }
        for (l, s) in [(i, a), (j, b)] {
            let g = self.gid[l][s];
            let members = &self.index[s].groups[g as usize].members;
            if members.len() < 2 {
                continue;
            }
            let [o1, o2] = [[1, 2], [0, 2], [0, 1]][s];
            for &k in members {
                let k = k as usize;
                if k == l {
                    continue;
                }
                if self.gid[k][o1] == self.gid[l][o1] {
                    return Some(Red::Merge { i: l, j: k, free: o2 });
                }
                if self.gid[k][o2] == self.gid[l][o2] {
                    return Some(Red::Merge { i: l, j: k, free: o1 });
                }
            }
        }
        None
    }

    pub fn any_reduction(&self) -> Option<Red> {
        for (l, t) in self.triples.iter().enumerate() {
            if t.iter().any(V::is_zero) {
                return Some(Red::Zero(l));
            }
        }
        for (s, ix) in self.index.iter().enumerate() {
            let [o1, o2] = [[1, 2], [0, 2], [0, 1]][s];
            for &g in &ix.multi {
                let m = &ix.groups[g as usize].members;
                for (x, &a) in m.iter().enumerate() {
                    for &b in &m[x + 1..] {
                        let (a, b) = (a as usize, b as usize);
                        if self.gid[a][o1] == self.gid[b][o1] {
                            return Some(Red::Merge { i: a, j: b, free: o2 });
                        }
                        if self.gid[a][o2] == self.gid[b][o2] {
                            return Some(Red::Merge { i: a, j: b, free: o1 });
                        }
                    }
                }
            }
        }
        None
    }

    /// Applies a reduction; returns true if a merge summed to zero and both
    /// triples were dropped.
    pub fn reduce(&mut self, red: Red) -> bool {
        let dropped_both = match red {
            Red::Zero(l) => {
                self.triples.swap_remove(l);
                false
            }
            Red::Merge { i, j, free } => {
                let (ti, tj) = pair_mut(&mut self.triples, i, j);
                ti[free].add_scaled(1, &tj[free]);
                if ti[free].is_zero() {
                    let (lo, hi) = (i.min(j), i.max(j));
                    self.triples.swap_remove(hi);
                    self.triples.swap_remove(lo);
                    true
                } else {
                    self.triples.swap_remove(j);
                    false
                }
            }
        };
        self.rebuild();
        dropped_both
    }

    /// Replaces `(a,b,c), (a',b',c')` by `(a-a',b,c), (a',b-b',c), (a',b',c+c')`
    /// for a random pair and slot order with `a != a'` and `b != b'`.
    /// Returns false if no such choice was found.
    pub fn plus(&mut self, rng: &mut ChaCha8Rng) -> bool {
        let r = self.triples.len();
        if r < 2 {
            return false;
        }
        for _ in 0..16 {
            let i = rng.gen_range(0..r);
            let mut j = rng.gen_range(0..r - 1);
            if j >= i {
                j += 1;
            }
            let [s1, s2, s3] = ORDERS[rng.gen_range(0..6)];
            let (ti, tj) = (&self.triples[i], &self.triples[j]);
            if ti[s1] == tj[s1] || ti[s2] == tj[s2] {
                continue;
            }
            let mut k = tj.clone();
            k[s2] = ti[s2].clone();
            k[s2].add_scaled(self.minus_one, &tj[s2]);
            k[s3] = ti[s3].clone();
            let m1 = self.minus_one;
            let (ti, tj) = pair_mut(&mut self.triples, i, j);
            ti[s1].add_scaled(m1, &tj[s1]);
            tj[s3].add_scaled(1, &ti[s3]);
            self.triples.push(k);
            self.rebuild();
            return true;
        }
        false
    }

    pub fn to_scheme(&self) -> Scheme {
        let f = self.format;
        let triples = self
            .triples
            .iter()
            .map(|t| {
                Triple::from_slots(std::array::from_fn(|s| {
                    let (rows, cols) = f.slot_shape(Slot::from_index(s));
                    t[s].to_mat(self.ring, rows, cols)
                }))
            })
            .collect();
        Scheme::from_parts(f, self.ring, triples)
    }

    #[cfg(test)]
    pub fn check_index(&self) {
        let mut pairs = 0u64;
        for (s, ix) in self.index.iter().enumerate() {
            for (l, t) in self.triples.iter().enumerate() {
                let g = &ix.groups[self.gid[l][s] as usize];
                assert!(g.value == t[s]);
                assert!(g.members.contains(&(l as u32)));
            }
            for &g in &ix.multi {
                let k = ix.groups[g as usize].members.len() as u64;
                assert!(k >= 2);
                pairs += k * (k - 1);
            }
        }
        assert_eq!(pairs, self.pairs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moves::{enumerate_flips, find_reduction};
    use rand::SeedableRng;

    fn f(n: usize, m: usize, p: usize) -> Format {
        Format::new(n, m, p).unwrap()
    }

    fn drive<V: SlotValue>(s: &Scheme, seed: u64, steps: usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = Engine::<V>::new(s);
        for step in 0..steps {
            e.check_index();
            let cur = e.to_scheme();
            assert!(cur.is_verified(), "step {step}");
            assert_eq!(2 * e.pairs as usize * crate::moves::flip_scalars(s.ring()).len(),
                enumerate_flips(&cur).count());
            let red = e.any_reduction();
            assert_eq!(red.is_some(), find_reduction(&cur).is_some());
            if let Some(red) = red {
                e.reduce(red);
                continue;
            }
            if step % 50 == 49 && e.plus(&mut rng) {
                continue;
            }
            let Some(fl) = e.sample_flip(&mut rng) else { break };
            let local = e.flip(fl);
            let cur = e.to_scheme();
            // The local check sees everything a full scan sees, since the
            // state before the flip had no reduction.
            assert_eq!(local.is_some(), find_reduction(&cur).is_some(), "step {step}");
        }
    }

    #[test]
    fn packed_z2_walk_stays_consistent() {
        drive::<Bits>(&Scheme::standard(f(2, 2, 3), Ring::Z2), 1, 3000);
        drive::<Bits>(&Scheme::standard(f(3, 3, 3), Ring::Z2), 2, 2000);
    }

    #[test]
    fn generic_walk_stays_consistent() {
        drive::<Mat>(&Scheme::standard(f(2, 2, 2), Ring::Zp(3)), 3, 3000);
        drive::<Mat>(&Scheme::standard(f(2, 3, 2), Ring::Zp(5)), 4, 2000);
        drive::<Mat>(&Scheme::standard(f(2, 2, 2), Ring::Z2), 5, 1000);
    }
}
