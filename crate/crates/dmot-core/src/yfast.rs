//! Predecessor/successor structure over a bounded integer universe: an
//! x-fast trie over bucket representatives with balanced-tree buckets
//! (the y-fast scheme). One instance is attached to every heavy path, keyed
//! either by vertex levels or by rank-mapped meeting levels.

use std::collections::{BTreeSet, HashMap};
use std::hash::{BuildHasher, Hasher};

use crate::error::{Error, Result};

/// Deterministic seeded hashing used by all dictionaries that end up in the
/// persisted structure; the seed is recorded so rebuilt dictionaries iterate
/// identically.
#[derive(Debug, Clone, Copy)]
pub struct SeededBuild {
    pub seed: u64,
}

impl BuildHasher for SeededBuild {
    type Hasher = SeededHasher;
    fn build_hasher(&self) -> SeededHasher {
        SeededHasher {
            state: self.seed ^ 0x9e37_79b9_7f4a_7c15,
        }
    }
}

#[derive(Debug)]
pub struct SeededHasher {
    state: u64,
}

impl Hasher for SeededHasher {
    fn finish(&self) -> u64 {
        let mut x = self.state;
        x ^= x >> 33;
        x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
        x ^= x >> 33;
        x = x.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
        x ^ (x >> 33)
    }
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.state = (self.state ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    fn write_u64(&mut self, i: u64) {
        self.state = (self.state ^ i)
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .rotate_left(31);
    }
    fn write_usize(&mut self, i: usize) {
        self.write_u64(i as u64);
    }
    fn write_u32(&mut self, i: u32) {
        self.write_u64(i as u64);
    }
}

pub type SMap<K, V> = HashMap<K, V, SeededBuild>;

pub fn smap<K, V>(seed: u64) -> SMap<K, V> {
    HashMap::with_hasher(SeededBuild { seed })
}

/// Min/max representative below an x-fast prefix.
#[derive(Debug, Clone, Copy)]
struct PrefixNode {
    min: u64,
    max: u64,
}

#[derive(Debug, Clone)]
pub struct YFastTrie {
    universe_bits: u32,
    seed: u64,
    size: usize,
    /// levels[l] maps length-l prefixes (key >> (w-l)) of bucket
    /// representatives to their descendant min/max representative.
    levels: Vec<SMap<u64, PrefixNode>>,
    /// Bucket representative (its minimum key) -> bucket contents.
    buckets: SMap<u64, BTreeSet<u64>>,
    /// Doubly linked list over representatives.
    links: SMap<u64, (Option<u64>, Option<u64>)>,
    first_rep: Option<u64>,
}

impl YFastTrie {
    pub fn new(universe_bits: u32) -> Self {
        let w = universe_bits.clamp(1, 63);
        YFastTrie {
            universe_bits: w,
            seed: 0x79fa_57,
            size: 0,
            levels: (0..=w).map(|_| smap(0x79fa_57)).collect(),
            buckets: smap(0x79fa_57),
            links: smap(0x79fa_57),
            first_rep: None,
        }
    }

    pub fn with_seed(universe_bits: u32, seed: u64) -> Self {
        let mut t = Self::new(universe_bits);
        t.seed = seed;
        t.levels = (0..=t.universe_bits).map(|_| smap(seed)).collect();
        t.buckets = smap(seed);
        t.links = smap(seed);
        t
    }

    pub fn universe_bits(&self) -> u32 {
        self.universe_bits
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    #[inline]
    fn w(&self) -> u32 {
        self.universe_bits
    }

    #[inline]
    fn prefix(&self, key: u64, l: u32) -> u64 {
        key >> (self.w() - l)
    }

    fn check_key(&self, key: u64) -> Result<()> {
        if self.w() < 64 && key >> self.w() != 0 {
            Err(Error::KeyOutOfUniverse {
                key,
                bits: self.w(),
            })
        } else {
            Ok(())
        }
    }

    /// Longest l such that the length-l prefix of q is an x-fast prefix of
    /// some representative; the classic binary search over prefix lengths.
    fn longest_prefix(&self, q: u64) -> Option<u32> {
        if self.first_rep.is_none() {
            return None;
        }
        let (mut lo, mut hi) = (0u32, self.w());
        // levels[0] holds the empty prefix of every rep, so lo always valid.
        debug_assert!(self.levels[0].contains_key(&0));
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if self.levels[mid as usize].contains_key(&self.prefix(q, mid)) {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        Some(lo)
    }

    /// Representatives bracketing q: (largest rep ≤ q, smallest rep ≥ q).
    fn rep_neighbors(&self, q: u64) -> (Option<u64>, Option<u64>) {
        let l = match self.longest_prefix(q) {
            None => return (None, None),
            Some(l) => l,
        };
        if l == self.w() {
            return (Some(q), Some(q));
        }
        let node = self.levels[l as usize][&self.prefix(q, l)];
        let next_bit = (q >> (self.w() - l - 1)) & 1;
        if next_bit == 1 {
            // Every rep below this node diverges to 0 here, so all are < q.
            let pred = node.max;
            (Some(pred), self.links[&pred].1)
        } else {
            let succ = node.min;
            (self.links[&succ].0, Some(succ))
        }
    }

    fn insert_rep(&mut self, rep: u64, bucket: BTreeSet<u64>) {
        let (prev, next) = self.rep_neighbors(rep);
        debug_assert!(prev != Some(rep) && next != Some(rep));
        if let Some(p) = prev {
            self.links.get_mut(&p).unwrap().1 = Some(rep);
        }
        if let Some(n) = next {
            self.links.get_mut(&n).unwrap().0 = Some(rep);
        }
        self.links.insert(rep, (prev, next));
        if prev.is_none() {
            self.first_rep = Some(rep);
        }
        for l in 0..=self.w() {
            let p = self.prefix(rep, l);
            self.levels[l as usize]
                .entry(p)
                .and_modify(|n| {
                    n.min = n.min.min(rep);
                    n.max = n.max.max(rep);
                })
                .or_insert(PrefixNode { min: rep, max: rep });
        }
        self.buckets.insert(rep, bucket);
    }

    fn remove_rep(&mut self, rep: u64) -> BTreeSet<u64> {
        let (prev, next) = self.links.remove(&rep).unwrap();
        if let Some(p) = prev {
            self.links.get_mut(&p).unwrap().1 = next;
        }
        if let Some(n) = next {
            self.links.get_mut(&n).unwrap().0 = prev;
        }
        if self.first_rep == Some(rep) {
            self.first_rep = next;
        }
        for l in 0..=self.w() {
            let p = self.prefix(rep, l);
            let node = self.levels[l as usize].get_mut(&p).unwrap();
            if node.min == rep && node.max == rep {
                self.levels[l as usize].remove(&p);
            } else if node.min == rep {
                // rep was the minimum under this prefix; its successor shares
                // the prefix because the node still has another descendant.
                node.min = next.unwrap();
            } else if node.max == rep {
                node.max = prev.unwrap();
            }
        }
        self.buckets.remove(&rep).unwrap()
    }

    /// Bucket-size bounds: split above 2w, merge below w/2 (when a neighbor
    /// exists; a lone bucket may be small).
    fn rebalance_after_insert(&mut self, rep: u64) {
        let limit = 2 * self.w() as usize;
        if self.buckets[&rep].len() <= limit {
            return;
        }
        let keys = self.remove_rep(rep);
        let v: Vec<u64> = keys.into_iter().collect();
        let mid = v.len() / 2;
        let lower: BTreeSet<u64> = v[..mid].iter().copied().collect();
        let upper: BTreeSet<u64> = v[mid..].iter().copied().collect();
        let lo_rep = *lower.iter().next().unwrap();
        let up_rep = *upper.iter().next().unwrap();
        self.insert_rep(lo_rep, lower);
        self.insert_rep(up_rep, upper);
    }

    fn rebalance_after_delete(&mut self, rep: u64) {
        let min_sz = (self.w() as usize) / 2;
        if self.buckets[&rep].len() >= min_sz.max(1) {
            return;
        }
        let (prev, next) = self.links[&rep];
        let partner = match next.or(prev) {
            None => return, // lone bucket: any size allowed
            Some(p) => p,
        };
        let a = self.remove_rep(rep);
        let mut merged = self.remove_rep(partner);
        merged.extend(a);
        let new_rep = *merged.iter().next().unwrap();
        self.insert_rep(new_rep, merged);
        self.rebalance_after_insert(new_rep);
    }

    pub fn insert(&mut self, key: u64) -> Result<()> {
        self.check_key(key)?;
        match self.rep_neighbors(key).0 {
            None => {
                // Below every representative (or empty): extend the first
                // bucket downward, making key its new representative.
                match self.first_rep {
                    None => {
                        let mut b = BTreeSet::new();
                        b.insert(key);
                        self.insert_rep(key, b);
                    }
                    Some(fr) => {
                        let mut b = self.remove_rep(fr);
                        b.insert(key);
                        self.insert_rep(key, b);
                        self.rebalance_after_insert(key);
                    }
                }
            }
            Some(rep) => {
                let b = self.buckets.get_mut(&rep).unwrap();
                if !b.insert(key) {
                    return Ok(()); // idempotent
                }
                self.rebalance_after_insert(rep);
            }
        }
        self.size += 1;
        Ok(())
    }

    pub fn delete(&mut self, key: u64) {
        let rep = match self.rep_neighbors(key).0 {
            Some(r) => r,
            None => return,
        };
        if !self.buckets[&rep].contains(&key) {
            return;
        }
        if self.buckets[&rep].len() == 1 {
            self.remove_rep(rep);
        } else if key == rep {
            let mut b = self.remove_rep(rep);
            b.remove(&key);
            let new_rep = *b.iter().next().unwrap();
            self.insert_rep(new_rep, b);
            self.rebalance_after_delete(new_rep);
        } else {
            self.buckets.get_mut(&rep).unwrap().remove(&key);
            self.rebalance_after_delete(rep);
        }
        self.size -= 1;
    }

    pub fn contains(&self, key: u64) -> bool {
        match self.rep_neighbors(key).0 {
            Some(rep) => self.buckets[&rep].contains(&key),
            None => false,
        }
    }

    /// Largest stored key ≤ q.
    pub fn predecessor(&self, q: u64) -> Option<u64> {
        let q = if self.w() < 64 { q.min((1u64 << self.w()) - 1) } else { q };
        let rep = self.rep_neighbors(q).0?;
        self.buckets[&rep].range(..=q).next_back().copied()
    }

    /// Smallest stored key ≥ q.
    pub fn successor(&self, q: u64) -> Option<u64> {
        if self.w() < 64 && q >> self.w() != 0 {
            return None;
        }
        let (pred_rep, succ_rep) = self.rep_neighbors(q);
        if let Some(rep) = pred_rep {
            if let Some(&k) = self.buckets[&rep].range(q..).next() {
                return Some(k);
            }
        }
        succ_rep.map(|r| if r >= q { r } else { *self.buckets[&r].range(q..).next().unwrap() })
    }

    /// All keys in ascending order (used for serialization).
    pub fn sorted_keys(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.size);
        let mut cur = self.first_rep;
        while let Some(rep) = cur {
            out.extend(self.buckets[&rep].iter().copied());
            cur = self.links[&rep].1;
        }
        out
    }

    /// Bulk construction from sorted keys (used when loading from disk).
    pub fn from_sorted_keys(universe_bits: u32, seed: u64, keys: &[u64]) -> Result<Self> {
        let mut t = Self::with_seed(universe_bits, seed);
        for &k in keys {
            t.insert(k)?;
        }
        Ok(t)
    }

    /// Structural invariants, used by tests: prefix tables consistent with
    /// representatives, bucket-size bounds, representative = bucket minimum.
    #[doc(hidden)]
    pub fn check_structure(&self) {
        let mut reps = Vec::new();
        let mut cur = self.first_rep;
        while let Some(rep) = cur {
            reps.push(rep);
            cur = self.links[&rep].1;
        }
        let w = self.w() as usize;
        for (i, &rep) in reps.iter().enumerate() {
            let b = &self.buckets[&rep];
            assert_eq!(*b.iter().next().unwrap(), rep, "rep must be bucket min");
            assert!(b.len() <= 2 * w, "bucket too large: {}", b.len());
            if reps.len() > 1 {
                assert!(b.len() >= (w / 2).max(1), "bucket too small: {}", b.len());
            }
            if i + 1 < reps.len() {
                assert!(rep < reps[i + 1]);
                assert!(*b.iter().next_back().unwrap() < reps[i + 1]);
            }
        }
        for l in 0..=self.w() {
            for &p in self.levels[l as usize].keys() {
                assert!(
                    reps.iter().any(|&r| self.prefix(r, l) == p),
                    "stale prefix at level {l}"
                );
            }
        }
        assert_eq!(
            self.size,
            reps.iter().map(|r| self.buckets[r].len()).sum::<usize>()
        );
    }
}
