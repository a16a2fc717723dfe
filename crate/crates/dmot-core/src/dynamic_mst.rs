//! Constant-approximate minimum spanning tree over a subset X, maintained
//! under point insertions and deletions. X splits into layers by the meet
//! level with a random root; each layer gets a sparse auxiliary graph whose
//! edges are paths through buckets of points sharing a known set, and the
//! layer tree is the MST of that graph.

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hierarchy::CompressedTree;
use crate::partition::PartitionConfig;
use crate::path_nav::PathDecomposition;
use crate::yfast::{smap, SMap};

/// Distance blow-up within one layer: points of layer i sit within
/// d_constant * r_i of the root.
pub fn d_constant(eta: u32, tau: f64) -> f64 {
    (1.0 + 4.0 * tau * 2f64.powi(-(eta as i32)) / (tau - 1.0)) * tau
}

/// Analytic approximation factor of the layered tree: connecting edges
/// contribute 3*D*tau/(tau-1), the layer trees 8*m*D*(1+D) with
/// m = ceil(log_tau(1+D)). Equals 1044 at tau = 2, eta = 2.
pub fn b_constant(eta: u32, tau: f64) -> f64 {
    let d = d_constant(eta, tau);
    let m = ((1.0 + d).ln() / tau.ln()).ceil();
    3.0 * d * tau / (tau - 1.0) + 8.0 * m * d * (1.0 + d)
}

/// Pluggable layer-tree maintainer. `edges` come sorted by weight; the
/// returned tree must be a spanning forest of the edge set.
pub trait MstEngine {
    fn layer_tree(&mut self, layer: i64, edges: &[(u32, u32, f64)]) -> Vec<(u32, u32, f64)>;
}

/// Default engine: recompute the layer MST from scratch with Kruskal,
/// keeping per-point component IDs that are inherited from the bigger
/// component on every union.
#[derive(Debug, Default, Clone)]
pub struct RecomputeEngine;

impl MstEngine for RecomputeEngine {
    fn layer_tree(&mut self, _layer: i64, edges: &[(u32, u32, f64)]) -> Vec<(u32, u32, f64)> {
        let mut comp: SMap<u32, u32> = smap(0x6d73_7431);
        let mut group: SMap<u32, Vec<u32>> = smap(0x6d73_7432);
        let mut out = Vec::new();
        for &(a, b, w) in edges {
            for v in [a, b] {
                if !comp.contains_key(&v) {
                    comp.insert(v, v);
                    group.insert(v, vec![v]);
                }
            }
            let (ca, cb) = (comp[&a], comp[&b]);
            if ca == cb {
                continue;
            }
            let (big, small) = if group[&ca].len() >= group[&cb].len() {
                (ca, cb)
            } else {
                (cb, ca)
            };
            let moved = group.remove(&small).unwrap();
            for &v in &moved {
                comp.insert(v, big);
            }
            group.get_mut(&big).unwrap().extend(moved);
            out.push((a, b, w));
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
struct Layer {
    members: BTreeSet<u32>,
    /// (level, known node) -> bucket members, sorted. Path edges run along
    /// consecutive members with weight 2*D*r_{level-1}.
    buckets: BTreeMap<(i64, u32), Vec<u32>>,
    tree: Vec<(u32, u32, f64)>,
}

/// Layered spanning tree of the current X, maintained dynamically.
#[derive(Debug, Clone)]
pub struct LayeredMstState<E: MstEngine = RecomputeEngine> {
    pub seed: u64,
    pub root: Option<u32>,
    /// |X| at the last full rebuild; bucket windows use this value.
    pub k_at_rebuild: usize,
    pub rebuilds: u32,
    pub root_deletion_rebuilds: u32,
    members: BTreeSet<u32>,
    layers: BTreeMap<i64, Layer>,
    layer_of: SMap<u32, i64>,
    point_buckets: SMap<u32, Vec<(i64, u32)>>,
    engine: E,
}

/// Build the layered tree for X from scratch.
pub fn static_layered_mst(
    t: &CompressedTree,
    pd: &PathDecomposition,
    x: &[u32],
    seed: u64,
) -> Result<LayeredMstState> {
    let mut state = LayeredMstState::new(seed);
    if x.is_empty() {
        return Err(Error::EmptyX);
    }
    state.members = x.iter().copied().collect();
    state.rebuild(t, pd)?;
    Ok(state)
}

impl LayeredMstState<RecomputeEngine> {
    pub fn new(seed: u64) -> Self {
        Self::with_engine(seed, RecomputeEngine)
    }
}

impl<E: MstEngine> LayeredMstState<E> {
    pub fn with_engine(seed: u64, engine: E) -> Self {
        LayeredMstState {
            seed,
            root: None,
            k_at_rebuild: 0,
            rebuilds: 0,
            root_deletion_rebuilds: 0,
            members: BTreeSet::new(),
            layers: BTreeMap::new(),
            layer_of: smap(seed ^ 0x6c61_7972),
            point_buckets: smap(seed ^ 0x6275_636b),
            engine,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, x: u32) -> bool {
        self.members.contains(&x)
    }

    pub fn members(&self) -> impl Iterator<Item = u32> + '_ {
        self.members.iter().copied()
    }

    pub fn layer_indices(&self) -> Vec<i64> {
        self.layers.keys().copied().collect()
    }

    pub fn layer_members(&self, i: i64) -> Option<Vec<u32>> {
        self.layers.get(&i).map(|l| l.members.iter().copied().collect())
    }

    pub fn buckets_of(&self, x: u32) -> Option<&[(i64, u32)]> {
        self.point_buckets.get(&x).map(|v| v.as_slice())
    }

    /// Bucket window for layer i under the recorded k.
    pub fn window(&self, config: &PartitionConfig, i: i64) -> (i64, i64) {
        let k = self.k_at_rebuild.max(1) as f64;
        let d = d_constant(config.eta, config.tau);
        let lo = i - (k.ln() / config.tau.ln()).ceil() as i64 + 1;
        let hi = i + 1 + ((2.0 * d).ln() / config.tau.ln()).ceil() as i64;
        (lo, hi)
    }

    fn bucket_keys(
        &self,
        t: &CompressedTree,
        pd: &PathDecomposition,
        x: u32,
        i: i64,
    ) -> Result<Vec<(i64, u32)>> {
        let (lo, hi) = self.window(&t.config, i);
        let lo = lo.max(t.retained_levels[0].0);
        let mut keys = Vec::new();
        for (l, cur, partners) in pd.known_sets_in_range(t, x, lo, hi, Some(i + 1))? {
            keys.push((l, cur));
            for p in partners {
                keys.push((l, p));
            }
        }
        Ok(keys)
    }

    fn refresh_layer(&mut self, t: &CompressedTree, i: i64) {
        let d = d_constant(t.config.eta, t.config.tau);
        let mut edges = Vec::new();
        // Bucket order is ascending in level, so path edge weights come out
        // sorted for the Kruskal engine.
        for (&(l, _), bucket) in &self.layers[&i].buckets {
            let w = 2.0 * d * t.config.radius(l - 1);
            for pair in bucket.windows(2) {
                edges.push((pair[0], pair[1], w));
            }
        }
        let tree = self.engine.layer_tree(i, &edges);
        self.layers.get_mut(&i).expect("layer exists").tree = tree;
    }

    /// Full rebuild: fresh random root, layers, buckets, layer trees.
    pub fn rebuild(&mut self, t: &CompressedTree, pd: &PathDecomposition) -> Result<()> {
        self.k_at_rebuild = self.members.len();
        self.layers.clear();
        self.layer_of = smap(self.seed ^ 0x6c61_7972);
        self.point_buckets = smap(self.seed ^ 0x6275_636b);
        if self.members.is_empty() {
            self.root = None;
            return Ok(());
        }
        let all: Vec<u32> = self.members.iter().copied().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(self.rebuilds as u64));
        let root = all[rng.gen_range(0..all.len())];
        self.root = Some(root);
        self.rebuilds += 1;
        for &x in &all {
            if x == root {
                continue;
            }
            let i = pd.meet(t, x, root)? - 1;
            self.place(t, pd, x, i)?;
        }
        let idx: Vec<i64> = self.layers.keys().copied().collect();
        for i in idx {
            self.refresh_layer(t, i);
        }
        Ok(())
    }

    fn place(&mut self, t: &CompressedTree, pd: &PathDecomposition, x: u32, i: i64) -> Result<()> {
        let keys = self.bucket_keys(t, pd, x, i)?;
        let layer = self.layers.entry(i).or_default();
        layer.members.insert(x);
        for &key in &keys {
            let bucket = layer.buckets.entry(key).or_default();
            let pos = bucket.partition_point(|&y| y < x);
            bucket.insert(pos, x);
        }
        self.layer_of.insert(x, i);
        self.point_buckets.insert(x, keys);
        Ok(())
    }

    /// Rebuild when |X| drifted by a factor of two since the last rebuild.
    pub fn maybe_rebuild(&mut self, t: &CompressedTree, pd: &PathDecomposition) -> Result<bool> {
        if self.root.is_none() {
            return Ok(false);
        }
        let k = self.members.len();
        if k >= 2 * self.k_at_rebuild || 2 * k <= self.k_at_rebuild {
            self.rebuild(t, pd)?;
            return Ok(true);
        }
        Ok(false)
    }

    pub fn insert(&mut self, t: &CompressedTree, pd: &PathDecomposition, x: u32) -> Result<()> {
        if self.members.contains(&x) {
            return Err(Error::AlreadyPresent(x as usize));
        }
        pd.meet(t, x, x)?; // validates the point id
        self.members.insert(x);
        match self.root {
            None => {
                self.root = Some(x);
                self.k_at_rebuild = 1;
                Ok(())
            }
            Some(r) => {
                if self.maybe_rebuild(t, pd)? {
                    return Ok(());
                }
                let i = pd.meet(t, x, r)? - 1;
                self.place(t, pd, x, i)?;
                self.refresh_layer(t, i);
                Ok(())
            }
        }
    }

    pub fn delete(&mut self, t: &CompressedTree, pd: &PathDecomposition, x: u32) -> Result<()> {
        if !self.members.contains(&x) {
            return Err(Error::NotPresent(x as usize));
        }
        self.members.remove(&x);
        if self.root == Some(x) {
            // Losing the root invalidates every layer: full rebuild.
            self.root_deletion_rebuilds += 1;
            return self.rebuild(t, pd);
        }
        let i = self.layer_of.remove(&x).expect("non-root member has a layer");
        let keys = self.point_buckets.remove(&x).unwrap_or_default();
        let layer = self.layers.get_mut(&i).expect("layer exists");
        layer.members.remove(&x);
        for key in keys {
            if let Some(bucket) = layer.buckets.get_mut(&key) {
                // Removing an interior point reconnects its two path
                // neighbors implicitly: path edges follow the member list.
                bucket.retain(|&y| y != x);
                if bucket.is_empty() {
                    layer.buckets.remove(&key);
                }
            }
        }
        if layer.members.is_empty() {
            self.layers.remove(&i);
        } else {
            self.refresh_layer(t, i);
        }
        self.maybe_rebuild(t, pd)?;
        Ok(())
    }

    /// All tree edges: the layer trees plus one connecting edge per
    /// nonempty layer, weighted by the layer's distance bound to the root.
    pub fn edges(&self, config: &PartitionConfig) -> Vec<(u32, u32, f64)> {
        let mut out = Vec::new();
        let d = d_constant(config.eta, config.tau);
        let root = match self.root {
            Some(r) => r,
            None => return out,
        };
        for (&i, layer) in &self.layers {
            out.extend_from_slice(&layer.tree);
            let rep = *layer.members.iter().next().expect("nonempty layer");
            out.push((rep, root, d * config.radius(i)));
        }
        out
    }

    pub fn weight(&self, config: &PartitionConfig) -> f64 {
        self.edges(config).iter().map(|e| e.2).sum()
    }

    /// Structural check: the edge set is a spanning tree of the members.
    pub fn is_spanning_tree(&self, config: &PartitionConfig) -> bool {
        let k = self.members.len();
        if k == 0 {
            return self.root.is_none();
        }
        let edges = self.edges(config);
        if edges.len() != k - 1 {
            return false;
        }
        let mut dsu: BTreeMap<u32, u32> = self.members.iter().map(|&m| (m, m)).collect();
        fn find(d: &mut BTreeMap<u32, u32>, x: u32) -> u32 {
            let p = d[&x];
            if p == x {
                return x;
            }
            let r = find(d, p);
            d.insert(x, r);
            r
        }
        let mut joined = 0;
        for &(a, b, _) in &edges {
            if !dsu.contains_key(&a) || !dsu.contains_key(&b) {
                return false;
            }
            let (ra, rb) = (find(&mut dsu, a), find(&mut dsu, b));
            if ra == rb {
                return false;
            }
            dsu.insert(ra, rb);
            joined += 1;
        }
        joined == k - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::compress;
    use crate::metric::MetricSpace;
    use crate::oracles;
    use crate::partition::build_partition_tree;
    use crate::path_nav::build_path_decomposition;

    fn build(n: usize, seed: u64) -> (MetricSpace, CompressedTree, PathDecomposition) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let ms = MetricSpace::from_points(&pts).unwrap();
        let cfg = PartitionConfig::new(2.0, 2, ms.min_dist / 2.0).unwrap();
        let t = compress(&build_partition_tree(&ms, cfg).unwrap());
        let pd = build_path_decomposition(&t);
        (ms, t, pd)
    }

    fn ratio(ms: &MetricSpace, t: &CompressedTree, st: &LayeredMstState) -> f64 {
        let pts: Vec<usize> = st.members().map(|m| m as usize).collect();
        if pts.len() < 2 {
            return 1.0;
        }
        let (opt, _) = oracles::exact_mst(ms, &pts);
        st.weight(&t.config) / opt
    }

    #[test]
    fn constants() {
        assert!((d_constant(2, 2.0) - 6.0).abs() < 1e-12);
        assert!((b_constant(2, 2.0) - 1044.0).abs() < 1e-9);
    }

    #[test]
    fn trivial_sizes() {
        let (_, t, pd) = build(16, 1);
        assert!(matches!(
            static_layered_mst(&t, &pd, &[], 7),
            Err(Error::EmptyX)
        ));
        let st = static_layered_mst(&t, &pd, &[3], 7).unwrap();
        assert_eq!(st.weight(&t.config), 0.0);
        assert!(st.is_spanning_tree(&t.config));
        let st = static_layered_mst(&t, &pd, &[3, 11], 7).unwrap();
        let edges = st.edges(&t.config);
        assert_eq!(edges.len(), 1);
        assert!(st.is_spanning_tree(&t.config));
    }

    #[test]
    fn static_ratio_within_bound() {
        let (ms, t, pd) = build(96, 2);
        let b = b_constant(2, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..15 {
            let k = rng.gen_range(2..=40);
            let mut x: Vec<u32> = (0..96).collect();
            x.shuffle(&mut rng);
            x.truncate(k);
            let st = static_layered_mst(&t, &pd, &x, trial).unwrap();
            assert!(st.is_spanning_tree(&t.config), "trial {trial}");
            let r = ratio(&ms, &t, &st);
            assert!(r <= b, "trial {trial}: ratio {r}");
        }
    }

    #[test]
    fn bucket_window_matches_oracle() {
        let (_, t, pd) = build(64, 3);
        let x: Vec<u32> = (0..32).collect();
        let st = static_layered_mst(&t, &pd, &x, 9).unwrap();
        let root = st.root.unwrap();
        for m in st.members() {
            if m == root {
                continue;
            }
            let i = pd.meet(&t, m, root).unwrap() - 1;
            let (lo, hi) = st.window(&t.config, i);
            let lo = lo.max(t.retained_levels[0].0);
            let mut expect = Vec::new();
            for (l, cur, partners) in oracles::naive_known_sets(&t, m, lo, hi).unwrap() {
                expect.push((l, cur));
                for p in partners {
                    expect.push((l, p));
                }
            }
            let mut got = st.buckets_of(m).unwrap().to_vec();
            let mut expect = expect;
            got.sort_unstable();
            expect.sort_unstable();
            assert_eq!(got, expect, "point {m}");
        }
    }

    #[test]
    fn insert_delete_roundtrip_and_errors() {
        let (_, t, pd) = build(48, 4);
        let x: Vec<u32> = (0..20).collect();
        let st0 = static_layered_mst(&t, &pd, &x, 13).unwrap();
        let w0 = st0.weight(&t.config);
        let mut st = st0.clone();
        assert!(matches!(
            st.insert(&t, &pd, 5),
            Err(Error::AlreadyPresent(5))
        ));
        assert!(matches!(st.delete(&t, &pd, 33), Err(Error::NotPresent(33))));
        st.insert(&t, &pd, 30).unwrap();
        assert!(st.is_spanning_tree(&t.config));
        st.delete(&t, &pd, 30).unwrap();
        assert!(st.is_spanning_tree(&t.config));
        assert!((st.weight(&t.config) - w0).abs() < 1e-9);

        // Deleting down to one and to zero elements.
        let mut st = static_layered_mst(&t, &pd, &[1, 2, 3], 13).unwrap();
        let victim = (1..=3).find(|&v| Some(v) != st.root).unwrap();
        st.delete(&t, &pd, victim).unwrap();
        assert_eq!(st.edges(&t.config).len(), 1);
        let rest: Vec<u32> = st.members().collect();
        for v in rest {
            st.delete(&t, &pd, v).unwrap();
        }
        assert!(st.is_empty());
        assert!(st.root.is_none());
        assert!(st.is_spanning_tree(&t.config));
    }

    #[test]
    fn rebuild_policy() {
        let (_, t, pd) = build(64, 5);
        let x: Vec<u32> = (0..8).collect();
        let mut st = static_layered_mst(&t, &pd, &x, 17).unwrap();
        let before = st.rebuilds;
        for p in 8..16 {
            st.insert(&t, &pd, p).unwrap();
        }
        assert_eq!(st.rebuilds, before + 1, "8 -> 16 rebuilds exactly once");
        assert_eq!(st.k_at_rebuild, 16);

        let root = st.root.unwrap();
        let rd = st.root_deletion_rebuilds;
        st.delete(&t, &pd, root).unwrap();
        assert_eq!(st.root_deletion_rebuilds, rd + 1);
        assert!(st.is_spanning_tree(&t.config));
    }

    #[test]
    fn mixed_script_invariants() {
        let (ms, t, pd) = build(48, 6);
        let b = b_constant(2, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut st = LayeredMstState::new(29);
        let mut present: Vec<u32> = Vec::new();
        for step in 0..200 {
            let grow = present.is_empty() || (present.len() < 40 && rng.gen_bool(0.6));
            if grow {
                let mut p = rng.gen_range(0..48u32);
                while present.contains(&p) {
                    p = rng.gen_range(0..48u32);
                }
                st.insert(&t, &pd, p).unwrap();
                present.push(p);
            } else {
                let idx = rng.gen_range(0..present.len());
                let p = present.swap_remove(idx);
                st.delete(&t, &pd, p).unwrap();
            }
            assert!(st.is_spanning_tree(&t.config), "step {step}");
            if !present.is_empty() {
                let r = ratio(&ms, &t, &st);
                assert!(r <= b, "step {step}: ratio {r}");
            }
        }
    }
}
