//! Constant-stretch pseudospanner over a query set S, built from the
//! extracted subtree: one leader point per node, an edge from each beaten
//! child leader to its parent's leader, and an edge per induced meeting.
//! Shortest paths on the result upper-bound true distances within a factor
//! of `stretch_constant(eta, tau)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::extraction::ExtractedTree;
use crate::partition::PartitionConfig;
use crate::yfast::{smap, SMap};

/// The stretch constant: shortest spanner paths are within this factor of
/// the true distance (18 at tau = 2, eta = 2).
pub fn stretch_constant(eta: u32, tau: f64) -> f64 {
    (1.0 + (tau / (tau - 1.0)).powi(2) * 2f64.powi(3 - eta as i32)) * tau
}

#[derive(Debug, Clone)]
pub struct Pseudospanner {
    /// The query points, sorted; vertex i of the graph is points[i].
    pub points: Vec<u32>,
    pub index_of: SMap<u32, u32>,
    /// (vertex, vertex, weight), parallel edges collapsed to the lightest.
    pub edges: Vec<(u32, u32, f64)>,
    /// Extracted-tree node -> its leader point.
    pub leader_of_node: Vec<u32>,
    adj: Vec<Vec<(u32, f64)>>,
}

/// Leaders: a leaf leads itself; an internal node inherits the leader of
/// the child with the smallest minimum point id.
pub fn assign_leaders(et: &ExtractedTree) -> Vec<u32> {
    let mut leader = vec![u32::MAX; et.nodes.len()];
    // Children are created before parents, so ascending id order works.
    for id in 0..et.nodes.len() {
        let node = &et.nodes[id];
        leader[id] = if node.children.is_empty() {
            node.members[0]
        } else {
            let pick = *node
                .children
                .iter()
                .min_by_key(|&&c| et.nodes[c as usize].members[0])
                .unwrap();
            leader[pick as usize]
        };
    }
    leader
}

/// Build the pseudospanner for the extracted tree under the given
/// hierarchy configuration.
pub fn build_pseudospanner(et: &ExtractedTree, config: &PartitionConfig) -> Pseudospanner {
    let leader_of_node = assign_leaders(et);
    let points: Vec<u32> = et.nodes[et.root as usize].members.clone();
    let mut index_of: SMap<u32, u32> = smap(0x5370_616e);
    for (i, &p) in points.iter().enumerate() {
        index_of.insert(p, i as u32);
    }

    let parent_coef = 2.0 * (config.tau * 2f64.powi(-(config.eta as i32)) / (config.tau - 1.0));
    let meet_coef =
        (1.0 + 4.0 * config.tau * 2f64.powi(-(config.eta as i32)) / (config.tau - 1.0))
            * config.tau;

    let mut best: SMap<(u32, u32), f64> = smap(0x5370_616e);
    let mut add = |a: u32, b: u32, w: f64| {
        if a == b {
            return;
        }
        let key = (a.min(b), a.max(b));
        best.entry(key)
            .and_modify(|cur| {
                if w < *cur {
                    *cur = w;
                }
            })
            .or_insert(w);
    };
    for (id, node) in et.nodes.iter().enumerate() {
        // Beaten children connect to the parent's leader at the parent's
        // level.
        if !node.children.is_empty() {
            let w = parent_coef * config.radius(node.level);
            let lp = index_of[&leader_of_node[id]];
            for &c in &node.children {
                add(index_of[&leader_of_node[c as usize]], lp, w);
            }
        }
        for &(partner, l) in &node.meetings {
            if partner as usize > id {
                let w = meet_coef * config.radius(l);
                add(
                    index_of[&leader_of_node[id]],
                    index_of[&leader_of_node[partner as usize]],
                    w,
                );
            }
        }
    }

    let mut edges: Vec<(u32, u32, f64)> =
        best.into_iter().map(|((a, b), w)| (a, b, w)).collect();
    edges.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    let mut adj = vec![Vec::new(); points.len()];
    for &(a, b, w) in &edges {
        adj[a as usize].push((b, w));
        adj[b as usize].push((a, w));
    }

    Pseudospanner {
        points,
        index_of,
        edges,
        leader_of_node,
        adj,
    }
}

#[derive(PartialEq)]
struct HeapItem(f64, u32);
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap by distance.
        other.0.partial_cmp(&self.0).unwrap().then(other.1.cmp(&self.1))
    }
}

impl Pseudospanner {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Single-source shortest paths by vertex index: (distances, parents).
    pub fn shortest_paths(&self, source: u32) -> (Vec<f64>, Vec<Option<u32>>) {
        let n = self.points.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[source as usize] = 0.0;
        heap.push(HeapItem(0.0, source));
        while let Some(HeapItem(d, v)) = heap.pop() {
            if d > dist[v as usize] {
                continue;
            }
            for &(u, w) in &self.adj[v as usize] {
                let nd = d + w;
                if nd < dist[u as usize] {
                    dist[u as usize] = nd;
                    parent[u as usize] = Some(v);
                    heap.push(HeapItem(nd, u));
                }
            }
        }
        (dist, parent)
    }

    /// All-pairs shortest-path distances (k x k), one Dijkstra per vertex.
    pub fn all_pairs(&self) -> Vec<Vec<f64>> {
        (0..self.points.len() as u32)
            .map(|s| self.shortest_paths(s).0)
            .collect()
    }

    /// Shortest-path distance between two points of S.
    pub fn distance(&self, u: u32, v: u32) -> f64 {
        let (dist, _) = self.shortest_paths(self.index_of[&u]);
        dist[self.index_of[&v] as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::extract_subtree;
    use crate::hierarchy::{compress, CompressedTree};
    use crate::metric::MetricSpace;
    use crate::partition::{build_partition_tree, PartitionConfig};
    use crate::path_nav::{build_path_decomposition, PathDecomposition};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

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

    #[test]
    fn constants() {
        assert!((stretch_constant(2, 2.0) - 18.0).abs() < 1e-12);
        let cfg = PartitionConfig::new(2.0, 2, 0.5).unwrap();
        // tau = 2, eta = 2: parent edge weight r_j, meeting edge weight 6 r_j.
        let coef_p = 2.0 * (cfg.tau * 0.25 / (cfg.tau - 1.0));
        let coef_m = (1.0 + 4.0 * cfg.tau * 0.25 / (cfg.tau - 1.0)) * cfg.tau;
        assert!((coef_p - 1.0).abs() < 1e-12);
        assert!((coef_m - 6.0).abs() < 1e-12);
    }

    #[test]
    fn leaders_live_inside_their_nodes() {
        let (_, t, pd) = build(40, 3);
        let s: Vec<u32> = (0..20).collect();
        let et = extract_subtree(&t, &pd, &s).unwrap();
        let leaders = assign_leaders(&et);
        for (id, node) in et.nodes.iter().enumerate() {
            assert!(node.members.contains(&leaders[id]));
        }
    }

    #[test]
    fn two_point_spanner() {
        let (ms, t, pd) = build(30, 4);
        let et = extract_subtree(&t, &pd, &[2, 17]).unwrap();
        let cfg = t.config;
        let sp = build_pseudospanner(&et, &cfg);
        assert_eq!(sp.points, vec![2, 17]);
        let dh = sp.distance(2, 17);
        let d = ms.d(2, 17);
        assert!(d <= dh + 1e-12);
        assert!(dh <= stretch_constant(2, 2.0) * d + 1e-9);
    }

    #[test]
    fn stretch_and_soundness_random() {
        for seed in 0..3 {
            let (ms, t, pd) = build(64, seed + 10);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = stretch_constant(2, 2.0);
            for _ in 0..10 {
                let k = rng.gen_range(2..=24);
                let mut s: Vec<u32> = (0..64).collect();
                s.shuffle(&mut rng);
                s.truncate(k);
                s.sort_unstable();
                let et = extract_subtree(&t, &pd, &s).unwrap();
                let sp = build_pseudospanner(&et, &t.config);
                // Every edge weight upper-bounds the true distance.
                for &(a, b, w) in &sp.edges {
                    let d = ms.d(sp.points[a as usize] as usize, sp.points[b as usize] as usize);
                    assert!(d <= w + 1e-9);
                }
                let apsp = sp.all_pairs();
                for i in 0..k {
                    for j in i + 1..k {
                        let d = ms.d(s[i] as usize, s[j] as usize);
                        let dh = apsp[i][j];
                        assert!(d <= dh + 1e-9, "lower bound violated");
                        assert!(dh <= c * d + 1e-9, "stretch violated: {dh} vs {d}");
                        assert!((dh - apsp[j][i]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn apsp_matches_floyd_warshall() {
        let (_, t, pd) = build(48, 21);
        let s: Vec<u32> = (0..16).collect();
        let et = extract_subtree(&t, &pd, &s).unwrap();
        let sp = build_pseudospanner(&et, &t.config);
        let k = sp.points.len();
        let mut fw = vec![vec![f64::INFINITY; k]; k];
        for i in 0..k {
            fw[i][i] = 0.0;
        }
        for &(a, b, w) in &sp.edges {
            fw[a as usize][b as usize] = fw[a as usize][b as usize].min(w);
            fw[b as usize][a as usize] = fw[b as usize][a as usize].min(w);
        }
        for m in 0..k {
            for i in 0..k {
                for j in 0..k {
                    if fw[i][m] + fw[m][j] < fw[i][j] {
                        fw[i][j] = fw[i][m] + fw[m][j];
                    }
                }
            }
        }
        let apsp = sp.all_pairs();
        for i in 0..k {
            for j in 0..k {
                assert!((apsp[i][j] - fw[i][j]).abs() < 1e-9);
            }
        }
    }
}
