//! The compressed hierarchy: unary chains of the partition tree collapsed,
//! per-node meeting lists with acquaintance snapshots, responsibility
//! dictionaries for the constant-time know-query, constant-time LCA via
//! Euler tour + sparse table, and the left-to-right leaf numbering used by
//! subtree extraction.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::partition::{PartitionConfig, PartitionTree};
use crate::yfast::{smap, SMap};

/// A first-acquaintance event between two nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Meeting {
    pub a: u32,
    pub b: u32,
    pub level: i64,
}

/// One meeting as stored in a node's list: the partner, the level, and the
/// snapshot of this node's full acquaintance list at that level (partner
/// included, the node itself excluded).
#[derive(Debug, Clone)]
pub struct MeetingRef {
    pub partner: u32,
    pub level: i64,
    pub acquaintances: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct Node {
    /// Creation level: the lowest level at which this member set exists.
    pub level: i64,
    pub parent: Option<u32>,
    /// Children ordered by leftmost point id; empty for leaves.
    pub children: Vec<u32>,
    /// Smallest point id in the subtree; the canonical representative leaf.
    pub min_point: u32,
    /// Meetings of this node sorted by (level, partner).
    pub meetings: Vec<MeetingRef>,
}

#[derive(Debug, Clone)]
pub struct CompressedTree {
    pub config: PartitionConfig,
    pub n: usize,
    /// Nodes; ids 0..n are the leaves of points 0..n in order.
    pub nodes: Vec<Node>,
    pub root: u32,
    /// Retained (event) levels of the build, ascending, with their radii.
    pub retained_levels: Vec<(i64, f64)>,
    /// Seed for all rebuilt dictionaries.
    pub seed: u64,
    /// Responsibility dictionary per node: partner -> meeting level. A node
    /// is responsible for a meeting when its parent's level is at most the
    /// partner's parent's level (both on ties).
    pub resp: Vec<SMap<u32, i64>>,
    /// Point id -> inorder rank of its leaf (DFS left-to-right).
    pub inorder_of_point: Vec<u32>,
    /// Node -> [leftmost, rightmost] leaf rank of its subtree.
    pub inorder_min: Vec<u32>,
    pub inorder_max: Vec<u32>,
    // Euler tour tables for constant-time LCA.
    euler: Vec<u32>,
    depth_at: Vec<u32>,
    first_occ: Vec<u32>,
    sparse: Vec<Vec<u32>>,
}

impl CompressedTree {
    pub fn leaf_of(&self, point: usize) -> Result<u32> {
        if point < self.n {
            Ok(point as u32)
        } else {
            Err(Error::InvalidPoint(point))
        }
    }

    #[inline]
    pub fn radius(&self, level: i64) -> f64 {
        self.config.radius(level)
    }

    /// Level of the parent; the root reports `i64::MAX` (it never dies).
    pub fn parent_level(&self, v: u32) -> i64 {
        match self.nodes[v as usize].parent {
            Some(p) => self.nodes[p as usize].level,
            None => i64::MAX,
        }
    }

    /// Is `v` alive at level j (created at or below j, not yet merged)?
    pub fn alive_at(&self, v: u32, j: i64) -> bool {
        self.nodes[v as usize].level <= j && j < self.parent_level(v)
    }

    /// The meeting level of x and y, if they ever know each other; answered
    /// from the responsibility dictionaries. `x == y` answers level(x).
    pub fn know_query(&self, x: u32, y: u32) -> Result<Option<i64>> {
        if x as usize >= self.nodes.len() {
            return Err(Error::InvalidNode(x as usize));
        }
        if y as usize >= self.nodes.len() {
            return Err(Error::InvalidNode(y as usize));
        }
        if x == y {
            return Ok(Some(self.nodes[x as usize].level));
        }
        Ok(self.resp[x as usize]
            .get(&y)
            .or_else(|| self.resp[y as usize].get(&x))
            .copied())
    }

    /// Lowest common ancestor via Euler tour range-minimum.
    pub fn lca(&self, u: u32, v: u32) -> Result<u32> {
        if u as usize >= self.nodes.len() {
            return Err(Error::InvalidNode(u as usize));
        }
        if v as usize >= self.nodes.len() {
            return Err(Error::InvalidNode(v as usize));
        }
        let (mut a, mut b) = (self.first_occ[u as usize], self.first_occ[v as usize]);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        let len = (b - a + 1) as usize;
        let k = usize::BITS - 1 - len.leading_zeros();
        let i1 = self.sparse[k as usize][a as usize];
        let i2 = self.sparse[k as usize][(b as usize + 1) - (1usize << k)];
        let pos = if self.depth_at[i1 as usize] <= self.depth_at[i2 as usize] {
            i1
        } else {
            i2
        };
        Ok(self.euler[pos as usize])
    }

    /// Upward walk to the ancestor alive at level j (naive; used by oracles
    /// and small internal steps, not by the fast navigation).
    pub fn ancestor_at_level(&self, v: u32, j: i64) -> u32 {
        let mut cur = v;
        while !self.alive_at(cur, j) {
            match self.nodes[cur as usize].parent {
                Some(p) => cur = p,
                None => return cur,
            }
        }
        cur
    }

    /// All meetings, each unordered pair once.
    pub fn all_meetings(&self) -> Vec<Meeting> {
        let mut out = Vec::new();
        for (id, node) in self.nodes.iter().enumerate() {
            for m in &node.meetings {
                if (id as u32) < m.partner {
                    out.push(Meeting {
                        a: id as u32,
                        b: m.partner,
                        level: m.level,
                    });
                }
            }
        }
        out
    }

    /// Acquaintances of node v at level j (v must be alive at j): snapshot
    /// of v's last meeting at or below j, empty if v has none yet.
    pub fn acquaintances_at(&self, v: u32, j: i64) -> &[u32] {
        let ms = &self.nodes[v as usize].meetings;
        let idx = ms.partition_point(|m| m.level <= j);
        if idx == 0 {
            &[]
        } else {
            &ms[idx - 1].acquaintances
        }
    }

    /// Maximum responsibility-dictionary size over nodes.
    pub fn max_responsibility(&self) -> usize {
        self.resp.iter().map(|d| d.len()).max().unwrap_or(0)
    }
}

/// Collapse unary chains of the partition tree and attach meeting lists,
/// snapshots, responsibilities, LCA tables and the inorder numbering.
pub fn compress(pt: &PartitionTree) -> CompressedTree {
    let n = pt.n;
    let seed = 0x6d65_6574u64;

    let mut nodes: Vec<Node> = (0..n)
        .map(|i| Node {
            level: 0,
            parent: None,
            children: Vec::new(),
            min_point: i as u32,
            meetings: Vec::new(),
        })
        .collect();

    // cur_node[set index at the current retained level] -> node id.
    let mut cur_node: Vec<u32> = (0..n as u32).collect();
    let mut prev_pairs: HashSet<(u32, u32)> = HashSet::new();

    for lvl in &pt.levels[1..] {
        // Group previous-level sets by their parent set here.
        let mut groups: Vec<Vec<u32>> = vec![Vec::new(); lvl.sets.len()];
        for (child, &par) in lvl.parent_of_prev.iter().enumerate() {
            groups[par as usize].push(cur_node[child]);
        }
        let mut new_cur = vec![0u32; lvl.sets.len()];
        for (si, group) in groups.iter().enumerate() {
            if group.len() == 1 {
                new_cur[si] = group[0];
            } else {
                let id = nodes.len() as u32;
                let mut children = group.clone();
                children.sort_by_key(|&c| nodes[c as usize].min_point);
                let min_point = children
                    .iter()
                    .map(|&c| nodes[c as usize].min_point)
                    .min()
                    .unwrap();
                for &c in &children {
                    nodes[c as usize].parent = Some(id);
                }
                nodes.push(Node {
                    level: lvl.j,
                    parent: None,
                    children,
                    min_point,
                    meetings: Vec::new(),
                });
                new_cur[si] = id;
            }
        }
        cur_node = new_cur;

        // Acquaintance pairs at this level, in node ids.
        let mut pairs_now: HashSet<(u32, u32)> = HashSet::new();
        for (a, l) in lvl.knows.iter().enumerate() {
            let na = cur_node[a];
            for &b in l {
                if (a as u32) < b {
                    let nb = cur_node[b as usize];
                    pairs_now.insert((na.min(nb), na.max(nb)));
                }
            }
        }
        let mut adj: SMap<u32, Vec<u32>> = smap(seed);
        for &(a, b) in &pairs_now {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
        for l in adj.values_mut() {
            l.sort_unstable();
        }
        let mut new_meetings: Vec<(u32, u32)> = pairs_now
            .iter()
            .filter(|p| !prev_pairs.contains(p))
            .copied()
            .collect();
        new_meetings.sort_unstable();
        for (a, b) in new_meetings {
            nodes[a as usize].meetings.push(MeetingRef {
                partner: b,
                level: lvl.j,
                acquaintances: adj[&a].clone(),
            });
            nodes[b as usize].meetings.push(MeetingRef {
                partner: a,
                level: lvl.j,
                acquaintances: adj[&b].clone(),
            });
        }
        prev_pairs = pairs_now;
    }
    let root = cur_node[0];

    for node in &mut nodes {
        node.meetings
            .sort_by(|x, y| (x.level, x.partner).cmp(&(y.level, y.partner)));
    }

    // Responsibility: level(parent(a)) ≤ level(parent(b)) makes a
    // responsible; both on ties.
    let parent_level = |nodes: &Vec<Node>, v: u32| -> i64 {
        match nodes[v as usize].parent {
            Some(p) => nodes[p as usize].level,
            None => i64::MAX,
        }
    };
    let mut resp: Vec<SMap<u32, i64>> = (0..nodes.len()).map(|_| smap(seed)).collect();
    for id in 0..nodes.len() as u32 {
        for mi in 0..nodes[id as usize].meetings.len() {
            let (partner, level) = {
                let m = &nodes[id as usize].meetings[mi];
                (m.partner, m.level)
            };
            if id < partner && parent_level(&nodes, id) <= parent_level(&nodes, partner) {
                resp[id as usize].insert(partner, level);
            }
            if id > partner && parent_level(&nodes, id) < parent_level(&nodes, partner) {
                resp[id as usize].insert(partner, level);
            }
        }
    }

    // Inorder numbering and Euler tour (iterative DFS, children by min point).
    let mut inorder_of_point = vec![0u32; n];
    let mut inorder_min = vec![u32::MAX; nodes.len()];
    let mut inorder_max = vec![0u32; nodes.len()];
    let mut euler: Vec<u32> = Vec::with_capacity(2 * nodes.len());
    let mut depth_at: Vec<u32> = Vec::with_capacity(2 * nodes.len());
    let mut first_occ = vec![u32::MAX; nodes.len()];
    let mut rank = 0u32;
    // Stack entries: (node, depth, next child index).
    let mut stack: Vec<(u32, u32, usize)> = vec![(root, 0, 0)];
    while let Some(&mut (v, d, ref mut ci)) = stack.last_mut() {
        if *ci == 0 {
            first_occ[v as usize] = euler.len() as u32;
            euler.push(v);
            depth_at.push(d);
            if nodes[v as usize].children.is_empty() {
                inorder_of_point[v as usize] = rank;
                inorder_min[v as usize] = rank;
                inorder_max[v as usize] = rank;
                rank += 1;
                stack.pop();
                continue;
            }
        } else {
            euler.push(v);
            depth_at.push(d);
        }
        if *ci < nodes[v as usize].children.len() {
            let c = nodes[v as usize].children[*ci];
            *ci += 1;
            stack.push((c, d + 1, 0));
        } else {
            // Pop the extra euler entry pushed above by the revisit.
            euler.pop();
            depth_at.pop();
            let mn = nodes[v as usize]
                .children
                .iter()
                .map(|&c| inorder_min[c as usize])
                .min()
                .unwrap();
            let mx = nodes[v as usize]
                .children
                .iter()
                .map(|&c| inorder_max[c as usize])
                .max()
                .unwrap();
            inorder_min[v as usize] = mn;
            inorder_max[v as usize] = mx;
            stack.pop();
            if let Some(&mut (p, pd, _)) = stack.last_mut() {
                euler.push(p);
                depth_at.push(pd);
            }
        }
    }

    // Sparse table over the Euler tour for range-minimum by depth.
    let m = euler.len();
    let levels_cnt = (usize::BITS - m.leading_zeros()) as usize;
    let mut sparse: Vec<Vec<u32>> = Vec::with_capacity(levels_cnt);
    sparse.push((0..m as u32).collect());
    let mut k = 1usize;
    while (1usize << k) <= m {
        let prev = &sparse[k - 1];
        let half = 1usize << (k - 1);
        let mut row = Vec::with_capacity(m - (1usize << k) + 1);
        for i in 0..=(m - (1usize << k)) {
            let a = prev[i];
            let b = prev[i + half];
            row.push(if depth_at[a as usize] <= depth_at[b as usize] {
                a
            } else {
                b
            });
        }
        sparse.push(row);
        k += 1;
    }

    CompressedTree {
        config: pt.config,
        n,
        nodes,
        root,
        retained_levels: pt.levels.iter().map(|l| (l.j, l.r_j)).collect(),
        seed,
        resp,
        inorder_of_point,
        inorder_min,
        inorder_max,
        euler,
        depth_at,
        first_occ,
        sparse,
    }
}

impl CompressedTree {
    /// Internal LCA tables, exposed for serialization.
    pub(crate) fn lca_blocks(&self) -> (&[u32], &[u32], &[u32], &[Vec<u32>]) {
        (&self.euler, &self.depth_at, &self.first_occ, &self.sparse)
    }

    /// Reassemble a tree from persisted blocks.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_blocks(
        config: PartitionConfig,
        n: usize,
        nodes: Vec<Node>,
        root: u32,
        retained_levels: Vec<(i64, f64)>,
        seed: u64,
        resp: Vec<SMap<u32, i64>>,
        inorder_of_point: Vec<u32>,
        inorder_min: Vec<u32>,
        inorder_max: Vec<u32>,
        euler: Vec<u32>,
        depth_at: Vec<u32>,
        first_occ: Vec<u32>,
        sparse: Vec<Vec<u32>>,
    ) -> Self {
        CompressedTree {
            config,
            n,
            nodes,
            root,
            retained_levels,
            seed,
            resp,
            inorder_of_point,
            inorder_min,
            inorder_max,
            euler,
            depth_at,
            first_occ,
            sparse,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricSpace;
    use crate::partition::{build_partition_tree, PartitionConfig};

    fn build_line(points: &[f64]) -> (MetricSpace, CompressedTree) {
        let ms =
            MetricSpace::from_points(&points.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap();
        let cfg = PartitionConfig::new(2.0, 2, ms.min_dist / 2.0).unwrap();
        let pt = build_partition_tree(&ms, cfg).unwrap();
        let t = compress(&pt);
        (ms, t)
    }

    fn build_grid(n_side: usize) -> CompressedTree {
        let mut pts = Vec::new();
        for i in 0..n_side {
            for j in 0..n_side {
                pts.push(vec![i as f64, j as f64 + 0.13 * i as f64]);
            }
        }
        let ms = MetricSpace::from_points(&pts).unwrap();
        let cfg = PartitionConfig::new(2.0, 2, ms.min_dist / 2.0).unwrap();
        compress(&build_partition_tree(&ms, cfg).unwrap())
    }

    #[test]
    fn two_points() {
        let (_, t) = build_line(&[0.0, 1.0]);
        assert_eq!(t.nodes.len(), 3);
        assert_eq!(t.nodes[t.root as usize].level, 4);
        // Leaves meet at level 2 (first r_j > 1).
        assert_eq!(t.know_query(0, 1).unwrap(), Some(2));
        assert_eq!(t.know_query(0, 0).unwrap(), Some(0));
        assert_eq!(t.lca(0, 1).unwrap(), t.root);
    }

    #[test]
    fn three_collinear() {
        let (_, t) = build_line(&[0.0, 1.0, 100.0]);
        // Leaves 0,1 merge below the root; 5 nodes total.
        assert_eq!(t.nodes.len(), 5);
        let inner = t.lca(0, 1).unwrap();
        assert_ne!(inner, t.root);
        assert_eq!(t.lca(0, 2).unwrap(), t.root);
        // Inner node's level is where {0} and {1} merge:
        // carve groups leaders iff 2^{-2}·r_j > 1, i.e. r_j > 4 → j = 4.
        assert_eq!(t.nodes[inner as usize].level, 4);
        assert!(t.know_query(0, 1).unwrap().is_some());
        assert_eq!(t.know_query(0, 2).unwrap(), t.know_query(1, 2).unwrap());
    }

    #[test]
    fn structural_invariants() {
        let t = build_grid(7); // n = 49
        let n = t.n;
        assert!(t.nodes.len() <= 2 * n - 1);
        for (id, node) in t.nodes.iter().enumerate() {
            if !node.children.is_empty() {
                assert!(node.children.len() >= 2, "inner node {id} has 1 child");
                for &c in &node.children {
                    assert!(t.nodes[c as usize].level < node.level);
                    assert_eq!(t.nodes[c as usize].parent, Some(id as u32));
                }
            }
            // Meetings sorted by level and within the node's alive range.
            for w in node.meetings.windows(2) {
                assert!((w[0].level, w[0].partner) < (w[1].level, w[1].partner));
            }
            for m in &node.meetings {
                assert!(t.alive_at(id as u32, m.level));
                assert!(t.alive_at(m.partner, m.level));
                assert!(m.acquaintances.contains(&m.partner));
            }
        }
        // Every meeting is stored in at least one responsibility dict.
        for mt in t.all_meetings() {
            assert_eq!(t.know_query(mt.a, mt.b).unwrap(), Some(mt.level));
        }
    }

    #[test]
    fn know_query_matches_meeting_lists() {
        let t = build_grid(6);
        let ids = t.nodes.len() as u32;
        for x in 0..ids {
            for y in 0..ids {
                let expected = if x == y {
                    Some(t.nodes[x as usize].level)
                } else {
                    t.nodes[x as usize]
                        .meetings
                        .iter()
                        .find(|m| m.partner == y)
                        .map(|m| m.level)
                };
                assert_eq!(t.know_query(x, y).unwrap(), expected, "x={x} y={y}");
                assert_eq!(
                    t.know_query(x, y).unwrap(),
                    t.know_query(y, x).unwrap(),
                    "symmetry"
                );
            }
        }
    }

    #[test]
    fn lca_matches_naive() {
        let t = build_grid(6);
        let parent_walk_lca = |mut u: u32, mut v: u32| -> u32 {
            let mut anc = std::collections::HashSet::new();
            loop {
                anc.insert(u);
                match t.nodes[u as usize].parent {
                    Some(p) => u = p,
                    None => break,
                }
            }
            loop {
                if anc.contains(&v) {
                    return v;
                }
                v = t.nodes[v as usize].parent.unwrap();
            }
        };
        let ids = t.nodes.len() as u32;
        for u in 0..ids {
            for v in 0..ids {
                assert_eq!(t.lca(u, v).unwrap(), parent_walk_lca(u, v), "u={u} v={v}");
            }
        }
        assert_eq!(t.lca(3, 3).unwrap(), 3);
        assert_eq!(t.lca(0, t.root).unwrap(), t.root);
    }

    #[test]
    fn inorder_intervals() {
        let t = build_grid(5);
        for (id, node) in t.nodes.iter().enumerate() {
            if node.children.is_empty() {
                assert_eq!(t.inorder_min[id], t.inorder_of_point[id]);
            } else {
                // Children intervals are contiguous, ordered, disjoint.
                let mut prev_end: Option<u32> = None;
                for &c in &node.children {
                    if let Some(pe) = prev_end {
                        assert_eq!(t.inorder_min[c as usize], pe + 1);
                    }
                    prev_end = Some(t.inorder_max[c as usize]);
                }
                assert_eq!(t.inorder_min[id], t.inorder_min[node.children[0] as usize]);
                assert_eq!(
                    t.inorder_max[id],
                    t.inorder_max[*node.children.last().unwrap() as usize]
                );
            }
        }
    }

    #[test]
    fn acquaintance_snapshots_consistent() {
        let t = build_grid(6);
        // At any meeting level, the snapshot equals the set of partners from
        // meetings at or below that level whose partner is still alive.
        for (id, node) in t.nodes.iter().enumerate() {
            for m in &node.meetings {
                let expect: Vec<u32> = {
                    let mut s: Vec<u32> = node
                        .meetings
                        .iter()
                        .filter(|m2| m2.level <= m.level && t.alive_at(m2.partner, m.level))
                        .map(|m2| m2.partner)
                        .collect();
                    s.sort_unstable();
                    s.dedup();
                    s
                };
                assert_eq!(m.acquaintances, expect, "node {id} level {}", m.level);
            }
        }
    }
}
