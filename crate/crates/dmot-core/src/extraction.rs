//! Query-phase extraction of the subtree induced by a point set S: first the
//! nodes and edges (bottom-up merge driven by an ordered dictionary of
//! neighbor lca keys), then the induced meetings (top-down, level group by
//! level group). Runs entirely on the preprocessed structure.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::hierarchy::CompressedTree;
use crate::oracles::{NaiveExtracted, NaiveNode};
use crate::path_nav::PathDecomposition;
use crate::yfast::{smap, SMap};

#[derive(Debug, Clone)]
pub struct ExtNode {
    /// Sorted point ids of S contained in this node.
    pub members: Vec<u32>,
    pub level: i64,
    pub parent: Option<u32>,
    pub children: Vec<u32>,
    /// The tree node this one is the S-intersection of (lowest such).
    pub origin: u32,
    /// (partner extracted node, meeting level), sorted by (level, partner).
    pub meetings: Vec<(u32, i64)>,
}

#[derive(Debug, Clone)]
pub struct ExtractedTree {
    pub nodes: Vec<ExtNode>,
    pub root: u32,
    /// point id -> extracted leaf node.
    pub leaf_of: SMap<u32, u32>,
}

impl ExtractedTree {
    /// Reference form used by the test suites to compare against the
    /// brute-force induced definition.
    pub fn canonical(&self) -> NaiveExtracted {
        let mut idx: Vec<usize> = (0..self.nodes.len()).collect();
        idx.sort_by(|&a, &b| self.nodes[a].members.cmp(&self.nodes[b].members));
        let mut pos = vec![0usize; self.nodes.len()];
        for (new, &old) in idx.iter().enumerate() {
            pos[old] = new;
        }
        let mut nodes: Vec<NaiveNode> = idx
            .iter()
            .map(|&old| {
                let n = &self.nodes[old];
                let mut meetings: Vec<(usize, i64)> =
                    n.meetings.iter().map(|&(p, l)| (pos[p as usize], l)).collect();
                meetings.sort_unstable();
                NaiveNode {
                    members: n.members.clone(),
                    level: n.level,
                    parent: n.parent.map(|p| pos[p as usize]),
                    origin: n.origin,
                    meetings,
                }
            })
            .collect();
        for n in &mut nodes {
            n.meetings.sort_unstable();
        }
        NaiveExtracted {
            nodes,
            root: pos[self.root as usize],
        }
    }
}

/// Phase one: nodes and edges of the induced subtree.
pub fn extract_nodes(t: &CompressedTree, s: &[u32]) -> Result<ExtractedTree> {
    if s.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let mut pts = s.to_vec();
    pts.sort_unstable();
    pts.dedup();
    for &p in &pts {
        if p as usize >= t.n {
            return Err(Error::UnknownPoint(p as usize));
        }
    }

    // Leaves sorted left-to-right by tree inorder.
    let mut leaves: Vec<u32> = pts.clone();
    leaves.sort_by_key(|&p| t.inorder_of_point[p as usize]);

    let mut nodes: Vec<ExtNode> = Vec::with_capacity(2 * pts.len());
    let mut leaf_of: SMap<u32, u32> = smap(t.seed);
    for &p in &leaves {
        leaf_of.insert(p, nodes.len() as u32);
        nodes.push(ExtNode {
            members: vec![p],
            level: 0,
            parent: None,
            children: Vec::new(),
            origin: p,
            meetings: Vec::new(),
        });
    }

    // Live representative of a (possibly merged) extracted node.
    let mut rep: Vec<u32> = (0..nodes.len() as u32).collect();
    fn find(rep: &mut Vec<u32>, x: u32) -> u32 {
        if rep[x as usize] != x {
            let r = find(rep, rep[x as usize]);
            rep[x as usize] = r;
        }
        rep[x as usize]
    }

    // M: (level of lca, lca) -> pending neighbor pairs. P: inorder rank of
    // the smallest member -> live extracted node.
    let mut m: BTreeMap<(i64, u32), Vec<(u32, u32)>> = BTreeMap::new();
    let mut p: BTreeMap<u32, u32> = BTreeMap::new();
    let pair_key = |t: &CompressedTree, a: u32, b: u32, nodes: &Vec<ExtNode>| -> (i64, u32) {
        let c = t.lca(nodes[a as usize].origin, nodes[b as usize].origin).unwrap();
        (t.nodes[c as usize].level, c)
    };
    for (i, &pt) in leaves.iter().enumerate() {
        p.insert(t.inorder_of_point[pt as usize], leaf_of[&pt]);
        if i + 1 < leaves.len() {
            let (a, b) = (leaf_of[&pt], leaf_of[&leaves[i + 1]]);
            m.entry(pair_key(t, a, b, &nodes)).or_default().push((a, b));
        }
    }

    while let Some((&key, _)) = m.iter().next() {
        let pairs = m.remove(&key).unwrap();
        let (level, c) = key;
        // Current endpoints; stale pairs collapse onto live nodes.
        let mut group: Vec<u32> = Vec::new();
        for (a, b) in pairs {
            let (ra, rb) = (find(&mut rep, a), find(&mut rep, b));
            if ra != rb {
                group.push(ra);
                group.push(rb);
            }
        }
        group.sort_unstable();
        group.dedup();
        if group.len() < 2 {
            continue;
        }
        let q = nodes.len() as u32;
        let mut children = group.clone();
        children.sort_by_key(|&g| nodes[g as usize].members[0]);
        let mut members = Vec::new();
        let mut min_rank = u32::MAX;
        for &g in &children {
            members.extend_from_slice(&nodes[g as usize].members);
            nodes[g as usize].parent = Some(q);
            let mr = nodes[g as usize]
                .members
                .iter()
                .map(|&pt| t.inorder_of_point[pt as usize])
                .min()
                .unwrap();
            min_rank = min_rank.min(mr);
            p.remove(&mr);
        }
        members.sort_unstable();
        nodes.push(ExtNode {
            members,
            level,
            parent: None,
            children,
            origin: c,
            meetings: Vec::new(),
        });
        rep.push(q);
        for &g in &nodes[q as usize].children.clone() {
            rep[g as usize] = q;
        }
        p.insert(min_rank, q);
        // Re-pair with both neighbors in P.
        if let Some((_, &left)) = p.range(..min_rank).next_back() {
            m.entry(pair_key(t, left, q, &nodes)).or_default().push((left, q));
        }
        if let Some((_, &right)) = p.range(min_rank + 1..).next() {
            m.entry(pair_key(t, q, right, &nodes)).or_default().push((q, right));
        }
    }
    debug_assert_eq!(p.len(), 1);
    let root = *p.values().next().unwrap();

    Ok(ExtractedTree {
        nodes,
        root,
        leaf_of,
    })
}

/// Phase two: induced meetings, generated top-down by level groups.
pub fn extract_meetings(
    t: &CompressedTree,
    pd: &PathDecomposition,
    et: &mut ExtractedTree,
) -> Result<()> {
    // Group internal nodes by level, descending.
    let mut internal: Vec<u32> = (0..et.nodes.len() as u32)
        .filter(|&v| !et.nodes[v as usize].children.is_empty())
        .collect();
    internal.sort_by_key(|&v| std::cmp::Reverse(et.nodes[v as usize].level));

    let record = |nodes: &mut Vec<ExtNode>, a: u32, b: u32, l: i64| {
        nodes[a as usize].meetings.push((b, l));
        nodes[b as usize].meetings.push((a, l));
    };

    let mut gi = 0;
    while gi < internal.len() {
        let lvl = et.nodes[internal[gi] as usize].level;
        let mut gj = gi;
        while gj < internal.len() && et.nodes[internal[gj] as usize].level == lvl {
            gj += 1;
        }
        let group = &internal[gi..gj];
        gi = gj;

        // Marked set L: for each child, the first tree node on the way down
        // from its parent's origin; maps back to the child.
        let mut l_of: SMap<u32, u32> = smap(t.seed);
        for &u in group {
            let uo = et.nodes[u as usize].origin;
            for &v in &et.nodes[u as usize].children {
                let vo = et.nodes[v as usize].origin;
                let leaf = t.nodes[vo as usize].min_point;
                let x = pd.level_ancestor_jump(t, leaf, t.nodes[uo as usize].level - 1)?;
                debug_assert_eq!(t.nodes[x as usize].parent, Some(uo));
                l_of.insert(x, v);
            }
        }

        // Type 1: both parents in this group. Scan meetings between marked
        // nodes, then pin the exact level with meet on the origins.
        let mut marked: Vec<u32> = l_of.keys().copied().collect();
        marked.sort_unstable();
        for &x in &marked {
            for mt in &t.nodes[x as usize].meetings {
                if mt.partner < x {
                    continue; // each unordered pair once
                }
                if let Some(&vj) = l_of.get(&mt.partner) {
                    let vi = l_of[&x];
                    let oi = et.nodes[vi as usize].origin;
                    let oj = et.nodes[vj as usize].origin;
                    let l = pd.meet_nodes(t, oi, oj)?;
                    debug_assert!(l < lvl);
                    record(&mut et.nodes, vi, vj, l);
                }
            }
        }

        // Type 2: the partner's parent lies above this group. Every such
        // meeting descends from a meeting the parent received at its own
        // creation level.
        for &u in group {
            let up_meetings: Vec<(u32, i64)> = et.nodes[u as usize]
                .meetings
                .iter()
                .copied()
                .filter(|&(_, l)| l == lvl)
                .collect();
            for (w, _) in up_meetings {
                let wp = et.nodes[w as usize].parent;
                let wp_level = wp.map_or(i64::MAX, |p| et.nodes[p as usize].level);
                if wp_level <= lvl {
                    continue;
                }
                let wo = et.nodes[w as usize].origin;
                for v in et.nodes[u as usize].children.clone() {
                    let vo = et.nodes[v as usize].origin;
                    let l = pd.meet_nodes(t, vo, wo)?;
                    if l < lvl {
                        record(&mut et.nodes, v, w, l);
                    }
                }
            }
        }
    }

    for n in &mut et.nodes {
        n.meetings.sort_by_key(|&(p, l)| (l, p));
        n.meetings.dedup();
    }
    Ok(())
}

/// Both phases: the complete induced subtree with meetings.
pub fn extract_subtree(
    t: &CompressedTree,
    pd: &PathDecomposition,
    s: &[u32],
) -> Result<ExtractedTree> {
    let mut et = extract_nodes(t, s)?;
    extract_meetings(t, pd, &mut et)?;
    Ok(et)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::compress;
    use crate::metric::MetricSpace;
    use crate::oracles::naive_extract;
    use crate::partition::{build_partition_tree, PartitionConfig};
    use crate::path_nav::build_path_decomposition;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn build(n: usize, seed: u64) -> (CompressedTree, PathDecomposition) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let ms = MetricSpace::from_points(&pts).unwrap();
        let cfg = PartitionConfig::new(2.0, 2, ms.min_dist / 2.0).unwrap();
        let t = compress(&build_partition_tree(&ms, cfg).unwrap());
        let pd = build_path_decomposition(&t);
        (t, pd)
    }

    #[test]
    fn singleton_and_pair() {
        let (t, pd) = build(20, 1);
        let one = extract_subtree(&t, &pd, &[5]).unwrap();
        assert_eq!(one.nodes.len(), 1);
        assert_eq!(one.root, 0);
        assert!(one.nodes[0].meetings.is_empty());

        let two = extract_subtree(&t, &pd, &[3, 11]).unwrap();
        assert_eq!(two.nodes.len(), 3);
        let root = &two.nodes[two.root as usize];
        assert_eq!(root.members, vec![3, 11]);
        assert_eq!(root.origin, t.lca(3, 11).unwrap());
        // Single leaf-leaf meeting at meet(3, 11).
        let l = pd.meet(&t, 3, 11).unwrap();
        let a = two.leaf_of[&3];
        assert_eq!(two.nodes[a as usize].meetings, vec![(two.leaf_of[&11], l)]);
    }

    #[test]
    fn full_set_is_identity() {
        let (t, pd) = build(32, 2);
        let all: Vec<u32> = (0..32).collect();
        let et = extract_subtree(&t, &pd, &all).unwrap();
        assert_eq!(et.nodes.len(), t.nodes.len());
        let canon = et.canonical();
        let want = naive_extract(&t, &all).unwrap();
        assert_eq!(canon, want);
        // Meetings match the tree's own lists in count.
        let tree_meetings: usize = t.nodes.iter().map(|n| n.meetings.len()).sum();
        let ext_meetings: usize = et.nodes.iter().map(|n| n.meetings.len()).sum();
        assert_eq!(tree_meetings, ext_meetings);
    }

    #[test]
    fn random_subsets_match_oracle() {
        for seed in 0..4 {
            let (t, pd) = build(48, seed * 3 + 7);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..60 {
                let k = rng.gen_range(1..=12);
                let mut s: Vec<u32> = (0..48).collect();
                s.shuffle(&mut rng);
                s.truncate(k);
                s.sort_unstable();
                let et = extract_subtree(&t, &pd, &s).unwrap();
                assert!(et.nodes.len() <= 2 * k - 1 || k == 1);
                for n in &et.nodes {
                    assert!(n.children.is_empty() || n.children.len() >= 2);
                }
                assert_eq!(et.canonical(), naive_extract(&t, &s).unwrap(), "S = {s:?}");
            }
        }
    }

    #[test]
    fn nested_queries_are_consistent() {
        let (t, pd) = build(40, 9);
        let big: Vec<u32> = (0..20).collect();
        let small: Vec<u32> = (0..8).collect();
        let eb = extract_subtree(&t, &pd, &big).unwrap();
        let es = extract_subtree(&t, &pd, &small).unwrap();
        // Every node of the small subtree appears as intersection of some
        // node of the big one with the small set.
        for n in &es.nodes {
            let found = eb.nodes.iter().any(|b| {
                let inter: Vec<u32> = b
                    .members
                    .iter()
                    .copied()
                    .filter(|m| small.contains(m))
                    .collect();
                inter == n.members
            });
            assert!(found, "missing {:?}", n.members);
        }
    }

    #[test]
    fn error_cases() {
        let (t, pd) = build(10, 4);
        assert!(matches!(
            extract_subtree(&t, &pd, &[]),
            Err(Error::EmptyQuery)
        ));
        assert!(matches!(
            extract_subtree(&t, &pd, &[99]),
            Err(Error::UnknownPoint(99))
        ));
    }
}
