//! Brute-force reference implementations used by tests and verification
//! mode. These walk the tree naively or enumerate exhaustively and may read
//! the metric directly; they deliberately share no code with the fast
//! structures they validate.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::hierarchy::CompressedTree;
use crate::metric::MetricSpace;

/// Parent walk: the ancestor of v alive at level j (v's own level must be
/// at most j).
fn anc(t: &CompressedTree, v: u32, j: i64) -> u32 {
    let mut cur = v;
    loop {
        match t.nodes[cur as usize].parent {
            Some(p) if t.nodes[p as usize].level <= j => cur = p,
            _ => return cur,
        }
    }
}

fn knows_at(t: &CompressedTree, a: u32, b: u32, j: i64) -> bool {
    t.nodes[a as usize]
        .meetings
        .iter()
        .any(|m| m.partner == b && m.level <= j)
}

/// Lowest level at which the ancestors of u and v know each other (being
/// equal counts), found by scanning retained levels upward.
pub fn naive_meet(t: &CompressedTree, u: u32, v: u32) -> i64 {
    let start = t.nodes[u as usize].level.max(t.nodes[v as usize].level);
    for &(j, _) in &t.retained_levels {
        if j < start {
            continue;
        }
        let a = anc(t, u, j);
        let b = anc(t, v, j);
        if a == b || knows_at(t, a, b, j) {
            return j;
        }
    }
    t.nodes[t.root as usize].level
}

/// First meeting at level >= i on v's root walk: scan every ancestor's
/// meeting list, pick the lowest level, then the smallest partner.
pub fn naive_meeting_jump(t: &CompressedTree, v: u32, i: i64) -> Result<(u32, u32, i64)> {
    let mut best: Option<(i64, u32, u32)> = None;
    let mut cur = v;
    loop {
        for m in &t.nodes[cur as usize].meetings {
            if m.level >= i {
                let cand = (m.level, m.partner, cur);
                if best.map_or(true, |b| cand < b) {
                    best = Some(cand);
                }
            }
        }
        match t.nodes[cur as usize].parent {
            Some(p) => cur = p,
            None => break,
        }
    }
    match best {
        Some((level, partner, node)) => Ok((node, partner, level)),
        None => Err(Error::NoMeetingAbove(i)),
    }
}

/// Deepest ancestor of v with level <= j, by parent walk.
pub fn naive_level_ancestor(t: &CompressedTree, v: u32, j: i64) -> u32 {
    anc(t, v, j)
}

/// For every retained level l in [i, j]: the ancestor of x alive at l and
/// the nodes it knows there (partner alive, meeting at or below l).
pub fn naive_known_sets(
    t: &CompressedTree,
    x: u32,
    i: i64,
    j: i64,
) -> Result<Vec<(i64, u32, Vec<u32>)>> {
    if i > j {
        return Err(Error::InvalidRange(i, j));
    }
    let mut out = Vec::new();
    for &(l, _) in &t.retained_levels {
        if l < i || l > j {
            continue;
        }
        let a = anc(t, x, l);
        let mut known: Vec<u32> = t.nodes[a as usize]
            .meetings
            .iter()
            .filter(|m| m.level <= l && t.alive_at(m.partner, l))
            .map(|m| m.partner)
            .collect();
        known.sort_unstable();
        out.push((l, a, known));
    }
    Ok(out)
}

/// Induced-subtree reference: nodes as sorted member lists with levels,
/// subset-order parents, lca origins, and induced meetings.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveExtracted {
    pub nodes: Vec<NaiveNode>,
    pub root: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveNode {
    pub members: Vec<u32>,
    pub level: i64,
    pub parent: Option<usize>,
    pub origin: u32,
    /// (partner node index, level), sorted.
    pub meetings: Vec<(usize, i64)>,
}

/// Brute-force S-subtree straight from the definitions: intersect every
/// tree node with S, dedupe, order by inclusion, induce meetings.
pub fn naive_extract(t: &CompressedTree, s: &[u32]) -> Result<NaiveExtracted> {
    if s.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let mut in_s = vec![false; t.n];
    for &p in s {
        if p as usize >= t.n {
            return Err(Error::UnknownPoint(p as usize));
        }
        in_s[p as usize] = true;
    }
    let mut point_by_rank = vec![0u32; t.n];
    for p in 0..t.n {
        point_by_rank[t.inorder_of_point[p] as usize] = p as u32;
    }
    let members_of = |a: u32| -> Vec<u32> {
        let mut m: Vec<u32> = (t.inorder_min[a as usize]..=t.inorder_max[a as usize])
            .map(|r| point_by_rank[r as usize])
            .filter(|&p| in_s[p as usize])
            .collect();
        m.sort_unstable();
        m
    };

    // Distinct nonempty intersections, keeping the lowest originating level
    // and the lowest originating tree node (= lca of the members).
    let mut map: BTreeMap<Vec<u32>, (i64, u32)> = BTreeMap::new();
    for a in 0..t.nodes.len() as u32 {
        let mem = members_of(a);
        if mem.is_empty() {
            continue;
        }
        let lvl = t.nodes[a as usize].level;
        map.entry(mem)
            .and_modify(|e| {
                if lvl < e.0 {
                    *e = (lvl, a);
                }
            })
            .or_insert((lvl, a));
    }
    let keys: Vec<Vec<u32>> = map.keys().cloned().collect();
    let index_of: BTreeMap<&Vec<u32>, usize> = keys.iter().zip(0..).collect();

    // Parent of Q = the smallest strict superset.
    let is_subset = |a: &[u32], b: &[u32]| -> bool {
        a.len() <= b.len() && {
            let mut it = b.iter();
            a.iter().all(|x| it.any(|y| y == x))
        }
    };
    let mut nodes: Vec<NaiveNode> = Vec::with_capacity(keys.len());
    let mut root = 0;
    for (qi, q) in keys.iter().enumerate() {
        let mut parent: Option<usize> = None;
        for (ri, r) in keys.iter().enumerate() {
            if r.len() > q.len() && is_subset(q, r) {
                if parent.map_or(true, |p| keys[p].len() > r.len()) {
                    parent = Some(ri);
                }
            }
        }
        if parent.is_none() {
            root = qi;
        }
        let (level, origin) = map[q];
        nodes.push(NaiveNode {
            members: q.clone(),
            level,
            parent,
            origin,
            meetings: Vec::new(),
        });
    }

    // Induced meetings: project every tree meeting, keep the minimal level
    // per unordered pair of extracted nodes.
    let mut induced: BTreeMap<(usize, usize), i64> = BTreeMap::new();
    for mt in t.all_meetings() {
        let qa = members_of(mt.a);
        let qb = members_of(mt.b);
        if qa.is_empty() || qb.is_empty() {
            continue;
        }
        let (ia, ib) = (index_of[&qa], index_of[&qb]);
        let key = (ia.min(ib), ia.max(ib));
        induced
            .entry(key)
            .and_modify(|l| *l = (*l).min(mt.level))
            .or_insert(mt.level);
    }
    for (&(ia, ib), &l) in &induced {
        nodes[ia].meetings.push((ib, l));
        nodes[ib].meetings.push((ia, l));
    }
    for node in &mut nodes {
        node.meetings.sort_unstable();
    }
    Ok(NaiveExtracted { nodes, root })
}

// ---------------------------------------------------------------------------
// Exact solvers on the true metric.
// ---------------------------------------------------------------------------

/// Exact MST over the given points (Kruskal); returns (weight, edges).
pub fn exact_mst(ms: &MetricSpace, pts: &[usize]) -> (f64, Vec<(usize, usize)>) {
    let k = pts.len();
    if k <= 1 {
        return (0.0, Vec::new());
    }
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            edges.push((ms.d(pts[i], pts[j]), i, j));
        }
    }
    edges.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut dsu: Vec<usize> = (0..k).collect();
    fn find(dsu: &mut Vec<usize>, x: usize) -> usize {
        if dsu[x] != x {
            let r = find(dsu, dsu[x]);
            dsu[x] = r;
        }
        dsu[x]
    }
    let mut weight = 0.0;
    let mut out = Vec::with_capacity(k - 1);
    for (w, i, j) in edges {
        let (ri, rj) = (find(&mut dsu, i), find(&mut dsu, j));
        if ri != rj {
            dsu[ri] = rj;
            weight += w;
            out.push((pts[i], pts[j]));
            if out.len() == k - 1 {
                break;
            }
        }
    }
    (weight, out)
}

/// Independent MST route (Prim), weight only; used to validate the Kruskal.
pub fn exact_mst_prim(ms: &MetricSpace, pts: &[usize]) -> f64 {
    let k = pts.len();
    if k <= 1 {
        return 0.0;
    }
    let mut in_tree = vec![false; k];
    let mut best = vec![f64::INFINITY; k];
    in_tree[0] = true;
    for i in 1..k {
        best[i] = ms.d(pts[0], pts[i]);
    }
    let mut weight = 0.0;
    for _ in 1..k {
        let mut pick = usize::MAX;
        for i in 0..k {
            if !in_tree[i] && (pick == usize::MAX || best[i] < best[pick]) {
                pick = i;
            }
        }
        in_tree[pick] = true;
        weight += best[pick];
        for i in 0..k {
            if !in_tree[i] {
                best[i] = best[i].min(ms.d(pts[pick], pts[i]));
            }
        }
    }
    weight
}

/// Optimal TSP cycle length via Held–Karp; supports up to ~14 points.
pub fn exact_tsp(ms: &MetricSpace, pts: &[usize]) -> f64 {
    let k = pts.len();
    match k {
        0 | 1 => return 0.0,
        2 => return 2.0 * ms.d(pts[0], pts[1]),
        _ => {}
    }
    // dp[mask][i]: shortest path starting at 0, covering mask, ending at i.
    let full = 1usize << (k - 1); // masks over points 1..k
    let mut dp = vec![vec![f64::INFINITY; k - 1]; full];
    for i in 0..k - 1 {
        dp[1 << i][i] = ms.d(pts[0], pts[i + 1]);
    }
    for mask in 1..full {
        for i in 0..k - 1 {
            let cur = dp[mask][i];
            if !cur.is_finite() || mask & (1 << i) == 0 {
                continue;
            }
            for j in 0..k - 1 {
                if mask & (1 << j) == 0 {
                    let nm = mask | (1 << j);
                    let nd = cur + ms.d(pts[i + 1], pts[j + 1]);
                    if nd < dp[nm][j] {
                        dp[nm][j] = nd;
                    }
                }
            }
        }
    }
    let mut best = f64::INFINITY;
    for i in 0..k - 1 {
        best = best.min(dp[full - 1][i] + ms.d(pts[i + 1], pts[0]));
    }
    best
}

/// Optimal Steiner tree weight over a ground set, connecting the terminals,
/// via the Dreyfus–Wagner dynamic program on the metric closure.
pub fn exact_steiner(ms: &MetricSpace, ground: &[usize], terminals: &[usize]) -> f64 {
    let tk = terminals.len();
    if tk <= 1 {
        return 0.0;
    }
    let g = ground.len();
    let full = 1usize << tk;
    let mut dp = vec![vec![f64::INFINITY; g]; full];
    for (ti, &t) in terminals.iter().enumerate() {
        for (vi, &v) in ground.iter().enumerate() {
            dp[1 << ti][vi] = ms.d(v, t);
        }
    }
    for mask in 1..full {
        if mask.count_ones() < 2 {
            continue;
        }
        // Merge two subtrees at v.
        for vi in 0..g {
            let mut sub = (mask - 1) & mask;
            while sub > 0 {
                if sub < mask - sub {
                    break; // each split seen once
                }
                let cand = dp[sub][vi] + dp[mask ^ sub][vi];
                if cand < dp[mask][vi] {
                    dp[mask][vi] = cand;
                }
                sub = (sub - 1) & mask;
            }
        }
        // One metric-closure relaxation round (direct edges suffice).
        for vi in 0..g {
            let mut best = dp[mask][vi];
            for ui in 0..g {
                let cand = dp[mask][ui] + ms.d(ground[ui], ground[vi]);
                if cand < best {
                    best = cand;
                }
            }
            dp[mask][vi] = best;
        }
    }
    let mut best = f64::INFINITY;
    for vi in 0..g {
        best = best.min(dp[full - 1][vi]);
    }
    best
}

/// Optimal facility location by enumerating all nonempty facility subsets.
pub fn exact_fl(ms: &MetricSpace, cities: &[usize], facilities: &[usize], costs: &[f64]) -> f64 {
    assert_eq!(facilities.len(), costs.len());
    let fk = facilities.len();
    let mut best = f64::INFINITY;
    for mask in 1usize..(1 << fk) {
        let mut total = 0.0;
        for i in 0..fk {
            if mask & (1 << i) != 0 {
                total += costs[i];
            }
        }
        for &c in cities {
            let mut near = f64::INFINITY;
            for i in 0..fk {
                if mask & (1 << i) != 0 {
                    near = near.min(ms.d(c, facilities[i]));
                }
            }
            total += near;
        }
        best = best.min(total);
    }
    best
}

/// Optimal r-center radius by enumerating all center subsets of size r.
pub fn exact_kcenter(ms: &MetricSpace, pts: &[usize], r: usize) -> f64 {
    let k = pts.len();
    assert!(r >= 1 && r <= k);
    let mut best = f64::INFINITY;
    let mut centers = vec![0usize; r];
    fn rec(
        ms: &MetricSpace,
        pts: &[usize],
        r: usize,
        start: usize,
        depth: usize,
        centers: &mut Vec<usize>,
        best: &mut f64,
    ) {
        if depth == r {
            let mut radius: f64 = 0.0;
            for &p in pts {
                let mut near = f64::INFINITY;
                for &c in centers.iter() {
                    near = near.min(ms.d(p, c));
                }
                radius = radius.max(near);
                if radius >= *best {
                    return;
                }
            }
            *best = radius;
            return;
        }
        for i in start..pts.len() {
            centers[depth] = pts[i];
            rec(ms, pts, r, i + 1, depth + 1, centers, best);
        }
    }
    rec(ms, pts, r, 0, 0, &mut centers, &mut best);
    best
}
