//! Approximation solvers running on the pseudospanner, plus the
//! preprocessing/query reduction for facility location with unrestricted
//! facilities (per-point shortlists of candidate facilities read off the
//! meeting-subdivided tree).

use crate::error::{Error, Result};
use crate::extraction::extract_subtree;
use crate::hierarchy::CompressedTree;
use crate::partition::PartitionConfig;
use crate::path_nav::PathDecomposition;
use crate::spanner::{build_pseudospanner, Pseudospanner};
use crate::yfast::{smap, SMap};

/// Upper bound on the distance between points of two sets that know each
/// other at level j.
pub fn visibility(config: &PartitionConfig, j: i64) -> f64 {
    (1.0 + 4.0 * config.tau * 2f64.powi(-(config.eta as i32)) / (config.tau - 1.0))
        * config.tau
        * config.radius(j)
}

#[derive(Debug, Clone)]
pub struct FlSolution {
    pub open: Vec<u32>,
    /// (city, assigned facility).
    pub assignment: Vec<(u32, u32)>,
    pub opening_cost: f64,
    pub connection_cost: f64,
}

impl FlSolution {
    pub fn cost(&self) -> f64 {
        self.opening_cost + self.connection_cost
    }
}

fn kruskal(n: usize, mut edges: Vec<(f64, u32, u32)>) -> (f64, Vec<(u32, u32)>) {
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut dsu: Vec<u32> = (0..n as u32).collect();
    fn find(dsu: &mut Vec<u32>, x: u32) -> u32 {
        if dsu[x as usize] != x {
            let r = find(dsu, dsu[x as usize]);
            dsu[x as usize] = r;
        }
        dsu[x as usize]
    }
    let mut weight = 0.0;
    let mut out = Vec::new();
    for (w, a, b) in edges {
        let (ra, rb) = (find(&mut dsu, a), find(&mut dsu, b));
        if ra != rb {
            dsu[ra as usize] = rb;
            weight += w;
            out.push((a, b));
        }
    }
    (weight, out)
}

/// Exact MST of the spanner graph; edges reported as point-id pairs.
pub fn approx_mst(sp: &Pseudospanner) -> (f64, Vec<(u32, u32)>) {
    let edges: Vec<(f64, u32, u32)> = sp.edges.iter().map(|&(a, b, w)| (w, a, b)).collect();
    let (weight, tree) = kruskal(sp.len(), edges);
    (
        weight,
        tree.iter()
            .map(|&(a, b)| (sp.points[a as usize], sp.points[b as usize]))
            .collect(),
    )
}

/// Doubled-MST tour: DFS preorder of the spanner MST, length measured in
/// spanner shortest-path distance.
pub fn tsp_tour(sp: &Pseudospanner) -> (f64, Vec<u32>) {
    let k = sp.len();
    if k <= 1 {
        return (0.0, sp.points.clone());
    }
    let edges: Vec<(f64, u32, u32)> = sp.edges.iter().map(|&(a, b, w)| (w, a, b)).collect();
    let (_, tree) = kruskal(k, edges);
    let mut adj = vec![Vec::new(); k];
    for &(a, b) in &tree {
        adj[a as usize].push(b);
        adj[b as usize].push(a);
    }
    for l in &mut adj {
        l.sort_unstable();
    }
    let mut order = Vec::with_capacity(k);
    let mut seen = vec![false; k];
    let mut stack = vec![0u32];
    while let Some(v) = stack.pop() {
        if seen[v as usize] {
            continue;
        }
        seen[v as usize] = true;
        order.push(v);
        for &c in adj[v as usize].iter().rev() {
            if !seen[c as usize] {
                stack.push(c);
            }
        }
    }
    let apsp = sp.all_pairs();
    let mut length = 0.0;
    for i in 0..k {
        let (a, b) = (order[i] as usize, order[(i + 1) % k] as usize);
        length += apsp[a][b];
    }
    (length, order.iter().map(|&v| sp.points[v as usize]).collect())
}

/// Steiner tree over the query set: with the extraction already restricted
/// to the terminals, this is the spanner MST.
pub fn steiner_tree(sp: &Pseudospanner) -> (f64, Vec<(u32, u32)>) {
    approx_mst(sp)
}

/// Primal-dual Steiner forest on the spanner graph: grow moats around
/// active components, then prune edges not needed by any pair.
pub fn steiner_forest(sp: &Pseudospanner, pairs: &[(u32, u32)]) -> Result<(f64, Vec<(u32, u32)>)> {
    let k = sp.len();
    for &(a, b) in pairs {
        if !sp.index_of.contains_key(&a) {
            return Err(Error::EndpointNotInQuery(a as usize));
        }
        if !sp.index_of.contains_key(&b) {
            return Err(Error::EndpointNotInQuery(b as usize));
        }
    }
    let pairs_idx: Vec<(u32, u32)> = pairs
        .iter()
        .map(|&(a, b)| (sp.index_of[&a], sp.index_of[&b]))
        .filter(|&(a, b)| a != b)
        .collect();
    if pairs_idx.is_empty() {
        return Ok((0.0, Vec::new()));
    }

    let mut comp: Vec<u32> = (0..k as u32).collect();
    fn find(comp: &mut Vec<u32>, x: u32) -> u32 {
        if comp[x as usize] != x {
            let r = find(comp, comp[x as usize]);
            comp[x as usize] = r;
        }
        comp[x as usize]
    }
    let active = |comp: &mut Vec<u32>, pairs_idx: &[(u32, u32)], c: u32| -> bool {
        pairs_idx.iter().any(|&(a, b)| {
            let (ra, rb) = (find(comp, a), find(comp, b));
            ra != rb && (ra == c || rb == c)
        })
    };
    // Moat simulation on edges: remaining slack per edge shrinks at the
    // rate of active endpoints' components.
    let mut slack: Vec<f64> = sp.edges.iter().map(|e| e.2).collect();
    let mut chosen: Vec<usize> = Vec::new();
    loop {
        let mut any_active = false;
        let mut best: Option<(f64, usize)> = None;
        for (ei, &(a, b, _)) in sp.edges.iter().enumerate() {
            let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
            if ra == rb {
                continue;
            }
            let rate = active(&mut comp, &pairs_idx, ra) as u32 as f64
                + active(&mut comp, &pairs_idx, rb) as u32 as f64;
            if rate == 0.0 {
                continue;
            }
            any_active = true;
            let t = slack[ei] / rate;
            if best.map_or(true, |(bt, _)| t < bt) {
                best = Some((t, ei));
            }
        }
        if !any_active {
            break;
        }
        let (dt, emin) = best.expect("an active component has an outgoing edge");
        // Advance time: shrink every cross edge with an active endpoint.
        for (ei, &(a, b, _)) in sp.edges.iter().enumerate() {
            let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
            if ra == rb {
                continue;
            }
            let rate = active(&mut comp, &pairs_idx, ra) as u32 as f64
                + active(&mut comp, &pairs_idx, rb) as u32 as f64;
            slack[ei] -= dt * rate;
        }
        let (a, b, _) = sp.edges[emin];
        let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
        comp[ra as usize] = rb;
        chosen.push(emin);
    }

    // Reverse-delete prune: drop any chosen edge whose removal leaves all
    // pairs connected through the remaining chosen edges.
    let mut keep: Vec<bool> = vec![true; chosen.len()];
    for i in (0..chosen.len()).rev() {
        keep[i] = false;
        let mut dsu: Vec<u32> = (0..k as u32).collect();
        for (j, &ei) in chosen.iter().enumerate() {
            if keep[j] {
                let (a, b, _) = sp.edges[ei];
                let (ra, rb) = (find(&mut dsu, a), find(&mut dsu, b));
                dsu[ra as usize] = rb;
            }
        }
        let ok = pairs_idx
            .iter()
            .all(|&(a, b)| find(&mut dsu, a) == find(&mut dsu, b));
        if !ok {
            keep[i] = true;
        }
    }
    let mut weight = 0.0;
    let mut out = Vec::new();
    for (j, &ei) in chosen.iter().enumerate() {
        if keep[j] {
            let (a, b, w) = sp.edges[ei];
            weight += w;
            out.push((sp.points[a as usize], sp.points[b as usize]));
        }
    }
    Ok((weight, out))
}

/// Farthest-point greedy centers under the spanner metric; returns the
/// covering radius, the centers, and each point's assigned center.
pub fn k_center(sp: &Pseudospanner, r: usize) -> Result<(f64, Vec<u32>, Vec<u32>)> {
    let k = sp.len();
    if r < 1 || r > k {
        return Err(Error::InvalidR(r));
    }
    let mut centers = vec![0u32];
    let mut dist = sp.shortest_paths(0).0;
    let mut assigned = vec![0u32; k];
    while centers.len() < r {
        let far = (0..k)
            .max_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap())
            .unwrap() as u32;
        if dist[far as usize] == 0.0 {
            break;
        }
        centers.push(far);
        let nd = sp.shortest_paths(far).0;
        for v in 0..k {
            if nd[v] < dist[v] {
                dist[v] = nd[v];
                assigned[v] = far;
            }
        }
    }
    let radius = dist.iter().cloned().fold(0.0f64, f64::max);
    Ok((
        radius,
        centers.iter().map(|&c| sp.points[c as usize]).collect(),
        assigned.iter().map(|&c| sp.points[c as usize]).collect(),
    ))
}

/// Greedy facility location on the spanner metric: repeatedly open the most
/// cost-effective star (opened facilities recost to zero), the classic
/// 1.861-factor greedy.
pub fn facility_location_restricted(
    sp: &Pseudospanner,
    cities: &[u32],
    facilities: &[u32],
    costs: &[f64],
) -> Result<FlSolution> {
    if facilities.is_empty() {
        return Err(Error::NoFacilities);
    }
    assert_eq!(facilities.len(), costs.len());
    // Distances city x facility under the spanner metric.
    let dist: Vec<Vec<f64>> = facilities
        .iter()
        .map(|&f| {
            let (d, _) = sp.shortest_paths(sp.index_of[&f]);
            cities
                .iter()
                .map(|&c| d[sp.index_of[&c] as usize])
                .collect()
        })
        .collect();

    let mut fcost = costs.to_vec();
    let mut opened = vec![false; facilities.len()];
    let mut connected: Vec<Option<u32>> = vec![None; cities.len()];
    while connected.iter().any(|c| c.is_none()) {
        // Most cost-effective star: facility + prefix of its nearest
        // unconnected cities.
        let mut best: Option<(f64, usize, Vec<usize>)> = None;
        for fi in 0..facilities.len() {
            let mut cand: Vec<usize> = (0..cities.len())
                .filter(|&c| connected[c].is_none())
                .collect();
            cand.sort_by(|&a, &b| dist[fi][a].partial_cmp(&dist[fi][b]).unwrap());
            let mut acc = fcost[fi];
            for (m, &c) in cand.iter().enumerate() {
                acc += dist[fi][c];
                let eff = acc / (m + 1) as f64;
                if best.as_ref().map_or(true, |(b, _, _)| eff < *b) {
                    best = Some((eff, fi, cand[..=m].to_vec()));
                }
            }
        }
        let (_, fi, stars) = best.expect("some facility exists");
        opened[fi] = true;
        fcost[fi] = 0.0;
        for c in stars {
            connected[c] = Some(fi as u32);
        }
    }
    // Final reassignment to the nearest open facility.
    let mut opening_cost = 0.0;
    let mut open = Vec::new();
    for fi in 0..facilities.len() {
        if opened[fi] {
            opening_cost += costs[fi];
            open.push(facilities[fi]);
        }
    }
    let mut connection_cost = 0.0;
    let mut assignment = Vec::with_capacity(cities.len());
    for (ci, &c) in cities.iter().enumerate() {
        let fi = (0..facilities.len())
            .filter(|&fi| opened[fi])
            .min_by(|&a, &b| dist[a][ci].partial_cmp(&dist[b][ci]).unwrap())
            .unwrap();
        connection_cost += dist[fi][ci];
        assignment.push((c, facilities[fi]));
    }
    Ok(FlSolution {
        open,
        assignment,
        opening_cost,
        connection_cost,
    })
}

// ---------------------------------------------------------------------------
// Facility location with unrestricted facilities.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct FlEntry {
    pub level: i64,
    /// Cheapest facility among the sets known at this level.
    pub low: u32,
    pub f_low: f64,
}

/// Preprocessed shortlists: for each point, the window of candidate
/// facilities along its root walk, plus the globally cheapest facility.
#[derive(Debug, Clone)]
pub struct FlIndex {
    pub eps0: f64,
    pub n: usize,
    /// F(x) per point, sorted by level (empty when no candidate qualifies).
    pub entries: Vec<Vec<FlEntry>>,
    pub low_root: u32,
    pub f_low_root: f64,
}

/// Build the shortlists from opening costs (may be +inf).
pub fn fl_preprocess_unrestricted(t: &CompressedTree, f: &[f64], eps0: f64) -> FlIndex {
    assert_eq!(f.len(), t.n);
    assert!(eps0 > 0.0 && eps0 <= 1.0);
    let cfg = &t.config;
    // Cheapest point per subtree.
    let mut sub_min: Vec<(f64, u32)> = vec![(f64::INFINITY, u32::MAX); t.nodes.len()];
    for p in 0..t.n {
        sub_min[p] = (f[p], p as u32);
    }
    let mut order: Vec<u32> = (0..t.nodes.len() as u32).collect();
    order.sort_by_key(|&v| t.nodes[v as usize].level);
    for &v in &order {
        for &c in &t.nodes[v as usize].children {
            let cm = sub_min[c as usize];
            if cm < sub_min[v as usize] {
                sub_min[v as usize] = cm;
            }
        }
    }

    // Per node: (level, cheapest known facility) at its creation level and
    // at each of its meeting levels; equal levels collapsed to the minimum.
    let node_lows = |v: u32| -> Vec<(i64, f64, u32)> {
        let node = &t.nodes[v as usize];
        let mut levels: Vec<i64> = vec![node.level];
        levels.extend(node.meetings.iter().map(|m| m.level));
        levels.sort_unstable();
        levels.dedup();
        levels
            .into_iter()
            .map(|l| {
                let mut best = sub_min[v as usize];
                for &p in t.acquaintances_at(v, l) {
                    if sub_min[p as usize] < best {
                        best = sub_min[p as usize];
                    }
                }
                (l, best.0, best.1)
            })
            .collect()
    };
    let memo: Vec<Vec<(i64, f64, u32)>> = (0..t.nodes.len() as u32).map(node_lows).collect();

    let mut entries = Vec::with_capacity(t.n);
    for x in 0..t.n as u32 {
        // Bar-tree path of x: lows along the walk, level-collapsed.
        let mut path: Vec<(i64, f64, u32)> = Vec::new();
        let mut cur = x;
        loop {
            for &e in &memo[cur as usize] {
                match path.last_mut() {
                    Some(last) if last.0 == e.0 => {
                        if (e.1, e.2) < (last.1, last.2) {
                            *last = e;
                        }
                    }
                    _ => path.push(e),
                }
            }
            match t.nodes[cur as usize].parent {
                Some(p) => cur = p,
                None => break,
            }
        }
        let p = path
            .iter()
            .position(|&(l, fl, _)| fl <= t.n as f64 / eps0 * visibility(cfg, l));
        let list = match p {
            None => Vec::new(),
            Some(p) => {
                let q = path[p..]
                    .iter()
                    .position(|&(l, fl, _)| fl <= eps0 * visibility(cfg, l))
                    .map_or(path.len() - 1, |off| p + off);
                path[p..=q]
                    .iter()
                    .map(|&(level, f_low, low)| FlEntry { level, low, f_low })
                    .collect()
            }
        };
        entries.push(list);
    }
    let (f_low_root, low_root) = sub_min[t.root as usize];
    FlIndex {
        eps0,
        n: t.n,
        entries,
        low_root,
        f_low_root,
    }
}

/// Query: shortlist union + globally cheapest facility, then the restricted
/// greedy on the extracted spanner over cities and candidates.
pub fn fl_query_unrestricted(
    t: &CompressedTree,
    pd: &PathDecomposition,
    idx: &FlIndex,
    cities: &[u32],
) -> Result<FlSolution> {
    if cities.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let k = cities.len();
    let mut fac: SMap<u32, f64> = smap(0x664c_7178);
    for &c in cities {
        if c as usize >= idx.entries.len() {
            return Err(Error::UnknownPoint(c as usize));
        }
        for e in &idx.entries[c as usize] {
            if e.f_low <= k as f64 / idx.eps0 * visibility(&t.config, e.level) {
                let cur = fac.entry(e.low).or_insert(e.f_low);
                if e.f_low < *cur {
                    *cur = e.f_low;
                }
            }
        }
    }
    if idx.f_low_root.is_finite() {
        fac.entry(idx.low_root).or_insert(idx.f_low_root);
    }
    if fac.is_empty() {
        return Err(Error::NoFacilities);
    }
    let mut facilities: Vec<u32> = fac.keys().copied().collect();
    facilities.sort_unstable();
    let costs: Vec<f64> = facilities.iter().map(|f| fac[f]).collect();

    let mut s: Vec<u32> = cities.to_vec();
    s.extend_from_slice(&facilities);
    s.sort_unstable();
    s.dedup();
    let et = extract_subtree(t, pd, &s)?;
    let sp = build_pseudospanner(&et, &t.config);
    facility_location_restricted(&sp, cities, &facilities, &costs)
}

/// Candidate facilities a query for cities C would consider (used by tests
/// and verification).
pub fn fl_candidates(t: &CompressedTree, idx: &FlIndex, cities: &[u32]) -> Vec<(u32, f64)> {
    let k = cities.len();
    let mut fac: SMap<u32, f64> = smap(0x664c_7178);
    for &c in cities {
        for e in &idx.entries[c as usize] {
            if e.f_low <= k as f64 / idx.eps0 * visibility(&t.config, e.level) {
                let cur = fac.entry(e.low).or_insert(e.f_low);
                if e.f_low < *cur {
                    *cur = e.f_low;
                }
            }
        }
    }
    if idx.f_low_root.is_finite() {
        fac.entry(idx.low_root).or_insert(idx.f_low_root);
    }
    let mut out: Vec<(u32, f64)> = fac.into_iter().collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}
