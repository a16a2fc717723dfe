//! Preprocessing-phase construction of the space partition tree: level-0
//! singletons, greedy leader carving per level, the knows relation, and
//! event-level skipping so the number of levels processed is bounded by the
//! number of merge / first-acquaintance events rather than by the stretch.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::metric::MetricSpace;

/// Growth/locality parameters of the hierarchy.
#[derive(Debug, Clone, Copy)]
pub struct PartitionConfig {
    pub tau: f64,
    pub eta: u32,
    pub r0: f64,
    /// Target approximation parameter, when (tau, eta) were derived from it.
    pub epsilon: Option<f64>,
}

impl PartitionConfig {
    /// Validate the admissibility constraints:
    /// η ≥ 2, τ ≥ 1/(2^{η−1}−1) + 1, τ ≤ 2^η.
    pub fn new(tau: f64, eta: u32, r0: f64) -> Result<Self> {
        if eta < 2 {
            return Err(Error::ConfigInadmissible(format!("eta = {eta} < 2")));
        }
        let lo = 1.0 / ((1u64 << (eta - 1)) as f64 - 1.0) + 1.0;
        let hi = (1u64 << eta) as f64;
        if !(tau >= lo && tau <= hi) {
            return Err(Error::ConfigInadmissible(format!(
                "tau = {tau} outside [{lo}, {hi}] for eta = {eta}"
            )));
        }
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(Error::ConfigInadmissible(format!("r0 = {r0} not positive")));
        }
        Ok(PartitionConfig {
            tau,
            eta,
            r0,
            epsilon: None,
        })
    }

    /// Derive (τ, η) from a target ε ∈ (0, 1): τ = 1 + ε/3 and the smallest
    /// η with 2^{−η} < ε²/24 that also satisfies the admissibility bounds.
    pub fn from_epsilon(epsilon: f64, r0: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::ConfigInadmissible(format!(
                "epsilon = {epsilon} outside (0, 1)"
            )));
        }
        let tau = 1.0 + epsilon / 3.0;
        let mut eta = 2u32;
        loop {
            let ok_eps = 2f64.powi(-(eta as i32)) < epsilon * epsilon / 24.0;
            let ok_lo = tau >= 1.0 / ((1u64 << (eta - 1)) as f64 - 1.0) + 1.0;
            if ok_eps && ok_lo {
                break;
            }
            eta += 1;
            if eta > 60 {
                return Err(Error::ConfigInadmissible("epsilon too small".into()));
            }
        }
        let mut cfg = PartitionConfig::new(tau, eta, r0)?;
        cfg.epsilon = Some(epsilon);
        Ok(cfg)
    }

    /// r_j = τ^j · r0.
    #[inline]
    pub fn radius(&self, j: i64) -> f64 {
        self.r0 * self.tau.powi(j as i32)
    }

    /// Smallest level j ≥ 0 with scale · r_j > d (strictly).
    pub fn first_level_above(&self, d: f64, scale: f64) -> i64 {
        let base = scale * self.r0;
        if base > d {
            return 0;
        }
        let mut j = ((d / base).ln() / self.tau.ln()).floor() as i64;
        j = j.max(0);
        while scale * self.radius(j) <= d {
            j += 1;
        }
        while j > 0 && scale * self.radius(j - 1) > d {
            j -= 1;
        }
        j
    }
}

/// One set of a partition level.
#[derive(Debug, Clone)]
pub struct LevelSet {
    /// Sorted member point ids.
    pub members: Vec<u32>,
    pub leader: u32,
}

/// A retained (event) level of the partition tree.
#[derive(Debug, Clone)]
pub struct PartitionLevel {
    /// True level index j; the radius is r_j = τ^j·r0.
    pub j: i64,
    pub r_j: f64,
    pub sets: Vec<LevelSet>,
    /// Point id -> set index at this level.
    pub set_of: Vec<u32>,
    /// Symmetric acquaintance lists over set indices (self excluded), sorted.
    pub knows: Vec<Vec<u32>>,
    /// Set index at the previous retained level -> set index here.
    pub parent_of_prev: Vec<u32>,
}

/// The space partition tree, restricted to its event levels. Between two
/// consecutive retained levels neither the partition nor the knows relation
/// changes, so the full tree is recoverable from this representation.
#[derive(Debug, Clone)]
pub struct PartitionTree {
    pub config: PartitionConfig,
    pub levels: Vec<PartitionLevel>,
    pub n: usize,
}

/// Greedy ball carving at ball radius 2^{−η−1}·r: scan the leaders in
/// ascending id order; each unclaimed leader becomes a carve center and
/// absorbs every unclaimed leader strictly within the ball radius. Returns
/// groups of leader ids, the center first.
pub fn carve_partition(leaders_in: &[u32], r: f64, eta: u32, ms: &MetricSpace) -> Vec<Vec<u32>> {
    let ball = 2f64.powi(-(eta as i32) - 1) * r;
    let mut sorted: Vec<u32> = leaders_in.to_vec();
    sorted.sort_unstable();
    let mut taken = vec![false; sorted.len()];
    let mut groups = Vec::new();
    for i in 0..sorted.len() {
        if taken[i] {
            continue;
        }
        taken[i] = true;
        let mut group = vec![sorted[i]];
        for k in (i + 1)..sorted.len() {
            if !taken[k] && ms.d(sorted[i] as usize, sorted[k] as usize) < ball {
                taken[k] = true;
                group.push(sorted[k]);
            }
        }
        groups.push(group);
    }
    groups
}

/// Build the partition tree for a validated metric and admissible config.
pub fn build_partition_tree(ms: &MetricSpace, config: PartitionConfig) -> Result<PartitionTree> {
    if config.r0 >= ms.min_dist {
        return Err(Error::ConfigInadmissible(format!(
            "r0 = {} not below the minimum distance {}",
            config.r0, ms.min_dist
        )));
    }
    // Re-validate admissibility in case the config was constructed by hand.
    PartitionConfig::new(config.tau, config.eta, config.r0)?;

    let n = ms.n;
    let two_eta = 2f64.powi(-(config.eta as i32));

    // Level 0: singletons; r0 < min distance, so nothing knows anything.
    let mut levels = vec![PartitionLevel {
        j: 0,
        r_j: config.radius(0),
        sets: (0..n)
            .map(|i| LevelSet {
                members: vec![i as u32],
                leader: i as u32,
            })
            .collect(),
        set_of: (0..n as u32).collect(),
        knows: vec![Vec::new(); n],
        parent_of_prev: (0..n as u32).collect(),
    }];

    loop {
        let cur = levels.last().unwrap();
        if cur.sets.len() == 1 {
            break;
        }
        // Next merge event: smallest j with 2^{−η}·r_j strictly above the
        // minimum pairwise leader distance (then the greedy groups a pair).
        let leaders: Vec<u32> = cur.sets.iter().map(|s| s.leader).collect();
        let mut min_leader_d = f64::INFINITY;
        for a in 0..leaders.len() {
            for b in (a + 1)..leaders.len() {
                min_leader_d = min_leader_d.min(ms.d(leaders[a] as usize, leaders[b] as usize));
            }
        }
        let merge_level = config.first_level_above(min_leader_d, two_eta).max(cur.j + 1);

        // Next acquaintance event: smallest j with r_j strictly above the
        // minimum distance between two sets that do not yet know each other.
        let know_set: HashSet<(u32, u32)> = cur
            .knows
            .iter()
            .enumerate()
            .flat_map(|(a, l)| l.iter().map(move |&b| (a as u32, b)))
            .collect();
        let mut min_unknown_d = f64::INFINITY;
        for u in 0..n {
            for v in (u + 1)..n {
                let (su, sv) = (cur.set_of[u], cur.set_of[v]);
                if su != sv && !know_set.contains(&(su.min(sv), su.max(sv))) {
                    min_unknown_d = min_unknown_d.min(ms.d(u, v));
                }
            }
        }
        let know_level = if min_unknown_d.is_finite() {
            config.first_level_above(min_unknown_d, 1.0).max(cur.j + 1)
        } else {
            i64::MAX
        };

        let j = merge_level.min(know_level);
        let r_j = config.radius(j);

        // Carve the current leaders with r = 2·r_j (ball radius 2^{−η}·r_j).
        let groups = carve_partition(&leaders, 2.0 * r_j, config.eta, ms);
        let mut leader_to_set = vec![u32::MAX; n];
        for s in &cur.sets {
            leader_to_set[s.leader as usize] = cur.set_of[s.leader as usize];
        }
        let mut sets = Vec::with_capacity(groups.len());
        let mut parent_of_prev = vec![0u32; cur.sets.len()];
        for group in &groups {
            let idx = sets.len() as u32;
            let mut members = Vec::new();
            for &l in group {
                let child = leader_to_set[l as usize];
                parent_of_prev[child as usize] = idx;
                members.extend_from_slice(&cur.sets[child as usize].members);
            }
            members.sort_unstable();
            sets.push(LevelSet {
                members,
                leader: group[0],
            });
        }
        let mut set_of = vec![0u32; n];
        for (i, s) in sets.iter().enumerate() {
            for &m in &s.members {
                set_of[m as usize] = i as u32;
            }
        }

        // Knows at level j: some cross pair strictly within r_j.
        let mut pair_know: HashSet<(u32, u32)> = HashSet::new();
        for u in 0..n {
            for v in (u + 1)..n {
                let (su, sv) = (set_of[u], set_of[v]);
                if su != sv && ms.d(u, v) < r_j {
                    pair_know.insert((su.min(sv), su.max(sv)));
                }
            }
        }
        let mut knows = vec![Vec::new(); sets.len()];
        for &(a, b) in &pair_know {
            knows[a as usize].push(b);
            knows[b as usize].push(a);
        }
        for l in &mut knows {
            l.sort_unstable();
        }

        levels.push(PartitionLevel {
            j,
            r_j,
            sets,
            set_of,
            knows,
            parent_of_prev,
        });
    }

    Ok(PartitionTree { config, levels, n })
}

impl PartitionTree {
    /// Retained level index for a true level: greatest retained j' ≤ j.
    pub fn retained_index_at(&self, j: i64) -> Result<usize> {
        if j < 0 {
            return Err(Error::InvalidLevel(j));
        }
        match self.levels.partition_point(|l| l.j <= j) {
            0 => Err(Error::InvalidLevel(j)),
            p => Ok(p - 1),
        }
    }

    /// Does set `a` know set `b` at (true) level j? Set indices refer to the
    /// retained level at or below j; `a == b` knows by convention.
    pub fn knows_at_level(&self, j: i64, a: usize, b: usize) -> Result<bool> {
        let li = self.retained_index_at(j)?;
        let lvl = &self.levels[li];
        if a >= lvl.sets.len() || b >= lvl.sets.len() {
            return Err(Error::InvalidLevel(j));
        }
        if a == b {
            return Ok(true);
        }
        Ok(lvl.knows[a].binary_search(&(b as u32)).is_ok())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricSpace;

    fn line(points: &[f64]) -> MetricSpace {
        MetricSpace::from_points(&points.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn admissibility() {
        assert!(PartitionConfig::new(2.0, 2, 0.5).is_ok());
        assert!(PartitionConfig::new(2.0, 1, 0.5).is_err());
        assert!(PartitionConfig::new(1.5, 2, 0.5).is_err()); // below 1/(2−1)+1 = 2
        assert!(PartitionConfig::new(5.0, 2, 0.5).is_err()); // above 2^2
        assert!(PartitionConfig::new(2.0, 2, 0.0).is_err());
    }

    #[test]
    fn epsilon_mode() {
        let cfg = PartitionConfig::from_epsilon(0.5, 0.25).unwrap();
        assert_eq!(cfg.tau, 1.0 + 0.5 / 3.0);
        assert!(2f64.powi(-(cfg.eta as i32)) < 0.25 / 24.0);
        assert!(cfg.tau >= 1.0 / ((1u64 << (cfg.eta - 1)) as f64 - 1.0) + 1.0);
    }

    #[test]
    fn carve_single_point() {
        let ms = line(&[0.0, 10.0]);
        let groups = carve_partition(&[0], 1.0, 2, &ms);
        assert_eq!(groups, vec![vec![0]]);
    }

    #[test]
    fn carve_separated() {
        let ms = line(&[0.0, 10.0]);
        // ball radius = 2^{−3}·1 = 0.125 < 10
        let groups = carve_partition(&[0, 1], 1.0, 2, &ms);
        assert_eq!(groups.len(), 2);
    }

    #[test]
    fn carve_greedy_scan_order() {
        let ms = line(&[0.0, 0.4, 10.0]);
        // ball radius 0.5: leader 0 absorbs 1; 2 alone.
        let groups = carve_partition(&[0, 1, 2], 4.0, 2, &ms);
        assert_eq!(groups, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn two_point_tree() {
        let ms = line(&[0.0, 1.0]);
        let cfg = PartitionConfig::new(2.0, 2, 0.5).unwrap();
        let t = build_partition_tree(&ms, cfg).unwrap();
        assert_eq!(t.levels.first().unwrap().sets.len(), 2);
        assert_eq!(t.levels.last().unwrap().sets.len(), 1);
        // Merge requires 2^{−2}·r_j > 1, i.e. r_j > 4 → j = 4 (r_4 = 8).
        // First knowing requires r_j > 1 → j = 2 (r_2 = 2).
        let js: Vec<i64> = t.levels.iter().map(|l| l.j).collect();
        assert_eq!(js, vec![0, 2, 4]);
        let know_lvl = &t.levels[1];
        assert_eq!(know_lvl.sets.len(), 2);
        assert_eq!(know_lvl.knows[0], vec![1]);
        assert!(t.knows_at_level(2, 0, 1).unwrap());
        assert!(!t.knows_at_level(1, 0, 1).unwrap());
        assert!(t.knows_at_level(3, 0, 1).unwrap());
    }

    #[test]
    fn knows_ball_test_1d() {
        // {0,1,3}: at a level with r_j = 1.5 (not exactly representable as
        // τ^j·r0 for τ=2, r0=0.5, so use the first level with r_j > 1: j=2,
        // r=2): {0} knows {1} (d=1<2), {1} knows {3} (d=2, NOT < 2), etc.
        let ms = line(&[0.0, 1.0, 3.0]);
        let cfg = PartitionConfig::new(2.0, 2, 0.5).unwrap();
        let t = build_partition_tree(&ms, cfg).unwrap();
        // At true level 1 (r=1) nothing knows: 1 is not < 1.
        // set indices at level ≤ 1 are the singleton ids.
        assert!(!t.knows_at_level(1, 0, 1).unwrap());
        assert!(t.knows_at_level(2, 0, 1).unwrap());
        assert!(!t.knows_at_level(2, 1, 2).unwrap()); // d = 2, not < 2
        assert!(!t.knows_at_level(2, 0, 2).unwrap());
    }

    #[test]
    fn partitions_are_partitions() {
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i * 7 % 40) as f64, (i * 11 % 13) as f64])
            .collect();
        let ms = MetricSpace::from_points(&pts).unwrap();
        let cfg = PartitionConfig::new(2.0, 2, ms.min_dist / 2.0).unwrap();
        let t = build_partition_tree(&ms, cfg).unwrap();
        for lvl in &t.levels {
            let mut seen = vec![false; 40];
            for s in &lvl.sets {
                assert!(s.members.contains(&s.leader), "leader is a member");
                for &m in &s.members {
                    assert!(!seen[m as usize], "sets must be disjoint");
                    seen[m as usize] = true;
                }
            }
            assert!(seen.iter().all(|&x| x), "sets must cover V");
            // Containment: every member within (τ2^{−η}/(τ−1))·r_j of leader.
            let bound = lvl.r_j * (2.0 * 0.25 / (2.0 - 1.0));
            for s in &lvl.sets {
                for &m in &s.members {
                    let d = ms.d(m as usize, s.leader as usize);
                    assert!(d < bound || d == 0.0, "d = {d}, bound = {bound}");
                }
            }
        }
        assert_eq!(t.levels.last().unwrap().sets.len(), 1);
    }
}
