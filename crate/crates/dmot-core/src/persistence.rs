//! Versioned on-disk format for the preprocessed structure. A query-phase
//! process loads this file and nothing else: the handle exposes no distance
//! function.
//!
//! Layout: magic "DMOT", version u16, flags u16, payload length u64,
//! payload, u64 checksum.
//! All integers little-endian fixed width, floats IEEE binary64. Every
//! dictionary is rebuilt on load from its sorted entry list with the
//! persisted seeds.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::applications::{FlEntry, FlIndex};
use crate::error::{Error, Result};
use crate::hierarchy::{CompressedTree, MeetingRef, Node};
use crate::partition::PartitionConfig;
use crate::path_nav::{PathDecomposition, PathInfo};
use crate::yfast::{smap, SMap, YFastTrie};

pub const MAGIC: &[u8; 4] = b"DMOT";
pub const VERSION: u16 = 1;
const FLAG_FL_INDEX: u16 = 1;

/// Everything the query phase needs, bundled for persistence.
#[derive(Debug, Clone)]
pub struct Structure {
    pub tree: CompressedTree,
    pub pd: PathDecomposition,
    pub fl: Option<FlIndex>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

// --- writing -------------------------------------------------------------

struct W {
    buf: Vec<u8>,
}

impl W {
    fn new() -> Self {
        W { buf: Vec::new() }
    }
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.write_u32::<LittleEndian>(v).unwrap();
    }
    fn u64(&mut self, v: u64) {
        self.buf.write_u64::<LittleEndian>(v).unwrap();
    }
    fn i64(&mut self, v: i64) {
        self.buf.write_i64::<LittleEndian>(v).unwrap();
    }
    fn f64(&mut self, v: f64) {
        self.buf.write_f64::<LittleEndian>(v).unwrap();
    }
    fn opt_u32(&mut self, v: Option<u32>) {
        self.u32(v.unwrap_or(u32::MAX));
    }
    fn u32s(&mut self, v: &[u32]) {
        self.u32(v.len() as u32);
        for &x in v {
            self.u32(x);
        }
    }
    fn sorted_map_u32_i64(&mut self, m: &SMap<u32, i64>) {
        let mut entries: Vec<(u32, i64)> = m.iter().map(|(&k, &v)| (k, v)).collect();
        entries.sort_unstable();
        self.u32(entries.len() as u32);
        for (k, v) in entries {
            self.u32(k);
            self.i64(v);
        }
    }
}

// --- reading -------------------------------------------------------------

struct R<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> R<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Truncated(what.to_string()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(self.take(4, what)?.read_u32::<LittleEndian>().unwrap())
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(self.take(8, what)?.read_u64::<LittleEndian>().unwrap())
    }
    fn i64(&mut self, what: &str) -> Result<i64> {
        Ok(self.take(8, what)?.read_i64::<LittleEndian>().unwrap())
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(self.take(8, what)?.read_f64::<LittleEndian>().unwrap())
    }
    fn opt_u32(&mut self, what: &str) -> Result<Option<u32>> {
        let v = self.u32(what)?;
        Ok(if v == u32::MAX { None } else { Some(v) })
    }
    fn u32s(&mut self, what: &str) -> Result<Vec<u32>> {
        let k = self.u32(what)? as usize;
        (0..k).map(|_| self.u32(what)).collect()
    }
    fn sorted_map_u32_i64(&mut self, seed: u64, what: &str) -> Result<SMap<u32, i64>> {
        let k = self.u32(what)? as usize;
        let mut m = smap(seed);
        for _ in 0..k {
            let key = self.u32(what)?;
            let val = self.i64(what)?;
            m.insert(key, val);
        }
        Ok(m)
    }
}

/// Serialize the structure to its on-disk byte representation.
pub fn to_bytes(s: &Structure) -> Vec<u8> {
    let t = &s.tree;
    let pd = &s.pd;
    let mut w = W::new();

    // Config block.
    let cfg = &t.config;
    w.f64(cfg.tau);
    w.u32(cfg.eta);
    w.f64(cfg.r0);
    match cfg.epsilon {
        Some(e) => {
            w.u8(1);
            w.f64(e);
        }
        None => {
            w.u8(0);
            w.f64(0.0);
        }
    }
    w.u64(t.seed);
    w.u64(pd.seed);
    w.u64(t.n as u64);
    w.u32(t.root);

    // Retained levels.
    w.u64(t.retained_levels.len() as u64);
    for &(j, r) in &t.retained_levels {
        w.i64(j);
        w.f64(r);
    }

    // Node table with meetings and acquaintance snapshots.
    w.u64(t.nodes.len() as u64);
    for node in &t.nodes {
        w.i64(node.level);
        w.opt_u32(node.parent);
        w.u32(node.min_point);
        w.u32s(&node.children);
        w.u32(node.meetings.len() as u32);
        for m in &node.meetings {
            w.u32(m.partner);
            w.i64(m.level);
            w.u32s(&m.acquaintances);
        }
    }

    // Responsibility dictionaries, as sorted entry lists.
    for m in &t.resp {
        w.sorted_map_u32_i64(m);
    }

    // Leaf numbering and LCA tables.
    for &v in &t.inorder_of_point {
        w.u32(v);
    }
    for &v in &t.inorder_min {
        w.u32(v);
    }
    for &v in &t.inorder_max {
        w.u32(v);
    }
    let (euler, depth_at, first_occ, sparse) = t.lca_blocks();
    w.u32s(euler);
    w.u32s(depth_at);
    w.u32s(first_occ);
    w.u32(sparse.len() as u32);
    for row in sparse {
        w.u32s(row);
    }

    // Path decomposition.
    w.u32(pd.x);
    w.u64(pd.meeting_levels.len() as u64);
    for &l in &pd.meeting_levels {
        w.i64(l);
    }
    let (level_bits, rank_bits) = pd
        .paths
        .first()
        .map(|p| (p.level_trie.universe_bits(), p.meeting_trie.universe_bits()))
        .unwrap_or((1, 1));
    w.u32(level_bits);
    w.u32(rank_bits);
    w.u64(pd.paths.len() as u64);
    for p in &pd.paths {
        w.u32s(&p.vertices);
        w.i64(p.toplevel);
        w.u32(p.depth);
        w.opt_u32(p.p_ptr);
        w.opt_u32(p.s_ptr);
        // Meeting trie contents: sorted ranks with their (vertex, partner).
        let ranks = p.meeting_trie.sorted_keys();
        w.u32(ranks.len() as u32);
        for r in ranks {
            let (v, partner) = p.meeting_at_rank[&r];
            w.u64(r);
            w.u32(v);
            w.u32(partner);
        }
    }
    for po in &pd.path_of {
        w.opt_u32(*po);
    }
    for arr in &pd.paths_arr {
        w.u32(arr.len() as u32);
        for &(pi, entry) in arr {
            w.u32(pi);
            w.i64(entry);
        }
    }
    for m in &pd.path_resp {
        w.sorted_map_u32_i64(m);
    }

    // Optional facility-location shortlists.
    if let Some(fl) = &s.fl {
        w.f64(fl.eps0);
        w.u64(fl.n as u64);
        w.u32(fl.low_root);
        w.f64(fl.f_low_root);
        for list in &fl.entries {
            w.u32(list.len() as u32);
            for e in list {
                w.i64(e.level);
                w.u32(e.low);
                w.f64(e.f_low);
            }
        }
    }

    let payload = w.buf;
    let mut out = Vec::with_capacity(payload.len() + 16);
    out.extend_from_slice(MAGIC);
    out.write_u16::<LittleEndian>(VERSION).unwrap();
    let flags = if s.fl.is_some() { FLAG_FL_INDEX } else { 0 };
    out.write_u16::<LittleEndian>(flags).unwrap();
    out.write_u64::<LittleEndian>(payload.len() as u64).unwrap();
    out.extend_from_slice(&payload);
    out.write_u64::<LittleEndian>(fnv1a(&payload)).unwrap();
    out
}

/// Parse a structure from its on-disk byte representation.
pub fn from_bytes(bytes: &[u8]) -> Result<Structure> {
    if bytes.len() < 16 {
        return Err(Error::Truncated("header".to_string()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Truncated("bad magic".to_string()));
    }
    let version = (&bytes[4..6]).read_u16::<LittleEndian>().unwrap();
    if version != VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    let flags = (&bytes[6..8]).read_u16::<LittleEndian>().unwrap();
    let plen = (&bytes[8..16]).read_u64::<LittleEndian>().unwrap() as usize;
    if bytes.len() != 16 + plen + 8 {
        return Err(Error::Truncated(format!(
            "expected {} bytes, got {}",
            16 + plen + 8,
            bytes.len()
        )));
    }
    let payload = &bytes[16..16 + plen];
    let stored = (&bytes[bytes.len() - 8..]).read_u64::<LittleEndian>().unwrap();
    let computed = fnv1a(payload);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    let mut r = R { buf: payload, pos: 0 };

    // Config block.
    let tau = r.f64("config.tau")?;
    let eta = r.u32("config.eta")?;
    let r0 = r.f64("config.r0")?;
    let has_eps = r.u8("config.epsilon")? != 0;
    let eps_val = r.f64("config.epsilon")?;
    let config = PartitionConfig {
        tau,
        eta,
        r0,
        epsilon: if has_eps { Some(eps_val) } else { None },
    };
    let tree_seed = r.u64("tree seed")?;
    let pd_seed = r.u64("pd seed")?;
    let n = r.u64("n")? as usize;
    let root = r.u32("root")?;

    let rl = r.u64("retained levels")? as usize;
    let mut retained_levels = Vec::with_capacity(rl);
    for _ in 0..rl {
        let j = r.i64("retained level")?;
        let rad = r.f64("retained radius")?;
        retained_levels.push((j, rad));
    }

    let nn = r.u64("node count")? as usize;
    let mut nodes = Vec::with_capacity(nn);
    for _ in 0..nn {
        let level = r.i64("node level")?;
        let parent = r.opt_u32("node parent")?;
        let min_point = r.u32("node min point")?;
        let children = r.u32s("node children")?;
        let mc = r.u32("meeting count")? as usize;
        let mut meetings = Vec::with_capacity(mc);
        for _ in 0..mc {
            let partner = r.u32("meeting partner")?;
            let level = r.i64("meeting level")?;
            let acquaintances = r.u32s("meeting snapshot")?;
            meetings.push(MeetingRef {
                partner,
                level,
                acquaintances,
            });
        }
        nodes.push(Node {
            level,
            parent,
            children,
            min_point,
            meetings,
        });
    }

    let mut resp = Vec::with_capacity(nn);
    for _ in 0..nn {
        resp.push(r.sorted_map_u32_i64(tree_seed, "responsibility")?);
    }

    let mut inorder_of_point = Vec::with_capacity(n);
    for _ in 0..n {
        inorder_of_point.push(r.u32("inorder of point")?);
    }
    let mut inorder_min = Vec::with_capacity(nn);
    for _ in 0..nn {
        inorder_min.push(r.u32("inorder min")?);
    }
    let mut inorder_max = Vec::with_capacity(nn);
    for _ in 0..nn {
        inorder_max.push(r.u32("inorder max")?);
    }
    let euler = r.u32s("euler tour")?;
    let depth_at = r.u32s("euler depths")?;
    let first_occ = r.u32s("first occurrences")?;
    let rows = r.u32("sparse rows")? as usize;
    let mut sparse = Vec::with_capacity(rows);
    for _ in 0..rows {
        sparse.push(r.u32s("sparse row")?);
    }

    let tree = CompressedTree::from_blocks(
        config,
        n,
        nodes,
        root,
        retained_levels,
        tree_seed,
        resp,
        inorder_of_point,
        inorder_min,
        inorder_max,
        euler,
        depth_at,
        first_occ,
        sparse,
    );

    // Path decomposition.
    let x = r.u32("pd x")?;
    let ml = r.u64("meeting level count")? as usize;
    let mut meeting_levels = Vec::with_capacity(ml);
    for _ in 0..ml {
        meeting_levels.push(r.i64("meeting level")?);
    }
    let level_bits = r.u32("level bits")?;
    let rank_bits = r.u32("rank bits")?;
    let np = r.u64("path count")? as usize;
    let mut paths = Vec::with_capacity(np);
    for _ in 0..np {
        let vertices = r.u32s("path vertices")?;
        let toplevel = r.i64("path toplevel")?;
        let depth = r.u32("path depth")?;
        let p_ptr = r.opt_u32("path p pointer")?;
        let s_ptr = r.opt_u32("path s pointer")?;
        // Level trie keys are the vertex levels, already sorted bottom-up.
        let level_keys: Vec<u64> = vertices
            .iter()
            .map(|&v| tree.nodes[v as usize].level as u64)
            .collect();
        let level_trie = YFastTrie::from_sorted_keys(level_bits, pd_seed, &level_keys)?;
        let mut vertex_at_level = smap(pd_seed);
        for (&v, &k) in vertices.iter().zip(&level_keys) {
            vertex_at_level.insert(k, v);
        }
        let mc = r.u32("path meeting count")? as usize;
        let mut ranks = Vec::with_capacity(mc);
        let mut meeting_at_rank: SMap<u64, (u32, u32)> = smap(pd_seed);
        for _ in 0..mc {
            let rank = r.u64("meeting rank")?;
            let v = r.u32("meeting vertex")?;
            let partner = r.u32("meeting partner")?;
            ranks.push(rank);
            meeting_at_rank.insert(rank, (v, partner));
        }
        let meeting_trie = YFastTrie::from_sorted_keys(rank_bits, pd_seed, &ranks)?;
        paths.push(PathInfo {
            vertices,
            toplevel,
            depth,
            p_ptr,
            s_ptr,
            level_trie,
            vertex_at_level,
            meeting_trie,
            meeting_at_rank,
        });
    }
    let mut path_of = Vec::with_capacity(nn);
    for _ in 0..nn {
        path_of.push(r.opt_u32("path of node")?);
    }
    let mut paths_arr = Vec::with_capacity(nn);
    let mut paths_map = Vec::with_capacity(nn);
    for _ in 0..nn {
        let k = r.u32("paths(v) length")? as usize;
        let mut arr = Vec::with_capacity(k);
        let mut map = smap(pd_seed);
        for _ in 0..k {
            let pi = r.u32("paths(v) path")?;
            let entry = r.i64("paths(v) entry level")?;
            arr.push((pi, entry));
            map.insert(pi, entry);
        }
        paths_arr.push(arr);
        paths_map.push(map);
    }
    let mut path_resp = Vec::with_capacity(np);
    for _ in 0..np {
        path_resp.push(r.sorted_map_u32_i64(pd_seed, "path responsibility")?);
    }
    let pd = PathDecomposition {
        paths,
        path_of,
        paths_arr,
        paths_map,
        path_resp,
        meeting_levels,
        x,
        seed: pd_seed,
    };

    let fl = if flags & FLAG_FL_INDEX != 0 {
        let eps0 = r.f64("fl eps0")?;
        let fn_ = r.u64("fl n")? as usize;
        let low_root = r.u32("fl low root")?;
        let f_low_root = r.f64("fl root cost")?;
        let mut entries = Vec::with_capacity(fn_);
        for _ in 0..fn_ {
            let k = r.u32("fl entry count")? as usize;
            let mut list = Vec::with_capacity(k);
            for _ in 0..k {
                let level = r.i64("fl entry level")?;
                let low = r.u32("fl entry point")?;
                let f_low = r.f64("fl entry cost")?;
                list.push(FlEntry { level, low, f_low });
            }
            entries.push(list);
        }
        Some(FlIndex {
            eps0,
            n: fn_,
            entries,
            low_root,
            f_low_root,
        })
    } else {
        None
    };

    if r.pos != r.buf.len() {
        return Err(Error::Truncated("trailing bytes".to_string()));
    }
    Ok(Structure { tree, pd, fl })
}

/// Write the structure to a file.
pub fn save(s: &Structure, path: impl AsRef<Path>) -> Result<()> {
    let bytes = to_bytes(s);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Load a structure from a file; the query phase starts here.
pub fn load(path: impl AsRef<Path>) -> Result<Structure> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::applications::fl_preprocess_unrestricted;
    use crate::extraction::extract_subtree;
    use crate::hierarchy::compress;
    use crate::metric::MetricSpace;
    use crate::partition::build_partition_tree;
    use crate::path_nav::build_path_decomposition;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn build(n: usize, seed: u64) -> Structure {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let ms = MetricSpace::from_points(&pts).unwrap();
        let cfg = PartitionConfig::new(2.0, 2, ms.min_dist / 2.0).unwrap();
        let tree = compress(&build_partition_tree(&ms, cfg).unwrap());
        let pd = build_path_decomposition(&tree);
        let f: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let fl = Some(fl_preprocess_unrestricted(&tree, &f, 0.5));
        Structure { tree, pd, fl }
    }

    #[test]
    fn resave_is_byte_identical() {
        let s = build(2, 1);
        let b1 = to_bytes(&s);
        let s2 = from_bytes(&b1).unwrap();
        let b2 = to_bytes(&s2);
        assert_eq!(b1, b2);
    }

    #[test]
    fn corruption_and_version_gate() {
        let s = build(8, 2);
        let good = to_bytes(&s);
        // Flip one payload byte.
        let mut bad = good.clone();
        let mid = bad.len() / 2;
        bad[mid] ^= 0x40;
        assert!(matches!(
            from_bytes(&bad),
            Err(Error::ChecksumMismatch { .. })
        ));
        // Unknown version.
        let mut vbad = good.clone();
        vbad[4] = 9;
        assert!(matches!(
            from_bytes(&vbad),
            Err(Error::VersionUnsupported(9))
        ));
        // Truncation.
        assert!(matches!(
            from_bytes(&good[..good.len() / 3]),
            Err(Error::Truncated(_))
        ));
        assert!(matches!(from_bytes(&good[..10]), Err(Error::Truncated(_))));
    }

    #[test]
    fn file_round_trip() {
        let s = build(16, 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.dmot");
        save(&s, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(to_bytes(&s), to_bytes(&loaded));
    }

    #[test]
    fn loaded_structure_answers_identically() {
        let s = build(64, 4);
        let loaded = from_bytes(&to_bytes(&s)).unwrap();
        let (t, pd) = (&s.tree, &s.pd);
        let (lt, lpd) = (&loaded.tree, &loaded.pd);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let (u, v) = (rng.gen_range(0..64u32), rng.gen_range(0..64u32));
            assert_eq!(pd.meet(t, u, v).unwrap(), lpd.meet(lt, u, v).unwrap());
            let i = rng.gen_range(0..=t.nodes[t.root as usize].level);
            match (pd.meeting_jump(t, u, i), lpd.meeting_jump(lt, u, i)) {
                (Ok(a), Ok(b)) => assert_eq!(a, b),
                (Err(Error::NoMeetingAbove(a)), Err(Error::NoMeetingAbove(b))) => {
                    assert_eq!(a, b)
                }
                other => panic!("mismatch: {other:?}"),
            }
            assert_eq!(
                pd.level_ancestor_jump(t, u, i).unwrap(),
                lpd.level_ancestor_jump(lt, u, i).unwrap()
            );
        }
        for _ in 0..50 {
            let k = rng.gen_range(2..=10);
            let mut q: Vec<u32> = (0..64).collect();
            q.shuffle(&mut rng);
            q.truncate(k);
            q.sort_unstable();
            let a = extract_subtree(t, pd, &q).unwrap();
            let b = extract_subtree(lt, lpd, &q).unwrap();
            assert_eq!(a.canonical(), b.canonical());
        }
        // FL shortlists survive.
        assert_eq!(s.fl.as_ref().unwrap().entries, loaded.fl.as_ref().unwrap().entries);
    }

    #[test]
    fn size_scales_near_linearithmic() {
        let mut per_point = Vec::new();
        for &n in &[64usize, 128, 256] {
            let s = build(n, 7);
            let bytes = to_bytes(&s).len() as f64;
            per_point.push(bytes / (n as f64 * (n as f64).log2()));
        }
        // c = bytes / (n log n) should not grow with n.
        assert!(
            per_point[2] <= per_point[0] * 2.0,
            "per-point cost grows: {per_point:?}"
        );
    }
}
