//! Command implementations. Exit codes: 0 pass, 1 verification failure,
//! 2 usage / input error (mapped in main).

use std::path::Path;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use dmot_core::applications::{
    self, facility_location_restricted, fl_query_unrestricted, k_center, steiner_forest,
    steiner_tree, tsp_tour,
};
use dmot_core::dynamic_mst::{b_constant, LayeredMstState};
use dmot_core::extraction::extract_subtree;
use dmot_core::hierarchy::compress;
use dmot_core::metric::MetricSpace;
use dmot_core::oracles;
use dmot_core::partition::{build_partition_tree, PartitionConfig};
use dmot_core::path_nav::build_path_decomposition;
use dmot_core::persistence::{self, Structure};
use dmot_core::spanner::{build_pseudospanner, stretch_constant, Pseudospanner};
use dmot_core::Error;

use crate::fileio::{self, ScriptOp};
use crate::gen;
use crate::{InputArgs, OutputFormat, ParamArgs, QueryKind};

type Result<T> = std::result::Result<T, Error>;

fn emit(fmt: OutputFormat, value: &serde_json::Value, human: &str) {
    match fmt {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(value).unwrap()),
        OutputFormat::Human => println!("{human}"),
    }
}

/// Resolve the input selection into a metric (preprocessing phase only).
fn load_metric(input: &InputArgs) -> Result<(MetricSpace, Option<Vec<Vec<f64>>>)> {
    if let Some(family) = input.generate {
        let pts = gen::generate(family, input.n, input.seed);
        let ms = match family {
            gen::Family::Matrix => fileio::metric_as_matrix(&pts)?,
            _ => fileio::metric_from_points(&pts)?,
        };
        return Ok((ms, Some(pts)));
    }
    let path = input
        .input
        .as_ref()
        .ok_or_else(|| Error::MalformedInput("need --input or --generate".to_string()))?;
    let ms = match input.input_format {
        crate::InputFormat::Points => fileio::metric_from_points(&fileio::read_points(path)?)?,
        crate::InputFormat::Matrix => {
            let (n, entries) = fileio::read_matrix(path)?;
            MetricSpace::from_matrix(n, entries)?
        }
    };
    Ok((ms, None))
}

fn make_config(params: &ParamArgs, min_dist: f64) -> Result<PartitionConfig> {
    let r0 = min_dist / 2.0;
    match params.epsilon {
        Some(eps) => PartitionConfig::from_epsilon(eps, r0),
        None => PartitionConfig::new(params.tau, params.eta, r0),
    }
}

fn build_structure(
    ms: &MetricSpace,
    config: PartitionConfig,
    fl_costs: Option<&[f64]>,
    eps0: f64,
) -> Result<Structure> {
    let tree = compress(&build_partition_tree(ms, config)?);
    let pd = build_path_decomposition(&tree);
    let fl = fl_costs.map(|f| applications::fl_preprocess_unrestricted(&tree, f, eps0));
    Ok(Structure { tree, pd, fl })
}

pub fn preprocess(
    input: &InputArgs,
    params: &ParamArgs,
    output: &Path,
    fl_costs: Option<&Path>,
    eps0: f64,
    save_input: Option<&Path>,
    fmt: OutputFormat,
) -> Result<u8> {
    let start = Instant::now();
    let (ms, pts) = load_metric(input)?;
    if let (Some(path), Some(pts)) = (save_input, &pts) {
        fileio::write_points(path, pts)?;
    }
    let config = make_config(params, ms.min_dist)?;
    let costs = fl_costs
        .map(|p| fileio::read_costs(p, ms.n))
        .transpose()?;
    let s = build_structure(&ms, config, costs.as_deref(), eps0)?;
    persistence::save(&s, output)?;
    let bytes = std::fs::metadata(output)?.len();
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let v = json!({
        "schema": "dmot/preprocess/1",
        "n": s.tree.n,
        "nodes": s.tree.nodes.len(),
        "retained_levels": s.tree.retained_levels.len(),
        "tau": s.tree.config.tau,
        "eta": s.tree.config.eta,
        "fl_index": s.fl.is_some(),
        "file_bytes": bytes,
        "elapsed_ms": elapsed,
    });
    emit(
        fmt,
        &v,
        &format!(
            "preprocessed n={} nodes={} levels={} -> {} ({} bytes, {:.1} ms)",
            s.tree.n,
            s.tree.nodes.len(),
            s.tree.retained_levels.len(),
            output.display(),
            bytes,
            elapsed
        ),
    );
    Ok(0)
}

fn dump_spanner(path: &Path, qi: usize, sp: &Pseudospanner) -> Result<()> {
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    writeln!(f, "# query {qi}")?;
    for &(a, b, w) in &sp.edges {
        writeln!(f, "{} {} {}", sp.points[a as usize], sp.points[b as usize], w)?;
    }
    Ok(())
}

pub fn query(
    kind: QueryKind,
    structure: &Path,
    queries: &Path,
    costs: Option<&Path>,
    dump: Option<&Path>,
    fmt: OutputFormat,
) -> Result<u8> {
    let s = persistence::load(structure)?;
    let (t, pd) = (&s.tree, &s.pd);
    let mut results = Vec::new();

    let spanner_for = |ids: &[u32]| -> Result<Pseudospanner> {
        let mut q = ids.to_vec();
        q.sort_unstable();
        q.dedup();
        let et = extract_subtree(t, pd, &q)?;
        Ok(build_pseudospanner(&et, &t.config))
    };

    match kind {
        QueryKind::Steiner | QueryKind::Tsp | QueryKind::Kcenter => {
            for (qi, ids) in fileio::read_queries(queries)?.into_iter().enumerate() {
                let start = Instant::now();
                let (ids, r) = if kind == QueryKind::Kcenter {
                    if ids.len() < 2 {
                        return Err(Error::MalformedInput(format!(
                            "query {qi}: kcenter wants `r id id ...`"
                        )));
                    }
                    (ids[1..].to_vec(), ids[0] as usize)
                } else {
                    (ids, 0)
                };
                let sp = spanner_for(&ids)?;
                if let Some(p) = dump {
                    dump_spanner(p, qi, &sp)?;
                }
                let ms = start.elapsed().as_secs_f64() * 1e3;
                results.push(match kind {
                    QueryKind::Steiner => {
                        let (w, edges) = steiner_tree(&sp);
                        json!({"query": qi, "k": sp.len(), "cost": w, "edges": edges, "elapsed_ms": ms})
                    }
                    QueryKind::Tsp => {
                        let (len, tour) = tsp_tour(&sp);
                        json!({"query": qi, "k": sp.len(), "cost": len, "tour": tour, "elapsed_ms": ms})
                    }
                    _ => {
                        let (radius, centers, assigned) = k_center(&sp, r)?;
                        json!({"query": qi, "k": sp.len(), "r": r, "radius": radius,
                               "centers": centers, "assignment": assigned, "elapsed_ms": ms})
                    }
                });
            }
        }
        QueryKind::Forest => {
            for (qi, ids) in fileio::read_queries(queries)?.into_iter().enumerate() {
                if ids.len() % 2 != 0 {
                    return Err(Error::MalformedInput(format!(
                        "query {qi}: forest wants an even id count (pairs)"
                    )));
                }
                let start = Instant::now();
                let pairs: Vec<(u32, u32)> =
                    ids.chunks(2).map(|c| (c[0], c[1])).collect();
                let sp = spanner_for(&ids)?;
                if let Some(p) = dump {
                    dump_spanner(p, qi, &sp)?;
                }
                let (w, edges) = steiner_forest(&sp, &pairs)?;
                let ms = start.elapsed().as_secs_f64() * 1e3;
                results.push(json!({
                    "query": qi, "k": sp.len(), "pairs": pairs, "cost": w,
                    "edges": edges, "elapsed_ms": ms,
                }));
            }
        }
        QueryKind::FlRestricted => {
            let costs_path = costs.ok_or_else(|| {
                Error::MalformedInput("fl-restricted needs --costs".to_string())
            })?;
            let all_costs = fileio::read_costs(costs_path, t.n)?;
            for (qi, (cities, facs)) in fileio::read_fl_queries(queries)?.into_iter().enumerate() {
                let start = Instant::now();
                let mut ids = cities.clone();
                ids.extend_from_slice(&facs);
                let sp = spanner_for(&ids)?;
                if let Some(p) = dump {
                    dump_spanner(p, qi, &sp)?;
                }
                let fcosts: Vec<f64> = facs.iter().map(|&f| all_costs[f as usize]).collect();
                let sol = facility_location_restricted(&sp, &cities, &facs, &fcosts)?;
                let ms = start.elapsed().as_secs_f64() * 1e3;
                results.push(json!({
                    "query": qi, "cities": cities, "open": sol.open,
                    "assignment": sol.assignment, "opening_cost": sol.opening_cost,
                    "connection_cost": sol.connection_cost, "cost": sol.cost(),
                    "elapsed_ms": ms,
                }));
            }
        }
        QueryKind::FlUnrestricted => {
            let idx = s.fl.as_ref().ok_or_else(|| {
                Error::MalformedInput(
                    "structure has no facility-location index (preprocess with --fl-costs)"
                        .to_string(),
                )
            })?;
            for (qi, cities) in fileio::read_queries(queries)?.into_iter().enumerate() {
                let start = Instant::now();
                let sol = fl_query_unrestricted(t, pd, idx, &cities)?;
                let ms = start.elapsed().as_secs_f64() * 1e3;
                results.push(json!({
                    "query": qi, "cities": cities, "open": sol.open,
                    "assignment": sol.assignment, "opening_cost": sol.opening_cost,
                    "connection_cost": sol.connection_cost, "cost": sol.cost(),
                    "elapsed_ms": ms,
                }));
            }
        }
    }

    let v = json!({"schema": "dmot/query/1", "kind": format!("{kind:?}"), "results": results});
    match fmt {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&v).unwrap()),
        OutputFormat::Human => {
            for r in v["results"].as_array().unwrap() {
                println!(
                    "query {}: cost {} ({} ms)",
                    r["query"], r["cost"], r["elapsed_ms"]
                );
            }
        }
    }
    Ok(0)
}

pub fn dynamic(
    structure: &Path,
    script: &Path,
    seed: u64,
    verify: bool,
    input: &InputArgs,
    fmt: OutputFormat,
) -> Result<u8> {
    let s = persistence::load(structure)?;
    let (t, pd) = (&s.tree, &s.pd);
    let ms = if verify {
        Some(load_metric(input)?.0)
    } else {
        None
    };
    let b = b_constant(t.config.eta, t.config.tau);
    let mut state = LayeredMstState::new(seed);
    let mut report = Vec::new();
    let mut failed = false;
    for (oi, op) in fileio::read_script(script)?.into_iter().enumerate() {
        let start = Instant::now();
        let (name, arg, res) = match op {
            ScriptOp::Ins(x) => ("ins", Some(x), state.insert(t, pd, x)),
            ScriptOp::Del(x) => ("del", Some(x), state.delete(t, pd, x)),
            ScriptOp::Check => ("check", None, Ok(())),
        };
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        if let Err(e) = res {
            failed = true;
            report.push(json!({"op": oi, "cmd": name, "arg": arg, "error": e.to_string()}));
            continue;
        }
        let weight = state.weight(&t.config);
        let spanning = state.is_spanning_tree(&t.config);
        let ratio = ms.as_ref().and_then(|ms| {
            let pts: Vec<usize> = state.members().map(|m| m as usize).collect();
            if pts.len() < 2 {
                return None;
            }
            let (opt, _) = oracles::exact_mst(ms, &pts);
            Some(weight / opt)
        });
        let ok = spanning && ratio.map_or(true, |r| r <= b);
        if !ok {
            failed = true;
        }
        report.push(json!({
            "op": oi, "cmd": name, "arg": arg, "k": state.len(), "weight": weight,
            "spanning": spanning, "ratio": ratio, "ok": ok, "elapsed_ms": elapsed,
        }));
    }
    let v = json!({
        "schema": "dmot/dynamic/1",
        "ops": report,
        "rebuilds": state.rebuilds,
        "passed": !failed,
    });
    match fmt {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&v).unwrap()),
        OutputFormat::Human => {
            for r in v["ops"].as_array().unwrap() {
                println!(
                    "{} {} k={} weight={} ok={}",
                    r["cmd"], r["arg"], r["k"], r["weight"], r["ok"]
                );
            }
            println!("rebuilds={} passed={}", state.rebuilds, !failed);
        }
    }
    Ok(if failed { 1 } else { 0 })
}

struct Suite {
    name: &'static str,
    passed: bool,
    detail: String,
}

pub fn verify(
    input: &InputArgs,
    params: &ParamArgs,
    structure: Option<&Path>,
    trials: usize,
    fmt: OutputFormat,
) -> Result<u8> {
    let (ms, _) = load_metric(input)?;
    let config = make_config(params, ms.min_dist)?;
    let tree = compress(&build_partition_tree(&ms, config)?);
    let pd = build_path_decomposition(&tree);
    let n = ms.n;
    let mut rng = ChaCha8Rng::seed_from_u64(input.seed ^ 0x7665_7269);
    let mut suites: Vec<Suite> = Vec::new();

    // Distance sandwich for every pair: with L the first-knowing level, the
    // sets were still strangers one level down, so r_{L-1} <= d < bound * r_{L-1}.
    {
        let d_bound = (1.0 + 4.0 * config.tau * 2f64.powi(-(config.eta as i32))
            / (config.tau - 1.0))
            * config.tau;
        let mut worst: f64 = 0.0;
        let mut bad = 0usize;
        for u in 0..n as u32 {
            for v in (u + 1)..n as u32 {
                let j = pd.meet(&tree, u, v)? - 1;
                let d = ms.d(u as usize, v as usize);
                let rj = tree.radius(j);
                if d < rj * (1.0 - 1e-9) || d > d_bound * rj * (1.0 + 1e-9) {
                    bad += 1;
                }
                worst = worst.max(d / rj);
            }
        }
        suites.push(Suite {
            name: "distance-sandwich",
            passed: bad == 0,
            detail: format!("bound {d_bound:.3}, worst d/r_j {worst:.3}, violations {bad}"),
        });
    }

    // meet against the naive upward walk, sampled pairs.
    {
        let mut bad = 0usize;
        for _ in 0..trials.max(1) * 20 {
            let (u, v) = (rng.gen_range(0..n as u32), rng.gen_range(0..n as u32));
            if pd.meet(&tree, u, v)? != oracles::naive_meet(&tree, u, v) {
                bad += 1;
            }
        }
        suites.push(Suite {
            name: "meet-oracle",
            passed: bad == 0,
            detail: format!("violations {bad}"),
        });
    }

    // Both jump variants against naive walks.
    {
        let top = tree.nodes[tree.root as usize].level;
        let mut bad = 0usize;
        for _ in 0..trials.max(1) * 20 {
            let v = rng.gen_range(0..n as u32);
            let i = rng.gen_range(0..=top);
            let fast = pd.meeting_jump(&tree, v, i);
            let naive = oracles::naive_meeting_jump(&tree, v, i);
            match (fast, naive) {
                (Ok((node, m)), Ok((nn, np, nl))) => {
                    let partner = if m.a == node { m.b } else { m.a };
                    if (node, partner, m.level) != (nn, np, nl) {
                        bad += 1;
                    }
                }
                (Err(Error::NoMeetingAbove(_)), Err(Error::NoMeetingAbove(_))) => {}
                _ => bad += 1,
            }
            if pd.level_ancestor_jump(&tree, v, i)? != oracles::naive_level_ancestor(&tree, v, i)
            {
                bad += 1;
            }
        }
        suites.push(Suite {
            name: "jump-oracle",
            passed: bad == 0,
            detail: format!("violations {bad}"),
        });
    }

    // Extraction equality on random subsets.
    {
        let mut bad = 0usize;
        for _ in 0..trials.max(1) {
            let k = rng.gen_range(2..=16.min(n));
            let mut s: Vec<u32> = (0..n as u32).collect();
            s.shuffle(&mut rng);
            s.truncate(k);
            s.sort_unstable();
            let fast = extract_subtree(&tree, &pd, &s)?.canonical();
            let naive = oracles::naive_extract(&tree, &s)?;
            if fast != naive {
                bad += 1;
            }
        }
        suites.push(Suite {
            name: "extraction-oracle",
            passed: bad == 0,
            detail: format!("violations {bad}"),
        });
    }

    // Spanner stretch on random subsets.
    {
        let c = stretch_constant(config.eta, config.tau);
        let mut bad = 0usize;
        let mut worst: f64 = 0.0;
        for _ in 0..trials.max(1) {
            let k = rng.gen_range(2..=24.min(n));
            let mut s: Vec<u32> = (0..n as u32).collect();
            s.shuffle(&mut rng);
            s.truncate(k);
            s.sort_unstable();
            let et = extract_subtree(&tree, &pd, &s)?;
            let sp = build_pseudospanner(&et, &config);
            let apsp = sp.all_pairs();
            for i in 0..k {
                for j in i + 1..k {
                    let d = ms.d(s[i] as usize, s[j] as usize);
                    let dh = apsp[i][j];
                    if d > dh * (1.0 + 1e-9) || dh > c * d * (1.0 + 1e-9) {
                        bad += 1;
                    }
                    worst = worst.max(dh / d);
                }
            }
        }
        suites.push(Suite {
            name: "spanner-stretch",
            passed: bad == 0,
            detail: format!("C {c:.1}, worst stretch {worst:.3}, violations {bad}"),
        });
    }

    // Structural bounds.
    {
        let nodes_ok = tree.nodes.len() <= 2 * n - 1;
        let log2n = (n as f64).log2().ceil() as usize;
        let paths_ok = (0..n as u32).all(|v| pd.paths_crossed(v) <= log2n.max(1));
        suites.push(Suite {
            name: "structural-bounds",
            passed: nodes_ok && paths_ok,
            detail: format!(
                "nodes {} <= {}, max paths crossed {} <= {}",
                tree.nodes.len(),
                2 * n - 1,
                (0..n as u32).map(|v| pd.paths_crossed(v)).max().unwrap(),
                log2n.max(1)
            ),
        });
    }

    // Persistence round trip (plus an existing file if given).
    {
        let s = Structure {
            tree: tree.clone(),
            pd: pd.clone(),
            fl: None,
        };
        let bytes = persistence::to_bytes(&s);
        let reparsed = persistence::from_bytes(&bytes).and_then(|s2| {
            let again = persistence::to_bytes(&s2);
            if again == bytes {
                Ok(())
            } else {
                Err(Error::Truncated("resave differs".to_string()))
            }
        });
        let mut passed = reparsed.is_ok();
        let mut detail = format!("{} bytes", bytes.len());
        if let Some(path) = structure {
            match persistence::load(path) {
                Ok(_) => detail.push_str(", structure file ok"),
                Err(e) => {
                    passed = false;
                    detail.push_str(&format!(", structure file: {e}"));
                }
            }
        }
        suites.push(Suite {
            name: "persistence-roundtrip",
            passed,
            detail,
        });
    }

    let all = suites.iter().all(|s| s.passed);
    let v = json!({
        "schema": "dmot/verify/1",
        "n": n,
        "suites": suites.iter().map(|s| json!({
            "name": s.name, "passed": s.passed, "detail": s.detail,
        })).collect::<Vec<_>>(),
        "passed": all,
    });
    match fmt {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&v).unwrap()),
        OutputFormat::Human => {
            for s in &suites {
                println!(
                    "{:<24} {} ({})",
                    s.name,
                    if s.passed { "pass" } else { "FAIL" },
                    s.detail
                );
            }
        }
    }
    Ok(if all { 0 } else { 1 })
}

pub fn bench(
    family: gen::Family,
    sizes: &[usize],
    ks: &[usize],
    trials: usize,
    seed: u64,
    fmt: OutputFormat,
) -> Result<u8> {
    let mut rows = Vec::new();
    for &n in sizes {
        let pts = gen::generate(family, n, seed);
        let ms = fileio::metric_from_points(&pts)?;
        let start = Instant::now();
        let config = PartitionConfig::new(2.0, 2, ms.min_dist / 2.0)?;
        let tree = compress(&build_partition_tree(&ms, config)?);
        let pd = build_path_decomposition(&tree);
        let pre_ms = start.elapsed().as_secs_f64() * 1e3;
        let bytes = persistence::to_bytes(&Structure {
            tree: tree.clone(),
            pd: pd.clone(),
            fl: None,
        })
        .len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
        for &k in ks {
            let k = k.min(n);
            let mut times: Vec<f64> = Vec::with_capacity(trials);
            for _ in 0..trials.max(1) {
                let mut s: Vec<u32> = (0..n as u32).collect();
                s.shuffle(&mut rng);
                s.truncate(k);
                s.sort_unstable();
                let q = Instant::now();
                let et = extract_subtree(&tree, &pd, &s)?;
                let _sp = build_pseudospanner(&et, &config);
                times.push(q.elapsed().as_secs_f64() * 1e3);
            }
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = times[times.len() / 2];
            rows.push(json!({
                "n": n, "k": k, "preprocess_ms": pre_ms,
                "structure_bytes": bytes, "query_median_ms": median,
            }));
        }
    }
    let v = json!({"schema": "dmot/bench/1", "rows": rows});
    match fmt {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&v).unwrap()),
        OutputFormat::Human => {
            println!(
                "{:>8} {:>6} {:>14} {:>16} {:>16}",
                "n", "k", "preprocess_ms", "structure_bytes", "query_median_ms"
            );
            for r in v["rows"].as_array().unwrap() {
                println!(
                    "{:>8} {:>6} {:>14} {:>16} {:>16}",
                    r["n"], r["k"], r["preprocess_ms"], r["structure_bytes"], r["query_median_ms"]
                );
            }
        }
    }
    Ok(0)
}
