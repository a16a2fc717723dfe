//! File parsing: point lists, distance matrices, query files, scripts.

use std::path::Path;

use dmot_core::metric::MetricSpace;
use dmot_core::Error;

pub type Result<T> = std::result::Result<T, Error>;

fn tokens(line: &str) -> Vec<&str> {
    line.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .collect()
}

/// One point per line, comma or whitespace separated coordinates.
pub fn read_points(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut pts = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let toks = tokens(line);
        if toks.is_empty() {
            continue;
        }
        let coords: std::result::Result<Vec<f64>, _> = toks.iter().map(|t| t.parse()).collect();
        pts.push(coords.map_err(|_| {
            Error::MalformedInput(format!("line {}: expected coordinates", ln + 1))
        })?);
    }
    Ok(pts)
}

/// First line n, then n lines of n reals.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<(usize, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !tokens(l).is_empty());
    let n: usize = lines
        .next()
        .and_then(|l| tokens(l).first().and_then(|t| t.parse().ok()))
        .ok_or_else(|| Error::MalformedInput("matrix header".to_string()))?;
    let mut entries = Vec::with_capacity(n * n);
    for (i, line) in lines.enumerate().take(n) {
        let row: std::result::Result<Vec<f64>, _> =
            tokens(line).iter().map(|t| t.parse()).collect();
        let row =
            row.map_err(|_| Error::MalformedInput(format!("matrix row {}", i + 1)))?;
        if row.len() != n {
            return Err(Error::MalformedInput(format!(
                "matrix row {} has {} entries, expected {}",
                i + 1,
                row.len(),
                n
            )));
        }
        entries.extend(row);
    }
    if entries.len() != n * n {
        return Err(Error::MalformedInput("matrix has too few rows".to_string()));
    }
    Ok((n, entries))
}

pub fn metric_from_points(pts: &[Vec<f64>]) -> Result<MetricSpace> {
    MetricSpace::from_points(pts)
}

pub fn metric_as_matrix(pts: &[Vec<f64>]) -> Result<MetricSpace> {
    let ms = MetricSpace::from_points(pts)?;
    let n = ms.n;
    let entries: Vec<f64> = (0..n)
        .flat_map(|u| (0..n).map(move |v| (u, v)))
        .map(|(u, v)| ms.d(u, v))
        .collect();
    MetricSpace::from_matrix(n, entries)
}

/// Write points one per line, space separated.
pub fn write_points(path: impl AsRef<Path>, pts: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    for p in pts {
        let coords: Vec<String> = p.iter().map(|c| format!("{c}")).collect();
        out.push_str(&coords.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Query file: one query per line, space-separated point ids.
pub fn read_queries(path: impl AsRef<Path>) -> Result<Vec<Vec<u32>>> {
    let text = std::fs::read_to_string(path)?;
    let mut queries = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let toks = tokens(line);
        if toks.is_empty() {
            continue;
        }
        let ids: std::result::Result<Vec<u32>, _> = toks.iter().map(|t| t.parse()).collect();
        queries.push(ids.map_err(|_| {
            Error::MalformedInput(format!("query line {}: expected point ids", ln + 1))
        })?);
    }
    Ok(queries)
}

/// Restricted-FL query file: per line `city.. / facility..`.
pub fn read_fl_queries(path: impl AsRef<Path>) -> Result<Vec<(Vec<u32>, Vec<u32>)>> {
    let text = std::fs::read_to_string(path)?;
    let mut queries = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let toks = tokens(line);
        if toks.is_empty() {
            continue;
        }
        let bad =
            || Error::MalformedInput(format!("query line {}: want `cities / facilities`", ln + 1));
        let slash = toks.iter().position(|&t| t == "/").ok_or_else(bad)?;
        let parse = |ts: &[&str]| -> std::result::Result<Vec<u32>, Error> {
            ts.iter().map(|t| t.parse().map_err(|_| bad())).collect()
        };
        queries.push((parse(&toks[..slash])?, parse(&toks[slash + 1..])?));
    }
    Ok(queries)
}

/// One opening cost per line, by point id.
pub fn read_costs(path: impl AsRef<Path>, n: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let costs: std::result::Result<Vec<f64>, _> = text
        .lines()
        .filter(|l| !tokens(l).is_empty())
        .map(|l| l.trim().parse())
        .collect();
    let costs =
        costs.map_err(|_| Error::MalformedInput("cost file: one real per line".to_string()))?;
    if costs.len() != n {
        return Err(Error::MalformedInput(format!(
            "cost file has {} entries, expected {}",
            costs.len(),
            n
        )));
    }
    Ok(costs)
}

#[derive(Debug, Clone, Copy)]
pub enum ScriptOp {
    Ins(u32),
    Del(u32),
    Check,
}

/// Dynamic script: lines `ins <id>` / `del <id>` / `check`.
pub fn read_script(path: impl AsRef<Path>) -> Result<Vec<ScriptOp>> {
    let text = std::fs::read_to_string(path)?;
    let mut ops = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let toks = tokens(line);
        if toks.is_empty() {
            continue;
        }
        let bad = || Error::MalformedInput(format!("script line {}", ln + 1));
        let op = match toks[0] {
            "ins" => ScriptOp::Ins(toks.get(1).and_then(|t| t.parse().ok()).ok_or_else(bad)?),
            "del" => ScriptOp::Del(toks.get(1).and_then(|t| t.parse().ok()).ok_or_else(bad)?),
            "check" => ScriptOp::Check,
            _ => return Err(bad()),
        };
        ops.push(op);
    }
    Ok(ops)
}
