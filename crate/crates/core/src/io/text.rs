//! Line-oriented text formats: delta maps, coverage grids and heatmaps.
//!
//! Reals are written in Rust's shortest round-trip form, so parsing a file
//! reproduces every value bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::read_text;
use crate::model::Point3;
use crate::spatial::CoverageGrid;
use crate::update::{DeltaMap, DeltaRecord, HeatmapCell, PointCategory};

/// First token of a delta file's header line.
pub const DELTA_HEADER: &str = "delta";

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn real(token: &str, path: &Path, line: usize, what: &str) -> Result<f64> {
    token
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(path, line, format!("{what}: expected a finite real, got `{token}`")))
}

/// Header `delta <session_id> <config_hash>` and one
/// `x y z category eps_before eps_after gamma` line per record.
pub fn format_delta(delta: &DeltaMap) -> String {
    let mut out = String::with_capacity(64 + delta.records.len() * 64);
    let _ = writeln!(out, "{DELTA_HEADER} {} {:016x}", delta.session_id, delta.config_hash);
    for r in &delta.records {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            r.position.x,
            r.position.y,
            r.position.z,
            r.category.name(),
            r.eps_g_before,
            r.eps_g_after,
            r.gamma
        );
    }
    out
}

pub fn parse_delta(text: &str, path: &Path) -> Result<DeltaMap> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty delta file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [tag, session_id, hash] = fields[..] else {
        return Err(parse_err(path, 1, "expected `delta <session_id> <config_hash>`"));
    };
    if tag != DELTA_HEADER {
        return Err(parse_err(path, 1, format!("expected `{DELTA_HEADER}` header, got `{tag}`")));
    }
    let config_hash =
        u64::from_str_radix(hash, 16).map_err(|_| parse_err(path, 1, format!("bad config hash `{hash}`")))?;
    let mut records = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 7 {
            return Err(parse_err(path, n, format!("expected 7 fields, got {}", f.len())));
        }
        let category =
            PointCategory::parse(f[3]).ok_or_else(|| parse_err(path, n, format!("unknown category `{}`", f[3])))?;
        let position = Point3::new(real(f[0], path, n, "x")?, real(f[1], path, n, "y")?, real(f[2], path, n, "z")?);
        let before = real(f[4], path, n, "eps_before")?;
        let after = real(f[5], path, n, "eps_after")?;
        let gamma = real(f[6], path, n, "gamma")?;
        records.push(DeltaRecord::new(position, category, before, after, gamma));
    }
    Ok(DeltaMap {
        session_id: session_id.to_owned(),
        config_hash,
        records,
    })
}

pub fn read_delta(path: &Path) -> Result<DeltaMap> {
    parse_delta(&read_text(path)?, path)
}

/// `# cell_size <c>` followed by one `i j k` line per observed cell, sorted.
pub fn format_coverage(grid: &CoverageGrid) -> String {
    let mut out = format!("# cell_size {}\n", grid.cell_size());
    for [i, j, k] in grid.sorted_cells() {
        let _ = writeln!(out, "{i} {j} {k}");
    }
    out
}

fn parse_cell_size(line: Option<&str>, path: &Path) -> Result<f64> {
    let value = line
        .and_then(|l| l.strip_prefix("# cell_size "))
        .ok_or_else(|| parse_err(path, 1, "expected `# cell_size <meters>` header"))?;
    let cell = real(value.trim(), path, 1, "cell_size")?;
    if cell <= 0.0 {
        return Err(parse_err(path, 1, "cell_size must be positive"));
    }
    Ok(cell)
}

fn parse_key(fields: &[&str], path: &Path, line: usize) -> Result<[i64; 3]> {
    let mut key = [0i64; 3];
    for (slot, token) in key.iter_mut().zip(fields) {
        *slot = token
            .parse()
            .map_err(|_| parse_err(path, line, format!("expected an integer cell index, got `{token}`")))?;
    }
    Ok(key)
}

pub fn parse_coverage(text: &str, path: &Path) -> Result<CoverageGrid> {
    let mut lines = text.lines();
    let mut grid = CoverageGrid::new(parse_cell_size(lines.next(), path)?);
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.len() {
            0 => continue,
            3 => grid.mark_cell(parse_key(&f, path, n)?),
            k => return Err(parse_err(path, n, format!("expected 3 fields, got {k}"))),
        }
    }
    Ok(grid)
}

/// Coverage layout plus the normalized value column: `i j k value`.
pub fn format_heatmap(cells: &[HeatmapCell], cell_size: f64) -> String {
    let mut out = format!("# cell_size {cell_size}\n");
    for c in cells {
        let [i, j, k] = c.cell;
        let _ = writeln!(out, "{i} {j} {k} {}", c.value);
    }
    out
}
