//! ASCII PLY export, readable by common point-cloud viewers.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{AttributedPointCloud, Point3};

pub fn write_ply(cloud: &AttributedPointCloud) -> String {
    let mut out = String::with_capacity(200 + cloud.len() * 48);
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", cloud.len());
    for name in ["x", "y", "z", "eps_l", "eps_g"] {
        let _ = writeln!(out, "property float {name}");
    }
    out.push_str("end_header\n");
    for p in &cloud.points {
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            p.position.x as f32, p.position.y as f32, p.position.z as f32, p.eps_l as f32, p.eps_g as f32
        );
    }
    out
}

/// Vertex positions of an ASCII PLY file with `x`, `y` and `z` properties.
pub fn parse_ply_positions(text: &str, path: &Path) -> Result<Vec<Point3>> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l.trim()) != Some("ply") {
        return Err(err(1, "missing `ply` magic line".into()));
    }
    let mut count = None;
    let mut properties: Vec<String> = Vec::new();
    let mut in_vertex = false;
    let mut body_start = None;
    for (i, line) in lines.by_ref() {
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.as_slice() {
            ["format", kind, ..] if *kind != "ascii" => {
                return Err(err(i + 1, format!("only ascii PLY is supported, got `{kind}`")));
            }
            ["element", "vertex", n] => {
                count = Some(n.parse::<usize>().map_err(|_| err(i + 1, format!("bad vertex count `{n}`")))?);
                in_vertex = true;
            }
            ["element", ..] => in_vertex = false,
            ["property", .., name] if in_vertex => properties.push((*name).to_owned()),
            ["end_header"] => {
                body_start = Some(i + 1);
                break;
            }
            _ => {}
        }
    }
    let (Some(count), Some(start)) = (count, body_start) else {
        return Err(err(1, "header lacks a vertex element or end_header".into()));
    };
    let column = |name: &str| {
        properties
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| err(1, format!("vertex property `{name}` missing")))
    };
    let (cx, cy, cz) = (column("x")?, column("y")?, column("z")?);
    let mut points = Vec::with_capacity(count);
    for (i, line) in lines.take(count) {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() < properties.len() {
            return Err(err(i + 1, format!("expected {} values", properties.len())));
        }
        let value = |c: usize| {
            f[c].parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(i + 1, format!("bad coordinate `{}`", f[c])))
        };
        points.push(Point3::new(value(cx)?, value(cy)?, value(cz)?));
    }
    if points.len() != count {
        return Err(err(start + points.len() + 1, format!("expected {count} vertices, found {}", points.len())));
    }
    Ok(points)
}
