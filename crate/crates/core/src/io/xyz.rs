use std::fmt::Write as _;
use std::path::Path;

use super::parse_error;
use crate::error::Result;
use crate::geometry::{Point3, PointCloud};
use crate::scalar::Real;

/// Normals further than this from unit length are rejected rather than
/// renormalized.
const NORMAL_SLACK: f64 = 1e-3;

/// Parses `x y z` or `x y z nx ny nz` lines; `#` lines and blank lines are
/// skipped. `source` names the input in error messages.
pub fn parse_xyz<T: Real>(text: &str, source: &str) -> Result<PointCloud<T>> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut arity = None;
    for (no, raw) in text.lines().enumerate() {
        let line = no + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let values = trimmed
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| parse_error(source, line, format!("bad number {tok:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != 3 && values.len() != 6 {
            return Err(parse_error(
                source,
                line,
                format!("expected 3 or 6 columns, found {}", values.len()),
            ));
        }
        match arity {
            None => arity = Some(values.len()),
            Some(a) if a != values.len() => {
                return Err(parse_error(
                    source,
                    line,
                    format!("mixed column counts: {a} then {}", values.len()),
                ))
            }
            _ => {}
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(parse_error(source, line, "non-finite value"));
        }
        points.push(Point3::new(T::lit(values[0]), T::lit(values[1]), T::lit(values[2])));
        if values.len() == 6 {
            let n = Point3::new(values[3], values[4], values[5]);
            let len = n.norm();
            if (len - 1.0).abs() > NORMAL_SLACK {
                return Err(parse_error(
                    source,
                    line,
                    format!("normal length {len} is not within {NORMAL_SLACK} of 1"),
                ));
            }
            normals.push((n / len).cast());
        }
    }
    if arity == Some(6) {
        PointCloud::with_normals(points, normals)
    } else {
        PointCloud::new(points)
    }
}

pub fn read_xyz<T: Real>(path: impl AsRef<Path>) -> Result<PointCloud<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_xyz(&text, &path.display().to_string())
}

/// One point per line, shortest round-tripping decimal form.
pub fn format_xyz<T: Real>(cloud: &PointCloud<T>) -> String {
    let mut out = String::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let _ = write!(out, "{} {} {}", p.x.as_f64(), p.y.as_f64(), p.z.as_f64());
        if let Some(n) = cloud.normals() {
            let n = n[i];
            let _ = write!(out, " {} {} {}", n.x.as_f64(), n.y.as_f64(), n.z.as_f64());
        }
        out.push('\n');
    }
    out
}

pub fn write_xyz<T: Real>(cloud: &PointCloud<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_xyz(cloud))?;
    Ok(())
}
