use std::fmt::Write as _;
use std::path::Path;

use super::parse_error;
use crate::error::Result;
use crate::geometry::{Mesh, Point3};
use crate::scalar::Real;

/// Reads `v` and triangular `f` records; other record types (normals,
/// texture coordinates, groups) are ignored. Face corners may use the
/// `v/vt/vn` form and negative relative indices.
pub fn parse_obj<T: Real>(text: &str, source: &str) -> Result<Mesh<T>> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = no + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = body.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| {
                        t.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| parse_error(source, line, format!("bad coordinate {t:?}")))
                    })
                    .collect::<Result<_>>()?;
                if coords.len() != 3 {
                    return Err(parse_error(source, line, "vertex needs 3 coordinates"));
                }
                vertices.push(Point3::new(T::lit(coords[0]), T::lit(coords[1]), T::lit(coords[2])));
            }
            Some("f") => {
                let corners: Vec<&str> = tokens.collect();
                if corners.len() != 3 {
                    return Err(parse_error(
                        source,
                        line,
                        format!("only triangles are supported, face has {} corners", corners.len()),
                    ));
                }
                let mut tri = [0usize; 3];
                for (slot, corner) in tri.iter_mut().zip(corners) {
                    let idx = corner.split('/').next().unwrap_or("");
                    let i: i64 = idx
                        .parse()
                        .map_err(|_| parse_error(source, line, format!("bad index {idx:?}")))?;
                    let n = vertices.len() as i64;
                    let resolved = if i > 0 { i - 1 } else { n + i };
                    if i == 0 || resolved < 0 || resolved >= n {
                        return Err(parse_error(source, line, format!("index {i} out of range")));
                    }
                    *slot = resolved as usize;
                }
                triangles.push(tri);
            }
            _ => {}
        }
    }
    Mesh::new(vertices, triangles)
}

pub fn read_obj<T: Real>(path: impl AsRef<Path>) -> Result<Mesh<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_obj(&text, &path.display().to_string())
}

pub fn format_obj<T: Real>(mesh: &Mesh<T>) -> String {
    let mut out = format!(
        "# {} vertices, {} triangles\n",
        mesh.vertices.len(),
        mesh.triangles.len()
    );
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x.as_f64(), v.y.as_f64(), v.z.as_f64());
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

pub fn write_obj<T: Real>(mesh: &Mesh<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_obj(mesh))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn tetrahedron() -> Mesh<f64> {
        Mesh::new(
            vec![
                Point3::zero(),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(0.0, 0.0, 1.0 / 3.0),
            ],
            vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn tetrahedron_round_trip() {
        let t = tetrahedron();
        let back: Mesh<f64> = parse_obj(&format_obj(&t), "t").unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn empty_mesh_is_header_only() {
        let text = format_obj(&Mesh::<f64>::empty());
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with('#'));
        assert!(parse_obj::<f64>(&text, "e").unwrap().is_empty());
    }

    #[test]
    fn slashes_and_relative_indices() {
        let text = "v 0 0 0\nv 1 0 0\nvn 0 0 1\nv 0 1 0\nf 1/1/1 2//1 3\nf -3 -2 -1\n";
        let m: Mesh<f64> = parse_obj(text, "s").unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 1, 2]]);
    }

    #[test]
    fn rejects_polygons_and_bad_indices() {
        let quad = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        assert!(matches!(parse_obj::<f64>(quad, "q"), Err(Error::Parse { line: 5, .. })));
        assert!(parse_obj::<f64>("v 0 0 0\nf 1 2 3\n", "b").is_err());
        assert!(parse_obj::<f64>("v 0 0\n", "b").is_err());
    }
}
