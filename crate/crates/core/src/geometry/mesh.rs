use rand::Rng;

use super::{Aabb, Point3, PointCloud};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Triangle mesh. Triangles wind counter-clockwise seen from the empty side,
/// so face normals point outward.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh<T> {
    pub vertices: Vec<Point3<T>>,
    pub triangles: Vec<[usize; 3]>,
}

impl<T: Real> Mesh<T> {
    pub fn new(vertices: Vec<Point3<T>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some(t) = triangles.iter().position(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::InvalidCloud(format!(
                "triangle {t} references a vertex out of range ({n} vertices)"
            )));
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            triangles: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Point3<T>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalized normal, twice the triangle area in length.
    pub fn face_cross(&self, t: usize) -> Point3<T> {
        let [a, b, c] = self.corners(t);
        (b - a).cross(c - a)
    }

    pub fn triangle_area(&self, t: usize) -> T {
        self.face_cross(t).norm() * T::lit(0.5)
    }

    pub fn area(&self) -> T {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Divergence-theorem volume; positive for closed outward-oriented meshes.
    pub fn signed_volume(&self) -> T {
        let sixth = T::lit(1.0 / 6.0);
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                a.dot(b.cross(c)) * sixth
            })
            .sum()
    }

    pub fn aabb(&self) -> Option<Aabb<T>> {
        Aabb::from_points(&self.vertices)
    }

    pub fn map_vertices(&self, f: impl Fn(Point3<T>) -> Point3<T>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn cast<U: Real>(&self) -> Mesh<U> {
        Mesh {
            vertices: self.vertices.iter().map(|v| v.cast()).collect(),
            triangles: self.triangles.clone(),
        }
    }
}

/// Draws `count` points uniformly by area over the mesh surface; each sample
/// carries the unit normal of the face it was drawn from.
pub fn sample_surface<T: Real>(mesh: &Mesh<T>, count: usize, seed: u64) -> Result<PointCloud<T>> {
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0f64;
    for t in 0..mesh.triangles.len() {
        total += mesh.triangle_area(t).as_f64();
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateMesh);
    }
    let mut rng = crate::seeded_rng(seed);
    let mut points = Vec::with_capacity(count);
    let mut normals = Vec::with_capacity(count);
    for _ in 0..count {
        let target = rng.random::<f64>() * total;
        let mut t = cumulative.partition_point(|&c| c <= target);
        t = t.min(cumulative.len() - 1);
        // Skip zero-area faces that a boundary draw could land on.
        while mesh.triangle_area(t) <= T::zero() {
            t = (t + 1) % cumulative.len();
        }
        let [a, b, c] = mesh.corners(t);
        let r1 = rng.random::<f64>().sqrt();
        let r2 = rng.random::<f64>();
        let (u, v) = (T::lit(1.0 - r1), T::lit(r1 * (1.0 - r2)));
        let w = T::lit(r1 * r2);
        points.push(a * u + b * v + c * w);
        normals.push(mesh.face_cross(t).normalized());
    }
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    PointCloud::with_normals(points, normals)
}
