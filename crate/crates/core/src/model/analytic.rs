//! Closed-form occupancy fields used as ground truth.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::OccupancyField;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3, PointCloud};
use crate::scalar::Real;

/// Hard 0/1 occupancy of a simple solid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticField<T> {
    Sphere { center: Point3<T>, radius: T },
    Box { min: Point3<T>, max: Point3<T> },
    /// Torus around the z axis through `center`.
    Torus { center: Point3<T>, major: T, minor: T },
}

impl<T: Real> AnalyticField<T> {
    /// Sphere of radius 0.5 at the origin.
    pub fn unit_sphere() -> Self {
        Self::Sphere {
            center: Point3::zero(),
            radius: T::lit(0.5),
        }
    }

    /// Cube of half-width 0.35 at the origin.
    pub fn unit_box() -> Self {
        Self::Box {
            min: Point3::splat(T::lit(-0.35)),
            max: Point3::splat(T::lit(0.35)),
        }
    }

    /// Torus with radii 0.35 and 0.15 at the origin.
    pub fn unit_torus() -> Self {
        Self::Torus {
            center: Point3::zero(),
            major: T::lit(0.35),
            minor: T::lit(0.15),
        }
    }

    /// Canonical shape by name: `sphere`, `box` or `torus`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "sphere" => Ok(Self::unit_sphere()),
            "box" => Ok(Self::unit_box()),
            "torus" => Ok(Self::unit_torus()),
            other => Err(Error::InvalidConfig(format!(
                "unknown shape `{other}` (expected sphere, box or torus)"
            ))),
        }
    }

    pub fn contains(&self, q: Point3<T>) -> bool {
        match *self {
            Self::Sphere { center, radius } => q.distance_squared(center) <= radius * radius,
            Self::Box { min, max } => Aabb::new(min, max).contains(q),
            Self::Torus {
                center,
                major,
                minor,
            } => {
                let l = q - center;
                let ring = (l.x * l.x + l.y * l.y).sqrt() - major;
                ring * ring + l.z * l.z <= minor * minor
            }
        }
    }

    /// 1 inside (boundary included), 0 outside.
    pub fn query(&self, q: Point3<T>) -> T {
        if self.contains(q) {
            T::one()
        } else {
            T::zero()
        }
    }

    pub fn bounds(&self) -> Aabb<T> {
        match *self {
            Self::Sphere { center, radius } => {
                Aabb::new(center - Point3::splat(radius), center + Point3::splat(radius))
            }
            Self::Box { min, max } => Aabb::new(min, max),
            Self::Torus {
                center,
                major,
                minor,
            } => {
                let e = Point3::new(major + minor, major + minor, minor);
                Aabb::new(center - e, center + e)
            }
        }
    }

    pub fn volume(&self) -> f64 {
        match *self {
            Self::Sphere { radius, .. } => 4.0 / 3.0 * PI * radius.as_f64().powi(3),
            Self::Box { min, max } => {
                let e = max - min;
                (e.x * e.y * e.z).as_f64()
            }
            Self::Torus { major, minor, .. } => 2.0 * PI * PI * major.as_f64() * minor.as_f64().powi(2),
        }
    }

    pub fn surface_area(&self) -> f64 {
        match *self {
            Self::Sphere { radius, .. } => 4.0 * PI * radius.as_f64().powi(2),
            Self::Box { min, max } => {
                let e = (max - min).cast::<f64>();
                2.0 * (e.x * e.y + e.y * e.z + e.z * e.x)
            }
            Self::Torus { major, minor, .. } => 4.0 * PI * PI * major.as_f64() * minor.as_f64(),
        }
    }

    /// Uniform-by-area surface samples with outward unit normals.
    pub fn sample_surface(&self, count: usize, seed: u64) -> Result<PointCloud<T>> {
        let mut rng = crate::seeded_rng(seed);
        let mut points = Vec::with_capacity(count);
        let mut normals = Vec::with_capacity(count);
        for _ in 0..count {
            let (p, n) = self.sample_one(&mut rng);
            points.push(p);
            normals.push(n);
        }
        PointCloud::with_normals(points, normals)
    }

    fn sample_one(&self, rng: &mut impl Rng) -> (Point3<T>, Point3<T>) {
        match *self {
            Self::Sphere { center, radius } => {
                let d = loop {
                    let v = Point3::<f64>::new(
                        StandardNormal.sample(rng),
                        StandardNormal.sample(rng),
                        StandardNormal.sample(rng),
                    );
                    let n = v.norm();
                    if n > 1e-12 {
                        break v / n;
                    }
                };
                let d: Point3<T> = d.cast();
                (center + d * radius, d)
            }
            Self::Box { min, max } => {
                let e = (max - min).cast::<f64>();
                let faces = [e.y * e.z, e.y * e.z, e.x * e.z, e.x * e.z, e.x * e.y, e.x * e.y];
                let total: f64 = faces.iter().sum();
                let mut pick = rng.random::<f64>() * total;
                let mut face = 5;
                for (i, &a) in faces.iter().enumerate() {
                    if pick < a {
                        face = i;
                        break;
                    }
                    pick -= a;
                }
                let axis = face / 2;
                let upper = face % 2 == 1;
                let mut p = [T::zero(); 3];
                let mut n = [T::zero(); 3];
                let lo = min.to_array();
                let hi = max.to_array();
                for a in 0..3 {
                    p[a] = if a == axis {
                        if upper {
                            hi[a]
                        } else {
                            lo[a]
                        }
                    } else {
                        lo[a] + (hi[a] - lo[a]) * T::lit(rng.random::<f64>())
                    };
                }
                n[axis] = if upper { T::one() } else { -T::one() };
                (Point3::from_array(p), Point3::from_array(n))
            }
            Self::Torus {
                center,
                major,
                minor,
            } => {
                let (big, small) = (major.as_f64(), minor.as_f64());
                // Area element is proportional to big + small·cos(v).
                let v = loop {
                    let v = rng.random::<f64>() * 2.0 * PI;
                    if rng.random::<f64>() * (big + small) <= big + small * v.cos() {
                        break v;
                    }
                };
                let u = rng.random::<f64>() * 2.0 * PI;
                let ring = big + small * v.cos();
                let p = Point3::new(ring * u.cos(), ring * u.sin(), small * v.sin());
                let n = Point3::new(v.cos() * u.cos(), v.cos() * u.sin(), v.sin());
                (center + p.cast(), n.cast())
            }
        }
    }
}

impl<T: Real> OccupancyField<T> for AnalyticField<T> {
    fn occupancy(&self, q: Point3<T>) -> T {
        self.query(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_queries() {
        let s = AnalyticField::<f64>::unit_sphere();
        assert_eq!(s.query(Point3::zero()), 1.0);
        assert_eq!(s.query(Point3::new(1.0, 0.0, 0.0)), 0.0);
        assert_eq!(s.query(Point3::new(0.5, 0.0, 0.0)), 1.0);
    }

    #[test]
    fn box_and_torus_queries() {
        let b = AnalyticField::<f64>::unit_box();
        assert_eq!(b.query(Point3::new(0.3, -0.3, 0.34)), 1.0);
        assert_eq!(b.query(Point3::new(0.36, 0.0, 0.0)), 0.0);
        let t = AnalyticField::<f64>::unit_torus();
        assert_eq!(t.query(Point3::zero()), 0.0);
        assert_eq!(t.query(Point3::new(0.35, 0.0, 0.0)), 1.0);
        assert_eq!(t.query(Point3::new(0.0, -0.45, 0.1)), 1.0);
        assert_eq!(t.query(Point3::new(0.0, 0.35, 0.16)), 0.0);
        assert!(AnalyticField::<f64>::by_name("cone").is_err());
    }

    #[test]
    fn monte_carlo_volumes() {
        let mut rng = crate::seeded_rng(17);
        for field in [
            AnalyticField::<f64>::unit_sphere(),
            AnalyticField::unit_box(),
            AnalyticField::unit_torus(),
        ] {
            let n = 1_000_000;
            let hits = (0..n)
                .filter(|_| {
                    let q = Point3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    );
                    field.contains(q)
                })
                .count();
            let est = hits as f64 / n as f64 * 8.0;
            let rel = (est / field.volume() - 1.0).abs();
            assert!(rel < 0.01, "{field:?}: {est} vs {}", field.volume());
        }
    }

    #[test]
    fn surface_samples_lie_on_surface() {
        let sphere = AnalyticField::<f64>::unit_sphere();
        for p in sphere.sample_surface(500, 1).unwrap().points() {
            assert!((p.norm() - 0.5).abs() < 1e-9);
        }
        let torus = AnalyticField::<f64>::unit_torus();
        let cloud = torus.sample_surface(500, 2).unwrap();
        for (p, n) in cloud.points().iter().zip(cloud.normals().unwrap()) {
            let ring = (p.x * p.x + p.y * p.y).sqrt() - 0.35;
            assert!((ring * ring + p.z * p.z - 0.15 * 0.15).abs() < 1e-9);
            assert!((n.norm() - 1.0).abs() < 1e-12);
        }
        let b = AnalyticField::<f64>::unit_box();
        for p in b.sample_surface(500, 3).unwrap().points() {
            let m = p.x.abs().max(p.y.abs()).max(p.z.abs());
            assert!((m - 0.35).abs() < 1e-12);
        }
    }
}
