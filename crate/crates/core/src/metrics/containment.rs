//! Inside/outside queries for closed triangle meshes by ray-crossing parity.

use crate::geometry::{Aabb, Mesh, Point3};
use crate::scalar::Real;

const MAX_JITTER_TRIES: usize = 16;

/// Casts rays along +z; triangles are bucketed by their xy footprint.
#[derive(Debug, Clone)]
pub struct MeshContainment<T> {
    mesh: Mesh<T>,
    bounds: Option<Aabb<T>>,
    res: [usize; 2],
    cell: [T; 2],
    buckets: Vec<Vec<usize>>,
    jitter: T,
}

enum Crossings {
    Count(usize),
    Degenerate,
}

impl<T: Real> MeshContainment<T> {
    pub fn new(mesh: &Mesh<T>) -> Self {
        let bounds = mesh.aabb();
        let n = mesh.triangles.len();
        let side = ((n as f64).sqrt().ceil() as usize).clamp(1, 512);
        let mut out = Self {
            mesh: mesh.clone(),
            bounds,
            res: [side, side],
            cell: [T::one(), T::one()],
            buckets: vec![Vec::new(); side * side],
            jitter: T::zero(),
        };
        let Some(b) = bounds else {
            return out;
        };
        let e = b.extent();
        let diag = e.norm();
        out.jitter = diag * T::lit(1e-7);
        let tiny = T::lit(1e-12);
        out.cell = [
            (e.x / T::from_usize_lossy(side)).max(tiny),
            (e.y / T::from_usize_lossy(side)).max(tiny),
        ];
        for t in 0..n {
            let c = mesh.corners(t);
            let lo = c[0].min_by_component(c[1]).min_by_component(c[2]);
            let hi = c[0].max_by_component(c[1]).max_by_component(c[2]);
            let (x0, y0) = out.bucket_of(lo.x, lo.y);
            let (x1, y1) = out.bucket_of(hi.x, hi.y);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    out.buckets[x + side * y].push(t);
                }
            }
        }
        out
    }

    fn bucket_of(&self, x: T, y: T) -> (usize, usize) {
        let b = self.bounds.expect("non-empty mesh");
        let f = |v: T, o: T, c: T, n: usize| {
            ((v - o) / c).floor().to_isize().unwrap_or(0).clamp(0, n as isize - 1) as usize
        };
        (
            f(x, b.min.x, self.cell[0], self.res[0]),
            f(y, b.min.y, self.cell[1], self.res[1]),
        )
    }

    fn crossings(&self, p: Point3<T>) -> Crossings {
        let b = self.bounds.expect("non-empty mesh");
        if p.x < b.min.x || p.x > b.max.x || p.y < b.min.y || p.y > b.max.y {
            return Crossings::Count(0);
        }
        let (bx, by) = self.bucket_of(p.x, p.y);
        let eps = T::lit(1e-12) * (T::one() + self.cell[0] * self.cell[1]);
        let mut count = 0;
        for &t in &self.buckets[bx + self.res[0] * by] {
            let [a, bb, c] = self.mesh.corners(t);
            let orient = |u: Point3<T>, v: Point3<T>| {
                (v.x - u.x) * (p.y - u.y) - (v.y - u.y) * (p.x - u.x)
            };
            let w0 = orient(bb, c);
            let w1 = orient(c, a);
            let w2 = orient(a, bb);
            let area = w0 + w1 + w2;
            if area.abs() <= eps {
                // Vertical face: the ray grazes it at most.
                continue;
            }
            let s = area.signum();
            let (w0, w1, w2) = (w0 * s, w1 * s, w2 * s);
            if w0 < -eps || w1 < -eps || w2 < -eps {
                continue;
            }
            if w0 <= eps || w1 <= eps || w2 <= eps {
                return Crossings::Degenerate;
            }
            let z = (w0 * a.z + w1 * bb.z + w2 * c.z) / (area * s);
            if z > p.z {
                count += 1;
            }
        }
        Crossings::Count(count)
    }

    /// Odd crossing count along +z. Rays through edges or vertices are
    /// retried from deterministically jittered origins.
    pub fn contains(&self, p: Point3<T>) -> bool {
        if self.bounds.is_none() {
            return false;
        }
        let mut q = p;
        for k in 0..MAX_JITTER_TRIES {
            match self.crossings(q) {
                Crossings::Count(n) => return n % 2 == 1,
                Crossings::Degenerate => {
                    let k = T::from_usize_lossy(k + 1);
                    q = Point3::new(
                        p.x + self.jitter * k * T::lit(0.618_033_988_7),
                        p.y + self.jitter * k * T::lit(0.414_213_562_4),
                        p.z,
                    );
                }
            }
        }
        false
    }
}
