//! Point clouds, neighbor search, surface sampling and scene normalization.

mod kdtree;
mod mesh;
mod point;

pub use kdtree::{knn_brute, KdTree, Neighbor};
pub use mesh::{sample_surface, Mesh};
pub use point::{Aabb, Point3};

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Tolerance on the norm of stored unit normals.
pub const NORMAL_TOLERANCE: f64 = 1e-4;

/// Ordered surface samples with optional unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    points: Vec<Point3<T>>,
    normals: Option<Vec<Point3<T>>>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(points: Vec<Point3<T>>) -> Result<Self> {
        Self::build(points, None)
    }

    pub fn with_normals(points: Vec<Point3<T>>, normals: Vec<Point3<T>>) -> Result<Self> {
        Self::build(points, Some(normals))
    }

    fn build(points: Vec<Point3<T>>, normals: Option<Vec<Point3<T>>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidCloud(format!("point {i} is not finite")));
        }
        if let Some(normals) = &normals {
            if normals.len() != points.len() {
                return Err(Error::InvalidCloud(format!(
                    "{} normals for {} points",
                    normals.len(),
                    points.len()
                )));
            }
            let tol = T::lit(NORMAL_TOLERANCE);
            if let Some(i) = normals
                .iter()
                .position(|n| !((n.norm() - T::one()).abs() <= tol))
            {
                return Err(Error::InvalidCloud(format!("normal {i} is not unit length")));
            }
        }
        Ok(Self { points, normals })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false: construction rejects empty clouds.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Point3<T>]> {
        self.normals.as_deref()
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    pub fn into_parts(self) -> (Vec<Point3<T>>, Option<Vec<Point3<T>>>) {
        (self.points, self.normals)
    }

    pub fn centroid(&self) -> Point3<T> {
        let sum = self
            .points
            .iter()
            .fold(Point3::zero(), |acc, &p| acc + p);
        sum / T::from_usize_lossy(self.len())
    }

    pub fn aabb(&self) -> Aabb<T> {
        Aabb::from_points(&self.points).expect("cloud is non-empty")
    }

    /// Sub-cloud in the order of `indices`.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let points = indices.iter().map(|&i| self.points[i]).collect();
        let normals = self
            .normals
            .as_ref()
            .map(|n| indices.iter().map(|&i| n[i]).collect());
        Self::build(points, normals)
    }

    /// Applies `f` to every position, keeping normals.
    pub fn map_points(&self, f: impl Fn(Point3<T>) -> Point3<T>) -> Result<Self> {
        Self::build(
            self.points.iter().map(|&p| f(p)).collect(),
            self.normals.clone(),
        )
    }

    pub fn without_normals(&self) -> Self {
        Self {
            points: self.points.clone(),
            normals: None,
        }
    }

    pub fn cast<U: Real>(&self) -> PointCloud<U> {
        PointCloud {
            points: self.points.iter().map(|p| p.cast()).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| n.iter().map(|p| p.cast()).collect()),
        }
    }
}

/// Mean distance from each point to its nearest other point.
pub fn mean_nn_distance<T: Real>(cloud: &PointCloud<T>) -> Result<T> {
    let tree = KdTree::build(cloud)?;
    mean_nn_distance_with(cloud, &tree)
}

fn mean_nn_distance_with<T: Real>(cloud: &PointCloud<T>, tree: &KdTree<T>) -> Result<T> {
    let n = cloud.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let mut buf = Vec::with_capacity(2);
    let mut total = T::zero();
    for (i, &p) in cloud.points().iter().enumerate() {
        tree.knn_into(p, 2, &mut buf);
        // With duplicates, `i` need not come first.
        let other = buf
            .iter()
            .find(|nb| nb.index != i)
            .expect("k=2 over N>=2 yields another index");
        total += other.distance;
    }
    Ok(total / T::from_usize_lossy(n))
}

/// Scales the cloud about its centroid so that its mean nearest-neighbor
/// distance becomes `target_mean_nn`. Returns the scaled cloud and the factor.
pub fn rescale_to_reference<T: Real>(
    cloud: &PointCloud<T>,
    target_mean_nn: T,
) -> Result<(PointCloud<T>, T)> {
    if !(target_mean_nn > T::zero()) {
        return Err(Error::InvalidConfig(format!(
            "target mean nearest-neighbor distance must be positive, got {target_mean_nn}"
        )));
    }
    let current = mean_nn_distance(cloud)?;
    if current <= T::zero() {
        return Err(Error::ZeroNearestNeighborDistance);
    }
    let scale = target_mean_nn / current;
    let c = cloud.centroid();
    let scaled = cloud.map_points(|p| c + (p - c) * scale)?;
    Ok((scaled, scale))
}

/// Perturbs every coordinate with independent `N(0, sigma^2)` noise.
pub fn add_gaussian_noise<T: Real>(cloud: &PointCloud<T>, sigma: T, seed: u64) -> PointCloud<T> {
    if sigma == T::zero() {
        return cloud.clone();
    }
    let mut rng = crate::seeded_rng(seed);
    let mut draw = || T::lit(StandardNormal.sample(&mut rng)) * sigma;
    let points = cloud
        .points()
        .iter()
        .map(|&p| {
            let (dx, dy, dz) = (draw(), draw(), draw());
            p + Point3::new(dx, dy, dz)
        })
        .collect();
    PointCloud {
        points,
        normals: cloud.normals.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(xs: &[f64]) -> PointCloud<f64> {
        PointCloud::new(xs.iter().map(|&x| Point3::new(x, 0.0, 0.0)).collect()).unwrap()
    }

    fn random_cloud(n: usize, seed: u64) -> PointCloud<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new(
            (0..n)
                .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_clouds() {
        assert!(PointCloud::<f64>::new(vec![]).is_err());
        assert!(PointCloud::new(vec![Point3::new(f64::NAN, 0.0, 0.0)]).is_err());
        assert!(PointCloud::with_normals(
            vec![Point3::zero()],
            vec![Point3::new(0.0, 0.0, 1.1)]
        )
        .is_err());
        assert!(PointCloud::<f64>::with_normals(vec![Point3::zero()], vec![]).is_err());
    }

    #[test]
    fn mean_nn_on_lines() {
        assert_eq!(mean_nn_distance(&line(&[0.0, 1.0, 2.0])).unwrap(), 1.0);
        let d = mean_nn_distance(&line(&[0.0, 1.0, 3.0])).unwrap();
        assert!((d - 4.0 / 3.0).abs() < 1e-15);
        assert!(mean_nn_distance(&line(&[0.0])).is_err());
    }

    #[test]
    fn mean_nn_matches_double_loop() {
        let cloud = random_cloud(500, 1);
        let pts = cloud.points();
        let mut total = 0.0;
        for (i, p) in pts.iter().enumerate() {
            let mut best = f64::INFINITY;
            for (j, q) in pts.iter().enumerate() {
                if i != j {
                    best = best.min(p.distance(*q));
                }
            }
            total += best;
        }
        let oracle = total / pts.len() as f64;
        assert!((mean_nn_distance(&cloud).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn rescale_cases() {
        let c = line(&[0.0, 1.0, 2.0]);
        let (same, s) = rescale_to_reference(&c, 1.0).unwrap();
        assert_eq!(s, 1.0);
        assert_eq!(same, c);

        let (double, s) = rescale_to_reference(&c, 2.0).unwrap();
        assert_eq!(s, 2.0);
        assert_eq!(mean_nn_distance(&double).unwrap(), 2.0);

        let degenerate = line(&[0.5, 0.5, 0.5]);
        assert!(matches!(
            rescale_to_reference(&degenerate, 1.0),
            Err(Error::ZeroNearestNeighborDistance)
        ));
        assert!(rescale_to_reference(&c, 0.0).is_err());
    }

    #[test]
    fn rescale_keeps_normals() {
        let pts = vec![Point3::zero(), Point3::new(1.0, 0.0, 0.0)];
        let normals = vec![Point3::new(0.0, 0.0, 1.0); 2];
        let c = PointCloud::with_normals(pts, normals.clone()).unwrap();
        let (r, _) = rescale_to_reference(&c, 0.1).unwrap();
        assert_eq!(r.normals().unwrap(), &normals[..]);
    }

    #[test]
    fn noise_properties() {
        let c = random_cloud(50, 2);
        assert_eq!(add_gaussian_noise(&c, 0.0, 9), c);
        assert_eq!(add_gaussian_noise(&c, 0.1, 9), add_gaussian_noise(&c, 0.1, 9));
        assert_ne!(add_gaussian_noise(&c, 0.1, 9), add_gaussian_noise(&c, 0.1, 10));
    }

    #[test]
    fn noise_standard_deviation() {
        let c = PointCloud::new(vec![Point3::<f64>::zero(); 100_000]).unwrap();
        let noisy = add_gaussian_noise(&c, 0.05, 42);
        for axis in 0..3 {
            let v: Vec<f64> = noisy.points().iter().map(|p| p[axis]).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            let std = var.sqrt();
            assert!((0.049..=0.051).contains(&std), "axis {axis}: std {std}");
        }
    }
}
