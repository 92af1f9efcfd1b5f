//! Reconstruction metrics: Chamfer-L1, normal consistency, F-score and
//! volumetric IoU.

mod containment;

pub use containment::MeshContainment;

use std::fmt;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{sample_surface, KdTree, Mesh, Point3, PointCloud};
use crate::model::AnalyticField;
use crate::scalar::Real;
use crate::seeded_rng;

pub const DEFAULT_FSCORE_THRESHOLD: f64 = 0.01;

/// How the cosine between matched normals is folded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum NormalMode {
    /// `|n₁·n₂|`, insensitive to orientation flips.
    #[default]
    Absolute,
    Signed,
}

fn mean<T: Real>(values: &[T]) -> T {
    values.iter().copied().sum::<T>() / T::from_usize_lossy(values.len())
}

fn nonempty<T>(p: &[Point3<T>]) -> Result<()> {
    if p.is_empty() {
        Err(Error::EmptyCloud)
    } else {
        Ok(())
    }
}

/// Distance from each of `from` to its L1-nearest point of `to`.
fn l1_nearest<T: Real>(from: &[Point3<T>], to: &KdTree<T>) -> Vec<T> {
    from.par_iter().map(|&p| to.nearest_l1(p).distance).collect()
}

fn euclid_nearest<T: Real>(from: &[Point3<T>], to: &KdTree<T>) -> Vec<(usize, T)> {
    from.par_iter()
        .map(|&p| {
            let nb = to.nearest(p);
            (nb.index, nb.distance)
        })
        .collect()
}

/// Symmetric Chamfer distance under the L1 norm (unscaled).
pub fn chamfer_l1<T: Real>(p1: &[Point3<T>], p2: &[Point3<T>]) -> Result<T> {
    nonempty(p1)?;
    nonempty(p2)?;
    let t1 = KdTree::from_points(p1.to_vec())?;
    let t2 = KdTree::from_points(p2.to_vec())?;
    let half = T::lit(0.5);
    Ok(half * mean(&l1_nearest(p1, &t2)) + half * mean(&l1_nearest(p2, &t1)))
}

/// Symmetric mean cosine between each normal and the normal of its
/// Euclidean nearest neighbor in the other cloud.
pub fn normal_consistency<T: Real>(
    p1: &PointCloud<T>,
    p2: &PointCloud<T>,
    mode: NormalMode,
) -> Result<T> {
    let (Some(n1), Some(n2)) = (p1.normals(), p2.normals()) else {
        return Err(Error::InvalidCloud("normal consistency needs normals".into()));
    };
    let t1 = KdTree::build(p1)?;
    let t2 = KdTree::build(p2)?;
    let fold = |c: T| match mode {
        NormalMode::Absolute => c.abs(),
        NormalMode::Signed => c,
    };
    let side = |pts: &[Point3<T>], normals: &[Point3<T>], other: &[Point3<T>], tree: &KdTree<T>| {
        let cos: Vec<T> = euclid_nearest(pts, tree)
            .iter()
            .zip(normals)
            .map(|(&(j, _), n)| fold(n.dot(other[j])))
            .collect();
        mean(&cos)
    };
    let half = T::lit(0.5);
    Ok(half * side(p1.points(), n1, n2, &t2) + half * side(p2.points(), n2, n1, &t1))
}

/// Harmonic mean of the fractions of each cloud lying closer than `t` to the
/// other.
pub fn fscore<T: Real>(p1: &[Point3<T>], p2: &[Point3<T>], t: T) -> Result<T> {
    nonempty(p1)?;
    nonempty(p2)?;
    if !(t > T::zero()) {
        return Err(Error::InvalidConfig(format!("F-score threshold {t} must be positive")));
    }
    let t1 = KdTree::from_points(p1.to_vec())?;
    let t2 = KdTree::from_points(p2.to_vec())?;
    let frac = |from: &[Point3<T>], tree: &KdTree<T>| {
        let hits = euclid_nearest(from, tree).iter().filter(|&&(_, d)| d < t).count();
        T::from_usize_lossy(hits) / T::from_usize_lossy(from.len())
    };
    let recall = frac(p1, &t2);
    let precision = frac(p2, &t1);
    if recall + precision == T::zero() {
        return Ok(T::zero());
    }
    Ok(T::lit(2.0) * recall * precision / (recall + precision))
}

/// `TP / (TP + FP + FN)`; 1 when both labelings are entirely empty.
pub fn iou_occupancy(pred: &[bool], gt: &[bool]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::ShapeMismatch {
            op: "iou",
            lhs: (pred.len(), 1),
            rhs: (gt.len(), 1),
        });
    }
    let mut tp = 0usize;
    let mut union = 0usize;
    for (&p, &g) in pred.iter().zip(gt) {
        tp += (p && g) as usize;
        union += (p || g) as usize;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(tp as f64 / union as f64)
}

/// Reference surface for [`evaluate_reconstruction`].
#[derive(Debug, Clone)]
pub enum GroundTruth<T> {
    Analytic(AnalyticField<T>),
    Mesh(Mesh<T>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub surface_samples: usize,
    pub volume_samples: usize,
    pub seed: u64,
    pub fscore_threshold: f64,
    pub normal_mode: NormalMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            surface_samples: 100_000,
            volume_samples: 100_000,
            seed: 0,
            fscore_threshold: DEFAULT_FSCORE_THRESHOLD,
            normal_mode: NormalMode::Absolute,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub chamfer_x100: f64,
    pub normal_consistency: f64,
    pub fscore: f64,
    pub fscore_threshold: f64,
    pub iou: f64,
    pub surface_samples: usize,
    pub volume_samples: usize,
    /// The prediction has boundary or non-manifold edges, so its inside is
    /// ill-defined and `iou` is approximate.
    pub open_prediction: bool,
}

impl MetricsReport {
    /// `key=value` lines for scripts.
    pub fn key_values(&self) -> String {
        format!(
            "chamfer_x100={}\nnormal_consistency={}\nfscore={}\nfscore_threshold={}\niou={}\n\
             surface_samples={}\nvolume_samples={}\nopen_prediction={}\n",
            self.chamfer_x100,
            self.normal_consistency,
            self.fscore,
            self.fscore_threshold,
            self.iou,
            self.surface_samples,
            self.volume_samples,
            self.open_prediction
        )
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22}{:>12.6}", "Chamfer-L1 x100", self.chamfer_x100)?;
        writeln!(f, "{:<22}{:>12.6}", "Normal consistency", self.normal_consistency)?;
        writeln!(
            f,
            "{:<22}{:>12.6}",
            format!("F-score (t={})", self.fscore_threshold),
            self.fscore
        )?;
        writeln!(f, "{:<22}{:>12.6}", "IoU", self.iou)?;
        writeln!(f, "{:<22}{:>12}", "Surface samples", self.surface_samples)?;
        write!(f, "{:<22}{:>12}", "Volume samples", self.volume_samples)?;
        if self.open_prediction {
            write!(f, "\nwarning: predicted mesh is not closed; IoU is approximate")?;
        }
        Ok(())
    }
}

/// Compares a predicted mesh against a reference by surface sampling and by
/// uniform volume sampling of the union of both bounding boxes.
pub fn evaluate_reconstruction<T: Real>(
    pred: &Mesh<T>,
    gt: &GroundTruth<T>,
    opts: &EvalOptions,
) -> Result<MetricsReport> {
    if opts.surface_samples == 0 || opts.volume_samples == 0 {
        return Err(Error::InvalidConfig("sample counts must be positive".into()));
    }
    let pred_surface = sample_surface(pred, opts.surface_samples, opts.seed)?;
    let gt_seed = opts.seed.wrapping_add(1);
    let gt_surface = match gt {
        GroundTruth::Analytic(f) => f.sample_surface(opts.surface_samples, gt_seed)?,
        GroundTruth::Mesh(m) => sample_surface(m, opts.surface_samples, gt_seed)?,
    };

    let chamfer = chamfer_l1(pred_surface.points(), gt_surface.points())?;
    let nc = normal_consistency(&pred_surface, &gt_surface, opts.normal_mode)?;
    let fs = fscore(
        pred_surface.points(),
        gt_surface.points(),
        T::lit(opts.fscore_threshold),
    )?;

    let gt_bounds = match gt {
        GroundTruth::Analytic(f) => f.bounds(),
        GroundTruth::Mesh(m) => m.aabb().ok_or(Error::DegenerateMesh)?,
    };
    let bounds = pred.aabb().ok_or(Error::DegenerateMesh)?.union(&gt_bounds);
    let mut rng = seeded_rng(opts.seed.wrapping_add(2));
    let samples: Vec<Point3<T>> = (0..opts.volume_samples)
        .map(|_| {
            let mut c = [T::zero(); 3];
            for (a, slot) in c.iter_mut().enumerate() {
                let u = T::lit(rng.random::<f64>());
                *slot = bounds.min[a] + (bounds.max[a] - bounds.min[a]) * u;
            }
            Point3::from_array(c)
        })
        .collect();
    let pred_in = MeshContainment::new(pred);
    let pred_labels: Vec<bool> = samples.par_iter().map(|&q| pred_in.contains(q)).collect();
    let gt_labels: Vec<bool> = match gt {
        GroundTruth::Analytic(f) => samples.iter().map(|&q| f.contains(q)).collect(),
        GroundTruth::Mesh(m) => {
            let inside = MeshContainment::new(m);
            samples.par_iter().map(|&q| inside.contains(q)).collect()
        }
    };
    let iou = iou_occupancy(&pred_labels, &gt_labels)?;

    Ok(MetricsReport {
        chamfer_x100: chamfer.as_f64() * 100.0,
        normal_consistency: nc.as_f64(),
        fscore: fs.as_f64(),
        fscore_threshold: opts.fscore_threshold,
        iou,
        surface_samples: opts.surface_samples,
        volume_samples: opts.volume_samples,
        open_prediction: !crate::mesher::watertight_check(pred).is_closed,
    })
}

#[cfg(test)]
mod tests;
