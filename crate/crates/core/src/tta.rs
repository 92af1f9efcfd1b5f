//! Latent-level test-time augmentation and kNN chunking of large clouds.
//!
//! Both strategies encode several sub-clouds independently and average each
//! point's latent over the passes that contained it.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{KdTree, PointCloud};
use crate::model::{LatentField, PocoModel};
use crate::numerics::Matrix;
use crate::scalar::Real;
use crate::seeded_rng;

/// Default number of views per point when subsampling.
pub const DEFAULT_SUBSAMPLE_VIEWS: usize = 10;
/// Default number of views per point when chunking.
pub const DEFAULT_CHUNK_VIEWS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsamplePlan {
    /// Ascending, distinct indices per subsample.
    pub subsamples: Vec<Vec<usize>>,
    /// Number of subsamples each point belongs to.
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkPlan {
    /// Ascending, distinct indices per chunk.
    pub chunks: Vec<Vec<usize>>,
    pub counts: Vec<usize>,
}

fn coverage(sets: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut counts = vec![0; n];
    for set in sets {
        for &i in set {
            counts[i] += 1;
        }
    }
    counts
}

/// Builds subsamples one at a time, always drawing among the least-seen
/// points, until every point has been seen `n_view` times.
pub fn plan_subsamples(
    n: usize,
    sample_size: usize,
    n_view: usize,
    seed: u64,
) -> Result<SubsamplePlan> {
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    if sample_size == 0 || sample_size > n {
        return Err(Error::InvalidConfig(format!(
            "subsample size {sample_size} must be in 1..={n}"
        )));
    }
    if n_view == 0 {
        return Err(Error::InvalidConfig("n_view must be at least 1".into()));
    }
    let mut rng = seeded_rng(seed);
    let mut counts = vec![0usize; n];
    let mut in_current = vec![false; n];
    let mut subsamples = Vec::new();
    loop {
        let min = *counts.iter().min().expect("n > 0");
        if min >= n_view {
            break;
        }
        // Counts only ever span two adjacent values, so the candidate pool is
        // refilled at most once per subsample.
        let mut level = min;
        let mut pool: Vec<usize> = (0..n).filter(|&i| counts[i] == level).collect();
        let mut chosen = Vec::with_capacity(sample_size);
        while chosen.len() < sample_size {
            if pool.is_empty() {
                level += 1;
                pool = (0..n)
                    .filter(|&i| counts[i] == level && !in_current[i])
                    .collect();
            }
            let i = pool.swap_remove(rng.random_range(0..pool.len()));
            counts[i] += 1;
            in_current[i] = true;
            chosen.push(i);
        }
        for &i in &chosen {
            in_current[i] = false;
        }
        chosen.sort_unstable();
        subsamples.push(chosen);
    }
    Ok(SubsamplePlan { subsamples, counts })
}

/// Covers a large cloud with kNN patches of at most `n_test` points, each
/// grown around a least-covered seed point.
pub fn plan_chunks<T: Real>(
    cloud: &PointCloud<T>,
    n_test: usize,
    n_view: usize,
    seed: u64,
) -> Result<ChunkPlan> {
    let n = cloud.len();
    if n_test == 0 {
        return Err(Error::InvalidConfig("chunk size must be positive".into()));
    }
    if n_view == 0 {
        return Err(Error::InvalidConfig("n_view must be at least 1".into()));
    }
    if n <= n_test {
        return Ok(ChunkPlan {
            chunks: vec![(0..n).collect()],
            counts: vec![1; n],
        });
    }
    let tree = KdTree::build(cloud)?;
    let mut rng = seeded_rng(seed);
    let mut counts = vec![0usize; n];
    let mut chunks = Vec::new();
    loop {
        let min = *counts.iter().min().expect("n > 0");
        if min >= n_view {
            break;
        }
        let candidates: Vec<usize> = (0..n).filter(|&i| counts[i] == min).collect();
        let s = candidates[rng.random_range(0..candidates.len())];
        let mut chunk: Vec<usize> = tree
            .knn(cloud.points()[s], n_test)
            .iter()
            .map(|nb| nb.index)
            .collect();
        // Duplicated positions can push the seed out of its own neighborhood.
        if !chunk.contains(&s) {
            *chunk.last_mut().expect("n_test > 0") = s;
        }
        chunk.sort_unstable();
        for &i in &chunk {
            counts[i] += 1;
        }
        chunks.push(chunk);
    }
    Ok(ChunkPlan { chunks, counts })
}

/// Encodes each index set as its own cloud and averages every point's latents
/// in set order.
fn encode_averaged<T: Real>(
    model: &PocoModel<T>,
    cloud: &PointCloud<T>,
    sets: &[Vec<usize>],
) -> Result<LatentField<T>> {
    let n = cloud.len();
    let k_enc = model.config().encoder_neighbors;
    for set in sets {
        if set.len() < k_enc {
            return Err(Error::TooFewPoints {
                needed: k_enc,
                got: set.len(),
            });
        }
        if let Some(&bad) = set.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidConfig(format!(
                "index {bad} out of range for {n} points"
            )));
        }
    }
    let counts = coverage(sets, n);
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidConfig(format!(
            "point {missing} is not covered by any pass"
        )));
    }

    let encoded: Vec<Matrix<T>> = sets
        .par_iter()
        .map(|set| model.encode_latents(&cloud.subset(set)?))
        .collect::<Result<_>>()?;

    let width = model.config().latent_size;
    let mut sum = Matrix::zeros(n, width);
    let mut seen = vec![0usize; n];
    for (set, z) in sets.iter().zip(&encoded) {
        for (row, &i) in set.iter().enumerate() {
            let dst = sum.row_mut(i);
            if seen[i] == 0 {
                dst.copy_from_slice(z.row(row));
            } else {
                for (d, &v) in dst.iter_mut().zip(z.row(row)) {
                    *d += v;
                }
            }
            seen[i] += 1;
        }
    }
    for (i, &c) in seen.iter().enumerate() {
        if c > 1 {
            let count = T::from_usize_lossy(c);
            for v in sum.row_mut(i) {
                *v /= count;
            }
        }
    }
    LatentField::new(cloud.clone(), sum)
}

/// Latents averaged over the subsamples of `plan`.
pub fn encode_with_tta<T: Real>(
    model: &PocoModel<T>,
    cloud: &PointCloud<T>,
    plan: &SubsamplePlan,
) -> Result<LatentField<T>> {
    encode_averaged(model, cloud, &plan.subsamples)
}

/// Latents averaged over overlapping kNN chunks.
pub fn encode_chunked<T: Real>(
    model: &PocoModel<T>,
    cloud: &PointCloud<T>,
    plan: &ChunkPlan,
) -> Result<LatentField<T>> {
    encode_averaged(model, cloud, &plan.chunks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_plan(plan: &SubsamplePlan, n: usize, size: usize, n_view: usize) {
        assert_eq!(plan.counts, coverage(&plan.subsamples, n));
        for s in &plan.subsamples {
            assert_eq!(s.len(), size);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
        }
        let min = *plan.counts.iter().min().unwrap();
        let max = *plan.counts.iter().max().unwrap();
        assert!(min >= n_view);
        assert!(max - min <= 1, "{:?}", plan.counts);
    }

    #[test]
    fn full_size_subsamples() {
        let plan = plan_subsamples(7, 7, 3, 0).unwrap();
        assert_eq!(plan.subsamples, vec![(0..7).collect::<Vec<_>>(); 3]);
    }

    #[test]
    fn ten_four_two() {
        for seed in 0..50 {
            let plan = plan_subsamples(10, 4, 2, seed).unwrap();
            assert!(plan.subsamples.len() >= 5);
            check_plan(&plan, 10, 4, 2);
        }
    }

    #[test]
    fn half_size_partitions() {
        for seed in 0..20 {
            let plan = plan_subsamples(12, 6, 1, seed).unwrap();
            assert_eq!(plan.subsamples.len(), 2);
            let mut all: Vec<usize> = plan.subsamples.concat();
            all.sort_unstable();
            assert_eq!(all, (0..12).collect::<Vec<_>>());
        }
    }

    #[test]
    fn balanced_for_awkward_sizes() {
        for (n, size, v) in [(3, 2, 4), (17, 5, 3), (100, 37, 10), (9, 8, 2)] {
            let plan = plan_subsamples(n, size, v, 1).unwrap();
            check_plan(&plan, n, size, v);
        }
    }

    #[test]
    fn seeded_and_reproducible() {
        assert_eq!(
            plan_subsamples(50, 13, 4, 9).unwrap(),
            plan_subsamples(50, 13, 4, 9).unwrap()
        );
        assert_ne!(
            plan_subsamples(50, 13, 4, 9).unwrap(),
            plan_subsamples(50, 13, 4, 10).unwrap()
        );
    }

    #[test]
    fn bad_subsample_arguments() {
        assert!(plan_subsamples(0, 1, 1, 0).is_err());
        assert!(plan_subsamples(5, 6, 1, 0).is_err());
        assert!(plan_subsamples(5, 0, 1, 0).is_err());
        assert!(plan_subsamples(5, 2, 0, 0).is_err());
    }
}
