//! Isosurface extraction from occupancy fields.
//!
//! [`mc_dense`] evaluates every grid corner. [`mc_regro`] starts from the
//! cells holding seed points and only evaluates corners that lie within two
//! grid steps of both an empty and a full corner, so it touches a thin shell
//! around the surface. Both place vertices by bisection along sign-change
//! edges and share vertices through an undirected edge key.

mod tables;

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Mesh, Point3, PointCloud};
use crate::model::OccupancyField;
use crate::scalar::Real;
use tables::{CORNER_OFFSETS, EDGE_CORNERS, TRIANGLE_TABLE};

/// Probability at or above which a corner is full.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_DICHOTOMY_ITERS: usize = 10;

/// Chebyshev radius, in grid steps, of the region-growing frontier.
const FRONTIER_RADIUS: usize = 2;
const EVAL_CHUNK: usize = 4096;

/// A regular grid of corners `origin + step·(i, j, k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub origin: Point3<T>,
    pub step: T,
    /// Corner counts per axis.
    pub dims: [usize; 3],
}

impl<T: Real> GridSpec<T> {
    pub fn new(origin: Point3<T>, step: T, dims: [usize; 3]) -> Result<Self> {
        if !(step > T::zero()) || !step.is_finite() {
            return Err(Error::InvalidGrid(format!("step {step} must be positive")));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidGrid("non-finite origin".into()));
        }
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 corners per axis, got {dims:?}"
            )));
        }
        if dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).is_none() {
            return Err(Error::InvalidGrid("grid too large".into()));
        }
        Ok(Self { origin, step, dims })
    }

    /// `resolution` cells along the longest side of `bounds`, starting at its
    /// minimum corner.
    pub fn fit(bounds: &Aabb<T>, resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidGrid("resolution must be positive".into()));
        }
        let e = bounds.extent();
        let longest = e.x.max(e.y).max(e.z);
        let step = longest / T::from_usize_lossy(resolution);
        Self::with_step(bounds, step)
    }

    /// Cells of side `step` covering `bounds`.
    pub fn with_step(bounds: &Aabb<T>, step: T) -> Result<Self> {
        if !(step > T::zero()) || !step.is_finite() {
            return Err(Error::InvalidGrid(format!("step {step} must be positive")));
        }
        let e = bounds.extent();
        let slack = T::lit(1e-9);
        let cells = |len: T| -> usize {
            let c = (len / step - slack).ceil();
            c.to_usize().unwrap_or(usize::MAX).max(1)
        };
        Self::new(
            bounds.min,
            step,
            [cells(e.x) + 1, cells(e.y) + 1, cells(e.z) + 1],
        )
    }

    pub fn corner_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn cell_count(&self) -> usize {
        (self.dims[0] - 1) * (self.dims[1] - 1) * (self.dims[2] - 1)
    }

    pub fn corner_index(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    pub fn corner_coords(&self, index: usize) -> [usize; 3] {
        let i = index % self.dims[0];
        let rest = index / self.dims[0];
        [i, rest % self.dims[1], rest / self.dims[1]]
    }

    pub fn corner_position(&self, c: [usize; 3]) -> Point3<T> {
        let f = |o: T, i: usize| o + self.step * T::from_usize_lossy(i);
        Point3::new(
            f(self.origin.x, c[0]),
            f(self.origin.y, c[1]),
            f(self.origin.z, c[2]),
        )
    }

    pub fn cell_index(&self, c: [usize; 3]) -> usize {
        c[0] + (self.dims[0] - 1) * (c[1] + (self.dims[1] - 1) * c[2])
    }

    pub fn cell_coords(&self, index: usize) -> [usize; 3] {
        let (nx, ny) = (self.dims[0] - 1, self.dims[1] - 1);
        let i = index % nx;
        let rest = index / nx;
        [i, rest % ny, rest / ny]
    }

    /// The far corner of the grid.
    pub fn max_corner(&self) -> Point3<T> {
        self.corner_position([self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1])
    }

    pub fn bounds(&self) -> Aabb<T> {
        Aabb::new(self.origin, self.max_corner())
    }

    /// Cell enclosing `p`; points on the far faces belong to the last cell.
    pub fn cell_containing(&self, p: Point3<T>) -> Option<[usize; 3]> {
        if !p.is_finite() || !self.bounds().contains(p) {
            return None;
        }
        let mut c = [0; 3];
        for (axis, slot) in c.iter_mut().enumerate() {
            let t = ((p[axis] - self.origin[axis]) / self.step).floor();
            *slot = t.to_usize().unwrap_or(0).min(self.dims[axis] - 2);
        }
        Some(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshingOptions {
    pub dichotomy_iters: usize,
    pub threshold: f64,
}

impl Default for MeshingOptions {
    fn default() -> Self {
        Self {
            dichotomy_iters: DEFAULT_DICHOTOMY_ITERS,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// Field queries issued during one meshing run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MeshStats {
    pub corner_evaluations: usize,
    pub edge_evaluations: usize,
    pub surface_edges: usize,
}

impl MeshStats {
    pub fn total_evaluations(&self) -> usize {
        self.corner_evaluations + self.edge_evaluations
    }
}

#[derive(Debug, Clone)]
pub struct Extraction<T> {
    pub mesh: Mesh<T>,
    pub stats: MeshStats,
}

fn evaluate<T: Real, F: OccupancyField<T> + ?Sized>(field: &F, points: &[Point3<T>]) -> Vec<T> {
    points
        .par_chunks(EVAL_CHUNK)
        .map(|c| field.occupancy_batch(c))
        .collect::<Vec<_>>()
        .concat()
}

fn midpoint<T: Real>(a: Point3<T>, b: Point3<T>) -> Point3<T> {
    let half = T::lit(0.5);
    Point3::new((a.x + b.x) * half, (a.y + b.y) * half, (a.z + b.z) * half)
}

/// Bisects every `(full, empty)` segment in lockstep, one batched query per
/// round. Returns the final interval midpoints and the number of queries.
fn bisect_edges<T: Real, F: OccupancyField<T> + ?Sized>(
    field: &F,
    mut segments: Vec<(Point3<T>, Point3<T>)>,
    iters: usize,
    threshold: T,
) -> (Vec<Point3<T>>, usize) {
    let mut evals = 0;
    for _ in 0..iters {
        let mids: Vec<Point3<T>> = segments.iter().map(|&(f, e)| midpoint(f, e)).collect();
        let probs = evaluate(field, &mids);
        evals += mids.len();
        for ((seg, m), p) in segments.iter_mut().zip(mids).zip(probs) {
            if p >= threshold {
                seg.0 = m;
            } else {
                seg.1 = m;
            }
        }
    }
    let out = segments.iter().map(|&(f, e)| midpoint(f, e)).collect();
    (out, evals)
}

/// Locates the class transition between `a` and `b` by bisection.
///
/// The result is the midpoint of the final interval, whose length is
/// `‖b − a‖·2^(−iters)`.
pub fn dichotomic_edge_vertex<T: Real, F: OccupancyField<T> + ?Sized>(
    field: &F,
    a: Point3<T>,
    b: Point3<T>,
    iters: usize,
) -> Result<Point3<T>> {
    dichotomic_edge_vertex_at(field, a, b, iters, T::lit(DEFAULT_THRESHOLD))
}

pub fn dichotomic_edge_vertex_at<T: Real, F: OccupancyField<T> + ?Sized>(
    field: &F,
    a: Point3<T>,
    b: Point3<T>,
    iters: usize,
    threshold: T,
) -> Result<Point3<T>> {
    let pa = field.occupancy(a) >= threshold;
    let pb = field.occupancy(b) >= threshold;
    if pa == pb {
        return Err(Error::SameClassEndpoints);
    }
    let seg = if pa { (a, b) } else { (b, a) };
    Ok(bisect_edges(field, vec![seg], iters, threshold).0[0])
}

/// Runs the case table over `cells` (ascending) and places vertices.
fn extract<T: Real, F: OccupancyField<T> + ?Sized>(
    field: &F,
    grid: &GridSpec<T>,
    cells: impl Iterator<Item = usize>,
    is_full: impl Fn(usize) -> bool,
    opts: &MeshingOptions,
) -> (Mesh<T>, usize, usize) {
    let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut segments = Vec::new();
    let mut triangles = Vec::new();
    for cell in cells {
        let base = grid.cell_coords(cell);
        let corners = CORNER_OFFSETS.map(|o| {
            grid.corner_index([base[0] + o[0], base[1] + o[1], base[2] + o[2]])
        });
        let mut case = 0usize;
        for (bit, &c) in corners.iter().enumerate() {
            if is_full(c) {
                case |= 1 << bit;
            }
        }
        if case == 0 || case == 255 {
            continue;
        }
        let mut vertex = |edge: i8| -> usize {
            let [a, b] = EDGE_CORNERS[edge as usize];
            let (ca, cb) = (corners[a], corners[b]);
            let key = (ca.min(cb), ca.max(cb));
            *edge_ids.entry(key).or_insert_with(|| {
                let pa = grid.corner_position(grid.corner_coords(ca));
                let pb = grid.corner_position(grid.corner_coords(cb));
                debug_assert_ne!(is_full(ca), is_full(cb));
                segments.push(if is_full(ca) { (pa, pb) } else { (pb, pa) });
                segments.len() - 1
            })
        };
        for tri in TRIANGLE_TABLE[case].chunks(3) {
            if tri[0] < 0 {
                break;
            }
            // The table winds toward set corners; full corners are inside,
            // so the order is reversed to face the empty side.
            triangles.push([vertex(tri[0]), vertex(tri[2]), vertex(tri[1])]);
        }
    }
    let surface_edges = segments.len();
    let (vertices, evals) = bisect_edges(
        field,
        segments,
        opts.dichotomy_iters,
        T::lit(opts.threshold),
    );
    let mesh = Mesh::new(vertices, triangles).expect("indices come from the edge map");
    (mesh, evals, surface_edges)
}

/// Marching cubes over every cell of `grid`.
pub fn mc_dense<T: Real, F: OccupancyField<T> + ?Sized>(
    field: &F,
    grid: &GridSpec<T>,
    opts: &MeshingOptions,
) -> Result<Extraction<T>> {
    let positions: Vec<Point3<T>> = (0..grid.corner_count())
        .map(|i| grid.corner_position(grid.corner_coords(i)))
        .collect();
    let threshold = T::lit(opts.threshold);
    let full: Vec<bool> = evaluate(field, &positions)
        .into_iter()
        .map(|p| p >= threshold)
        .collect();
    let (mesh, edge_evaluations, surface_edges) =
        extract(field, grid, 0..grid.cell_count(), |c| full[c], opts);
    Ok(Extraction {
        mesh,
        stats: MeshStats {
            corner_evaluations: positions.len(),
            edge_evaluations,
            surface_edges,
        },
    })
}

/// Sparse corner classification built up by region growing.
#[derive(Debug, Clone, Default)]
pub struct OccupancyCache<T> {
    probabilities: HashMap<usize, T>,
}

impl<T: Real> OccupancyCache<T> {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probability(&self, corner: usize) -> Option<T> {
        self.probabilities.get(&corner).copied()
    }

    fn insert(&mut self, corner: usize, p: T) {
        let prev = self.probabilities.insert(corner, p);
        debug_assert!(prev.is_none(), "corner {corner} evaluated twice");
    }
}

fn neighborhood(
    grid_dims: [usize; 3],
    c: [usize; 3],
    radius: usize,
) -> impl Iterator<Item = [usize; 3]> {
    let lo = c.map(|v| v.saturating_sub(radius));
    let hi = [0, 1, 2].map(|a| (c[a] + radius).min(grid_dims[a] - 1));
    (lo[2]..=hi[2]).flat_map(move |z| {
        (lo[1]..=hi[1]).flat_map(move |y| (lo[0]..=hi[0]).map(move |x| [x, y, z]))
    })
}

/// Marching cubes grown from the cells containing `seeds`.
///
/// Only cells whose eight corners were all evaluated are extracted. Every
/// cell with mixed corners on a reached surface satisfies this, since each
/// of its corners is within one step of both an empty and a full corner.
///
/// Produces the same triangles as [`mc_dense`] on every surface component
/// reached from a seed, while only querying the field near that surface.
pub fn mc_regro<T: Real, F: OccupancyField<T> + ?Sized>(
    field: &F,
    grid: &GridSpec<T>,
    seeds: &PointCloud<T>,
    opts: &MeshingOptions,
) -> Result<Extraction<T>> {
    let (cache, corner_evaluations) = grow(field, grid, seeds, opts)?;
    let threshold = T::lit(opts.threshold);
    let is_full = |c: usize| cache.probability(c).is_some_and(|p| p >= threshold);

    let mut cells: Vec<usize> = Vec::new();
    let mut seen = HashSet::new();
    for (&c, &p) in &cache.probabilities {
        if p < threshold {
            continue;
        }
        let cc = grid.corner_coords(c);
        for o in CORNER_OFFSETS {
            // Cells with this corner at offset `o`.
            if (0..3).any(|a| cc[a] < o[a] || cc[a] - o[a] > grid.dims[a] - 2) {
                continue;
            }
            let base = [cc[0] - o[0], cc[1] - o[1], cc[2] - o[2]];
            let cell = grid.cell_index(base);
            if !seen.insert(cell) {
                continue;
            }
            // Deep interior corners are never evaluated; a cell touching one
            // is not on a reached surface and would produce spurious faces.
            let evaluated = CORNER_OFFSETS.iter().all(|d| {
                let c = grid.corner_index([base[0] + d[0], base[1] + d[1], base[2] + d[2]]);
                cache.probability(c).is_some()
            });
            if evaluated {
                cells.push(cell);
            }
        }
    }
    cells.sort_unstable();
    let (mesh, edge_evaluations, surface_edges) =
        extract(field, grid, cells.into_iter(), is_full, opts);
    Ok(Extraction {
        mesh,
        stats: MeshStats {
            corner_evaluations,
            edge_evaluations,
            surface_edges,
        },
    })
}

/// Seeds the cache and grows it to the frontier fixpoint in batched waves.
fn grow<T: Real, F: OccupancyField<T> + ?Sized>(
    field: &F,
    grid: &GridSpec<T>,
    seeds: &PointCloud<T>,
    opts: &MeshingOptions,
) -> Result<(OccupancyCache<T>, usize)> {
    let mut wave = Vec::new();
    for (index, &p) in seeds.points().iter().enumerate() {
        let cell = grid
            .cell_containing(p)
            .ok_or(Error::SeedOutsideGrid { index })?;
        for o in CORNER_OFFSETS {
            wave.push(grid.corner_index([cell[0] + o[0], cell[1] + o[1], cell[2] + o[2]]));
        }
    }
    wave.sort_unstable();
    wave.dedup();

    let threshold = T::lit(opts.threshold);
    let mut cache = OccupancyCache::default();
    // Bit 0: an evaluated empty corner is near; bit 1: a full one is.
    let mut near: HashMap<usize, u8> = HashMap::new();
    let mut queued: HashSet<usize> = wave.iter().copied().collect();
    let mut evaluations = 0;
    while !wave.is_empty() {
        let positions: Vec<Point3<T>> = wave
            .iter()
            .map(|&c| grid.corner_position(grid.corner_coords(c)))
            .collect();
        let probs = evaluate(field, &positions);
        evaluations += wave.len();
        let mut next = Vec::new();
        for (&c, p) in wave.iter().zip(probs) {
            cache.insert(c, p);
            let bit = if p >= threshold { 2 } else { 1 };
            for n in neighborhood(grid.dims, grid.corner_coords(c), FRONTIER_RADIUS) {
                let n = grid.corner_index(n);
                if queued.contains(&n) {
                    continue;
                }
                let flags = near.entry(n).or_insert(0);
                *flags |= bit;
                if *flags == 3 {
                    queued.insert(n);
                    near.remove(&n);
                    next.push(n);
                }
            }
        }
        next.sort_unstable();
        wave = next;
    }
    Ok((cache, evaluations))
}

/// Edge-use counts of a triangle mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WatertightReport {
    pub is_closed: bool,
    pub boundary_edge_count: usize,
    pub non_manifold_edge_count: usize,
}

pub fn watertight_check<T>(mesh: &Mesh<T>) -> WatertightReport {
    let mut uses: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &mesh.triangles {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            *uses.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let boundary = uses.values().filter(|&&n| n == 1).count();
    let non_manifold = uses.values().filter(|&&n| n > 2).count();
    WatertightReport {
        is_closed: boundary == 0 && non_manifold == 0,
        boundary_edge_count: boundary,
        non_manifold_edge_count: non_manifold,
    }
}
