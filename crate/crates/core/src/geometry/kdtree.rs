//! Exact k-nearest-neighbor index.
//!
//! Results are ordered by `(distance, index)` so that equidistant points come
//! back in ascending index order, identical to a linear scan.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Point3, PointCloud};
use crate::error::{Error, Result};
use crate::scalar::Real;

const LEAF_SIZE: usize = 8;

/// One entry of a neighbor query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<T> {
    pub index: usize,
    pub distance: T,
}

#[derive(Debug, Clone, Copy)]
enum Metric {
    Euclidean,
    L1,
}

impl Metric {
    /// Comparison key: squared distance for Euclidean, plain distance for L1.
    #[inline]
    fn key<T: Real>(self, a: Point3<T>, b: Point3<T>) -> T {
        match self {
            Metric::Euclidean => a.distance_squared(b),
            Metric::L1 => a.distance_l1(b),
        }
    }

    /// Lower bound on `key` for any point across a splitting plane.
    #[inline]
    fn plane_key<T: Real>(self, diff: T) -> T {
        match self {
            Metric::Euclidean => diff * diff,
            Metric::L1 => diff.abs(),
        }
    }

    #[inline]
    fn distance<T: Real>(self, key: T) -> T {
        match self {
            Metric::Euclidean => key.sqrt(),
            Metric::L1 => key,
        }
    }
}

#[derive(Debug, Clone)]
enum Node<T> {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: T,
        left: usize,
        right: usize,
    },
}

/// Immutable kd-tree over the positions of a point cloud.
#[derive(Debug, Clone)]
pub struct KdTree<T> {
    points: Vec<Point3<T>>,
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

#[derive(Clone, Copy)]
struct Candidate<T> {
    key: T,
    index: usize,
}

impl<T: Real> PartialEq for Candidate<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Real> Eq for Candidate<T> {}

impl<T: Real> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for Candidate<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .partial_cmp(&other.key)
            .unwrap_or(Ordering::Equal)
            .then(self.index.cmp(&other.index))
    }
}

impl<T: Real> KdTree<T> {
    pub fn build(cloud: &PointCloud<T>) -> Result<Self> {
        Self::from_points(cloud.points().to_vec())
    }

    pub fn from_points(points: Vec<Point3<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut tree = Self {
            order: (0..points.len()).collect(),
            points,
            nodes: Vec::new(),
        };
        let n = tree.points.len();
        tree.build_node(0, n);
        Ok(tree)
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let slice = &mut self.order[start..end];
        let points = &self.points;
        let mut lo = points[slice[0]];
        let mut hi = lo;
        for &i in slice.iter() {
            lo = lo.min_by_component(points[i]);
            hi = hi.max_by_component(points[i]);
        }
        let ext = hi - lo;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            points[a][axis]
                .partial_cmp(&points[b][axis])
                .unwrap_or(Ordering::Equal)
        });
        let value = points[slice[mid]][axis];
        // Placeholder, patched once the children exist.
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, start + mid);
        let right = self.build_node(start + mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    /// The `min(k, N)` nearest points by Euclidean distance, ascending, ties
    /// by index. A result shorter than `k` means `k` was clamped to `N`.
    pub fn knn(&self, q: Point3<T>, k: usize) -> Vec<Neighbor<T>> {
        let mut out = Vec::with_capacity(k.min(self.len()));
        self.knn_into(q, k, &mut out);
        out
    }

    /// Allocation-reusing variant of [`KdTree::knn`].
    pub fn knn_into(&self, q: Point3<T>, k: usize, out: &mut Vec<Neighbor<T>>) {
        self.search(q, k, Metric::Euclidean, out);
    }

    /// Nearest point under the L1 metric.
    pub fn nearest_l1(&self, q: Point3<T>) -> Neighbor<T> {
        let mut out = Vec::with_capacity(1);
        self.search(q, 1, Metric::L1, &mut out);
        out[0]
    }

    pub fn nearest(&self, q: Point3<T>) -> Neighbor<T> {
        let mut out = Vec::with_capacity(1);
        self.search(q, 1, Metric::Euclidean, &mut out);
        out[0]
    }

    fn search(&self, q: Point3<T>, k: usize, metric: Metric, out: &mut Vec<Neighbor<T>>) {
        out.clear();
        let k = k.min(self.len());
        if k == 0 {
            return;
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.visit(0, q, k, metric, &mut heap);
        out.extend(heap.into_sorted_vec().into_iter().map(|c| Neighbor {
            index: c.index,
            distance: metric.distance(c.key),
        }));
    }

    fn visit(
        &self,
        node: usize,
        q: Point3<T>,
        k: usize,
        metric: Metric,
        heap: &mut BinaryHeap<Candidate<T>>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &index in &self.order[start..end] {
                    let cand = Candidate {
                        key: metric.key(q, self.points[index]),
                        index,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= T::zero() {
                    (left, right)
                } else {
                    (right, left)
                };
                self.visit(near, q, k, metric, heap);
                // `<=` keeps equidistant lower-index points reachable.
                let bound = metric.plane_key(diff);
                if heap.len() < k || bound <= heap.peek().expect("heap is non-empty").key {
                    self.visit(far, q, k, metric, heap);
                }
            }
        }
    }
}

/// Linear-scan kNN with the same contract as [`KdTree::knn`].
pub fn knn_brute<T: Real>(points: &[Point3<T>], q: Point3<T>, k: usize) -> Vec<Neighbor<T>> {
    let mut all: Vec<(T, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, &p)| (q.distance_squared(p), i))
        .collect();
    all.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    all.truncate(k.min(points.len()));
    all.into_iter()
        .map(|(d2, index)| Neighbor {
            index,
            distance: d2.sqrt(),
        })
        .collect()
}
