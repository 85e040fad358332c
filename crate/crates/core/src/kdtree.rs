//! Exact k-d tree over fixed-dimension `f64` points.
//!
//! Used both for 3D vertex queries and for high-dimensional descriptor
//! matching. Searches backtrack fully, so results equal brute force,
//! including tie order: equal distances are ordered by point index.

use std::cmp::Ordering;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    points: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// A search hit: point index and squared Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Neighbor {
    #[inline]
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KdTree {
    /// Builds a tree over `points`, laid out row-major with `dim` columns.
    pub fn new(points: Vec<f64>, dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        assert_eq!(points.len() % dim, 0, "flat point buffer not a multiple of dim");
        let n = points.len() / dim;
        let mut tree = KdTree {
            dim,
            points,
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build(0, n);
        }
        tree
    }

    pub fn from_points3(points: &[nalgebra::Vector3<f64>]) -> Self {
        let flat = points.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        Self::new(flat, 3)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let dim = self.widest_dim(start, end);
        let mid = start + (end - start) / 2;
        {
            let points = &self.points;
            let d = self.dim;
            self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                points[a * d + dim]
                    .total_cmp(&points[b * d + dim])
                    .then(a.cmp(&b))
            });
        }
        let value = self.points[self.order[mid] * self.dim + dim];
        self.nodes.push(Node::Split { dim, value, left: 0, right: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    fn widest_dim(&self, start: usize, end: usize) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for d in 0..self.dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[start..end] {
                let v = self.points[i * self.dim + d];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best.1 {
                best = (d, hi - lo);
            }
        }
        best.0
    }

    /// Exact nearest neighbor.
    pub fn nearest(&self, query: &[f64]) -> Option<Neighbor> {
        self.knn(query, 1).into_iter().next()
    }

    /// Exact `k` nearest neighbors sorted by (distance, index).
    pub fn knn(&self, query: &[f64], k: usize) -> Vec<Neighbor> {
        assert_eq!(query.len(), self.dim, "query dimension mismatch");
        let mut best: Vec<Neighbor> = Vec::with_capacity(k + 1);
        if k == 0 || self.is_empty() {
            return best;
        }
        self.knn_rec(0, query, k, &mut best);
        best
    }

    fn knn_rec(&self, node: usize, query: &[f64], k: usize, best: &mut Vec<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Neighbor {
                        index: i,
                        dist_sq: sq_dist(self.point(i), query),
                    };
                    if best.len() < k || cand.cmp_key(best.last().unwrap()) == Ordering::Less {
                        let pos = best
                            .binary_search_by(|b| b.cmp_key(&cand))
                            .unwrap_or_else(|p| p);
                        best.insert(pos, cand);
                        best.truncate(k);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = query[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near, query, k, best);
                // `<=` keeps equal-distance candidates with lower indices reachable.
                if best.len() < k || diff * diff <= best.last().unwrap().dist_sq {
                    self.knn_rec(far, query, k, best);
                }
            }
        }
    }

    /// All points with squared distance `<= radius²`, sorted by index.
    pub fn within_radius(&self, query: &[f64], radius: f64) -> Vec<usize> {
        assert_eq!(query.len(), self.dim, "query dimension mismatch");
        let mut out = Vec::new();
        if !self.is_empty() {
            self.radius_rec(0, query, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, node: usize, query: &[f64], r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if sq_dist(self.point(i), query) <= r2 {
                        out.push(i);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = query[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.radius_rec(near, query, r2, out);
                if diff * diff <= r2 {
                    self.radius_rec(far, query, r2, out);
                }
            }
        }
    }
}

/// Brute-force k nearest neighbors with the same ordering contract as [`KdTree::knn`].
pub fn brute_force_knn(points: &[f64], dim: usize, query: &[f64], k: usize) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = points
        .chunks_exact(dim)
        .enumerate()
        .map(|(index, p)| Neighbor {
            index,
            dist_sq: sq_dist(p, query),
        })
        .collect();
    all.sort_by(|a, b| a.cmp_key(b));
    all.truncate(k);
    all
}
