//! Static kd-tree for exact nearest-neighbor queries.
//!
//! Built once over an immutable coordinate matrix and queried from many
//! threads. Queries are exact: pruning only skips a subtree when no point
//! inside it can beat the current k-th best distance, and range queries
//! use an inclusive radius so distance ties are never lost.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    point: u32,
    axis: u8,
    left: u32,
    right: u32,
}

/// Flat view of a dataset: `n` points of dimension `dim`, row-major.
#[derive(Debug, Clone)]
pub(crate) struct Matrix {
    pub dim: usize,
    pub coords: Vec<f64>,
}

impl Matrix {
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
}

#[inline]
pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Max-heap entry ordered by squared distance.
struct HeapItem {
    d2: f64,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.d2.total_cmp(&other.d2) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct KdTree {
    nodes: Vec<Node>,
    root: u32,
}

impl KdTree {
    pub fn build(data: &Matrix) -> Self {
        let n = data.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut tree = KdTree {
            nodes: Vec::with_capacity(n),
            root: NIL,
        };
        tree.root = tree.build_rec(data, &mut order, 0);
        tree
    }

    fn build_rec(&mut self, data: &Matrix, order: &mut [u32], depth: usize) -> u32 {
        if order.is_empty() {
            return NIL;
        }
        let axis = depth % data.dim;
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            data.row(a as usize)[axis].total_cmp(&data.row(b as usize)[axis])
        });
        let point = order[mid];
        let node_idx = self.nodes.len() as u32;
        self.nodes.push(Node {
            point,
            axis: axis as u8,
            left: NIL,
            right: NIL,
        });
        let (lo, rest) = order.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = self.build_rec(data, lo, depth + 1);
        let right = self.build_rec(data, hi, depth + 1);
        let node = &mut self.nodes[node_idx as usize];
        node.left = left;
        node.right = right;
        node_idx
    }

    /// Squared distance to the k-th nearest point, excluding `exclude`.
    ///
    /// Requires at least `k` eligible points in the tree.
    pub fn kth_dist_sq(&self, data: &Matrix, query: &[f64], k: usize, exclude: u32) -> f64 {
        debug_assert!(k >= 1);
        let mut heap: BinaryHeap<HeapItem> = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(data, query, k, exclude, self.root, &mut heap);
        debug_assert_eq!(heap.len(), k);
        heap.peek().expect("tree smaller than k").d2
    }

    fn knn_rec(
        &self,
        data: &Matrix,
        query: &[f64],
        k: usize,
        exclude: u32,
        node_idx: u32,
        heap: &mut BinaryHeap<HeapItem>,
    ) {
        if node_idx == NIL {
            return;
        }
        let node = &self.nodes[node_idx as usize];
        if node.point != exclude {
            let d2 = dist_sq(query, data.row(node.point as usize));
            if heap.len() < k {
                heap.push(HeapItem { d2 });
            } else if d2 < heap.peek().unwrap().d2 {
                heap.pop();
                heap.push(HeapItem { d2 });
            }
        }
        let axis = node.axis as usize;
        let delta = query[axis] - data.row(node.point as usize)[axis];
        let (near, far) = if delta <= 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.knn_rec(data, query, k, exclude, near, heap);
        if heap.len() < k || delta * delta <= heap.peek().unwrap().d2 {
            self.knn_rec(data, query, k, exclude, far, heap);
        }
    }

    /// All point ids within squared radius `r2` (inclusive), excluding
    /// `exclude`, in ascending id order.
    pub fn within_radius(&self, data: &Matrix, query: &[f64], r2: f64, exclude: u32) -> Vec<u32> {
        let mut out = Vec::new();
        self.range_rec(data, query, r2, exclude, self.root, &mut out);
        out.sort_unstable();
        out
    }

    fn range_rec(
        &self,
        data: &Matrix,
        query: &[f64],
        r2: f64,
        exclude: u32,
        node_idx: u32,
        out: &mut Vec<u32>,
    ) {
        if node_idx == NIL {
            return;
        }
        let node = &self.nodes[node_idx as usize];
        if node.point != exclude {
            let d2 = dist_sq(query, data.row(node.point as usize));
            if d2 <= r2 {
                out.push(node.point);
            }
        }
        let axis = node.axis as usize;
        let delta = query[axis] - data.row(node.point as usize)[axis];
        let (near, far) = if delta <= 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.range_rec(data, query, r2, exclude, near, out);
        if delta * delta <= r2 {
            self.range_rec(data, query, r2, exclude, far, out);
        }
    }
}
