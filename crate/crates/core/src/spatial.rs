//! Euclidean distances and a static kd-tree for radius and component-aware
//! nearest-neighbor queries.
//!
//! Every distance in the crate goes through [`sq_dist`] so that results
//! computed by different routes (dense loops, tree queries) compare exactly.

use crate::PointCloud;

const LEAF_SIZE: usize = 12;
const NONE: usize = usize::MAX;

/// Squared Euclidean distance, summed in coordinate order.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub start: usize,
    pub end: usize,
    pub left: usize,
    pub right: usize,
}

impl Node {
    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.left == NONE
    }
}

/// A kd-tree over (a subset of) the points of a cloud.
///
/// Points are copied into tree order; `ids` maps tree slots back to the
/// caller's indices.
#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    pub(crate) coords: Vec<f64>,
    pub(crate) ids: Vec<usize>,
    pub(crate) nodes: Vec<Node>,
    bmin: Vec<f64>,
    bmax: Vec<f64>,
}

impl KdTree {
    /// Builds a tree over every point of `cloud`.
    pub fn new(cloud: &PointCloud) -> KdTree {
        let ids: Vec<usize> = (0..cloud.len()).collect();
        KdTree::with_indices(cloud, &ids)
    }

    /// Builds a tree over `cloud.point(i)` for `i` in `indices`. Query
    /// results report positions within `indices`.
    pub fn with_indices(cloud: &PointCloud, indices: &[usize]) -> KdTree {
        let dim = cloud.dim();
        let mut tree = KdTree {
            dim,
            coords: Vec::new(),
            ids: (0..indices.len()).collect(),
            nodes: Vec::new(),
            bmin: Vec::new(),
            bmax: Vec::new(),
        };
        if indices.is_empty() {
            return tree;
        }
        let mut order: Vec<usize> = (0..indices.len()).collect();
        tree.build(cloud, indices, &mut order, 0, indices.len());
        tree.coords = Vec::with_capacity(indices.len() * dim);
        for &o in &order {
            tree.coords.extend_from_slice(cloud.point(indices[o]));
        }
        tree.ids = order;
        tree
    }

    fn build(
        &mut self,
        cloud: &PointCloud,
        indices: &[usize],
        order: &mut [usize],
        start: usize,
        end: usize,
    ) -> usize {
        let dim = self.dim;
        let id = self.nodes.len();
        self.nodes.push(Node {
            start,
            end,
            left: NONE,
            right: NONE,
        });
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &o in &order[start..end] {
            let p = cloud.point(indices[o]);
            for d in 0..dim {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let (split_dim, spread) = (0..dim)
            .map(|d| (d, hi[d] - lo[d]))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        self.bmin.extend_from_slice(&lo);
        self.bmax.extend_from_slice(&hi);

        if end - start <= LEAF_SIZE || spread <= 0.0 {
            return id;
        }
        let mid = start + (end - start) / 2;
        order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            let pa = cloud.point(indices[a])[split_dim];
            let pb = cloud.point(indices[b])[split_dim];
            pa.total_cmp(&pb)
        });
        let left = self.build(cloud, indices, order, start, mid);
        let right = self.build(cloud, indices, order, mid, end);
        self.nodes[id].left = left;
        self.nodes[id].right = right;
        id
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    #[inline]
    pub(crate) fn slot_point(&self, slot: usize) -> &[f64] {
        &self.coords[slot * self.dim..(slot + 1) * self.dim]
    }

    /// Squared distance from `q` to the bounding box of `node`; never larger
    /// than [`sq_dist`] from `q` to any point inside the box.
    #[inline]
    pub(crate) fn box_sq_dist(&self, node: usize, q: &[f64]) -> f64 {
        let lo = &self.bmin[node * self.dim..(node + 1) * self.dim];
        let hi = &self.bmax[node * self.dim..(node + 1) * self.dim];
        let mut s = 0.0;
        for d in 0..self.dim {
            let x = q[d];
            let diff = if x < lo[d] {
                x - lo[d]
            } else if x > hi[d] {
                x - hi[d]
            } else {
                0.0
            };
            s += diff * diff;
        }
        s
    }

    /// Indices of all points with `dist(q, p) < radius`, in ascending order.
    pub fn within(&self, q: &[f64], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            if self.box_sq_dist(n, q).sqrt() >= radius {
                continue;
            }
            let node = &self.nodes[n];
            if node.is_leaf() {
                for slot in node.start..node.end {
                    if dist(q, self.slot_point(slot)) < radius {
                        out.push(self.ids[slot]);
                    }
                }
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
        out.sort_unstable();
        out
    }
}
