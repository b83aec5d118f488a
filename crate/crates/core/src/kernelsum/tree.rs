use crate::{Error, Result};

/// One kd-tree node. Points `start..end` of the tree's permuted arrays
/// belong to it.
#[derive(Debug, Clone)]
pub struct TreeNode {
    pub start: usize,
    pub end: usize,
    pub weight_sum: f64,
    pub children: Option<(usize, usize)>,
}

impl TreeNode {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// Median-split kd-tree with axis-aligned bounding boxes and cached
/// per-node weight sums. Node 0 is the root.
#[derive(Debug, Clone)]
pub struct SpatialTree {
    pub dim: usize,
    /// Point coordinates in tree order.
    pub points: Vec<f64>,
    /// Point weights in tree order.
    pub weights: Vec<f64>,
    /// `index[k]` is the caller's index of the `k`-th point in tree order.
    pub index: Vec<usize>,
    pub nodes: Vec<TreeNode>,
    /// `2 * dim` entries per node: lower corner then upper corner.
    bounds: Vec<f64>,
}

/// Builds a tree over unit-weight points.
pub fn build_tree(points: &[f64], dim: usize, leaf_size: usize) -> Result<SpatialTree> {
    let n = points.len().checked_div(dim).unwrap_or(0);
    SpatialTree::build(points, dim, &vec![1.0; n], leaf_size)
}

impl SpatialTree {
    pub fn build(points: &[f64], dim: usize, weights: &[f64], leaf_size: usize) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::InvalidRequest("tree needs at least one point of positive dimension".into()));
        }
        if leaf_size == 0 {
            return Err(Error::param("leaf_size", "must be at least 1"));
        }
        let n = points.len() / dim;
        if weights.len() != n {
            return Err(Error::LengthMismatch(format!("{n} points but {} weights", weights.len())));
        }
        let mut index: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::with_capacity(2 * n / leaf_size + 1);
        let mut bounds = Vec::new();
        build_node(points, dim, weights, leaf_size, &mut index, 0, &mut nodes, &mut bounds);

        let mut tree_points = Vec::with_capacity(points.len());
        for &i in &index {
            tree_points.extend_from_slice(&points[i * dim..(i + 1) * dim]);
        }
        let tree_weights = index.iter().map(|&i| weights[i]).collect();
        Ok(Self { dim, points: tree_points, weights: tree_weights, index, nodes, bounds })
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn lo(&self, node: usize) -> &[f64] {
        let o = 2 * self.dim * node;
        &self.bounds[o..o + self.dim]
    }

    pub fn hi(&self, node: usize) -> &[f64] {
        let o = 2 * self.dim * node;
        &self.bounds[o + self.dim..o + 2 * self.dim]
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().enumerate().filter(|(_, n)| n.is_leaf()).map(|(i, _)| i)
    }

    pub fn depth(&self) -> usize {
        fn go(t: &SpatialTree, n: usize) -> usize {
            match t.nodes[n].children {
                None => 1,
                Some((l, r)) => 1 + go(t, l).max(go(t, r)),
            }
        }
        go(self, 0)
    }

    /// Squared minimum and maximum distances between the boxes of node `a`
    /// of `self` and node `b` of `other`.
    pub(crate) fn box_sq_dist_range(&self, a: usize, other: &SpatialTree, b: usize) -> (f64, f64) {
        let (alo, ahi, blo, bhi) = (self.lo(a), self.hi(a), other.lo(b), other.hi(b));
        let mut dmin = 0.0;
        let mut dmax = 0.0;
        for k in 0..self.dim {
            let gap = (blo[k] - ahi[k]).max(alo[k] - bhi[k]).max(0.0);
            let span = (bhi[k] - alo[k]).max(ahi[k] - blo[k]);
            dmin += gap * gap;
            dmax += span * span;
        }
        (dmin, dmax)
    }
}

#[allow(clippy::too_many_arguments)]
fn build_node(
    points: &[f64],
    dim: usize,
    weights: &[f64],
    leaf_size: usize,
    index: &mut [usize],
    offset: usize,
    nodes: &mut Vec<TreeNode>,
    bounds: &mut Vec<f64>,
) -> usize {
    let id = nodes.len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for &i in index.iter() {
        for k in 0..dim {
            let v = points[i * dim + k];
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    bounds.extend_from_slice(&lo);
    bounds.extend_from_slice(&hi);
    nodes.push(TreeNode { start: offset, end: offset + index.len(), weight_sum: 0.0, children: None });

    if index.len() <= leaf_size {
        nodes[id].weight_sum = index.iter().map(|&i| weights[i]).sum();
        return id;
    }

    // Widest dimension; when every dimension is constant the split below
    // still halves the index range, so depth stays logarithmic.
    let split_dim = (0..dim)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    let mid = index.len() / 2;
    index.select_nth_unstable_by(mid, |&a, &b| {
        points[a * dim + split_dim].total_cmp(&points[b * dim + split_dim])
    });
    let (left_idx, right_idx) = index.split_at_mut(mid);
    let left = build_node(points, dim, weights, leaf_size, left_idx, offset, nodes, bounds);
    let right = build_node(points, dim, weights, leaf_size, right_idx, offset + mid, nodes, bounds);
    nodes[id].children = Some((left, right));
    nodes[id].weight_sum = nodes[left].weight_sum + nodes[right].weight_sum;
    id
}
