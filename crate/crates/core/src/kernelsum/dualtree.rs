use super::tree::SpatialTree;
use super::{KernelSpec, KernelSumRequest, SumStats};
use crate::Result;

pub const DEFAULT_LEAF_SIZE: usize = 16;

/// Fraction of the tolerance spent on pruning; the rest absorbs rounding.
const BUDGET_FRACTION: f64 = 0.99;

/// Dual-tree kernel summation for radial, non-increasing kernels.
pub fn dualtree_sum(req: &KernelSumRequest<'_>, leaf_size: usize) -> Result<Vec<f64>> {
    dualtree_sum_with_stats(req, leaf_size).map(|(q, _)| q)
}

/// A source node `S` is approximated for a whole target node `T` when
/// `(K(δ_min) − K(δ_max))/2 ≤ ε`, contributing `W_S (K(δ_min) + K(δ_max))/2`
/// to every target in `T`. Each target is then off by at most `ε W_S` per
/// pruned source node, so at most `ε Σ ω` overall.
pub fn dualtree_sum_with_stats(req: &KernelSumRequest<'_>, leaf_size: usize) -> Result<(Vec<f64>, SumStats)> {
    req.validate()?;
    req.kernel.check_monotone()?;
    let d = req.dim;
    let scale = |pts: &[f64]| -> Vec<f64> {
        pts.chunks_exact(d)
            .flat_map(|p| p.iter().zip(&req.kernel.bandwidth).map(|(v, h)| v / h))
            .collect()
    };
    let src = SpatialTree::build(&scale(req.sources), d, req.source_weights, leaf_size)?;
    let n_t = req.n_targets();
    let tgt = SpatialTree::build(&scale(req.targets), d, &vec![0.0; n_t], leaf_size)?;

    let mut walk = Walk {
        src: &src,
        tgt: &tgt,
        kernel: req.kernel,
        tol: BUDGET_FRACTION * req.epsilon,
        pending: vec![0.0; tgt.nodes.len()],
        acc: vec![0.0; n_t],
        stats: SumStats::default(),
    };
    walk.visit(0, 0);

    let Walk { pending, mut acc, stats, .. } = walk;
    push_down(&tgt, 0, 0.0, &pending, &mut acc);
    let mut q = vec![0.0; n_t];
    for (k, &orig) in tgt.index.iter().enumerate() {
        q[orig] = acc[k];
    }
    Ok((q, stats))
}

struct Walk<'a> {
    src: &'a SpatialTree,
    tgt: &'a SpatialTree,
    kernel: &'a KernelSpec,
    tol: f64,
    /// Per target node, contribution shared by all its points.
    pending: Vec<f64>,
    /// Per target point (tree order), exact contributions.
    acc: Vec<f64>,
    stats: SumStats,
}

impl Walk<'_> {
    fn visit(&mut self, t: usize, s: usize) {
        self.stats.node_pairs += 1;
        let w_s = self.src.nodes[s].weight_sum;
        if w_s == 0.0 {
            return;
        }
        let (dmin2, dmax2) = self.tgt.box_sq_dist_range(t, self.src, s);
        let k_hi = self.kernel.eval_sq(dmin2);
        let k_lo = self.kernel.eval_sq(dmax2);
        if 0.5 * (k_hi - k_lo) <= self.tol {
            self.pending[t] += w_s * 0.5 * (k_hi + k_lo);
            self.stats.pruned_pairs += 1;
            return;
        }

        let (tn, sn) = (&self.tgt.nodes[t], &self.src.nodes[s]);
        match (tn.children, sn.children) {
            (None, None) => self.base_case(t, s),
            (Some((tl, tr)), None) => {
                self.visit(tl, s);
                self.visit(tr, s);
            }
            (None, Some((sl, sr))) => {
                self.visit(t, sl);
                self.visit(t, sr);
            }
            (Some((tl, tr)), Some((sl, sr))) => {
                if sn.len() >= tn.len() {
                    self.visit(t, sl);
                    self.visit(t, sr);
                } else {
                    self.visit(tl, s);
                    self.visit(tr, s);
                }
            }
        }
    }

    fn base_case(&mut self, t: usize, s: usize) {
        let (tn, sn) = (&self.tgt.nodes[t], &self.src.nodes[s]);
        self.stats.kernel_evals += (tn.len() * sn.len()) as u64;
        for k in tn.start..tn.end {
            let y = self.tgt.point(k);
            let mut sum = 0.0;
            for j in sn.start..sn.end {
                let w = self.src.weights[j];
                if w == 0.0 {
                    continue;
                }
                let x = self.src.point(j);
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                sum += w * self.kernel.eval_sq(d2);
            }
            self.acc[k] += sum;
        }
    }
}

fn push_down(tree: &SpatialTree, node: usize, inherited: f64, pending: &[f64], acc: &mut [f64]) {
    let total = inherited + pending[node];
    let n = &tree.nodes[node];
    match n.children {
        Some((l, r)) => {
            push_down(tree, l, total, pending, acc);
            push_down(tree, r, total, pending, acc);
        }
        None => {
            for v in &mut acc[n.start..n.end] {
                *v += total;
            }
        }
    }
}
