//! Fast Gauss transform.
//!
//! Coordinates are rescaled by `1/(√2 h_d)` so the kernel becomes
//! `exp(−|u − v|²)`. Sources are binned into boxes of side `box_side · h`.
//! Each box with more sources than expansion terms is summarised by a
//! tensor Hermite expansion about its centre `c`:
//!
//! ```text
//! exp(−(v − u)²) = Σ_n ((u − c)^n / n!) h_n(v − c),   h_n(t) = H_n(t) e^{−t²}
//! ```
//!
//! truncated at order `p` per dimension. The remaining boxes are summed
//! directly. Boxes whose nearest point is farther than the cutoff radius `R`
//! from a target are skipped.
//!
//! Error budget per unit source weight, split evenly:
//! * truncation, via Cramér's bound `|h_n(t)| ≤ K 2^{n/2} √(n!)`: with
//!   `ρ = √2 · half_width`, the per-dimension tail is at most
//!   `T(p) = K Σ_{n≥p} ρ^n / √(n!)`, and the tensor product error is at most
//!   `d T (1 + T)^{d−1}`;
//! * cutoff: every skipped source contributes at most `e^{−R²}`.

use std::collections::HashMap;

use super::{CompensatedSum, KernelFamily, KernelSumRequest, SumStats};
use crate::{Error, Result};

pub const FGT_MAX_DIM: usize = 3;

const CRAMER_K: f64 = 1.086_435;
const BUDGET_FRACTION: f64 = 0.99;
const MAX_ORDER: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct FgtParams {
    /// Box side in units of the bandwidth. Must be below 2.
    pub box_side: f64,
    /// Minimum expansion order; raised when the tolerance demands more.
    pub min_order: usize,
}

impl Default for FgtParams {
    fn default() -> Self {
        Self { box_side: 1.0, min_order: 1 }
    }
}

/// Smallest order `p ≥ 1` whose truncation bound, per unit weight, is at
/// most `tol` for boxes of side `box_side` bandwidths in `dim` dimensions.
pub fn fgt_order_for(tol: f64, box_side: f64, dim: usize) -> usize {
    let rho = box_side / 2.0;
    // terms[n] = ρ^n / √(n!)
    let mut terms = Vec::with_capacity(MAX_ORDER + 64);
    let mut t = 1.0;
    for n in 0..MAX_ORDER + 64 {
        if n > 0 {
            t *= rho / (n as f64).sqrt();
        }
        terms.push(t);
    }
    let mut tail: f64 = terms.iter().rev().sum();
    for p in 0..MAX_ORDER {
        let tp = CRAMER_K * tail;
        let bound = dim as f64 * tp * (1.0 + tp).powi(dim as i32 - 1);
        if p >= 1 && bound <= tol {
            return p;
        }
        tail -= terms[p];
        if tail < 0.0 {
            tail = 0.0;
        }
    }
    MAX_ORDER
}

pub fn fgt_sum(req: &KernelSumRequest<'_>, params: &FgtParams) -> Result<Vec<f64>> {
    fgt_sum_with_stats(req, params).map(|(q, _)| q)
}

pub fn fgt_sum_with_stats(req: &KernelSumRequest<'_>, params: &FgtParams) -> Result<(Vec<f64>, SumStats)> {
    req.validate()?;
    if !matches!(req.kernel.family, KernelFamily::Gaussian) {
        return Err(Error::NonGaussianKernel);
    }
    let d = req.dim;
    if d > FGT_MAX_DIM {
        return Err(Error::DimensionTooLarge { dim: d, max: FGT_MAX_DIM });
    }
    if !(params.box_side > 0.0 && params.box_side < 2.0) {
        return Err(Error::param("box_side", "must lie in (0, 2) bandwidths"));
    }

    let half_tol = 0.5 * BUDGET_FRACTION * req.epsilon;
    let order = fgt_order_for(half_tol, params.box_side, d).max(params.min_order);
    // e^{-R²} ≤ half_tol
    let cutoff2 = (1.0 / half_tol).ln().max(0.0);
    let cutoff = cutoff2.sqrt();

    let inv: Vec<f64> = req.kernel.bandwidth.iter().map(|h| 1.0 / (std::f64::consts::SQRT_2 * h)).collect();
    let side = params.box_side / std::f64::consts::SQRT_2;
    let half = 0.5 * side;
    let scaled = |p: &[f64]| -> [f64; FGT_MAX_DIM] {
        let mut u = [0.0; FGT_MAX_DIM];
        for k in 0..d {
            u[k] = p[k] * inv[k];
        }
        u
    };
    let cell = |u: &[f64; FGT_MAX_DIM]| -> [i64; FGT_MAX_DIM] {
        let mut c = [0i64; FGT_MAX_DIM];
        for k in 0..d {
            c[k] = (u[k] / side).floor() as i64;
        }
        c
    };

    // Bin sources.
    let mut lookup: HashMap<[i64; FGT_MAX_DIM], usize> = HashMap::new();
    let mut boxes: Vec<SourceBox> = Vec::new();
    for (x, &w) in req.sources.chunks_exact(d).zip(req.source_weights) {
        if w == 0.0 {
            continue;
        }
        let u = scaled(x);
        let key = cell(&u);
        let b = *lookup.entry(key).or_insert_with(|| {
            let mut center = [0.0; FGT_MAX_DIM];
            for k in 0..d {
                center[k] = (key[k] as f64 + 0.5) * side;
            }
            boxes.push(SourceBox { center, points: Vec::new(), weights: Vec::new(), coeffs: None });
            boxes.len() - 1
        });
        boxes[b].points.push(u);
        boxes[b].weights.push(w);
    }

    let n_terms = order.pow(d as u32);
    let inv_fact: Vec<f64> = {
        let mut v = vec![1.0; order];
        for n in 1..order {
            v[n] = v[n - 1] / n as f64;
        }
        v
    };
    for b in &mut boxes {
        if b.points.len() > n_terms {
            b.coeffs = Some(hermite_coefficients(b, d, order, &inv_fact));
        }
    }

    let mut stats = SumStats { order, ..Default::default() };
    let cells_per_dim = (2.0 * cutoff / side).ceil() as usize + 2;
    let scan_all = cells_per_dim.saturating_pow(d as u32) > boxes.len();

    let mut herm = vec![[0.0; FGT_MAX_DIM]; order];
    let mut q = Vec::with_capacity(req.n_targets());
    let mut near: Vec<usize> = Vec::new();
    for y in req.targets.chunks_exact(d) {
        let v = scaled(y);
        near.clear();
        if scan_all {
            near.extend(0..boxes.len());
        } else {
            let mut lo = [0i64; FGT_MAX_DIM];
            let mut hi = [0i64; FGT_MAX_DIM];
            for k in 0..d {
                lo[k] = ((v[k] - cutoff) / side).floor() as i64;
                hi[k] = ((v[k] + cutoff) / side).floor() as i64;
            }
            let mut key = lo;
            'cells: loop {
                if let Some(&b) = lookup.get(&key) {
                    near.push(b);
                }
                for k in 0..d {
                    if key[k] < hi[k] {
                        key[k] += 1;
                        continue 'cells;
                    }
                    key[k] = lo[k];
                }
                break;
            }
        }

        let mut acc = CompensatedSum::default();
        for &bi in &near {
            let b = &boxes[bi];
            let mut gap2 = 0.0;
            for k in 0..d {
                let g = (v[k] - b.center[k]).abs() - half;
                if g > 0.0 {
                    gap2 += g * g;
                }
            }
            if gap2 >= cutoff2 {
                continue;
            }
            match &b.coeffs {
                Some(coeffs) => {
                    for k in 0..d {
                        let t = v[k] - b.center[k];
                        let e = (-t * t).exp();
                        herm[0][k] = e;
                        if order > 1 {
                            herm[1][k] = 2.0 * t * e;
                        }
                        for n in 1..order.saturating_sub(1) {
                            herm[n + 1][k] = 2.0 * t * herm[n][k] - 2.0 * n as f64 * herm[n - 1][k];
                        }
                    }
                    acc.add(contract(coeffs, &herm, d, order));
                    stats.expansion_terms += n_terms as u64;
                }
                None => {
                    for (u, &w) in b.points.iter().zip(&b.weights) {
                        let mut d2 = 0.0;
                        for k in 0..d {
                            let z = u[k] - v[k];
                            d2 += z * z;
                        }
                        acc.add(w * (-d2).exp());
                    }
                    stats.kernel_evals += b.points.len() as u64;
                }
            }
        }
        q.push(acc.value());
    }
    Ok((q, stats))
}

struct SourceBox {
    center: [f64; FGT_MAX_DIM],
    points: Vec<[f64; FGT_MAX_DIM]>,
    weights: Vec<f64>,
    coeffs: Option<Vec<f64>>,
}

/// `A_α = Σ_j ω_j Π_k s_jk^{α_k} / α_k!` laid out with dimension 0 fastest.
fn hermite_coefficients(b: &SourceBox, d: usize, order: usize, inv_fact: &[f64]) -> Vec<f64> {
    let n_terms = order.pow(d as u32);
    let mut coeffs = vec![0.0; n_terms];
    let mut pw = vec![[0.0; FGT_MAX_DIM]; order];
    for (u, &w) in b.points.iter().zip(&b.weights) {
        for k in 0..d {
            let s = u[k] - b.center[k];
            pw[0][k] = 1.0;
            for n in 1..order {
                pw[n][k] = pw[n - 1][k] * s;
            }
        }
        for (idx, c) in coeffs.iter_mut().enumerate() {
            let mut prod = w;
            let mut rest = idx;
            for k in 0..d {
                let a = rest % order;
                rest /= order;
                prod *= pw[a][k] * inv_fact[a];
            }
            *c += prod;
        }
    }
    coeffs
}

fn contract(coeffs: &[f64], herm: &[[f64; FGT_MAX_DIM]], d: usize, order: usize) -> f64 {
    match d {
        1 => coeffs.iter().zip(herm).map(|(c, h)| c * h[0]).sum(),
        _ => coeffs
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let mut prod = *c;
                let mut rest = idx;
                for k in 0..d {
                    prod *= herm[rest % order][k];
                    rest /= order;
                }
                prod
            })
            .sum(),
    }
}
