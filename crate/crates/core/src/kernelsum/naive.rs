use super::{CompensatedSum, KernelFamily, KernelSumRequest};
use crate::Result;

/// Direct O(MN) summation. Exact up to floating-point rounding.
pub fn naive_sum(req: &KernelSumRequest<'_>) -> Result<Vec<f64>> {
    req.validate()?;
    let d = req.dim;
    let inv_h: Vec<f64> = req.kernel.bandwidth.iter().map(|h| 1.0 / h).collect();
    let gaussian = matches!(req.kernel.family, KernelFamily::Gaussian);

    let q = req
        .targets
        .chunks_exact(d)
        .map(|y| {
            let mut acc = CompensatedSum::default();
            for (x, &w) in req.sources.chunks_exact(d).zip(req.source_weights) {
                if w == 0.0 {
                    continue;
                }
                let d2 = scaled_sq_dist(x, y, &inv_h);
                let k = if gaussian { (-0.5 * d2).exp() } else { req.kernel.eval_sq(d2) };
                acc.add(w * k);
            }
            acc.value()
        })
        .collect();
    Ok(q)
}

#[inline]
pub(crate) fn scaled_sq_dist(x: &[f64], y: &[f64], inv_h: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(inv_h)
        .map(|((a, b), s)| {
            let z = (a - b) * s;
            z * z
        })
        .sum()
}
