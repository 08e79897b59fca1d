//! Beamforming kernels operating on one pixel's delay-aligned samples.
//!
//! Every kernel is a pure function of its inputs. The image loop in
//! [`crate::imaging`] gathers the aligned samples (and, for the adaptive
//! kernels, the temporal context) and calls one of these per pixel.

mod mv;

pub use mv::{covariance, effective_weights, mv, mv_weights, MvWeights, CONSTRAINT_TOLERANCE};

use crate::delay::Snapshots;
use crate::error::Result;
use crate::model::MvConfig;

/// Delay-and-sum: the plain sum of aligned samples.
pub fn das(aligned: &[f64]) -> f64 {
    aligned.iter().sum()
}

/// `sign(x) * sqrt(|x|)`.
#[inline]
pub fn signed_sqrt(x: f64) -> f64 {
    if x < 0.0 {
        -(-x).sqrt()
    } else {
        x.sqrt()
    }
}

/// Signed square root of every sample. Applying it per channel before the
/// pairwise products keeps the DMAS output in amplitude units with only M
/// square roots per pixel.
pub fn sign_root_transform(aligned: &[f64]) -> Vec<f64> {
    aligned.iter().map(|&x| signed_sqrt(x)).collect()
}

/// Sum of all pairwise products `Σ_{i<j} x_i x_j`, via `((Σx)² − Σx²) / 2`.
pub fn pairwise_product_sum(x: &[f64]) -> f64 {
    let (sum, sum_sq) = x
        .iter()
        .fold((0.0, 0.0), |(s, q), &v| (s + v, q + v * v));
    0.5 * (sum * sum - sum_sq)
}

/// Delay-multiply-and-sum on raw aligned samples, with the signed
/// square-root correction applied first.
pub fn dmas(aligned: &[f64]) -> f64 {
    let (sum, sum_sq) = aligned.iter().fold((0.0, 0.0), |(s, q), &v| {
        let t = signed_sqrt(v);
        (s + t, q + t * t)
    });
    0.5 * (sum * sum - sum_sq)
}

/// MVB-DMAS closed form on already-transformed samples `x̄` and a
/// full-aperture weight vector:
/// `Σ_i x̄_i (wᵀx̄ − w_i x̄_i) = (Σ_i x̄_i)(wᵀx̄) − Σ_i w_i x̄_i²`.
///
/// Weights are taken as given, so arbitrary vectors (including all ones)
/// can be checked against the per-term expansion.
pub fn mvb_dmas_closed_form(transformed: &[f64], weights: &[f64]) -> f64 {
    assert_eq!(transformed.len(), weights.len(), "weight length mismatch");
    let mut sum = 0.0;
    let mut weighted = 0.0;
    let mut weighted_sq = 0.0;
    for (&x, &w) in transformed.iter().zip(weights) {
        sum += x;
        weighted += w * x;
        weighted_sq += w * x * x;
    }
    sum * weighted - weighted_sq
}

/// Minimum-variance-based DMAS for one pixel.
///
/// `aligned` is the pixel's own snapshot and `context` its temporal context
/// (which contains `aligned` as one of its rows). With `sign_root` set, both
/// are passed through [`sign_root_transform`] before the MV weights are
/// estimated and the expansion is evaluated; otherwise raw samples are used.
pub fn mvb_dmas(aligned: &[f64], context: &Snapshots, cfg: &MvConfig, sign_root: bool) -> Result<f64> {
    let (x, weights) = if sign_root {
        let mut ctx = context.clone();
        ctx.map_in_place(signed_sqrt);
        (sign_root_transform(aligned), mv_weights(&ctx, cfg)?)
    } else {
        (aligned.to_vec(), mv_weights(context, cfg)?)
    };
    let full = effective_weights(&weights, aligned.len());
    Ok(mvb_dmas_closed_form(&x, &full))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairwise_loop(x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..x.len() {
            for j in (i + 1)..x.len() {
                acc += x[i] * x[j];
            }
        }
        acc
    }

    #[test]
    fn das_examples() {
        assert_eq!(das(&vec![1.0; 128]), 128.0);
        assert_eq!(das(&[1.0, -1.0, 2.0]), 2.0);
    }

    #[test]
    fn sign_root_examples() {
        assert_eq!(sign_root_transform(&[4.0, -9.0, 0.0]), vec![2.0, -3.0, 0.0]);
        assert_eq!(signed_sqrt(-0.0), 0.0);
    }

    #[test]
    fn dmas_examples() {
        // Frozen from the pairwise loop: transformed [1, 2, 3] gives 2 + 3 + 6.
        assert_eq!(pairwise_loop(&[1.0, 2.0, 3.0]), 11.0);
        assert!((dmas(&[1.0, 4.0, 9.0]) - 11.0).abs() < 1e-12);
        let oracle = pairwise_loop(&sign_root_transform(&[1.0, 2.0, 3.0]));
        assert!((oracle - 5.595_754_112_725).abs() < 1e-9);
        assert!((dmas(&[1.0, 2.0, 3.0]) - oracle).abs() < 1e-12);
        assert_eq!(dmas(&[0.0; 16]), 0.0);
    }

    #[test]
    fn mvb_closed_form_with_unit_weights_is_twice_dmas() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(mvb_dmas_closed_form(&x, &[1.0; 3]), 22.0);
        assert_eq!(2.0 * pairwise_loop(&x), 22.0);
    }

    #[test]
    fn mvb_closed_form_uniform_weights() {
        let m = 3;
        let w = vec![1.0 / m as f64; m];
        let got = mvb_dmas_closed_form(&[1.0; 3], &w);
        // Direct loop: Σ_i x_i Σ_{j≠i} w_j x_j with x = 1, w = 1/3.
        let direct: f64 = (0..m)
            .map(|i| (0..m).filter(|&j| j != i).map(|j| w[j]).sum::<f64>())
            .sum();
        assert!((direct - 2.0).abs() < 1e-15);
        assert!((got - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mvb_dmas_zero_input() {
        let cfg = MvConfig::new(2, 1, 0.01).unwrap();
        let ctx = Snapshots::from_rows(&[vec![0.0; 6], vec![0.0; 6], vec![0.0; 6]]);
        assert_eq!(mvb_dmas(&[0.0; 6], &ctx, &cfg, true).unwrap(), 0.0);
        assert_eq!(mvb_dmas(&[0.0; 6], &ctx, &cfg, false).unwrap(), 0.0);
    }
}
