//! Minimum-variance (Capon) weights with spatial smoothing, temporal
//! averaging and diagonal loading.
//!
//! After delay alignment the steering vector is all ones, so the
//! distortionless weights are `w = R⁻¹1 / (1ᵀR⁻¹1)`. Everything is real
//! valued: beamforming runs on RF samples and detection happens afterwards.

use crate::delay::Snapshots;
use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;
use crate::model::MvConfig;

/// Tolerance on the distortionless constraint `Σ w = 1`.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-9;

/// Subarray weights satisfying `Σ w = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MvWeights {
    w: Vec<f64>,
}

impl MvWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularCovariance);
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > CONSTRAINT_TOLERANCE {
            return Err(Error::config(
                "weights",
                format!("weights sum to {sum}, not 1"),
            ));
        }
        Ok(Self { w })
    }

    /// `1/L` in every position.
    pub fn uniform(len: usize) -> Self {
        Self {
            w: vec![1.0 / len as f64; len],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.w.iter().sum()
    }
}

/// Spatially smoothed, temporally averaged sample covariance of length-L
/// subarrays, row-major `L x L`.
///
/// Entry `(a, b)` is the mean over snapshots and subarray offsets `l` of
/// `x[l + a] * x[l + b]`. Each diagonal band is a running sum along the
/// band, so one snapshot costs `O(L (M - L) + L²)` rather than
/// `O(L² (M - L))`.
pub fn covariance(context: &Snapshots, subarray_length: usize) -> Vec<f64> {
    let l = subarray_length;
    let m = context.width();
    assert!(l >= 1 && l <= m, "subarray length {l} for aperture {m}");
    let subarrays = m + 1 - l;
    let mut r = vec![0.0; l * l];
    for x in context.rows() {
        for d in 0..l {
            let mut acc: f64 = (0..subarrays).map(|k| x[k] * x[k + d]).sum();
            r[d] += acc;
            for a in 1..(l - d) {
                acc += x[a - 1 + subarrays] * x[a - 1 + subarrays + d] - x[a - 1] * x[a - 1 + d];
                r[a * l + a + d] += acc;
            }
        }
    }
    let norm = 1.0 / (subarrays * context.len().max(1)) as f64;
    for a in 0..l {
        for b in a..l {
            let v = r[a * l + b] * norm;
            r[a * l + b] = v;
            r[b * l + a] = v;
        }
    }
    r
}

/// Solves for the distortionless minimum-variance weights of one pixel.
///
/// The loading added to the diagonal is `loading_factor * trace(R)`. The
/// covariance is scaled by its trace before the solve, which leaves the
/// normalized weights unchanged. A context with zero energy has no
/// preferred direction and yields uniform weights.
pub fn mv_weights(context: &Snapshots, cfg: &MvConfig) -> Result<MvWeights> {
    let m = context.width();
    cfg.check_for(m)?;
    let l = cfg.subarray_length();
    let mut r = covariance(context, l);
    let trace: f64 = (0..l).map(|i| r[i * l + i]).sum();
    if !trace.is_finite() {
        return Err(Error::SingularCovariance);
    }
    if trace < f64::MIN_POSITIVE {
        return Ok(MvWeights::uniform(l));
    }
    let scale = 1.0 / trace;
    for v in &mut r {
        *v *= scale;
    }
    for i in 0..l {
        r[i * l + i] += cfg.loading_factor();
    }
    let mut w = vec![1.0; l];
    cholesky_solve(&mut r, l, &mut w)?;
    let sum: f64 = w.iter().sum();
    if !(sum.is_finite() && sum.abs() > f64::MIN_POSITIVE) {
        return Err(Error::SingularCovariance);
    }
    for v in &mut w {
        *v /= sum;
    }
    MvWeights::new(w)
}

/// Subaperture-averaged Capon output: the mean over all subarrays of
/// `wᵀ x_sub`.
pub fn mv(aligned: &[f64], weights: &MvWeights, cfg: &MvConfig) -> f64 {
    let l = weights.len();
    debug_assert_eq!(l, cfg.subarray_length());
    let subarrays = aligned.len() + 1 - l;
    let w = weights.as_slice();
    let total: f64 = (0..subarrays)
        .map(|k| {
            aligned[k..k + l]
                .iter()
                .zip(w)
                .map(|(x, w)| x * w)
                .sum::<f64>()
        })
        .sum();
    total / subarrays as f64
}

/// Maps subarray weights onto the full aperture.
///
/// Every subarray carries the same weights at its own offset; element `i`
/// receives the mean of the weights of the subarrays covering it, and the
/// result is rescaled to sum to one.
pub fn effective_weights(weights: &MvWeights, num_elements: usize) -> Vec<f64> {
    let w = weights.as_slice();
    let l = w.len();
    assert!(l <= num_elements, "subarray longer than aperture");
    let last_offset = num_elements - l;
    let mut prefix = Vec::with_capacity(l + 1);
    prefix.push(0.0);
    for &v in w {
        prefix.push(prefix.last().unwrap() + v);
    }
    let mut full: Vec<f64> = (0..num_elements)
        .map(|i| {
            // Offsets k with k <= i <= k + l - 1, clipped to [0, last_offset];
            // element i then uses weight index j = i - k.
            let k_lo = i.saturating_sub(l - 1);
            let k_hi = i.min(last_offset);
            let (j_lo, j_hi) = (i - k_hi, i - k_lo);
            (prefix[j_hi + 1] - prefix[j_lo]) / (j_hi - j_lo + 1) as f64
        })
        .collect();
    let sum: f64 = full.iter().sum();
    if sum.is_finite() && sum != 0.0 {
        for v in &mut full {
            *v /= sum;
        }
    }
    full
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_context(rng: &mut ChaCha8Rng, rows: usize, m: usize) -> Snapshots {
        let rows: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..m).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        Snapshots::from_rows(&rows)
    }

    /// Direct triple loop over snapshots, subarrays and entries.
    fn covariance_oracle(ctx: &Snapshots, l: usize) -> Vec<f64> {
        let m = ctx.width();
        let s = m + 1 - l;
        let mut r = vec![0.0; l * l];
        for x in ctx.rows() {
            for k in 0..s {
                for a in 0..l {
                    for b in 0..l {
                        r[a * l + b] += x[k + a] * x[k + b];
                    }
                }
            }
        }
        r.iter().map(|v| v / (s * ctx.len()) as f64).collect()
    }

    #[test]
    fn sliding_covariance_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(m, l, rows) in &[(2, 1, 1), (8, 4, 3), (17, 5, 11), (128, 64, 11)] {
            let ctx = random_context(&mut rng, rows, m);
            let fast = covariance(&ctx, l);
            let slow = covariance_oracle(&ctx, l);
            for (f, s) in fast.iter().zip(&slow) {
                assert!((f - s).abs() < 1e-10 * (1.0 + s.abs()), "m={m} l={l}: {f} vs {s}");
            }
        }
    }

    #[test]
    fn heavy_loading_on_white_noise_is_nearly_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = MvConfig::new(64, 5, 1e3).unwrap();
        let ctx = random_context(&mut rng, 11, 128);
        let w = mv_weights(&ctx, &cfg).unwrap();
        let dev = w
            .as_slice()
            .iter()
            .map(|v| (v - 1.0 / 64.0).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-3, "max deviation {dev}");
        assert!((w.sum() - 1.0).abs() < CONSTRAINT_TOLERANCE);
    }

    #[test]
    fn identity_covariance_gives_uniform_weights() {
        // Basis-vector snapshots e_0..e_{m-1}: every diagonal entry is equal
        // and every off-diagonal entry is zero.
        let l = 4;
        let m = 2 * l;
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let ctx = Snapshots::from_rows(&rows);
        let r = covariance(&ctx, l);
        for a in 0..l {
            for b in 0..l {
                if a != b {
                    assert_eq!(r[a * l + b], 0.0);
                } else {
                    assert!((r[a * l + b] - r[0]).abs() < 1e-15);
                }
            }
        }
        let cfg = MvConfig::new(l, 0, 1e-6).unwrap();
        let w = mv_weights(&ctx, &cfg).unwrap();
        for v in w.as_slice() {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_context_gives_uniform_weights() {
        let ctx = Snapshots::from_rows(&[vec![0.0; 8]]);
        let w = mv_weights(&ctx, &MvConfig::new(4, 0, 0.01).unwrap()).unwrap();
        assert_eq!(w, MvWeights::uniform(4));
    }

    #[test]
    fn weights_sum_to_one_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(m, l) in &[(2, 1), (8, 4), (32, 3), (128, 64)] {
            let cfg = MvConfig::new(l, 2, 1.0 / (100.0 * l as f64)).unwrap();
            for _ in 0..20 {
                let ctx = random_context(&mut rng, 5, m);
                let w = mv_weights(&ctx, &cfg).unwrap();
                assert!((w.sum() - 1.0).abs() < CONSTRAINT_TOLERANCE);
            }
        }
    }

    #[test]
    fn rejects_oversized_subarray() {
        let ctx = Snapshots::from_rows(&[vec![1.0; 8]]);
        assert!(mv_weights(&ctx, &MvConfig::new(5, 0, 0.01).unwrap()).is_err());
    }

    #[test]
    fn mv_output_examples() {
        let cfg = MvConfig::new(4, 0, 0.01).unwrap();
        assert!((mv(&[1.0; 10], &MvWeights::uniform(4), &cfg) - 1.0).abs() < 1e-15);

        let x = [0.3, -1.2, 2.0, 0.7, 0.1];
        let one = MvConfig::new(1, 0, 0.01).unwrap();
        let got = mv(&x, &MvWeights::new(vec![1.0]).unwrap(), &one);
        assert!((got - x.iter().sum::<f64>() / 5.0).abs() < 1e-15);
    }

    #[test]
    fn mv_uniform_weights_is_mean_of_subarray_das() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..16).map(|_| rng.sample(StandardNormal)).collect();
        let l = 6;
        let cfg = MvConfig::new(l, 0, 0.01).unwrap();
        let oracle: f64 = (0..=16 - l)
            .map(|k| x[k..k + l].iter().sum::<f64>() / l as f64)
            .sum::<f64>()
            / (16 - l + 1) as f64;
        assert!((mv(&x, &MvWeights::uniform(l), &cfg) - oracle).abs() < 1e-12);
    }

    #[test]
    fn effective_weights_by_direct_coverage() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let m = 9;
        let l = 4;
        let raw: Vec<f64> = (0..l).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let w = MvWeights::new(raw.iter().map(|v| v / total).collect()).unwrap();
        let full = effective_weights(&w, m);
        let mut expected = vec![0.0; m];
        for (i, e) in expected.iter_mut().enumerate() {
            let covering: Vec<f64> = (0..=m - l)
                .filter(|&k| k <= i && i < k + l)
                .map(|k| w.as_slice()[i - k])
                .collect();
            *e = covering.iter().sum::<f64>() / covering.len() as f64;
        }
        let s: f64 = expected.iter().sum();
        for (f, e) in full.iter().zip(&expected) {
            assert!((f - e / s).abs() < 1e-15);
        }
        assert!((full.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(effective_weights(&MvWeights::uniform(4), 8), vec![0.125; 8]);
    }
}
