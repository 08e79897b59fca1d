//! Image assembly and display chain: per-pixel beamforming, axial envelope
//! detection, log compression and lateral profiles.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::beamformers::{das, dmas, mv, mv_weights, mvb_dmas};
use crate::delay::{align_into, pixel_delays, temporal_context_into, Interpolation, Snapshots};
use crate::error::{Error, Result};
use crate::model::{ArrayGeometry, BeamformedImage, ImagingGrid, MvConfig, RfFrame, Stage};

/// Floor applied to normalized amplitudes before taking logarithms, so
/// zero pixels map to a finite level.
const MIN_RATIO: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Das,
    Dmas,
    Mv,
    MvbDmas,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Das, Method::Dmas, Method::Mv, Method::MvbDmas];

    pub fn name(self) -> &'static str {
        match self {
            Method::Das => "das",
            Method::Dmas => "dmas",
            Method::Mv => "mv",
            Method::MvbDmas => "mvb-dmas",
        }
    }

    fn is_adaptive(self) -> bool {
        matches!(self, Method::Mv | Method::MvbDmas)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "das" => Ok(Method::Das),
            "dmas" => Ok(Method::Dmas),
            "mv" => Ok(Method::Mv),
            "mvb-dmas" | "mvbdmas" => Ok(Method::MvbDmas),
            other => Err(Error::config("method", format!("unknown method '{other}'"))),
        }
    }
}

/// Switches that change how pixels are formed without changing the method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReconstructOptions {
    pub interpolation: Interpolation,
    /// Apply the signed square root inside MVB-DMAS.
    pub mvb_sign_root: bool,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            interpolation: Interpolation::Linear,
            mvb_sign_root: true,
        }
    }
}

/// Per-worker buffers for one pixel.
struct PixelScratch {
    delays: Vec<f64>,
    aligned: Vec<f64>,
    row: Vec<f64>,
    context: Snapshots,
}

impl PixelScratch {
    fn new(m: usize) -> Self {
        Self {
            delays: vec![0.0; m],
            aligned: vec![0.0; m],
            row: vec![0.0; m],
            context: Snapshots::new(m),
        }
    }
}

struct PixelKernel<'a> {
    frame: &'a RfFrame,
    geometry: &'a ArrayGeometry,
    method: Method,
    cfg: &'a MvConfig,
    opts: ReconstructOptions,
}

impl PixelKernel<'_> {
    fn evaluate(&self, x: f64, z: f64, s: &mut PixelScratch) -> Result<f64> {
        pixel_delays(self.geometry, x, z, &mut s.delays);
        align_into(self.frame, &s.delays, 0.0, self.opts.interpolation, &mut s.aligned);
        if self.method.is_adaptive() {
            temporal_context_into(
                self.frame,
                &s.delays,
                self.cfg.temporal_half_window(),
                self.opts.interpolation,
                &mut s.row,
                &mut s.context,
            );
        }
        Ok(match self.method {
            Method::Das => das(&s.aligned),
            Method::Dmas => dmas(&s.aligned),
            Method::Mv => {
                let w = mv_weights(&s.context, self.cfg)?;
                mv(&s.aligned, &w, self.cfg)
            }
            Method::MvbDmas => mvb_dmas(&s.aligned, &s.context, self.cfg, self.opts.mvb_sign_root)?,
        })
    }
}

/// Beamforms every pixel of `grid` with `method`.
///
/// Rows are processed in parallel; each pixel depends only on the frame and
/// its own position, so the result does not depend on scheduling.
pub fn reconstruct(
    frame: &RfFrame,
    geometry: &ArrayGeometry,
    grid: &ImagingGrid,
    method: Method,
    cfg: &MvConfig,
) -> Result<BeamformedImage> {
    reconstruct_with(frame, geometry, grid, method, cfg, ReconstructOptions::default())
}

pub fn reconstruct_with(
    frame: &RfFrame,
    geometry: &ArrayGeometry,
    grid: &ImagingGrid,
    method: Method,
    cfg: &MvConfig,
    opts: ReconstructOptions,
) -> Result<BeamformedImage> {
    frame.check_matches(geometry)?;
    if method.is_adaptive() {
        cfg.check_for(geometry.num_elements())?;
    }
    let kernel = PixelKernel { frame, geometry, method, cfg, opts };
    let nx = grid.nx();
    let mut pixels = vec![0.0; grid.len()];
    pixels
        .par_chunks_mut(nx)
        .enumerate()
        .try_for_each(|(iz, row)| {
            let mut scratch = PixelScratch::new(geometry.num_elements());
            let z = grid.z(iz);
            for (ix, out) in row.iter_mut().enumerate() {
                *out = kernel
                    .evaluate(grid.x(ix), z, &mut scratch)
                    .map_err(|e| Error::AtPixel { ix, iz, source: Box::new(e) })?;
            }
            Ok::<(), Error>(())
        })?;
    BeamformedImage::new(pixels, *grid, Stage::Raw, None)
}

/// Magnitude of the analytic signal of `column`, computed with an FFT
/// Hilbert transformer (positive frequencies doubled, negative ones zeroed).
pub fn analytic_envelope(column: &[f64], planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = column.len();
    if n == 0 {
        return Vec::new();
    }
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = column.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut buf);
    let half = n / 2;
    for (k, v) in buf.iter_mut().enumerate() {
        let gain = if k == 0 || (n.is_multiple_of(2) && k == half) {
            1.0
        } else if k <= (n - 1) / 2 {
            2.0
        } else {
            0.0
        };
        *v *= gain;
    }
    ifft.process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|v| v.norm() * scale).collect()
}

/// Axial envelope of a raw image, column by column.
pub fn envelope(image: &BeamformedImage) -> Result<BeamformedImage> {
    image.expect_stage(Stage::Raw)?;
    let grid = *image.grid();
    let columns: Vec<Vec<f64>> = (0..grid.nx())
        .into_par_iter()
        .map_init(FftPlanner::new, |planner, ix| analytic_envelope(&image.column(ix), planner))
        .collect();
    let mut pixels = vec![0.0; grid.len()];
    for (ix, col) in columns.iter().enumerate() {
        for (iz, &v) in col.iter().enumerate() {
            pixels[iz * grid.nx() + ix] = v;
        }
    }
    BeamformedImage::new(pixels, grid, Stage::Envelope, None)
}

/// Optional axial band-pass of a raw image: a Gaussian frequency window
/// centered on `center_frequency` with −6 dB full width `bandwidth` (both
/// in Hz of the received signal). Depth maps to time through the one-way
/// travel time `z / c`. Removes the baseband term of DMAS-type outputs
/// when centered at twice the transmit frequency.
pub fn bandpass(image: &BeamformedImage, center_frequency: f64, bandwidth: f64, sound_speed: f64) -> Result<BeamformedImage> {
    image.expect_stage(Stage::Raw)?;
    if !(center_frequency >= 0.0 && bandwidth > 0.0 && sound_speed > 0.0) {
        return Err(Error::config("bandpass", "frequencies and sound speed must be positive"));
    }
    let grid = *image.grid();
    let n = grid.nz();
    let sample_rate = sound_speed / grid.dz();
    let sigma_f = bandwidth / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut pixels = vec![0.0; grid.len()];
    for ix in 0..grid.nx() {
        let mut buf: Vec<Complex64> = image.column(ix).iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.process(&mut buf);
        for (k, v) in buf.iter_mut().enumerate() {
            let f = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 } * sample_rate / n as f64;
            let u = (f.abs() - center_frequency) / sigma_f;
            *v *= (-0.5 * u * u).exp();
        }
        ifft.process(&mut buf);
        for (iz, v) in buf.iter().enumerate() {
            pixels[iz * grid.nx() + ix] = v.re / n as f64;
        }
    }
    BeamformedImage::new(pixels, grid, Stage::Raw, None)
}

/// `20 log10(p / max p)`, clamped to `[-dynamic_range_db, 0]`.
pub fn log_compress(image: &BeamformedImage, dynamic_range_db: f64) -> Result<BeamformedImage> {
    image.expect_stage(Stage::Envelope)?;
    if !(dynamic_range_db.is_finite() && dynamic_range_db > 0.0) {
        return Err(Error::config("dynamic_range_db", format!("must be positive, got {dynamic_range_db}")));
    }
    let max = image.pixels().iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::ZeroImage);
    }
    let pixels = image
        .pixels()
        .iter()
        .map(|&p| {
            if p == max {
                0.0
            } else {
                (20.0 * (p / max).max(MIN_RATIO).log10()).clamp(-dynamic_range_db, 0.0)
            }
        })
        .collect();
    BeamformedImage::new(pixels, *image.grid(), Stage::LogCompressed, Some(dynamic_range_db))
}

/// Lateral cut through an image, in dB relative to its own maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct LateralProfile {
    /// Lateral positions in meters, increasing.
    pub x: Vec<f64>,
    pub db: Vec<f64>,
    /// Depth of the extracted row.
    pub depth: f64,
}

impl LateralProfile {
    /// Builds a profile from linear amplitudes, normalizing to their maximum.
    pub fn from_amplitudes(x: Vec<f64>, amplitudes: &[f64], depth: f64) -> Result<Self> {
        if x.len() != amplitudes.len() || x.is_empty() {
            return Err(Error::Metric("profile positions and values differ in length".into()));
        }
        let max = amplitudes.iter().copied().fold(0.0, f64::max);
        if max <= 0.0 {
            return Err(Error::ZeroImage);
        }
        let db = amplitudes
            .iter()
            .map(|&p| 20.0 * (p / max).max(MIN_RATIO).log10())
            .collect();
        Ok(Self { x, db, depth })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Sub-profile with `x_lo <= x <= x_hi`, renormalized to its own peak.
    pub fn window(&self, x_lo: f64, x_hi: f64) -> Result<Self> {
        let (x, db): (Vec<f64>, Vec<f64>) = self
            .x
            .iter()
            .zip(&self.db)
            .filter(|(x, _)| **x >= x_lo && **x <= x_hi)
            .map(|(x, d)| (*x, *d))
            .unzip();
        if x.is_empty() {
            return Err(Error::Metric(format!("no profile samples in [{x_lo}, {x_hi}] m")));
        }
        let top = db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let db = db.into_iter().map(|d| d - top).collect();
        Ok(Self { x, db, depth: self.depth })
    }
}

/// Row of an envelope image nearest `depth`, normalized to its own maximum.
pub fn lateral_profile(image: &BeamformedImage, depth: f64) -> Result<LateralProfile> {
    image.expect_stage(Stage::Envelope)?;
    let grid = image.grid();
    let iz = grid.nearest_row(depth).ok_or(Error::DepthOutsideGrid {
        depth_m: depth,
        z_min: grid.z_min(),
        z_max: grid.z_max(),
    })?;
    let x = (0..grid.nx()).map(|ix| grid.x(ix)).collect();
    LateralProfile::from_amplitudes(x, image.row(iz), grid.z(iz))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column_image(values: &[f64]) -> BeamformedImage {
        let grid = ImagingGrid::new(0.0, 1e-3, 1e-3, 1e-3 + 1e-4 * values.len() as f64, 1, values.len()).unwrap();
        BeamformedImage::new(values.to_vec(), grid, Stage::Raw, None).unwrap()
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("capon".parse::<Method>().is_err());
        assert_eq!("MVB_DMAS".parse::<Method>().unwrap(), Method::MvbDmas);
    }

    #[test]
    fn cosine_envelope_is_flat() {
        let n = 1000;
        let a = 2.5;
        // Whole number of cycles: exact up to rounding everywhere.
        let periodic: Vec<f64> = (0..n)
            .map(|k| a * (2.0 * std::f64::consts::PI * 50.0 * k as f64 / n as f64 + 0.4).cos())
            .collect();
        let env = envelope(&column_image(&periodic)).unwrap();
        assert!(env.pixels().iter().all(|e| (e - a).abs() < 1e-9));
        // Arbitrary frequency: edge leakage, flat in the interior.
        let values: Vec<f64> = (0..n).map(|k| a * (0.3 * k as f64 + 0.4).cos()).collect();
        let env = envelope(&column_image(&values)).unwrap();
        for &e in &env.pixels()[n / 5..4 * n / 5] {
            assert!((e - a).abs() < 0.01 * a, "{e}");
        }
    }

    #[test]
    fn zero_column_and_sign_symmetry() {
        let env = envelope(&column_image(&[0.0; 64])).unwrap();
        assert!(env.pixels().iter().all(|&v| v == 0.0));
        let values: Vec<f64> = (0..97).map(|k| ((k as f64) * 0.21).sin() * (-(k as f64 - 48.0).powi(2) / 200.0).exp()).collect();
        let neg: Vec<f64> = values.iter().map(|v| -v).collect();
        let a = envelope(&column_image(&values)).unwrap();
        let b = envelope(&column_image(&neg)).unwrap();
        for (u, v) in a.pixels().iter().zip(b.pixels()) {
            assert!((u - v).abs() < 1e-12);
        }
        for (e, x) in a.pixels().iter().zip(&values) {
            assert!(*e >= x.abs() * (1.0 - 1e-6) - 1e-12);
        }
    }

    #[test]
    fn envelope_requires_raw_stage() {
        let env = envelope(&column_image(&[1.0, 2.0])).unwrap();
        assert!(matches!(envelope(&env), Err(Error::StageMismatch { .. })));
    }

    #[test]
    fn log_compression_anchors() {
        let grid = ImagingGrid::new(0.0, 1e-3, 1e-3, 2e-3, 4, 1).unwrap();
        let img = BeamformedImage::new(vec![5.0, 0.5, 0.005, 0.0], grid, Stage::Envelope, None).unwrap();
        let lc = log_compress(&img, 60.0).unwrap();
        assert_eq!(lc.pixels()[0], 0.0);
        assert!((lc.pixels()[1] + 20.0).abs() < 1e-12);
        assert!((lc.pixels()[2] + 60.0).abs() < 1e-9);
        assert_eq!(lc.pixels()[3], -60.0);
        assert_eq!(lc.dynamic_range_db(), Some(60.0));
        let zero = BeamformedImage::new(vec![0.0; 4], grid, Stage::Envelope, None).unwrap();
        assert!(matches!(log_compress(&zero, 60.0), Err(Error::ZeroImage)));
    }

    #[test]
    fn profile_row_selection() {
        let grid = ImagingGrid::new(-1e-3, 1e-3, 0.025, 0.035, 3, 11).unwrap();
        let pixels: Vec<f64> = (0..33).map(|i| 1.0 + (i / 3) as f64 + [0.0, 1.0, 0.0][i % 3]).collect();
        let img = BeamformedImage::new(pixels, grid, Stage::Envelope, None).unwrap();
        let p = lateral_profile(&img, 0.030).unwrap();
        assert!((p.depth - 0.030).abs() < 1e-12);
        assert_eq!(p.db[1], 0.0);
        assert!((p.db[0] - p.db[2]).abs() < 1e-12);
        assert!(matches!(lateral_profile(&img, 0.04), Err(Error::DepthOutsideGrid { .. })));
    }

    #[test]
    fn bandpass_keeps_in_band_tone() {
        // 10 MHz tone along depth at dz = c / (8 * 10 MHz).
        let c = 1540.0;
        let n = 512;
        let dz = c / 80e6;
        let grid = ImagingGrid::new(0.0, 1e-3, 0.01, 0.01 + dz * (n - 1) as f64, 1, n).unwrap();
        let tone: Vec<f64> = (0..n).map(|k| 3.0 + (2.0 * std::f64::consts::PI * k as f64 / 8.0).cos()).collect();
        let img = BeamformedImage::new(tone, grid, Stage::Raw, None).unwrap();
        let out = bandpass(&img, 10e6, 2e6, c).unwrap();
        let mean = out.pixels().iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-9);
        let peak = out.pixels().iter().copied().fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-6);
    }
}
