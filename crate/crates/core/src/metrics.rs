//! Image quality metrics: peak-to-noise SNR, −6 dB mainlobe width and peak
//! sidelobe level.

use crate::error::{Error, Result};
use crate::imaging::LateralProfile;
use crate::model::{BeamformedImage, ImagingGrid, Stage};

/// Mainlobe width is measured at this level below the peak.
pub const MAINLOBE_LEVEL_DB: f64 = -6.0;

/// Axis-aligned rectangle in the imaging plane, given by its center and
/// half-widths (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x: f64,
    pub z: f64,
    pub half_x: f64,
    pub half_z: f64,
}

impl Region {
    pub fn new(x: f64, z: f64, half_x: f64, half_z: f64) -> Self {
        Self { x, z, half_x, half_z }
    }

    fn contains(&self, x: f64, z: f64) -> bool {
        (x - self.x).abs() <= self.half_x && (z - self.z).abs() <= self.half_z
    }

    fn inside(&self, grid: &ImagingGrid) -> bool {
        self.x - self.half_x >= grid.x_min()
            && self.x + self.half_x <= grid.x_max()
            && self.z - self.half_z >= grid.z_min()
            && self.z + self.half_z <= grid.z_max()
    }

    fn overlaps(&self, other: &Region) -> bool {
        (self.x - other.x).abs() <= self.half_x + other.half_x
            && (self.z - other.z).abs() <= self.half_z + other.half_z
    }

    fn values(&self, image: &BeamformedImage) -> Vec<f64> {
        let g = image.grid();
        let mut out = Vec::new();
        for iz in 0..g.nz() {
            let z = g.z(iz);
            if (z - self.z).abs() > self.half_z {
                continue;
            }
            for ix in 0..g.nx() {
                if self.contains(g.x(ix), z) {
                    out.push(image.get(ix, iz));
                }
            }
        }
        out
    }
}

/// Signal and noise regions for [`snr_db`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionSpec {
    signal: Region,
    noise: Region,
}

impl RegionSpec {
    pub fn new(signal: Region, noise: Region, grid: &ImagingGrid) -> Result<Self> {
        for (name, r) in [("signal_box", &signal), ("noise_box", &noise)] {
            if !(r.half_x >= 0.0 && r.half_z >= 0.0) {
                return Err(Error::config(name, "half-widths must be nonnegative"));
            }
            if !r.inside(grid) {
                return Err(Error::config(name, "region extends outside the imaging grid"));
            }
        }
        if signal.overlaps(&noise) {
            return Err(Error::config("noise_box", "overlaps the signal region"));
        }
        Ok(Self { signal, noise })
    }

    /// A ±1 mm box on the target and a 10 mm × 4 mm noise box at the same
    /// depth, centered at `noise_x`.
    pub fn around_target(x: f64, z: f64, noise_x: f64, grid: &ImagingGrid) -> Result<Self> {
        Self::new(
            Region::new(x, z, 1e-3, 1e-3),
            Region::new(noise_x, z, 5e-3, 2e-3),
            grid,
        )
    }

    pub fn signal(&self) -> &Region {
        &self.signal
    }

    pub fn noise(&self) -> &Region {
        &self.noise
    }
}

/// `20 log10(max envelope in signal box / std of envelope in noise box)`.
pub fn snr_db(image: &BeamformedImage, spec: &RegionSpec) -> Result<f64> {
    image.expect_stage(Stage::Envelope)?;
    let signal = spec.signal.values(image);
    let noise = spec.noise.values(image);
    if signal.is_empty() {
        return Err(Error::Metric("signal region contains no pixels".into()));
    }
    if noise.is_empty() {
        return Err(Error::Metric("noise region contains no pixels".into()));
    }
    let peak = signal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(20.0 * (peak / std_dev(&noise)).log10())
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn global_peak(profile: &LateralProfile) -> Result<usize> {
    if profile.is_empty() {
        return Err(Error::Metric("empty profile".into()));
    }
    Ok(profile
        .db
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0)
}

/// Position where the profile crosses `level` between samples `i` and `j`.
fn crossing(profile: &LateralProfile, i: usize, j: usize, level: f64) -> f64 {
    let (x0, x1) = (profile.x[i], profile.x[j]);
    let (y0, y1) = (profile.db[i], profile.db[j]);
    x0 + (level - y0) / (y1 - y0) * (x1 - x0)
}

/// Width of the −6 dB mainlobe around the global maximum in millimeters,
/// with linear interpolation at both crossings.
pub fn fwhm_mm(profile: &LateralProfile) -> Result<f64> {
    let peak = global_peak(profile)?;
    let level = profile.db[peak] + MAINLOBE_LEVEL_DB;
    let left = (0..peak)
        .rev()
        .find(|&i| profile.db[i] < level)
        .ok_or_else(|| Error::Metric("profile stays above -6 dB left of the peak".into()))?;
    let right = (peak + 1..profile.len())
        .find(|&i| profile.db[i] < level)
        .ok_or_else(|| Error::Metric("profile stays above -6 dB right of the peak".into()))?;
    let x_left = crossing(profile, left, left + 1, level);
    let x_right = crossing(profile, right - 1, right, level);
    Ok((x_right - x_left) * 1e3)
}

/// Highest level outside the mainlobe, in dB relative to the profile peak.
/// The mainlobe runs from the peak down to the first local minimum on each
/// side.
pub fn peak_sidelobe_db(profile: &LateralProfile) -> Result<f64> {
    let peak = global_peak(profile)?;
    let db = &profile.db;
    let mut left = peak;
    while left > 0 && db[left - 1] <= db[left] {
        left -= 1;
    }
    let mut right = peak;
    while right + 1 < db.len() && db[right + 1] <= db[right] {
        right += 1;
    }
    let outside = db[..left].iter().chain(&db[right + 1..]);
    let best = outside.copied().fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Err(Error::Metric("no samples outside the mainlobe".into()));
    }
    Ok(best - db[peak])
}
