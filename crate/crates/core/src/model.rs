//! Domain types shared by every stage of the pipeline.
//!
//! Every type here checks its invariants on construction and is immutable
//! afterwards, so a value that exists is a value that is valid. All lengths
//! are in meters, times in seconds, frequencies in hertz.

use crate::error::{Error, Result};

/// Tolerance on the uniform spacing of element positions.
pub const SPACING_TOLERANCE_M: f64 = 1e-12;

/// Unchecked description of a linear array, turned into an [`ArrayGeometry`]
/// by [`validate_geometry`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryParams {
    pub element_x: Vec<f64>,
    pub element_z: Vec<f64>,
    pub pitch: f64,
    pub center_frequency: f64,
    pub fractional_bandwidth: f64,
    pub sampling_frequency: f64,
    pub sound_speed: f64,
}

impl GeometryParams {
    /// A linear array of `num_elements` elements centered on x = 0.
    pub fn linear(
        num_elements: usize,
        pitch: f64,
        center_frequency: f64,
        fractional_bandwidth: f64,
        sampling_frequency: f64,
        sound_speed: f64,
    ) -> Self {
        let center = (num_elements as f64 - 1.0) / 2.0;
        Self {
            element_x: (0..num_elements)
                .map(|i| (i as f64 - center) * pitch)
                .collect(),
            element_z: vec![0.0; num_elements],
            pitch,
            center_frequency,
            fractional_bandwidth,
            sampling_frequency,
            sound_speed,
        }
    }
}

/// A validated linear transducer array and its acquisition parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    element_x: Vec<f64>,
    element_z: Vec<f64>,
    pitch: f64,
    center_frequency: f64,
    fractional_bandwidth: f64,
    sampling_frequency: f64,
    sound_speed: f64,
}

fn geometry_error(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidGeometry {
        field,
        reason: reason.into(),
    }
}

/// Checks every geometry invariant, reporting the first violation by field name.
pub fn validate_geometry(p: GeometryParams) -> Result<ArrayGeometry> {
    let m = p.element_x.len();
    if m < 2 {
        return Err(geometry_error(
            "element_x",
            format!("need at least 2 elements, got {m}"),
        ));
    }
    if p.element_z.len() != m {
        return Err(geometry_error(
            "element_z",
            format!("length {} does not match {m} elements", p.element_z.len()),
        ));
    }
    if let Some(x) = p.element_x.iter().find(|x| !x.is_finite()) {
        return Err(geometry_error("element_x", format!("non-finite position {x}")));
    }
    if let Some(z) = p.element_z.iter().find(|z| !z.is_finite()) {
        return Err(geometry_error("element_z", format!("non-finite position {z}")));
    }
    if !(p.pitch.is_finite() && p.pitch > 0.0) {
        return Err(geometry_error("pitch", format!("must be positive, got {}", p.pitch)));
    }
    for (i, pair) in p.element_x.windows(2).enumerate() {
        let step = pair[1] - pair[0];
        if step <= 0.0 {
            return Err(geometry_error(
                "element_x",
                format!("not strictly increasing at element {}", i + 1),
            ));
        }
        if (step - p.pitch).abs() > SPACING_TOLERANCE_M {
            return Err(geometry_error(
                "element_x",
                format!(
                    "spacing {step} m at element {} differs from pitch {} m",
                    i + 1,
                    p.pitch
                ),
            ));
        }
    }
    if !(p.center_frequency.is_finite() && p.center_frequency > 0.0) {
        return Err(geometry_error(
            "center_frequency",
            format!("must be positive, got {}", p.center_frequency),
        ));
    }
    if !(p.fractional_bandwidth > 0.0 && p.fractional_bandwidth <= 1.0) {
        return Err(geometry_error(
            "fractional_bandwidth",
            format!("must lie in (0, 1], got {}", p.fractional_bandwidth),
        ));
    }
    if !(p.sampling_frequency.is_finite() && p.sampling_frequency >= 2.0 * p.center_frequency)
    {
        return Err(geometry_error(
            "sampling_frequency",
            format!(
                "{} Hz is below twice the center frequency {} Hz",
                p.sampling_frequency, p.center_frequency
            ),
        ));
    }
    if !(p.sound_speed.is_finite() && p.sound_speed > 0.0) {
        return Err(geometry_error(
            "sound_speed",
            format!("must be positive, got {}", p.sound_speed),
        ));
    }
    Ok(ArrayGeometry {
        element_x: p.element_x,
        element_z: p.element_z,
        pitch: p.pitch,
        center_frequency: p.center_frequency,
        fractional_bandwidth: p.fractional_bandwidth,
        sampling_frequency: p.sampling_frequency,
        sound_speed: p.sound_speed,
    })
}

impl ArrayGeometry {
    pub fn num_elements(&self) -> usize {
        self.element_x.len()
    }

    pub fn element_x(&self) -> &[f64] {
        &self.element_x
    }

    pub fn element_z(&self) -> &[f64] {
        &self.element_z
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn center_frequency(&self) -> f64 {
        self.center_frequency
    }

    pub fn fractional_bandwidth(&self) -> f64 {
        self.fractional_bandwidth
    }

    pub fn sampling_frequency(&self) -> f64 {
        self.sampling_frequency
    }

    pub fn sound_speed(&self) -> f64 {
        self.sound_speed
    }

    /// Wavelength at the center frequency.
    pub fn wavelength(&self) -> f64 {
        self.sound_speed / self.center_frequency
    }

    /// Same array, different assumed speed of sound.
    pub fn with_sound_speed(&self, sound_speed: f64) -> Result<Self> {
        validate_geometry(GeometryParams {
            sound_speed,
            ..self.params()
        })
    }

    pub fn params(&self) -> GeometryParams {
        GeometryParams {
            element_x: self.element_x.clone(),
            element_z: self.element_z.clone(),
            pitch: self.pitch,
            center_frequency: self.center_frequency,
            fractional_bandwidth: self.fractional_bandwidth,
            sampling_frequency: self.sampling_frequency,
            sound_speed: self.sound_speed,
        }
    }
}

/// Regular pixel grid in the imaging plane. Pixel `ix` sits at
/// `x_min + ix * (x_max - x_min) / (nx - 1)`; a single-column grid sits at
/// `x_min`. Depth is handled the same way.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagingGrid {
    x_min: f64,
    x_max: f64,
    z_min: f64,
    z_max: f64,
    nx: usize,
    nz: usize,
}

fn grid_error(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidGrid {
        field,
        reason: reason.into(),
    }
}

impl ImagingGrid {
    pub fn new(x_min: f64, x_max: f64, z_min: f64, z_max: f64, nx: usize, nz: usize) -> Result<Self> {
        // A degenerate extent is allowed only for a single row or column.
        if !(x_min.is_finite() && x_max.is_finite() && (x_min < x_max || (x_min == x_max && nx == 1))) {
            return Err(grid_error("x_min", format!("need x_min < x_max, got {x_min} and {x_max}")));
        }
        if !(z_min.is_finite() && z_max.is_finite() && (z_min < z_max || (z_min == z_max && nz == 1))) {
            return Err(grid_error("z_min", format!("need z_min < z_max, got {z_min} and {z_max}")));
        }
        if z_min <= 0.0 {
            return Err(grid_error("z_min", format!("grid must lie in front of the array, got {z_min}")));
        }
        if nx == 0 {
            return Err(grid_error("nx", "need at least one column"));
        }
        if nz == 0 {
            return Err(grid_error("nz", "need at least one row"));
        }
        Ok(Self { x_min, x_max, z_min, z_max, nx, nz })
    }

    /// Grid with approximately the requested pixel spacing; the extent is
    /// kept exactly and the spacing rounded so it divides it.
    pub fn with_spacing(x_min: f64, x_max: f64, z_min: f64, z_max: f64, dx: f64, dz: f64) -> Result<Self> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(grid_error("nx", format!("lateral spacing must be positive, got {dx}")));
        }
        if !(dz.is_finite() && dz > 0.0) {
            return Err(grid_error("nz", format!("axial spacing must be positive, got {dz}")));
        }
        let nx = ((x_max - x_min) / dx).round() as usize + 1;
        let nz = ((z_max - z_min) / dz).round() as usize + 1;
        Self::new(x_min, x_max, z_min, z_max, nx, nz)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn z_min(&self) -> f64 {
        self.z_min
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        if self.nx > 1 {
            (self.x_max - self.x_min) / (self.nx - 1) as f64
        } else {
            self.x_max - self.x_min
        }
    }

    pub fn dz(&self) -> f64 {
        if self.nz > 1 {
            (self.z_max - self.z_min) / (self.nz - 1) as f64
        } else {
            self.z_max - self.z_min
        }
    }

    pub fn x(&self, ix: usize) -> f64 {
        if self.nx > 1 {
            self.x_min + ix as f64 * self.dx()
        } else {
            self.x_min
        }
    }

    pub fn z(&self, iz: usize) -> f64 {
        if self.nz > 1 {
            self.z_min + iz as f64 * self.dz()
        } else {
            self.z_min
        }
    }

    /// Row whose depth is nearest `depth`, or `None` outside `[z_min, z_max]`.
    pub fn nearest_row(&self, depth: f64) -> Option<usize> {
        if !(depth >= self.z_min && depth <= self.z_max) {
            return None;
        }
        if self.nz == 1 {
            return Some(0);
        }
        Some((((depth - self.z_min) / self.dz()).round() as usize).min(self.nz - 1))
    }

    /// Column whose lateral position is nearest `x`, clamped to the grid.
    pub fn nearest_column(&self, x: f64) -> usize {
        if self.nx == 1 {
            return 0;
        }
        let f = ((x - self.x_min) / self.dx()).round();
        f.clamp(0.0, (self.nx - 1) as f64) as usize
    }
}

/// Sampled channel data, one row of `num_samples` per element.
///
/// Samples are stored as `f32` so a frame written to disk and read back is
/// identical to the one in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct RfFrame {
    samples: Vec<f32>,
    num_channels: usize,
    num_samples: usize,
    sampling_frequency: f64,
}

impl RfFrame {
    /// `samples` is channel-major: channel `i` occupies
    /// `samples[i * num_samples..(i + 1) * num_samples]`.
    pub fn new(samples: Vec<f32>, num_channels: usize, num_samples: usize, sampling_frequency: f64) -> Result<Self> {
        if num_channels == 0 || num_samples == 0 {
            return Err(Error::InvalidFrame(format!(
                "empty frame ({num_channels} channels x {num_samples} samples)"
            )));
        }
        if samples.len() != num_channels * num_samples {
            return Err(Error::InvalidFrame(format!(
                "{} values do not fill {num_channels} x {num_samples}",
                samples.len()
            )));
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidFrame(format!(
                "non-finite sample at channel {}, index {}",
                pos / num_samples,
                pos % num_samples
            )));
        }
        if !(sampling_frequency.is_finite() && sampling_frequency > 0.0) {
            return Err(Error::InvalidFrame(format!(
                "sampling frequency must be positive, got {sampling_frequency}"
            )));
        }
        Ok(Self { samples, num_channels, num_samples, sampling_frequency })
    }

    pub fn zeros(num_channels: usize, num_samples: usize, sampling_frequency: f64) -> Result<Self> {
        Self::new(vec![0.0; num_channels * num_samples], num_channels, num_samples, sampling_frequency)
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn sampling_frequency(&self) -> f64 {
        self.sampling_frequency
    }

    pub fn channel(&self, i: usize) -> &[f32] {
        &self.samples[i * self.num_samples..(i + 1) * self.num_samples]
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    /// Mean square over all channels and samples.
    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>() / self.samples.len() as f64
    }

    /// Applies `f` to every sample. Fails if the result is not finite.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Result<Self> {
        Self::new(
            self.samples.iter().map(|&v| f(v)).collect(),
            self.num_channels,
            self.num_samples,
            self.sampling_frequency,
        )
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub(crate) fn check_matches(&self, g: &ArrayGeometry) -> Result<()> {
        if self.num_channels != g.num_elements() {
            return Err(Error::InvalidFrame(format!(
                "{} channels but the array has {} elements",
                self.num_channels,
                g.num_elements()
            )));
        }
        if (self.sampling_frequency - g.sampling_frequency()).abs() > 1e-9 * g.sampling_frequency() {
            return Err(Error::InvalidFrame(format!(
                "frame sampled at {} Hz but the array samples at {} Hz",
                self.sampling_frequency,
                g.sampling_frequency()
            )));
        }
        Ok(())
    }
}

/// Minimum-variance parameters: subarray length, temporal half-window and
/// diagonal loading factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvConfig {
    subarray_length: usize,
    temporal_half_window: usize,
    loading_factor: f64,
}

impl MvConfig {
    /// Checks the parameters that do not depend on the array. The upper
    /// bound on the subarray length is checked by [`MvConfig::check_for`].
    pub fn new(subarray_length: usize, temporal_half_window: usize, loading_factor: f64) -> Result<Self> {
        if subarray_length < 1 {
            return Err(Error::config("subarray_length", "must be at least 1"));
        }
        if !(loading_factor.is_finite() && loading_factor > 0.0) {
            return Err(Error::config(
                "loading_factor",
                format!("must be positive, got {loading_factor}"),
            ));
        }
        Ok(Self { subarray_length, temporal_half_window, loading_factor })
    }

    /// Half-aperture subarray, five-sample temporal half-window and loading
    /// of `1 / (100 L)` times the covariance trace.
    pub fn default_for(num_elements: usize) -> Self {
        let l = (num_elements / 2).max(1);
        Self {
            subarray_length: l,
            temporal_half_window: 5,
            loading_factor: 1.0 / (100.0 * l as f64),
        }
    }

    pub fn check_for(&self, num_elements: usize) -> Result<()> {
        if self.subarray_length > num_elements / 2 {
            return Err(Error::config(
                "subarray_length",
                format!(
                    "{} exceeds half the aperture ({} elements)",
                    self.subarray_length, num_elements
                ),
            ));
        }
        Ok(())
    }

    pub fn subarray_length(&self) -> usize {
        self.subarray_length
    }

    pub fn temporal_half_window(&self) -> usize {
        self.temporal_half_window
    }

    pub fn loading_factor(&self) -> f64 {
        self.loading_factor
    }

    /// Number of overlapping subarrays in an aperture of `num_elements`.
    pub fn num_subarrays(&self, num_elements: usize) -> usize {
        num_elements + 1 - self.subarray_length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Raw,
    Envelope,
    LogCompressed,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Raw => "raw",
            Stage::Envelope => "envelope",
            Stage::LogCompressed => "log_compressed",
        }
    }
}

/// Pixel grid of beamformer output, row-major with `nz` rows of `nx` pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformedImage {
    pixels: Vec<f64>,
    grid: ImagingGrid,
    stage: Stage,
    dynamic_range_db: Option<f64>,
}

impl BeamformedImage {
    pub fn new(pixels: Vec<f64>, grid: ImagingGrid, stage: Stage, dynamic_range_db: Option<f64>) -> Result<Self> {
        if pixels.len() != grid.len() {
            return Err(Error::config(
                "pixels",
                format!("{} pixels for a {} x {} grid", pixels.len(), grid.nz(), grid.nx()),
            ));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::config("pixels", "non-finite pixel value"));
        }
        match stage {
            Stage::Raw => {}
            Stage::Envelope => {
                if pixels.iter().any(|&p| p < 0.0) {
                    return Err(Error::config("pixels", "envelope image has a negative pixel"));
                }
            }
            Stage::LogCompressed => {
                let dr = dynamic_range_db.ok_or_else(|| {
                    Error::config("dynamic_range_db", "required for a log-compressed image")
                })?;
                if !(dr.is_finite() && dr > 0.0) {
                    return Err(Error::config("dynamic_range_db", format!("must be positive, got {dr}")));
                }
                if pixels.iter().any(|&p| !(-dr..=0.0).contains(&p)) {
                    return Err(Error::config("pixels", format!("log-compressed pixel outside [-{dr}, 0] dB")));
                }
            }
        }
        let dynamic_range_db = if stage == Stage::LogCompressed { dynamic_range_db } else { None };
        Ok(Self { pixels, grid, stage, dynamic_range_db })
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn grid(&self) -> &ImagingGrid {
        &self.grid
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn dynamic_range_db(&self) -> Option<f64> {
        self.dynamic_range_db
    }

    pub fn get(&self, ix: usize, iz: usize) -> f64 {
        self.pixels[iz * self.grid.nx() + ix]
    }

    pub fn row(&self, iz: usize) -> &[f64] {
        let nx = self.grid.nx();
        &self.pixels[iz * nx..(iz + 1) * nx]
    }

    pub fn column(&self, ix: usize) -> Vec<f64> {
        (0..self.grid.nz()).map(|iz| self.get(ix, iz)).collect()
    }

    /// Position `(x, z)` and value of the largest pixel.
    pub fn argmax(&self) -> (f64, f64, f64) {
        let (idx, &val) = self
            .pixels
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        let nx = self.grid.nx();
        (self.grid.x(idx % nx), self.grid.z(idx / nx), val)
    }

    pub(crate) fn expect_stage(&self, expected: Stage) -> Result<()> {
        if self.stage != expected {
            return Err(Error::StageMismatch {
                expected: expected.name(),
                found: self.stage.name(),
            });
        }
        Ok(())
    }
}
