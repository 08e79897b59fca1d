//! One-way propagation delays and delay-aligned channel snapshots.
//!
//! A photoacoustic source emits on its own, so the delay from pixel to
//! element is the single path length divided by the speed of sound. Delays
//! are kept in (fractional) samples.

use crate::model::{ArrayGeometry, ImagingGrid, RfFrame};

/// How a fractional delay is turned into a sample value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Linear,
    Nearest,
}

/// Per-pixel, per-element delays in samples, laid out `[iz][ix][element]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTable {
    delays: Vec<f64>,
    nx: usize,
    nz: usize,
    num_elements: usize,
}

impl DelayTable {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    /// Delays of every element for pixel `(ix, iz)`.
    pub fn pixel(&self, ix: usize, iz: usize) -> &[f64] {
        let start = (iz * self.nx + ix) * self.num_elements;
        &self.delays[start..start + self.num_elements]
    }
}

/// Writes the delay from point `(x, z)` to every element into `out`.
pub fn pixel_delays(g: &ArrayGeometry, x: f64, z: f64, out: &mut [f64]) {
    let scale = g.sampling_frequency() / g.sound_speed();
    for ((d, &ex), &ez) in out.iter_mut().zip(g.element_x()).zip(g.element_z()) {
        *d = (x - ex).hypot(z - ez) * scale;
    }
}

pub fn build_delay_table(g: &ArrayGeometry, grid: &ImagingGrid) -> DelayTable {
    let m = g.num_elements();
    let mut delays = vec![0.0; grid.len() * m];
    for (p, chunk) in delays.chunks_exact_mut(m).enumerate() {
        let (ix, iz) = (p % grid.nx(), p / grid.nx());
        pixel_delays(g, grid.x(ix), grid.z(iz), chunk);
    }
    DelayTable {
        delays,
        nx: grid.nx(),
        nz: grid.nz(),
        num_elements: m,
    }
}

/// Value of `channel` at fractional index `t`; zero outside the record.
#[inline]
pub fn sample_at(channel: &[f32], t: f64, interp: Interpolation) -> f64 {
    let last = channel.len() as f64 - 1.0;
    if !(t >= 0.0 && t <= last) {
        return 0.0;
    }
    match interp {
        Interpolation::Nearest => f64::from(channel[t.round() as usize]),
        Interpolation::Linear => {
            let i0 = t.floor();
            let frac = t - i0;
            let i0 = i0 as usize;
            if frac == 0.0 {
                f64::from(channel[i0])
            } else {
                let a = f64::from(channel[i0]);
                let b = f64::from(channel[i0 + 1]);
                a + (b - a) * frac
            }
        }
    }
}

/// Fills `out[i]` with channel `i` read at `delays[i] + shift` samples.
pub fn align_into(frame: &RfFrame, delays: &[f64], shift: f64, interp: Interpolation, out: &mut [f64]) {
    for (i, (o, &d)) in out.iter_mut().zip(delays).enumerate() {
        *o = sample_at(frame.channel(i), d + shift, interp);
    }
}

/// Delay-aligned samples `x_i(k - Δ_i)` for one pixel of a delay table,
/// linearly interpolated.
pub fn extract_aligned_samples(frame: &RfFrame, table: &DelayTable, pixel: (usize, usize)) -> Vec<f64> {
    let delays = table.pixel(pixel.0, pixel.1);
    let mut out = vec![0.0; delays.len()];
    align_into(frame, delays, 0.0, Interpolation::Linear, &mut out);
    out
}

/// Aligned snapshots at time offsets `-K..=K` around a pixel, row-major.
///
/// An offset is kept only when every element's shifted delay stays inside
/// the record, so the window shrinks near the frame edges rather than
/// padding with zeros. Offset zero is always kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshots {
    data: Vec<f64>,
    width: usize,
}

impl Snapshots {
    pub fn new(width: usize) -> Self {
        Self { data: Vec::new(), width }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let width = rows.first().map_or(0, Vec::len);
        let mut s = Self::new(width);
        for r in rows {
            s.push(r);
        }
        s
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.width, "snapshot width mismatch");
        self.data.extend_from_slice(row);
    }

    pub fn clear(&mut self) {
        self.data.clear();
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.width..(j + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.width.max(1))
    }

    pub fn map_in_place(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }
}

/// Collects the temporal context of a pixel into `out`, reusing `scratch`
/// for each row.
pub fn temporal_context_into(
    frame: &RfFrame,
    delays: &[f64],
    half_window: usize,
    interp: Interpolation,
    scratch: &mut [f64],
    out: &mut Snapshots,
) {
    out.clear();
    let (lo, hi) = delays
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let last = frame.num_samples() as f64 - 1.0;
    let k = half_window as i64;
    for n in -k..=k {
        let shift = n as f64;
        if n != 0 && (lo + shift < 0.0 || hi + shift > last) {
            continue;
        }
        align_into(frame, delays, shift, interp, scratch);
        out.push(scratch);
    }
}

pub fn temporal_context(frame: &RfFrame, delays: &[f64], half_window: usize, interp: Interpolation) -> Snapshots {
    let mut scratch = vec![0.0; delays.len()];
    let mut out = Snapshots::new(delays.len());
    temporal_context_into(frame, delays, half_window, interp, &mut scratch, &mut out);
    out
}
