//! Binary RF frame format and its metadata sidecar.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "PARF"
//!      4     4  format version (u32, currently 1)
//!      8     4  number of channels M (u32)
//!     12     4  samples per channel N (u32)
//!     16     8  sampling frequency, Hz (f64)
//!     24     8  sound speed, m/s (f64)
//!     32  4·M·N channel-major f32 samples
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{parse_key_values, KeyValues};
use super::write_atomic;
use crate::error::{Error, Result};
use crate::model::{validate_geometry, ArrayGeometry, GeometryParams, RfFrame};
use crate::simulator::NoiseReference;

pub const MAGIC: &[u8; 4] = b"PARF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfHeader {
    pub num_channels: u32,
    pub num_samples: u32,
    pub sampling_frequency: f64,
    pub sound_speed: f64,
}

pub fn encode_rf(frame: &RfFrame, sound_speed: f64) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * frame.samples().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(frame.num_channels() as u32).to_le_bytes());
    out.extend_from_slice(&(frame.num_samples() as u32).to_le_bytes());
    out.extend_from_slice(&frame.sampling_frequency().to_le_bytes());
    out.extend_from_slice(&sound_speed.to_le_bytes());
    for v in frame.samples() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn read_f64(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

pub fn decode_rf(bytes: &[u8]) -> Result<(RfFrame, RfHeader)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("missing PARF magic".into()));
    }
    let version = read_u32(bytes, 4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let header = RfHeader {
        num_channels: read_u32(bytes, 8),
        num_samples: read_u32(bytes, 12),
        sampling_frequency: read_f64(bytes, 16),
        sound_speed: read_f64(bytes, 24),
    };
    let count = header.num_channels as usize * header.num_samples as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * count {
        return Err(Error::Format(format!(
            "expected {} sample bytes for {} x {}, found {}",
            4 * count,
            header.num_channels,
            header.num_samples,
            body.len()
        )));
    }
    let samples = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    let frame = RfFrame::new(
        samples,
        header.num_channels as usize,
        header.num_samples as usize,
        header.sampling_frequency,
    )
    .map_err(|e| Error::Format(e.to_string()))?;
    Ok((frame, header))
}

pub fn write_rf(path: &Path, frame: &RfFrame, sound_speed: f64) -> Result<()> {
    Ok(write_atomic(path, &encode_rf(frame, sound_speed))?)
}

pub fn read_rf(path: &Path) -> Result<(RfFrame, RfHeader)> {
    decode_rf(&std::fs::read(path)?)
}

/// Sidecar path: the RF path with `.meta` appended.
pub fn metadata_path(rf_path: &Path) -> PathBuf {
    let mut s = rf_path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Acquisition description stored next to an RF file.
#[derive(Debug, Clone, PartialEq)]
pub struct RfMetadata {
    pub geometry: ArrayGeometry,
    pub n_samples: usize,
    pub seed: u64,
    pub noise_snr_db: Option<f64>,
    pub noise_reference: NoiseReference,
}

impl RfMetadata {
    pub fn to_text(&self) -> String {
        let g = &self.geometry;
        let mut s = String::from("# pabeam RF metadata\n");
        let _ = writeln!(s, "num_elements = {}", g.num_elements());
        let _ = writeln!(s, "pitch = {:?}", g.pitch());
        let _ = writeln!(s, "center_frequency = {:?}", g.center_frequency());
        let _ = writeln!(s, "fractional_bandwidth = {:?}", g.fractional_bandwidth());
        let _ = writeln!(s, "sampling_frequency = {:?}", g.sampling_frequency());
        let _ = writeln!(s, "sound_speed = {:?}", g.sound_speed());
        let _ = writeln!(s, "n_samples = {}", self.n_samples);
        let _ = writeln!(s, "seed = {}", self.seed);
        match self.noise_snr_db {
            Some(v) => {
                let _ = writeln!(s, "noise_snr_db = {v:?}");
            }
            None => s.push_str("noise_snr_db = none\n"),
        }
        let _ = writeln!(s, "noise_reference = {}", noise_reference_name(self.noise_reference));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut kv = parse_key_values(text)?;
        let geometry = geometry_from(&mut kv)?;
        let n_samples = kv.required_parse("n_samples")?;
        let seed = kv.required_parse("seed")?;
        let noise_snr_db = noise_snr_from(&mut kv)?;
        let noise_reference = noise_reference_from(&mut kv)?;
        kv.finish()?;
        Ok(Self { geometry, n_samples, seed, noise_snr_db, noise_reference })
    }

    pub fn write(&self, rf_path: &Path) -> Result<()> {
        Ok(write_atomic(&metadata_path(rf_path), self.to_text().as_bytes())?)
    }

    pub fn read(rf_path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(metadata_path(rf_path))?)
    }
}

pub(crate) fn noise_reference_name(r: NoiseReference) -> &'static str {
    match r {
        NoiseReference::MeanPower => "mean_power",
        NoiseReference::PeakPower => "peak_power",
    }
}

/// Linear array geometry from the shared geometry keys.
pub(crate) fn geometry_from(kv: &mut KeyValues) -> Result<ArrayGeometry> {
    let num_elements: usize = kv.required_parse("num_elements")?;
    let pitch = kv.required_parse("pitch")?;
    let center_frequency = kv.required_parse("center_frequency")?;
    let fractional_bandwidth = kv.required_parse("fractional_bandwidth")?;
    let sampling_frequency = kv.required_parse("sampling_frequency")?;
    let sound_speed = kv.required_parse("sound_speed")?;
    validate_geometry(GeometryParams::linear(
        num_elements,
        pitch,
        center_frequency,
        fractional_bandwidth,
        sampling_frequency,
        sound_speed,
    ))
}

pub(crate) fn noise_snr_from(kv: &mut KeyValues) -> Result<Option<f64>> {
    match kv.optional("noise_snr_db")? {
        None => Ok(None),
        Some(v) if v.eq_ignore_ascii_case("none") => Ok(None),
        Some(v) => v
            .parse::<f64>()
            .map(Some)
            .map_err(|_| Error::config("noise_snr_db", format!("cannot parse '{v}'"))),
    }
}

pub(crate) fn noise_reference_from(kv: &mut KeyValues) -> Result<NoiseReference> {
    match kv.optional("noise_reference")?.as_deref() {
        None | Some("mean_power") => Ok(NoiseReference::MeanPower),
        Some("peak_power") => Ok(NoiseReference::PeakPower),
        Some(other) => Err(Error::config(
            "noise_reference",
            format!("expected mean_power or peak_power, got '{other}'"),
        )),
    }
}
