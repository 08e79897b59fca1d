//! Image outputs: 16-bit PGM for viewing and a plain-text matrix that
//! round-trips exactly.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{BeamformedImage, ImagingGrid, Stage};

/// Binary PGM (P5, maxval 65535, big-endian samples). Rows run from shallow
/// to deep, columns from left to right. `[-DR, 0]` dB maps linearly onto
/// `[0, 65535]`.
pub fn encode_pgm16(image: &BeamformedImage) -> Result<Vec<u8>> {
    image.expect_stage(Stage::LogCompressed)?;
    let dr = image.dynamic_range_db().expect("log-compressed images carry a dynamic range");
    let g = image.grid();
    let mut out = format!("P5\n{} {}\n65535\n", g.nx(), g.nz()).into_bytes();
    out.reserve(2 * g.len());
    for &v in image.pixels() {
        let level = ((v + dr) / dr * 65535.0).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&level.to_be_bytes());
    }
    Ok(out)
}

fn stage_from(name: &str) -> Result<Stage> {
    [Stage::Raw, Stage::Envelope, Stage::LogCompressed]
        .into_iter()
        .find(|s| s.name() == name)
        .ok_or_else(|| Error::Format(format!("unknown image stage '{name}'")))
}

/// Text matrix: one header comment describing the grid, then `nz` lines of
/// `nx` whitespace-separated values.
pub fn encode_matrix(image: &BeamformedImage) -> String {
    let g = image.grid();
    let mut s = format!(
        "# stage={} nx={} nz={} x_min={:?} x_max={:?} z_min={:?} z_max={:?}",
        image.stage().name(),
        g.nx(),
        g.nz(),
        g.x_min(),
        g.x_max(),
        g.z_min(),
        g.z_max()
    );
    if let Some(dr) = image.dynamic_range_db() {
        let _ = write!(s, " dynamic_range_db={dr:?}");
    }
    s.push('\n');
    for iz in 0..g.nz() {
        let row: Vec<String> = image.row(iz).iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn decode_matrix(text: &str) -> Result<BeamformedImage> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .ok_or_else(|| Error::Format("matrix file lacks its header line".into()))?;
    let mut fields = std::collections::HashMap::new();
    for token in header.split_whitespace() {
        let (k, v) = token
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header token '{token}'")))?;
        fields.insert(k, v);
    }
    let get = |k: &str| -> Result<&str> {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| Error::Format(format!("header lacks '{k}'")))
    };
    let num = |k: &str| -> Result<f64> {
        get(k)?
            .parse()
            .map_err(|_| Error::Format(format!("header field '{k}' is not a number")))
    };
    let stage = stage_from(get("stage")?)?;
    let nx = num("nx")? as usize;
    let nz = num("nz")? as usize;
    let grid = ImagingGrid::new(num("x_min")?, num("x_max")?, num("z_min")?, num("z_max")?, nx, nz)?;
    let dr = fields.contains_key("dynamic_range_db").then(|| num("dynamic_range_db")).transpose()?;

    let mut pixels = Vec::with_capacity(grid.len());
    for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let before = pixels.len();
        for tok in line.split_whitespace() {
            pixels.push(
                tok.parse::<f64>()
                    .map_err(|_| Error::Format(format!("row {}: bad value '{tok}'", i + 1)))?,
            );
        }
        if pixels.len() - before != nx {
            return Err(Error::Format(format!("row {} has {} values, expected {nx}", i + 1, pixels.len() - before)));
        }
    }
    if pixels.len() != grid.len() {
        return Err(Error::Format(format!("expected {nz} rows, found {}", pixels.len() / nx.max(1))));
    }
    BeamformedImage::new(pixels, grid, stage, dr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_image() -> BeamformedImage {
        let grid = ImagingGrid::new(-1e-3, 1e-3, 0.01, 0.011, 3, 2).unwrap();
        BeamformedImage::new(vec![0.0, -30.0, -60.0, -15.0, -45.0, -0.1], grid, Stage::LogCompressed, Some(60.0))
            .unwrap()
    }

    #[test]
    fn pgm_maps_dynamic_range_to_full_scale() {
        let bytes = encode_pgm16(&log_image()).unwrap();
        let header = b"P5\n3 2\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        let body: Vec<u16> = bytes[header.len()..]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        assert_eq!(body, vec![65535, 32768, 0, 49151, 16384, 65426]);
    }

    #[test]
    fn pgm_requires_log_stage() {
        let grid = ImagingGrid::new(0.0, 0.0, 0.01, 0.01, 1, 1).unwrap();
        let raw = BeamformedImage::new(vec![1.0], grid, Stage::Raw, None).unwrap();
        assert!(matches!(encode_pgm16(&raw), Err(Error::StageMismatch { .. })));
    }

    #[test]
    fn matrix_round_trip() {
        let img = log_image();
        assert_eq!(decode_matrix(&encode_matrix(&img)).unwrap(), img);
        let grid = ImagingGrid::new(0.0, 0.0, 0.01, 0.01, 1, 1).unwrap();
        let raw = BeamformedImage::new(vec![-0.1234567890123], grid, Stage::Raw, None).unwrap();
        assert_eq!(decode_matrix(&encode_matrix(&raw)).unwrap(), raw);
    }

    #[test]
    fn matrix_rejects_ragged_rows() {
        let text = encode_matrix(&log_image()).replace("-60.0\n", "\n");
        assert!(decode_matrix(&text).is_err());
    }
}
