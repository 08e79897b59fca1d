//! Flat `key = value` configuration files.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored. Keys
//! may appear once unless a reader asks for all values of a repeated key
//! (such as `absorber`). Lengths are in meters, frequencies in hertz.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use super::rf::{geometry_from, noise_reference_from, noise_reference_name, noise_snr_from};
use crate::error::{Error, Result};
use crate::simulator::{PointAbsorber, SimConfig};

/// Parsed entries, consumed field by field so leftovers can be reported.
#[derive(Debug, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, Vec<(usize, String)>>,
}

pub fn parse_key_values(text: &str) -> Result<KeyValues> {
    let mut kv = KeyValues::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line {}: expected 'key = value'", n + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Format(format!("line {}: empty key", n + 1)));
        }
        kv.entries
            .entry(key.to_string())
            .or_default()
            .push((n + 1, value.trim().to_string()));
    }
    Ok(kv)
}

impl KeyValues {
    /// Removes and returns a single-valued key.
    pub fn optional(&mut self, key: &str) -> Result<Option<String>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(mut v) if v.len() == 1 => Ok(Some(v.remove(0).1)),
            Some(v) => Err(Error::config(key, format!("given {} times (line {})", v.len(), v[1].0))),
        }
    }

    pub fn required(&mut self, key: &str) -> Result<String> {
        self.optional(key)?
            .ok_or_else(|| Error::config(key, "missing required field"))
    }

    pub fn required_parse<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.required(key)?;
        v.parse()
            .map_err(|_| Error::config(key, format!("cannot parse '{v}'")))
    }

    pub fn optional_parse<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        self.optional(key)?
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::config(key, format!("cannot parse '{v}'")))
            })
            .transpose()
    }

    /// Removes and returns every value of a repeatable key, in file order.
    pub fn repeated(&mut self, key: &str) -> Vec<String> {
        self.entries
            .remove(key)
            .map(|v| v.into_iter().map(|(_, s)| s).collect())
            .unwrap_or_default()
    }

    /// Fails if any key was not consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, v)) => Err(Error::config(key, format!("unknown field (line {})", v[0].0))),
        }
    }
}

fn parse_list(key: &str, value: &str, expected: usize) -> Result<Vec<f64>> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != expected {
        return Err(Error::config(key, format!("expected {expected} comma-separated numbers, got '{value}'")));
    }
    parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|_| Error::config(key, format!("cannot parse '{p}'"))))
        .collect()
}

/// A simulation configuration file: the phantom and the noise seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimFile {
    pub sim: SimConfig,
    pub seed: u64,
}

impl SimFile {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut kv = parse_key_values(text)?;
        let geometry = geometry_from(&mut kv)?;
        let n_samples = kv.required_parse("n_samples")?;
        let noise_snr_db = noise_snr_from(&mut kv)?;
        let noise_reference = noise_reference_from(&mut kv)?;
        let seed = kv.optional_parse("seed")?.unwrap_or(0);
        let absorbers = kv
            .repeated("absorber")
            .iter()
            .map(|v| {
                let p = parse_list("absorber", v, 3)?;
                PointAbsorber::new(p[0], p[1], p[2])
            })
            .collect::<Result<Vec<_>>>()?;
        if absorbers.is_empty() {
            return Err(Error::config("absorber", "at least one absorber is required"));
        }
        kv.finish()?;
        let sim = SimConfig {
            absorbers,
            geometry,
            n_samples,
            noise_snr_db,
            noise_reference,
        };
        sim.validate()?;
        Ok(Self { sim, seed })
    }

    pub fn to_text(&self) -> String {
        let g = &self.sim.geometry;
        let mut s = String::from("# pabeam simulation config (SI units: m, Hz, m/s)\n");
        let _ = writeln!(s, "num_elements = {}", g.num_elements());
        let _ = writeln!(s, "pitch = {:?}", g.pitch());
        let _ = writeln!(s, "center_frequency = {:?}", g.center_frequency());
        let _ = writeln!(s, "fractional_bandwidth = {:?}", g.fractional_bandwidth());
        let _ = writeln!(s, "sampling_frequency = {:?}", g.sampling_frequency());
        let _ = writeln!(s, "sound_speed = {:?}", g.sound_speed());
        let _ = writeln!(s, "n_samples = {}", self.sim.n_samples);
        match self.sim.noise_snr_db {
            Some(v) => {
                let _ = writeln!(s, "noise_snr_db = {v:?}");
            }
            None => s.push_str("noise_snr_db = none\n"),
        }
        let _ = writeln!(s, "noise_reference = {}", noise_reference_name(self.sim.noise_reference));
        let _ = writeln!(s, "seed = {}", self.seed);
        s.push_str("# absorber = x, z, amplitude\n");
        for a in &self.sim.absorbers {
            let _ = writeln!(s, "absorber = {:?}, {:?}, {:?}", a.x(), a.z(), a.amplitude());
        }
        s
    }
}

/// Evaluation targets, one `x_mm, z_mm` pair per line.
pub fn parse_targets(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let p = parse_list("target", line, 2)
            .map_err(|e| Error::Format(format!("targets line {}: {e}", n + 1)))?;
        out.push((p[0] * 1e-3, p[1] * 1e-3));
    }
    if out.is_empty() {
        return Err(Error::Format("targets file lists no targets".into()));
    }
    Ok(out)
}

pub fn targets_to_text(targets: &[(f64, f64)]) -> String {
    let mut s = String::from("# x_mm, z_mm\n");
    for (x, z) in targets {
        let _ = writeln!(s, "{}, {}", x * 1e3, z * 1e3);
    }
    s
}
