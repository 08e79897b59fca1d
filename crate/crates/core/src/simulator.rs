//! Analytic forward model: point absorbers radiating a band-limited pulse
//! with spherical spreading, received by a linear array.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{validate_geometry, ArrayGeometry, GeometryParams, RfFrame};

/// Pulse support is cut off at this many envelope standard deviations.
const PULSE_SUPPORT_SIGMAS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointAbsorber {
    x: f64,
    z: f64,
    amplitude: f64,
}

impl PointAbsorber {
    pub fn new(x: f64, z: f64, amplitude: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::config("absorber.x", format!("non-finite position {x}")));
        }
        if !(z.is_finite() && z > 0.0) {
            return Err(Error::config("absorber.z", format!("must lie in front of the array, got {z}")));
        }
        if !amplitude.is_finite() {
            return Err(Error::config("absorber.amplitude", "must be finite"));
        }
        Ok(Self { x, z, amplitude })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
}

/// Gaussian-modulated cosine `exp(-t² / 2σ²) cos(2π f0 t)`.
///
/// The spectrum is a Gaussian of standard deviation `1 / (2πσ)` around f0,
/// whose amplitude falls to one half at `± sqrt(2 ln 2) / (2πσ)`. Setting
/// the two-sided −6 dB width to `B f0` gives `σ = sqrt(2 ln 2) / (π B f0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPulse {
    center_frequency: f64,
    sigma: f64,
}

impl GaussianPulse {
    pub fn from_bandwidth(center_frequency: f64, fractional_bandwidth: f64) -> Self {
        let sigma = (2.0 * std::f64::consts::LN_2).sqrt()
            / (std::f64::consts::PI * fractional_bandwidth * center_frequency);
        Self { center_frequency, sigma }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Half-length of the support outside which the pulse is taken as zero.
    pub fn half_duration(&self) -> f64 {
        PULSE_SUPPORT_SIGMAS * self.sigma
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        let u = t / self.sigma;
        (-0.5 * u * u).exp() * (2.0 * std::f64::consts::PI * self.center_frequency * t).cos()
    }
}

/// Where the noise level of [`add_noise`] is referenced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseReference {
    /// Mean square over every channel and sample.
    #[default]
    MeanPower,
    /// Square of the largest absolute sample.
    PeakPower,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub absorbers: Vec<PointAbsorber>,
    pub geometry: ArrayGeometry,
    pub n_samples: usize,
    /// Channel SNR in dB; `None` leaves the frame noiseless.
    pub noise_snr_db: Option<f64>,
    pub noise_reference: NoiseReference,
}

impl SimConfig {
    pub fn new(absorbers: Vec<PointAbsorber>, geometry: ArrayGeometry, n_samples: usize) -> Self {
        Self {
            absorbers,
            geometry,
            n_samples,
            noise_snr_db: None,
            noise_reference: NoiseReference::MeanPower,
        }
    }

    /// Latest sample index any absorber's pulse reaches on any element.
    pub fn last_arrival_sample(&self) -> f64 {
        let g = &self.geometry;
        let pulse = GaussianPulse::from_bandwidth(g.center_frequency(), g.fractional_bandwidth());
        let far = self
            .absorbers
            .iter()
            .flat_map(|a| {
                g.element_x()
                    .iter()
                    .zip(g.element_z())
                    .map(move |(&ex, &ez)| (a.x - ex).hypot(a.z - ez))
            })
            .fold(0.0, f64::max);
        (far / g.sound_speed() + pulse.half_duration()) * g.sampling_frequency()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::config("n_samples", "must be positive"));
        }
        let last = self.last_arrival_sample();
        if last > (self.n_samples - 1) as f64 {
            return Err(Error::config(
                "n_samples",
                format!(
                    "{} samples cannot hold arrivals up to sample {:.1}",
                    self.n_samples, last
                ),
            ));
        }
        if let Some(snr) = self.noise_snr_db {
            if snr.is_nan() {
                return Err(Error::config("noise_snr_db", "must be a number"));
            }
        }
        Ok(())
    }
}

/// Noiseless channel data: every absorber contributes
/// `amplitude / r * pulse(t - r / c)` to every element.
pub fn simulate_rf(cfg: &SimConfig) -> Result<RfFrame> {
    cfg.validate()?;
    let g = &cfg.geometry;
    let n = cfg.n_samples;
    let fs = g.sampling_frequency();
    let c = g.sound_speed();
    let pulse = GaussianPulse::from_bandwidth(g.center_frequency(), g.fractional_bandwidth());
    let half = pulse.half_duration();
    let mut samples = vec![0.0f32; g.num_elements() * n];
    samples
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, out)| {
            let (ex, ez) = (g.element_x()[i], g.element_z()[i]);
            let mut channel = vec![0.0f64; n];
            for a in &cfg.absorbers {
                let r = (a.x - ex).hypot(a.z - ez);
                let arrival = r / c;
                let gain = a.amplitude / r;
                let first = ((arrival - half) * fs).ceil().max(0.0) as usize;
                let last = (((arrival + half) * fs).floor() as usize).min(n - 1);
                for (k, v) in channel.iter_mut().enumerate().take(last + 1).skip(first) {
                    *v += gain * pulse.value(k as f64 / fs - arrival);
                }
            }
            for (o, v) in out.iter_mut().zip(&channel) {
                *o = *v as f32;
            }
        });
    RfFrame::new(samples, g.num_elements(), n, fs)
}

/// Adds white Gaussian noise so that `10 log10(P_signal / σ²) = snr_db`,
/// with the signal power taken as the mean square of the frame.
/// `snr_db = +∞` returns the frame unchanged.
pub fn add_noise(frame: &RfFrame, snr_db: f64, seed: u64) -> Result<RfFrame> {
    add_noise_with_reference(frame, snr_db, seed, NoiseReference::MeanPower)
}

pub fn add_noise_with_reference(
    frame: &RfFrame,
    snr_db: f64,
    seed: u64,
    reference: NoiseReference,
) -> Result<RfFrame> {
    if snr_db == f64::INFINITY {
        return Ok(frame.clone());
    }
    if snr_db.is_nan() {
        return Err(Error::config("noise_snr_db", "must be a number"));
    }
    let power = match reference {
        NoiseReference::MeanPower => frame.mean_power(),
        NoiseReference::PeakPower => frame
            .samples()
            .iter()
            .map(|&v| f64::from(v).abs())
            .fold(0.0, f64::max)
            .powi(2),
    };
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    if sigma == 0.0 {
        return Ok(frame.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::config("noise_snr_db", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = frame
        .samples()
        .iter()
        .map(|&v| (f64::from(v) + normal.sample(&mut rng)) as f32)
        .collect();
    RfFrame::new(noisy, frame.num_channels(), frame.num_samples(), frame.sampling_frequency())
}

/// Simulates the configured phantom and adds the configured noise.
pub fn simulate(cfg: &SimConfig, seed: u64) -> Result<RfFrame> {
    let clean = simulate_rf(cfg)?;
    match cfg.noise_snr_db {
        Some(snr) => add_noise_with_reference(&clean, snr, seed, cfg.noise_reference),
        None => Ok(clean),
    }
}

pub const STANDARD_NUM_ELEMENTS: usize = 128;
pub const STANDARD_CENTER_FREQUENCY: f64 = 5e6;
pub const STANDARD_FRACTIONAL_BANDWIDTH: f64 = 0.77;
pub const STANDARD_SAMPLING_FREQUENCY: f64 = 50e6;
pub const STANDARD_SOUND_SPEED: f64 = 1540.0;
pub const STANDARD_CHANNEL_SNR_DB: f64 = 50.0;
/// The 128-element aperture spans the 40 mm lateral imaging region.
pub const STANDARD_PITCH: f64 = 40e-3 / 127.0;
pub const STANDARD_N_SAMPLES: usize = 5000;
/// Lateral positions of the three absorbers in each depth row.
pub const PHANTOM_LATERAL_POSITIONS: [f64; 3] = [-8e-3, 0.0, 8e-3];

/// 128 elements, 5 MHz, 77 % bandwidth, 50 MHz sampling, 1540 m/s.
pub fn standard_geometry() -> ArrayGeometry {
    validate_geometry(GeometryParams::linear(
        STANDARD_NUM_ELEMENTS,
        STANDARD_PITCH,
        STANDARD_CENTER_FREQUENCY,
        STANDARD_FRACTIONAL_BANDWIDTH,
        STANDARD_SAMPLING_FREQUENCY,
        STANDARD_SOUND_SPEED,
    ))
    .expect("built-in geometry is valid")
}

/// Depths of the ten absorber rows: 25 mm to 70 mm every 5 mm.
pub fn phantom_depths() -> Vec<f64> {
    (0..10).map(|k| (25.0 + 5.0 * k as f64) * 1e-3).collect()
}

/// Thirty unit absorbers, three per depth row, with 50 dB channel noise.
pub fn standard_phantom() -> SimConfig {
    let absorbers = phantom_depths()
        .into_iter()
        .flat_map(|z| {
            PHANTOM_LATERAL_POSITIONS
                .iter()
                .map(move |&x| PointAbsorber::new(x, z, 1.0).expect("valid absorber"))
        })
        .collect();
    SimConfig {
        absorbers,
        geometry: standard_geometry(),
        n_samples: STANDARD_N_SAMPLES,
        noise_snr_db: Some(STANDARD_CHANNEL_SNR_DB),
        noise_reference: NoiseReference::MeanPower,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn peak_index(ch: &[f32]) -> usize {
        ch.iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0
    }

    #[test]
    fn pulse_bandwidth_matches_definition() {
        let p = GaussianPulse::from_bandwidth(5e6, 0.77);
        // Amplitude spectrum of the envelope at the band edge, by direct
        // numerical Fourier integral of the pulse.
        let spectrum = |f: f64| {
            let dt = p.sigma() / 200.0;
            let mut re = 0.0;
            let mut im = 0.0;
            let steps = (12.0 * p.sigma() / dt) as i64;
            for k in -steps..=steps {
                let t = k as f64 * dt;
                let v = p.value(t);
                re += v * (2.0 * std::f64::consts::PI * f * t).cos() * dt;
                im -= v * (2.0 * std::f64::consts::PI * f * t).sin() * dt;
            }
            re.hypot(im)
        };
        let peak = spectrum(5e6);
        let edge = spectrum(5e6 + 0.5 * 0.77 * 5e6);
        assert!((edge / peak - 0.5).abs() < 5e-3, "ratio {}", edge / peak);
    }

    #[test]
    fn phantom_layout() {
        let cfg = standard_phantom();
        assert_eq!(cfg.absorbers.len(), 30);
        let depths = phantom_depths();
        assert!((depths[0] - 0.025).abs() < 1e-15);
        assert!((depths[9] - 0.070).abs() < 1e-15);
        for z in depths {
            let row = cfg.absorbers.iter().filter(|a| (a.z() - z).abs() < 1e-12).count();
            assert_eq!(row, 3);
        }
        assert_eq!(cfg.geometry.num_elements(), 128);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn on_axis_arrival_time() {
        let g = standard_geometry();
        let cfg = SimConfig::new(vec![PointAbsorber::new(g.element_x()[64], 0.025, 1.0).unwrap()], g, 2000);
        let frame = simulate_rf(&cfg).unwrap();
        let expected = 0.025 / 1540.0 * 50e6;
        let k = peak_index(frame.channel(64));
        assert!((k as f64 - expected).abs() <= 0.5, "peak at {k}, expected {expected}");
    }

    fn integer_geometry() -> ArrayGeometry {
        validate_geometry(GeometryParams::linear(4, 1e-3, 5e6, 0.77, 40e6, 1000.0)).unwrap()
    }

    #[test]
    fn superposition_and_spreading() {
        let g = integer_geometry();
        let x0 = g.element_x()[0];
        let one = SimConfig::new(vec![PointAbsorber::new(x0, 0.025, 1.0).unwrap()], g.clone(), 3000);
        let two = SimConfig::new(vec![PointAbsorber::new(x0, 0.025, 2.0).unwrap()], g.clone(), 3000);
        let a = simulate_rf(&one).unwrap();
        let b = simulate_rf(&two).unwrap();
        for (u, v) in a.channel(0).iter().zip(b.channel(0)) {
            assert_eq!(2.0 * u, *v);
        }
        // Arrivals at samples 1000 and 2000 fall exactly on the grid.
        let far = SimConfig::new(vec![PointAbsorber::new(x0, 0.050, 1.0).unwrap()], g, 3000);
        let c = simulate_rf(&far).unwrap();
        let near_peak = a.channel(0)[1000];
        let far_peak = c.channel(0)[2000];
        assert!((near_peak - 40.0).abs() < 1e-4);
        assert!((far_peak / near_peak - 0.5).abs() < 1e-6);
    }

    #[test]
    fn rejects_short_records() {
        let g = integer_geometry();
        let cfg = SimConfig::new(vec![PointAbsorber::new(0.0, 0.025, 1.0).unwrap()], g, 1000);
        assert!(matches!(simulate_rf(&cfg), Err(Error::InvalidConfig { .. })));
    }

    #[test]
    fn noise_is_deterministic_and_infinite_snr_is_noop() {
        let frame = RfFrame::new((0..400).map(|i| (i as f32 * 0.1).sin()).collect(), 4, 100, 50e6).unwrap();
        let a = add_noise(&frame, 20.0, 42).unwrap();
        let b = add_noise(&frame, 20.0, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, add_noise(&frame, 20.0, 43).unwrap());
        assert_eq!(add_noise(&frame, f64::INFINITY, 1).unwrap(), frame);
    }

    #[test]
    fn peak_reference_noise_level() {
        let frame = RfFrame::new([0.0, 10.0, 0.0, 0.0].repeat(50_000), 1, 200_000, 50e6).unwrap();
        let noisy = add_noise_with_reference(&frame, 40.0, 3, NoiseReference::PeakPower).unwrap();
        let noise_power = noisy
            .samples()
            .iter()
            .zip(frame.samples())
            .map(|(&n, &s)| (f64::from(n) - f64::from(s)).powi(2))
            .sum::<f64>()
            / 200_000.0;
        let measured = 10.0 * (100.0 / noise_power).log10();
        assert!((measured - 40.0).abs() < 0.1, "{measured}");
    }
}
