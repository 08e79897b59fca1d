use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pabeam::delay::Interpolation;
use pabeam::imaging::{bandpass, envelope, log_compress, reconstruct_with, Method, ReconstructOptions};
use pabeam::io::config::{parse_targets, targets_to_text, SimFile};
use pabeam::io::image::{encode_matrix, encode_pgm16};
use pabeam::io::rf::{read_rf, write_rf, RfMetadata};
use pabeam::io::write_atomic;
use pabeam::report::{default_targets, metrics_csv, standard_grid, profiles_csv, run_report, ReportSettings};
use pabeam::simulator::{standard_phantom, simulate};
use pabeam::{ArrayGeometry, Error, ImagingGrid, MvConfig, Result, RfFrame};

/// Photoacoustic linear-array beamforming: simulate, reconstruct, compare.
#[derive(Parser)]
#[command(name = "pabeam", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the standard 30-absorber phantom as a simulation config.
    Phantom {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the on-axis evaluation targets here.
        #[arg(long)]
        targets: Option<PathBuf>,
    },
    /// Simulate an RF frame from a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed given in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Reconstruct a log-compressed image with one method.
    Beamform {
        #[arg(long)]
        rf: PathBuf,
        #[arg(long)]
        method: Method,
        /// Output base path; writes BASE.pgm, BASE.txt and BASE.raw.txt.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 60.0)]
        dynamic_range_db: f64,
        /// Band-pass the beamformed columns around this frequency (MHz,
        /// bandwidth scaled by the array's fractional bandwidth) before
        /// envelope detection.
        #[arg(long)]
        bandpass_mhz: Option<f64>,
        /// Accepted for uniformity; beamforming is deterministic.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        beam: BeamArgs,
    },
    /// Run all methods and write per-target metrics as CSV.
    Report {
        #[arg(long)]
        rf: PathBuf,
        /// File of `x_mm, z_mm` lines; defaults to the on-axis phantom targets.
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Lateral profiles at 30 and 45 mm.
        #[arg(long)]
        profiles_out: Option<PathBuf>,
        /// Lateral center of the SNR noise box in mm.
        #[arg(long, default_value_t = 14.5)]
        noise_x_mm: f64,
        #[command(flatten)]
        beam: BeamArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum InterpArg {
    Linear,
    Nearest,
}

#[derive(Args)]
struct BeamArgs {
    /// Subarray length L (default M/2).
    #[arg(long)]
    subarray_l: Option<usize>,
    /// Temporal half-window K.
    #[arg(long, default_value_t = 5)]
    temporal_k: usize,
    /// Diagonal loading factor (default 1/(100 L)).
    #[arg(long)]
    loading_delta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    sound_speed_scale: f64,
    /// `x_min,x_max,z_min,z_max,nx,nz` with lengths in mm.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, value_enum, default_value_t = InterpArg::Linear)]
    interp: InterpArg,
    /// Estimate MVB-DMAS weights from raw rather than sign-rooted samples.
    #[arg(long)]
    mvb_raw: bool,
}

impl BeamArgs {
    fn mv_config(&self, m: usize) -> Result<MvConfig> {
        let l = self.subarray_l.unwrap_or(m / 2);
        let delta = self.loading_delta.unwrap_or(1.0 / (100.0 * l.max(1) as f64));
        let cfg = MvConfig::new(l, self.temporal_k, delta)?;
        cfg.check_for(m)?;
        Ok(cfg)
    }

    fn grid(&self) -> Result<ImagingGrid> {
        match &self.grid {
            None => standard_grid(1e-4),
            Some(spec) => parse_grid(spec),
        }
    }

    fn options(&self) -> ReconstructOptions {
        ReconstructOptions {
            interpolation: match self.interp {
                InterpArg::Linear => Interpolation::Linear,
                InterpArg::Nearest => Interpolation::Nearest,
            },
            mvb_sign_root: !self.mvb_raw,
        }
    }

    fn geometry(&self, g: &ArrayGeometry) -> Result<ArrayGeometry> {
        if !(self.sound_speed_scale.is_finite() && self.sound_speed_scale > 0.0) {
            return Err(Error::InvalidConfig {
                field: "sound_speed_scale".into(),
                reason: format!("must be positive, got {}", self.sound_speed_scale),
            });
        }
        g.with_sound_speed(g.sound_speed() * self.sound_speed_scale)
    }
}

fn parse_grid(spec: &str) -> Result<ImagingGrid> {
    let bad = || Error::InvalidConfig {
        field: "grid".into(),
        reason: format!("expected x_min,x_max,z_min,z_max,nx,nz (mm), got '{spec}'"),
    };
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        return Err(bad());
    }
    let mm: Vec<f64> = parts[..4]
        .iter()
        .map(|p| p.parse::<f64>().map(|v| v * 1e-3))
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    let nx = parts[4].parse().map_err(|_| bad())?;
    let nz = parts[5].parse().map_err(|_| bad())?;
    ImagingGrid::new(mm[0], mm[1], mm[2], mm[3], nx, nz)
}

fn load_frame(path: &Path) -> Result<(RfFrame, ArrayGeometry)> {
    let (frame, header) = read_rf(path)?;
    let meta = RfMetadata::read(path)?;
    let g = meta.geometry;
    if header.num_channels as usize != g.num_elements()
        || header.sampling_frequency != g.sampling_frequency()
        || header.sound_speed != g.sound_speed()
    {
        return Err(Error::Format(format!("{} disagrees with its metadata sidecar", path.display())));
    }
    Ok((frame, g))
}

fn with_extension(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Phantom { out, seed, targets } => {
            let file = SimFile { sim: standard_phantom(), seed };
            write_atomic(&out, file.to_text().as_bytes())?;
            if let Some(t) = targets {
                write_atomic(&t, targets_to_text(&default_targets()).as_bytes())?;
            }
        }
        Command::Simulate { config, out, seed } => {
            let file = SimFile::from_text(&std::fs::read_to_string(&config)?)?;
            let seed = seed.unwrap_or(file.seed);
            let frame = simulate(&file.sim, seed)?;
            let g = &file.sim.geometry;
            write_rf(&out, &frame, g.sound_speed())?;
            RfMetadata {
                geometry: g.clone(),
                n_samples: file.sim.n_samples,
                seed,
                noise_snr_db: file.sim.noise_snr_db,
                noise_reference: file.sim.noise_reference,
            }
            .write(&out)?;
        }
        Command::Beamform { rf, method, out, dynamic_range_db, bandpass_mhz, seed: _, beam } => {
            let (frame, g) = load_frame(&rf)?;
            let cfg = beam.mv_config(g.num_elements())?;
            let bg = beam.geometry(&g)?;
            let raw = reconstruct_with(&frame, &bg, &beam.grid()?, method, &cfg, beam.options())?;
            let filtered = match bandpass_mhz {
                None => raw.clone(),
                Some(mhz) => bandpass(&raw, mhz * 1e6, mhz * 1e6 * g.fractional_bandwidth(), bg.sound_speed())?,
            };
            let img = log_compress(&envelope(&filtered)?, dynamic_range_db)?;
            write_atomic(&with_extension(&out, ".pgm"), &encode_pgm16(&img)?)?;
            write_atomic(&with_extension(&out, ".txt"), encode_matrix(&img).as_bytes())?;
            write_atomic(&with_extension(&out, ".raw.txt"), encode_matrix(&raw).as_bytes())?;
        }
        Command::Report { rf, targets, out, profiles_out, noise_x_mm, beam } => {
            let (frame, g) = load_frame(&rf)?;
            let targets = match targets {
                Some(p) => parse_targets(&std::fs::read_to_string(p)?)?,
                None => default_targets(),
            };
            let mut settings = ReportSettings::new(beam.grid()?, g.num_elements());
            settings.mv = beam.mv_config(g.num_elements())?;
            settings.options = beam.options();
            settings.sound_speed_scale = beam.sound_speed_scale;
            // Validates the scale before the expensive part starts.
            beam.geometry(&g)?;
            settings.noise_x = noise_x_mm * 1e-3;
            let report = run_report(&frame, &g, &targets, &settings)?;
            write_atomic(&out, metrics_csv(&report.metrics).as_bytes())?;
            if let Some(p) = profiles_out {
                write_atomic(&p, profiles_csv(&report.profiles).as_bytes())?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprint!(": {s}");
                source = s.source();
            }
            eprintln!();
            ExitCode::FAILURE
        }
    }
}
