//! Comparison harness: beamform one frame with every method and tabulate
//! SNR, mainlobe width and sidelobe level per target, plus lateral
//! profiles at selected depths.

use std::fmt::Write as _;

use crate::error::Result;
use crate::imaging::{envelope, lateral_profile, reconstruct_with, Method, ReconstructOptions};
use crate::metrics::{fwhm_mm, peak_sidelobe_db, snr_db, RegionSpec};
use crate::model::{ArrayGeometry, BeamformedImage, ImagingGrid, MvConfig, RfFrame};
use crate::simulator::{phantom_depths, PHANTOM_LATERAL_POSITIONS};

/// Field of view used for the phantom: ±20 mm laterally, 20 to 75 mm deep.
pub fn standard_grid(spacing: f64) -> Result<ImagingGrid> {
    ImagingGrid::with_spacing(-20e-3, 20e-3, 20e-3, 75e-3, spacing, spacing)
}

/// The on-axis column of phantom absorbers.
pub fn default_targets() -> Vec<(f64, f64)> {
    phantom_depths().into_iter().map(|z| (0.0, z)).collect()
}

/// Every absorber of the phantom.
pub fn phantom_targets() -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for z in phantom_depths() {
        for x in PHANTOM_LATERAL_POSITIONS {
            out.push((x, z));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSettings {
    pub grid: ImagingGrid,
    pub mv: MvConfig,
    pub options: ReconstructOptions,
    /// Beamform with the sound speed multiplied by this factor.
    pub sound_speed_scale: f64,
    /// Lateral center of the noise box used for SNR.
    pub noise_x: f64,
    /// Depths at which full lateral profiles are exported.
    pub profile_depths: Vec<f64>,
    /// Width and sidelobe level are measured within ±this of the target.
    pub profile_half_window: f64,
}

impl ReportSettings {
    pub fn new(grid: ImagingGrid, num_elements: usize) -> Self {
        Self {
            grid,
            mv: MvConfig::default_for(num_elements),
            options: ReconstructOptions::default(),
            sound_speed_scale: 1.0,
            noise_x: 14.5e-3,
            profile_depths: vec![30e-3, 45e-3],
            profile_half_window: 4e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub method: Method,
    pub x_mm: f64,
    pub depth_mm: f64,
    pub snr_db: f64,
    pub fwhm_mm: f64,
    pub psl_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub method: Method,
    pub depth_mm: f64,
    pub x_mm: f64,
    pub db: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub metrics: Vec<MetricRow>,
    pub profiles: Vec<ProfileRow>,
}

/// Envelope image of `frame` for one method under `settings`.
pub fn envelope_image(
    frame: &RfFrame,
    geometry: &ArrayGeometry,
    method: Method,
    settings: &ReportSettings,
) -> Result<BeamformedImage> {
    let g = geometry.with_sound_speed(geometry.sound_speed() * settings.sound_speed_scale)?;
    envelope(&reconstruct_with(frame, &g, &settings.grid, method, &settings.mv, settings.options)?)
}

/// Metrics for one target; a metric that cannot be measured is NaN.
pub fn target_metrics(image: &BeamformedImage, method: Method, x: f64, z: f64, settings: &ReportSettings) -> Result<MetricRow> {
    let spec = RegionSpec::around_target(x, z, settings.noise_x, image.grid())?;
    let snr = snr_db(image, &spec).unwrap_or(f64::NAN);
    let half = settings.profile_half_window;
    let local = lateral_profile(image, z).and_then(|p| p.window(x - half, x + half));
    let (fwhm, psl) = match local {
        Ok(p) => (
            fwhm_mm(&p).unwrap_or(f64::NAN),
            peak_sidelobe_db(&p).unwrap_or(f64::NAN),
        ),
        Err(_) => (f64::NAN, f64::NAN),
    };
    Ok(MetricRow {
        method,
        x_mm: x * 1e3,
        depth_mm: z * 1e3,
        snr_db: snr,
        fwhm_mm: fwhm,
        psl_db: psl,
    })
}

/// Runs all four methods. Rows come out sorted by depth, then method name,
/// then lateral position.
pub fn run_report(
    frame: &RfFrame,
    geometry: &ArrayGeometry,
    targets: &[(f64, f64)],
    settings: &ReportSettings,
) -> Result<Report> {
    let mut report = Report::default();
    for method in Method::ALL {
        let image = envelope_image(frame, geometry, method, settings)?;
        for &(x, z) in targets {
            report.metrics.push(target_metrics(&image, method, x, z, settings)?);
        }
        for &depth in &settings.profile_depths {
            let p = lateral_profile(&image, depth)?;
            report.profiles.extend(p.x.iter().zip(&p.db).map(|(&x, &db)| ProfileRow {
                method,
                depth_mm: depth * 1e3,
                x_mm: x * 1e3,
                db,
            }));
        }
    }
    report.metrics.sort_by(|a, b| {
        a.depth_mm
            .total_cmp(&b.depth_mm)
            .then_with(|| a.method.name().cmp(b.method.name()))
            .then_with(|| a.x_mm.total_cmp(&b.x_mm))
    });
    report.profiles.sort_by(|a, b| {
        a.depth_mm
            .total_cmp(&b.depth_mm)
            .then_with(|| a.method.name().cmp(b.method.name()))
            .then_with(|| a.x_mm.total_cmp(&b.x_mm))
    });
    Ok(report)
}

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut s = String::from("method,depth_mm,snr_db,fwhm_mm,psl_db\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.3},{:.6},{:.6},{:.6}", r.method, r.depth_mm, r.snr_db, r.fwhm_mm, r.psl_db);
    }
    s
}

pub fn profiles_csv(rows: &[ProfileRow]) -> String {
    let mut s = String::from("method,depth_mm,x_mm,db\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.3},{:.6},{:.6}", r.method, r.depth_mm, r.x_mm, r.db);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{standard_geometry, simulate_rf, PointAbsorber, SimConfig};

    #[test]
    fn standard_grid_covers_the_phantom() {
        let g = standard_grid(1e-4).unwrap();
        assert_eq!((g.nx(), g.nz()), (401, 551));
        for (x, z) in phantom_targets() {
            assert!(x > g.x_min() && x < g.x_max() && z > g.z_min() && z < g.z_max());
        }
        assert_eq!(phantom_targets().len(), 30);
        assert_eq!(default_targets().len(), 10);
    }

    #[test]
    fn small_report_is_sorted_and_complete() {
        let g = standard_geometry();
        let mut cfg = SimConfig::new(
            vec![PointAbsorber::new(0.0, 0.025, 1.0).unwrap(), PointAbsorber::new(0.0, 0.03, 1.0).unwrap()],
            g.clone(),
            2200,
        );
        cfg.noise_snr_db = None;
        let frame = simulate_rf(&cfg).unwrap();
        let grid = ImagingGrid::with_spacing(-12e-3, 12e-3, 0.0225, 0.0325, 2e-4, 2.5e-4).unwrap();
        let mut settings = ReportSettings::new(grid, g.num_elements());
        settings.mv = MvConfig::new(16, 1, 1.0 / 1600.0).unwrap();
        settings.noise_x = 7e-3;
        settings.profile_half_window = 2e-3;
        settings.profile_depths = vec![0.03];
        let report = run_report(&frame, &g, &[(0.0, 0.03), (0.0, 0.025)], &settings).unwrap();
        assert_eq!(report.metrics.len(), 8);
        let order: Vec<(f64, &str)> = report.metrics.iter().map(|r| (r.depth_mm, r.method.name())).collect();
        let mut sorted = order.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
        assert_eq!(order, sorted);
        assert_eq!(report.metrics[0].depth_mm, 25.0);
        assert!(report.metrics.iter().all(|r| r.snr_db.is_finite() && r.fwhm_mm > 0.0));
        assert_eq!(report.profiles.len(), 4 * grid.nx());
        let csv = metrics_csv(&report.metrics);
        assert!(csv.starts_with("method,depth_mm,snr_db,fwhm_mm,psl_db\ndas,25.000,"));
        assert_eq!(csv.lines().count(), 9);
    }
}
