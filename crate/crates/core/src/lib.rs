//! Photoacoustic beamforming for linear transducer arrays.
//!
//! The crate reconstructs images from per-element RF channel data with four
//! beamformers:
//!
//! - **DAS**: delay-and-sum.
//! - **DMAS**: delay-multiply-and-sum with the signed square-root correction.
//! - **MV**: minimum variance (Capon) with spatial smoothing, temporal
//!   averaging and diagonal loading.
//! - **MVB-DMAS**: the DMAS expansion with every inner sum replaced by an
//!   MV-weighted sum.
//!
//! Around the kernels sit an analytic point-absorber simulator, the image
//! chain (envelope detection, log compression, lateral profiles), quality
//! metrics and the file formats used by the `pabeam` command-line tool.
//!
//! ```text
//! SimConfig ──simulate_rf──▶ RfFrame ──reconstruct──▶ BeamformedImage (raw)
//!                                                        │ envelope
//!                                                        ▼
//!                           metrics ◀── lateral_profile / log_compress
//! ```

pub mod beamformers;
pub mod delay;
pub mod error;
pub mod imaging;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod report;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{
    validate_geometry, ArrayGeometry, BeamformedImage, GeometryParams, ImagingGrid, MvConfig,
    RfFrame, Stage,
};
