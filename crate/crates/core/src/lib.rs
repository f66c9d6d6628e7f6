//! Shadow-object association toolkit.
//!
//! Pairs predicted shadow and object instances with predicted associations,
//! scores the result with the Shadow-Object Average Precision (SOAP) metric,
//! evaluates light directions, and generates seeded synthetic scenes so the
//! whole pipeline can be verified end to end without a trained detector.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`] — axis-aligned box arithmetic (IoU, merge, distances).
//! * [`mask`] — run-length-encoded binary masks and their set algebra.
//! * [`light`] — light angles, the angular smooth-L1 penalty, shadow projection.
//! * [`model`] — file formats: ground truth, predictions, dataset statistics.
//! * [`association`] — pairing detections into shadow-object associations.
//! * [`soap`] — the SOAP detection metric over box and mask variants.
//! * [`synth`] — seeded synthetic scene generation for end-to-end checks.
//! * [`render`] — SVG overlays of scenes and predictions.
//! * [`cli`] — the `umbra` command-line front end.

use std::path::PathBuf;

use thiserror::Error;

pub mod association;
pub mod cli;
pub mod geometry;
pub mod light;
pub mod mask;
pub mod model;
pub mod render;
pub mod soap;
pub mod synth;

/// Unified error type for every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),

    #[error(transparent)]
    Mask(#[from] mask::MaskError),

    #[error(transparent)]
    Light(#[from] light::LightError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },

    /// A loaded file or argument violates a documented invariant. The message
    /// carries the offending ids (image, pair, index) where applicable.
    #[error("validation: {0}")]
    Validation(String),

    #[error("image {image_id}: object placement failed after {attempts} attempts (scene spec too dense)")]
    Placement { image_id: u64, attempts: u32 },

    #[error("ground truth contains no pairs")]
    EmptyGroundTruth,

    #[error("dataset contains no images")]
    EmptyDataset,
}

impl Error {
    /// Stable machine-readable tag for the error category, used by the CLI's
    /// JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Geometry(_) => "geometry",
            Error::Mask(_) => "mask",
            Error::Light(_) => "light",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
            Error::Validation(_) => "validation",
            Error::Placement { .. } => "placement",
            Error::EmptyGroundTruth => "empty_ground_truth",
            Error::EmptyDataset => "empty_dataset",
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
