//! Single-shot dynamic tomography of binary objects.
//!
//! The main method parameterizes a spatiotemporal level-set function by a
//! truncated 3-D DCT and fits its coefficients to one projection per frame
//! (see [`recon::dss`]). Binned static TV, compressed shape sensing and
//! Box-ℓ2 reconstructors are provided for comparison, together with a
//! matched parallel-beam projector, phantoms and quality metrics.

pub mod error;
pub mod levelset;
pub mod metrics;
pub mod phantoms;
pub mod projector;
pub mod recon;
pub mod transforms;
pub mod volume;

pub use error::{Error, Result};
pub use levelset::LevelSetState;
pub use metrics::MetricReport;
pub use projector::{AngleSchedule, DetectorArray, ImageGrid, Sinogram};
pub use recon::baselines::BaselineConfig;
pub use recon::dss::{ExtensionConfig, ReconConfig, ShapeResult};
pub use recon::trace::TraceRow;
pub use transforms::{DctCoeffs, DctDims, TruncationMask};
pub use volume::ImageSequence;
