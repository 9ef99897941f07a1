//! No-reference underwater image quality assessment and detection evaluation.
//!
//! The crate is organized around the processing pipeline:
//!
//! * [`raster`]: decoding, grayscale/CIELAB conversion, block tiling
//! * [`metrics`]: UIQM, UCIQE, CCF and discrete entropy
//! * [`qindex`]: robust outlier replacement and the fused Q-index
//! * [`deteval`]: IoU matching, COCO-style mAP and annotation-audit mining
//! * [`report`]: per-model summaries, correlation and CSV/JSON export

pub mod deteval;
pub mod error;
pub mod metrics;
pub mod qindex;
pub mod raster;
pub mod report;
pub mod stats;

pub use error::{Error, Result};
pub use metrics::{metric_vector, MetricConfig, MetricKind, MetricVector};
pub use qindex::{compute_qindex, MetricTable, QIndexTable};
pub use raster::{decode_image, ImageBuffer};
