//! Region-level classification of tissue images from ordered patch
//! sequences.
//!
//! The pipeline runs annotated regions through orientation normalization
//! ([`annotation`]), cuts them into patches in a chosen scanning order
//! ([`scan`]), turns each patch into a feature vector ([`features`]) and
//! classifies the resulting variable-length sequence with a bidirectional
//! LSTM ([`bilstm`]). [`eval`] holds metrics and cross-validation and
//! [`flops`] the closed-form parameter count of the classifier head.

pub mod annotation;
pub mod bilstm;
pub mod eval;
pub mod features;
pub mod flops;
pub mod raster;
pub mod scan;
pub mod synthetic;

pub use annotation::{BoundingBox, RegionMask, RegionRecord};
pub use bilstm::{BiLstmModel, ModelConfig, TrainConfig};
pub use features::FeatureSequence;
pub use scan::{GridDims, ScanOrder, ScanStrategy};
