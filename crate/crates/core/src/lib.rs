//! Multi-verb action representations.
//!
//! Crowd annotations are aggregated into soft verb scores, a small feedforward
//! regressor maps precomputed video features onto the verb space, and the
//! resulting score vectors are evaluated for recognition (top-k multi-label
//! accuracy) and retrieval (video-to-text, text-to-video, video-to-video).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! bottom of this file fix the scalar to `f64`, which is what the CLI uses.

pub mod annotations;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod model;
pub mod retrieval;
pub mod scalar;
pub mod vocab;

pub use annotations::{AnnotationSet, HardLabel, LabelBundle, SoftLabel};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use vocab::{VerbType, VerbVocabulary, VnClassList};

pub type Mlp = model::Mlp<f64>;
pub type Prediction = model::Prediction<f64>;
pub type FeatureVector = model::FeatureVector<f64>;
pub type Dataset = dataset::Dataset<f64>;
pub type SyntheticCorpus = dataset::SyntheticCorpus<f64>;
pub type VerbSpaceIndex = retrieval::VerbSpaceIndex<f64>;
pub type AccuracyReport = metrics::AccuracyReport<f64>;
pub type SweepCurve = metrics::SweepCurve<f64>;

pub type Mlp32 = model::Mlp<f32>;
pub type VerbSpaceIndex32 = retrieval::VerbSpaceIndex<f32>;
