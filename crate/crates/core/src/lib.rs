//! Multipath channel synthesis from image sources, and complex-valued
//! networks (a model-based hypernetwork over a fixed Fourier-feature
//! dictionary plus three baselines) that learn the location-to-channel map.

pub mod autodiff;
pub mod binio;
pub mod dataset;
pub mod error;
pub mod models;
pub mod par;
pub mod scene;
pub mod train;

pub use dataset::{ChannelDataset, ChannelSample, DatasetKind};
pub use error::{Error, Result};
pub use models::{build_model, count_parameters, Model, ModelKind, ModelSpec};
pub use scene::{Extent, Point, Scene, SceneConfig, Source};
pub use train::{evaluate, nmse_db, train, EvalReport, SweepConfig, TrainConfig};
