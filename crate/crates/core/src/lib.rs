//! Attentive BiGRU sentence-pair similarity scoring.
//!
//! Two sentences are read by a bidirectional GRU with attention pooling,
//! combined with eight surface features, and decoded as the expectation of a
//! six-class distribution over the 0–5 similarity scale. Training supports
//! NLL, MSE, KL-divergence and (negated) Pearson-correlation losses.
//!
//! All numeric code is generic over [`numkit::Scalar`] (`f32` for training,
//! `f64` for gradient checks); the aliases below name the common choices.

pub mod bundle;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod features;
pub mod gradcheck;
pub mod model;
pub mod numkit;
pub mod objective;
pub mod params;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};

pub type Matrix32 = numkit::Matrix<f32>;
pub type Matrix64 = numkit::Matrix<f64>;
pub type Model32 = model::Model<f32>;
pub type Model64 = model::Model<f64>;
pub type Bundle32 = bundle::ModelBundle<f32>;
pub type Resources32 = trainer::Resources<f32>;
pub type TrainOutcome32 = trainer::TrainOutcome<f32>;
