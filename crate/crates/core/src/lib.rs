//! Convert top-down pedestrian trajectory datasets into per-agent
//! first-person-view perception data under increasingly realistic
//! conditions, and evaluate trajectory predictors under each condition.
//!
//! The pipeline has four dataset variants per fold:
//!
//! - `BEV` — perfect top-down information, full-length agents only.
//! - `FPV_GT` — what a perfect egocentric detector/tracker would see:
//!   field-of-view and occlusion filtering via a pinhole camera model.
//! - `FPV_NOISY` — `FPV_GT` plus parametric tracklet/box drops, identity
//!   switches, and positional noise.
//! - `FPV_DET` — observations replaced by the output of a synthetic
//!   detector feeding a Kalman tracker with BEV-IoU association.
//!
//! Modules mirror the pipeline stages: [`trajio`] parses raw trajectory
//! files, [`egocam`] computes per-ego visibility, [`scenegen`] builds
//! sliding-window scenes, [`degrade`] and [`perceive`] produce the
//! imperfect variants, [`predict`] hosts the baseline predictors and the
//! numeric operators, and [`metrics`] scores everything.

pub mod config;
pub mod degrade;
pub mod egocam;
pub mod error;
pub mod manifest;
pub mod metrics;
pub mod perceive;
pub mod pipeline;
pub mod predict;
pub mod rngkey;
pub mod scenegen;
pub mod synth;
pub mod trajio;

pub use config::RunConfig;
pub use error::{ConfigError, DataError, Error, ParseError};
