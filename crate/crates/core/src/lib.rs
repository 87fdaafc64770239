//! Detection of width-reduced violin sound boards from 3D surface meshes.
//!
//! Pipeline: mesh → elevation map → contour-line fits → engineered features
//! or resampled maps → SVM / decision tree under nested leave-one-out.

pub mod classifiers;
pub mod cli;
pub mod contours;
pub mod elevation;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod label;
pub mod mesh_io;
pub mod synthgen;

pub use error::{Error, Result};
pub use label::Label;
