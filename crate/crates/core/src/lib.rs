//! Smoothing of continuous sections of fibre bundles over manifolds with corners.
//!
//! A continuous section is replaced, inside a prescribed open set and within a
//! tube around it, by one that is smooth near a given closed set. The section is
//! left untouched where it already was smooth and outside the open set, and a
//! homotopy between the two is produced alongside.

pub mod bundle;
pub mod error;
pub mod fields;
pub mod geom;
pub mod homotopy;
pub mod manifold;
pub mod smoothing;
pub mod verify;

pub use error::{Error, Result};
