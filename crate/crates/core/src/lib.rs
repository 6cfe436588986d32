//! Part-based 3D shape retrieval.
//!
//! Shapes are split into labeled parts, every part is described by HoG
//! features of silhouettes rendered from 20 viewpoints, and each part gets
//! its own low-dimensional manifold built by Sammon mapping. Blend queries
//! then pick parts from different sources and return the indexed shapes
//! whose parts sit closest to the picks across all the part manifolds.

pub mod dataset;
pub mod descriptor;
pub mod error;
pub mod geometry;
pub mod index;
pub mod manifold;
pub mod raster;
pub mod retrieval;

pub use error::{Error, Result};
