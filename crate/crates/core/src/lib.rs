//! Allocation-only core of the tubeforge toolkit.
//!
//! Everything in this crate is a pure function over in-memory values: box
//! geometry, fixed-length volume segmentation and labeling, IoU clustering,
//! crop/resize of RGB frames, background compositing, tensor container
//! codecs and binary classification metrics. File and stream handling lives
//! in the `tubeforge` crate.

#![no_std]

extern crate alloc;

pub mod augment;
pub mod cluster;
pub mod container;
mod error;
pub mod geometry;
pub mod image;
pub mod label;
pub mod metrics;
pub mod tube;
pub mod volume;

pub use error::Error;
pub use geometry::{BoundingBox, Detection};
pub use image::{GrayImage, RgbImage};
pub use label::{Label, LabelVector};
