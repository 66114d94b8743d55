//! Superpixel-guided soft labels for segmentation training.
//!
//! The pipeline turns a hard annotation into per-class soft label planes:
//!
//! 1. [`slic`] over-segments the image into superpixel blocks.
//! 2. [`grid::one_hot_encode`] splits the annotation into binary planes.
//! 3. [`soften`] keeps blocks that lie entirely inside or outside a class
//!    and, for blocks straddling a class boundary, converts the signed
//!    distance from [`sdt`] into a probability.
//!
//! [`losses`] provides the training objective (cross-entropy, Dice and KL
//! against the soft labels, with analytic gradients), [`metrics`] the
//! evaluation measures, and [`toylab`] a small synthetic experiment that
//! trains a per-pixel linear model with and without soft labels.

pub mod cli;
pub mod config;
pub mod error;
pub mod grid;
pub mod losses;
pub mod metrics;
pub mod pgm;
pub mod sdt;
pub mod slic;
pub mod soften;
pub mod toylab;
pub mod voxfile;

pub use error::{Error, Result};
pub use grid::{class_frequencies, one_hot_encode, ClassStack, Grid, LabelMap, Mask, OneHotStack, Shape};
pub use slic::{slic_segment, SlicParams, SuperpixelMap};
pub use soften::{dist_to_prob, gaussian_soften, soften, SoftLabelStack};
pub use voxfile::VoxFile;
