//! Differentiable polygon losses and polygon-mask evaluation.
//!
//! The crate covers the geometry kernels ([`geom`], [`clip`]), the vertex
//! encodings a polygon head regresses ([`repr`]), forward-mode gradients
//! ([`dual`], [`diff`]), the losses themselves ([`loss`]), ray-cast
//! ground-truth polygons ([`gt`]) and a COCO-style evaluation harness
//! ([`raster`], [`eval`]).

pub mod batch;
pub mod bench;
pub mod clip;
pub mod diff;
pub mod dual;
pub mod error;
pub mod eval;
pub mod geom;
pub mod gt;
pub mod loss;
pub mod raster;
pub mod records;
pub mod repr;
pub mod synth;

pub use error::{PolyError, Result};
