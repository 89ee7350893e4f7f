//! Differentiable vector-glyph engine.
//!
//! Glyphs are sequences of relative draw commands ([`glyph`]); they are
//! rasterized with a signed-distance prefilter whose L1 image loss has
//! analytic gradients ([`raster`]); command sequences are sampled from
//! per-coordinate Gaussian mixtures ([`mdn`]); and sampled candidates are
//! closed, refined against a target raster, ranked and cleaned up
//! ([`refine`]). [`dataset`] and [`eval`] hold corpus tooling, metrics and the
//! self-test harness.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod exec;
pub mod geom;
pub mod glyph;
pub mod mdn;
pub mod raster;
pub mod refine;

pub use error::{Error, Result};
pub use exec::Exec;
pub use geom::Point;
pub use glyph::{Command, CommandType, Font, Glyph, PathSet};
pub use raster::{CoverageImage, RasterConfig};
