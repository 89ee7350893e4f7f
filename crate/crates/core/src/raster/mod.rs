//! Differentiable rasterization of closed outlines.
//!
//! [`render`] evaluates a logistic prefilter of the signed distance to the
//! nearest outline at every pixel centre, with the inside determined by the
//! nonzero winding rule. [`render_oracle`] is an independent box-filtered
//! supersampler over the exact point-in-fill test, and
//! [`l1_loss_and_gradients`] differentiates the mean absolute error of the
//! prefilter render with respect to every command argument.

mod distance;
mod grad;
mod pgm;
mod render;
mod scene;

use serde::{Deserialize, Serialize};

use crate::exec::Exec;

pub use distance::{signed_distance_winding, CUBIC_SEEDS, NEWTON_ITERS};
pub(crate) use grad::{check_target, evaluate_commands};
pub use grad::{l1_loss_and_gradients, slot_gradients_to_relative, GradientBuffer, SlotLoss};
pub use pgm::{decode_pgm, encode_pgm};
pub use render::{render, render_commands, render_oracle};

/// Logistic scales beyond which the prefilter is treated as fully saturated.
pub const PREFILTER_CUTOFF: f64 = 10.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RasterConfig {
    /// Output width and height in pixels.
    pub resolution: usize,
    /// Width of the prefilter, in pixels: the standard deviation of the
    /// logistic kernel whose cumulative distribution maps signed distance to
    /// coverage.
    pub prefilter_sigma: f64,
    /// Samples per pixel side used by [`render_oracle`].
    pub oracle_supersample: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for RasterConfig {
    fn default() -> Self {
        RasterConfig {
            resolution: 64,
            prefilter_sigma: 0.7,
            oracle_supersample: 16,
            exec: Exec::default(),
        }
    }
}

impl RasterConfig {
    pub fn with_resolution(resolution: usize) -> Self {
        RasterConfig {
            resolution,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.resolution < 8 {
            return Err(crate::Error::Config(format!(
                "resolution {} below 8",
                self.resolution
            )));
        }
        if !(self.prefilter_sigma > 0.0) || !self.prefilter_sigma.is_finite() {
            return Err(crate::Error::Config(format!(
                "prefilter_sigma {} must be positive",
                self.prefilter_sigma
            )));
        }
        if self.oracle_supersample < 1 {
            return Err(crate::Error::Config(
                "oracle_supersample must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Row-major grayscale coverage in `[0, 1]`, y pointing down. EM point
/// `(x, y)` lands at pixel coordinates `(x * width, (1 - y) * height)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl CoverageImage {
    pub fn new(width: usize, height: usize) -> Self {
        CoverageImage {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn same_size(&self, other: &CoverageImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Mean absolute per-pixel difference.
    pub fn mean_abs_diff(&self, other: &CoverageImage) -> f64 {
        assert!(self.same_size(other), "image sizes differ");
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .sum();
        sum / self.data.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Values rounded to the 8-bit grid used by PGM files.
    pub fn quantized(&self) -> CoverageImage {
        CoverageImage {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
                .collect(),
        }
    }

    /// Bicubic (Catmull-Rom) resampling to `width x height`.
    pub fn resize_bicubic(&self, width: usize, height: usize) -> CoverageImage {
        fn kernel(x: f64) -> f64 {
            let a = -0.5;
            let x = x.abs();
            if x < 1.0 {
                (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0
            } else if x < 2.0 {
                a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
            } else {
                0.0
            }
        }
        let mut out = CoverageImage::new(width, height);
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        for j in 0..height {
            let fy = (j as f64 + 0.5) * sy - 0.5;
            let y0 = fy.floor() as isize;
            for i in 0..width {
                let fx = (i as f64 + 0.5) * sx - 0.5;
                let x0 = fx.floor() as isize;
                let mut acc = 0.0;
                for m in -1..=2 {
                    let wy = kernel(fy - (y0 + m) as f64);
                    let yy = (y0 + m).clamp(0, self.height as isize - 1) as usize;
                    for n in -1..=2 {
                        let wx = kernel(fx - (x0 + n) as f64);
                        let xx = (x0 + n).clamp(0, self.width as isize - 1) as usize;
                        acc += wx * wy * self.get(xx, yy);
                    }
                }
                out.set(i, j, acc.clamp(0.0, 1.0));
            }
        }
        out
    }

    pub fn save_pgm(&self, path: &std::path::Path) -> crate::Result<()> {
        std::fs::write(path, encode_pgm(self)).map_err(|e| crate::Error::io(path, e))
    }

    pub fn load_pgm(path: &std::path::Path) -> crate::Result<CoverageImage> {
        let bytes = std::fs::read(path).map_err(|e| crate::Error::io(path, e))?;
        decode_pgm(&bytes).map_err(|message| crate::Error::Format {
            path: path.to_path_buf(),
            message,
        })
    }
}
