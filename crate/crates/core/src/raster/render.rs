use super::scene::{Hit, Prefilter, RowScratch, Scene};
use super::{CoverageImage, RasterConfig};
use crate::glyph::PathSet;
use crate::Command;

pub(crate) fn render_scene(scene: &Scene, config: &RasterConfig) -> CoverageImage {
    let (w, h) = (scene.width, scene.height);
    let filter = Prefilter::new(config.prefilter_sigma);
    let rows = config.exec.map(h, |j| {
        let mut scratch = RowScratch::default();
        let mut hits = vec![Hit::MISS; w];
        let mut inside = vec![false; w];
        scene.row(j, filter.band, &mut scratch, &mut hits, &mut inside);
        hits.iter()
            .zip(&inside)
            .map(|(hit, &inn)| filter.value(inn, hit.dist))
            .collect::<Vec<f64>>()
    });
    CoverageImage {
        width: w,
        height: h,
        data: rows.concat(),
    }
}

/// Prefiltered coverage of `pathset` at `config.resolution` squared.
pub fn render(pathset: &PathSet, config: &RasterConfig) -> CoverageImage {
    let scene = Scene::from_pathset(pathset, config.resolution, config.resolution);
    render_scene(&scene, config)
}

/// Renders any command list: everything after the first `End` is ignored,
/// drawing commands before the first `Move` are dropped, open contours are
/// closed and empty ones discarded. Never fails.
pub fn render_commands(commands: &[Command], config: &RasterConfig) -> CoverageImage {
    let scene = Scene::from_commands(commands, config.resolution, config.resolution);
    render_scene(&scene, config)
}

/// Fraction of `k x k` box-filter samples inside the fill, per pixel.
pub fn render_oracle(pathset: &PathSet, config: &RasterConfig) -> CoverageImage {
    let n = config.resolution;
    let k = config.oracle_supersample.max(1);
    let scene = Scene::from_pathset(pathset, n, n);
    let rows = config.exec.map(n, |j| {
        let mut scratch = RowScratch::default();
        let mut row = vec![0.0; n];
        scene.oracle_row(j, k, &mut scratch, &mut row);
        row
    });
    CoverageImage {
        width: n,
        height: n,
        data: rows.concat(),
    }
}
