//! L1 image loss and its analytic gradient.
//!
//! The backward pass treats the inside/outside decision as constant and
//! holds the closest curve parameter fixed, so the derivative of a pixel's
//! distance with respect to a control point is the unit offset from the
//! pixel to the curve scaled by that point's Bernstein weight.

use super::scene::{Hit, Prefilter, RowScratch, Scene};
use super::{CoverageImage, RasterConfig};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geom::{CubicBez, Point};
use crate::glyph::{validate, Command, CommandType, Glyph, NO_SLOT};

/// `d loss / d args`, one row of six per command, aligned with the glyph.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBuffer {
    pub grads: Vec<[f64; 6]>,
}

impl GradientBuffer {
    pub fn zeros(n: usize) -> Self {
        GradientBuffer {
            grads: vec![[0.0; 6]; n],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.grads
            .iter()
            .flat_map(|g| g.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Gradients with respect to the absolute position of each argument
    /// pair (see [`crate::glyph::Glyph::to_absolute`]), undoing the
    /// relative encoding. Unused pairs are zero.
    pub fn to_absolute(&self, commands: &[Command]) -> Vec<[Point; 3]> {
        let n = commands.len().min(self.grads.len());
        let pair = |j: usize, k: usize| Point::new(self.grads[j][2 * k], self.grads[j][2 * k + 1]);
        (0..n)
            .map(|j| {
                let kind = commands[j].kind;
                let mut out = [Point::ZERO; 3];
                if kind == CommandType::End {
                    return out;
                }
                let mut end = pair(j, 2);
                if let Some(next) = commands.get(j + 1).filter(|_| j + 1 < n) {
                    if next.kind != CommandType::End {
                        end -= pair(j + 1, 2);
                        if next.kind == CommandType::Curve {
                            end -= pair(j + 1, 0) + pair(j + 1, 1);
                        }
                    }
                }
                out[2] = end;
                if kind == CommandType::Curve {
                    out[0] = pair(j, 0);
                    out[1] = pair(j, 1);
                }
                out
            })
            .collect()
    }
}

/// Loss of a command list together with gradients with respect to the
/// absolute position of every argument pair (`3 * command + pair`), in EM.
#[derive(Clone, Debug)]
pub struct SlotLoss {
    pub loss: f64,
    /// Loss at the auxiliary prefilter width, from the same distance pass.
    pub aux_loss: Option<f64>,
    pub grads: Vec<Point>,
}

pub(crate) fn evaluate_commands(
    commands: &[Command],
    target: &CoverageImage,
    sigma: f64,
    aux_sigma: Option<f64>,
    exec: Exec,
) -> SlotLoss {
    let (w, h) = (target.width, target.height);
    let scene = Scene::from_commands(commands, w, h);
    let filter = Prefilter::new(sigma);
    let aux = aux_sigma.map(Prefilter::new);
    let band = aux.map_or(filter.band, |a| a.band.max(filter.band));
    let n_pix = (w * h) as f64;
    let n_slots = 3 * commands.len();

    let rows = exec.map(h, |j| {
        let mut scratch = RowScratch::default();
        let mut hits = vec![Hit::MISS; w];
        let mut inside = vec![false; w];
        scene.row(j, band, &mut scratch, &mut hits, &mut inside);
        let mut loss = 0.0;
        let mut aux_loss = 0.0;
        let mut g = vec![Point::ZERO; n_slots];
        for i in 0..w {
            let t = target.data[j * w + i];
            let hit = hits[i];
            let inn = inside[i];
            if let Some(a) = &aux {
                aux_loss += (a.value(inn, hit.dist) - t).abs();
            }
            let (v, slope) = filter.value_and_slope(inn, hit.dist);
            let r = v - t;
            loss += r.abs();
            if r == 0.0 || slope == 0.0 || hit.is_miss() || hit.dist == 0.0 {
                continue;
            }
            let sgn = if inn { -1.0 } else { 1.0 };
            let k = r.signum() / n_pix * slope * sgn / hit.dist;
            let gq = hit.offset * k;
            let seg = &scene.segs[hit.seg as usize];
            let weights = if seg.is_line {
                [1.0 - hit.t, 0.0, 0.0, hit.t]
            } else {
                CubicBez::basis(hit.t)
            };
            for (slot, wgt) in seg.slots.iter().zip(weights) {
                if *slot != NO_SLOT && wgt != 0.0 {
                    g[*slot as usize] += gq * wgt;
                }
            }
        }
        (loss, aux_loss, g)
    });

    let mut loss = 0.0;
    let mut aux_loss = 0.0;
    let mut grads = vec![Point::ZERO; n_slots];
    for (l, a, g) in rows {
        loss += l;
        aux_loss += a;
        for (acc, v) in grads.iter_mut().zip(g) {
            *acc += v;
        }
    }
    // Pixel space to EM: px = x * w, py = (1 - y) * h.
    for g in &mut grads {
        *g = Point::new(g.x * w as f64, -g.y * h as f64);
    }
    SlotLoss {
        loss: loss / n_pix,
        aux_loss: aux.map(|_| aux_loss / n_pix),
        grads,
    }
}

/// Pushes absolute-position gradients back through the relative encoding:
/// every pen position is the running sum of all earlier displacements, and
/// curve controls are offsets from the pen before their command.
pub fn slot_gradients_to_relative(commands: &[Command], slots: &[Point]) -> GradientBuffer {
    let n = commands.len();
    let mut out = GradientBuffer::zeros(n);
    let end = commands
        .iter()
        .position(|c| c.kind == CommandType::End)
        .unwrap_or(n);
    let mut tail = Point::ZERO;
    for j in (0..end).rev() {
        let c = &commands[j];
        if !c.kind.is_drawing() && c.kind != CommandType::Move {
            continue;
        }
        tail += slots[3 * j + 2];
        if let Some(next) = commands.get(j + 1) {
            if j + 1 < end && next.kind == CommandType::Curve {
                tail += slots[3 * (j + 1)] + slots[3 * (j + 1) + 1];
            }
        }
        let g = &mut out.grads[j];
        g[4] = tail.x;
        g[5] = tail.y;
        if c.kind == CommandType::Curve {
            g[0] = slots[3 * j].x;
            g[1] = slots[3 * j].y;
            g[2] = slots[3 * j + 1].x;
            g[3] = slots[3 * j + 1].y;
        }
    }
    out
}

/// Mean absolute difference between the prefilter render of `glyph` and
/// `target`, and its gradient with respect to every command argument.
/// Pixels where the render equals the target contribute zero gradient.
pub fn l1_loss_and_gradients(
    glyph: &Glyph,
    target: &CoverageImage,
    config: &RasterConfig,
) -> Result<(f64, GradientBuffer)> {
    let report = validate(glyph);
    if !report.is_valid() {
        return Err(Error::InvalidGlyph(report));
    }
    check_target(target, config.resolution)?;
    let sl = evaluate_commands(
        &glyph.commands,
        target,
        config.prefilter_sigma,
        None,
        config.exec,
    );
    Ok((
        sl.loss,
        slot_gradients_to_relative(&glyph.commands, &sl.grads),
    ))
}

pub(crate) fn check_target(target: &CoverageImage, resolution: usize) -> Result<()> {
    if target.width != resolution || target.height != resolution {
        return Err(Error::ResolutionMismatch {
            expected: resolution,
            got: target.width,
            got_height: target.height,
        });
    }
    Ok(())
}
