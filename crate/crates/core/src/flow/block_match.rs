use rayon::prelude::*;

use super::{FlowError, FlowEstimator, FlowField};
use crate::model::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockMatchConfig {
    pub levels: u32,
    pub block: u32,
    pub search: i32,
}

impl Default for BlockMatchConfig {
    fn default() -> Self {
        Self {
            levels: 3,
            block: 8,
            search: 4,
        }
    }
}

/// The classical estimator: coarse-to-fine integer block matching with a
/// sum-of-absolute-differences cost.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinFlow {
    pub config: BlockMatchConfig,
}

impl FlowEstimator for BuiltinFlow {
    fn estimate(&self, a: &Frame, b: &Frame) -> Result<FlowField, FlowError> {
        estimate(a, b, &self.config)
    }
}

pub fn block_match_flow(a: &Frame, b: &Frame) -> Result<FlowField, FlowError> {
    estimate(a, b, &BlockMatchConfig::default())
}

/// Match cost, then tie-breakers preferring small displacements.
type Candidate = (u64, i32, i32);

struct Plane {
    w: u32,
    h: u32,
    data: Vec<u16>,
}

impl Plane {
    fn luma(frame: &Frame) -> Self {
        let data = frame
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0;
                ((77 * u32::from(r) + 150 * u32::from(g) + 29 * u32::from(b)) >> 8) as u16
            })
            .collect();
        Self {
            w: frame.width(),
            h: frame.height(),
            data,
        }
    }

    #[inline]
    fn at(&self, x: u32, y: u32) -> u16 {
        self.data[y as usize * self.w as usize + x as usize]
    }

    /// 2x2 box average; odd edges average what exists.
    fn half(&self) -> Self {
        let (w, h) = (self.w.div_ceil(2), self.h.div_ceil(2));
        let mut data = Vec::with_capacity(w as usize * h as usize);
        for y in 0..h {
            for x in 0..w {
                let mut sum = 0u32;
                let mut n = 0u32;
                for (sx, sy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    let (px, py) = (2 * x + sx, 2 * y + sy);
                    if px < self.w && py < self.h {
                        sum += u32::from(self.at(px, py));
                        n += 1;
                    }
                }
                data.push(((sum + n / 2) / n) as u16);
            }
        }
        Self { w, h, data }
    }
}

/// One vector per block, sampled bilinearly between block centers.
struct BlockField {
    nbx: u32,
    nby: u32,
    block: u32,
    vecs: Vec<(i32, i32)>,
}

impl BlockField {
    fn sample(&self, x: f32, y: f32) -> (f32, f32) {
        let b = self.block as f32;
        let grid = |p: f32, n: u32| {
            let g = ((p - b / 2.0) / b).clamp(0.0, (n - 1) as f32);
            let i0 = g.floor() as u32;
            let i1 = (i0 + 1).min(n - 1);
            (i0, i1, g - i0 as f32)
        };
        let (x0, x1, tx) = grid(x, self.nbx);
        let (y0, y1, ty) = grid(y, self.nby);
        let v = |bx: u32, by: u32| {
            let (vx, vy) = self.vecs[(by * self.nbx + bx) as usize];
            (vx as f32, vy as f32)
        };
        let lerp = |a: (f32, f32), c: (f32, f32), t: f32| (a.0 + (c.0 - a.0) * t, a.1 + (c.1 - a.1) * t);
        let top = lerp(v(x0, y0), v(x1, y0), tx);
        let bottom = lerp(v(x0, y1), v(x1, y1), tx);
        lerp(top, bottom, ty)
    }
}

fn match_level(
    a: &Plane,
    b: &Plane,
    coarse: Option<&BlockField>,
    cfg: &BlockMatchConfig,
) -> BlockField {
    let bs = cfg.block;
    let (nbx, nby) = (a.w.div_ceil(bs), a.h.div_ceil(bs));
    let vecs: Vec<(i32, i32)> = (0..nby)
        .into_par_iter()
        .flat_map_iter(|by| (0..nbx).map(move |bx| (bx, by)))
        .map(|(bx, by)| {
            let (x0, y0) = (bx * bs, by * bs);
            let (bw, bh) = ((a.w - x0).min(bs), (a.h - y0).min(bs));
            let pred = coarse.map_or((0, 0), |c| {
                let cx = (x0 as f32 + bw as f32 / 2.0) / 2.0;
                let cy = (y0 as f32 + bh as f32 / 2.0) / 2.0;
                let (vx, vy) = c.sample(cx, cy);
                ((vx * 2.0).round() as i32, (vy * 2.0).round() as i32)
            });
            let mut best: Option<(Candidate, (i32, i32))> = None;
            for dy in -cfg.search..=cfg.search {
                for dx in -cfg.search..=cfg.search {
                    let (vx, vy) = (pred.0 + dx, pred.1 + dy);
                    let (tx, ty) = (x0 as i64 + vx as i64, y0 as i64 + vy as i64);
                    if tx < 0
                        || ty < 0
                        || tx + bw as i64 > b.w as i64
                        || ty + bh as i64 > b.h as i64
                    {
                        continue;
                    }
                    let mut sad = 0u64;
                    for yy in 0..bh {
                        for xx in 0..bw {
                            let pa = a.at(x0 + xx, y0 + yy);
                            let pb = b.at(tx as u32 + xx, ty as u32 + yy);
                            sad += u64::from(pa.abs_diff(pb));
                        }
                    }
                    let key = (sad, dx * dx + dy * dy, vx * vx + vy * vy);
                    if best.is_none_or(|(k, _)| key < k) {
                        best = Some((key, (vx, vy)));
                    }
                }
            }
            best.map_or((0, 0), |(_, v)| v)
        })
        .collect();
    BlockField {
        nbx,
        nby,
        block: bs,
        vecs,
    }
}

fn estimate(a: &Frame, b: &Frame, cfg: &BlockMatchConfig) -> Result<FlowField, FlowError> {
    if a.dimensions() != b.dimensions() {
        return Err(FlowError::ResolutionMismatch {
            a: a.dimensions(),
            b: b.dimensions(),
        });
    }
    let mut pyramid = vec![(Plane::luma(a), Plane::luma(b))];
    for _ in 1..cfg.levels.max(1) {
        let (pa, pb) = pyramid.last().expect("non-empty");
        let next = (pa.half(), pb.half());
        pyramid.push(next);
    }
    let mut field: Option<BlockField> = None;
    for (pa, pb) in pyramid.iter().rev() {
        field = Some(match_level(pa, pb, field.as_ref(), cfg));
    }
    let field = field.expect("at least one level");
    let (w, h) = a.dimensions();
    let mut data = Vec::with_capacity(w as usize * h as usize);
    for y in 0..h {
        for x in 0..w {
            let (vx, vy) = field.sample(x as f32, y as f32);
            data.push([vx, vy]);
        }
    }
    FlowField::from_vec(w, h, data)
}
