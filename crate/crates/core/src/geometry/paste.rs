use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::model::Mask;

/// Minimum fraction of pasted pixels that must land in the background region.
pub const PASTE_MIN_INSIDE: f64 = 0.95;
/// Each failed attempt shrinks the donor by this factor.
pub const PASTE_SCALE_STEP: f64 = 0.8;
pub const PASTE_MAX_ATTEMPTS: u32 = 20;

/// Maps donor pixels into a target raster: donor point `anchor + d` lands at
/// `offset + d * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PasteTransform {
    pub anchor: (u32, u32),
    pub offset: (i64, i64),
    pub scale: f64,
}

impl PasteTransform {
    /// Resamples `donor` into a `width x height` raster (nearest neighbour,
    /// inverse mapping). Pixels mapped from outside the donor stay unset.
    pub fn apply(&self, donor: &Mask, width: u32, height: u32) -> Mask {
        let (ax, ay) = (i64::from(self.anchor.0), i64::from(self.anchor.1));
        let (ox, oy) = self.offset;
        let s = self.scale;
        let src = |t: i64, o: i64, a: i64| a + ((t - o) as f64 / s).floor() as i64;
        Mask::from_fn(width, height, |x, y| {
            let (tx, ty) = (i64::from(x), i64::from(y));
            donor.get_signed(src(tx, ox, ax), src(ty, oy, ay))
        })
    }

    /// Target-space bounding box `[x0, x1) x [y0, y1)` of the donor's set
    /// pixels, possibly extending beyond any raster.
    pub fn target_bbox(&self, donor: &Mask) -> Option<(i64, i64, i64, i64)> {
        let b = donor.bbox()?;
        let map = |v: u32, a: u32, o: i64| o + ((i64::from(v) - i64::from(a)) as f64 * self.scale).floor() as i64;
        let x0 = map(b.x0, self.anchor.0, self.offset.0);
        let y0 = map(b.y0, self.anchor.1, self.offset.1);
        let x1 = self.offset.0
            + ((i64::from(b.x1) - i64::from(self.anchor.0)) as f64 * self.scale).ceil() as i64;
        let y1 = self.offset.1
            + ((i64::from(b.y1) - i64::from(self.anchor.1)) as f64 * self.scale).ceil() as i64;
        Some((x0, y0, x1, y1))
    }

    /// True when the donor's set pixels would all land inside the raster.
    pub fn stays_inside(&self, donor: &Mask, width: u32, height: u32) -> bool {
        match self.target_bbox(donor) {
            Some((x0, y0, x1, y1)) => {
                x0 >= 0 && y0 >= 0 && x1 <= i64::from(width) && y1 <= i64::from(height)
            }
            None => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub mask: Mask,
    pub transform: PasteTransform,
}

/// Summed-area table with a zero row/column prefix.
struct Integral {
    w: usize,
    sums: Vec<u32>,
}

impl Integral {
    fn new(mask: &Mask) -> Self {
        let (w, h) = (mask.width() as usize, mask.height() as usize);
        let mut sums = vec![0u32; (w + 1) * (h + 1)];
        for y in 0..h {
            let mut row = 0u32;
            for x in 0..w {
                row += u32::from(mask.get(x as u32, y as u32));
                sums[(y + 1) * (w + 1) + x + 1] = sums[y * (w + 1) + x + 1] + row;
            }
        }
        Self { w, sums }
    }

    fn window(&self, x: usize, y: usize, w: usize, h: usize) -> u32 {
        let s = |xx: usize, yy: usize| self.sums[yy * (self.w + 1) + xx];
        s(x + w, y + h) + s(x, y) - s(x + w, y) - s(x, y + h)
    }
}

/// Places `donor` inside `background` so that at least 95% of its pixels
/// overlap the background, shrinking it by 0.8 per failed attempt. The
/// offset is drawn uniformly from all feasible placements.
pub fn paste_mask(background: &Mask, donor: &Mask, seed: u64) -> Result<Placement, GeometryError> {
    let bbox = donor.bbox().ok_or(GeometryError::EmptyMask { frame: 0 })?;
    if background.is_empty() {
        return Err(GeometryError::EmptyMask { frame: 0 });
    }
    let (w, h) = background.dimensions();
    let integral = Integral::new(background);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchor = (bbox.x0, bbox.y0);

    for attempt in 0..PASTE_MAX_ATTEMPTS {
        let scale = PASTE_SCALE_STEP.powi(attempt as i32);
        let sw = (f64::from(bbox.width()) * scale).ceil() as u32;
        let sh = (f64::from(bbox.height()) * scale).ceil() as u32;
        if sw == 0 || sh == 0 {
            break;
        }
        if sw > w || sh > h {
            continue;
        }
        let pattern = PasteTransform {
            anchor,
            offset: (0, 0),
            scale,
        }
        .apply(donor, sw, sh);
        let points: Vec<(u32, u32)> = pattern.iter_set().collect();
        let n = points.len() as u64;
        if n == 0 {
            break;
        }
        let need = (PASTE_MIN_INSIDE * n as f64).ceil() as u64;
        let allowed_misses = n - need;

        let mut feasible: Vec<(u32, u32)> = Vec::new();
        for oy in 0..=(h - sh) {
            for ox in 0..=(w - sw) {
                let window = u64::from(integral.window(ox as usize, oy as usize, sw as usize, sh as usize));
                if window < need {
                    continue;
                }
                if window == u64::from(sw) * u64::from(sh) {
                    feasible.push((ox, oy));
                    continue;
                }
                let mut misses = 0u64;
                let ok = points.iter().all(|&(px, py)| {
                    if !background.get(ox + px, oy + py) {
                        misses += 1;
                    }
                    misses <= allowed_misses
                });
                if ok {
                    feasible.push((ox, oy));
                }
            }
        }
        if feasible.is_empty() {
            continue;
        }
        let (ox, oy) = feasible[rng.random_range(0..feasible.len())];
        let transform = PasteTransform {
            anchor,
            offset: (i64::from(ox), i64::from(oy)),
            scale,
        };
        return Ok(Placement {
            mask: transform.apply(donor, w, h),
            transform,
        });
    }
    Err(GeometryError::NoFeasiblePlacement {
        attempts: PASTE_MAX_ATTEMPTS,
    })
}
