//! Binary morphology with Euclidean disks `dx² + dy² <= r²`.
//!
//! Dilation thresholds an exact squared Euclidean distance transform
//! (lower-envelope-of-parabolas, two separable passes), so cost does not
//! depend on the radius.

use crate::model::Mask;

const INF: f64 = 1e20;

/// One-dimensional squared distance transform of `f` into `d`.
fn sq_dt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let fq = f[q] + (q * q) as f64;
        let intersect = |p: usize| (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
        let mut s = intersect(v[k]);
        // z[0] is -inf, so this never walks below k = 0.
        while s <= z[k] {
            k -= 1;
            s = intersect(v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let diff = q as f64 - p as f64;
        *out = diff * diff + f[p];
    }
}

/// Squared Euclidean distance from every pixel to the nearest set pixel.
/// Returns `INF`-scale values when the mask is empty.
pub fn squared_distance_transform(mask: &Mask) -> Vec<f64> {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let mut grid: Vec<f64> = mask
        .as_slice()
        .iter()
        .map(|&b| if b { 0.0 } else { INF })
        .collect();
    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    for x in 0..w {
        for y in 0..h {
            f[y] = grid[y * w + x];
        }
        sq_dt_1d(&f[..h], &mut d[..h], &mut v, &mut z);
        for y in 0..h {
            grid[y * w + x] = d[y];
        }
    }
    for y in 0..h {
        let row = &mut grid[y * w..(y + 1) * w];
        f[..w].copy_from_slice(row);
        sq_dt_1d(&f[..w], &mut d[..w], &mut v, &mut z);
        row.copy_from_slice(&d[..w]);
    }
    grid
}

/// Dilation by a disk of radius `r`.
pub fn dilate_disk(mask: &Mask, r: u32) -> Mask {
    if r == 0 || mask.is_empty() {
        return mask.clone();
    }
    let dist = squared_distance_transform(mask);
    let r2 = f64::from(r) * f64::from(r);
    let w = mask.width() as usize;
    Mask::from_fn(mask.width(), mask.height(), |x, y| {
        dist[y as usize * w + x as usize] <= r2
    })
}

/// Erosion by a disk of radius `r`. Pixels beyond the raster border count as
/// set, so a mask touching the border is not eaten from outside.
pub fn erode_disk(mask: &Mask, r: u32) -> Mask {
    if r == 0 {
        return mask.clone();
    }
    dilate_disk(&mask.inverted(), r).inverted()
}

/// Morphological closing (dilate then erode) with a disk of radius `r`.
pub fn close_disk(mask: &Mask, r: u32) -> Mask {
    erode_disk(&dilate_disk(mask, r), r)
}
