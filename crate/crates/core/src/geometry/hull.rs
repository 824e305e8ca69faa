use crate::model::Mask;

type Point = (i64, i64);

fn cross(o: Point, a: Point, b: Point) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull of the set pixel centers (monotone chain). Collinear points
/// are dropped; a degenerate hull has one or two vertices.
pub fn hull_vertices(mask: &Mask) -> Vec<Point> {
    // Only the extreme pixels of each row can be hull vertices.
    let mut pts: Vec<Point> = Vec::new();
    for y in 0..mask.height() {
        let row = (0..mask.width()).filter(|&x| mask.get(x, y));
        let mut first = None;
        let mut last = None;
        for x in row {
            first.get_or_insert(x);
            last = Some(x);
        }
        if let (Some(a), Some(b)) = (first, last) {
            pts.push((i64::from(a), i64::from(y)));
            if b != a {
                pts.push((i64::from(b), i64::from(y)));
            }
        }
    }
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Exact point-in-convex-polygon test (boundary counts as inside).
pub fn point_in_hull(hull: &[Point], p: Point) -> bool {
    let Some(&first) = hull.first() else {
        return false;
    };
    let (mut x0, mut y0, mut x1, mut y1) = (first.0, first.1, first.0, first.1);
    for &(x, y) in hull {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if p.0 < x0 || p.0 > x1 || p.1 < y0 || p.1 > y1 {
        return false;
    }
    let n = hull.len();
    (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= 0)
}

/// Rasterizes the convex hull of `mask`: every pixel whose center lies in
/// the hull polygon is set.
pub fn rasterize_hull(mask: &Mask) -> Mask {
    let hull = hull_vertices(mask);
    let mut out = Mask::new(mask.width(), mask.height());
    let Some(bbox) = mask.bbox() else {
        return out;
    };
    for y in bbox.y0..bbox.y1 {
        let inside = |x: u32| point_in_hull(&hull, (i64::from(x), i64::from(y)));
        // Convex, so each row's inside pixels form one contiguous run.
        let Some(left) = (bbox.x0..bbox.x1).find(|&x| inside(x)) else {
            continue;
        };
        let right = (left..bbox.x1).rev().find(|&x| inside(x)).unwrap_or(left);
        for x in left..=right {
            out.set(x, y, true);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_pair_includes_midpoint() {
        let mut m = Mask::new(3, 3);
        m.set(0, 0, true);
        m.set(2, 2, true);
        let h = rasterize_hull(&m);
        assert!(h.get(1, 1));
        assert_eq!(h.count(), 3);
    }

    #[test]
    fn single_pixel_hull() {
        let mut m = Mask::new(5, 5);
        m.set(3, 1, true);
        assert_eq!(rasterize_hull(&m), m);
    }

    #[test]
    fn triangle_hull_matches_brute_force() {
        let mut m = Mask::new(12, 12);
        for (x, y) in [(1, 1), (10, 2), (4, 10), (5, 5)] {
            m.set(x, y, true);
        }
        let h = rasterize_hull(&m);
        let hull = hull_vertices(&m);
        assert_eq!(hull.len(), 3, "interior point dropped");
        for y in 0..12 {
            for x in 0..12 {
                assert_eq!(h.get(x, y), point_in_hull(&hull, (x as i64, y as i64)));
            }
        }
    }
}
