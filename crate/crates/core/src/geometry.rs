//! Planar polygon geometry: centroids and shared-boundary tests used by
//! contiguity weights. Coordinates are assumed to be projected (meters).

use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

/// A polygon with one exterior ring and zero or more holes. Rings may be
/// closed (first == last) or open; both are accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub exterior: Vec<Point>,
    #[serde(default)]
    pub holes: Vec<Vec<Point>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPolygon(pub Vec<Polygon>);

impl Polygon {
    pub fn new(exterior: Vec<Point>) -> Self {
        Polygon {
            exterior,
            holes: Vec::new(),
        }
    }

    /// Axis-aligned square with lower-left corner `(x, y)`.
    pub fn square(x: f64, y: f64, side: f64) -> Self {
        Polygon::new(vec![
            [x, y],
            [x + side, y],
            [x + side, y + side],
            [x, y + side],
            [x, y],
        ])
    }

    pub fn rings(&self) -> impl Iterator<Item = &[Point]> {
        std::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(|h| h.as_slice()))
    }
}

impl MultiPolygon {
    pub fn rings(&self) -> impl Iterator<Item = &[Point]> {
        self.0.iter().flat_map(|p| p.rings())
    }

    pub fn is_valid(&self) -> bool {
        !self.0.is_empty()
            && self.rings().all(|r| {
                open_ring(r).len() >= 3 && r.iter().all(|p| p[0].is_finite() && p[1].is_finite())
            })
    }

    /// Area-weighted centroid. Holes subtract. Falls back to the vertex mean
    /// when the total signed area vanishes.
    pub fn centroid(&self) -> Option<Point> {
        let mut area = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        for poly in &self.0 {
            for (k, ring) in poly.rings().enumerate() {
                let (a, x, y) = ring_moments(ring);
                // exterior counts positive, holes negative, regardless of winding
                let sign = if k == 0 { 1.0 } else { -1.0 };
                area += sign * a.abs();
                cx += sign * x * a.signum();
                cy += sign * y * a.signum();
            }
        }
        if area.abs() > f64::EPSILON {
            return Some([cx / area, cy / area]);
        }
        let pts: Vec<Point> = self.rings().flat_map(|r| open_ring(r).iter().copied()).collect();
        if pts.is_empty() {
            return None;
        }
        let n = pts.len() as f64;
        Some([
            pts.iter().map(|p| p[0]).sum::<f64>() / n,
            pts.iter().map(|p| p[1]).sum::<f64>() / n,
        ])
    }

    pub fn bbox(&self) -> [f64; 4] {
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for p in self.rings().flatten() {
            b[0] = b[0].min(p[0]);
            b[1] = b[1].min(p[1]);
            b[2] = b[2].max(p[0]);
            b[3] = b[3].max(p[1]);
        }
        b
    }

    fn segments(&self) -> Vec<(Point, Point)> {
        let mut out = Vec::new();
        for ring in self.rings() {
            let r = open_ring(ring);
            for k in 0..r.len() {
                out.push((r[k], r[(k + 1) % r.len()]));
            }
        }
        out
    }
}

fn open_ring(ring: &[Point]) -> &[Point] {
    if ring.len() > 1 && ring.first() == ring.last() {
        &ring[..ring.len() - 1]
    } else {
        ring
    }
}

/// Signed area and first moments (already divided by 6) of a ring.
fn ring_moments(ring: &[Point]) -> (f64, f64, f64) {
    let r = open_ring(ring);
    let mut a = 0.0;
    let mut x = 0.0;
    let mut y = 0.0;
    for k in 0..r.len() {
        let p = r[k];
        let q = r[(k + 1) % r.len()];
        let cross = p[0] * q[1] - q[0] * p[1];
        a += cross;
        x += (p[0] + q[0]) * cross;
        y += (p[1] + q[1]) * cross;
    }
    (a / 2.0, x / 6.0, y / 6.0)
}

/// How two polygons touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Touch {
    None,
    /// Share at least one point but no boundary segment of positive length.
    Point,
    /// Share a boundary segment of positive length.
    Edge,
}

/// Classify the boundary contact between two polygons. `tol` is an absolute
/// coordinate tolerance.
pub fn touch(a: &MultiPolygon, b: &MultiPolygon, tol: f64) -> Touch {
    let ba = a.bbox();
    let bb = b.bbox();
    if ba[0] > bb[2] + tol || bb[0] > ba[2] + tol || ba[1] > bb[3] + tol || bb[1] > ba[3] + tol {
        return Touch::None;
    }
    let sa = a.segments();
    let sb = b.segments();
    let mut point = false;
    for &(p0, p1) in &sa {
        for &(q0, q1) in &sb {
            match segment_contact(p0, p1, q0, q1, tol) {
                Touch::Edge => return Touch::Edge,
                Touch::Point => point = true,
                Touch::None => {}
            }
        }
    }
    if point {
        Touch::Point
    } else {
        Touch::None
    }
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn dist_point_segment(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let c = [a[0] + t * ab[0], a[1] + t * ab[1]];
    dot(sub(p, c), sub(p, c)).sqrt()
}

fn segment_contact(p0: Point, p1: Point, q0: Point, q1: Point, tol: f64) -> Touch {
    let d = sub(p1, p0);
    let len = dot(d, d).sqrt();
    let e = sub(q1, q0);
    let elen = dot(e, e).sqrt();
    if len == 0.0 || elen == 0.0 {
        return Touch::None;
    }
    // collinear overlap of positive length
    let off0 = cross(d, sub(q0, p0)).abs() / len;
    let off1 = cross(d, sub(q1, p0)).abs() / len;
    if off0 <= tol && off1 <= tol {
        let t0 = dot(sub(q0, p0), d) / len;
        let t1 = dot(sub(q1, p0), d) / len;
        let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
        let overlap = hi.min(len) - lo.max(0.0);
        if overlap > tol {
            return Touch::Edge;
        }
        if overlap >= -tol {
            return Touch::Point;
        }
        return Touch::None;
    }
    // any endpoint lying on the other segment
    if dist_point_segment(p0, q0, q1) <= tol
        || dist_point_segment(p1, q0, q1) <= tol
        || dist_point_segment(q0, p0, p1) <= tol
        || dist_point_segment(q1, p0, p1) <= tol
    {
        return Touch::Point;
    }
    // proper crossing counts as a shared point
    let c1 = cross(d, sub(q0, p0));
    let c2 = cross(d, sub(q1, p0));
    let c3 = cross(e, sub(p0, q0));
    let c4 = cross(e, sub(p1, q0));
    if c1 * c2 < 0.0 && c3 * c4 < 0.0 {
        Touch::Point
    } else {
        Touch::None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_centroid() {
        let m = MultiPolygon(vec![Polygon::square(2.0, 4.0, 2.0)]);
        let c = m.centroid().unwrap();
        assert!((c[0] - 3.0).abs() < 1e-12 && (c[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn hole_shifts_centroid() {
        let mut p = Polygon::square(0.0, 0.0, 4.0);
        p.holes.push(vec![[2.0, 0.0], [4.0, 0.0], [4.0, 4.0], [2.0, 4.0]]);
        let c = MultiPolygon(vec![p]).centroid().unwrap();
        assert!((c[0] - 1.0).abs() < 1e-12, "{c:?}");
        assert!((c[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn touch_kinds() {
        let a = MultiPolygon(vec![Polygon::square(0.0, 0.0, 1.0)]);
        let right = MultiPolygon(vec![Polygon::square(1.0, 0.0, 1.0)]);
        let diag = MultiPolygon(vec![Polygon::square(1.0, 1.0, 1.0)]);
        let far = MultiPolygon(vec![Polygon::square(3.0, 3.0, 1.0)]);
        assert_eq!(touch(&a, &right, 1e-9), Touch::Edge);
        assert_eq!(touch(&a, &diag, 1e-9), Touch::Point);
        assert_eq!(touch(&a, &far, 1e-9), Touch::None);
    }

    #[test]
    fn partial_edge_overlap_is_edge() {
        let a = MultiPolygon(vec![Polygon::square(0.0, 0.0, 2.0)]);
        let b = MultiPolygon(vec![Polygon::square(2.0, 1.0, 2.0)]);
        assert_eq!(touch(&a, &b, 1e-9), Touch::Edge);
    }
}
