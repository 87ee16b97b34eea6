//! Top-down (BEV) box geometry and rotated-rectangle IoU.

use serde::{Deserialize, Serialize};

/// A rotated rectangle footprint in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BevBox {
    pub center: [f64; 2],
    /// (width, length) in meters.
    pub size: [f64; 2],
    pub yaw: f64,
}

impl BevBox {
    pub fn new(center: [f64; 2], size: [f64; 2], yaw: f64) -> Self {
        BevBox { center, size, yaw }
    }

    pub fn area(&self) -> f64 {
        self.size[0] * self.size[1]
    }

    /// Corner coordinates in counter-clockwise order.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        let (hw, hl) = (self.size[0] / 2.0, self.size[1] / 2.0);
        let (s, c) = self.yaw.sin_cos();
        let rot = |x: f64, y: f64| {
            [
                self.center[0] + x * c - y * s,
                self.center[1] + x * s + y * c,
            ]
        };
        [rot(hw, hl), rot(-hw, hl), rot(-hw, -hl), rot(hw, -hl)]
    }
}

/// Intersection-over-union of two rotated top-down rectangles.
pub fn bev_iou(a: &BevBox, b: &BevBox) -> f64 {
    let inter = convex_intersection_area(&a.corners(), &b.corners());
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Area of the intersection of two convex CCW polygons
/// (Sutherland-Hodgman clipping followed by the shoelace formula).
fn convex_intersection_area(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> f64 {
    let mut polygon: Vec<[f64; 2]> = subject.to_vec();
    for i in 0..clip.len() {
        if polygon.is_empty() {
            return 0.0;
        }
        let edge_a = clip[i];
        let edge_b = clip[(i + 1) % clip.len()];
        let mut clipped = Vec::with_capacity(polygon.len() + 1);
        for j in 0..polygon.len() {
            let current = polygon[j];
            let next = polygon[(j + 1) % polygon.len()];
            let cur_in = is_left(edge_a, edge_b, current);
            let next_in = is_left(edge_a, edge_b, next);
            if cur_in {
                clipped.push(current);
                if !next_in {
                    clipped.push(line_intersection(edge_a, edge_b, current, next));
                }
            } else if next_in {
                clipped.push(line_intersection(edge_a, edge_b, current, next));
            }
        }
        polygon = clipped;
    }
    shoelace_area(&polygon)
}

fn is_left(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0
}

fn line_intersection(a: [f64; 2], b: [f64; 2], p: [f64; 2], q: [f64; 2]) -> [f64; 2] {
    let r = [b[0] - a[0], b[1] - a[1]];
    let s = [q[0] - p[0], q[1] - p[1]];
    let denom = r[0] * s[1] - r[1] * s[0];
    if denom.abs() < 1e-15 {
        return p; // parallel: either endpoint serves
    }
    let t = ((p[0] - a[0]) * s[1] - (p[1] - a[1]) * s[0]) / denom;
    [a[0] + t * r[0], a[1] + t * r[1]]
}

fn shoelace_area(polygon: &[[f64; 2]]) -> f64 {
    if polygon.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..polygon.len() {
        let p = polygon[i];
        let q = polygon[(i + 1) % polygon.len()];
        twice += p[0] * q[1] - q[0] * p[1];
    }
    twice.abs() / 2.0
}
