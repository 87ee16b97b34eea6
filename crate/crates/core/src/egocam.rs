//! Head-mounted pinhole camera model and per-ego visibility.
//!
//! Each pedestrian carries a camera at a fixed height, optical axis along
//! the travel heading, zero pitch/roll. Other agents are modeled as upright
//! cylinders whose silhouettes are conservatively bounded by their projected
//! rectangles; a full-resolution depth buffer resolves occlusion and yields
//! per-agent visible pixel counts.

use serde::{Deserialize, Serialize};

use crate::trajio::wrap_angle;

/// Depth below which a point counts as behind the camera (meters).
pub const DEPTH_EPS_M: f64 = 0.01;

/// Pinhole camera parameters. Defaults: 1.6 m mount height, 18 mm focal
/// length on a 36x24 mm sensor rendered at 640x480 with centered principal
/// point, giving a vertical FOV of about 67.4 degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub height_m: f64,
    pub focal_mm: f64,
    pub sensor_w_mm: f64,
    pub sensor_h_mm: f64,
    pub image_w_px: u32,
    pub image_h_px: u32,
    pub principal: [f64; 2],
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            height_m: 1.6,
            focal_mm: 18.0,
            sensor_w_mm: 36.0,
            sensor_h_mm: 24.0,
            image_w_px: 640,
            image_h_px: 480,
            principal: [320.0, 240.0],
        }
    }
}

impl CameraModel {
    /// Focal length in pixels under vertical sensor fit with square pixels.
    pub fn focal_px(&self) -> f64 {
        self.focal_mm / self.sensor_h_mm * self.image_h_px as f64
    }

    /// Vertical field of view in degrees.
    pub fn vertical_fov_deg(&self) -> f64 {
        2.0 * (self.sensor_h_mm / (2.0 * self.focal_mm)).atan().to_degrees()
    }

    /// Horizontal field of view in degrees (follows from the vertical fit).
    pub fn horizontal_fov_deg(&self) -> f64 {
        2.0 * (self.image_w_px as f64 / 2.0 / self.focal_px()).atan().to_degrees()
    }
}

/// Upright-cylinder proxy for a pedestrian body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BodyModel {
    pub radius_m: f64,
    pub height_m: f64,
}

impl Default for BodyModel {
    fn default() -> Self {
        BodyModel {
            radius_m: 0.25,
            height_m: 1.7,
        }
    }
}

/// Ground-plane pose: position plus heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Axis-aligned static occluder box in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccluderBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Result of projecting a camera-frame point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    /// Pixel coordinates (u right, v down).
    Pixel { u: f64, v: f64 },
    BehindCamera,
}

/// Transform a world point into the ego camera frame.
///
/// Camera sits at `(ego.x, ego.y, camera.height_m)` looking along the ego
/// heading; +z forward, +x right, +y down.
pub fn world_to_camera(ego: GroundPose, camera: &CameraModel, point: [f64; 3]) -> [f64; 3] {
    let dx = point[0] - ego.x;
    let dy = point[1] - ego.y;
    let dz = point[2] - camera.height_m;
    let (sin_h, cos_h) = ego.heading.sin_cos();
    [
        dx * sin_h - dy * cos_h, // right
        -dz,                     // down
        dx * cos_h + dy * sin_h, // forward
    ]
}

/// Project a camera-frame point to pixels, or flag it behind the camera.
pub fn project(camera: &CameraModel, p_cam: [f64; 3]) -> Projection {
    if p_cam[2] <= DEPTH_EPS_M {
        return Projection::BehindCamera;
    }
    let f = camera.focal_px();
    Projection::Pixel {
        u: camera.principal[0] + f * p_cam[0] / p_cam[2],
        v: camera.principal[1] + f * p_cam[1] / p_cam[2],
    }
}

/// Pixel-space bounding box, `max` exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelRect {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl PixelRect {
    pub fn width(&self) -> f64 {
        (self.u_max - self.u_min).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.v_max - self.v_min).max(0.0)
    }

    fn clip_to_image(&self, camera: &CameraModel) -> Option<PixelRect> {
        let r = PixelRect {
            u_min: self.u_min.max(0.0),
            v_min: self.v_min.max(0.0),
            u_max: self.u_max.min(camera.image_w_px as f64),
            v_max: self.v_max.min(camera.image_h_px as f64),
        };
        (r.u_min < r.u_max && r.v_min < r.v_max).then_some(r)
    }

    /// Integer pixel columns/rows whose centers fall inside the rect.
    fn pixel_span(&self) -> (i64, i64, i64, i64) {
        let col0 = (self.u_min - 0.5).ceil() as i64;
        let col1 = (self.u_max - 0.5).ceil() as i64; // exclusive
        let row0 = (self.v_min - 0.5).ceil() as i64;
        let row1 = (self.v_max - 0.5).ceil() as i64; // exclusive
        (col0, col1, row0, row1)
    }
}

/// Axis-aligned IoU of two pixel rectangles.
pub fn rect_iou(a: &PixelRect, b: &PixelRect) -> f64 {
    let iw = (a.u_max.min(b.u_max) - a.u_min.max(b.u_min)).max(0.0);
    let ih = (a.v_max.min(b.v_max) - a.v_min.max(b.v_min)).max(0.0);
    let inter = iw * ih;
    let union = a.width() * a.height() + b.width() * b.height() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Conservative silhouette rectangle of an upright cylinder at `pose`,
/// clipped to the image. `None` when fully out of frame or behind the
/// camera plane.
pub fn silhouette_rect(
    ego: GroundPose,
    camera: &CameraModel,
    body: &BodyModel,
    pose_xy: [f64; 2],
) -> Option<(PixelRect, f64)> {
    let base = world_to_camera(ego, camera, [pose_xy[0], pose_xy[1], 0.0]);
    let depth = base[2];
    if depth <= DEPTH_EPS_M {
        return None;
    }
    let f = camera.focal_px();
    // horizontal extent: +/- radius perpendicular to the viewing ray,
    // bounded conservatively by +/- radius in camera x at the center depth
    let u_center = camera.principal[0] + f * base[0] / depth;
    let du = f * body.radius_m / depth;
    // vertical extent: world z in [0, body.height]
    let top = world_to_camera(ego, camera, [pose_xy[0], pose_xy[1], body.height_m]);
    let v_top = camera.principal[1] + f * top[1] / depth;
    let v_bottom = camera.principal[1] + f * base[1] / depth;
    let rect = PixelRect {
        u_min: u_center - du,
        v_min: v_top.min(v_bottom),
        u_max: u_center + du,
        v_max: v_top.max(v_bottom),
    };
    rect.clip_to_image(camera).map(|r| (r, depth))
}

/// One agent visible in an ego frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleAgent {
    pub agent_id: i64,
    pub world_pose: GroundPose,
    /// Camera-frame base position plus heading relative to the ego's.
    pub cam_pose: [f64; 4],
    pub pixel_count: u32,
    pub bbox2d: PixelRect,
}

/// Everything one ego perceives at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoFrameAnnotation {
    pub ego_id: i64,
    pub step: i64,
    pub ego_pose: GroundPose,
    pub visible: Vec<VisibleAgent>,
}

/// Depth-buffer rasterizer with reusable scratch buffers.
///
/// Buffers are generation-stamped so nothing needs clearing between calls;
/// create one per worker thread.
pub struct Rasterizer {
    camera: CameraModel,
    body: BodyModel,
    width: usize,
    depth: Vec<f32>,
    owner: Vec<u16>,
    stamp: Vec<u32>,
    generation: u32,
}

/// Owner index reserved for static occluder boxes.
const OCCLUDER_OWNER: u16 = u16::MAX;

impl Rasterizer {
    pub fn new(camera: CameraModel, body: BodyModel) -> Self {
        let n = (camera.image_w_px * camera.image_h_px) as usize;
        Rasterizer {
            camera,
            body,
            width: camera.image_w_px as usize,
            depth: vec![0.0; n],
            owner: vec![0; n],
            stamp: vec![0; n],
            generation: 0,
        }
    }

    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }

    pub fn body(&self) -> &BodyModel {
        &self.body
    }

    /// Rasterize all candidate agents plus static occluders and report which
    /// agents own at least one pixel.
    ///
    /// `others` must not contain the ego itself. Agents are painted
    /// front-to-back; ties resolve to the earlier entry after sorting by
    /// `(depth, agent_id)`, which keeps the result order-independent.
    pub fn annotate(
        &mut self,
        ego_id: i64,
        ego_pose: GroundPose,
        others: &[(i64, GroundPose)],
        occluders: &[OccluderBox],
    ) -> EgoFrameAnnotation {
        self.annotate_at(ego_id, 0, ego_pose, others, occluders)
    }

    /// Same as [`Rasterizer::annotate`] with an explicit step index recorded
    /// in the annotation.
    pub fn annotate_at(
        &mut self,
        ego_id: i64,
        step: i64,
        ego_pose: GroundPose,
        others: &[(i64, GroundPose)],
        occluders: &[OccluderBox],
    ) -> EgoFrameAnnotation {
        debug_assert!(others.iter().all(|(id, _)| *id != ego_id));
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            // wrapped: stamps from 2^32 calls ago could alias, reset
            self.stamp.fill(0);
            self.generation = 1;
        }

        // candidate silhouettes, front-to-back
        let mut candidates: Vec<(usize, PixelRect, f64)> = Vec::with_capacity(others.len());
        for (idx, (_, pose)) in others.iter().enumerate() {
            if let Some((rect, depth)) =
                silhouette_rect(ego_pose, &self.camera, &self.body, [pose.x, pose.y])
            {
                candidates.push((idx, rect, depth));
            }
        }
        candidates.sort_by(|a, b| {
            a.2.partial_cmp(&b.2)
                .unwrap()
                .then_with(|| others[a.0].0.cmp(&others[b.0].0))
        });

        for (slot, (idx, rect, depth)) in candidates.iter().enumerate() {
            debug_assert!(slot < OCCLUDER_OWNER as usize);
            self.paint(*rect, *depth as f32, *idx as u16);
        }
        for occ in occluders {
            if let Some((rect, depth)) = self.occluder_rect(ego_pose, occ) {
                self.paint(rect, depth as f32, OCCLUDER_OWNER);
            }
        }

        // count pixels owned by each candidate
        let mut counts = vec![0u32; others.len()];
        for (idx, rect, _) in &candidates {
            let (c0, c1, r0, r1) = rect.pixel_span();
            let mut count = 0u32;
            for row in r0..r1 {
                let base = row as usize * self.width;
                for col in c0..c1 {
                    let p = base + col as usize;
                    if self.stamp[p] == self.generation && self.owner[p] == *idx as u16 {
                        count += 1;
                    }
                }
            }
            counts[*idx] = count;
        }

        let mut visible = Vec::new();
        for (idx, rect, _) in &candidates {
            if counts[*idx] == 0 {
                continue;
            }
            let (agent_id, pose) = others[*idx];
            let cam = world_to_camera(ego_pose, &self.camera, [pose.x, pose.y, 0.0]);
            visible.push(VisibleAgent {
                agent_id,
                world_pose: pose,
                cam_pose: [cam[0], cam[1], cam[2], wrap_angle(pose.heading - ego_pose.heading)],
                pixel_count: counts[*idx],
                bbox2d: *rect,
            });
        }
        visible.sort_by_key(|v| v.agent_id);

        EgoFrameAnnotation {
            ego_id,
            step,
            ego_pose,
            visible,
        }
    }

    fn paint(&mut self, rect: PixelRect, depth: f32, owner: u16) {
        let (c0, c1, r0, r1) = rect.pixel_span();
        for row in r0..r1 {
            let base = row as usize * self.width;
            for col in c0..c1 {
                let p = base + col as usize;
                if self.stamp[p] != self.generation || depth < self.depth[p] {
                    self.stamp[p] = self.generation;
                    self.depth[p] = depth;
                    self.owner[p] = owner;
                }
            }
        }
    }

    /// Coarse screen-space bound of an occluder box: bounding rectangle of
    /// the in-front corners at the nearest corner depth.
    fn occluder_rect(&self, ego: GroundPose, occ: &OccluderBox) -> Option<(PixelRect, f64)> {
        let mut u_min = f64::INFINITY;
        let mut u_max = f64::NEG_INFINITY;
        let mut v_min = f64::INFINITY;
        let mut v_max = f64::NEG_INFINITY;
        let mut depth = f64::INFINITY;
        let mut any = false;
        for corner in 0..8 {
            let p = [
                if corner & 1 == 0 { occ.min[0] } else { occ.max[0] },
                if corner & 2 == 0 { occ.min[1] } else { occ.max[1] },
                if corner & 4 == 0 { occ.min[2] } else { occ.max[2] },
            ];
            let cam = world_to_camera(ego, &self.camera, p);
            if let Projection::Pixel { u, v } = project(&self.camera, cam) {
                any = true;
                u_min = u_min.min(u);
                u_max = u_max.max(u);
                v_min = v_min.min(v);
                v_max = v_max.max(v);
                depth = depth.min(cam[2]);
            }
        }
        if !any {
            return None;
        }
        PixelRect {
            u_min,
            v_min,
            u_max,
            v_max,
        }
        .clip_to_image(&self.camera)
        .map(|r| (r, depth))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn cam() -> CameraModel {
        CameraModel::default()
    }

    fn pose(x: f64, y: f64, heading: f64) -> GroundPose {
        GroundPose { x, y, heading }
    }

    #[test]
    fn vertical_fov_matches_spec() {
        assert_abs_diff_eq!(cam().vertical_fov_deg(), 67.38, epsilon = 0.01);
        assert_abs_diff_eq!(cam().focal_px(), 360.0, epsilon = 1e-12);
    }

    #[test]
    fn world_to_camera_axis_aligned() {
        let c = world_to_camera(pose(0.0, 0.0, FRAC_PI_2), &cam(), [0.0, 5.0, 1.7]);
        assert_abs_diff_eq!(c[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], -0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(c[2], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn world_to_camera_behind_sign() {
        let c = world_to_camera(pose(0.0, 0.0, FRAC_PI_2), &cam(), [0.0, -5.0, 1.6]);
        assert_abs_diff_eq!(c[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[2], -5.0, epsilon = 1e-12);
    }

    #[test]
    fn world_to_camera_translated_rotated() {
        let c = world_to_camera(pose(1.0, 1.0, 0.0), &cam(), [6.0, 1.0, 1.6]);
        assert_abs_diff_eq!(c[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[2], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn project_principal_point() {
        match project(&cam(), [0.0, 0.0, 5.0]) {
            Projection::Pixel { u, v } => {
                assert_abs_diff_eq!(u, 320.0, epsilon = 1e-12);
                assert_abs_diff_eq!(v, 240.0, epsilon = 1e-12);
            }
            _ => panic!("expected pixel"),
        }
    }

    #[test]
    fn project_known_offset() {
        match project(&cam(), [0.0, -0.1, 5.0]) {
            Projection::Pixel { u, v } => {
                assert_abs_diff_eq!(u, 320.0, epsilon = 1e-12);
                assert_abs_diff_eq!(v, 232.8, epsilon = 1e-12);
            }
            _ => panic!("expected pixel"),
        }
    }

    #[test]
    fn project_behind_camera() {
        assert_eq!(project(&cam(), [0.0, 0.0, -1.0]), Projection::BehindCamera);
    }

    // Brute-force oracle: test every pixel center against each cylinder
    // rectangle independently of the production rasterizer.
    fn oracle_counts(
        ego: GroundPose,
        camera: &CameraModel,
        body: &BodyModel,
        others: &[(i64, GroundPose)],
    ) -> Vec<u32> {
        struct Rect {
            u0: f64,
            v0: f64,
            u1: f64,
            v1: f64,
            depth: f64,
        }
        let f = camera.focal_px();
        let rects: Vec<Option<Rect>> = others
            .iter()
            .map(|(_, p)| {
                let dx = p.x - ego.x;
                let dy = p.y - ego.y;
                let (s, c) = ego.heading.sin_cos();
                let depth = dx * c + dy * s;
                if depth <= DEPTH_EPS_M {
                    return None;
                }
                let xc = dx * s - dy * c;
                let u = camera.principal[0] + f * xc / depth;
                let v_top = camera.principal[1] + f * (camera.height_m - body.height_m) / depth;
                let v_bot = camera.principal[1] + f * camera.height_m / depth;
                Some(Rect {
                    u0: u - f * body.radius_m / depth,
                    u1: u + f * body.radius_m / depth,
                    v0: v_top,
                    v1: v_bot,
                    depth,
                })
            })
            .collect();
        let mut counts = vec![0u32; others.len()];
        for row in 0..camera.image_h_px {
            for col in 0..camera.image_w_px {
                let (pu, pv) = (col as f64 + 0.5, row as f64 + 0.5);
                let mut best: Option<(f64, usize)> = None;
                for (i, rect) in rects.iter().enumerate() {
                    if let Some(r) = rect {
                        if pu >= r.u0 && pu < r.u1 && pv >= r.v0 && pv < r.v1 {
                            let better = match best {
                                None => true,
                                Some((d, j)) => {
                                    r.depth < d || (r.depth == d && others[i].0 < others[j].0)
                                }
                            };
                            if better {
                                best = Some((r.depth, i));
                            }
                        }
                    }
                }
                if let Some((_, i)) = best {
                    counts[i] += 1;
                }
            }
        }
        counts
    }

    #[test]
    fn single_agent_five_meters_ahead() {
        let mut raster = Rasterizer::new(cam(), BodyModel::default());
        let ego = pose(0.0, 0.0, 0.0);
        let others = [(1i64, pose(5.0, 0.0, 0.0))];
        let ann = raster.annotate(0, ego, &others, &[]);
        assert_eq!(ann.visible.len(), 1);
        let vis = &ann.visible[0];
        assert_abs_diff_eq!(vis.bbox2d.width(), 36.0, epsilon = 1e-9);
        assert_abs_diff_eq!(vis.bbox2d.height(), 122.4, epsilon = 1e-9);
        // frozen from the oracle below; the continuous-area figure is 4406.4
        assert_eq!(vis.pixel_count, 4392);
        let oracle = oracle_counts(ego, &cam(), &BodyModel::default(), &others);
        assert_eq!(vis.pixel_count, oracle[0]);
        let continuous = 4406.4;
        assert!((vis.pixel_count as f64 - continuous).abs() / continuous < 0.01);
    }

    #[test]
    fn full_occlusion_on_same_ray() {
        let mut raster = Rasterizer::new(cam(), BodyModel::default());
        let ego = pose(0.0, 0.0, 0.0);
        let others = [(1, pose(4.0, 0.0, 0.0)), (2, pose(8.0, 0.0, 0.0))];
        let ann = raster.annotate(0, ego, &others, &[]);
        assert_eq!(ann.visible.len(), 1);
        assert_eq!(ann.visible[0].agent_id, 1);
    }

    #[test]
    fn agent_behind_ego_absent() {
        let mut raster = Rasterizer::new(cam(), BodyModel::default());
        let ann = raster.annotate(0, pose(0.0, 0.0, 0.0), &[(1, pose(-5.0, 0.0, 0.0))], &[]);
        assert!(ann.visible.is_empty());
    }

    #[test]
    fn matches_oracle_on_random_scenes() {
        use rand::Rng;
        let mut rng = crate::rngkey::StreamKey::new(99, "raster-oracle").rng();
        let mut raster = Rasterizer::new(cam(), BodyModel::default());
        for _ in 0..25 {
            let ego = pose(0.0, 0.0, rng.gen_range(-3.14..3.14));
            let others: Vec<(i64, GroundPose)> = (1..=rng.gen_range(1..8))
                .map(|id| {
                    (
                        id,
                        pose(rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0), 0.0),
                    )
                })
                .collect();
            let ann = raster.annotate(0, ego, &others, &[]);
            let oracle = oracle_counts(ego, &cam(), &BodyModel::default(), &others);
            for (i, (id, _)) in others.iter().enumerate() {
                let got = ann
                    .visible
                    .iter()
                    .find(|v| v.agent_id == *id)
                    .map_or(0, |v| v.pixel_count);
                assert_eq!(got, oracle[i], "agent {id} mismatch");
            }
        }
    }

    #[test]
    fn distance_monotonicity() {
        let mut raster = Rasterizer::new(cam(), BodyModel::default());
        let mut last = u32::MAX;
        for i in 0..40 {
            let d = 3.0 + i as f64 * 0.45;
            let ann = raster.annotate(0, pose(0.0, 0.0, 0.0), &[(1, pose(d, 0.0, 0.0))], &[]);
            let count = ann.visible.first().map_or(0, |v| v.pixel_count);
            assert!(count <= last, "count grew from {last} to {count} at d={d}");
            last = count;
        }
    }

    #[test]
    fn visibility_matches_analytic_projection() {
        // with no occluders, an agent straight ahead is visible iff its
        // rectangle clips to at least one pixel center
        let camera = cam();
        let body = BodyModel::default();
        let mut raster = Rasterizer::new(camera, body);
        for i in 1..200 {
            let d = i as f64 * 0.75;
            let ann = raster.annotate(0, pose(0.0, 0.0, 0.0), &[(1, pose(d, 0.0, 0.0))], &[]);
            let visible = !ann.visible.is_empty();
            let expect = match silhouette_rect(pose(0.0, 0.0, 0.0), &camera, &body, [d, 0.0]) {
                Some((rect, _)) => {
                    let (c0, c1, r0, r1) = rect.pixel_span();
                    c1 > c0 && r1 > r0
                }
                None => false,
            };
            assert_eq!(visible, expect, "at distance {d}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn occluders_never_increase_counts(seed in 0u64..500) {
            use rand::Rng;
            let mut rng = crate::rngkey::StreamKey::new(seed, "occ").rng();
            let mut raster = Rasterizer::new(cam(), BodyModel::default());
            let ego = pose(0.0, 0.0, 0.0);
            let others: Vec<(i64, GroundPose)> = (1..=5)
                .map(|id| (id, pose(rng.gen_range(1.0..10.0), rng.gen_range(-4.0..4.0), 0.0)))
                .collect();
            let base = raster.annotate(0, ego, &others, &[]);
            let cx = rng.gen_range(0.5..8.0);
            let cy = rng.gen_range(-3.0..3.0);
            let occ = OccluderBox {
                min: [cx - 0.5, cy - 0.5, 0.0],
                max: [cx + 0.5, cy + 0.5, rng.gen_range(0.5..2.5)],
            };
            let with = raster.annotate(0, ego, &others, &[occ]);
            for (id, _) in &others {
                let before = base.visible.iter().find(|v| v.agent_id == *id).map_or(0, |v| v.pixel_count);
                let after = with.visible.iter().find(|v| v.agent_id == *id).map_or(0, |v| v.pixel_count);
                prop_assert!(after <= before);
            }
        }

        #[test]
        fn frustum_soundness(seed in 0u64..500) {
            use rand::Rng;
            let mut rng = crate::rngkey::StreamKey::new(seed, "frustum").rng();
            let mut raster = Rasterizer::new(cam(), BodyModel::default());
            let ego = pose(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-3.14..3.14));
            let others: Vec<(i64, GroundPose)> = (1..=6)
                .map(|id| (id, pose(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), 0.0)))
                .collect();
            let ann = raster.annotate(0, ego, &others, &[]);
            for vis in &ann.visible {
                prop_assert!(vis.pixel_count >= 1);
                prop_assert!(vis.cam_pose[2] > 0.0);
                prop_assert!(vis.bbox2d.u_min < vis.bbox2d.u_max);
                prop_assert!(vis.bbox2d.v_min < vis.bbox2d.v_max);
            }
        }
    }
}
