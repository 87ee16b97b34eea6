//! Parametric synthetic detector over ego-frame annotations.
//!
//! Stands in for an image-based 3D detector: each sufficiently visible
//! agent is detected with a distance-dependent probability, detected
//! positions carry range/bearing noise relative to the ego, ghost
//! detections appear Poisson-distributed inside the ego frustum, and every
//! detection gets a distance-decaying confidence score.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::config::DetectorConfig;
use crate::egocam::{CameraModel, EgoFrameAnnotation};
use crate::rngkey::StreamKey;
use crate::trajio::{wrap_angle, FoldName};

use super::geom::BevBox;

/// One synthetic detection in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub step: i64,
    pub position: [f64; 3],
    pub yaw: f64,
    pub bev_box: BevBox,
    pub score: f64,
}

fn agent_stream(seed: u64, fold: FoldName, ego: i64, step: i64, agent: i64, stage: &str) -> StreamKey {
    StreamKey::new(seed, stage)
        .with_bytes(fold.as_str().as_bytes())
        .with_i64(ego)
        .with_i64(step)
        .with_i64(agent)
}

/// Run the detector over one annotated ego frame.
pub fn synth_detect(
    annotation: &EgoFrameAnnotation,
    camera: &CameraModel,
    cfg: &DetectorConfig,
    footprint_m: [f64; 2],
    master_seed: u64,
    fold: FoldName,
) -> Vec<Detection> {
    let mut detections = Vec::new();
    let ego = annotation.ego_pose;

    for visible in &annotation.visible {
        if visible.pixel_count < cfg.min_pixels {
            continue;
        }
        let mut rng = agent_stream(
            master_seed,
            fold,
            annotation.ego_id,
            annotation.step,
            visible.agent_id,
            "detect",
        )
        .rng();

        let dx = visible.world_pose.x - ego.x;
        let dy = visible.world_pose.y - ego.y;
        let distance = dx.hypot(dy);
        if rng.gen_bool(cfg.miss_probability(distance)) {
            continue;
        }

        let bearing = dy.atan2(dx);
        let range_noise = sample_normal(&mut rng, cfg.sigma_range_per_m * distance);
        let bearing_noise = sample_normal(&mut rng, cfg.sigma_bearing_rad);
        let yaw_noise = sample_normal(&mut rng, cfg.sigma_bearing_rad);
        let r = distance + range_noise;
        let phi = bearing + bearing_noise;
        let position = [ego.x + r * phi.cos(), ego.y + r * phi.sin(), 0.0];
        let yaw = wrap_angle(visible.world_pose.heading + yaw_noise);

        let score_mean = cfg.score.mean_at_zero - cfg.score.decay_per_m * distance;
        let score = (score_mean + sample_normal(&mut rng, cfg.score.sigma)).clamp(0.0, 1.0);

        detections.push(Detection {
            step: annotation.step,
            position,
            yaw,
            bev_box: BevBox::new([position[0], position[1]], footprint_m, yaw),
            score,
        });
    }

    // ghost detections, uniform in the ego frustum
    if cfg.p_false_positive > 0.0 {
        let mut rng = agent_stream(
            master_seed,
            fold,
            annotation.ego_id,
            annotation.step,
            i64::MIN,
            "ghosts",
        )
        .rng();
        let poisson = Poisson::new(cfg.p_false_positive).expect("positive rate");
        let n_ghosts = poisson.sample(&mut rng) as u64;
        let half_fov = camera.horizontal_fov_deg().to_radians() / 2.0;
        for _ in 0..n_ghosts {
            let r = rng.gen_range(cfg.ghost_range_m[0]..cfg.ghost_range_m[1]);
            let phi = ego.heading + rng.gen_range(-half_fov..half_fov);
            let yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let position = [ego.x + r * phi.cos(), ego.y + r * phi.sin(), 0.0];
            let score = (cfg.score.ghost_mean + sample_normal(&mut rng, cfg.score.ghost_sigma))
                .clamp(0.0, 1.0);
            detections.push(Detection {
                step: annotation.step,
                position,
                yaw,
                bev_box: BevBox::new([position[0], position[1]], footprint_m, yaw),
                score,
            });
        }
    }

    detections
}

fn sample_normal<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        0.0
    } else {
        Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::egocam::{GroundPose, PixelRect, VisibleAgent};
    use approx::assert_abs_diff_eq;

    fn annotation(agents: &[(i64, f64, f64)]) -> EgoFrameAnnotation {
        EgoFrameAnnotation {
            ego_id: 0,
            step: 5,
            ego_pose: GroundPose { x: 0.0, y: 0.0, heading: 0.0 },
            visible: agents
                .iter()
                .map(|&(id, x, y)| VisibleAgent {
                    agent_id: id,
                    world_pose: GroundPose { x, y, heading: 0.3 },
                    cam_pose: [0.0, 0.0, x, 0.3],
                    pixel_count: 500,
                    bbox2d: PixelRect { u_min: 0.0, v_min: 0.0, u_max: 1.0, v_max: 1.0 },
                })
                .collect(),
        }
    }

    #[test]
    fn noiseless_detector_reproduces_ground_truth() {
        let ann = annotation(&[(1, 5.0, 0.0), (2, 3.0, 1.0)]);
        let dets = synth_detect(
            &ann,
            &CameraModel::default(),
            &DetectorConfig::noiseless(),
            [0.5, 0.5],
            42,
            FoldName::Eth,
        );
        assert_eq!(dets.len(), 2);
        assert_abs_diff_eq!(dets[0].position[0], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dets[0].position[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dets[0].yaw, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(dets[1].position[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn certain_miss_empties_output() {
        let ann = annotation(&[(1, 5.0, 0.0)]);
        let cfg = DetectorConfig { p_miss_base: 1.0, ..DetectorConfig::noiseless() };
        assert!(synth_detect(&ann, &CameraModel::default(), &cfg, [0.5, 0.5], 42, FoldName::Eth)
            .is_empty());
    }

    #[test]
    fn low_pixel_agents_skipped() {
        let mut ann = annotation(&[(1, 5.0, 0.0)]);
        ann.visible[0].pixel_count = 50;
        let dets = synth_detect(
            &ann,
            &CameraModel::default(),
            &DetectorConfig::noiseless(),
            [0.5, 0.5],
            42,
            FoldName::Eth,
        );
        assert!(dets.is_empty());
    }

    #[test]
    fn miss_rate_concentrates() {
        // fixed distance => fixed miss probability; count over many frames
        let cfg = DetectorConfig {
            p_miss_base: 0.2,
            p_miss_dist_coeff: 0.0,
            p_false_positive: 0.0,
            ..DetectorConfig::default()
        };
        let mut candidates = 0u64;
        let mut detected = 0u64;
        for step in 0..4000 {
            let mut ann = annotation(&[(1, 6.0, 0.0), (2, 6.0, 1.0), (3, 6.0, -1.0)]);
            ann.step = step;
            let dets =
                synth_detect(&ann, &CameraModel::default(), &cfg, [0.5, 0.5], 7, FoldName::Eth);
            candidates += 3;
            detected += dets.len() as u64;
        }
        let miss_rate = 1.0 - detected as f64 / candidates as f64;
        let sd = (0.2 * 0.8 / candidates as f64).sqrt();
        assert!(
            (miss_rate - 0.2).abs() < 4.0 * sd,
            "miss rate {miss_rate} outside 4 sigma of 0.2"
        );
    }

    #[test]
    fn detections_are_deterministic() {
        let ann = annotation(&[(1, 5.0, 0.0), (2, 3.0, 1.0)]);
        let cfg = DetectorConfig::default();
        let cam = CameraModel::default();
        let a = synth_detect(&ann, &cam, &cfg, [0.5, 0.5], 42, FoldName::Eth);
        let b = synth_detect(&ann, &cam, &cfg, [0.5, 0.5], 42, FoldName::Eth);
        assert_eq!(a, b);
    }
}
