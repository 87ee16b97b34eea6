//! Track lifecycle over per-step detections, covariance estimation from
//! ground truth, and assembly of the `FPV_DET` scene variant.

use nalgebra::SMatrix;

use crate::config::{TrackerConfig, WindowConfig};
use crate::error::{ConfigError, DataError};
use crate::rngkey::StreamKey;
use crate::scenegen::{Scene, Tracklet, Variant};
use crate::trajio::{wrap_angle, Fold};

use super::associate::associate;
use super::detector::Detection;
use super::geom::{bev_iou, BevBox};
use super::kalman::{
    kalman_predict, kalman_update, validate_observation_cov, ObsCov, ObsVector, StateCov,
    StateVector, TrackState,
};

/// Tracker tracklet uids live above this base so they can never collide
/// with track handles or the negative synthetic-id range.
pub const TRACKER_UID_BASE: i64 = 1 << 40;

/// Minimum residual/sample count for covariance estimation.
const MIN_COV_SAMPLES: usize = 100;

/// One finished track: emitted observations at matched steps only.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackOut {
    pub track_id: u64,
    pub steps: Vec<i64>,
    pub positions: Vec<[f64; 2]>,
    pub yaws: Vec<f64>,
    pub scores: Vec<f64>,
}

/// Process/observation noise pair used by the tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariances {
    pub q: StateCov,
    pub r: ObsCov,
}

impl Covariances {
    /// Apply the tracker's diagonal floors so both matrices stay usable
    /// even when the estimates vanish.
    pub fn floored(&self, cfg: &TrackerConfig) -> Covariances {
        Covariances {
            q: self.q + StateCov::identity() * cfg.q_floor,
            r: self.r + ObsCov::identity() * cfg.r_floor,
        }
    }
}

/// Estimate `(Q, R)` from ground-truth tracks and the detector model.
///
/// `Q` comes from second moments of constant-velocity residuals over the
/// tracks (second differences of position, step-to-step heading change).
/// `R` is the Monte-Carlo covariance of the detector's range/bearing error
/// over co-present agent geometries sampled from the same folds.
pub fn estimate_covariances(
    folds: &[&Fold],
    detector: &crate::config::DetectorConfig,
    master_seed: u64,
) -> Result<Covariances, DataError> {
    use rand_distr::{Distribution, Normal};

    // process noise from constant-velocity residuals
    let mut q_sums = [0.0f64; 6];
    let mut n_residuals = 0usize;
    for fold in folds {
        let dt = fold.step_period;
        for track in &fold.tracks {
            let p = &track.positions;
            for t in 1..p.len().saturating_sub(1) {
                let rx = p[t + 1][0] - 2.0 * p[t][0] + p[t - 1][0];
                let ry = p[t + 1][1] - 2.0 * p[t][1] + p[t - 1][1];
                let ryaw = wrap_angle(track.headings[t + 1] - track.headings[t]);
                q_sums[0] += rx * rx;
                q_sums[1] += ry * ry;
                // z is pinned to the ground plane
                q_sums[3] += ryaw * ryaw;
                q_sums[4] += (rx / dt) * (rx / dt);
                q_sums[5] += (ry / dt) * (ry / dt);
                n_residuals += 1;
            }
        }
    }
    if n_residuals < MIN_COV_SAMPLES {
        return Err(DataError::InsufficientSamples {
            needed: MIN_COV_SAMPLES,
            found: n_residuals,
        });
    }
    let mut q = StateCov::zeros();
    for (i, sum) in q_sums.iter().enumerate() {
        q[(i, i)] = sum / n_residuals as f64;
    }

    // observation noise from simulated detection errors on real geometry
    let mut r_sum = SMatrix::<f64, 4, 4>::zeros();
    let mut n_samples = 0usize;
    'folds: for fold in folds {
        let tracks = &fold.tracks;
        for a in tracks {
            for b in tracks {
                if a.track_handle == b.track_handle || a.agent_id == b.agent_id {
                    continue;
                }
                let lo = a.start_step.max(b.start_step);
                let hi = a.end_step().min(b.end_step());
                if lo > hi {
                    continue;
                }
                let span = (hi - lo) as usize + 1;
                let take = span.min(32);
                for i in 0..take {
                    let step = lo + (i * span / take) as i64;
                    let pa = a.position_at(step).unwrap();
                    let pb = b.position_at(step).unwrap();
                    let d = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
                    if d < 1e-9 {
                        continue;
                    }
                    let bearing = (pb[1] - pa[1]).atan2(pb[0] - pa[0]);
                    let mut rng = StreamKey::new(master_seed, "r_estimate")
                        .with_bytes(fold.name.as_str().as_bytes())
                        .with(a.track_handle as u64)
                        .with(b.track_handle as u64)
                        .with_i64(step)
                        .rng();
                    let draw = |rng: &mut _, sigma: f64| {
                        if sigma <= 0.0 {
                            0.0
                        } else {
                            Normal::new(0.0, sigma).unwrap().sample(rng)
                        }
                    };
                    let dr = draw(&mut rng, detector.sigma_range_per_m * d);
                    let dphi = draw(&mut rng, detector.sigma_bearing_rad);
                    let dyaw = draw(&mut rng, detector.sigma_bearing_rad);
                    let err = ObsVector::from_row_slice(&[
                        (d + dr) * (bearing + dphi).cos() - d * bearing.cos(),
                        (d + dr) * (bearing + dphi).sin() - d * bearing.sin(),
                        0.0,
                        dyaw,
                    ]);
                    r_sum += err * err.transpose();
                    n_samples += 1;
                    if n_samples >= 2_000_000 {
                        break 'folds;
                    }
                }
            }
        }
    }
    if n_samples < MIN_COV_SAMPLES {
        return Err(DataError::InsufficientSamples {
            needed: MIN_COV_SAMPLES,
            found: n_samples,
        });
    }
    let r = r_sum / n_samples as f64;
    Ok(Covariances { q, r })
}

struct LiveTrack {
    state: TrackState,
    history: Vec<(i64, [f64; 2], f64, f64)>,
}

/// Per-ego-video tracker: predict, associate on BEV IoU, update.
///
/// A lone detection opens a one-step proto track; a second detection
/// within `proto_gate_m` on the next step initializes the velocity and
/// promotes it. Tracks die after `max_misses` consecutive misses and are
/// emitted (with their full history) once they have `min_hits` hits.
pub struct Tracker {
    cfg: TrackerConfig,
    cov: Covariances,
    dt: f64,
    next_id: u64,
    live: Vec<LiveTrack>,
    protos: Vec<Detection>,
    finished: Vec<TrackOut>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig, cov: &Covariances, dt: f64) -> Result<Self, ConfigError> {
        let cov = cov.floored(&cfg);
        validate_observation_cov(&cov.r)?;
        Ok(Tracker {
            cfg,
            cov,
            dt,
            next_id: 1,
            live: Vec::new(),
            protos: Vec::new(),
            finished: Vec::new(),
        })
    }

    fn initial_covariance(&self) -> StateCov {
        let r = &self.cov.r;
        let mut p = StateCov::zeros();
        p[(0, 0)] = r[(0, 0)];
        p[(1, 1)] = r[(1, 1)];
        p[(2, 2)] = r[(2, 2)];
        p[(3, 3)] = r[(3, 3)];
        // velocity from two noisy points
        p[(4, 4)] = 2.0 * r[(0, 0)] / (self.dt * self.dt);
        p[(5, 5)] = 2.0 * r[(1, 1)] / (self.dt * self.dt);
        p + StateCov::identity() * self.cfg.q_floor
    }

    fn det_box(&self, det: &Detection) -> BevBox {
        BevBox::new([det.position[0], det.position[1]], self.cfg.footprint_m, det.yaw)
    }

    fn track_box(&self, track: &TrackState) -> BevBox {
        BevBox::new(track.position(), self.cfg.footprint_m, track.yaw())
    }

    /// Advance one step. `step` values must be strictly increasing and
    /// contiguous for velocity initialization to be meaningful.
    pub fn observe(&mut self, step: i64, detections: &[Detection]) {
        // predict
        for track in &mut self.live {
            track.state = kalman_predict(&track.state, self.dt, &self.cov.q);
        }

        // associate confirmed-or-growing tracks to detections
        let iou: Vec<Vec<f64>> = self
            .live
            .iter()
            .map(|t| {
                detections
                    .iter()
                    .map(|d| bev_iou(&self.track_box(&t.state), &self.det_box(d)))
                    .collect()
            })
            .collect();
        let matching = associate(&iou, detections.len(), self.cfg.assoc_iou_min, self.cfg.assignment);

        for &(ti, di, _) in &matching.pairs {
            let det = &detections[di];
            let obs = ObsVector::from_row_slice(&[
                det.position[0],
                det.position[1],
                det.position[2],
                det.yaw,
            ]);
            let track = &mut self.live[ti];
            track.state = kalman_update(&track.state, obs, &self.cov.r)
                .expect("floored R is positive definite");
            track
                .history
                .push((step, track.state.position(), track.state.yaw(), det.score));
        }

        // age out unmatched tracks
        let mut keep = Vec::new();
        for (ti, mut track) in std::mem::take(&mut self.live).into_iter().enumerate() {
            if matching.pairs.iter().any(|&(t, _, _)| t == ti) {
                keep.push(track);
            } else {
                track.state.misses += 1;
                if track.state.misses >= self.cfg.max_misses {
                    self.retire(track);
                } else {
                    keep.push(track);
                }
            }
        }
        self.live = keep;

        // unmatched detections meet last step's protos (nearest-first)
        let free: Vec<usize> = matching.unmatched_detections;
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (pi, proto) in self.protos.iter().enumerate() {
            for &di in &free {
                let det = &detections[di];
                let dist = (det.position[0] - proto.position[0])
                    .hypot(det.position[1] - proto.position[1]);
                if dist <= self.cfg.proto_gate_m {
                    candidates.push((dist, pi, di));
                }
            }
        }
        candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut used_protos = vec![false; self.protos.len()];
        let mut promoted_dets = Vec::new();
        for (_, pi, di) in candidates {
            if used_protos[pi] || promoted_dets.contains(&di) {
                continue;
            }
            used_protos[pi] = true;
            promoted_dets.push(di);
            let proto = &self.protos[pi];
            let det = &detections[di];
            let vx = (det.position[0] - proto.position[0]) / self.dt;
            let vy = (det.position[1] - proto.position[1]) / self.dt;
            let mean = StateVector::from_row_slice(&[
                det.position[0],
                det.position[1],
                det.position[2],
                det.yaw,
                vx,
                vy,
            ]);
            let mut state = TrackState::new(self.next_id, mean, self.initial_covariance());
            self.next_id += 1;
            state.hits = 2;
            self.live.push(LiveTrack {
                state,
                history: vec![
                    (
                        proto.step,
                        [proto.position[0], proto.position[1]],
                        proto.yaw,
                        proto.score,
                    ),
                    (step, [det.position[0], det.position[1]], det.yaw, det.score),
                ],
            });
        }

        // everything still unmatched becomes next step's protos
        self.protos = free
            .into_iter()
            .filter(|di| !promoted_dets.contains(di))
            .map(|di| detections[di].clone())
            .collect();
    }

    fn retire(&mut self, track: LiveTrack) {
        if track.state.hits < self.cfg.min_hits {
            return;
        }
        self.finished.push(TrackOut {
            track_id: track.state.track_id,
            steps: track.history.iter().map(|h| h.0).collect(),
            positions: track.history.iter().map(|h| h.1).collect(),
            yaws: track.history.iter().map(|h| h.2).collect(),
            scores: track.history.iter().map(|h| h.3).collect(),
        });
    }

    /// Flush remaining tracks and return all emitted tracklets sorted by id.
    pub fn finish(mut self) -> Vec<TrackOut> {
        for track in std::mem::take(&mut self.live) {
            self.retire(track);
        }
        let mut out = self.finished;
        out.sort_by_key(|t| t.track_id);
        out
    }
}

/// Run the tracker over an ego video given per-step detections.
pub fn track_video(
    frames: &[(i64, Vec<Detection>)],
    cfg: &TrackerConfig,
    cov: &Covariances,
    dt: f64,
) -> Result<Vec<TrackOut>, ConfigError> {
    let mut tracker = Tracker::new(*cfg, cov, dt)?;
    for (step, dets) in frames {
        tracker.observe(*step, dets);
    }
    Ok(tracker.finish())
}

/// Substitute tracker output into one window's observation phase.
///
/// The ego keeps its ground-truth tracklet. Every track with at least one
/// emission inside the observation phase becomes a tracklet; its future is
/// re-attached from the ground-truth track it overlaps best (mean distance
/// over co-present steps at or under `overlap_gate_m`). Tracks overlapping
/// nothing keep no future and score as ghosts downstream. Targets are the
/// unchanged ground-truth targets.
pub fn build_fpv_det_scene(
    gt_scene: &Scene,
    tracks: &[TrackOut],
    fold: &Fold,
    window: &WindowConfig,
    overlap_gate_m: f64,
) -> Scene {
    let ws = gt_scene.window_start;
    let ego_uid = gt_scene.ego_uid.expect("FPV scene has an ego");
    let mut tracklets: Vec<Tracklet> = Vec::new();
    if let Some(ego) = gt_scene.tracklet(ego_uid) {
        tracklets.push(ego.clone());
    }

    for track in tracks {
        let in_window: Vec<usize> = track
            .steps
            .iter()
            .enumerate()
            .filter(|(_, &s)| s >= ws && s < ws + window.t_obs as i64)
            .map(|(i, _)| i)
            .collect();
        if in_window.is_empty() {
            continue;
        }

        // best spatiotemporal overlap among ground-truth tracks
        let mut best: Option<(f64, &crate::trajio::AgentTrack)> = None;
        for gt in &fold.tracks {
            if gt.track_handle as i64 == ego_uid {
                continue;
            }
            let mut dist_sum = 0.0;
            let mut n = 0usize;
            for &i in &in_window {
                if let Some(p) = gt.position_at(track.steps[i]) {
                    dist_sum += (p[0] - track.positions[i][0]).hypot(p[1] - track.positions[i][1]);
                    n += 1;
                }
            }
            if n == 0 {
                continue;
            }
            let mean = dist_sum / n as f64;
            if mean <= overlap_gate_m && best.is_none_or(|(b, _)| mean < b) {
                best = Some((mean, gt));
            }
        }

        let uid = TRACKER_UID_BASE + track.track_id as i64;
        let (source_uid, future) = match best {
            Some((_, gt)) => (
                Some(gt.track_handle as i64),
                (0..window.t_pred)
                    .map_while(|i| gt.position_at(ws + (window.t_obs + i) as i64))
                    .collect(),
            ),
            None => (None, Vec::new()),
        };
        tracklets.push(Tracklet {
            uid,
            agent_id: uid,
            source_uid,
            steps: in_window.iter().map(|&i| (track.steps[i] - ws) as usize).collect(),
            obs: in_window.iter().map(|&i| track.positions[i]).collect(),
            future,
            scores: in_window.iter().map(|&i| track.scores[i]).collect(),
        });
    }

    let ego_only = tracklets.len() <= 1;
    Scene {
        variant: Variant::FpvDet,
        tracklets,
        ego_only,
        ..gt_scene.clone()
    }
}
