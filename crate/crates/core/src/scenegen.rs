//! Sliding-window scene construction for the four dataset variants.
//!
//! A scene is one 20-step window (8 observed + 12 predicted). `BEV` scenes
//! keep exactly the agents present on all 20 steps. `FPV_GT` scenes exist
//! once per fully-present ego and keep the agents that ego actually sees
//! (at least P pixels for at least k steps of the observation phase), with
//! ground-truth futures attached unchanged.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::config::{VisibilityConfig, WindowConfig};
use crate::egocam::EgoFrameAnnotation;
use crate::error::DataError;
use crate::trajio::{AgentTrack, Fold, FoldName};

/// Dataset variant of a scene file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "BEV")]
    Bev,
    #[serde(rename = "FPV_GT")]
    FpvGt,
    #[serde(rename = "FPV_NOISY")]
    FpvNoisy,
    #[serde(rename = "FPV_DET")]
    FpvDet,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Bev, Variant::FpvGt, Variant::FpvNoisy, Variant::FpvDet];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Bev => "BEV",
            Variant::FpvGt => "FPV_GT",
            Variant::FpvNoisy => "FPV_NOISY",
            Variant::FpvDet => "FPV_DET",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "bev" => Ok(Variant::Bev),
            "fpv_gt" => Ok(Variant::FpvGt),
            "fpv_noisy" => Ok(Variant::FpvNoisy),
            "fpv_det" => Ok(Variant::FpvDet),
            other => Err(format!("unknown variant {other:?}")),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The portion of one agent's trajectory present in a scene.
///
/// `uid` is unique within the scene: ground-truth tracklets use the track
/// handle, identity-switched segments use reserved negative ids, tracker
/// outputs use a separate high range. `source_uid` links back to the
/// ground-truth tracklet whose agent this one observes (`None` for ghost
/// tracks). Observation steps are window-relative; `future` holds the raw
/// ground-truth positions from `t_obs` on and may be shorter than `t_pred`
/// when the agent leaves early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracklet {
    pub uid: i64,
    pub agent_id: i64,
    pub source_uid: Option<i64>,
    pub steps: Vec<usize>,
    pub obs: Vec<[f64; 2]>,
    pub future: Vec<[f64; 2]>,
    /// Per-step confidence for tracker outputs, parallel to `steps`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scores: Vec<f64>,
}

impl Tracklet {
    pub fn has_full_future(&self, t_pred: usize) -> bool {
        self.future.len() == t_pred
    }
}

/// A prediction target: a ground-truth identity with a full future.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTarget {
    pub uid: i64,
    pub agent_id: i64,
    pub future: Vec<[f64; 2]>,
}

/// One 20-step window under one variant's semantics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub fold: FoldName,
    pub window_start: i64,
    pub t_obs: usize,
    pub t_pred: usize,
    pub variant: Variant,
    pub ego_id: Option<i64>,
    pub ego_uid: Option<i64>,
    pub tracklets: Vec<Tracklet>,
    /// Every ground-truth identity that evaluation should expect a
    /// prediction for, independent of what survives in `tracklets`.
    pub targets: Vec<EvalTarget>,
    /// True when no qualifying non-ego agent was visible.
    pub ego_only: bool,
}

impl Scene {
    pub fn window_len(&self) -> usize {
        self.t_obs + self.t_pred
    }

    pub fn tracklet(&self, uid: i64) -> Option<&Tracklet> {
        self.tracklets.iter().find(|t| t.uid == uid)
    }
}

/// Per-ego pixel-count lookup built from frame annotations.
#[derive(Debug, Default, Clone)]
pub struct VisibilityIndex {
    map: HashMap<(i64, i64), Vec<(i64, u32)>>,
}

impl VisibilityIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, annotation: &EgoFrameAnnotation) {
        let entry = self
            .map
            .entry((annotation.ego_id, annotation.step))
            .or_default();
        for v in &annotation.visible {
            entry.push((v.agent_id, v.pixel_count));
        }
    }

    pub fn from_annotations<'a>(
        annotations: impl IntoIterator<Item = &'a EgoFrameAnnotation>,
    ) -> Self {
        let mut index = Self::new();
        for ann in annotations {
            index.insert(ann);
        }
        index
    }

    pub fn contains(&self, ego_id: i64, step: i64) -> bool {
        self.map.contains_key(&(ego_id, step))
    }

    pub fn pixels(&self, ego_id: i64, step: i64, agent_id: i64) -> u32 {
        self.map
            .get(&(ego_id, step))
            .and_then(|v| v.iter().find(|(a, _)| *a == agent_id))
            .map_or(0, |(_, px)| *px)
    }
}

/// Every candidate window start of a fold: single-step stride over the
/// fold's step range, keeping starts where at least one agent is present
/// somewhere in the window.
pub fn enumerate_windows(fold: &Fold, window: &WindowConfig) -> Vec<i64> {
    let Some((min_step, max_step)) = fold.step_range() else {
        return Vec::new();
    };
    let len = window.len() as i64;
    let mut starts = Vec::new();
    for start in min_step..=(max_step - len + 1) {
        let occupied = fold
            .tracks
            .iter()
            .any(|t| t.start_step < start + len && t.end_step() >= start);
        if occupied {
            starts.push(start);
        }
    }
    starts
}

fn slice_track(track: &AgentTrack, from_step: i64, count: usize) -> Vec<[f64; 2]> {
    (0..count)
        .filter_map(|i| track.position_at(from_step + i as i64))
        .collect()
}

/// Build the `BEV` scene for one window: agents fully present on all steps,
/// rejected (`None`) when fewer than two survive.
pub fn build_bev_scene(fold: &Fold, window_start: i64, window: &WindowConfig) -> Option<Scene> {
    let len = window.len() as i64;
    let mut tracklets: Vec<Tracklet> = fold
        .tracks
        .iter()
        .filter(|t| t.covers(window_start, window_start + len))
        .map(|t| Tracklet {
            uid: t.track_handle as i64,
            agent_id: t.agent_id,
            source_uid: Some(t.track_handle as i64),
            steps: (0..window.t_obs).collect(),
            obs: slice_track(t, window_start, window.t_obs),
            future: slice_track(t, window_start + window.t_obs as i64, window.t_pred),
            scores: Vec::new(),
        })
        .collect();
    if tracklets.len() < 2 {
        return None;
    }
    tracklets.sort_by_key(|t| t.uid);
    let targets = tracklets
        .iter()
        .map(|t| EvalTarget {
            uid: t.uid,
            agent_id: t.agent_id,
            future: t.future.clone(),
        })
        .collect();
    Some(Scene {
        fold: fold.name,
        window_start,
        t_obs: window.t_obs,
        t_pred: window.t_pred,
        variant: Variant::Bev,
        ego_id: None,
        ego_uid: None,
        tracklets,
        targets,
        ego_only: false,
    })
}

/// Does a step set contain a qualifying run under the k rule?
fn qualifies(steps: &[usize], vis: &VisibilityConfig) -> bool {
    if vis.contiguous {
        let mut run = 0usize;
        let mut best = 0usize;
        let mut prev: Option<usize> = None;
        for &s in steps {
            run = match prev {
                Some(p) if p + 1 == s => run + 1,
                _ => 1,
            };
            best = best.max(run);
            prev = Some(s);
        }
        best >= vis.min_steps
    } else {
        steps.len() >= vis.min_steps
    }
}

/// Build the per-ego `FPV_GT` scenes of one accepted `BEV` window.
///
/// Egos are the window's fully-present agents; each yields one scene whose
/// non-ego tracklets are the track segments visible to that ego for at
/// least `min_steps` of the first `t_obs` steps with `min_pixels` pixels.
/// Futures come from the raw tracks untouched. A window with no qualifying
/// non-ego agent still emits the ego-only scene, flagged as such.
pub fn build_fpv_gt_scenes(
    fold: &Fold,
    bev: &Scene,
    index: &VisibilityIndex,
    window: &WindowConfig,
    vis_cfg: &VisibilityConfig,
) -> Result<Vec<Scene>, DataError> {
    let window_start = bev.window_start;
    let mut scenes = Vec::new();
    for ego in &bev.tracklets {
        let mut tracklets = vec![Tracklet {
            uid: ego.uid,
            agent_id: ego.agent_id,
            source_uid: Some(ego.uid),
            steps: (0..window.t_obs).collect(),
            obs: ego.obs.clone(),
            future: ego.future.clone(),
            scores: Vec::new(),
        }];

        for t in 0..window.t_obs {
            let step = window_start + t as i64;
            if !index.contains(ego.agent_id, step) {
                return Err(DataError::MissingAnnotation {
                    ego: ego.agent_id,
                    step,
                });
            }
        }

        for other in &fold.tracks {
            if other.track_handle as i64 == ego.uid || other.agent_id == ego.agent_id {
                continue;
            }
            let visible_steps: Vec<usize> = (0..window.t_obs)
                .filter(|&t| {
                    let step = window_start + t as i64;
                    other.position_at(step).is_some()
                        && index.pixels(ego.agent_id, step, other.agent_id) >= vis_cfg.min_pixels
                })
                .collect();
            if visible_steps.is_empty() || !qualifies(&visible_steps, vis_cfg) {
                continue;
            }
            let obs = visible_steps
                .iter()
                .map(|&t| other.position_at(window_start + t as i64).unwrap())
                .collect();
            tracklets.push(Tracklet {
                uid: other.track_handle as i64,
                agent_id: other.agent_id,
                source_uid: Some(other.track_handle as i64),
                steps: visible_steps,
                obs,
                future: slice_track(other, window_start + window.t_obs as i64, window.t_pred),
                scores: Vec::new(),
            });
        }
        tracklets.sort_by_key(|t| t.uid);

        let targets = tracklets
            .iter()
            .filter(|t| t.has_full_future(window.t_pred))
            .map(|t| EvalTarget {
                uid: t.uid,
                agent_id: t.agent_id,
                future: t.future.clone(),
            })
            .collect();
        let ego_only = tracklets.len() == 1;
        scenes.push(Scene {
            fold: fold.name,
            window_start,
            t_obs: window.t_obs,
            t_pred: window.t_pred,
            variant: Variant::FpvGt,
            ego_id: Some(ego.agent_id),
            ego_uid: Some(ego.uid),
            tracklets,
            targets,
            ego_only,
        });
    }
    Ok(scenes)
}

/// One row of the per-fold scene/tracklet count table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldStats {
    pub fold: FoldName,
    pub scenes: usize,
    pub tracklets: HashMap<Variant, usize>,
}

/// Count scenes and tracklets per variant. The scene count is the number
/// of accepted windows (the `BEV` scene count).
pub fn fold_statistics(
    fold: FoldName,
    scenes_by_variant: &HashMap<Variant, Vec<Scene>>,
) -> FoldStats {
    let scenes = scenes_by_variant.get(&Variant::Bev).map_or(0, Vec::len);
    let tracklets = Variant::ALL
        .iter()
        .map(|v| {
            let count = scenes_by_variant
                .get(v)
                .map_or(0, |s| s.iter().map(|sc| sc.tracklets.len()).sum());
            (*v, count)
        })
        .collect();
    FoldStats {
        fold,
        scenes,
        tracklets,
    }
}
