//! Run configuration: one TOML tree covering every pipeline stage.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use crate::egocam::{BodyModel, CameraModel, OccluderBox};
use crate::error::ConfigError;

/// Scene windowing parameters (20 steps = 8 observed + 12 predicted).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub t_obs: usize,
    pub t_pred: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { t_obs: 8, t_pred: 12 }
    }
}

impl WindowConfig {
    pub fn len(&self) -> usize {
        self.t_obs + self.t_pred
    }
}

/// Membership thresholds for the ego's visible set: at least `min_pixels`
/// visible pixels for at least `min_steps` steps (contiguous by default)
/// within the observation phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisibilityConfig {
    pub min_pixels: u32,
    pub min_steps: usize,
    pub contiguous: bool,
}

impl Default for VisibilityConfig {
    fn default() -> Self {
        VisibilityConfig { min_pixels: 100, min_steps: 3, contiguous: true }
    }
}

/// Stochastic corruption applied to FPV-GT observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub p_tracklet_drop: f64,
    pub p_box_drop: f64,
    pub p_id_switch: f64,
    pub sigma_pos: f64,
    /// Apply the id-switch roll per box-drop-surviving step (`"surviving"`,
    /// default) or per originally visible step (`"visible"`).
    pub id_switch_basis: IdSwitchBasis,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            p_tracklet_drop: 0.01,
            p_box_drop: 0.10,
            p_id_switch: 0.02,
            sigma_pos: 0.05,
            id_switch_basis: IdSwitchBasis::Surviving,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, p) in [
            ("p_tracklet_drop", self.p_tracklet_drop),
            ("p_box_drop", self.p_box_drop),
            ("p_id_switch", self.p_id_switch),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::Invalid(format!("{name} must be in [0,1], got {p}")));
            }
        }
        if self.sigma_pos < 0.0 {
            return Err(ConfigError::Invalid(format!(
                "sigma_pos must be >= 0, got {}",
                self.sigma_pos
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdSwitchBasis {
    Surviving,
    Visible,
}

/// Detection score model: mean decays linearly with distance, Gaussian
/// spread around it, separate distribution for false positives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreModel {
    pub mean_at_zero: f64,
    pub decay_per_m: f64,
    pub sigma: f64,
    pub ghost_mean: f64,
    pub ghost_sigma: f64,
}

impl Default for ScoreModel {
    fn default() -> Self {
        ScoreModel {
            mean_at_zero: 0.95,
            decay_per_m: 0.02,
            sigma: 0.05,
            ghost_mean: 0.35,
            ghost_sigma: 0.15,
        }
    }
}

/// Parametric synthetic detector standing in for an image-based 3D detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub p_miss_base: f64,
    /// Additional miss probability per meter beyond `miss_dist_offset_m`.
    pub p_miss_dist_coeff: f64,
    pub miss_dist_offset_m: f64,
    /// Range noise sigma per meter of distance.
    pub sigma_range_per_m: f64,
    pub sigma_bearing_rad: f64,
    /// Expected ghost detections per frame (Poisson rate).
    pub p_false_positive: f64,
    pub ghost_range_m: [f64; 2],
    /// Agents below this pixel count are not detector candidates.
    pub min_pixels: u32,
    pub score: ScoreModel,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            p_miss_base: 0.05,
            p_miss_dist_coeff: 0.01,
            miss_dist_offset_m: 5.0,
            sigma_range_per_m: 0.05,
            sigma_bearing_rad: 0.5_f64.to_radians(),
            p_false_positive: 0.1,
            ghost_range_m: [1.0, 15.0],
            min_pixels: 100,
            score: ScoreModel::default(),
        }
    }
}

impl DetectorConfig {
    /// A detector that reproduces ground truth exactly.
    pub fn noiseless() -> Self {
        DetectorConfig {
            p_miss_base: 0.0,
            p_miss_dist_coeff: 0.0,
            sigma_range_per_m: 0.0,
            sigma_bearing_rad: 0.0,
            p_false_positive: 0.0,
            score: ScoreModel { sigma: 0.0, ghost_sigma: 0.0, ..ScoreModel::default() },
            ..DetectorConfig::default()
        }
    }

    pub fn miss_probability(&self, distance: f64) -> f64 {
        (self.p_miss_base + self.p_miss_dist_coeff * (distance - self.miss_dist_offset_m).max(0.0))
            .clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Assignment {
    Optimal,
    Greedy,
}

/// Kalman tracker parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// Minimum BEV IoU for a detection-track association.
    pub assoc_iou_min: f64,
    pub min_hits: u32,
    pub max_misses: u32,
    /// Distance gate for giving a single-detection track its second point.
    pub proto_gate_m: f64,
    /// Fixed BEV footprint (width, length) for detections and ground truth.
    pub footprint_m: [f64; 2],
    pub assignment: Assignment,
    /// Diagonal floors keeping covariances invertible when the estimated
    /// process/observation noise vanishes.
    pub q_floor: f64,
    pub r_floor: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            assoc_iou_min: 0.1,
            min_hits: 2,
            max_misses: 2,
            proto_gate_m: 1.2,
            footprint_m: [0.5, 0.5],
            assignment: Assignment::Optimal,
            q_floor: 1e-9,
            r_floor: 1e-12,
        }
    }
}

/// Constant-velocity baseline predictor parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    /// Number of samples per prediction set (best-of-K).
    pub k: usize,
    /// Velocity estimated over the last `vel_window` observed points.
    pub vel_window: usize,
    pub sigma_heading: f64,
    pub sigma_speed: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig { k: 20, vel_window: 3, sigma_heading: 0.2, sigma_speed: 0.2 }
    }
}

/// Metric suite parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// ADE threshold for a trajectory-mAP true positive (meters).
    pub tau_ade: f64,
    /// IoU threshold shared by detection AP and tracking metrics.
    pub iou_min: f64,
    /// Number of evenly spaced recall levels in the AMOTA/AMOTP sweep.
    pub amota_recalls: usize,
    /// Report FDE from its own minimizing sample instead of the
    /// ADE-minimizing one.
    pub independent_min: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig { tau_ade: 2.0, iou_min: 0.5, amota_recalls: 40, independent_min: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadingConfig {
    pub slerp_window: usize,
}

impl Default for HeadingConfig {
    fn default() -> Self {
        HeadingConfig { slerp_window: 3 }
    }
}

/// Social-pooling operator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoolingConfig {
    pub bandwidth_m: f64,
}

impl Default for PoolingConfig {
    fn default() -> Self {
        PoolingConfig { bandwidth_m: 2.0 }
    }
}

/// The full run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 means one per core.
    pub jobs: usize,
    pub out_dir: PathBuf,
    pub manifest: PathBuf,
    pub window: WindowConfig,
    pub visibility: VisibilityConfig,
    pub headings: HeadingConfig,
    pub camera: CameraModel,
    pub body: BodyModel,
    pub occluders: Vec<OccluderBox>,
    pub noise: NoiseConfig,
    pub detector: DetectorConfig,
    pub tracker: TrackerConfig,
    pub predictor: PredictorConfig,
    pub pooling: PoolingConfig,
    pub metrics: MetricConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|source| ConfigError::Toml {
            path: path.display().to_string(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.noise.validate()?;
        if self.window.t_obs == 0 || self.window.t_pred == 0 {
            return Err(ConfigError::Invalid("t_obs and t_pred must be positive".into()));
        }
        if self.predictor.k == 0 {
            return Err(ConfigError::Invalid("predictor.k must be >= 1".into()));
        }
        if self.body.radius_m <= 0.0 || self.body.height_m <= 0.0 {
            return Err(ConfigError::Invalid("body radius and height must be positive".into()));
        }
        if self.metrics.amota_recalls == 0 {
            return Err(ConfigError::Invalid("metrics.amota_recalls must be >= 1".into()));
        }
        Ok(())
    }

    /// Stable hash of the effective configuration, embedded in every output
    /// header so artifacts are traceable to the run that produced them.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        let mut hash = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            hash.push_str(&format!("{byte:02x}"));
        }
        hash
    }
}
