//! The `FPV_DET` variant: a parametric synthetic detector feeding a
//! probabilistic tracker (Kalman filter on 3D location and yaw, BEV-IoU
//! data association, hit/miss lifecycle).

pub mod associate;
pub mod detector;
pub mod geom;
pub mod kalman;
pub mod tracker;

pub use associate::{associate, Matching};
pub use detector::{synth_detect, Detection};
pub use geom::{bev_iou, BevBox};
pub use kalman::{kalman_predict, kalman_update, ObsCov, ObsVector, StateCov, StateVector, TrackState};
pub use tracker::{
    build_fpv_det_scene, estimate_covariances, track_video, Covariances, TrackOut, Tracker,
    TRACKER_UID_BASE,
};
