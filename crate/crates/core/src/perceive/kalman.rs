//! Kalman filtering of 3D location and yaw with planar constant velocity.
//!
//! State is `(x, y, z, yaw, vx, vy)`: constant-velocity motion on the
//! ground plane, random walk on height and yaw. Observations are
//! `(x, y, z, yaw)` with the yaw innovation wrapped to `(-pi, pi]`.

use nalgebra::{SMatrix, SVector};

use crate::error::ConfigError;
use crate::trajio::wrap_angle;

pub type StateVector = SVector<f64, 6>;
pub type StateCov = SMatrix<f64, 6, 6>;
pub type ObsVector = SVector<f64, 4>;
pub type ObsCov = SMatrix<f64, 4, 4>;

/// Eigenvalue tolerance for the positive-semi-definiteness checks.
pub const PSD_TOL: f64 = 1e-9;

/// One tracked identity's filter state and lifecycle counters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub track_id: u64,
    pub mean: StateVector,
    pub covariance: StateCov,
    pub age: u32,
    pub misses: u32,
    pub hits: u32,
}

impl TrackState {
    pub fn new(track_id: u64, mean: StateVector, covariance: StateCov) -> Self {
        TrackState {
            track_id,
            mean,
            covariance,
            age: 0,
            misses: 0,
            hits: 1,
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.mean[0], self.mean[1]]
    }

    pub fn yaw(&self) -> f64 {
        self.mean[3]
    }

    /// Smallest eigenvalue of the (symmetrized) covariance.
    pub fn min_cov_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.covariance)
    }
}

pub fn min_eigenvalue(m: &StateCov) -> f64 {
    let sym = (m + m.transpose()) / 2.0;
    sym.symmetric_eigenvalues().min()
}

fn min_eigenvalue_obs(m: &ObsCov) -> f64 {
    let sym = (m + m.transpose()) / 2.0;
    sym.symmetric_eigenvalues().min()
}

/// Validate an observation covariance before use.
pub fn validate_observation_cov(r: &ObsCov) -> Result<(), ConfigError> {
    if min_eigenvalue_obs(r) < -PSD_TOL {
        return Err(ConfigError::NonPsdObservation);
    }
    Ok(())
}

fn transition(dt: f64) -> StateCov {
    let mut f = StateCov::identity();
    f[(0, 4)] = dt;
    f[(1, 5)] = dt;
    f
}

fn observation_matrix() -> SMatrix<f64, 4, 6> {
    let mut h = SMatrix::<f64, 4, 6>::zeros();
    h[(0, 0)] = 1.0;
    h[(1, 1)] = 1.0;
    h[(2, 2)] = 1.0;
    h[(3, 3)] = 1.0;
    h
}

/// Constant-velocity prediction: mean through the transition model,
/// covariance through `F P F' + Q`.
pub fn kalman_predict(state: &TrackState, dt: f64, q: &StateCov) -> TrackState {
    assert!(dt > 0.0, "dt must be positive");
    let f = transition(dt);
    let mut mean = f * state.mean;
    mean[3] = wrap_angle(mean[3]);
    let covariance = f * state.covariance * f.transpose() + q;
    let out = TrackState {
        mean,
        covariance: symmetrize(&covariance),
        age: state.age + 1,
        ..*state
    };
    debug_assert!(out.min_cov_eigenvalue() >= -PSD_TOL);
    out
}

/// Linear update on an `(x, y, z, yaw)` observation; Joseph form keeps the
/// posterior covariance PSD, the yaw innovation is wrapped.
pub fn kalman_update(
    state: &TrackState,
    obs: ObsVector,
    r: &ObsCov,
) -> Result<TrackState, ConfigError> {
    let h = observation_matrix();
    let mut innovation = obs - h * state.mean;
    innovation[3] = wrap_angle(innovation[3]);

    let s = h * state.covariance * h.transpose() + r;
    let chol = s.cholesky().ok_or(ConfigError::NonPsdObservation)?;
    let gain = state.covariance * h.transpose() * chol.inverse();

    let mut mean = state.mean + gain * innovation;
    mean[3] = wrap_angle(mean[3]);
    let identity = StateCov::identity();
    let ikh = identity - gain * h;
    let covariance = ikh * state.covariance * ikh.transpose() + gain * r * gain.transpose();

    let out = TrackState {
        mean,
        covariance: symmetrize(&covariance),
        hits: state.hits + 1,
        misses: 0,
        ..*state
    };
    debug_assert!(out.min_cov_eigenvalue() >= -PSD_TOL);
    Ok(out)
}

fn symmetrize(m: &StateCov) -> StateCov {
    (m + m.transpose()) / 2.0
}
