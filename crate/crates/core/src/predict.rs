//! Baseline trajectory predictors with best-of-K sampling, plus the layer
//! normalization and distance-weighted social pooling operators as
//! standalone numeric primitives.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::PredictorConfig;
use crate::rngkey::StreamKey;
use crate::scenegen::Tracklet;

/// K sampled futures for one tracklet, each `t_pred` positions long.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub uid: i64,
    pub source_uid: Option<i64>,
    pub samples: Vec<Vec<[f64; 2]>>,
}

/// Constant-velocity baseline with perturbed extra samples.
///
/// Sample 0 extrapolates the mean velocity of the last
/// `min(vel_window, available)` observed points; samples `1..K` rotate and
/// rescale that velocity with zero-mean Gaussian draws keyed by
/// `(stream, sample index)`. A single observation predicts standing still.
/// Observation steps may be sparse; velocities use the true step gaps and
/// extrapolation runs from the last observed step to each future step.
pub fn predict_cv(
    tracklet: &Tracklet,
    t_obs: usize,
    t_pred: usize,
    step_period: f64,
    cfg: &PredictorConfig,
    stream: StreamKey,
) -> PredictionSet {
    assert!(!tracklet.obs.is_empty(), "predictor needs at least one observation");
    let last_idx = tracklet.obs.len() - 1;
    let last_pos = tracklet.obs[last_idx];
    let last_step = tracklet.steps[last_idx] as f64;

    let window = cfg.vel_window.max(1).min(tracklet.obs.len());
    let first_idx = tracklet.obs.len() - window;
    let dt_steps = tracklet.steps[last_idx] as f64 - tracklet.steps[first_idx] as f64;
    let velocity = if dt_steps > 0.0 {
        let dt = dt_steps * step_period;
        [
            (last_pos[0] - tracklet.obs[first_idx][0]) / dt,
            (last_pos[1] - tracklet.obs[first_idx][1]) / dt,
        ]
    } else {
        [0.0, 0.0]
    };

    let mut samples = Vec::with_capacity(cfg.k);
    for k in 0..cfg.k {
        let v = if k == 0 {
            velocity
        } else {
            let mut rng = stream.with(k as u64).rng();
            let dtheta = normal_draw(&mut rng, cfg.sigma_heading);
            let scale = 1.0 + normal_draw(&mut rng, cfg.sigma_speed);
            let (s, c) = dtheta.sin_cos();
            [
                (velocity[0] * c - velocity[1] * s) * scale,
                (velocity[0] * s + velocity[1] * c) * scale,
            ]
        };
        let track: Vec<[f64; 2]> = (0..t_pred)
            .map(|i| {
                let horizon = ((t_obs + i) as f64 - last_step) * step_period;
                [last_pos[0] + v[0] * horizon, last_pos[1] + v[1] * horizon]
            })
            .collect();
        samples.push(track);
    }

    PredictionSet {
        uid: tracklet.uid,
        source_uid: tracklet.source_uid,
        samples,
    }
}

fn normal_draw<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        0.0
    } else {
        Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
    }
}

/// Standardize a vector (population variance) and apply gain and bias.
pub fn layer_norm(v: &[f64], gain: &[f64], bias: &[f64], eps: f64) -> Vec<f64> {
    assert!(v.len() >= 2, "layer_norm needs at least 2 elements");
    assert_eq!(v.len(), gain.len());
    assert_eq!(v.len(), bias.len());
    assert!(eps > 0.0);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let denom = (var + eps).sqrt();
    v.iter()
        .zip(gain.iter().zip(bias))
        .map(|(x, (g, b))| (x - mean) / denom * g + b)
        .collect()
}

/// Per-agent feature rows plus positions for the similarity kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    pub states: Vec<Vec<f64>>,
    pub positions: Vec<[f64; 2]>,
}

impl StateMatrix {
    pub fn new(states: Vec<Vec<f64>>, positions: Vec<[f64; 2]>) -> Self {
        assert_eq!(states.len(), positions.len());
        StateMatrix { states, positions }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Row-normalized `exp(-d/bandwidth)` similarity weights (zero diagonal).
/// Rows with no mass stay all-zero.
pub fn social_weights(positions: &[[f64; 2]], bandwidth: f64) -> Vec<Vec<f64>> {
    let n = positions.len();
    let mut weights = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = (positions[i][0] - positions[j][0]).hypot(positions[i][1] - positions[j][1]);
            let s = (-d / bandwidth).exp();
            weights[i][j] = s;
            row_sum += s;
        }
        if row_sum > 0.0 {
            for w in &mut weights[i] {
                *w /= row_sum;
            }
        }
    }
    weights
}

/// Refine each agent's state with the distance-weighted average of the
/// others' states: `state_i + sum_j w_ij * state_j`. A single agent passes
/// through unchanged.
pub fn social_pool(matrix: &StateMatrix, bandwidth: f64) -> StateMatrix {
    assert!(!matrix.is_empty(), "social_pool needs at least one agent");
    let weights = social_weights(&matrix.positions, bandwidth);
    let dim = matrix.states[0].len();
    let states = matrix
        .states
        .iter()
        .enumerate()
        .map(|(i, state)| {
            let mut pooled = vec![0.0; dim];
            for (j, other) in matrix.states.iter().enumerate() {
                let w = weights[i][j];
                if w == 0.0 {
                    continue;
                }
                for (p, x) in pooled.iter_mut().zip(other) {
                    *p += w * x;
                }
            }
            state.iter().zip(&pooled).map(|(s, p)| s + p).collect()
        })
        .collect();
    StateMatrix {
        states,
        positions: matrix.positions.clone(),
    }
}

/// Displacement errors of one sample against the ground-truth future.
fn sample_errors(sample: &[[f64; 2]], gt: &[[f64; 2]]) -> (f64, f64) {
    debug_assert_eq!(sample.len(), gt.len());
    let mut sum = 0.0;
    let mut last = 0.0;
    for (p, g) in sample.iter().zip(gt) {
        last = (p[0] - g[0]).hypot(p[1] - g[1]);
        sum += last;
    }
    (sum / sample.len() as f64, last)
}

/// Best-of-K reduction: index of the ADE-minimizing sample with its ADE and
/// FDE. With `independent_min`, FDE instead comes from the
/// FDE-minimizing sample.
pub fn min_over_k(
    pred: &PredictionSet,
    gt: &[[f64; 2]],
    independent_min: bool,
) -> (usize, f64, f64) {
    assert!(!pred.samples.is_empty());
    assert!(pred.samples.iter().all(|s| s.len() == gt.len()));
    let mut best_idx = 0;
    let mut best_ade = f64::INFINITY;
    let mut best_fde_of_best_ade = f64::INFINITY;
    let mut min_fde = f64::INFINITY;
    for (i, sample) in pred.samples.iter().enumerate() {
        let (ade, fde) = sample_errors(sample, gt);
        if ade < best_ade {
            best_ade = ade;
            best_fde_of_best_ade = fde;
            best_idx = i;
        }
        min_fde = min_fde.min(fde);
    }
    let fde = if independent_min { min_fde } else { best_fde_of_best_ade };
    (best_idx, best_ade, fde)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn tracklet(steps: Vec<usize>, obs: Vec<[f64; 2]>) -> Tracklet {
        Tracklet {
            uid: 7,
            agent_id: 7,
            source_uid: Some(7),
            steps,
            obs,
            future: Vec::new(),
            scores: Vec::new(),
        }
    }

    fn cfg(k: usize) -> PredictorConfig {
        PredictorConfig { k, ..PredictorConfig::default() }
    }

    fn stream() -> StreamKey {
        StreamKey::new(5, "predict").with(1)
    }

    #[test]
    fn straight_history_continues_straight() {
        // 1 m/step along +x at 0.4 s/step
        let tr = tracklet(
            (0..8).collect(),
            (0..8).map(|i| [i as f64, 0.0]).collect(),
        );
        let pred = predict_cv(&tr, 8, 12, 0.4, &cfg(1), stream());
        assert_eq!(pred.samples.len(), 1);
        for (i, p) in pred.samples[0].iter().enumerate() {
            assert_abs_diff_eq!(p[0], 8.0 + i as f64, epsilon = 1e-9);
            assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn single_observation_stands_still() {
        let tr = tracklet(vec![3], vec![[2.0, 5.0]]);
        let pred = predict_cv(&tr, 8, 12, 0.4, &cfg(1), stream());
        for p in &pred.samples[0] {
            assert_eq!(*p, [2.0, 5.0]);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let tr = tracklet((0..8).collect(), (0..8).map(|i| [i as f64, 0.5]).collect());
        let a = predict_cv(&tr, 8, 12, 0.4, &cfg(20), stream());
        let b = predict_cv(&tr, 8, 12, 0.4, &cfg(20), stream());
        assert_eq!(a, b);
        let c = predict_cv(&tr, 8, 12, 0.4, &cfg(20), StreamKey::new(5, "predict").with(2));
        assert_ne!(a, c);
    }

    #[test]
    fn sparse_steps_use_true_gaps() {
        // observed at steps 0 and 4 only: velocity spans 4 steps
        let tr = tracklet(vec![0, 4], vec![[0.0, 0.0], [2.0, 0.0]]);
        let pred = predict_cv(&tr, 8, 2, 0.4, &cfg(1), stream());
        // v = 2.0 m / (4 * 0.4 s) = 1.25 m/s; step 8 is 4 steps past step 4
        assert_abs_diff_eq!(pred.samples[0][0][0], 2.0 + 1.25 * 4.0 * 0.4, epsilon = 1e-9);
    }

    #[test]
    fn layer_norm_analytic_example() {
        let out = layer_norm(&[1.0, 2.0, 3.0], &[1.0; 3], &[0.0; 3], 1e-12);
        assert_abs_diff_eq!(out[0], -1.2247, epsilon = 1e-4);
        assert_abs_diff_eq!(out[1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(out[2], 1.2247, epsilon = 1e-4);
    }

    #[test]
    fn layer_norm_constant_vector_zeroes() {
        let out = layer_norm(&[4.0; 5], &[1.0; 5], &[0.0; 5], 1e-12);
        for x in out {
            assert_abs_diff_eq!(x, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn layer_norm_scale_invariance() {
        let v = [0.3, -1.2, 2.0, 0.7];
        let gain = [1.0; 4];
        let bias = [0.0; 4];
        let a = layer_norm(&v, &gain, &bias, 1e-12);
        let scaled: Vec<f64> = v.iter().map(|x| x * 37.5).collect();
        let b = layer_norm(&scaled, &gain, &bias, 1e-12);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-6);
        }
    }

    #[test]
    fn layer_norm_output_moments() {
        let v: Vec<f64> = (0..16).map(|i| (i as f64 * 0.713).sin() * 3.0).collect();
        let out = layer_norm(&v, &vec![2.0; 16], &vec![0.5; 16], 1e-12);
        let n = out.len() as f64;
        let mean = out.iter().sum::<f64>() / n;
        let var = out.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert_abs_diff_eq!(mean, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(var, 4.0, epsilon = 1e-6);
    }

    #[test]
    fn social_pool_single_agent_identity() {
        let m = StateMatrix::new(vec![vec![1.0, 2.0]], vec![[0.0, 0.0]]);
        let out = social_pool(&m, 2.0);
        assert_eq!(out.states, m.states);
    }

    #[test]
    fn social_pool_two_agents_swap() {
        let m = StateMatrix::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![[0.0, 0.0], [3.0, 0.0]],
        );
        let out = social_pool(&m, 2.0);
        // pooled vector is exactly the other agent's state
        assert_abs_diff_eq!(out.states[0][0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.states[0][1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.states[1][0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.states[1][1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn min_over_k_exact_sample_wins() {
        let gt = vec![[1.0, 0.0], [2.0, 0.0]];
        let pred = PredictionSet {
            uid: 1,
            source_uid: Some(1),
            samples: vec![
                vec![[0.0, 0.0], [0.0, 0.0]],
                gt.clone(),
                vec![[1.0, 1.0], [2.0, 1.0]],
            ],
        };
        let (idx, ade, fde) = min_over_k(&pred, &gt, false);
        assert_eq!(idx, 1);
        assert_eq!(ade, 0.0);
        assert_eq!(fde, 0.0);
    }

    #[test]
    fn min_over_k_single_sample_is_plain_ade() {
        let gt = vec![[0.0, 0.0], [0.0, 0.0]];
        let pred = PredictionSet {
            uid: 1,
            source_uid: None,
            samples: vec![vec![[0.3, 0.4], [0.6, 0.8]]],
        };
        let (idx, ade, fde) = min_over_k(&pred, &gt, false);
        assert_eq!(idx, 0);
        assert_abs_diff_eq!(ade, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(fde, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn min_over_k_argmin_ade() {
        let gt = vec![[0.0, 0.0]];
        let pred = PredictionSet {
            uid: 1,
            source_uid: None,
            samples: vec![vec![[0.5, 0.0]], vec![[0.2, 0.0]]],
        };
        let (idx, ade, _) = min_over_k(&pred, &gt, false);
        assert_eq!(idx, 1);
        assert_abs_diff_eq!(ade, 0.2, epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn weights_rows_sum_to_one_or_zero(seed in 0u64..5_000, n in 1usize..8) {
            let mut rng = StreamKey::new(seed, "pool").rng();
            let positions: Vec<[f64; 2]> = (0..n)
                .map(|_| [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)])
                .collect();
            let w = social_weights(&positions, 2.0);
            for row in &w {
                let sum: f64 = row.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9 || sum == 0.0);
            }
        }

        #[test]
        fn pooled_in_convex_hull(seed in 0u64..5_000, n in 2usize..8) {
            let mut rng = StreamKey::new(seed, "hull").rng();
            let positions: Vec<[f64; 2]> = (0..n)
                .map(|_| [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)])
                .collect();
            let states: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-5.0..5.0)]).collect();
            let w = social_weights(&positions, 2.0);
            for i in 0..n {
                let pooled: f64 = (0..n).map(|j| w[i][j] * states[j][0]).sum();
                let lo = (0..n).filter(|&j| j != i).map(|j| states[j][0]).fold(f64::INFINITY, f64::min);
                let hi = (0..n).filter(|&j| j != i).map(|j| states[j][0]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(pooled >= lo - 1e-9 && pooled <= hi + 1e-9);
            }
        }

        #[test]
        fn pooling_is_permutation_equivariant(seed in 0u64..5_000, n in 2usize..7) {
            let mut rng = StreamKey::new(seed, "perm").rng();
            let positions: Vec<[f64; 2]> = (0..n)
                .map(|_| [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)])
                .collect();
            let states: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)])
                .collect();
            let out = social_pool(&StateMatrix::new(states.clone(), positions.clone()), 2.0);
            // reverse is an easy-to-invert permutation
            let rev_states: Vec<Vec<f64>> = states.iter().rev().cloned().collect();
            let rev_positions: Vec<[f64; 2]> = positions.iter().rev().copied().collect();
            let rev_out = social_pool(&StateMatrix::new(rev_states, rev_positions), 2.0);
            for i in 0..n {
                for d in 0..2 {
                    prop_assert!((out.states[i][d] - rev_out.states[n - 1 - i][d]).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn weights_translation_invariant(seed in 0u64..5_000, n in 2usize..7,
                                         tx in -50.0..50.0, ty in -50.0..50.0) {
            let mut rng = StreamKey::new(seed, "trans").rng();
            let positions: Vec<[f64; 2]> = (0..n)
                .map(|_| [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)])
                .collect();
            let shifted: Vec<[f64; 2]> = positions.iter().map(|p| [p[0] + tx, p[1] + ty]).collect();
            let a = social_weights(&positions, 2.0);
            let b = social_weights(&shifted, 2.0);
            for (ra, rb) in a.iter().zip(&b) {
                for (x, y) in ra.iter().zip(rb) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn cv_prediction_translation_equivariant(seed in 0u64..2_000, tx in -20.0f64..20.0, ty in -20.0f64..20.0) {
            let mut rng = StreamKey::new(seed, "cv-trans").rng();
            let obs: Vec<[f64; 2]> = (0..8)
                .map(|i| [i as f64 * 0.5 + rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)])
                .collect();
            let shifted: Vec<[f64; 2]> = obs.iter().map(|p| [p[0] + tx, p[1] + ty]).collect();
            let a = predict_cv(&tracklet((0..8).collect(), obs), 8, 12, 0.4, &cfg(5), stream());
            let b = predict_cv(&tracklet((0..8).collect(), shifted), 8, 12, 0.4, &cfg(5), stream());
            for (sa, sb) in a.samples.iter().zip(&b.samples) {
                for (pa, pb) in sa.iter().zip(sb) {
                    prop_assert!((pa[0] + tx - pb[0]).abs() < 1e-9);
                    prop_assert!((pa[1] + ty - pb[1]).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn min_over_k_never_exceeds_any_sample(seed in 0u64..2_000) {
            let mut rng = StreamKey::new(seed, "mink").rng();
            let gt: Vec<[f64; 2]> = (0..12).map(|_| [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)]).collect();
            let samples: Vec<Vec<[f64; 2]>> = (0..6)
                .map(|_| (0..12).map(|_| [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)]).collect())
                .collect();
            let pred = PredictionSet { uid: 0, source_uid: None, samples: samples.clone() };
            let (_, ade, _) = min_over_k(&pred, &gt, false);
            for s in &samples {
                let (sample_ade, _) = sample_errors(s, &gt);
                prop_assert!(ade <= sample_ade + 1e-12);
            }
        }
    }
}
