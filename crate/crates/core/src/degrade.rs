//! The `FPV_NOISY` variant: stochastic corruption of `FPV_GT` observations.
//!
//! Per non-ego tracklet, in order: whole-tracklet drop, per-step box drop,
//! per-step identity switches (each switch hands all subsequent steps a
//! fresh synthetic id), then per-axis Gaussian position noise. The ego
//! tracklet, every future, and the scene's target list are untouched.
//!
//! All draws come from streams keyed by (fold, window, ego, tracklet,
//! stage), so corruption is identical no matter how scenes are scheduled
//! across threads.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{IdSwitchBasis, NoiseConfig};
use crate::error::DataError;
use crate::rngkey::StreamKey;
use crate::scenegen::{Scene, Tracklet, Variant};

fn stream(seed: u64, scene: &Scene, uid: i64, stage: &str) -> StreamKey {
    StreamKey::new(seed, stage)
        .with_bytes(scene.fold.as_str().as_bytes())
        .with_i64(scene.window_start)
        .with_i64(scene.ego_uid.unwrap_or(i64::MIN))
        .with_i64(uid)
}

/// Synthetic id handed out after the `seq`-th identity switch of tracklet
/// `uid`. Negative by construction, so it can never collide with track
/// handles or tracker ids.
fn synthetic_uid(uid: i64, seq: u32) -> i64 {
    -(((uid + 1) << 4) + seq as i64)
}

/// Apply the four-part corruption to one `FPV_GT` scene.
pub fn corrupt_scene(scene: &Scene, cfg: &NoiseConfig, master_seed: u64) -> Scene {
    assert_eq!(scene.variant, Variant::FpvGt, "corrupt_scene expects FPV_GT input");

    let mut tracklets: Vec<Tracklet> = Vec::new();
    for tracklet in &scene.tracklets {
        if Some(tracklet.uid) == scene.ego_uid {
            tracklets.push(tracklet.clone());
            continue;
        }

        // (1) whole-tracklet drop
        let mut rng = stream(master_seed, scene, tracklet.uid, "tracklet_drop").rng();
        if rng.gen_bool(cfg.p_tracklet_drop) {
            continue;
        }

        // (2) independent per-step box drops
        let mut rng = stream(master_seed, scene, tracklet.uid, "box_drop").rng();
        let mut survivors: Vec<(usize, [f64; 2])> = Vec::new();
        for (&step, &pos) in tracklet.steps.iter().zip(&tracklet.obs) {
            let dropped = rng.gen_bool(cfg.p_box_drop);
            if !dropped {
                survivors.push((step, pos));
            } else if cfg.id_switch_basis == IdSwitchBasis::Visible {
                // keep a placeholder so the switch roll below still happens
                survivors.push((usize::MAX, pos));
            }
        }

        // (3) identity switches, scanning in time order
        let mut rng = stream(master_seed, scene, tracklet.uid, "id_switch").rng();
        let mut segments: Vec<(i64, Vec<(usize, [f64; 2])>)> = Vec::new();
        let mut current_uid = tracklet.uid;
        let mut switches = 0u32;
        for &(step, pos) in &survivors {
            if rng.gen_bool(cfg.p_id_switch) {
                switches += 1;
                current_uid = synthetic_uid(tracklet.uid, switches);
            }
            if step == usize::MAX {
                continue; // box-dropped placeholder under the `visible` basis
            }
            match segments.last_mut() {
                Some((uid, steps)) if *uid == current_uid => steps.push((step, pos)),
                _ => segments.push((current_uid, vec![(step, pos)])),
            }
        }

        // (4) Gaussian position noise on surviving observations
        let mut rng = stream(master_seed, scene, tracklet.uid, "pos_noise").rng();
        let normal = Normal::new(0.0, cfg.sigma_pos).expect("sigma_pos validated non-negative");
        for (_, steps) in segments.iter_mut() {
            for (_, pos) in steps.iter_mut() {
                pos[0] += normal.sample(&mut rng);
                pos[1] += normal.sample(&mut rng);
            }
        }

        for (uid, steps) in segments {
            if steps.is_empty() {
                continue;
            }
            tracklets.push(Tracklet {
                uid,
                agent_id: if uid == tracklet.uid { tracklet.agent_id } else { uid },
                source_uid: tracklet.source_uid,
                steps: steps.iter().map(|(s, _)| *s).collect(),
                obs: steps.iter().map(|(_, p)| *p).collect(),
                future: tracklet.future.clone(),
                scores: Vec::new(),
            });
        }
    }

    tracklets.sort_by_key(|t| (t.source_uid, t.steps[0]));
    let ego_only = tracklets.len() <= 1;
    Scene {
        variant: Variant::FpvNoisy,
        tracklets,
        ego_only,
        ..scene.clone()
    }
}

/// Empirical corruption rates recovered by diffing scene pairs.
///
/// Box statistics are conditioned on the tracklet surviving at all, which
/// biases the estimates by O(p_box_drop^n); negligible for the 8-step
/// observation phases the audit runs on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseAudit {
    pub tracklets: u64,
    pub tracklet_drops: u64,
    pub boxes: u64,
    pub box_drops: u64,
    pub switch_opportunities: u64,
    pub id_switches: u64,
    pub noise_samples: u64,
    pub noise_sq_sum: f64,
}

impl NoiseAudit {
    pub fn tracklet_drop_rate(&self) -> f64 {
        ratio(self.tracklet_drops, self.tracklets)
    }

    pub fn box_drop_rate(&self) -> f64 {
        ratio(self.box_drops, self.boxes)
    }

    pub fn id_switch_rate(&self) -> f64 {
        ratio(self.id_switches, self.switch_opportunities)
    }

    /// Zero-mean estimate of the per-axis position noise sigma.
    pub fn sigma_estimate(&self) -> f64 {
        if self.noise_samples == 0 {
            0.0
        } else {
            (self.noise_sq_sum / self.noise_samples as f64).sqrt()
        }
    }

    pub fn merge(&mut self, other: &NoiseAudit) {
        self.tracklets += other.tracklets;
        self.tracklet_drops += other.tracklet_drops;
        self.boxes += other.boxes;
        self.box_drops += other.box_drops;
        self.switch_opportunities += other.switch_opportunities;
        self.id_switches += other.id_switches;
        self.noise_samples += other.noise_samples;
        self.noise_sq_sum += other.noise_sq_sum;
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Recover realized corruption rates from an original/corrupted pair.
pub fn noise_audit(original: &Scene, corrupted: &Scene) -> Result<NoiseAudit, DataError> {
    if original.variant != Variant::FpvGt
        || corrupted.variant != Variant::FpvNoisy
        || original.fold != corrupted.fold
        || original.window_start != corrupted.window_start
        || original.ego_uid != corrupted.ego_uid
    {
        return Err(DataError::MismatchedScenes(format!(
            "expected FPV_GT/{:?}/{} against FPV_NOISY of the same window, got {:?}/{:?}/{} vs {:?}/{:?}/{}",
            original.fold,
            original.window_start,
            original.variant,
            original.fold,
            original.window_start,
            corrupted.variant,
            corrupted.fold,
            corrupted.window_start,
        )));
    }

    let mut audit = NoiseAudit::default();
    for tracklet in &original.tracklets {
        if Some(tracklet.uid) == original.ego_uid {
            continue;
        }
        let segments: Vec<&Tracklet> = corrupted
            .tracklets
            .iter()
            .filter(|t| t.source_uid == tracklet.source_uid)
            .collect();

        audit.tracklets += 1;
        if segments.is_empty() {
            audit.tracklet_drops += 1;
            continue;
        }

        let surviving: usize = segments.iter().map(|s| s.steps.len()).sum();
        audit.boxes += tracklet.steps.len() as u64;
        audit.box_drops += (tracklet.steps.len() - surviving) as u64;

        // every surviving step rolls the switch; a first-step switch shows
        // up as the first segment carrying a synthetic id
        audit.switch_opportunities += surviving as u64;
        let renamed_head = segments.first().is_some_and(|s| s.uid != tracklet.uid);
        audit.id_switches += (segments.len() - 1) as u64 + u64::from(renamed_head);

        for segment in &segments {
            for (&step, pos) in segment.steps.iter().zip(&segment.obs) {
                let idx = tracklet
                    .steps
                    .iter()
                    .position(|&s| s == step)
                    .expect("corrupted step exists in source");
                let src = tracklet.obs[idx];
                audit.noise_samples += 2;
                audit.noise_sq_sum +=
                    (pos[0] - src[0]).powi(2) + (pos[1] - src[1]).powi(2);
            }
        }
    }
    Ok(audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenegen::EvalTarget;
    use crate::trajio::FoldName;

    fn zero_noise() -> NoiseConfig {
        NoiseConfig {
            p_tracklet_drop: 0.0,
            p_box_drop: 0.0,
            p_id_switch: 0.0,
            sigma_pos: 0.0,
            ..NoiseConfig::default()
        }
    }

    fn gt_scene(window_start: i64, n_agents: usize, obs_len: usize) -> Scene {
        let mut tracklets = Vec::new();
        let mut targets = Vec::new();
        for i in 0..n_agents {
            let uid = (window_start * 100) + i as i64 + 1;
            let obs: Vec<[f64; 2]> = (0..obs_len).map(|s| [s as f64 * 0.5, i as f64]).collect();
            let future: Vec<[f64; 2]> =
                (0..12).map(|s| [(obs_len + s) as f64 * 0.5, i as f64]).collect();
            tracklets.push(Tracklet {
                uid,
                agent_id: uid,
                source_uid: Some(uid),
                steps: (0..obs_len).collect(),
                obs,
                future: future.clone(),
                scores: Vec::new(),
            });
            targets.push(EvalTarget { uid, agent_id: uid, future });
        }
        Scene {
            fold: FoldName::Hotel,
            window_start,
            t_obs: obs_len,
            t_pred: 12,
            variant: Variant::FpvGt,
            ego_id: Some(tracklets[0].agent_id),
            ego_uid: Some(tracklets[0].uid),
            tracklets,
            targets,
            ego_only: false,
        }
    }

    #[test]
    fn identity_config_is_identity() {
        let scene = gt_scene(0, 5, 8);
        let out = corrupt_scene(&scene, &zero_noise(), 42);
        assert_eq!(out.variant, Variant::FpvNoisy);
        assert_eq!(out.tracklets.len(), scene.tracklets.len());
        for t in &scene.tracklets {
            let got = out.tracklet(t.uid).expect("tracklet survives");
            assert_eq!(got.steps, t.steps);
            assert_eq!(got.obs, t.obs);
            assert_eq!(got.future, t.future);
        }
        assert_eq!(out.targets, scene.targets);
    }

    #[test]
    fn full_tracklet_drop_leaves_only_ego() {
        let scene = gt_scene(0, 5, 8);
        let cfg = NoiseConfig { p_tracklet_drop: 1.0, ..zero_noise() };
        let out = corrupt_scene(&scene, &cfg, 42);
        assert_eq!(out.tracklets.len(), 1);
        assert_eq!(Some(out.tracklets[0].uid), scene.ego_uid);
        assert!(out.ego_only);
        // futures of dropped agents remain available as targets
        assert_eq!(out.targets, scene.targets);
    }

    #[test]
    fn deterministic_and_order_independent() {
        let scene = gt_scene(3, 6, 8);
        let mut shuffled = scene.clone();
        shuffled.tracklets.reverse();
        let cfg = NoiseConfig::default();
        let a = corrupt_scene(&scene, &cfg, 7);
        let b = corrupt_scene(&scene, &cfg, 7);
        let c = corrupt_scene(&shuffled, &cfg, 7);
        assert_eq!(a, b);
        assert_eq!(a, c);
        let different_seed = corrupt_scene(&scene, &cfg, 8);
        assert_ne!(a, different_seed);
    }

    #[test]
    fn futures_never_touched() {
        let scene = gt_scene(0, 8, 8);
        let cfg = NoiseConfig {
            p_tracklet_drop: 0.3,
            p_box_drop: 0.4,
            p_id_switch: 0.3,
            sigma_pos: 0.5,
            ..NoiseConfig::default()
        };
        let out = corrupt_scene(&scene, &cfg, 11);
        for t in &out.tracklets {
            let src = scene
                .tracklets
                .iter()
                .find(|s| s.source_uid == t.source_uid)
                .unwrap();
            assert_eq!(t.future, src.future, "future bytes must be identical");
        }
        assert_eq!(out.targets, scene.targets);
    }

    #[test]
    fn switches_never_merge_and_never_add_steps() {
        let scene = gt_scene(0, 10, 8);
        let cfg = NoiseConfig {
            p_id_switch: 0.5,
            p_box_drop: 0.3,
            ..zero_noise()
        };
        let out = corrupt_scene(&scene, &cfg, 123);
        let mut seen = std::collections::HashSet::new();
        for t in &out.tracklets {
            assert!(seen.insert(t.uid), "uid {} reused", t.uid);
            let src = scene
                .tracklets
                .iter()
                .find(|s| s.source_uid == t.source_uid)
                .unwrap();
            for step in &t.steps {
                assert!(src.steps.contains(step), "step {step} not in source");
            }
        }
    }

    #[test]
    fn zero_noise_audit_is_all_zero() {
        let scene = gt_scene(0, 6, 8);
        let out = corrupt_scene(&scene, &zero_noise(), 5);
        let audit = noise_audit(&scene, &out).unwrap();
        assert_eq!(audit.tracklet_drop_rate(), 0.0);
        assert_eq!(audit.box_drop_rate(), 0.0);
        assert_eq!(audit.id_switch_rate(), 0.0);
        assert_eq!(audit.sigma_estimate(), 0.0);
    }

    #[test]
    fn mismatched_pair_is_error() {
        let a = gt_scene(0, 4, 8);
        let b = corrupt_scene(&gt_scene(1, 4, 8), &zero_noise(), 1);
        assert!(noise_audit(&a, &b).is_err());
    }

    #[test]
    fn audit_rates_concentrate_on_configured_values() {
        // moderate-size version of the acceptance audit: ~4e4 boxes
        let cfg = NoiseConfig::default();
        let mut audit = NoiseAudit::default();
        for w in 0..500 {
            let scene = gt_scene(w, 11, 8);
            let out = corrupt_scene(&scene, &cfg, 999);
            audit.merge(&noise_audit(&scene, &out).unwrap());
        }
        let n_t = audit.tracklets as f64;
        let sd_t = (0.01 * 0.99 / n_t).sqrt();
        assert!((audit.tracklet_drop_rate() - 0.01).abs() < 4.0 * sd_t);
        let n_b = audit.boxes as f64;
        let sd_b = (0.10 * 0.90 / n_b).sqrt();
        assert!((audit.box_drop_rate() - 0.10).abs() < 4.0 * sd_b);
        let n_s = audit.switch_opportunities as f64;
        let sd_s = (0.02 * 0.98 / n_s).sqrt();
        assert!((audit.id_switch_rate() - 0.02).abs() < 4.0 * sd_s);
        let n = audit.noise_samples as f64;
        let sigma_sd = 0.05 / (2.0 * n).sqrt();
        assert!((audit.sigma_estimate() - 0.05).abs() < 4.0 * sigma_sd);
    }
}
