//! Seeded synthetic crowd folds.
//!
//! Produces plausible plaza-crossing pedestrian traffic in the raw
//! trajectory format: agents spawn at the area edges over time, walk
//! toward a goal on another edge with drifting heading and speed, and
//! despawn on arrival. Useful for demos and for exercising the full
//! pipeline when no real dataset is on disk.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rngkey::StreamKey;
use crate::trajio::{records_to_tracks, Fold, FoldName, RawRecord, STEP_PERIOD_S};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_steps: usize,
    /// Mean number of simultaneously active agents.
    pub target_agents: usize,
    pub area_m: [f64; 2],
    pub speed_mean: f64,
    pub speed_sd: f64,
    /// AR(1) heading drift per step (radians).
    pub heading_jitter: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_steps: 400,
            target_agents: 14,
            area_m: [25.0, 18.0],
            speed_mean: 1.3,
            speed_sd: 0.25,
            heading_jitter: 0.22,
        }
    }
}

struct Walker {
    agent_id: i64,
    position: [f64; 2],
    goal: [f64; 2],
    speed: f64,
    drift: f64,
}

/// Generate raw records (frame stride 10, 2.5 FPS semantics) for one
/// synthetic fold.
pub fn synth_records(cfg: &SynthConfig, seed: u64) -> Vec<RawRecord> {
    let mut rng = StreamKey::new(seed, "synth-crowd").rng();
    let [length, width] = cfg.area_m;
    let mut records = Vec::new();
    let mut walkers: Vec<Walker> = Vec::new();
    let mut next_id: i64 = 1;

    let mut edge_point = |rng: &mut rand_chacha::ChaCha8Rng, edge: u8| -> [f64; 2] {
        match edge {
            0 => [0.0, rng.gen_range(0.0..width)],
            1 => [length, rng.gen_range(0.0..width)],
            2 => [rng.gen_range(0.0..length), 0.0],
            _ => [rng.gen_range(0.0..length), width],
        }
    };

    for step in 0..cfg.n_steps as i64 {
        // keep the population near the target with random arrivals
        while walkers.len() < cfg.target_agents && rng.gen_bool(0.6) {
            let entry_edge = rng.gen_range(0..4u8);
            let exit_edge = (entry_edge + rng.gen_range(1..4u8)) % 4;
            let position = edge_point(&mut rng, entry_edge);
            let goal = edge_point(&mut rng, exit_edge);
            let speed = (cfg.speed_mean + rng.gen_range(-1.0..1.0) * cfg.speed_sd)
                .clamp(0.6, 2.2);
            walkers.push(Walker {
                agent_id: next_id,
                position,
                goal,
                speed,
                drift: 0.0,
            });
            next_id += 1;
        }

        let mut still_walking = Vec::new();
        for mut w in walkers {
            records.push(RawRecord {
                frame_id: step * 10,
                agent_id: w.agent_id,
                x: w.position[0],
                y: w.position[1],
            });

            let to_goal = [w.goal[0] - w.position[0], w.goal[1] - w.position[1]];
            let dist = to_goal[0].hypot(to_goal[1]);
            if dist < w.speed * STEP_PERIOD_S {
                continue; // arrived, despawn after this record
            }
            w.drift = 0.7 * w.drift + rng.gen_range(-1.0..1.0) * cfg.heading_jitter;
            let heading = to_goal[1].atan2(to_goal[0]) + w.drift;
            let step_len = w.speed * STEP_PERIOD_S * rng.gen_range(0.85..1.15);
            w.position[0] += step_len * heading.cos();
            w.position[1] += step_len * heading.sin();
            still_walking.push(w);
        }
        walkers = still_walking;
    }

    records
}

/// Generate a complete fold (tracks with headings) in one call.
pub fn synth_fold(
    name: FoldName,
    cfg: &SynthConfig,
    seed: u64,
    slerp_window: usize,
) -> Fold {
    let records = synth_records(cfg, seed);
    let tracks = records_to_tracks(&records, slerp_window).expect("synthetic records are well-formed");
    Fold::new(name, tracks)
}

/// Raw-record lines in the standard file format (frame agent x y).
pub fn records_to_text(records: &[RawRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&format!("{} {} {:.6} {:.6}\n", r.frame_id, r.agent_id, r.x, r.y));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_fold_is_deterministic() {
        let cfg = SynthConfig::default();
        let a = synth_records(&cfg, 9);
        let b = synth_records(&cfg, 9);
        assert_eq!(a, b);
        let c = synth_records(&cfg, 10);
        assert_ne!(a, c);
    }

    #[test]
    fn agents_spawn_and_despawn() {
        let cfg = SynthConfig::default();
        let fold = synth_fold(FoldName::Zara1, &cfg, 3, 3);
        assert!(fold.tracks.len() > 20, "expect turnover, got {}", fold.tracks.len());
        let full_window_tracks = fold.tracks.iter().filter(|t| t.len() >= 20).count();
        assert!(full_window_tracks >= 5, "need window-filling tracks, got {full_window_tracks}");
    }

    #[test]
    fn speeds_look_pedestrian() {
        let fold = synth_fold(FoldName::Zara1, &SynthConfig::default(), 3, 3);
        let mut speeds = Vec::new();
        for t in &fold.tracks {
            for pair in t.positions.windows(2) {
                speeds.push(
                    (pair[1][0] - pair[0][0]).hypot(pair[1][1] - pair[0][1]) / STEP_PERIOD_S,
                );
            }
        }
        let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
        assert!(mean > 0.7 && mean < 2.0, "mean speed {mean}");
    }

    #[test]
    fn text_roundtrip_parses() {
        let records = synth_records(&SynthConfig { n_steps: 50, ..Default::default() }, 1);
        let text = records_to_text(&records);
        let parsed =
            crate::trajio::parse_trajectory_file(std::io::Cursor::new(text.as_bytes())).unwrap();
        assert_eq!(parsed.len(), records.len());
    }
}
