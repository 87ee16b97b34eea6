//! Stage orchestration: generate, degrade, track, predict, evaluate,
//! stats — each a pure function of the run configuration and the upstream
//! artifacts, parallelized over independent (fold, window, ego) work with
//! deterministic merges so the byte output never depends on `--jobs`.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::config::RunConfig;
use crate::degrade::corrupt_scene;
use crate::egocam::{
    rect_iou, silhouette_rect, EgoFrameAnnotation, GroundPose, PixelRect, Rasterizer,
};
use crate::error::{DataError, Error};
use crate::metrics::{
    amota_amotp, detection_ap, evaluate_variant, DetectionFrame, EvalReport, MotFrame,
    MotSequence, TrackingBlock,
};
use crate::perceive::{
    bev_iou, build_fpv_det_scene, estimate_covariances, synth_detect, track_video, BevBox,
    Covariances,
};
use crate::predict::{predict_cv, PredictionSet};
use crate::rngkey::StreamKey;
use crate::scenegen::{
    build_bev_scene, build_fpv_gt_scenes, enumerate_windows, fold_statistics, FoldStats, Scene,
    Variant, VisibilityIndex,
};
use crate::trajio::{AgentTrack, Fold, FoldName};

/// Run `f` inside a dedicated rayon pool of `jobs` threads (0 = default
/// global pool).
pub fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    if jobs == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool")
            .install(f)
    }
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

/// Annotations plus the perfect-information scene variants of one fold.
pub struct Generated {
    pub annotations: Vec<EgoFrameAnnotation>,
    pub bev: Vec<Scene>,
    pub fpv_gt: Vec<Scene>,
}

/// Per-step occupancy of a fold: who is where at each step.
fn occupancy(fold: &Fold) -> BTreeMap<i64, Vec<(i64, GroundPose)>> {
    let mut map: BTreeMap<i64, Vec<(i64, GroundPose)>> = BTreeMap::new();
    for track in &fold.tracks {
        for (i, p) in track.positions.iter().enumerate() {
            let step = track.start_step + i as i64;
            map.entry(step).or_default().push((
                track.agent_id,
                GroundPose {
                    x: p[0],
                    y: p[1],
                    heading: track.headings[i],
                },
            ));
        }
    }
    for agents in map.values_mut() {
        agents.sort_by_key(|(id, _)| *id);
    }
    map
}

/// Annotate every (agent-as-ego, step) pair of a fold.
pub fn annotate_fold(cfg: &RunConfig, fold: &Fold) -> Vec<EgoFrameAnnotation> {
    let occ = occupancy(fold);
    let mut annotations: Vec<EgoFrameAnnotation> = fold
        .tracks
        .par_iter()
        .map_init(
            || Rasterizer::new(cfg.camera, cfg.body),
            |raster, ego| {
                let mut out = Vec::with_capacity(ego.len());
                for i in 0..ego.len() {
                    let step = ego.start_step + i as i64;
                    let ego_pose = GroundPose {
                        x: ego.positions[i][0],
                        y: ego.positions[i][1],
                        heading: ego.headings[i],
                    };
                    let others: Vec<(i64, GroundPose)> = occ
                        .get(&step)
                        .map(|agents| {
                            agents
                                .iter()
                                .filter(|(id, _)| *id != ego.agent_id)
                                .copied()
                                .collect()
                        })
                        .unwrap_or_default();
                    out.push(raster.annotate_at(
                        ego.agent_id,
                        step,
                        ego_pose,
                        &others,
                        &cfg.occluders,
                    ));
                }
                out
            },
        )
        .flatten()
        .collect();
    annotations.sort_by_key(|a| (a.ego_id, a.step));
    annotations
}

/// Build the `BEV` and `FPV_GT` variants of one fold.
pub fn run_generate(cfg: &RunConfig, fold: &Fold) -> Result<Generated, Error> {
    let annotations = annotate_fold(cfg, fold);
    let index = VisibilityIndex::from_annotations(&annotations);

    let windows = enumerate_windows(fold, &cfg.window);
    let bev: Vec<Scene> = windows
        .par_iter()
        .filter_map(|&ws| build_bev_scene(fold, ws, &cfg.window))
        .collect();

    let fpv_nested: Result<Vec<Vec<Scene>>, DataError> = bev
        .par_iter()
        .map(|scene| build_fpv_gt_scenes(fold, scene, &index, &cfg.window, &cfg.visibility))
        .collect();
    let mut fpv_gt: Vec<Scene> = fpv_nested?.into_iter().flatten().collect();
    fpv_gt.sort_by_key(|s| (s.window_start, s.ego_uid));

    Ok(Generated {
        annotations,
        bev,
        fpv_gt,
    })
}

// ---------------------------------------------------------------------------
// degrade
// ---------------------------------------------------------------------------

pub fn run_degrade(cfg: &RunConfig, fpv_gt: &[Scene]) -> Vec<Scene> {
    let mut scenes: Vec<Scene> = fpv_gt
        .par_iter()
        .map(|scene| corrupt_scene(scene, &cfg.noise, cfg.seed))
        .collect();
    scenes.sort_by_key(|s| (s.window_start, s.ego_uid));
    scenes
}

// ---------------------------------------------------------------------------
// track
// ---------------------------------------------------------------------------

/// Serializable per-frame detection-AP inputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ApFrame {
    pub dets_bev: Vec<(BevBox, f64)>,
    pub gts_bev: Vec<BevBox>,
    pub dets_2d: Vec<(PixelRect, f64)>,
    pub gts_2d: Vec<PixelRect>,
}

/// Tracking artifacts of one ego video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoTracking {
    pub ego_id: i64,
    pub mot: MotSequence,
    pub ap_frames: Vec<ApFrame>,
}

pub struct Tracked {
    pub fpv_det: Vec<Scene>,
    pub per_ego: Vec<EgoTracking>,
}

/// Detect and track every ego video, then substitute tracker output into
/// the observation phases of the fold's `FPV_GT` scenes.
pub fn run_track(
    cfg: &RunConfig,
    fold: &Fold,
    annotations: &[EgoFrameAnnotation],
    fpv_gt: &[Scene],
    train_fold: &Fold,
) -> Result<Tracked, Error> {
    let cov = estimate_covariances(&[train_fold], &cfg.detector, cfg.seed)?;
    run_track_with_covariances(cfg, fold, annotations, fpv_gt, &cov)
}

/// Same as [`run_track`] with externally supplied covariances.
pub fn run_track_with_covariances(
    cfg: &RunConfig,
    fold: &Fold,
    annotations: &[EgoFrameAnnotation],
    fpv_gt: &[Scene],
    cov: &Covariances,
) -> Result<Tracked, Error> {
    let ann_by_key: HashMap<(i64, i64), &EgoFrameAnnotation> = annotations
        .iter()
        .map(|a| ((a.ego_id, a.step), a))
        .collect();
    let scenes_by_ego: HashMap<i64, Vec<&Scene>> = {
        let mut map: HashMap<i64, Vec<&Scene>> = HashMap::new();
        for scene in fpv_gt {
            map.entry(scene.ego_id.expect("FPV scene has ego"))
                .or_default()
                .push(scene);
        }
        map
    };

    struct EgoResult {
        tracking: EgoTracking,
        scenes: Vec<Scene>,
    }

    let results: Result<Vec<EgoResult>, Error> = fold
        .tracks
        .par_iter()
        .map(|ego| {
            let mut frames: Vec<(i64, Vec<crate::perceive::Detection>)> = Vec::new();
            let mut ap_frames = Vec::new();
            let mut gt_frames: Vec<Vec<(i64, BevBox)>> = Vec::new();
            for i in 0..ego.len() {
                let step = ego.start_step + i as i64;
                let ann = ann_by_key.get(&(ego.agent_id, step)).ok_or(
                    DataError::MissingAnnotation {
                        ego: ego.agent_id,
                        step,
                    },
                )?;
                let dets = synth_detect(
                    ann,
                    &cfg.camera,
                    &cfg.detector,
                    cfg.tracker.footprint_m,
                    cfg.seed,
                    fold.name,
                );

                // detection-AP and tracking ground truth: candidates the
                // detector is responsible for
                let mut ap = ApFrame::default();
                let mut gts = Vec::new();
                for v in &ann.visible {
                    if v.pixel_count < cfg.detector.min_pixels {
                        continue;
                    }
                    let gt_box = BevBox::new(
                        [v.world_pose.x, v.world_pose.y],
                        cfg.tracker.footprint_m,
                        v.world_pose.heading,
                    );
                    ap.gts_bev.push(gt_box);
                    ap.gts_2d.push(v.bbox2d);
                    gts.push((v.agent_id, gt_box));
                }
                for det in &dets {
                    ap.dets_bev.push((det.bev_box, det.score));
                    if let Some((rect, _)) = silhouette_rect(
                        ann.ego_pose,
                        &cfg.camera,
                        &cfg.body,
                        [det.position[0], det.position[1]],
                    ) {
                        ap.dets_2d.push((rect, det.score));
                    }
                }
                ap_frames.push(ap);
                gt_frames.push(gts);
                frames.push((step, dets));
            }

            let tracks = track_video(&frames, &cfg.tracker, cov, fold.step_period)?;

            // tracklet-level scores, then MOT frames
            let mut mot = MotSequence::default();
            for (i, (step, _)) in frames.iter().enumerate() {
                let mut frame = MotFrame {
                    tracks: Vec::new(),
                    ground_truth: gt_frames[i].clone(),
                };
                for t in &tracks {
                    if let Some(pos) = t.steps.iter().position(|s| s == step) {
                        let score = t.scores.iter().sum::<f64>() / t.scores.len() as f64;
                        frame.tracks.push((
                            t.track_id as i64,
                            BevBox::new(t.positions[pos], cfg.tracker.footprint_m, t.yaws[pos]),
                            score,
                        ));
                    }
                }
                mot.frames.push(frame);
            }

            let scenes: Vec<Scene> = scenes_by_ego
                .get(&ego.agent_id)
                .map(|gt_scenes| {
                    gt_scenes
                        .iter()
                        .filter(|s| s.ego_uid == Some(ego.track_handle as i64))
                        .map(|s| build_fpv_det_scene(s, &tracks, fold, &cfg.window, 1.0))
                        .collect()
                })
                .unwrap_or_default();

            Ok(EgoResult {
                tracking: EgoTracking {
                    ego_id: ego.agent_id,
                    mot,
                    ap_frames,
                },
                scenes,
            })
        })
        .collect();

    let mut results = results?;
    results.sort_by_key(|r| r.tracking.ego_id);
    let mut fpv_det: Vec<Scene> = results.iter().flat_map(|r| r.scenes.clone()).collect();
    fpv_det.sort_by_key(|s| (s.window_start, s.ego_uid));
    Ok(Tracked {
        fpv_det,
        per_ego: results.into_iter().map(|r| r.tracking).collect(),
    })
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

/// Predictions for one scene, aligned with its tracklet order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePredictions {
    pub fold: FoldName,
    pub variant: Variant,
    pub window_start: i64,
    pub ego_uid: Option<i64>,
    pub sets: Vec<PredictionSet>,
}

/// Run the constant-velocity baseline over every tracklet of every scene.
pub fn run_predict(cfg: &RunConfig, scenes: &[Scene]) -> Vec<ScenePredictions> {
    let mut out: Vec<ScenePredictions> = scenes
        .par_iter()
        .map(|scene| {
            let sets = scene
                .tracklets
                .iter()
                .map(|t| {
                    let stream = StreamKey::new(cfg.seed, "predict-cv")
                        .with_bytes(scene.fold.as_str().as_bytes())
                        .with_bytes(scene.variant.as_str().as_bytes())
                        .with_i64(scene.window_start)
                        .with_i64(scene.ego_uid.unwrap_or(i64::MIN))
                        .with_i64(t.uid);
                    predict_cv(
                        t,
                        scene.t_obs,
                        scene.t_pred,
                        crate::trajio::STEP_PERIOD_S,
                        &cfg.predictor,
                        stream,
                    )
                })
                .collect();
            ScenePredictions {
                fold: scene.fold,
                variant: scene.variant,
                window_start: scene.window_start,
                ego_uid: scene.ego_uid,
                sets,
            }
        })
        .collect();
    out.sort_by_key(|p| (p.window_start, p.ego_uid));
    out
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

/// Pair scenes with their prediction records by (window, ego).
pub fn pair_scenes_predictions<'a>(
    scenes: &'a [Scene],
    predictions: &'a [ScenePredictions],
) -> Result<Vec<(&'a Scene, &'a [PredictionSet])>, DataError> {
    let by_key: HashMap<(i64, Option<i64>), &ScenePredictions> = predictions
        .iter()
        .map(|p| ((p.window_start, p.ego_uid), p))
        .collect();
    scenes
        .iter()
        .map(|scene| {
            by_key
                .get(&(scene.window_start, scene.ego_uid))
                .map(|p| (scene, p.sets.as_slice()))
                .ok_or_else(|| DataError::Record {
                    path: "predictions".into(),
                    line: 0,
                    message: format!(
                        "no predictions for window {} ego {:?}",
                        scene.window_start, scene.ego_uid
                    ),
                })
        })
        .collect()
}

/// Score one variant of one fold, attaching tracking metrics for `FPV_DET`.
pub fn run_evaluate(
    cfg: &RunConfig,
    algorithm: &str,
    fold: FoldName,
    variant: Variant,
    scenes: &[Scene],
    predictions: &[ScenePredictions],
    tracking: Option<&[EgoTracking]>,
) -> Result<EvalReport, Error> {
    let paired = pair_scenes_predictions(scenes, predictions)?;
    let mut report = evaluate_variant(algorithm, fold, variant, &paired, &cfg.metrics);
    if let Some(per_ego) = tracking {
        let sequences: Vec<MotSequence> = per_ego.iter().map(|e| e.mot.clone()).collect();
        let (amota, amotp) = amota_amotp(&sequences, &cfg.metrics, cfg.tracker.assignment);
        let bev_frames: Vec<DetectionFrame<BevBox>> = per_ego
            .iter()
            .flat_map(|e| &e.ap_frames)
            .map(|f| DetectionFrame {
                detections: f.dets_bev.clone(),
                ground_truth: f.gts_bev.clone(),
            })
            .collect();
        let frames_2d: Vec<DetectionFrame<PixelRect>> = per_ego
            .iter()
            .flat_map(|e| &e.ap_frames)
            .map(|f| DetectionFrame {
                detections: f.dets_2d.clone(),
                ground_truth: f.gts_2d.clone(),
            })
            .collect();
        report.tracking = Some(TrackingBlock {
            amota,
            amotp,
            ap2d: detection_ap(&frames_2d, rect_iou, cfg.metrics.iou_min),
            apbev: detection_ap(&bev_frames, |a, b| bev_iou(a, b), cfg.metrics.iou_min),
        });
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// artifact files
// ---------------------------------------------------------------------------

/// JSON-lines reading/writing with a schema-versioned header record.
pub mod artifacts {
    use super::*;

    #[derive(Debug, Serialize, Deserialize)]
    struct Header {
        schema: String,
        config_hash: String,
    }

    pub fn fold_dir(out_dir: &Path, fold: FoldName) -> PathBuf {
        out_dir.join(fold.as_str())
    }

    pub fn variant_dir(out_dir: &Path, fold: FoldName, variant: Variant) -> PathBuf {
        fold_dir(out_dir, fold).join(variant.as_str())
    }

    pub fn write_jsonl<T: Serialize>(
        path: &Path,
        schema: &str,
        config_hash: &str,
        records: &[T],
    ) -> Result<(), Error> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(
            &mut w,
            &Header {
                schema: schema.to_string(),
                config_hash: config_hash.to_string(),
            },
        )
        .map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
        for record in records {
            serde_json::to_writer(&mut w, record).map_err(std::io::Error::other)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>, Error> {
        let file = std::fs::File::open(path).map_err(|source| DataError::File {
            path: path.display().to_string(),
            source,
        })?;
        let reader = std::io::BufReader::new(file);
        let mut out = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if i == 0 {
                let header: Header =
                    serde_json::from_str(&line).map_err(|e| DataError::Record {
                        path: path.display().to_string(),
                        line: 1,
                        message: e.to_string(),
                    })?;
                if header.schema != schema {
                    return Err(DataError::SchemaMismatch {
                        found: header.schema,
                        expected: schema.to_string(),
                    }
                    .into());
                }
                continue;
            }
            out.push(
                serde_json::from_str(&line).map_err(|e| DataError::Record {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })?,
            );
        }
        Ok(out)
    }

    pub const SCHEMA_ANNOTATIONS: &str = "fpvbench/annotations/1";
    pub const SCHEMA_SCENES: &str = "fpvbench/scenes/1";
    pub const SCHEMA_PREDICTIONS: &str = "fpvbench/predictions/1";
    pub const SCHEMA_TRACKING: &str = "fpvbench/tracking/1";

    pub fn annotations_path(out_dir: &Path, fold: FoldName) -> PathBuf {
        fold_dir(out_dir, fold).join("annotations.jsonl")
    }

    pub fn scenes_path(out_dir: &Path, fold: FoldName, variant: Variant) -> PathBuf {
        variant_dir(out_dir, fold, variant).join("scenes.jsonl")
    }

    pub fn predictions_path(out_dir: &Path, fold: FoldName, variant: Variant) -> PathBuf {
        variant_dir(out_dir, fold, variant).join("predictions.jsonl")
    }

    pub fn tracking_path(out_dir: &Path, fold: FoldName) -> PathBuf {
        variant_dir(out_dir, fold, Variant::FpvDet).join("tracking.jsonl")
    }

    fn fmt_opt(v: Option<f64>) -> String {
        v.map(|x| format!("{x:.6}")).unwrap_or_default()
    }

    /// Table-shaped statistics CSV (one row per fold).
    pub fn write_stats_csv(
        path: &Path,
        config_hash: &str,
        rows: &[FoldStats],
    ) -> Result<(), Error> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "# schema=fpvbench/stats/1 config_hash={config_hash}")?;
        writeln!(w, "fold,scenes,tracklets_bev,tracklets_fpv_gt,tracklets_fpv_noisy,tracklets_fpv_det")?;
        for row in rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                row.fold,
                row.scenes,
                row.tracklets[&Variant::Bev],
                row.tracklets[&Variant::FpvGt],
                row.tracklets[&Variant::FpvNoisy],
                row.tracklets[&Variant::FpvDet],
            )?;
        }
        w.flush()?;
        Ok(())
    }

    /// Evaluation CSV: one row per (algorithm, fold, variant) plus one
    /// aggregate row per (algorithm, variant) averaged over folds.
    pub fn write_reports_csv(
        path: &Path,
        config_hash: &str,
        reports: &[EvalReport],
    ) -> Result<(), Error> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "# schema=fpvbench/evaluation/1 config_hash={config_hash}")?;
        writeln!(
            w,
            "algorithm,fold,variant,ade,fde,map,scenes,targets,predictions,amota,amotp,ap2d,apbev"
        )?;
        let mut rows = reports.to_vec();
        rows.sort_by(|a, b| {
            (&a.algorithm, a.fold, a.variant).cmp(&(&b.algorithm, b.fold, b.variant))
        });
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.algorithm,
                r.fold,
                r.variant,
                fmt_opt(r.ade),
                fmt_opt(r.fde),
                fmt_opt(r.map),
                r.scenes,
                r.targets,
                r.predictions,
                fmt_opt(r.tracking.map(|t| t.amota)),
                fmt_opt(r.tracking.map(|t| t.amotp)),
                fmt_opt(r.tracking.map(|t| t.ap2d)),
                fmt_opt(r.tracking.map(|t| t.apbev)),
            )?;
        }
        // per-variant aggregates over folds
        let mut groups: BTreeMap<(String, Variant), Vec<&EvalReport>> = BTreeMap::new();
        for r in &rows {
            groups.entry((r.algorithm.clone(), r.variant)).or_default().push(r);
        }
        for ((algorithm, variant), group) in groups {
            if group.len() < 2 {
                continue;
            }
            let mean = |f: &dyn Fn(&EvalReport) -> Option<f64>| -> Option<f64> {
                let vals: Vec<f64> = group.iter().filter_map(|r| f(r)).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            };
            writeln!(
                w,
                "{},Avg,{},{},{},{},{},{},{},{},{},{},{}",
                algorithm,
                variant,
                fmt_opt(mean(&|r| r.ade)),
                fmt_opt(mean(&|r| r.fde)),
                fmt_opt(mean(&|r| r.map)),
                group.iter().map(|r| r.scenes).sum::<usize>(),
                group.iter().map(|r| r.targets).sum::<usize>(),
                group.iter().map(|r| r.predictions).sum::<usize>(),
                fmt_opt(mean(&|r| r.tracking.map(|t| t.amota))),
                fmt_opt(mean(&|r| r.tracking.map(|t| t.amotp))),
                fmt_opt(mean(&|r| r.tracking.map(|t| t.ap2d))),
                fmt_opt(mean(&|r| r.tracking.map(|t| t.apbev))),
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_reports_json(
        path: &Path,
        config_hash: &str,
        reports: &[EvalReport],
    ) -> Result<(), Error> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        #[derive(Serialize)]
        struct Summary<'a> {
            schema: &'a str,
            config_hash: &'a str,
            reports: &'a [EvalReport],
        }
        let mut rows = reports.to_vec();
        rows.sort_by(|a, b| {
            (&a.algorithm, a.fold, a.variant).cmp(&(&b.algorithm, b.fold, b.variant))
        });
        let text = serde_json::to_string_pretty(&Summary {
            schema: "fpvbench/evaluation/1",
            config_hash,
            reports: &rows,
        })
        .map_err(std::io::Error::other)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

/// BEV scene/tracklet counts straight from the fold (no annotations
/// needed); FPV columns are filled by the caller from scene files.
pub fn bev_statistics(cfg: &RunConfig, fold: &Fold) -> (usize, usize) {
    let windows = enumerate_windows(fold, &cfg.window);
    let accepted: Vec<usize> = windows
        .par_iter()
        .filter_map(|&ws| build_bev_scene(fold, ws, &cfg.window).map(|s| s.tracklets.len()))
        .collect();
    (accepted.len(), accepted.iter().sum())
}

/// Collect a full statistics row for one fold from materialized scenes.
pub fn stats_row(
    fold: FoldName,
    bev: &[Scene],
    fpv_gt: &[Scene],
    fpv_noisy: &[Scene],
    fpv_det: &[Scene],
) -> FoldStats {
    let mut by_variant = HashMap::new();
    by_variant.insert(Variant::Bev, bev.to_vec());
    by_variant.insert(Variant::FpvGt, fpv_gt.to_vec());
    by_variant.insert(Variant::FpvNoisy, fpv_noisy.to_vec());
    by_variant.insert(Variant::FpvDet, fpv_det.to_vec());
    fold_statistics(fold, &by_variant)
}

/// Tracks of every agent fully present in at least one accepted window —
/// the ego set (used by tests and by callers needing the count).
pub fn window_egos<'a>(cfg: &RunConfig, fold: &'a Fold) -> Vec<&'a AgentTrack> {
    let windows = enumerate_windows(fold, &cfg.window);
    let len = cfg.window.len() as i64;
    fold.tracks
        .iter()
        .filter(|t| windows.iter().any(|&ws| t.covers(ws, ws + len)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_fold, SynthConfig};

    fn small_cfg() -> RunConfig {
        RunConfig {
            seed: 77,
            ..RunConfig::default()
        }
    }

    fn small_fold() -> Fold {
        synth_fold(
            FoldName::Zara1,
            &SynthConfig {
                n_steps: 120,
                target_agents: 8,
                ..SynthConfig::default()
            },
            21,
            3,
        )
    }

    #[test]
    fn generate_produces_scenes() {
        let cfg = small_cfg();
        let fold = small_fold();
        let gen = run_generate(&cfg, &fold).unwrap();
        assert!(!gen.bev.is_empty(), "synthetic fold should yield BEV scenes");
        assert!(gen.fpv_gt.len() >= gen.bev.len());
        assert!(gen.annotations.len() >= fold.tracks.iter().map(|t| t.len()).sum::<usize>());
    }

    #[test]
    fn full_pipeline_деterministic_across_jobs() {
        let cfg = small_cfg();
        let fold = small_fold();
        let run = |jobs: usize| {
            with_pool(jobs, || {
                let gen = run_generate(&cfg, &fold).unwrap();
                let noisy = run_degrade(&cfg, &gen.fpv_gt);
                let preds = run_predict(&cfg, &gen.fpv_gt);
                (gen.bev, gen.fpv_gt, noisy, preds)
            })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(serde_json::to_string(&a.0).unwrap(), serde_json::to_string(&b.0).unwrap());
        assert_eq!(serde_json::to_string(&a.1).unwrap(), serde_json::to_string(&b.1).unwrap());
        assert_eq!(serde_json::to_string(&a.2).unwrap(), serde_json::to_string(&b.2).unwrap());
        assert_eq!(serde_json::to_string(&a.3).unwrap(), serde_json::to_string(&b.3).unwrap());
    }

    #[test]
    fn jsonl_roundtrip_and_schema_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenes.jsonl");
        let cfg = small_cfg();
        let fold = small_fold();
        let gen = run_generate(&cfg, &fold).unwrap();
        artifacts::write_jsonl(&path, artifacts::SCHEMA_SCENES, "abc", &gen.bev).unwrap();
        let back: Vec<Scene> = artifacts::read_jsonl(&path, artifacts::SCHEMA_SCENES).unwrap();
        assert_eq!(back, gen.bev);
        let err = artifacts::read_jsonl::<Scene>(&path, "fpvbench/scenes/999");
        assert!(matches!(
            err,
            Err(Error::Data(DataError::SchemaMismatch { .. }))
        ));
    }
}
