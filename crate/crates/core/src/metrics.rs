//! Evaluation suite: displacement errors, trajectory mAP with ADE-based
//! confidence, detection AP, and AMOTA/AMOTP.
//!
//! Trajectory mAP scores precision and recall of *which agents got
//! predicted*, not just how well: per scene every prediction is ranked by
//! its best-of-K ADE (lower is more confident), greedily claims its
//! ground-truth identity, and counts as a true positive when the ADE is
//! within `tau_ade`. Unpredicted targets are false negatives; tracker
//! ghosts are false positives. One pooled precision-recall curve per fold
//! gives the reported number.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::config::{Assignment, MetricConfig};
use crate::error::DataError;
use crate::perceive::{associate, bev_iou, BevBox};
use crate::predict::{min_over_k, PredictionSet};
use crate::scenegen::{Scene, Variant};
use crate::trajio::FoldName;

/// Mean and final L2 distance between two equal-length tracks.
pub fn ade_fde(pred: &[[f64; 2]], gt: &[[f64; 2]]) -> Result<(f64, f64), DataError> {
    if pred.len() != gt.len() {
        return Err(DataError::LengthMismatch {
            left: pred.len(),
            right: gt.len(),
        });
    }
    if pred.is_empty() {
        return Err(DataError::LengthMismatch { left: 0, right: 0 });
    }
    let mut sum = 0.0;
    let mut last = 0.0;
    for (p, g) in pred.iter().zip(gt) {
        last = (p[0] - g[0]).hypot(p[1] - g[1]);
        sum += last;
    }
    Ok((sum / pred.len() as f64, last))
}

// ---------------------------------------------------------------------------
// precision-recall machinery
// ---------------------------------------------------------------------------

/// Area under the all-point-interpolated precision-recall curve.
///
/// `flags` are true-positive markers in descending confidence order;
/// `num_gt` is the recall denominator.
pub fn average_precision(flags: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 || flags.is_empty() {
        return 0.0;
    }
    let n = flags.len();
    let mut precisions = Vec::with_capacity(n);
    let mut recalls = Vec::with_capacity(n);
    let mut tp = 0usize;
    for (i, &is_tp) in flags.iter().enumerate() {
        if is_tp {
            tp += 1;
        }
        precisions.push(tp as f64 / (i + 1) as f64);
        recalls.push(tp as f64 / num_gt as f64);
    }
    // precision envelope: max over suffixes
    let mut envelope = precisions.clone();
    for i in (0..n.saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for i in 0..n {
        ap += (recalls[i] - prev_recall) * envelope[i];
        prev_recall = recalls[i];
    }
    ap
}

/// One ranked prediction outcome inside a fold-level pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedOutcome {
    pub confidence: f64,
    pub is_tp: bool,
}

/// AP over a pool of outcomes ranked by descending confidence.
/// `tiebreak` orders equal confidences deterministically.
pub fn pooled_ap(mut outcomes: Vec<(RankedOutcome, u64)>, num_gt: usize) -> f64 {
    outcomes.sort_by(|a, b| {
        b.0.confidence
            .partial_cmp(&a.0.confidence)
            .unwrap()
            .then_with(|| a.1.cmp(&b.1))
    });
    let flags: Vec<bool> = outcomes.iter().map(|(o, _)| o.is_tp).collect();
    average_precision(&flags, num_gt)
}

// ---------------------------------------------------------------------------
// trajectory mAP
// ---------------------------------------------------------------------------

/// How a prediction scored inside its scene.
#[derive(Debug, Clone, Copy, PartialEq)]
enum PredOutcome {
    TruePositive(f64),
    FalsePositive(f64),
    /// Real agent without a full-future target: not scoreable either way.
    Unscored,
}

/// Greedy per-scene matching in ascending ADE order.
///
/// Predictions with a ground-truth identity claim their target when it is
/// unclaimed and the best-of-K ADE is at or under `tau_ade`. Ghosts (no
/// identity) are false positives ranked by their ADE against the nearest
/// target. Identities without a full-future target are skipped.
fn score_scene(
    scene: &Scene,
    preds: &[PredictionSet],
    tau_ade: f64,
    independent_min: bool,
) -> Vec<PredOutcome> {
    let target_by_uid: HashMap<i64, &crate::scenegen::EvalTarget> =
        scene.targets.iter().map(|t| (t.uid, t)).collect();

    // best-of-K ADE per prediction against its candidate target
    let mut scored: Vec<(usize, f64, Option<i64>)> = preds
        .iter()
        .enumerate()
        .map(|(i, pred)| {
            match pred.source_uid {
                Some(uid) => match target_by_uid.get(&uid) {
                    Some(target) => {
                        let (_, ade, _) = min_over_k(pred, &target.future, independent_min);
                        (i, ade, Some(uid))
                    }
                    None => (i, f64::NAN, None), // real agent, no target
                },
                None => {
                    // ghost: rank by plausibility against the nearest target
                    let ade = scene
                        .targets
                        .iter()
                        .map(|t| min_over_k(pred, &t.future, independent_min).1)
                        .fold(f64::INFINITY, f64::min);
                    (i, ade, None)
                }
            }
        })
        .collect();

    scored.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });

    let mut outcomes = vec![PredOutcome::Unscored; preds.len()];
    let mut claimed: Vec<i64> = Vec::new();
    for (i, ade, uid) in scored {
        let pred = &preds[i];
        outcomes[i] = match pred.source_uid {
            Some(source) => {
                if uid.is_none() {
                    PredOutcome::Unscored // source exists but is not a target
                } else if !claimed.contains(&source) && ade <= tau_ade {
                    claimed.push(source);
                    PredOutcome::TruePositive(-ade)
                } else {
                    PredOutcome::FalsePositive(-ade)
                }
            }
            None => PredOutcome::FalsePositive(if ade.is_finite() { -ade } else { f64::MIN }),
        };
    }
    outcomes
}

/// Pooled trajectory mAP over scenes of one fold.
pub fn trajectory_map(
    scenes: &[(&Scene, &[PredictionSet])],
    tau_ade: f64,
    independent_min: bool,
) -> f64 {
    let mut pool: Vec<(RankedOutcome, u64)> = Vec::new();
    let mut num_gt = 0usize;
    let mut tiebreak = 0u64;
    for (scene, preds) in scenes {
        num_gt += scene.targets.len();
        for outcome in score_scene(scene, preds, tau_ade, independent_min) {
            let ranked = match outcome {
                PredOutcome::TruePositive(c) => RankedOutcome { confidence: c, is_tp: true },
                PredOutcome::FalsePositive(c) => RankedOutcome { confidence: c, is_tp: false },
                PredOutcome::Unscored => continue,
            };
            pool.push((ranked, tiebreak));
            tiebreak += 1;
        }
    }
    pooled_ap(pool, num_gt)
}

/// Mean best-of-K displacement errors over identity-matched predictions.
///
/// Per target, the identity-sharing prediction with the lowest ADE scores
/// it; targets nobody predicted are skipped here (mAP accounts for them).
pub fn displacement_errors(
    scenes: &[(&Scene, &[PredictionSet])],
    independent_min: bool,
) -> Option<(f64, f64)> {
    let mut ade_sum = 0.0;
    let mut fde_sum = 0.0;
    let mut n = 0usize;
    for (scene, preds) in scenes {
        for target in &scene.targets {
            let best = preds
                .iter()
                .filter(|p| p.source_uid == Some(target.uid))
                .map(|p| {
                    let (_, ade, fde) = min_over_k(p, &target.future, independent_min);
                    (ade, fde)
                })
                .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            if let Some((ade, fde)) = best {
                ade_sum += ade;
                fde_sum += fde;
                n += 1;
            }
        }
    }
    (n > 0).then(|| (ade_sum / n as f64, fde_sum / n as f64))
}

// ---------------------------------------------------------------------------
// detection AP
// ---------------------------------------------------------------------------

/// One evaluation frame: scored detections and ground-truth boxes, both in
/// whatever box representation the `iou_fn` understands.
pub struct DetectionFrame<B> {
    pub detections: Vec<(B, f64)>,
    pub ground_truth: Vec<B>,
}

/// Greedy score-descending AP at one IoU threshold.
pub fn detection_ap<B>(
    frames: &[DetectionFrame<B>],
    iou_fn: impl Fn(&B, &B) -> f64,
    iou_min: f64,
) -> f64 {
    let num_gt: usize = frames.iter().map(|f| f.ground_truth.len()).sum();
    // (score, frame, det) in global rank order
    let mut order: Vec<(f64, usize, usize)> = frames
        .iter()
        .enumerate()
        .flat_map(|(fi, f)| {
            f.detections
                .iter()
                .enumerate()
                .map(move |(di, (_, score))| (*score, fi, di))
        })
        .collect();
    order.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
    });

    let mut claimed: Vec<Vec<bool>> = frames.iter().map(|f| vec![false; f.ground_truth.len()]).collect();
    let mut flags = Vec::with_capacity(order.len());
    for (_, fi, di) in order {
        let frame = &frames[fi];
        let det = &frame.detections[di].0;
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in frame.ground_truth.iter().enumerate() {
            if claimed[fi][gi] {
                continue;
            }
            let iou = iou_fn(det, gt);
            if iou >= iou_min && best.is_none_or(|(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        match best {
            Some((gi, _)) => {
                claimed[fi][gi] = true;
                flags.push(true);
            }
            None => flags.push(false),
        }
    }
    average_precision(&flags, num_gt)
}

// ---------------------------------------------------------------------------
// AMOTA / AMOTP
// ---------------------------------------------------------------------------

/// One tracking-evaluation frame of an ego video.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MotFrame {
    /// (track id, box, tracklet-level score)
    pub tracks: Vec<(i64, BevBox, f64)>,
    /// (ground-truth id, box)
    pub ground_truth: Vec<(i64, BevBox)>,
}

/// Frames of one continuously tracked ego video.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MotSequence {
    pub frames: Vec<MotFrame>,
}

/// CLEAR-MOT totals at one score cutoff.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClearMotTotals {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub id_switches: usize,
    pub dist_sum: f64,
    pub num_gt: usize,
}

impl ClearMotTotals {
    pub fn recall(&self) -> f64 {
        if self.num_gt == 0 {
            0.0
        } else {
            self.tp as f64 / self.num_gt as f64
        }
    }

    /// Recall-normalized MOTA at a given achieved recall, clamped to [0, 1].
    pub fn motar(&self) -> f64 {
        let recall = self.recall();
        if recall <= 0.0 || self.num_gt == 0 {
            return 0.0;
        }
        let g = self.num_gt as f64;
        let penalty =
            (self.fp + self.fn_ + self.id_switches) as f64 - (1.0 - recall) * g;
        (1.0 - penalty / (recall * g)).clamp(0.0, 1.0)
    }

    pub fn mean_distance(&self) -> f64 {
        if self.tp == 0 {
            0.0
        } else {
            self.dist_sum / self.tp as f64
        }
    }
}

/// Run CLEAR-MOT over sequences keeping only tracks scoring at least
/// `cutoff`. Matching keeps last frame's pairs while they still clear the
/// IoU gate, then assigns the rest to maximize IoU.
pub fn clear_mot(
    sequences: &[MotSequence],
    cutoff: f64,
    iou_min: f64,
    assignment: Assignment,
) -> ClearMotTotals {
    let mut totals = ClearMotTotals::default();
    for seq in sequences {
        let mut prev_match: HashMap<i64, i64> = HashMap::new();
        for frame in &seq.frames {
            let tracks: Vec<&(i64, BevBox, f64)> =
                frame.tracks.iter().filter(|(_, _, s)| *s >= cutoff).collect();
            totals.num_gt += frame.ground_truth.len();

            let mut gt_free: Vec<usize> = (0..frame.ground_truth.len()).collect();
            let mut tr_free: Vec<usize> = (0..tracks.len()).collect();
            let mut matches: Vec<(usize, usize, f64)> = Vec::new();

            // continuity first: keep last frame's pairing when still valid
            gt_free.retain(|&gi| {
                let (gt_id, gt_box) = &frame.ground_truth[gi];
                if let Some(&tid) = prev_match.get(gt_id) {
                    if let Some(pos) = tr_free
                        .iter()
                        .position(|&ti| tracks[ti].0 == tid && bev_iou(&tracks[ti].1, gt_box) >= iou_min)
                    {
                        let ti = tr_free.remove(pos);
                        matches.push((gi, ti, bev_iou(&tracks[ti].1, gt_box)));
                        return false;
                    }
                }
                true
            });

            // assign the rest
            if !gt_free.is_empty() && !tr_free.is_empty() {
                let iou: Vec<Vec<f64>> = gt_free
                    .iter()
                    .map(|&gi| {
                        tr_free
                            .iter()
                            .map(|&ti| bev_iou(&frame.ground_truth[gi].1, &tracks[ti].1))
                            .collect()
                    })
                    .collect();
                let matching = associate(&iou, tr_free.len(), iou_min, assignment);
                for (row, col, w) in matching.pairs {
                    matches.push((gt_free[row], tr_free[col], w));
                }
                let matched_rows: Vec<usize> = matches.iter().map(|m| m.0).collect();
                let matched_cols: Vec<usize> = matches.iter().map(|m| m.1).collect();
                gt_free.retain(|gi| !matched_rows.contains(gi));
                tr_free.retain(|ti| !matched_cols.contains(ti));
            }

            for (gi, ti, _) in &matches {
                let (gt_id, gt_box) = &frame.ground_truth[*gi];
                let (track_id, track_box, _) = *tracks[*ti];
                if let Some(&prev) = prev_match.get(gt_id) {
                    if prev != track_id {
                        totals.id_switches += 1;
                    }
                }
                prev_match.insert(*gt_id, track_id);
                totals.tp += 1;
                totals.dist_sum += (gt_box.center[0] - track_box.center[0])
                    .hypot(gt_box.center[1] - track_box.center[1]);
            }
            totals.fp += tr_free.len();
            totals.fn_ += gt_free.len();
        }
    }
    totals
}

/// AMOTA/AMOTP integrated over `recall_levels` evenly spaced recall
/// targets. Thresholds come from the true-positive scores of a full-set
/// matching pass; unreachable recall levels contribute zero accuracy and
/// are skipped in the precision average.
pub fn amota_amotp(
    sequences: &[MotSequence],
    cfg: &MetricConfig,
    assignment: Assignment,
) -> (f64, f64) {
    let levels = cfg.amota_recalls;
    let full = clear_mot_tp_scores(sequences, cfg.iou_min, assignment);
    let num_gt: usize = sequences
        .iter()
        .flat_map(|s| &s.frames)
        .map(|f| f.ground_truth.len())
        .sum();
    if num_gt == 0 {
        return (0.0, 0.0);
    }
    let mut tp_scores = full;
    tp_scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let max_recall = tp_scores.len() as f64 / num_gt as f64;

    let mut motar_sum = 0.0;
    let mut amotp_sum = 0.0;
    let mut amotp_n = 0usize;
    for i in 1..=levels {
        let target = i as f64 / levels as f64;
        if target > max_recall + 1e-12 {
            continue; // MOTAR contributes 0
        }
        let idx = ((target * num_gt as f64).ceil() as usize).clamp(1, tp_scores.len()) - 1;
        let cutoff = tp_scores[idx];
        let totals = clear_mot(sequences, cutoff, cfg.iou_min, assignment);
        motar_sum += totals.motar();
        amotp_sum += totals.mean_distance();
        amotp_n += 1;
    }
    let amota = motar_sum / levels as f64;
    let amotp = if amotp_n == 0 { 0.0 } else { amotp_sum / amotp_n as f64 };
    (amota.clamp(0.0, 1.0), amotp)
}

/// Scores of every per-frame true positive with all tracks kept.
fn clear_mot_tp_scores(
    sequences: &[MotSequence],
    iou_min: f64,
    assignment: Assignment,
) -> Vec<f64> {
    let mut scores = Vec::new();
    for seq in sequences {
        let mut prev_match: HashMap<i64, i64> = HashMap::new();
        for frame in &seq.frames {
            let tracks: Vec<&(i64, BevBox, f64)> = frame.tracks.iter().collect();
            let mut gt_free: Vec<usize> = (0..frame.ground_truth.len()).collect();
            let mut tr_free: Vec<usize> = (0..tracks.len()).collect();
            let mut matches: Vec<(usize, usize)> = Vec::new();
            gt_free.retain(|&gi| {
                let (gt_id, gt_box) = &frame.ground_truth[gi];
                if let Some(&tid) = prev_match.get(gt_id) {
                    if let Some(pos) = tr_free
                        .iter()
                        .position(|&ti| tracks[ti].0 == tid && bev_iou(&tracks[ti].1, gt_box) >= iou_min)
                    {
                        let ti = tr_free.remove(pos);
                        matches.push((gi, ti));
                        return false;
                    }
                }
                true
            });
            if !gt_free.is_empty() && !tr_free.is_empty() {
                let iou: Vec<Vec<f64>> = gt_free
                    .iter()
                    .map(|&gi| {
                        tr_free
                            .iter()
                            .map(|&ti| bev_iou(&frame.ground_truth[gi].1, &tracks[ti].1))
                            .collect()
                    })
                    .collect();
                let matching = associate(&iou, tr_free.len(), iou_min, assignment);
                for (row, col, _) in matching.pairs {
                    matches.push((gt_free[row], tr_free[col]));
                }
            }
            for (gi, ti) in matches {
                prev_match.insert(frame.ground_truth[gi].0, tracks[ti].0);
                scores.push(tracks[ti].2);
            }
        }
    }
    scores
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

/// Detection/tracking metrics attached to `FPV_DET` rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingBlock {
    pub amota: f64,
    pub amotp: f64,
    pub ap2d: f64,
    pub apbev: f64,
}

/// One (algorithm, fold, variant) evaluation row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub algorithm: String,
    pub fold: FoldName,
    pub variant: Variant,
    /// `None` when the variant has no scored targets (or is absent).
    pub ade: Option<f64>,
    pub fde: Option<f64>,
    pub map: Option<f64>,
    pub scenes: usize,
    pub targets: usize,
    pub predictions: usize,
    pub tracking: Option<TrackingBlock>,
}

/// Score one variant's scenes and predictions into a report row.
pub fn evaluate_variant(
    algorithm: &str,
    fold: FoldName,
    variant: Variant,
    scenes: &[(&Scene, &[PredictionSet])],
    cfg: &MetricConfig,
) -> EvalReport {
    let errors = displacement_errors(scenes, cfg.independent_min);
    let map = (!scenes.is_empty())
        .then(|| trajectory_map(scenes, cfg.tau_ade, cfg.independent_min));
    EvalReport {
        algorithm: algorithm.to_string(),
        fold,
        variant,
        ade: errors.map(|e| e.0),
        fde: errors.map(|e| e.1),
        map,
        scenes: scenes.len(),
        targets: scenes.iter().map(|(s, _)| s.targets.len()).sum(),
        predictions: scenes.iter().map(|(_, p)| p.len()).sum(),
        tracking: None,
    }
}
