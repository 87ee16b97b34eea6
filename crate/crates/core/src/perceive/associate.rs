//! Detection-to-track association on BEV IoU.

use crate::config::Assignment;

/// Result of one association round. Pair entries are
/// `(track_index, detection_index, iou)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Matching {
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Match tracks to detections maximizing total IoU, rejecting pairs below
/// `iou_min`. `iou[t][d]` is the track-by-detection IoU matrix; `n_dets`
/// is passed separately so an empty track set still reports its unmatched
/// detections.
pub fn associate(iou: &[Vec<f64>], n_dets: usize, iou_min: f64, method: Assignment) -> Matching {
    let n_tracks = iou.len();
    debug_assert!(iou.iter().all(|row| row.len() == n_dets));
    let raw_pairs = match method {
        Assignment::Optimal => hungarian_max(iou, iou_min),
        Assignment::Greedy => greedy_max(iou, iou_min),
    };

    let mut matched_t = vec![false; n_tracks];
    let mut matched_d = vec![false; n_dets];
    let mut pairs = Vec::with_capacity(raw_pairs.len());
    for (t, d) in raw_pairs {
        let w = iou[t][d];
        if w >= iou_min && w > 0.0 {
            matched_t[t] = true;
            matched_d[d] = true;
            pairs.push((t, d, w));
        }
    }
    pairs.sort_by_key(|&(t, _, _)| t);
    Matching {
        pairs,
        unmatched_tracks: (0..n_tracks).filter(|&t| !matched_t[t]).collect(),
        unmatched_detections: (0..n_dets).filter(|&d| !matched_d[d]).collect(),
    }
}

/// Greedy descent over the IoU matrix: repeatedly take the best remaining
/// pair at or above the threshold.
fn greedy_max(iou: &[Vec<f64>], iou_min: f64) -> Vec<(usize, usize)> {
    let n_tracks = iou.len();
    let n_dets = iou.first().map_or(0, Vec::len);
    let mut used_t = vec![false; n_tracks];
    let mut used_d = vec![false; n_dets];
    let mut pairs = Vec::new();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for t in 0..n_tracks {
            if used_t[t] {
                continue;
            }
            for d in 0..n_dets {
                if used_d[d] || iou[t][d] < iou_min {
                    continue;
                }
                if best.is_none_or(|(_, _, w)| iou[t][d] > w) {
                    best = Some((t, d, iou[t][d]));
                }
            }
        }
        match best {
            Some((t, d, _)) => {
                used_t[t] = true;
                used_d[d] = true;
                pairs.push((t, d));
            }
            None => break,
        }
    }
    pairs
}

/// Optimal assignment by the O(n^3) potential-based Hungarian algorithm on
/// the square matrix padded with zero-weight cells. Sub-threshold weights
/// are zeroed so they can never buy a better total.
fn hungarian_max(iou: &[Vec<f64>], iou_min: f64) -> Vec<(usize, usize)> {
    let n_rows = iou.len();
    let n_cols = iou.first().map_or(0, Vec::len);
    if n_rows == 0 || n_cols == 0 {
        return Vec::new();
    }
    let n = n_rows.max(n_cols);
    // minimize cost = -weight
    let cost = |i: usize, j: usize| -> f64 {
        if i < n_rows && j < n_cols && iou[i][j] >= iou_min {
            -iou[i][j]
        } else {
            0.0
        }
    };

    // potentials u/v, column assignment p, path trace (1-indexed rows/cols)
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut min_val = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < min_val[j] {
                    min_val[j] = cur;
                    way[j] = j0;
                }
                if min_val[j] < delta {
                    delta = min_val[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_val[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            p[j0] = p[way[j0]];
            j0 = way[j0];
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs = Vec::new();
    for j in 1..=n {
        let i = p[j];
        if i >= 1 && i - 1 < n_rows && j - 1 < n_cols {
            pairs.push((i - 1, j - 1));
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn single_pair_above_threshold_matches() {
        let m = associate(&[vec![0.8]], 1, 0.5, Assignment::Optimal);
        assert_eq!(m.pairs, vec![(0, 0, 0.8)]);
        assert!(m.unmatched_tracks.is_empty());
        assert!(m.unmatched_detections.is_empty());
    }

    #[test]
    fn below_threshold_stays_unmatched() {
        let m = associate(&[vec![0.3]], 1, 0.5, Assignment::Optimal);
        assert!(m.pairs.is_empty());
        assert_eq!(m.unmatched_tracks, vec![0]);
        assert_eq!(m.unmatched_detections, vec![0]);
    }

    #[test]
    fn crossed_ious_resolved_optimally() {
        // exhaustive 2x2 check: 0.9 + 0.9 beats 0.6 + 0.6
        let iou = vec![vec![0.9, 0.6], vec![0.6, 0.9]];
        let m = associate(&iou, 2, 0.5, Assignment::Optimal);
        assert_eq!(m.pairs, vec![(0, 0, 0.9), (1, 1, 0.9)]);
        let total: f64 = m.pairs.iter().map(|p| p.2).sum();
        let brute = brute_force_best(&iou, 0.5);
        assert!((total - brute).abs() < 1e-12);
    }

    #[test]
    fn impossible_threshold_matches_nothing() {
        let iou = vec![vec![1.0, 0.9], vec![0.8, 1.0]];
        let m = associate(&iou, 2, 1.0 + 1e-9, Assignment::Optimal);
        assert!(m.pairs.is_empty());
    }

    /// Enumerate every matching of a small instance.
    fn brute_force_best(iou: &[Vec<f64>], iou_min: f64) -> f64 {
        fn recur(iou: &[Vec<f64>], iou_min: f64, row: usize, used: &mut Vec<bool>) -> f64 {
            if row == iou.len() {
                return 0.0;
            }
            // leave this row unmatched
            let mut best = recur(iou, iou_min, row + 1, used);
            for d in 0..used.len() {
                if !used[d] && iou[row][d] >= iou_min && iou[row][d] > 0.0 {
                    used[d] = true;
                    best = best.max(iou[row][d] + recur(iou, iou_min, row + 1, used));
                    used[d] = false;
                }
            }
            best
        }
        let n_dets = iou.first().map_or(0, Vec::len);
        recur(iou, iou_min, 0, &mut vec![false; n_dets])
    }

    #[test]
    fn optimal_matches_brute_force_on_random_instances() {
        let mut rng = crate::rngkey::StreamKey::new(17, "hungarian").rng();
        for _ in 0..300 {
            let rows = rng.gen_range(0..6);
            let cols = rng.gen_range(0..6);
            let iou: Vec<Vec<f64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect();
            let m = associate(&iou, cols, 0.3, Assignment::Optimal);
            let total: f64 = m.pairs.iter().map(|p| p.2).sum();
            let brute = brute_force_best(&iou, 0.3);
            assert!(
                (total - brute).abs() < 1e-9,
                "optimal {total} vs brute {brute} on {iou:?}"
            );
        }
    }

    #[test]
    fn greedy_picks_local_best() {
        let iou = vec![vec![0.9, 0.85], vec![0.8, 0.1]];
        let m = associate(&iou, 2, 0.05, Assignment::Greedy);
        // greedy takes (0,0)=0.9 first, then (1,1)=0.1; optimal would pick
        // 0.85 + 0.8
        assert_eq!(m.pairs, vec![(0, 0, 0.9), (1, 1, 0.1)]);
        let o = associate(&iou, 2, 0.05, Assignment::Optimal);
        let greedy_total: f64 = m.pairs.iter().map(|p| p.2).sum();
        let optimal_total: f64 = o.pairs.iter().map(|p| p.2).sum();
        assert!(optimal_total > greedy_total);
    }
}
