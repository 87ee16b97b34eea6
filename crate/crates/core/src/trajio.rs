//! Raw trajectory parsing and track construction.
//!
//! Input files are whitespace-separated rows of `frame_id agent_id x y`
//! (the usual preprocessed ETH/UCY layout, world coordinates in meters at
//! 2.5 FPS). Frames are normalized to contiguous step indices by dividing
//! out the inferred frame stride, and per-step gaze headings are derived
//! from travel direction with shortest-arc smoothing.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{DataError, ParseError};

/// Seconds between consecutive steps at 2.5 FPS.
pub const STEP_PERIOD_S: f64 = 0.4;

/// Displacements shorter than this are treated as standing still when
/// deriving headings.
pub const STATIONARY_EPS_M: f64 = 1e-6;

/// One row of a raw trajectory file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub frame_id: i64,
    pub agent_id: i64,
    pub x: f64,
    pub y: f64,
}

/// One contiguous run of an agent's trajectory at step resolution.
///
/// An agent with interior gaps is split into several tracks that share
/// `agent_id` but have distinct `track_handle`s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrack {
    pub agent_id: i64,
    pub track_handle: u32,
    pub start_step: i64,
    pub positions: Vec<[f64; 2]>,
    pub headings: Vec<f64>,
}

impl AgentTrack {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn end_step(&self) -> i64 {
        self.start_step + self.positions.len() as i64 - 1
    }

    /// Position at an absolute step, if the track covers it.
    pub fn position_at(&self, step: i64) -> Option<[f64; 2]> {
        let idx = step.checked_sub(self.start_step)?;
        if idx < 0 {
            return None;
        }
        self.positions.get(idx as usize).copied()
    }

    pub fn heading_at(&self, step: i64) -> Option<f64> {
        let idx = step.checked_sub(self.start_step)?;
        if idx < 0 {
            return None;
        }
        self.headings.get(idx as usize).copied()
    }

    pub fn covers(&self, start: i64, end_exclusive: i64) -> bool {
        self.start_step <= start && self.end_step() >= end_exclusive - 1
    }
}

/// The five canonical leave-one-out folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FoldName {
    #[serde(rename = "ETH")]
    Eth,
    #[serde(rename = "Hotel")]
    Hotel,
    #[serde(rename = "Univ")]
    Univ,
    #[serde(rename = "Zara1")]
    Zara1,
    #[serde(rename = "Zara2")]
    Zara2,
}

impl FoldName {
    pub const ALL: [FoldName; 5] = [
        FoldName::Eth,
        FoldName::Hotel,
        FoldName::Univ,
        FoldName::Zara1,
        FoldName::Zara2,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FoldName::Eth => "ETH",
            FoldName::Hotel => "Hotel",
            FoldName::Univ => "Univ",
            FoldName::Zara1 => "Zara1",
            FoldName::Zara2 => "Zara2",
        }
    }
}

impl std::str::FromStr for FoldName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "eth" => Ok(FoldName::Eth),
            "hotel" => Ok(FoldName::Hotel),
            "univ" => Ok(FoldName::Univ),
            "zara1" => Ok(FoldName::Zara1),
            "zara2" => Ok(FoldName::Zara2),
            other => Err(format!("unknown fold {other:?}")),
        }
    }
}

impl std::fmt::Display for FoldName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// All tracks of one dataset fold on a shared step timeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fold {
    pub name: FoldName,
    pub tracks: Vec<AgentTrack>,
    pub step_period: f64,
}

impl Fold {
    pub fn new(name: FoldName, tracks: Vec<AgentTrack>) -> Self {
        Fold {
            name,
            tracks,
            step_period: STEP_PERIOD_S,
        }
    }

    pub fn step_range(&self) -> Option<(i64, i64)> {
        let min = self.tracks.iter().map(|t| t.start_step).min()?;
        let max = self.tracks.iter().map(|t| t.end_step()).max()?;
        Some((min, max))
    }
}

/// Parse raw records from a text stream.
///
/// Rows must have exactly four whitespace-separated numeric fields; frame
/// and agent ids may be written as floats (`730.0`) but must be integral
/// and the frame non-negative. Duplicate `(frame, agent)` pairs are
/// rejected.
pub fn parse_trajectory_file<R: BufRead>(reader: R) -> Result<Vec<RawRecord>, ParseError> {
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue; // blank line
        }
        if fields.len() != 4 {
            return Err(ParseError::Arity {
                line: lineno,
                found: fields.len(),
            });
        }
        let frame_id = parse_integral(fields[0], "frame_id", lineno, false)?;
        let agent_id = parse_integral(fields[1], "agent_id", lineno, true)?;
        let x = parse_float(fields[2], "x", lineno)?;
        let y = parse_float(fields[3], "y", lineno)?;
        if !seen.insert((frame_id, agent_id)) {
            return Err(ParseError::Duplicate {
                line: lineno,
                frame: frame_id,
                agent: agent_id,
            });
        }
        records.push(RawRecord {
            frame_id,
            agent_id,
            x,
            y,
        });
    }
    Ok(records)
}

fn parse_float(s: &str, field: &'static str, line: usize) -> Result<f64, ParseError> {
    s.parse::<f64>().map_err(|_| ParseError::NotNumeric {
        line,
        field,
        value: s.to_string(),
    })
}

fn parse_integral(
    s: &str,
    field: &'static str,
    line: usize,
    allow_negative: bool,
) -> Result<i64, ParseError> {
    let v = parse_float(s, field, line)?;
    if v.fract() != 0.0 || (!allow_negative && v < 0.0) || v.abs() > i64::MAX as f64 {
        return Err(ParseError::NotInteger {
            line,
            field,
            value: v,
        });
    }
    Ok(v as i64)
}

/// Group records into contiguous per-agent tracks on the step grid.
///
/// The frame stride is the GCD of all per-agent frame deltas (the usual
/// ETH/UCY files use 10, i.e. 25 FPS downsampled to 2.5 FPS). Every frame
/// must land on the common `offset + k * stride` grid; an agent with
/// interior gaps is split into separate tracks. Headings are not derived
/// here — see [`derive_headings`].
pub fn build_tracks(records: &[RawRecord]) -> Result<Vec<AgentTrack>, DataError> {
    if records.is_empty() {
        return Ok(Vec::new());
    }

    let mut by_agent: BTreeMap<i64, Vec<(i64, f64, f64)>> = BTreeMap::new();
    for r in records {
        by_agent
            .entry(r.agent_id)
            .or_default()
            .push((r.frame_id, r.x, r.y));
    }

    let mut stride: i64 = 0;
    for rows in by_agent.values_mut() {
        rows.sort_by_key(|(frame, _, _)| *frame);
        for pair in rows.windows(2) {
            stride = gcd(stride, pair[1].0 - pair[0].0);
        }
    }
    if stride == 0 {
        stride = 1; // only single-record agents
    }
    let offset = records.iter().map(|r| r.frame_id).min().unwrap();

    let mut tracks = Vec::new();
    let mut handle: u32 = 0;
    for (agent_id, rows) in by_agent {
        let mut current: Option<AgentTrack> = None;
        for (frame, x, y) in rows {
            if (frame - offset) % stride != 0 {
                return Err(DataError::StrideMismatch {
                    agent: agent_id,
                    frame,
                    stride,
                    offset,
                });
            }
            let step = (frame - offset) / stride;
            match current.as_mut() {
                Some(track) if track.end_step() + 1 == step => {
                    track.positions.push([x, y]);
                }
                _ => {
                    if let Some(done) = current.take() {
                        tracks.push(done);
                    }
                    current = Some(AgentTrack {
                        agent_id,
                        track_handle: handle,
                        start_step: step,
                        positions: vec![[x, y]],
                        headings: Vec::new(),
                    });
                    handle += 1;
                }
            }
        }
        if let Some(done) = current.take() {
            tracks.push(done);
        }
    }
    Ok(tracks)
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Serialize tracks back to raw records (frame = step, stride 1).
pub fn tracks_to_records(tracks: &[AgentTrack]) -> Vec<RawRecord> {
    let mut out = Vec::new();
    for track in tracks {
        for (i, p) in track.positions.iter().enumerate() {
            out.push(RawRecord {
                frame_id: track.start_step + i as i64,
                agent_id: track.agent_id,
                x: p[0],
                y: p[1],
            });
        }
    }
    out.sort_by_key(|r| (r.frame_id, r.agent_id));
    out
}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut t = theta % two_pi;
    if t <= -std::f64::consts::PI {
        t += two_pi;
    } else if t > std::f64::consts::PI {
        t -= two_pi;
    }
    t
}

/// Shortest-arc interpolation between two headings (`u` in `[0, 1]`).
pub fn slerp2(a: f64, b: f64, u: f64) -> f64 {
    wrap_angle(a + u * wrap_angle(b - a))
}

/// Derive smoothed travel-direction headings for a track.
///
/// The raw heading at step `t` is the direction of the displacement to
/// `t + 1`; the last step reuses its predecessor, stationary steps carry
/// the previous heading forward (leading stationary steps borrow the first
/// defined one), and a track that never moves gets heading 0. Raw headings
/// are then smoothed with an equal-weight shortest-arc average over a
/// centered window of `slerp_window` steps.
pub fn derive_headings(track: &AgentTrack, slerp_window: usize) -> AgentTrack {
    let n = track.positions.len();
    let mut raw: Vec<Option<f64>> = vec![None; n];
    for t in 0..n.saturating_sub(1) {
        let dx = track.positions[t + 1][0] - track.positions[t][0];
        let dy = track.positions[t + 1][1] - track.positions[t][1];
        if dx.hypot(dy) >= STATIONARY_EPS_M {
            raw[t] = Some(dy.atan2(dx));
        }
    }
    // forward-fill stationary steps and the final step
    let mut prev: Option<f64> = None;
    for slot in raw.iter_mut() {
        match slot {
            Some(h) => prev = Some(*h),
            None => *slot = prev,
        }
    }
    // leading stationary steps borrow the first defined heading
    let first = raw.iter().flatten().next().copied().unwrap_or(0.0);
    let raw: Vec<f64> = raw.into_iter().map(|h| h.unwrap_or(first)).collect();

    let half = slerp_window.max(1) / 2;
    let mut smoothed = Vec::with_capacity(n);
    for t in 0..n {
        let lo = t.saturating_sub(half);
        let hi = (t + half).min(n - 1);
        let center = raw[t];
        let mut sum = 0.0;
        for &h in &raw[lo..=hi] {
            sum += wrap_angle(h - center);
        }
        smoothed.push(wrap_angle(center + sum / (hi - lo + 1) as f64));
    }

    AgentTrack {
        headings: smoothed,
        ..track.clone()
    }
}

/// Parse, group, and orient every track of one file's records.
pub fn records_to_tracks(
    records: &[RawRecord],
    slerp_window: usize,
) -> Result<Vec<AgentTrack>, DataError> {
    Ok(build_tracks(records)?
        .iter()
        .map(|t| derive_headings(t, slerp_window))
        .collect())
}
