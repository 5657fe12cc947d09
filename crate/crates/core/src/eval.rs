//! Summary scoring.
//!
//! Short-term videos are scored by greedy matching against user-made
//! summaries (accuracy, error rate, precision, recall, F-measure, averaged per
//! video over users and then over videos). Long-term videos are scored by
//! whether any keyframe falls inside a ground-truth time window, and by the
//! compression ratio of a storyboard shown at four keyframes per second.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histograms::{fused_distance, FrameSignature, FusionWeights, HueNorm};

/// Seconds each keyframe is shown in a long-term storyboard.
pub const STORYBOARD_SECONDS_PER_KEYFRAME: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub n_m: usize,
    pub n_nm: usize,
    pub n_as: usize,
    pub n_u: usize,
    /// `(auto position, user position)` for each match.
    pub pairs: Vec<(usize, usize)>,
}

/// Greedy temporal matching. Each automatic keyframe takes the first
/// remaining user frame closer than `delta`; matched user frames are removed.
pub fn cus_match(
    auto: &[FrameSignature],
    user: &[FrameSignature],
    delta: f64,
    weights: FusionWeights,
    hue_norm: HueNorm,
) -> Result<MatchResult> {
    if !(delta > 0.0) {
        return Err(Error::Input(format!("delta must be positive, got {delta}")));
    }
    let mut remaining: Vec<usize> = (0..user.len()).collect();
    let mut pairs = Vec::new();
    for (ai, a) in auto.iter().enumerate() {
        let mut hit = None;
        for (slot, &ui) in remaining.iter().enumerate() {
            if fused_distance(a, &user[ui], weights, hue_norm)? < delta {
                hit = Some(slot);
                break;
            }
        }
        if let Some(slot) = hit {
            pairs.push((ai, remaining.remove(slot)));
        }
    }
    Ok(MatchResult {
        n_m: pairs.len(),
        n_nm: auto.len() - pairs.len(),
        n_as: auto.len(),
        n_u: user.len(),
        pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub acc: f64,
    pub err: f64,
    pub precision: f64,
    pub recall: f64,
    #[serde(rename = "F")]
    pub f: f64,
}

pub fn metrics(m: &MatchResult) -> Result<MetricBundle> {
    if m.n_u == 0 || m.n_as == 0 {
        return Err(Error::Input(format!(
            "metrics need non-empty summaries (N_as={}, N_u={})",
            m.n_as, m.n_u
        )));
    }
    let n_u = m.n_u as f64;
    let precision = m.n_m as f64 / m.n_as as f64;
    let recall = m.n_m as f64 / n_u;
    let f = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MetricBundle {
        acc: m.n_m as f64 / n_u,
        err: m.n_nm as f64 / n_u,
        precision,
        recall,
        f,
    })
}

fn mean_bundle(bundles: &[MetricBundle]) -> MetricBundle {
    let n = bundles.len() as f64;
    let sum = |get: fn(&MetricBundle) -> f64| bundles.iter().map(get).sum::<f64>() / n;
    MetricBundle {
        acc: sum(|b| b.acc),
        err: sum(|b| b.err),
        precision: sum(|b| b.precision),
        recall: sum(|b| b.recall),
        f: sum(|b| b.f),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    /// Mean over users, one per video.
    pub per_video: Vec<MetricBundle>,
    /// Mean of the per-video means.
    pub mean: MetricBundle,
}

/// Unweighted mean over each video's users, then over videos.
pub fn aggregate(per_video_users: &[Vec<MetricBundle>]) -> Result<Aggregate> {
    if per_video_users.is_empty() {
        return Err(Error::Input("no videos to aggregate".into()));
    }
    if let Some(v) = per_video_users.iter().position(Vec::is_empty) {
        return Err(Error::Input(format!("video {v} has no user summaries")));
    }
    let per_video: Vec<MetricBundle> = per_video_users.iter().map(|u| mean_bundle(u)).collect();
    let mean = mean_bundle(&per_video);
    Ok(Aggregate { per_video, mean })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthWindow {
    pub video_id: String,
    pub start_s: f64,
    pub end_s: f64,
}

impl GroundTruthWindow {
    pub fn new(video_id: impl Into<String>, start_s: f64, end_s: f64) -> Result<Self> {
        if !(0.0 <= start_s && start_s < end_s) {
            return Err(Error::Input(format!(
                "ground-truth window needs 0 <= start < end, got [{start_s}, {end_s}]"
            )));
        }
        Ok(GroundTruthWindow {
            video_id: video_id.into(),
            start_s,
            end_s,
        })
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start_s <= t && t <= self.end_s
    }
}

/// Reads `video_id,start_s,end_s` rows (a header row is optional).
pub fn read_ground_truth_csv(path: &Path) -> Result<Vec<GroundTruthWindow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if rec.len() != 3 {
            return Err(Error::Format(format!(
                "{}: row {} has {} fields, expected video_id,start_s,end_s",
                path.display(),
                n + 1,
                rec.len()
            )));
        }
        let (start, end) = (rec[1].parse::<f64>(), rec[2].parse::<f64>());
        match (start, end) {
            (Ok(s), Ok(e)) => out.push(
                GroundTruthWindow::new(&rec[0], s, e)
                    .map_err(|e| Error::Format(format!("{}: row {}: {e}", path.display(), n + 1)))?,
            ),
            _ if n == 0 => continue, // header
            _ => {
                return Err(Error::Format(format!(
                    "{}: row {} has non-numeric times",
                    path.display(),
                    n + 1
                )))
            }
        }
    }
    Ok(out)
}

/// Keyframe timestamps of one video's summary.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoKeyframes {
    pub video_id: String,
    pub timestamps_s: Vec<f64>,
}

/// Fraction of videos with at least one keyframe inside one of their windows.
pub fn detection_accuracy(summaries: &[VideoKeyframes], gt: &[GroundTruthWindow]) -> Result<f64> {
    if summaries.is_empty() {
        return Err(Error::Input("no summaries to score".into()));
    }
    let mut windows: BTreeMap<&str, Vec<&GroundTruthWindow>> = BTreeMap::new();
    for w in gt {
        windows.entry(w.video_id.as_str()).or_default().push(w);
    }
    let mut detected = 0usize;
    for s in summaries {
        let Some(ws) = windows.get(s.video_id.as_str()) else {
            return Err(Error::Input(format!("no ground truth for video {}", s.video_id)));
        };
        if s.timestamps_s.iter().any(|&t| ws.iter().any(|w| w.contains(t))) {
            detected += 1;
        }
    }
    Ok(detected as f64 / summaries.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Compression {
    pub video_duration_s: f64,
    pub storyboard_duration_s: f64,
    #[serde(rename = "R_c")]
    pub ratio: f64,
}

/// `R_c = 4 * Duration(V) / Duration(S)` with `Duration(S) = 0.25 s * keyframes`.
pub fn compression_ratio(video_duration_s: f64, n_keyframes: usize) -> Result<Compression> {
    if n_keyframes == 0 {
        return Err(Error::Input("compression ratio needs at least one keyframe".into()));
    }
    if !(video_duration_s > 0.0) {
        return Err(Error::Input(format!(
            "video duration must be positive, got {video_duration_s}"
        )));
    }
    let storyboard_duration_s = n_keyframes as f64 * STORYBOARD_SECONDS_PER_KEYFRAME;
    Ok(Compression {
        video_duration_s,
        storyboard_duration_s,
        ratio: 4.0 * video_duration_s / storyboard_duration_s,
    })
}

pub fn mean_compression_ratio(items: &[Compression]) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::Input("no videos for the mean compression ratio".into()));
    }
    Ok(items.iter().map(|c| c.ratio).sum::<f64>() / items.len() as f64)
}
