//! Keyframe selection: estimate the number of groups from consecutive-frame
//! distances, cluster the signatures, pick the member nearest each centroid,
//! drop near-duplicate keyframes and emit the survivors in temporal order.

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{Error, Result, Stage};
use crate::histograms::{fused_distance, FrameSignature, FusionWeights, HueNorm, SignatureExtractor};
use crate::ingest::{is_informative, preprocess_frame, FrameSource, IngestConfig};
use crate::kmeans::{self, KMeansParams, Points};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryConfig {
    /// Distance threshold shared by K estimation and duplicate removal.
    pub tau: f64,
    pub weights: FusionWeights,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl SummaryConfig {
    pub fn new(tau: f64, weights: FusionWeights, seed: u64) -> Result<Self> {
        let cfg = SummaryConfig {
            tau,
            weights,
            seed,
            max_iter: 100,
            tol: 1e-6,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Input(format!("tau must be positive, got {}", self.tau)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub frame_index: usize,
    pub timestamp_s: f64,
    #[serde(default)]
    pub source_frame_ref: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    /// Survivors in temporal order.
    pub keyframes: Vec<Keyframe>,
    /// Keyframe count before duplicate removal.
    pub k_initial: usize,
    pub warnings: Vec<String>,
}

impl Summary {
    pub fn n_as(&self) -> usize {
        self.keyframes.len()
    }
}

/// One plus the number of consecutive pairs farther apart than `tau`.
pub fn estimate_k(sigs: &[FrameSignature], cfg: &SummaryConfig) -> Result<usize> {
    if sigs.is_empty() {
        return Err(Error::Input("cannot estimate K from zero frames".into()));
    }
    let mut k = 1;
    for pair in sigs.windows(2) {
        if fused_distance(&pair[0], &pair[1], cfg.weights, HueNorm::L2)? > cfg.tau {
            k += 1;
        }
    }
    Ok(k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameClustering {
    /// Mean signature of each cluster (texture and, when weighted, hue).
    pub centroids: Vec<FrameSignature>,
    /// Cluster of each input signature.
    pub assignment: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Embeds signatures as `[sqrt(alpha) * bot ; sqrt(beta) * hue]` so that
/// squared L2 in the embedding equals the weighted squared objective.
fn embed(sigs: &[FrameSignature], w: FusionWeights) -> Result<(Vec<f64>, usize)> {
    let sa = w.alpha().sqrt();
    let sb = w.beta().sqrt();
    let bot_dim = sigs[0].bot.len();
    let hue_dim = if w.uses_hue() {
        sigs[0]
            .hue
            .as_ref()
            .map(Vec::len)
            .ok_or_else(|| Error::Input("hue histograms required when alpha < 1".into()))?
    } else {
        0
    };
    let use_bot = w.alpha() > 0.0;
    let dim = if use_bot { bot_dim } else { 0 } + hue_dim;
    let mut data = Vec::with_capacity(sigs.len() * dim);
    for s in sigs {
        if s.bot.len() != bot_dim {
            return Err(Error::Input(format!(
                "frame {} has a {}-bin BoT histogram, expected {bot_dim}",
                s.frame_index,
                s.bot.len()
            )));
        }
        if use_bot {
            data.extend(s.bot.iter().map(|v| v * sa));
        }
        if hue_dim > 0 {
            match &s.hue {
                Some(h) if h.len() == hue_dim => data.extend(h.iter().map(|v| v * sb)),
                _ => {
                    return Err(Error::Input(format!(
                        "frame {} lacks a {hue_dim}-bin hue histogram",
                        s.frame_index
                    )))
                }
            }
        }
    }
    Ok((data, dim))
}

pub fn cluster_frames(sigs: &[FrameSignature], k: usize, cfg: &SummaryConfig) -> Result<FrameClustering> {
    if sigs.is_empty() {
        return Err(Error::Input("cannot cluster zero frames".into()));
    }
    if k == 0 {
        return Err(Error::Input("K must be at least 1".into()));
    }
    let mut warnings = Vec::new();
    let (data, dim) = embed(sigs, cfg.weights)?;
    let mut k_used = k;
    if k_used > sigs.len() {
        let msg = format!("K={k} exceeds the {} available frames; clamped", sigs.len());
        warn!("{msg}");
        warnings.push(msg);
        k_used = sigs.len();
    }
    let assignment = if dim == 0 {
        // alpha = 0 with no hue cannot happen; alpha = 1 always has bot
        vec![0; sigs.len()]
    } else {
        let points = Points::new(&data, dim)?;
        let distinct = points.distinct_count();
        if k_used > distinct {
            let msg = format!("K={k_used} exceeds the {distinct} distinct frame signatures; clamped");
            warn!("{msg}");
            warnings.push(msg);
            k_used = distinct;
        }
        let fit = kmeans::fit(
            points,
            &KMeansParams {
                k: k_used,
                seed: cfg.seed,
                max_iter: cfg.max_iter,
                tol: cfg.tol,
            },
        )?;
        fit.assignment
    };

    let centroids = member_means(sigs, &assignment, k_used, cfg.weights.uses_hue());
    Ok(FrameClustering {
        centroids,
        assignment,
        warnings,
    })
}

fn member_means(
    sigs: &[FrameSignature],
    assignment: &[usize],
    k: usize,
    with_hue: bool,
) -> Vec<FrameSignature> {
    let bot_dim = sigs[0].bot.len();
    let hue_dim = if with_hue {
        sigs[0].hue.as_ref().map_or(0, Vec::len)
    } else {
        0
    };
    let mut bot = vec![vec![0.0; bot_dim]; k];
    let mut hue = vec![vec![0.0; hue_dim]; k];
    let mut counts = vec![0usize; k];
    for (s, &a) in sigs.iter().zip(assignment) {
        counts[a] += 1;
        bot[a].iter_mut().zip(&s.bot).for_each(|(m, v)| *m += v);
        if let (true, Some(h)) = (with_hue, &s.hue) {
            hue[a].iter_mut().zip(h).for_each(|(m, v)| *m += v);
        }
    }
    (0..k)
        .map(|c| {
            let n = counts[c].max(1) as f64;
            FrameSignature {
                frame_index: c,
                timestamp_s: 0.0,
                bot: bot[c].iter().map(|v| v / n).collect(),
                hue: with_hue.then(|| hue[c].iter().map(|v| v / n).collect()),
            }
        })
        .collect()
}

/// For each cluster, the position (into `sigs`) of the member nearest the
/// centroid under the summarisation distance; ties go to the earliest frame.
pub fn select_keyframes(
    sigs: &[FrameSignature],
    clustering: &FrameClustering,
    weights: FusionWeights,
) -> Result<Vec<usize>> {
    let k = clustering.centroids.len();
    let mut best: Vec<Option<(usize, f64)>> = vec![None; k];
    for (pos, (s, &c)) in sigs.iter().zip(&clustering.assignment).enumerate() {
        if c >= k {
            return Err(Error::Internal(format!("frame {pos} assigned to missing cluster {c}")));
        }
        let d = fused_distance(s, &clustering.centroids[c], weights, HueNorm::L2)?;
        match best[c] {
            Some((_, bd)) if bd <= d => {}
            _ => best[c] = Some((pos, d)),
        }
    }
    best.into_iter()
        .enumerate()
        .map(|(c, b)| {
            b.map(|(pos, _)| pos)
                .ok_or_else(|| Error::Internal(format!("cluster {c} has no members")))
        })
        .collect()
}

/// Scans keyframes in temporal order and drops any that lie within `tau` of
/// an earlier survivor.
pub fn dedup_keyframes(keyframes: &[usize], sigs: &[FrameSignature], cfg: &SummaryConfig) -> Result<Summary> {
    if keyframes.is_empty() {
        return Err(Error::Input("no keyframes to deduplicate".into()));
    }
    let mut order = keyframes.to_vec();
    order.sort_by_key(|&p| (sigs[p].frame_index, p));
    order.dedup();
    let mut survivors: Vec<usize> = Vec::with_capacity(order.len());
    for p in order {
        let mut keep = true;
        for &q in &survivors {
            if fused_distance(&sigs[q], &sigs[p], cfg.weights, HueNorm::L2)? < cfg.tau {
                keep = false;
                break;
            }
        }
        if keep {
            survivors.push(p);
        }
    }
    Ok(Summary {
        keyframes: survivors
            .into_iter()
            .map(|p| Keyframe {
                frame_index: sigs[p].frame_index,
                timestamp_s: sigs[p].timestamp_s,
                source_frame_ref: String::new(),
            })
            .collect(),
        k_initial: keyframes.len(),
        warnings: Vec::new(),
    })
}

/// Runs selection on precomputed signatures.
pub fn summarise_signatures(sigs: &[FrameSignature], cfg: &SummaryConfig) -> Result<Summary> {
    cfg.validate()?;
    let k = estimate_k(sigs, cfg).map_err(|e| e.at(Stage::EstimateK, None))?;
    let clustering = cluster_frames(sigs, k, cfg).map_err(|e| e.at(Stage::Cluster, None))?;
    let picks = select_keyframes(sigs, &clustering, cfg.weights).map_err(|e| e.at(Stage::Select, None))?;
    let mut summary = dedup_keyframes(&picks, sigs, cfg).map_err(|e| e.at(Stage::Dedup, None))?;
    summary.warnings = clustering.warnings;
    Ok(summary)
}

/// Signatures of the informative frames of a source, plus source facts.
#[derive(Debug, Clone)]
pub struct AnalysedSource {
    pub signatures: Vec<FrameSignature>,
    /// `source_frame_ref` of each signature, parallel to `signatures`.
    pub source_refs: Vec<String>,
    /// Source position of each signature's frame.
    pub source_indices: Vec<usize>,
    pub sampled_frames: usize,
    pub source_frame_count: usize,
    pub source_duration_s: f64,
}

/// Decode, preprocess, drop uninformative frames and compute signatures.
pub fn analyse_source(
    source: &FrameSource,
    ingest: &IngestConfig,
    extractor: &SignatureExtractor,
) -> Result<AnalysedSource> {
    ingest.validate()?;
    let open = source.open().map_err(|e| e.at(Stage::Decode, None))?;
    let mut out = AnalysedSource {
        signatures: Vec::new(),
        source_refs: Vec::new(),
        source_indices: Vec::new(),
        sampled_frames: 0,
        source_frame_count: open.frame_count(),
        source_duration_s: open.duration_s(),
    };
    for frame in open.sampled(ingest.target_fps) {
        let frame = frame.map_err(|e| e.at(Stage::Decode, Some(out.sampled_frames)))?;
        out.sampled_frames += 1;
        let gray = preprocess_frame(&frame);
        if !is_informative(&gray, ingest.sigma_min) {
            continue;
        }
        let sig = extractor
            .signature_of(&frame, &gray)
            .map_err(|e| e.at(Stage::Signatures, Some(frame.index)))?;
        out.signatures.push(sig);
        out.source_refs.push(frame.source_ref);
        out.source_indices.push(frame.source_index);
    }
    if out.signatures.is_empty() {
        return Err(Error::NoInformativeFrames(out.sampled_frames).at(Stage::NoiseFilter, None));
    }
    Ok(out)
}

impl AnalysedSource {
    /// Position of a frame index within `signatures`.
    pub fn position_of(&self, frame_index: usize) -> Option<usize> {
        self.signatures
            .binary_search_by_key(&frame_index, |s| s.frame_index)
            .ok()
    }

    /// Summarises and fills in `source_frame_ref` for each keyframe.
    pub fn summarise(&self, cfg: &SummaryConfig) -> Result<Summary> {
        let mut summary = summarise_signatures(&self.signatures, cfg)?;
        for kf in &mut summary.keyframes {
            let pos = self
                .position_of(kf.frame_index)
                .ok_or_else(|| Error::Internal(format!("keyframe {} not in source", kf.frame_index)))?;
            kf.source_frame_ref = self.source_refs[pos].clone();
        }
        Ok(summary)
    }
}

/// Full pipeline from a frame source to a summary.
pub fn summarise(
    source: &FrameSource,
    ingest: &IngestConfig,
    extractor: &SignatureExtractor,
    cfg: &SummaryConfig,
) -> Result<Summary> {
    analyse_source(source, ingest, extractor)?.summarise(cfg)
}
