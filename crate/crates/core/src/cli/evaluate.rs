use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{extractor, load_codebook, path_string, weights, EvaluateArgs};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate, compression_ratio, cus_match, detection_accuracy, mean_compression_ratio, metrics,
    read_ground_truth_csv, GroundTruthWindow, MetricBundle, VideoKeyframes,
};
use crate::histograms::{FrameSignature, FusionWeights, HueNorm, SignatureExtractor};
use crate::ingest::{list_images, Frame};
use crate::io::{write_atomic, write_json};
use crate::manifest::{EvalReport, MeanMetrics, RunConfig, SummaryManifest, UserReport, VideoReport, MANIFEST_FILE};

/// Everything needed to score one video.
#[derive(Debug, Clone)]
pub struct VideoEvalInput {
    pub video_id: String,
    pub auto: Vec<FrameSignature>,
    pub timestamps_s: Vec<f64>,
    pub source_duration_s: f64,
    /// `(user_id, signatures)`; empty when no user summaries are scored.
    pub users: Vec<(String, Vec<FrameSignature>)>,
}

/// Scores every video and aggregates. User matching needs `delta` and
/// compares hue histograms with L1; detection is computed when `gt` is given.
pub fn build_report(
    config: RunConfig,
    videos: &[VideoEvalInput],
    delta: Option<f64>,
    weights: FusionWeights,
    gt: Option<&[GroundTruthWindow]>,
) -> Result<EvalReport> {
    if videos.is_empty() {
        return Err(Error::Input("no videos to evaluate".into()));
    }
    let mut per_video = Vec::with_capacity(videos.len());
    let mut bundles: Vec<Vec<MetricBundle>> = Vec::new();
    for v in videos {
        let mut per_user = Vec::with_capacity(v.users.len());
        if !v.users.is_empty() {
            let delta = delta.ok_or_else(|| Error::Input("--delta is required to score user summaries".into()))?;
            for (user_id, user) in &v.users {
                let m = cus_match(&v.auto, user, delta, weights, HueNorm::L1)?;
                let metrics = metrics(&m)
                    .map_err(|e| Error::Input(format!("video {} user {user_id}: {e}", v.video_id)))?;
                per_user.push(UserReport {
                    user_id: user_id.clone(),
                    n_m: m.n_m,
                    n_nm: m.n_nm,
                    n_as: m.n_as,
                    n_u: m.n_u,
                    metrics,
                });
            }
        }
        let detected = gt
            .map(|gt| {
                let own = [VideoKeyframes {
                    video_id: v.video_id.clone(),
                    timestamps_s: v.timestamps_s.clone(),
                }];
                detection_accuracy(&own, gt).map(|d| d > 0.0)
            })
            .transpose()?;
        let compression = compression_ratio(v.source_duration_s, v.auto.len())?;
        let (acc_p, err_p, f_p) = if per_user.is_empty() {
            (None, None, None)
        } else {
            let b: Vec<MetricBundle> = per_user.iter().map(|u| u.metrics).collect();
            let a = aggregate(std::slice::from_ref(&b))?;
            bundles.push(b);
            (Some(a.mean.acc), Some(a.mean.err), Some(a.mean.f))
        };
        per_video.push(VideoReport {
            video_id: v.video_id.clone(),
            per_user,
            acc_p,
            err_p,
            f_p,
            detected,
            compression,
        });
    }
    let mean = if bundles.is_empty() {
        None
    } else {
        let a = aggregate(&bundles)?.mean;
        Some(MeanMetrics {
            acc: a.acc,
            err: a.err,
            f: a.f,
        })
    };
    let detection = gt
        .map(|gt| {
            let kf: Vec<VideoKeyframes> = videos
                .iter()
                .map(|v| VideoKeyframes {
                    video_id: v.video_id.clone(),
                    timestamps_s: v.timestamps_s.clone(),
                })
                .collect();
            detection_accuracy(&kf, gt)
        })
        .transpose()?;
    let compressions: Vec<_> = per_video.iter().map(|v| v.compression).collect();
    Ok(EvalReport {
        config,
        per_video,
        mean,
        detection_accuracy: detection,
        mean_rc: mean_compression_ratio(&compressions)?,
    })
}

fn summary_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join(MANIFEST_FILE).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.join(MANIFEST_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Input(format!(
            "no {MANIFEST_FILE} found in {} or its subdirectories",
            root.display()
        )));
    }
    Ok(dirs)
}

fn subdirs(root: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Signatures of a list of images, indexed and timestamped by position.
pub(super) fn image_signatures(paths: &[PathBuf], ex: &SignatureExtractor) -> Result<Vec<FrameSignature>> {
    paths
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut frame = Frame::load(p)?;
            frame.index = i;
            frame.timestamp_s = i as f64;
            ex.signature(&frame)
        })
        .collect()
}

/// User summaries of one video: `<root>/<video_id>/<user_id>/<images>`.
pub(super) fn user_signatures(
    root: &Path,
    video_id: &str,
    ex: &SignatureExtractor,
) -> Result<Vec<(String, Vec<FrameSignature>)>> {
    let dir = root.join(video_id);
    if !dir.is_dir() {
        return Err(Error::Input(format!(
            "no user summaries for video {video_id} (expected {})",
            dir.display()
        )));
    }
    let users = subdirs(&dir)?;
    if users.is_empty() {
        return Err(Error::Input(format!("no user directories for video {video_id} in {}", dir.display())));
    }
    let mut out = Vec::with_capacity(users.len());
    for u in users {
        let images = list_images(&u)?;
        if images.is_empty() {
            return Err(Error::Input(format!("user summary {} has no images", u.display())));
        }
        out.push((file_name(&u), image_signatures(&images, ex)?));
    }
    Ok(out)
}

fn auto_signatures(dir: &Path, manifest: &SummaryManifest, ex: &SignatureExtractor) -> Result<Vec<FrameSignature>> {
    let mut paths = Vec::with_capacity(manifest.keyframes.len());
    for kf in &manifest.keyframes {
        let Some(image) = &kf.image else {
            return Err(Error::Input(format!(
                "summary of video {} has no keyframe images; rerun summarise with --images png",
                manifest.video_id
            )));
        };
        paths.push(dir.join(image));
    }
    let mut sigs = image_signatures(&paths, ex)?;
    for (s, kf) in sigs.iter_mut().zip(&manifest.keyframes) {
        s.frame_index = kf.frame_index;
        s.timestamp_s = kf.timestamp_s;
    }
    Ok(sigs)
}

pub(super) fn run(args: &EvaluateArgs) -> Result<EvalReport> {
    let w = weights(args.alpha)?;
    let dirs = summary_dirs(&args.auto)?;
    let gt = args.ground_truth.as_deref().map(read_ground_truth_csv).transpose()?;

    let ex = match (&args.users, &args.codebook) {
        (None, _) => None,
        (Some(_), None) => return Err(Error::Input("--codebook is required to score user summaries".into())),
        (Some(_), Some(cb)) => Some(extractor(&args.features, load_codebook(cb)?, w.uses_hue())?),
    };
    if args.users.is_some() && args.delta.is_none() {
        return Err(Error::Input("--delta is required to score user summaries".into()));
    }

    let mut videos = Vec::with_capacity(dirs.len());
    for dir in &dirs {
        let manifest = SummaryManifest::load(&dir.join(MANIFEST_FILE))?;
        let (auto, users) = match (&args.users, &ex) {
            (Some(root), Some(ex)) => (
                auto_signatures(dir, &manifest, ex)?,
                user_signatures(root, &manifest.video_id, ex)?,
            ),
            _ => {
                let auto = manifest
                    .keyframes
                    .iter()
                    .map(|kf| FrameSignature {
                        frame_index: kf.frame_index,
                        timestamp_s: kf.timestamp_s,
                        bot: Vec::new(),
                        hue: None,
                    })
                    .collect();
                (auto, Vec::new())
            }
        };
        videos.push(VideoEvalInput {
            video_id: manifest.video_id.clone(),
            timestamps_s: manifest.keyframes.iter().map(|k| k.timestamp_s).collect(),
            source_duration_s: manifest.source_duration_s,
            auto,
            users,
        });
    }

    let g = ex.as_ref().map_or(0, |e| e.codebook().size());
    let mut config = RunConfig::from_parts("evaluate", None, &args.features, g, None);
    config.frames = vec![path_string(&args.auto)];
    config.codebook = args.codebook.as_deref().map(path_string);
    config.alpha = Some(args.alpha);
    config.delta = args.delta;

    let report = build_report(config, &videos, args.delta, w, gt.as_deref())?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write_json(&args.out.join("report.json"), &report)?;
    write_atomic(&args.out.join("report.csv"), report.to_csv()?.as_bytes())?;
    tracing::info!(videos = videos.len(), out = %args.out.display(), "report written");
    Ok(report)
}
