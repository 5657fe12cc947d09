use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evaluate::{user_signatures, VideoEvalInput};
use super::{build_report, extractor, load_codebook, path_string, SweepArgs};
use crate::error::{Error, Result};
use crate::eval::read_ground_truth_csv;
use crate::histograms::{FrameSignature, FusionWeights};
use crate::io::{write_atomic, write_json};
use crate::manifest::RunConfig;
use crate::summarizer::{analyse_source, AnalysedSource, SummaryConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    pub alpha: f64,
    #[serde(rename = "F_mean")]
    pub f_mean: Option<f64>,
    pub acc_mean: Option<f64>,
    pub err_mean: Option<f64>,
    pub detection_accuracy: Option<f64>,
    #[serde(rename = "mean_Rc")]
    pub mean_rc: f64,
    pub best: bool,
}

#[derive(Debug, Serialize)]
struct SweepOutput<'a> {
    config: &'a RunConfig,
    rows: &'a [SweepRow],
}

/// Parses `start:step:stop` (inclusive), a comma list, or a single value.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| Error::Input(format!("bad grid {spec:?}: {what}"));
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(&format!("{:?} is not a number", s.trim())))
    };
    let spec_t = spec.trim();
    if spec_t.is_empty() {
        return Err(bad("empty"));
    }
    if spec_t.contains(':') {
        let parts: Vec<&str> = spec_t.split(':').collect();
        let [start, step, stop] = parts[..] else {
            return Err(bad("expected start:step:stop"));
        };
        let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
        if !(step > 0.0) {
            return Err(bad("step must be positive"));
        }
        if stop < start {
            return Err(bad("stop is below start"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..n)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect());
    }
    spec_t.split(',').map(num).collect()
}

fn video_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Input(format!("no video directories in {}", root.display())));
    }
    Ok(dirs)
}

struct Video {
    id: String,
    analysed: AnalysedSource,
    users: Vec<(String, Vec<FrameSignature>)>,
}

fn score(
    videos: &[Video],
    tau: f64,
    alpha: f64,
    args: &SweepArgs,
    base: &RunConfig,
    gt: Option<&[crate::eval::GroundTruthWindow]>,
) -> Result<SweepRow> {
    let weights = FusionWeights::new(alpha)?;
    let cfg = SummaryConfig {
        tau,
        weights,
        seed: args.kmeans.seed,
        max_iter: args.kmeans.max_iter,
        tol: args.kmeans.tol,
    };
    cfg.validate()?;
    let mut inputs = Vec::with_capacity(videos.len());
    for v in videos {
        let summary = v
            .analysed
            .summarise(&cfg)
            .inspect_err(|_| tracing::error!(video = %v.id, tau, alpha, "summarise failed"))?;
        let auto: Vec<FrameSignature> = summary
            .keyframes
            .iter()
            .map(|kf| {
                let pos = v.analysed.position_of(kf.frame_index).expect("keyframe comes from the source");
                v.analysed.signatures[pos].clone()
            })
            .collect();
        inputs.push(VideoEvalInput {
            video_id: v.id.clone(),
            timestamps_s: summary.keyframes.iter().map(|k| k.timestamp_s).collect(),
            source_duration_s: v.analysed.source_duration_s,
            auto,
            users: v.users.clone(),
        });
    }
    let mut config = base.clone();
    config.tau = Some(tau);
    config.alpha = Some(alpha);
    let report = build_report(config, &inputs, args.delta, weights, gt)?;
    Ok(SweepRow {
        tau,
        alpha,
        f_mean: report.mean.map(|m| m.f),
        acc_mean: report.mean.map(|m| m.acc),
        err_mean: report.mean.map(|m| m.err),
        detection_accuracy: report.detection_accuracy,
        mean_rc: report.mean_rc,
        best: false,
    })
}

fn to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Internal(format!("writing CSV: {e}"));
    w.write_record([
        "tau", "alpha", "F_mean", "acc_mean", "err_mean", "detection_accuracy", "mean_Rc", "best",
    ])
    .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.tau.to_string(),
            r.alpha.to_string(),
            opt(r.f_mean),
            opt(r.acc_mean),
            opt(r.err_mean),
            opt(r.detection_accuracy),
            r.mean_rc.to_string(),
            r.best.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// Marks the first row with the highest F (or detection accuracy when no
/// user summaries are scored).
fn mark_best(rows: &mut [SweepRow]) {
    let key = |r: &SweepRow| r.f_mean.or(r.detection_accuracy);
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in rows.iter().enumerate() {
        if let Some(v) = key(r) {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    if let Some((i, _)) = best {
        rows[i].best = true;
    }
}

pub(super) fn run(args: &SweepArgs) -> Result<Vec<SweepRow>> {
    let taus = parse_grid(&args.tau)?;
    let alphas = parse_grid(&args.alpha)?;
    for &a in &alphas {
        FusionWeights::new(a)?;
    }
    if args.users.is_none() && args.ground_truth.is_none() {
        return Err(Error::Input("sweep needs --users and/or --ground-truth".into()));
    }
    if args.users.is_some() && args.delta.is_none() {
        return Err(Error::Input("--delta is required to score user summaries".into()));
    }
    let ingest = args.ingest.config()?;
    let gt = args.ground_truth.as_deref().map(read_ground_truth_csv).transpose()?;
    let codebook = load_codebook(&args.codebook)?;
    let g = codebook.size();
    let with_hue = alphas.iter().any(|&a| a < 1.0);
    let ex = extractor(&args.features, codebook, with_hue)?;
    let dirs = video_dirs(&args.videos)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;

    let mut base = RunConfig::from_parts("sweep", Some(&args.ingest), &args.features, g, Some(&args.kmeans));
    base.frames = vec![path_string(&args.videos)];
    base.codebook = Some(path_string(&args.codebook));
    base.delta = args.delta;

    let rows = pool.install(|| -> Result<Vec<SweepRow>> {
        let videos: Vec<Video> = dirs
            .par_iter()
            .map(|dir| {
                let id = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let analysed = analyse_source(&args.ingest.source(dir)?, &ingest, &ex)?;
                let users = match &args.users {
                    Some(root) => user_signatures(root, &id, &ex)?,
                    None => Vec::new(),
                };
                Ok(Video { id, analysed, users })
            })
            .collect::<Result<_>>()?;
        tracing::info!(videos = videos.len(), points = taus.len() * alphas.len(), "sweeping");
        let grid: Vec<(f64, f64)> = taus
            .iter()
            .flat_map(|&t| alphas.iter().map(move |&a| (t, a)))
            .collect();
        grid.par_iter()
            .map(|&(t, a)| score(&videos, t, a, args, &base, gt.as_deref()))
            .collect()
    })?;
    let mut rows = rows;
    mark_best(&mut rows);

    let mut config = base;
    config.tau_grid = taus;
    config.alpha_grid = alphas;
    write_atomic(&args.out, to_csv(&rows)?.as_bytes())?;
    write_json(
        &args.out.with_extension("json"),
        &SweepOutput {
            config: &config,
            rows: &rows,
        },
    )?;
    Ok(rows)
}
