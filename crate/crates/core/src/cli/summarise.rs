use std::io::Cursor;
use std::path::Path;

use super::{extractor, load_codebook, path_string, weights, ImageFormat, SummariseArgs};
use crate::error::{Error, Result};
use crate::eval::{compression_ratio, STORYBOARD_SECONDS_PER_KEYFRAME};
use crate::histograms::write_signatures_jsonl;
use crate::ingest::Frame;
use crate::io::write_atomic;
use crate::manifest::{ManifestKeyframe, RunConfig, Storyboard, SummaryManifest, MANIFEST_FILE};
use crate::summarizer::{analyse_source, SummaryConfig};

pub(super) fn run(args: &SummariseArgs) -> Result<SummaryManifest> {
    let manifest = summarise_to_dir(args)?;
    tracing::info!(
        video = %manifest.video_id,
        keyframes = manifest.n_as,
        out = %args.out.display(),
        "summary written"
    );
    Ok(manifest)
}

fn encode(frame: &Frame, format: ImageFormat) -> Result<Vec<u8>> {
    let fmt = match format {
        ImageFormat::Png => image::ImageFormat::Png,
        ImageFormat::Ppm => image::ImageFormat::Pnm,
        ImageFormat::None => return Err(Error::Internal("no image format".into())),
    };
    let mut buf = Cursor::new(Vec::new());
    frame
        .to_rgb_image()
        .write_to(&mut buf, fmt)
        .map_err(|e| Error::Internal(format!("encoding keyframe image: {e}")))?;
    Ok(buf.into_inner())
}

fn default_video_id(frames: &Path) -> String {
    frames
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "video".into())
}

/// Runs the full pipeline on `--frames` and writes `summary.json` plus
/// keyframe images into `--out`.
pub fn summarise_to_dir(args: &SummariseArgs) -> Result<SummaryManifest> {
    let ingest = args.ingest.config()?;
    let source = args.ingest.source(&args.frames)?;
    let w = weights(args.alpha)?;
    let codebook = load_codebook(&args.codebook)?;
    let g = codebook.size();
    let ex = extractor(&args.features, codebook, w.uses_hue())?;
    let cfg = SummaryConfig {
        tau: args.tau,
        weights: w,
        seed: args.kmeans.seed,
        max_iter: args.kmeans.max_iter,
        tol: args.kmeans.tol,
    };
    cfg.validate()?;

    let analysed = analyse_source(&source, &ingest, &ex)?;
    let summary = analysed.summarise(&cfg)?;
    for w in &summary.warnings {
        tracing::warn!("{w}");
    }

    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let open = source.open()?;
    let mut keyframes = Vec::with_capacity(summary.keyframes.len());
    for kf in &summary.keyframes {
        let pos = analysed
            .position_of(kf.frame_index)
            .ok_or_else(|| Error::Internal(format!("keyframe {} not in source", kf.frame_index)))?;
        let image = match args.images.extension() {
            Some(ext) => {
                let frame = open.read_frame(analysed.source_indices[pos])?;
                let name = format!("kf_{}.{ext}", kf.frame_index);
                write_atomic(&args.out.join(&name), &encode(&frame, args.images)?)?;
                Some(name)
            }
            None => None,
        };
        keyframes.push(ManifestKeyframe {
            frame_index: kf.frame_index,
            timestamp_s: kf.timestamp_s,
            source_frame_ref: kf.source_frame_ref.clone(),
            image,
            display_duration_s: args.storyboard.then_some(STORYBOARD_SECONDS_PER_KEYFRAME),
        });
    }

    let storyboard = if args.storyboard {
        let c = compression_ratio(analysed.source_duration_s, keyframes.len())?;
        Some(Storyboard {
            seconds_per_keyframe: STORYBOARD_SECONDS_PER_KEYFRAME,
            storyboard_duration_s: c.storyboard_duration_s,
            compression_ratio: c.ratio,
        })
    } else {
        None
    };

    if let Some(path) = &args.signatures {
        write_signatures_jsonl(path, &analysed.signatures)?;
    }

    let mut config = RunConfig::from_parts("summarise", Some(&args.ingest), &args.features, g, Some(&args.kmeans));
    config.frames = vec![path_string(&args.frames)];
    config.codebook = Some(path_string(&args.codebook));
    config.tau = Some(args.tau);
    config.alpha = Some(args.alpha);

    let manifest = SummaryManifest {
        video_id: args.video_id.clone().unwrap_or_else(|| default_video_id(&args.frames)),
        config,
        k_initial: summary.k_initial,
        n_as: keyframes.len(),
        source_frame_count: analysed.source_frame_count,
        source_duration_s: analysed.source_duration_s,
        sampled_frames: analysed.sampled_frames,
        informative_frames: analysed.signatures.len(),
        keyframes,
        storyboard,
        warnings: summary.warnings,
    };
    manifest.save(&args.out.join(MANIFEST_FILE))?;
    Ok(manifest)
}
