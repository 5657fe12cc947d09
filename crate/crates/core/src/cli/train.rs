use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{path_string, TrainArgs};
use crate::codebook::{train_codebook, Codebook, TrainParams};
use crate::error::{Error, Result, Stage};
use crate::features::DctExtractor;
use crate::ingest::{is_informative, preprocess_frame, sampling_step, GrayFrame, OpenSource};
use crate::manifest::RunConfig;

pub(super) fn run(args: &TrainArgs) -> Result<Codebook> {
    let cb = train_from_args(args)?;
    let mut config = RunConfig::from_parts("train", Some(&args.ingest), &args.features, args.g, Some(&args.kmeans));
    config.frames = args.frames.iter().map(|p| path_string(p)).collect();
    config.sample = Some(args.sample);
    let value = serde_json::to_value(&config).map_err(|e| Error::Internal(e.to_string()))?;
    cb.save(&args.out, Some(&value))?;
    tracing::info!(path = %args.out.display(), words = cb.size(), "codebook written");
    Ok(cb)
}

/// Draws `sample` informative frames uniformly at random from all sources
/// and trains a codebook on their pooled block descriptors.
pub fn train_from_args(args: &TrainArgs) -> Result<Codebook> {
    let ingest = args.ingest.config()?;
    let features = args.features.config()?;
    let dct = DctExtractor::new(features)?;

    let mut sources: Vec<OpenSource> = Vec::with_capacity(args.frames.len());
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for (s, path) in args.frames.iter().enumerate() {
        let open = args.ingest.source(path)?.open()?;
        let step = sampling_step(open.source().fps(), ingest.target_fps);
        candidates.extend((0..open.frame_count()).step_by(step).map(|i| (s, i)));
        sources.push(open);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.kmeans.seed);
    candidates.shuffle(&mut rng);

    let wanted = if args.sample == 0 { candidates.len() } else { args.sample };
    let mut chosen: Vec<GrayFrame> = Vec::with_capacity(wanted);
    let mut rejected = 0usize;
    for &(s, i) in &candidates {
        if chosen.len() == wanted {
            break;
        }
        let frame = sources[s].read_frame(i).map_err(|e| e.at(Stage::Decode, Some(i)))?;
        let gray = preprocess_frame(&frame);
        if is_informative(&gray, ingest.sigma_min) {
            chosen.push(gray);
        } else {
            rejected += 1;
        }
    }
    if chosen.len() < wanted || chosen.is_empty() {
        return Err(Error::Training(format!(
            "asked for {wanted} training frames but only {} of {} sampled frames are informative ({rejected} rejected)",
            chosen.len(),
            candidates.len()
        )));
    }

    let per_frame: Vec<_> = chosen
        .par_iter()
        .map(|g| dct.frame_features(g))
        .collect::<Result<_>>()
        .map_err(|e| e.at(Stage::Features, None))?;
    let pooled: Vec<_> = per_frame.into_iter().flatten().collect();
    tracing::info!(frames = chosen.len(), descriptors = pooled.len(), g = args.g, "training codebook");
    train_codebook(
        &pooled,
        args.g,
        &TrainParams {
            seed: args.kmeans.seed,
            max_iter: args.kmeans.max_iter,
            tol: args.kmeans.tol,
        },
    )
}
