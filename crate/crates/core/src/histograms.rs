//! Per-frame signatures: the bag-of-textures histogram over the codebook, the
//! hue histogram of the full-resolution colour frame, and the weighted
//! distance that combines them.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::features::{DctExtractor, FeatureConfig, FeatureVector};
use crate::ingest::{preprocess_frame, Frame, GrayFrame};

pub const DEFAULT_HUE_BINS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSignature {
    pub frame_index: usize,
    pub timestamp_s: f64,
    /// Relative codeword frequencies.
    pub bot: Vec<f64>,
    /// Relative hue-bin frequencies, present in colour-and-texture mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hue: Option<Vec<f64>>,
}

/// Weights of the texture and colour terms; `beta` is always `1 - alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights {
    alpha: f64,
}

impl FusionWeights {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Input(format!("alpha must be in [0, 1], got {alpha}")));
        }
        Ok(FusionWeights { alpha })
    }

    /// Texture only.
    pub fn bot_only() -> Self {
        FusionWeights { alpha: 1.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        1.0 - self.alpha
    }

    pub fn uses_hue(&self) -> bool {
        self.beta() > 0.0
    }
}

/// Norm applied to the hue term: L2 when summarising, L1 when evaluating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HueNorm {
    L2,
    L1,
}

pub fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `alpha * |bot_a - bot_b|_2 + beta * d_hue(hue_a, hue_b)`.
///
/// The hue term is skipped entirely when `beta == 0`, so signatures without
/// hue are accepted in texture-only mode.
pub fn fused_distance(
    a: &FrameSignature,
    b: &FrameSignature,
    w: FusionWeights,
    hue_norm: HueNorm,
) -> Result<f64> {
    if a.bot.len() != b.bot.len() {
        return Err(Error::Input(format!(
            "BoT histograms differ in size: {} vs {}",
            a.bot.len(),
            b.bot.len()
        )));
    }
    let texture = l2(&a.bot, &b.bot);
    if !w.uses_hue() {
        return Ok(w.alpha() * texture);
    }
    let (Some(ha), Some(hb)) = (&a.hue, &b.hue) else {
        return Err(Error::Input(format!(
            "hue histogram missing for frame {} or {} with beta={}",
            a.frame_index,
            b.frame_index,
            w.beta()
        )));
    };
    if ha.len() != hb.len() {
        return Err(Error::Input(format!(
            "hue histograms differ in size: {} vs {}",
            ha.len(),
            hb.len()
        )));
    }
    let colour = match hue_norm {
        HueNorm::L2 => l2(ha, hb),
        HueNorm::L1 => l1(ha, hb),
    };
    Ok(w.alpha() * texture + w.beta() * colour)
}

/// Fraction of blocks assigned to each codeword.
pub fn bot_histogram(block_features: &[FeatureVector], cb: &Codebook) -> Result<Vec<f64>> {
    if block_features.is_empty() {
        return Err(Error::Input("cannot build a BoT histogram from zero blocks".into()));
    }
    let mut counts = vec![0u64; cb.size()];
    for f in block_features {
        counts[cb.quantize(&f.values)?] += 1;
    }
    Ok(normalise(&counts))
}

fn normalise(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// HSV hue in degrees, `[0, 360)`. Achromatic pixels map to 0.
pub fn hue_degrees(rgb: [u8; 3]) -> f64 {
    let [r, g, b] = rgb.map(f64::from);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    if d == 0.0 {
        return 0.0;
    }
    let h = if max == r {
        60.0 * ((g - b) / d)
    } else if max == g {
        60.0 * ((b - r) / d + 2.0)
    } else {
        60.0 * ((r - g) / d + 4.0)
    };
    if h < 0.0 {
        h + 360.0
    } else {
        h
    }
}

pub fn hue_histogram(frame: &Frame, bins: usize) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::Input("hue histogram needs at least one bin".into()));
    }
    let width = 360.0 / bins as f64;
    let mut counts = vec![0u64; bins];
    for p in frame.pixels.chunks_exact(3) {
        let h = hue_degrees([p[0], p[1], p[2]]);
        let bin = ((h / width).floor() as usize).min(bins - 1);
        counts[bin] += 1;
    }
    Ok(normalise(&counts))
}

/// Turns decoded frames into signatures with a fixed codebook.
#[derive(Debug, Clone)]
pub struct SignatureExtractor {
    dct: DctExtractor,
    codebook: Codebook,
    hue_bins: Option<usize>,
}

impl SignatureExtractor {
    /// `hue_bins = None` builds texture-only signatures.
    pub fn new(features: FeatureConfig, codebook: Codebook, hue_bins: Option<usize>) -> Result<Self> {
        if codebook.dim() != features.dim {
            return Err(Error::Input(format!(
                "codebook dimension {} does not match descriptor dimension {}",
                codebook.dim(),
                features.dim
            )));
        }
        if hue_bins == Some(0) {
            return Err(Error::Input("hue histogram needs at least one bin".into()));
        }
        Ok(SignatureExtractor {
            dct: DctExtractor::new(features)?,
            codebook,
            hue_bins,
        })
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn features(&self) -> &DctExtractor {
        &self.dct
    }

    pub fn hue_bins(&self) -> Option<usize> {
        self.hue_bins
    }

    /// Signature of a frame whose grayscale version has already been computed.
    pub fn signature_of(&self, frame: &Frame, gray: &GrayFrame) -> Result<FrameSignature> {
        let blocks = self.dct.frame_features(gray)?;
        let bot = bot_histogram(&blocks, &self.codebook)?;
        let hue = self.hue_bins.map(|bins| hue_histogram(frame, bins)).transpose()?;
        Ok(FrameSignature {
            frame_index: frame.index,
            timestamp_s: frame.timestamp_s,
            bot,
            hue,
        })
    }

    pub fn signature(&self, frame: &Frame) -> Result<FrameSignature> {
        self.signature_of(frame, &preprocess_frame(frame))
    }
}

/// Writes one JSON object per line.
pub fn write_signatures_jsonl(path: &Path, sigs: &[FrameSignature]) -> Result<()> {
    let mut buf = Vec::new();
    for s in sigs {
        serde_json::to_writer(&mut buf, s)
            .map_err(|e| Error::Internal(format!("serialising signature: {e}")))?;
        buf.write_all(b"\n").expect("writing to a Vec cannot fail");
    }
    crate::io::write_atomic(path, &buf)
}

pub fn read_signatures_jsonl(path: &Path) -> Result<Vec<FrameSignature>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let sig = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(sig);
    }
    Ok(out)
}
