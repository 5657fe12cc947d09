//! On-disk schemas: the resolved run configuration echoed into every
//! artifact, the summary manifest, and the evaluation report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Compression, MetricBundle};

/// Every parameter that influenced an artifact. Fields a command does not
/// use are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frames: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codebook: Option<String>,
    pub fps: f64,
    pub target_fps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    pub sigma_min: f64,
    pub block_size: usize,
    pub overlap: usize,
    #[serde(rename = "D")]
    pub dim: usize,
    #[serde(rename = "G")]
    pub g: usize,
    pub hue_bins: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<usize>,
    pub max_iter: usize,
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tau_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestKeyframe {
    pub frame_index: usize,
    pub timestamp_s: f64,
    pub source_frame_ref: String,
    /// Keyframe image written next to the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_duration_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Storyboard {
    pub seconds_per_keyframe: f64,
    pub storyboard_duration_s: f64,
    #[serde(rename = "R_c")]
    pub compression_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryManifest {
    pub video_id: String,
    pub config: RunConfig,
    #[serde(rename = "K_initial")]
    pub k_initial: usize,
    #[serde(rename = "N_as")]
    pub n_as: usize,
    pub source_frame_count: usize,
    pub source_duration_s: f64,
    pub sampled_frames: usize,
    pub informative_frames: usize,
    pub keyframes: Vec<ManifestKeyframe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storyboard: Option<Storyboard>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub const MANIFEST_FILE: &str = "summary.json";

impl SummaryManifest {
    pub fn load(path: &Path) -> Result<Self> {
        crate::io::read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserReport {
    pub user_id: String,
    #[serde(rename = "N_m")]
    pub n_m: usize,
    #[serde(rename = "N_nm")]
    pub n_nm: usize,
    #[serde(rename = "N_as")]
    pub n_as: usize,
    #[serde(rename = "N_u")]
    pub n_u: usize,
    #[serde(flatten)]
    pub metrics: MetricBundle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoReport {
    pub video_id: String,
    #[serde(default)]
    pub per_user: Vec<UserReport>,
    #[serde(rename = "acc_P", default, skip_serializing_if = "Option::is_none")]
    pub acc_p: Option<f64>,
    #[serde(rename = "err_P", default, skip_serializing_if = "Option::is_none")]
    pub err_p: Option<f64>,
    #[serde(rename = "F_P", default, skip_serializing_if = "Option::is_none")]
    pub f_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detected: Option<bool>,
    pub compression: Compression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub acc: f64,
    pub err: f64,
    #[serde(rename = "F")]
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: RunConfig,
    pub per_video: Vec<VideoReport>,
    pub mean: Option<MeanMetrics>,
    pub detection_accuracy: Option<f64>,
    #[serde(rename = "mean_Rc")]
    pub mean_rc: f64,
}

impl EvalReport {
    /// One row per (video, user), plus a per-video mean row and an overall row.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Internal(format!("writing CSV: {e}"));
        w.write_record([
            "video_id", "user_id", "N_m", "N_nm", "N_as", "N_u", "acc", "err", "precision",
            "recall", "F", "detected", "R_c",
        ])
        .map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for v in &self.per_video {
            let detected = v.detected.map(|d| d.to_string()).unwrap_or_default();
            let rc = v.compression.ratio.to_string();
            for u in &v.per_user {
                let m = &u.metrics;
                w.write_record([
                    v.video_id.clone(),
                    u.user_id.clone(),
                    u.n_m.to_string(),
                    u.n_nm.to_string(),
                    u.n_as.to_string(),
                    u.n_u.to_string(),
                    m.acc.to_string(),
                    m.err.to_string(),
                    m.precision.to_string(),
                    m.recall.to_string(),
                    m.f.to_string(),
                    detected.clone(),
                    rc.clone(),
                ])
                .map_err(csv_err)?;
            }
            w.write_record([
                v.video_id.clone(),
                "mean".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                opt(v.acc_p),
                opt(v.err_p),
                String::new(),
                String::new(),
                opt(v.f_p),
                detected,
                rc,
            ])
            .map_err(csv_err)?;
        }
        w.write_record([
            "ALL".to_string(),
            "mean".into(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            opt(self.mean.map(|m| m.acc)),
            opt(self.mean.map(|m| m.err)),
            String::new(),
            String::new(),
            opt(self.mean.map(|m| m.f)),
            opt(self.detection_accuracy),
            self.mean_rc.to_string(),
        ])
        .map_err(csv_err)?;
        let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }
}
