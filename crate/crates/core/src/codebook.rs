//! Texture dictionary: k-means codewords over pooled block descriptors, the
//! nearest-codeword quantiser, and the versioned JSON file format.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::kmeans::{self, KMeansParams, Points};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainMeta {
    pub seed: u64,
    pub iterations: usize,
    pub inertia: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    centroids: Vec<Vec<f64>>,
    dim: usize,
    pub meta: TrainMeta,
}

impl Codebook {
    /// Wraps trained centroids, checking shape, finiteness and distinctness.
    pub fn new(centroids: Vec<Vec<f64>>, meta: TrainMeta) -> Result<Self> {
        let Some(first) = centroids.first() else {
            return Err(Error::Input("codebook needs at least one centroid".into()));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::Input("codebook centroids must be non-empty".into()));
        }
        for (g, c) in centroids.iter().enumerate() {
            if c.len() != dim {
                return Err(Error::Input(format!(
                    "centroid {g} has dimension {}, expected {dim}",
                    c.len()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("centroid {g} has non-finite values")));
            }
        }
        for a in 0..centroids.len() {
            for b in a + 1..centroids.len() {
                if centroids[a] == centroids[b] {
                    return Err(Error::Input(format!("centroids {a} and {b} are identical")));
                }
            }
        }
        Ok(Codebook {
            centroids,
            dim,
            meta,
        })
    }

    /// Number of codewords.
    pub fn size(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    /// Nearest codeword by Euclidean distance, lowest index on ties.
    pub fn quantize(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::Input(format!(
                "feature has dimension {}, codebook expects {}",
                x.len(),
                self.dim
            )));
        }
        Ok(self.quantize_unchecked(x))
    }

    /// `quantize` without the dimension check.
    #[inline]
    pub fn quantize_unchecked(&self, x: &[f64]) -> usize {
        kmeans::nearest(x, &self.centroids).0
    }

    /// Serialises to the JSON file format. `config` is embedded verbatim
    /// under a `config` key when given.
    pub fn to_json(&self, config: Option<&serde_json::Value>) -> String {
        let mut out = String::new();
        out.push_str("{\n");
        let _ = writeln!(out, "  \"version\": \"{FORMAT_VERSION}\",");
        let _ = writeln!(out, "  \"G\": {},", self.size());
        let _ = writeln!(out, "  \"D\": {},", self.dim);
        let _ = writeln!(out, "  \"seed\": {},", self.meta.seed);
        let _ = writeln!(out, "  \"iterations\": {},", self.meta.iterations);
        let _ = writeln!(out, "  \"inertia\": {},", fmt_f64(self.meta.inertia));
        if let Some(cfg) = config {
            let cfg = serde_json::to_string(cfg).expect("JSON value serialises");
            let _ = writeln!(out, "  \"config\": {cfg},");
        }
        out.push_str("  \"centroids\": [\n");
        for (g, c) in self.centroids.iter().enumerate() {
            let row: Vec<String> = c.iter().map(|&v| fmt_f64(v)).collect();
            let sep = if g + 1 < self.size() { "," } else { "" };
            let _ = writeln!(out, "    [{}]{sep}", row.join(", "));
        }
        out.push_str("  ]\n}\n");
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("codebook JSON: {e}")))?;
        match value.get("version") {
            Some(serde_json::Value::String(v)) if v == FORMAT_VERSION => {}
            Some(other) => {
                return Err(Error::Format(format!(
                    "unsupported codebook version {other} (expected \"{FORMAT_VERSION}\")"
                )))
            }
            None => return Err(Error::Format("codebook has no version tag".into())),
        }
        let file: CodebookFile = serde_json::from_value(value)
            .map_err(|e| Error::Format(format!("codebook JSON: {e}")))?;
        if file.centroids.len() != file.g {
            return Err(Error::Format(format!(
                "codebook declares G={} but has {} centroid rows",
                file.g,
                file.centroids.len()
            )));
        }
        if let Some((g, row)) = file.centroids.iter().enumerate().find(|(_, r)| r.len() != file.d) {
            return Err(Error::Format(format!(
                "codebook declares D={} but centroid {g} has {} values",
                file.d,
                row.len()
            )));
        }
        let meta = TrainMeta {
            seed: file.seed,
            iterations: file.iterations.unwrap_or(0),
            inertia: file.inertia.unwrap_or(0.0),
        };
        Codebook::new(file.centroids, meta).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path, config: Option<&serde_json::Value>) -> Result<()> {
        crate::io::write_atomic(path, self.to_json(config).as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Codebook::from_json(&text).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

#[derive(Deserialize)]
struct CodebookFile {
    #[serde(rename = "G")]
    g: usize,
    #[serde(rename = "D")]
    d: usize,
    seed: u64,
    iterations: Option<usize>,
    inertia: Option<f64>,
    centroids: Vec<Vec<f64>>,
}

/// 17 significant digits: enough to round-trip any f64.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Trains a `g`-word dictionary on pooled block descriptors.
pub fn train_codebook(features: &[FeatureVector], g: usize, params: &TrainParams) -> Result<Codebook> {
    let Some(first) = features.first() else {
        return Err(Error::Training("no features to train on".into()));
    };
    let dim = first.values.len();
    let mut data = Vec::with_capacity(features.len() * dim);
    for f in features {
        if f.values.len() != dim {
            return Err(Error::Input(format!(
                "mixed feature dimensions {} and {dim}",
                f.values.len()
            )));
        }
        data.extend_from_slice(&f.values);
    }
    train_on_points(Points::new(&data, dim)?, g, params)
}

pub fn train_on_points(points: Points<'_>, g: usize, params: &TrainParams) -> Result<Codebook> {
    let fit = kmeans::fit(
        points,
        &KMeansParams {
            k: g,
            seed: params.seed,
            max_iter: params.max_iter,
            tol: params.tol,
        },
    )?;
    let meta = TrainMeta {
        seed: params.seed,
        iterations: fit.iterations,
        inertia: fit.inertia(),
    };
    Codebook::new(fit.centroids, meta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            seed: 0,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}
