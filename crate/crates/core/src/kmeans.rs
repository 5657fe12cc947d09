//! Seeded Lloyd's k-means with k-means++ initialisation.
//!
//! Used both for the texture dictionary and for grouping frame signatures.
//! Results depend only on the input points, `k` and the seed: assignment runs
//! in parallel but every reduction is done sequentially in point order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Below this many points the assignment step runs on the calling thread.
const PAR_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once no centroid moves by more than this (L2).
    pub tol: f64,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansParams {
            k,
            seed,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

/// Row-major view of `n` points of dimension `dim`.
#[derive(Debug, Clone, Copy)]
pub struct Points<'a> {
    data: &'a [f64],
    dim: usize,
}

impl<'a> Points<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::Input(format!(
                "{} values do not form points of dimension {dim}",
                data.len()
            )));
        }
        Ok(Points { data, dim })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Number of distinct points (bitwise comparison).
    pub fn distinct_count(&self) -> usize {
        let mut rows: Vec<&[f64]> = (0..self.len()).map(|i| self.get(i)).collect();
        rows.sort_by(|a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        rows.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        rows.len()
    }
}

#[inline]
pub fn squared_l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid and its squared distance; ties go to the lowest index.
#[inline]
pub fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let d = squared_l2(point, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    /// Cluster of each input point.
    pub assignment: Vec<usize>,
    /// Lloyd iterations performed.
    pub iterations: usize,
    /// Sum of squared distances after each assignment step; the last entry
    /// is the final inertia.
    pub inertia_history: Vec<f64>,
}

impl KMeansFit {
    pub fn inertia(&self) -> f64 {
        *self.inertia_history.last().unwrap_or(&0.0)
    }
}

pub fn fit(points: Points<'_>, params: &KMeansParams) -> Result<KMeansFit> {
    let n = points.len();
    let k = params.k;
    if k == 0 {
        return Err(Error::Input("k must be at least 1".into()));
    }
    if params.max_iter == 0 {
        return Err(Error::Input("max_iter must be at least 1".into()));
    }
    if !(params.tol >= 0.0) {
        return Err(Error::Input(format!("tol must be non-negative, got {}", params.tol)));
    }
    if points.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("points contain non-finite values".into()));
    }
    let distinct = points.distinct_count();
    if distinct < k {
        return Err(Error::Training(format!(
            "need at least {k} distinct points for {k} clusters, got {distinct} distinct of {n}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let mut assignment = vec![0usize; n];
    let mut dists = vec![0.0f64; n];
    let mut inertia_history = Vec::new();
    let mut iterations = 0;

    for _ in 0..params.max_iter {
        iterations += 1;
        assign(points, &centroids, &mut assignment, &mut dists);
        repair_empty(points, &mut centroids, &mut assignment, &mut dists);
        inertia_history.push(dists.iter().sum());

        let updated = cluster_means(points, &assignment, k);
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| squared_l2(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        if shift < params.tol {
            break;
        }
    }

    assign(points, &centroids, &mut assignment, &mut dists);
    repair_empty(points, &mut centroids, &mut assignment, &mut dists);
    inertia_history.push(dists.iter().sum());

    Ok(KMeansFit {
        centroids,
        assignment,
        iterations,
        inertia_history,
    })
}

fn plus_plus_init(points: Points<'_>, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points.get(rng.random_range(0..n)).to_vec());
    let mut d2: Vec<f64> = (0..n)
        .map(|i| squared_l2(points.get(i), &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        // total > 0 because there are more distinct points than centroids
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &d) in d2.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            acc += d;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        let pick = pick.expect("some point lies off the current centroids");
        let c = points.get(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_l2(points.get(i), &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(points: Points<'_>, centroids: &[Vec<f64>], assignment: &mut [usize], dists: &mut [f64]) {
    let work = |(i, (a, d)): (usize, (&mut usize, &mut f64))| {
        let (k, dist) = nearest(points.get(i), centroids);
        *a = k;
        *d = dist;
    };
    if points.len() >= PAR_THRESHOLD {
        assignment
            .par_iter_mut()
            .zip(dists.par_iter_mut())
            .enumerate()
            .for_each(work);
    } else {
        assignment
            .iter_mut()
            .zip(dists.iter_mut())
            .enumerate()
            .for_each(work);
    }
}

/// Moves each empty cluster's centroid onto the point farthest from its own
/// centroid (taken from a cluster with more than one member).
fn repair_empty(
    points: Points<'_>,
    centroids: &mut [Vec<f64>],
    assignment: &mut [usize],
    dists: &mut [f64],
) {
    let k = centroids.len();
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignment.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut far = None;
        for i in 0..assignment.len() {
            if counts[assignment[i]] > 1 && far.is_none_or(|(_, d)| dists[i] > d) {
                far = Some((i, dists[i]));
            }
        }
        let Some((i, _)) = far else {
            return;
        };
        centroids[empty] = points.get(i).to_vec();
        assignment[i] = empty;
        dists[i] = 0.0;
    }
}

fn cluster_means(points: Points<'_>, assignment: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = points.dim();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (i, &a) in assignment.iter().enumerate() {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(points.get(i)) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        let c = c.max(1) as f64;
        s.iter_mut().for_each(|v| *v /= c);
    }
    sums
}
