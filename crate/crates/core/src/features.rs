//! Local texture descriptors: overlapping blocks, each reduced to the
//! low-frequency AC coefficients of its orthonormal 2D DCT-II.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::GrayFrame;

/// Block geometry and descriptor length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub block_size: usize,
    /// Pixels shared by horizontally or vertically adjacent blocks.
    pub overlap: usize,
    /// Descriptor dimension: zig-zag coefficients 1..=dim, DC excluded.
    pub dim: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            block_size: 8,
            overlap: 6,
            dim: 15,
        }
    }
}

impl FeatureConfig {
    pub fn step(&self) -> usize {
        self.block_size - self.overlap
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 || self.overlap >= self.block_size {
            return Err(Error::Input(format!(
                "need block_size > overlap >= 0, got block_size={} overlap={}",
                self.block_size, self.overlap
            )));
        }
        if self.dim == 0 || self.dim >= self.block_size * self.block_size {
            return Err(Error::Input(format!(
                "descriptor dim must be in 1..{}, got {}",
                self.block_size * self.block_size,
                self.dim
            )));
        }
        Ok(())
    }
}

/// Origins of all blocks that fit inside a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGrid {
    pub block_size: usize,
    pub step: usize,
    pub rows: usize,
    pub cols: usize,
    /// `(row, col)` of each block's top-left pixel, row-major.
    pub origins: Vec<(usize, usize)>,
}

impl BlockGrid {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }
}

pub fn extract_blocks(frame: &GrayFrame, block_size: usize, step: usize) -> Result<BlockGrid> {
    block_grid(frame.width, frame.height, block_size, step)
}

/// Block layout for a `width x height` frame; partial trailing blocks are dropped.
pub fn block_grid(width: usize, height: usize, block_size: usize, step: usize) -> Result<BlockGrid> {
    if step == 0 || step > block_size {
        return Err(Error::Input(format!(
            "block step must be in 1..={block_size}, got {step}"
        )));
    }
    if width < block_size || height < block_size {
        return Err(Error::Input(format!(
            "{width}x{height} frame is smaller than a {block_size}x{block_size} block"
        )));
    }
    let rows = (height - block_size) / step + 1;
    let cols = (width - block_size) / step + 1;
    let origins = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r * step, c * step)))
        .collect();
    Ok(BlockGrid {
        block_size,
        step,
        rows,
        cols,
        origins,
    })
}

/// JPEG zig-zag scan of an `n x n` block as `(row, col)` pairs.
pub fn zigzag(n: usize) -> Vec<(usize, usize)> {
    let mut order = Vec::with_capacity(n * n);
    for s in 0..(2 * n - 1) {
        let lo = s.saturating_sub(n - 1);
        let hi = s.min(n - 1);
        if s % 2 == 0 {
            // up-right: row decreasing
            for r in (lo..=hi).rev() {
                order.push((r, s - r));
            }
        } else {
            for r in lo..=hi {
                order.push((r, s - r));
            }
        }
    }
    order
}

/// One block descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub frame_index: usize,
    pub block_index: usize,
}

/// Precomputed orthonormal DCT-II basis for a fixed block size.
#[derive(Debug, Clone)]
pub struct Dct2d {
    n: usize,
    /// `basis[k * n + x] = a(k) cos(pi (2x+1) k / 2n)`
    basis: Vec<f64>,
}

impl Dct2d {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "DCT size must be positive");
        let mut basis = vec![0.0; n * n];
        for k in 0..n {
            let a = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            for x in 0..n {
                basis[k * n + x] = a * (PI * (2 * x + 1) as f64 * k as f64 / (2 * n) as f64).cos();
            }
        }
        Dct2d { n, basis }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Full `n x n` coefficient matrix (row = vertical frequency), row-major.
    pub fn forward(&self, block: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(block.len(), n * n);
        // rows first: tmp[r][v] = sum_c block[r][c] basis[v][c]
        let mut tmp = vec![0.0; n * n];
        for r in 0..n {
            let row = &block[r * n..(r + 1) * n];
            for v in 0..n {
                let b = &self.basis[v * n..(v + 1) * n];
                tmp[r * n + v] = row.iter().zip(b).map(|(p, c)| p * c).sum();
            }
        }
        let mut out = vec![0.0; n * n];
        for u in 0..n {
            let b = &self.basis[u * n..(u + 1) * n];
            for v in 0..n {
                out[u * n + v] = (0..n).map(|r| b[r] * tmp[r * n + v]).sum();
            }
        }
        out
    }
}

/// Computes DCT descriptors, evaluating only the coefficients it keeps.
#[derive(Debug, Clone)]
pub struct DctExtractor {
    cfg: FeatureConfig,
    dct: Dct2d,
    /// Kept coefficients in zig-zag order, DC excluded.
    coeffs: Vec<(usize, usize)>,
    /// Highest horizontal frequency any kept coefficient needs.
    max_v: usize,
}

impl DctExtractor {
    pub fn new(cfg: FeatureConfig) -> Result<Self> {
        cfg.validate()?;
        let coeffs: Vec<(usize, usize)> = zigzag(cfg.block_size)
            .into_iter()
            .skip(1)
            .take(cfg.dim)
            .collect();
        let max_v = coeffs.iter().map(|&(_, v)| v).max().unwrap_or(0);
        Ok(DctExtractor {
            cfg,
            dct: Dct2d::new(cfg.block_size),
            coeffs,
            max_v,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    pub fn dct(&self) -> &Dct2d {
        &self.dct
    }

    /// Descriptor of one `B x B` block given as row-major luma values.
    pub fn block_features(&self, block: &[f64]) -> Result<Vec<f64>> {
        let b = self.cfg.block_size;
        if block.len() != b * b {
            return Err(Error::Input(format!(
                "expected a {b}x{b} block ({} values), got {}",
                b * b,
                block.len()
            )));
        }
        let mut partial = vec![0.0; b * (self.max_v + 1)];
        Ok(self.features_into(|r, c| block[r * b + c] - 128.0, &mut partial))
    }

    fn features_into(&self, pixel: impl Fn(usize, usize) -> f64, partial: &mut [f64]) -> Vec<f64> {
        let n = self.cfg.block_size;
        let nv = self.max_v + 1;
        let basis = &self.dct.basis;
        // partial[r][v] = sum_c x[r][c] basis[v][c], only for v <= max_v
        for r in 0..n {
            for v in 0..nv {
                let bv = &basis[v * n..(v + 1) * n];
                let mut acc = 0.0;
                for (c, w) in bv.iter().enumerate() {
                    acc += pixel(r, c) * w;
                }
                partial[r * nv + v] = acc;
            }
        }
        self.coeffs
            .iter()
            .map(|&(u, v)| {
                let bu = &basis[u * n..(u + 1) * n];
                (0..n).map(|r| bu[r] * partial[r * nv + v]).sum()
            })
            .collect()
    }

    /// Descriptors for every block of `frame`, in block-grid order.
    pub fn frame_features(&self, frame: &GrayFrame) -> Result<Vec<FeatureVector>> {
        let grid = extract_blocks(frame, self.cfg.block_size, self.cfg.step())?;
        let b = self.cfg.block_size;
        let nv = self.max_v + 1;
        let features = grid
            .origins
            .par_iter()
            .enumerate()
            .map_init(
                || vec![0.0; b * nv],
                |partial, (block_index, &(r0, c0))| {
                    let values = self.features_into(
                        |r, c| frame.at(r0 + r, c0 + c) as f64 - 128.0,
                        partial,
                    );
                    FeatureVector {
                        values,
                        frame_index: frame.index,
                        block_index,
                    }
                },
            )
            .collect();
        Ok(features)
    }
}

/// Descriptor of a single block with the default 8x8 / D=15 layout.
pub fn dct_features(block: &[f64]) -> Result<Vec<f64>> {
    DctExtractor::new(FeatureConfig::default())?.block_features(block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct double-sum DCT-II, independent of the separable implementation.
    fn brute_dct(block: &[f64], n: usize) -> Vec<f64> {
        let a = |k: usize| if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        let mut out = vec![0.0; n * n];
        for u in 0..n {
            for v in 0..n {
                let mut s = 0.0;
                for x in 0..n {
                    for y in 0..n {
                        s += block[x * n + y]
                            * (PI * (2 * x + 1) as f64 * u as f64 / (2 * n) as f64).cos()
                            * (PI * (2 * y + 1) as f64 * v as f64 / (2 * n) as f64).cos();
                    }
                }
                out[u * n + v] = a(u) * a(v) * s;
            }
        }
        out
    }

    fn random_block(rng: &mut impl Rng) -> Vec<f64> {
        (0..64).map(|_| rng.random_range(0..=255) as f64).collect()
    }

    #[test]
    fn zigzag_matches_jpeg_table() {
        let jpeg_first16 = [0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5];
        let got: Vec<usize> = zigzag(8).iter().take(16).map(|&(r, c)| r * 8 + c).collect();
        assert_eq!(got, jpeg_first16);
        let full = zigzag(8);
        assert_eq!(full.len(), 64);
        assert_eq!(full[63], (7, 7));
    }

    #[test]
    fn block_grid_examples() {
        let g = block_grid(8, 8, 8, 2).unwrap();
        assert_eq!(g.origins, vec![(0, 0)]);
        let g = block_grid(12, 8, 8, 2).unwrap();
        assert_eq!(g.origins, vec![(0, 0), (0, 2), (0, 4)]);
        let g = block_grid(320, 240, 8, 2).unwrap();
        assert_eq!((g.rows, g.cols), (117, 157));
        assert_eq!(g.len(), 18369);
    }

    #[test]
    fn block_grid_errors() {
        assert!(block_grid(7, 8, 8, 2).is_err());
        assert!(block_grid(8, 8, 8, 0).is_err());
        assert!(block_grid(8, 8, 8, 9).is_err());
    }

    #[test]
    fn block_count_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let b = rng.random_range(1..=10);
            let step = rng.random_range(1..=b);
            let w = rng.random_range(b..=60);
            let h = rng.random_range(b..=60);
            let mut brute = Vec::new();
            for r in 0..h {
                for c in 0..w {
                    if r % step == 0 && c % step == 0 && r + b <= h && c + b <= w {
                        brute.push((r, c));
                    }
                }
            }
            assert_eq!(block_grid(w, h, b, step).unwrap().origins, brute);
        }
    }

    #[test]
    fn separable_transform_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dct = Dct2d::new(8);
        for _ in 0..20 {
            let block = random_block(&mut rng);
            let fast = dct.forward(&block);
            let slow = brute_dct(&block, 8);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn partial_path_matches_full_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ex = DctExtractor::new(FeatureConfig::default()).unwrap();
        for _ in 0..50 {
            let block = random_block(&mut rng);
            let centred: Vec<f64> = block.iter().map(|p| p - 128.0).collect();
            let full = brute_dct(&centred, 8);
            let expect: Vec<f64> = zigzag(8)[1..16].iter().map(|&(u, v)| full[u * 8 + v]).collect();
            let got = ex.block_features(&block).unwrap();
            assert_eq!(got.len(), 15);
            for (a, b) in got.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_and_zero_blocks_give_zero_vectors() {
        for v in [128.0, 0.0, 255.0] {
            let f = dct_features(&[v; 64]).unwrap();
            assert!(f.iter().all(|x| x.abs() < 1e-9), "{f:?}");
        }
    }

    #[test]
    fn horizontal_cosine_hits_first_ac_coefficient() {
        let block: Vec<f64> = (0..64)
            .map(|i| {
                let c = i % 8;
                (128.0 + 127.0 * (PI * (2 * c + 1) as f64 / 16.0).cos()).round()
            })
            .collect();
        let f = dct_features(&block).unwrap();
        // oracle on the same rounded block
        let centred: Vec<f64> = block.iter().map(|p| p - 128.0).collect();
        let oracle = brute_dct(&centred, 8);
        assert!((f[0] - oracle[1]).abs() < 1e-9);
        let dominant = f[0].abs();
        assert!(dominant > 500.0);
        assert!(f[1..].iter().all(|x| x.abs() < 0.01 * dominant), "{f:?}");
    }

    #[test]
    fn wrong_block_size_is_rejected() {
        assert!(dct_features(&[0.0; 63]).is_err());
    }

    #[test]
    fn frame_features_follow_grid_order() {
        let pixels: Vec<u8> = (0..12 * 10).map(|i| (i * 7 % 256) as u8).collect();
        let mut frame = GrayFrame::new(12, 10, pixels).unwrap();
        frame.index = 4;
        let ex = DctExtractor::new(FeatureConfig::default()).unwrap();
        let feats = ex.frame_features(&frame).unwrap();
        let grid = extract_blocks(&frame, 8, 2).unwrap();
        assert_eq!(feats.len(), grid.len());
        for (n, (fv, &(r0, c0))) in feats.iter().zip(&grid.origins).enumerate() {
            assert_eq!(fv.block_index, n);
            assert_eq!(fv.frame_index, 4);
            let block: Vec<f64> = (0..64).map(|i| frame.at(r0 + i / 8, c0 + i % 8) as f64).collect();
            assert_eq!(fv.values, ex.block_features(&block).unwrap());
        }
    }

    #[test]
    fn parseval_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dct = Dct2d::new(8);
        for _ in 0..200 {
            let block = random_block(&mut rng);
            let e_pix: f64 = block.iter().map(|p| p * p).sum();
            let e_dct: f64 = dct.forward(&block).iter().map(|c| c * c).sum();
            assert!(((e_pix - e_dct) / e_pix).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn linear_in_real_space(a in proptest::collection::vec(-200.0f64..200.0, 64),
                                b in proptest::collection::vec(-200.0f64..200.0, 64)) {
            // centring subtracts 128 once per call, so compare on DCT-of-difference form
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let fa = dct_features(&a).unwrap();
            let fb = dct_features(&b).unwrap();
            let fs = dct_features(&sum).unwrap();
            for i in 0..15 {
                prop_assert!((fs[i] - fa[i] - fb[i]).abs() < 1e-9);
            }
        }

        #[test]
        fn dc_offset_is_invisible(a in proptest::collection::vec(0.0f64..255.0, 64), k in -100.0f64..100.0) {
            let shifted: Vec<f64> = a.iter().map(|x| x + k).collect();
            let fa = dct_features(&a).unwrap();
            let fs = dct_features(&shifted).unwrap();
            for i in 0..15 {
                prop_assert!((fa[i] - fs[i]).abs() < 1e-9);
            }
        }
    }
}
