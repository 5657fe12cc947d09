//! Procedural test scenes: textured two-colour patterns rendered into RGB
//! frames, and multi-segment "videos" built from them.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::Frame;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pattern {
    HorizontalStripes { period: usize },
    VerticalStripes { period: usize },
    Checker { cell: usize },
    DiagonalStripes { period: usize },
    Rings { period: usize },
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scene {
    pub pattern: Pattern,
    pub fg: [u8; 3],
    pub bg: [u8; 3],
}

impl Scene {
    pub fn new(pattern: Pattern, fg: [u8; 3], bg: [u8; 3]) -> Self {
        Scene { pattern, fg, bg }
    }

    fn is_fg(&self, x: usize, y: usize, phase: usize) -> bool {
        match self.pattern {
            Pattern::HorizontalStripes { period } => ((y + phase) % period) < period / 2,
            Pattern::VerticalStripes { period } => ((x + phase) % period) < period / 2,
            Pattern::Checker { cell } => (((x + phase) / cell) + (y / cell)).is_multiple_of(2),
            Pattern::DiagonalStripes { period } => ((x + y + phase) % period) < period / 2,
            Pattern::Rings { period } => {
                let dx = x as f64 - 20.0;
                let dy = y as f64 - 15.0;
                let r = (dx * dx + dy * dy).sqrt() as usize + phase;
                (r % period) < period / 2
            }
            Pattern::Uniform => false,
        }
    }

    /// Renders the pattern shifted by `phase` pixels, with uniform per-channel
    /// noise of up to `noise` levels drawn from `rng`.
    pub fn render(&self, width: usize, height: usize, phase: usize, noise: u8, rng: &mut impl Rng) -> Frame {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                let base = if self.is_fg(x, y, phase) { self.fg } else { self.bg };
                for c in base {
                    let v = if noise > 0 {
                        let n = rng.random_range(-(noise as i16)..=noise as i16);
                        (c as i16 + n).clamp(0, 255) as u8
                    } else {
                        c
                    };
                    pixels.push(v);
                }
            }
        }
        Frame::new(width, height, pixels).expect("dimensions are consistent")
    }
}

/// Four scenes with clearly different textures and colours.
pub fn four_scenes() -> [Scene; 4] {
    [
        Scene::new(Pattern::HorizontalStripes { period: 8 }, [220, 40, 40], [60, 10, 10]),
        Scene::new(Pattern::VerticalStripes { period: 8 }, [40, 200, 60], [10, 50, 20]),
        Scene::new(Pattern::Checker { cell: 8 }, [50, 80, 230], [10, 20, 70]),
        Scene::new(Pattern::Rings { period: 24 }, [230, 210, 40], [70, 60, 10]),
    ]
}

/// A "video" with `frames_per_scene` consecutive frames of each scene. Within
/// a segment the pattern drifts by four pixels (one block step after the
/// 2x downscale) per frame.
pub fn segmented_video(
    scenes: &[Scene],
    frames_per_scene: usize,
    width: usize,
    height: usize,
    seed: u64,
) -> Vec<Frame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frames = Vec::with_capacity(scenes.len() * frames_per_scene);
    for scene in scenes {
        for j in 0..frames_per_scene {
            let mut f = scene.render(width, height, 4 * j, 6, &mut rng);
            let i = frames.len();
            f.index = i;
            f.source_index = i;
            f.timestamp_s = i as f64;
            frames.push(f);
        }
    }
    frames
}

/// A random textured scene.
pub fn random_scene(rng: &mut impl Rng) -> Scene {
    let period = 2 * rng.random_range(3..=10);
    let pattern = match rng.random_range(0..5) {
        0 => Pattern::HorizontalStripes { period },
        1 => Pattern::VerticalStripes { period },
        2 => Pattern::Checker { cell: period / 2 },
        3 => Pattern::DiagonalStripes { period },
        _ => Pattern::Rings { period },
    };
    let mut colour = || [rng.random(), rng.random(), rng.random()];
    Scene::new(pattern, colour(), colour())
}

/// Writes frames as `frame_00000.png`, `frame_00001.png`, ...
pub fn write_png_sequence(dir: &Path, frames: &[Frame]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in frames.iter().enumerate() {
        let path = dir.join(format!("frame_{i:05}.png"));
        f.to_rgb_image().save(&path).map_err(|source| Error::Image { path, source })?;
    }
    Ok(())
}
