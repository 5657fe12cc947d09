//! Frame sources, temporal sub-sampling, grayscale conversion and the
//! low-variance frame filter.
//!
//! Two source kinds are supported: a directory of still images (PNG or binary
//! PPM, read in lexicographic file-name order) and a headerless stream of
//! packed 8-bit RGB frames whose geometry is declared by the caller.

use std::fs::File;
use std::io::{BufReader, Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// File extensions recognised when listing an image-sequence directory.
pub const IMAGE_EXTENSIONS: &[&str] = &["png", "ppm", "pnm", "jpg", "jpeg"];

/// A decoded colour frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Position in the sampled sequence, contiguous from 0.
    pub index: usize,
    /// Position in the original source, before sub-sampling.
    pub source_index: usize,
    /// Seconds from the start of the source.
    pub timestamp_s: f64,
    pub width: usize,
    pub height: usize,
    /// Packed RGB, row-major, 3 bytes per pixel.
    pub pixels: Vec<u8>,
    /// File name (directory sources) or `frame:<n>` (raw sources).
    pub source_ref: String,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Input(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height * 3 {
            return Err(Error::Format(format!(
                "{width}x{height} RGB frame needs {} bytes, got {}",
                width * height * 3,
                pixels.len()
            )));
        }
        Ok(Frame {
            index: 0,
            source_index: 0,
            timestamp_s: 0.0,
            width,
            height,
            pixels,
            source_ref: String::new(),
        })
    }

    /// Builds a frame filled with a single colour.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Frame::new(width, height, pixels)
    }

    pub fn from_rgb_image(img: &image::RgbImage) -> Result<Self> {
        Frame::new(
            img.width() as usize,
            img.height() as usize,
            img.as_raw().clone(),
        )
    }

    pub fn to_rgb_image(&self) -> image::RgbImage {
        image::RgbImage::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
            .expect("frame buffer length is validated on construction")
    }

    #[inline]
    pub fn rgb(&self, x: usize, y: usize) -> [u8; 3] {
        let o = (y * self.width + x) * 3;
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    /// Loads a single image file as a frame.
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let mut frame = Frame::from_rgb_image(&img.to_rgb8())?;
        frame.source_ref = file_name(path);
        Ok(frame)
    }
}

/// 8-bit luma frame at half the source resolution in each dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    pub index: usize,
    pub timestamp_s: f64,
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::Input(format!(
                "gray frame {width}x{height} with {} pixels",
                pixels.len()
            )));
        }
        Ok(GrayFrame {
            index: 0,
            timestamp_s: 0.0,
            width,
            height,
            pixels,
        })
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// Population standard deviation of the pixel values.
    pub fn pixel_std(&self) -> f64 {
        let n = self.pixels.len() as f64;
        let (sum, sum_sq) = self.pixels.iter().fold((0u64, 0u64), |(s, s2), &p| {
            let p = p as u64;
            (s + p, s2 + p * p)
        });
        let mean = sum as f64 / n;
        let var = (sum_sq as f64 / n - mean * mean).max(0.0);
        var.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IngestConfig {
    /// Output sampling rate in frames per second.
    pub target_fps: f64,
    /// Frames whose pixel standard deviation is below this value are dropped.
    pub sigma_min: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            target_fps: 1.0,
            sigma_min: 5.0,
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_fps > 0.0 && self.target_fps.is_finite()) {
            return Err(Error::Input(format!(
                "target fps must be positive, got {}",
                self.target_fps
            )));
        }
        if !(self.sigma_min >= 0.0 && self.sigma_min.is_finite()) {
            return Err(Error::Input(format!(
                "sigma_min must be non-negative, got {}",
                self.sigma_min
            )));
        }
        Ok(())
    }
}

/// Describes where frames come from.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameSource {
    /// Directory of image files, one frame per file.
    ImageDir { dir: PathBuf, fps: f64 },
    /// Headerless stream of packed RGB frames.
    Raw {
        path: PathBuf,
        width: usize,
        height: usize,
        fps: f64,
    },
}

impl FrameSource {
    pub fn fps(&self) -> f64 {
        match self {
            FrameSource::ImageDir { fps, .. } | FrameSource::Raw { fps, .. } => *fps,
        }
    }

    pub fn path(&self) -> &Path {
        match self {
            FrameSource::ImageDir { dir, .. } => dir,
            FrameSource::Raw { path, .. } => path,
        }
    }

    /// Validates the descriptor and indexes the source.
    pub fn open(&self) -> Result<OpenSource> {
        let fps = self.fps();
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::Input(format!("source fps must be positive, got {fps}")));
        }
        match self {
            FrameSource::ImageDir { dir, .. } => {
                let files = list_images(dir)?;
                if files.is_empty() {
                    return Err(Error::Input(format!(
                        "{} contains no PNG/PPM images",
                        dir.display()
                    )));
                }
                Ok(OpenSource {
                    source: self.clone(),
                    frame_count: files.len(),
                    files,
                    dims: None,
                })
            }
            FrameSource::Raw {
                path,
                width,
                height,
                ..
            } => {
                if *width == 0 || *height == 0 {
                    return Err(Error::Input(format!(
                        "raw stream needs positive --width/--height, got {width}x{height}"
                    )));
                }
                let len = std::fs::metadata(path)
                    .map_err(|e| Error::io(path, e))?
                    .len() as usize;
                let frame_bytes = width * height * 3;
                if len == 0 || !len.is_multiple_of(frame_bytes) {
                    return Err(Error::Format(format!(
                        "{}: {len} bytes is not a whole number of {width}x{height} RGB frames",
                        path.display()
                    )));
                }
                Ok(OpenSource {
                    source: self.clone(),
                    frame_count: len / frame_bytes,
                    files: Vec::new(),
                    dims: Some((*width, *height)),
                })
            }
        }
    }
}

/// An indexed frame source ready for random or sequential access.
#[derive(Debug, Clone)]
pub struct OpenSource {
    source: FrameSource,
    files: Vec<PathBuf>,
    frame_count: usize,
    dims: Option<(usize, usize)>,
}

impl OpenSource {
    pub fn source(&self) -> &FrameSource {
        &self.source
    }

    /// Number of frames in the source before sub-sampling.
    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn duration_s(&self) -> f64 {
        self.frame_count as f64 / self.source.fps()
    }

    /// Reads one frame by its position in the source.
    pub fn read_frame(&self, source_index: usize) -> Result<Frame> {
        if source_index >= self.frame_count {
            return Err(Error::Input(format!(
                "frame {source_index} out of range (source has {})",
                self.frame_count
            )));
        }
        match &self.source {
            FrameSource::ImageDir { .. } => {
                let mut frame = Frame::load(&self.files[source_index])?;
                self.stamp(&mut frame, source_index);
                Ok(frame)
            }
            FrameSource::Raw { path, .. } => {
                let file = File::open(path).map_err(|e| Error::io(path, e))?;
                let mut reader = BufReader::new(file);
                self.read_raw(&mut reader, source_index)
            }
        }
    }

    fn read_raw(&self, reader: &mut BufReader<File>, source_index: usize) -> Result<Frame> {
        let (width, height) = self.dims.expect("raw source has dimensions");
        let path = self.source.path();
        let frame_bytes = width * height * 3;
        reader
            .seek(SeekFrom::Start((source_index * frame_bytes) as u64))
            .map_err(|e| Error::io(path, e))?;
        let mut pixels = vec![0u8; frame_bytes];
        reader
            .read_exact(&mut pixels)
            .map_err(|e| Error::io(path, e))?;
        let mut frame = Frame::new(width, height, pixels)?;
        frame.source_ref = format!("frame:{source_index}");
        self.stamp(&mut frame, source_index);
        Ok(frame)
    }

    fn stamp(&self, frame: &mut Frame, source_index: usize) {
        frame.source_index = source_index;
        frame.timestamp_s = source_index as f64 / self.source.fps();
    }

    /// Iterates the frames kept at `target_fps`, decoding lazily.
    pub fn sampled(&self, target_fps: f64) -> SampledFrames<'_> {
        SampledFrames {
            open: self,
            step: sampling_step(self.source.fps(), target_fps),
            next_source: 0,
            next_index: 0,
            reader: None,
            dims: None,
        }
    }
}

/// Lazily decoded, sub-sampled frame iterator.
pub struct SampledFrames<'a> {
    open: &'a OpenSource,
    step: usize,
    next_source: usize,
    next_index: usize,
    reader: Option<BufReader<File>>,
    dims: Option<(usize, usize)>,
}

impl SampledFrames<'_> {
    fn decode(&mut self, source_index: usize) -> Result<Frame> {
        match &self.open.source {
            FrameSource::ImageDir { .. } => self.open.read_frame(source_index),
            FrameSource::Raw { path, .. } => {
                if self.reader.is_none() {
                    let file = File::open(path).map_err(|e| Error::io(path, e))?;
                    self.reader = Some(BufReader::new(file));
                }
                let reader = self.reader.as_mut().expect("reader opened above");
                self.open.read_raw(reader, source_index)
            }
        }
    }
}

impl Iterator for SampledFrames<'_> {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next_source >= self.open.frame_count {
            return None;
        }
        let source_index = self.next_source;
        self.next_source += self.step;
        let result = self.decode(source_index).and_then(|mut frame| {
            let dims = (frame.width, frame.height);
            match self.dims {
                None => self.dims = Some(dims),
                Some(first) if first != dims => {
                    return Err(Error::Format(format!(
                        "{}: frame is {}x{}, expected {}x{} like the first frame",
                        frame.source_ref, dims.0, dims.1, first.0, first.1
                    )))
                }
                Some(_) => {}
            }
            frame.index = self.next_index;
            self.next_index += 1;
            Ok(frame)
        });
        if result.is_err() {
            // stop after the first failure
            self.next_source = self.open.frame_count;
        }
        Some(result)
    }
}

/// Decoded frames plus facts about the source they came from.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    pub frames: Vec<Frame>,
    pub source_fps: f64,
    pub source_frame_count: usize,
}

/// Keep every `round(source_fps / target_fps)`-th frame, at least every frame.
pub fn sampling_step(source_fps: f64, target_fps: f64) -> usize {
    ((source_fps / target_fps).round() as usize).max(1)
}

/// Decodes a source and sub-samples it to `cfg.target_fps`, starting at frame 0.
pub fn decode_frames(source: &FrameSource, cfg: &IngestConfig) -> Result<FrameSequence> {
    cfg.validate()?;
    let open = source.open()?;
    let frames = open.sampled(cfg.target_fps).collect::<Result<Vec<_>>>()?;
    Ok(FrameSequence {
        frames,
        source_fps: source.fps(),
        source_frame_count: open.frame_count(),
    })
}

/// BT.601 luma rounded to the nearest integer.
#[inline]
pub fn luma(rgb: [u8; 3]) -> u8 {
    let [r, g, b] = rgb.map(u32::from);
    ((299 * r + 587 * g + 114 * b + 500) / 1000) as u8
}

/// Grayscale conversion followed by a 2x2 box downscale.
///
/// Odd trailing rows/columns are paired with themselves, so the output is
/// `ceil(w/2) x ceil(h/2)`.
pub fn preprocess_frame(frame: &Frame) -> GrayFrame {
    let (w, h) = (frame.width, frame.height);
    let gray: Vec<u8> = frame.pixels.chunks_exact(3).map(|p| luma([p[0], p[1], p[2]])).collect();
    let out_w = w.div_ceil(2);
    let out_h = h.div_ceil(2);
    let mut pixels = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        let y0 = 2 * oy;
        let y1 = (y0 + 1).min(h - 1);
        for ox in 0..out_w {
            let x0 = 2 * ox;
            let x1 = (x0 + 1).min(w - 1);
            let sum = gray[y0 * w + x0] as u32
                + gray[y0 * w + x1] as u32
                + gray[y1 * w + x0] as u32
                + gray[y1 * w + x1] as u32;
            pixels.push(((sum + 2) / 4) as u8);
        }
    }
    GrayFrame {
        index: frame.index,
        timestamp_s: frame.timestamp_s,
        width: out_w,
        height: out_h,
        pixels,
    }
}

pub fn is_informative(frame: &GrayFrame, sigma_min: f64) -> bool {
    frame.pixel_std() >= sigma_min
}

/// Drops near-uniform frames. Survivors keep their original `index`; their
/// position in the returned vector is the compacted index.
pub fn filter_noise(frames: Vec<GrayFrame>, sigma_min: f64) -> Result<Vec<GrayFrame>> {
    if !(sigma_min >= 0.0) {
        return Err(Error::Input(format!(
            "sigma_min must be non-negative, got {sigma_min}"
        )));
    }
    let total = frames.len();
    let kept: Vec<GrayFrame> = frames
        .into_iter()
        .filter(|f| is_informative(f, sigma_min))
        .collect();
    if kept.is_empty() {
        return Err(Error::NoInformativeFrames(total));
    }
    Ok(kept)
}

/// Image files in `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            .unwrap_or(false);
        if is_image && path.is_file() {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_raw(dir: &Path, w: usize, h: usize, n: usize) -> PathBuf {
        let path = dir.join("clip.rgb");
        let mut data = Vec::with_capacity(w * h * 3 * n);
        for i in 0..n {
            data.extend(std::iter::repeat_n((i % 256) as u8, w * h * 3));
        }
        std::fs::write(&path, data).unwrap();
        path
    }

    fn raw(path: PathBuf, w: usize, h: usize, fps: f64) -> FrameSource {
        FrameSource::Raw {
            path,
            width: w,
            height: h,
            fps,
        }
    }

    #[test]
    fn thirty_fps_ten_seconds_gives_ten_frames() {
        let tmp = tempfile::tempdir().unwrap();
        let path = write_raw(tmp.path(), 4, 2, 300);
        let seq = decode_frames(&raw(path, 4, 2, 30.0), &IngestConfig::default()).unwrap();
        assert_eq!(seq.frames.len(), 10);
        for (i, f) in seq.frames.iter().enumerate() {
            assert_eq!(f.index, i);
            assert_eq!(f.source_index, 30 * i);
            assert_eq!(f.timestamp_s, i as f64);
            assert_eq!(f.pixels[0], ((30 * i) % 256) as u8);
        }
        assert_eq!(seq.source_frame_count, 300);
    }

    #[test]
    fn one_fps_source_is_unchanged() {
        let tmp = tempfile::tempdir().unwrap();
        let path = write_raw(tmp.path(), 3, 3, 7);
        let seq = decode_frames(&raw(path, 3, 3, 1.0), &IngestConfig::default()).unwrap();
        assert_eq!(seq.frames.len(), 7);
        assert!(seq.frames.iter().enumerate().all(|(i, f)| f.source_index == i));
    }

    #[test]
    fn twenty_five_fps_sixty_seconds() {
        assert_eq!(sampling_step(25.0, 1.0), 25);
        let tmp = tempfile::tempdir().unwrap();
        let path = write_raw(tmp.path(), 1, 1, 25 * 60);
        let seq = decode_frames(&raw(path, 1, 1, 25.0), &IngestConfig::default()).unwrap();
        assert_eq!(seq.frames.len(), 60);
    }

    #[test]
    fn raw_length_mismatch_is_format_error() {
        let tmp = tempfile::tempdir().unwrap();
        let path = write_raw(tmp.path(), 4, 4, 3);
        let err = decode_frames(&raw(path, 5, 4, 1.0), &IngestConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn missing_source_is_io_error() {
        let err = FrameSource::ImageDir {
            dir: "/nonexistent/frames".into(),
            fps: 1.0,
        }
        .open()
        .unwrap_err();
        assert!(err.is_input_error());
    }

    #[test]
    fn image_dir_reads_in_name_order_and_checks_dims() {
        let tmp = tempfile::tempdir().unwrap();
        for (name, v) in [("b.png", 20u8), ("a.png", 10), ("c.ppm", 30)] {
            Frame::filled(4, 2, [v, v, v])
                .unwrap()
                .to_rgb_image()
                .save(tmp.path().join(name))
                .unwrap();
        }
        std::fs::write(tmp.path().join("notes.txt"), "x").unwrap();
        let src = FrameSource::ImageDir {
            dir: tmp.path().into(),
            fps: 1.0,
        };
        let seq = decode_frames(&src, &IngestConfig::default()).unwrap();
        let firsts: Vec<u8> = seq.frames.iter().map(|f| f.pixels[0]).collect();
        assert_eq!(firsts, [10, 20, 30]);
        assert_eq!(seq.frames[2].source_ref, "c.ppm");

        Frame::filled(5, 2, [0, 0, 0])
            .unwrap()
            .to_rgb_image()
            .save(tmp.path().join("d.png"))
            .unwrap();
        let err = decode_frames(&src, &IngestConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn preprocess_dimensions() {
        let f = Frame::filled(640, 480, [1, 2, 3]).unwrap();
        let g = preprocess_frame(&f);
        assert_eq!((g.width, g.height), (320, 240));
        let g = preprocess_frame(&Frame::filled(8, 8, [0, 0, 0]).unwrap());
        assert_eq!((g.width, g.height), (4, 4));
    }

    #[test]
    fn gray_constant_frame() {
        let g = preprocess_frame(&Frame::filled(6, 5, [100, 100, 100]).unwrap());
        assert!(g.pixels.iter().all(|&p| p == 100));
    }

    #[test]
    fn odd_edge_is_replicated() {
        // 3x1 row: luma 0, 100, 200 -> outputs avg(0,100)=50 and avg(200,200)=200
        let f = Frame::new(3, 1, vec![0, 0, 0, 100, 100, 100, 200, 200, 200]).unwrap();
        let g = preprocess_frame(&f);
        assert_eq!(g.pixels, vec![50, 200]);
    }

    #[test]
    fn filter_drops_uniform_frames() {
        let black = GrayFrame::new(4, 4, vec![0; 16]).unwrap();
        assert_eq!(black.pixel_std(), 0.0);
        assert!(!is_informative(&black, 5.0));

        let checker: Vec<u8> = (0..16).map(|i| if (i / 4 + i % 4) % 2 == 0 { 0 } else { 255 }).collect();
        let checker = GrayFrame::new(4, 4, checker).unwrap();
        // population std of a balanced {0,255} set is 255/2
        assert!((checker.pixel_std() - 127.5).abs() < 1e-12);
        assert!(is_informative(&checker, 5.0));

        let frames: Vec<GrayFrame> = [true, false, true, false, true]
            .iter()
            .enumerate()
            .map(|(i, &textured)| {
                let mut f = if textured { checker.clone() } else { black.clone() };
                f.index = i;
                f
            })
            .collect();
        let kept = filter_noise(frames, 5.0).unwrap();
        let idx: Vec<usize> = kept.iter().map(|f| f.index).collect();
        assert_eq!(idx, [0, 2, 4]);
    }

    #[test]
    fn filter_everything_is_an_error() {
        let black = GrayFrame::new(2, 2, vec![7; 4]).unwrap();
        let err = filter_noise(vec![black.clone(), black], 1.0).unwrap_err();
        assert!(matches!(err, Error::NoInformativeFrames(2)));
    }

    proptest! {
        #[test]
        fn preprocess_dims_are_ceil_half(w in 1usize..40, h in 1usize..40, v in any::<u8>()) {
            let g = preprocess_frame(&Frame::filled(w, h, [v, v, v]).unwrap());
            prop_assert_eq!(g.width, w.div_ceil(2));
            prop_assert_eq!(g.height, h.div_ceil(2));
        }

        #[test]
        fn filter_preserves_order(stds in proptest::collection::vec(0u8..20, 1..30), sigma in 0.0f64..10.0) {
            let frames: Vec<GrayFrame> = stds.iter().enumerate().map(|(i, &s)| {
                let mut f = GrayFrame::new(2, 1, vec![100 - s, 100 + s]).unwrap();
                f.index = i;
                f
            }).collect();
            let n = frames.len();
            if let Ok(kept) = filter_noise(frames, sigma) {
                prop_assert!(kept.len() <= n);
                prop_assert!(kept.windows(2).all(|w| w[0].index < w[1].index));
                prop_assert!(kept.iter().all(|f| stds[f.index] as f64 >= sigma));
            }
        }
    }

    #[test]
    fn luma_of_gray_is_identity() {
        for v in 0..=255u8 {
            assert_eq!(luma([v, v, v]), v);
        }
    }
}
