use std::path::{Path, PathBuf};

use image::{ImageBuffer, Rgb};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FrameSequence, Provenance};
use crate::error::{Error, Result};
use crate::nnkit::Tensor;

fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("png" | "bmp")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads a directory of lexicographically ordered 8-bit PNG/BMP frames.
pub fn load_sequence(dir: &Path, fps: f64) -> Result<FrameSequence> {
    let files = frame_files(dir)?;
    if files.is_empty() {
        return Err(Error::invalid(format!(
            "{}: no PNG or BMP frames found",
            dir.display()
        )));
    }
    if files.len() < 2 {
        return Err(Error::invalid(format!(
            "{}: need >= 2 frames, found {}",
            dir.display(),
            files.len()
        )));
    }
    let mut frames = Vec::with_capacity(files.len());
    let mut dims = None;
    for path in &files {
        let img = image::open(path)
            .map_err(|source| Error::Image {
                path: path.clone(),
                source,
            })?
            .to_rgb8();
        let (w, h) = img.dimensions();
        match dims {
            None => dims = Some((w, h)),
            Some(d) if d != (w, h) => {
                return Err(Error::invalid(format!(
                    "{}: frame is {w}x{h}, expected {}x{}",
                    path.display(),
                    d.0,
                    d.1
                )))
            }
            _ => {}
        }
        let data = img.into_raw().into_iter().map(f64::from).collect();
        frames.push(Tensor::new(&[h as usize, w as usize, 3], data)?);
    }
    FrameSequence::new(frames, fps, Provenance::File)
}

/// Writes `frame_%06d.png` files; values are rounded and clamped to 8 bits.
pub fn save_sequence(seq: &FrameSequence, dir: &Path) -> Result<Vec<PathBuf>> {
    save_sequence_with(seq, dir, None)
}

/// As [`save_sequence`], optionally adding seeded uniform dither in
/// `[-0.5, 0.5)` counts before quantization.
pub fn save_sequence_with(
    seq: &FrameSequence,
    dir: &Path,
    dither_seed: Option<u64>,
) -> Result<Vec<PathBuf>> {
    let (h, w, c) = seq.dims();
    if c != 3 {
        return Err(Error::shape("save_sequence", "channels", 3, c));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = dither_seed.map(ChaCha8Rng::seed_from_u64);
    let mut paths = Vec::with_capacity(seq.len());
    for (t, f) in seq.frames().iter().enumerate() {
        let bytes: Vec<u8> = f
            .data()
            .iter()
            .map(|&v| {
                let d = rng.as_mut().map_or(0.0, |r| r.random::<f64>() - 0.5);
                (v + d).round().clamp(0.0, 255.0) as u8
            })
            .collect();
        let img: ImageBuffer<Rgb<u8>, _> =
            ImageBuffer::from_raw(w as u32, h as u32, bytes).expect("buffer matches frame size");
        let path = dir.join(format!("frame_{t:06}.png"));
        let tmp = dir.join(format!(".frame_{t:06}.png.tmp"));
        img.save_with_format(&tmp, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: tmp.clone(),
                source,
            })?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
