//! Pixel data access for the pipeline.
//!
//! Two URI schemes are supported:
//! - `synth://<id>` — a procedurally generated placeholder image, a smooth
//!   sinusoid mixture parameterized by a hash of the id. Deterministic, so
//!   simulated logs can flow through encoders end-to-end with no files.
//! - a filesystem path to a binary PPM (`P6`) image.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use crate::rng::fnv1a64;

#[derive(Debug, Error)]
pub enum PixelError {
    #[error("image {width}x{height} below minimum {min}x{min}")]
    TooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("pixel buffer length {got} does not match {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("unsupported image uri {0:?}")]
    UnsupportedUri(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    BadPpm { path: String, reason: String },
    #[error("no pixels registered for image {0:?}")]
    Unknown(String),
}

/// HxWx3 RGB image with channel values in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self, PixelError> {
        let expected = height * width * 3;
        if data.len() != expected {
            return Err(PixelError::LengthMismatch {
                got: data.len(),
                expected,
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Fill an image from a per-pixel function of (row, col, channel).
    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                for c in 0..3 {
                    data.push(f(y, x, c));
                }
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * 3 + c]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mean value of channel `c` over a pixel block.
    pub fn block_mean(&self, y0: usize, y1: usize, x0: usize, x1: usize, c: usize) -> f64 {
        let mut sum = 0.0;
        for y in y0..y1 {
            for x in x0..x1 {
                sum += self.get(y, x, c);
            }
        }
        sum / ((y1 - y0) * (x1 - x0)) as f64
    }
}

/// Default edge length of synthesized placeholder images.
pub const SYNTH_SIZE: usize = 32;

/// Deterministic placeholder image for `id`: a mixture of low-frequency
/// sinusoids whose frequencies, phases and offsets derive from a hash chain.
pub fn synth_image(id: &str, height: usize, width: usize) -> ImageTensor {
    let mut state = fnv1a64(id.as_bytes());
    let mut next = move || {
        // splitmix64 step
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    };
    // Per-channel wave parameters.
    let mut fx = [0.0; 3];
    let mut fy = [0.0; 3];
    let mut px = [0.0; 3];
    let mut py = [0.0; 3];
    let mut base = [0.0; 3];
    for c in 0..3 {
        fx[c] = 1.0 + next() * 4.0;
        fy[c] = 1.0 + next() * 4.0;
        px[c] = next() * std::f64::consts::TAU;
        py[c] = next() * std::f64::consts::TAU;
        base[c] = 0.35 + next() * 0.3;
    }
    ImageTensor::from_fn(height, width, |y, x, c| {
        let u = x as f64 / width as f64;
        let v = y as f64 / height as f64;
        let wave = 0.25 * (std::f64::consts::TAU * fx[c] * u + px[c]).sin()
            + 0.25 * (std::f64::consts::TAU * fy[c] * v + py[c]).sin();
        (base[c] + wave).clamp(0.0, 1.0)
    })
}

/// Read a binary PPM (`P6`, maxval 255) file.
pub fn read_ppm(path: &Path) -> Result<ImageTensor, PixelError> {
    let display = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|source| PixelError::Io {
        path: display.clone(),
        source,
    })?;
    let bad = |reason: &str| PixelError::BadPpm {
        path: display.clone(),
        reason: reason.to_string(),
    };
    // Header: magic, width, height, maxval as whitespace-separated tokens,
    // then a single whitespace byte before the pixel payload.
    let mut pos = 0usize;
    let token = |pos: &mut usize| -> Result<String, PixelError> {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        // PPM comments run to end of line.
        while *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(PixelError::BadPpm {
                path: display.clone(),
                reason: "truncated header".into(),
            });
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    if token(&mut pos)? != "P6" {
        return Err(bad("not a P6 ppm"));
    }
    let width: usize = token(&mut pos)?.parse().map_err(|_| bad("bad width"))?;
    let height: usize = token(&mut pos)?.parse().map_err(|_| bad("bad height"))?;
    let maxval: usize = token(&mut pos)?.parse().map_err(|_| bad("bad maxval"))?;
    if maxval != 255 {
        return Err(bad("only maxval 255 supported"));
    }
    pos += 1; // single whitespace after maxval
    let expected = width * height * 3;
    if bytes.len() < pos + expected {
        return Err(bad("pixel payload truncated"));
    }
    let data = bytes[pos..pos + expected]
        .iter()
        .map(|&b| b as f64 / 255.0)
        .collect();
    ImageTensor::new(height, width, data)
}

/// Write a binary PPM (`P6`) file.
pub fn write_ppm(path: &Path, image: &ImageTensor) -> std::io::Result<()> {
    let mut out = Vec::with_capacity(image.data.len() + 32);
    out.extend_from_slice(format!("P6\n{} {}\n255\n", image.width, image.height).as_bytes());
    for &v in &image.data {
        out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
    }
    std::fs::write(path, out)
}

/// Resolves an image id + uri to pixel data.
pub trait ImageSource {
    fn image(&self, image_id: &str, uri: &str) -> Result<ImageTensor, PixelError>;
}

/// Resolves `synth://` ids procedurally and other uris as PPM paths.
#[derive(Debug, Default, Clone, Copy)]
pub struct UriImageSource;

impl ImageSource for UriImageSource {
    fn image(&self, _image_id: &str, uri: &str) -> Result<ImageTensor, PixelError> {
        if let Some(id) = uri.strip_prefix("synth://") {
            return Ok(synth_image(id, SYNTH_SIZE, SYNTH_SIZE));
        }
        if uri.ends_with(".ppm") {
            return read_ppm(Path::new(uri));
        }
        Err(PixelError::UnsupportedUri(uri.to_string()))
    }
}

/// Fixed in-memory id → pixels map, used by tests and synthetic datasets.
#[derive(Debug, Default, Clone)]
pub struct MapImageSource {
    images: HashMap<String, ImageTensor>,
}

impl MapImageSource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, image_id: impl Into<String>, image: ImageTensor) {
        self.images.insert(image_id.into(), image);
    }
}

impl ImageSource for MapImageSource {
    fn image(&self, image_id: &str, _uri: &str) -> Result<ImageTensor, PixelError> {
        self.images
            .get(image_id)
            .cloned()
            .ok_or_else(|| PixelError::Unknown(image_id.to_string()))
    }
}
