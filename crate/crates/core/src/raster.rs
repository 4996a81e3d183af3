//! Keyframe rasters. Binary PPM (P6) in, PNG thumbnails out.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub const MAX_DIMENSION: u32 = 4096;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a binary PPM (P6) image")]
    NotP6,
    #[error("malformed PPM header: {0}")]
    Header(&'static str),
    #[error("image dimensions {width}x{height} outside 1..={MAX_DIMENSION}")]
    Dimensions { width: u32, height: u32 },
    #[error("pixel data truncated: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("png encoding failed: {0}")]
    Encode(String),
}

/// RGB raster with channels scaled to `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Vec<[f64; 3]>,
}

impl Raster {
    pub fn from_pixels(width: u32, height: u32, pixels: Vec<[f64; 3]>) -> Self {
        assert_eq!(pixels.len(), width as usize * height as usize, "pixel count");
        Self { width, height, pixels }
    }

    pub fn from_rgb8(width: u32, height: u32, rgb: &[u8]) -> Self {
        let pixels = rgb
            .chunks_exact(3)
            .map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
            .collect();
        Self::from_pixels(width, height, pixels)
    }

    pub fn filled(width: u32, height: u32, rgb: [f64; 3]) -> Self {
        Self::from_pixels(width, height, vec![rgb; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f64; 3] {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flat_map(|p| p.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8))
            .collect()
    }
}

pub fn read_ppm(path: &Path) -> Result<Raster, RasterError> {
    let bytes = fs::read(path).map_err(|source| RasterError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_ppm(&bytes)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &'static str) -> Result<u32, RasterError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(RasterError::Header(what))
    }
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Raster, RasterError> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(RasterError::NotP6);
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if !(1..=65535).contains(&maxval) {
        return Err(RasterError::Header("maxval"));
    }
    if width == 0 || height == 0 || width > MAX_DIMENSION || height > MAX_DIMENSION {
        return Err(RasterError::Dimensions { width, height });
    }
    // exactly one whitespace byte separates the header from the raster
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(RasterError::Header("separator"));
    }
    let data = &bytes[cur.pos + 1..];
    let sample_bytes = if maxval < 256 { 1 } else { 2 };
    let n = width as usize * height as usize;
    let expected = n * 3 * sample_bytes;
    if data.len() < expected {
        return Err(RasterError::Truncated {
            expected,
            actual: data.len(),
        });
    }
    let scale = maxval as f64;
    let sample = |i: usize| -> f64 {
        let v = if sample_bytes == 1 {
            data[i] as u32
        } else {
            u16::from_be_bytes([data[2 * i], data[2 * i + 1]]) as u32
        };
        (v.min(maxval) as f64) / scale
    };
    let pixels = (0..n)
        .map(|p| [sample(3 * p), sample(3 * p + 1), sample(3 * p + 2)])
        .collect();
    Ok(Raster::from_pixels(width, height, pixels))
}

/// Encodes an 8-bit binary PPM.
pub fn encode_ppm(raster: &Raster) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", raster.width, raster.height).into_bytes();
    out.extend_from_slice(&raster.to_rgb8());
    out
}

pub fn write_ppm(path: &Path, raster: &Raster) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_ppm(raster))
}

pub fn write_png(path: &Path, raster: &Raster) -> Result<(), RasterError> {
    image::save_buffer(
        path,
        &raster.to_rgb8(),
        raster.width,
        raster.height,
        image::ExtendedColorType::Rgb8,
    )
    .map_err(|e| RasterError::Encode(e.to_string()))
}
