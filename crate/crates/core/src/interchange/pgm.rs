use std::fs;
use std::path::Path;

use super::{InterchangeError, Result};

/// Row-major grayscale image with pixel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(InterchangeError::Invalid(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(InterchangeError::Invalid(format!(
                "pixel {i} = {} outside [0, 1]",
                pixels[i]
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!((0.0..=1.0).contains(&value), "pixel value outside [0, 1]");
        GrayImage {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    /// Wraps pixels already known to lie in `[0, 1]`.
    pub(crate) fn from_clamped(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        debug_assert_eq!(pixels.len(), width * height);
        debug_assert!(pixels.iter().all(|p| (0.0..=1.0).contains(p)));
        GrayImage {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Copies out the `w`×`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> GrayImage {
        assert!(
            x0 + w <= self.width && y0 + h <= self.height,
            "crop out of bounds"
        );
        let mut pixels = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let row = y * self.width;
            pixels.extend_from_slice(&self.pixels[row + x0..row + x0 + w]);
        }
        GrayImage::from_clamped(w, h, pixels)
    }

    /// The image after an 8-bit quantization round trip.
    pub fn quantized(&self) -> GrayImage {
        let pixels = self
            .pixels
            .iter()
            .map(|&p| f64::from(quantize(p)) / 255.0)
            .collect();
        GrayImage::from_clamped(self.width, self.height, pixels)
    }
}

/// `round(p * 255)` with halves away from zero, clamped to a byte.
fn quantize(p: f64) -> u8 {
    (p * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.pixels.iter().map(|&p| quantize(p)));
    out
}

pub fn write_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|e| InterchangeError::io(path, e))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| InterchangeError::io(path, e))?;
    decode_pgm(&bytes)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn bad(&self, message: impl Into<String>) -> InterchangeError {
        InterchangeError::Binary {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.bad(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.bad(format!("{what} too large")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut cur = HeaderCursor { bytes, pos: 0 };
    if bytes.get(..2) != Some(b"P5") {
        return Err(cur.bad("unsupported magic"));
    }
    cur.pos = 2;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(cur.bad(format!("unsupported maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(cur.bad("missing whitespace after maxval"));
    }
    cur.pos += 1;
    let needed = width
        .checked_mul(height)
        .ok_or_else(|| cur.bad("image dimensions overflow"))?;
    let raster = &bytes[cur.pos..];
    if raster.len() < needed {
        return Err(InterchangeError::Binary {
            offset: bytes.len(),
            message: format!(
                "truncated payload: need {needed} bytes, found {}",
                raster.len()
            ),
        });
    }
    let pixels = raster[..needed]
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    Ok(GrayImage::from_clamped(width, height, pixels))
}
