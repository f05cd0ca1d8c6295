//! Bit-exact image file handling: binary PGM (P5) and PPM (P6), maxval 255.
//!
//! These two formats are the only raster formats used anywhere in the
//! pipelines. They round-trip losslessly, so frame fixtures and depth-map
//! outputs can be compared byte for byte.

use crate::error::{Error, Result};

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    samples: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, samples: Vec<u8>) -> Result<Self> {
        if samples.len() != width * height {
            return Err(Error::Dimension(format!(
                "gray image {}x{} needs {} samples, got {}",
                width,
                height,
                width * height,
                samples.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            samples,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        GrayImage {
            width,
            height,
            samples,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.samples[y * self.width + x]
    }
}

/// 8-bit RGB image, row-major interleaved triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    samples: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, samples: Vec<u8>) -> Result<Self> {
        if samples.len() != 3 * width * height {
            return Err(Error::Dimension(format!(
                "rgb image {}x{} needs {} samples, got {}",
                width,
                height,
                3 * width * height,
                samples.len()
            )));
        }
        Ok(RgbImage {
            width,
            height,
            samples,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.samples[i], self.samples[i + 1], self.samples[i + 2]]
    }
}

/// Converts RGB to luma with BT.601 weights, rounded to nearest.
pub fn rgb_to_gray(img: &RgbImage) -> GrayImage {
    let mut samples = Vec::with_capacity(img.width * img.height);
    for px in img.samples.chunks_exact(3) {
        let luma = 0.299 * f64::from(px[0]) + 0.587 * f64::from(px[1]) + 0.114 * f64::from(px[2]);
        samples.push(luma.round().clamp(0.0, 255.0) as u8);
    }
    GrayImage {
        width: img.width,
        height: img.height,
        samples,
    }
}

/// Header fields common to P5/P6: width, height, maxval, and the offset of
/// the first payload byte.
struct PnmHeader {
    width: usize,
    height: usize,
    payload_start: usize,
}

/// Parses the ASCII part of a binary netpbm file after the magic.
/// Comments (`#` to end of line) are accepted anywhere whitespace is.
fn parse_header(bytes: &[u8], mut pos: usize) -> Result<PnmHeader> {
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        pos = skip_whitespace_and_comments(bytes, pos)?;
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(Error::parse(start, "expected decimal header field"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("digits are utf8");
        *field = text
            .parse::<usize>()
            .map_err(|e| Error::parse(start, format!("bad header field: {e}")))?;
    }
    // Exactly one whitespace byte separates the maxval from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::parse(pos, "expected whitespace before payload"));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::parse(0, format!("unsupported maxval {maxval}, need 255")));
    }
    Ok(PnmHeader {
        width,
        height,
        payload_start: pos,
    })
}

fn skip_whitespace_and_comments(bytes: &[u8], mut pos: usize) -> Result<usize> {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else if pos >= bytes.len() {
            return Err(Error::parse(pos, "unexpected end of header"));
        } else {
            return Ok(pos);
        }
    }
}

/// Reads a binary PGM ("P5", maxval 255).
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(Error::parse(0, "expected magic \"P5\""));
    }
    let header = parse_header(bytes, 2)?;
    let expected = header.width * header.height;
    let payload = &bytes[header.payload_start..];
    if payload.len() != expected {
        return Err(Error::parse(
            header.payload_start,
            format!("payload holds {} bytes, header declares {}", payload.len(), expected),
        ));
    }
    GrayImage::new(header.width, header.height, payload.to_vec())
}

/// Writes a binary PGM. `read_pgm(write_pgm(img))` yields identical samples.
pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.samples);
    out
}

/// Reads a binary PPM ("P6", maxval 255).
pub fn read_ppm(bytes: &[u8]) -> Result<RgbImage> {
    if bytes.len() < 2 || &bytes[0..2] != b"P6" {
        return Err(Error::parse(0, "expected magic \"P6\""));
    }
    let header = parse_header(bytes, 2)?;
    let expected = 3 * header.width * header.height;
    let payload = &bytes[header.payload_start..];
    if payload.len() != expected {
        return Err(Error::parse(
            header.payload_start,
            format!("payload holds {} bytes, header declares {}", payload.len(), expected),
        ));
    }
    RgbImage::new(header.width, header.height, payload.to_vec())
}

/// Writes a binary PPM.
pub fn write_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.samples);
    out
}
