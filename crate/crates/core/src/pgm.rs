//! Binary greyscale PGM (`P5`, maxval 255) reading and writing.
//!
//! Header tokens are separated by ASCII whitespace and may be interleaved with
//! `#` comments running to the end of the line. Exactly one whitespace byte
//! separates the maxval token from the raster, which is one byte per pixel in
//! row-major order with the origin at the top-left.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed PGM at byte {offset}: {message}")]
pub struct PgmError {
    pub offset: usize,
    pub message: String,
}

impl PgmError {
    fn new(offset: usize, message: impl Into<String>) -> Self {
        Self {
            offset,
            message: message.into(),
        }
    }
}

/// An 8-bit greyscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreyImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GreyImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer size mismatch");
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn read_uint(&mut self, what: &str) -> Result<(usize, usize), PgmError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PgmError::new(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .map(|v| (start, v))
            .ok_or_else(|| PgmError::new(start, format!("{what} out of range")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<GreyImage, PgmError> {
    if bytes.len() < 2 {
        return Err(PgmError::new(bytes.len(), "truncated magic number"));
    }
    if &bytes[..2] != b"P5" {
        return Err(PgmError::new(0, "expected magic \"P5\""));
    }
    let mut reader = HeaderReader { bytes, pos: 2 };
    if !bytes
        .get(2)
        .is_some_and(|b| b.is_ascii_whitespace() || *b == b'#')
    {
        return Err(PgmError::new(2, "expected whitespace after magic"));
    }
    let (_, width) = reader.read_uint("width")?;
    let (_, height) = reader.read_uint("height")?;
    let (maxval_offset, maxval) = reader.read_uint("maxval")?;
    if maxval != 255 {
        return Err(PgmError::new(
            maxval_offset,
            format!("unsupported maxval {maxval}, expected 255"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(PgmError::new(maxval_offset, "image has zero area"));
    }
    match bytes.get(reader.pos) {
        Some(b) if b.is_ascii_whitespace() => reader.pos += 1,
        _ => {
            return Err(PgmError::new(
                reader.pos,
                "expected single whitespace before raster",
            ))
        }
    }
    let start = reader.pos;
    let needed = width
        .checked_mul(height)
        .ok_or_else(|| PgmError::new(start, "image dimensions overflow"))?;
    let available = bytes.len() - start;
    if available < needed {
        return Err(PgmError::new(
            bytes.len(),
            format!("truncated pixel data: expected {needed} bytes, found {available}"),
        ));
    }
    Ok(GreyImage::new(
        width,
        height,
        bytes[start..start + needed].to_vec(),
    ))
}

pub fn encode(image: &GreyImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", image.width, image.height);
    let mut out = Vec::with_capacity(header.len() + image.pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&image.pixels);
    out
}
