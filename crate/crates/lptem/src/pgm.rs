//! Binary PGM (P5) images with raw sample values.
//!
//! Writing always uses maxval 65535 (two big-endian bytes per sample). Reading
//! accepts any maxval up to 65535; samples are returned unscaled, which keeps
//! label values intact in masks written by other tools.

use std::path::Path;

use lptem_core::{Frame, LabelImage};

use crate::error::{CliError, Result};
use crate::fsutil;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub data: Vec<u16>,
}

pub fn encode(width: usize, height: usize, data: &[u16]) -> Vec<u8> {
    assert_eq!(data.len(), width * height);
    let header = format!("P5\n{width} {height}\n65535\n");
    let mut out = Vec::with_capacity(header.len() + 2 * data.len());
    out.extend_from_slice(header.as_bytes());
    for v in data {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

/// 8-bit PGM with maxval 255.
pub fn encode_8bit(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.buf.len() {
            match self.buf[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> std::result::Result<usize, String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.buf.len() && self.buf[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("malformed {what} in PGM header"))
    }
}

pub fn decode(buf: &[u8]) -> std::result::Result<Pgm, String> {
    if buf.len() < 2 || &buf[..2] != b"P5" {
        return Err("not a binary PGM (missing P5 magic)".into());
    }
    let mut c = Cursor { buf, pos: 2 };
    let width = c.number("width")?;
    let height = c.number("height")?;
    let maxval = c.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    if c.pos >= buf.len() || !buf[c.pos].is_ascii_whitespace() {
        return Err("missing whitespace after maxval".into());
    }
    c.pos += 1;
    let bytes_per = if maxval < 256 { 1 } else { 2 };
    let n = width * height;
    let body = &buf[c.pos..];
    if body.len() < n * bytes_per {
        return Err(format!("truncated raster: {} bytes, expected {}", body.len(), n * bytes_per));
    }
    let data = if bytes_per == 1 {
        body[..n].iter().map(|&b| b as u16).collect()
    } else {
        body[..2 * n].chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect()
    };
    Ok(Pgm { width, height, maxval: maxval as u16, data })
}

pub fn read(path: &Path) -> Result<Pgm> {
    let buf = fsutil::read(path)?;
    decode(&buf).map_err(|m| CliError::data(path, m))
}

pub fn write_frame(path: &Path, frame: &Frame) -> Result<()> {
    fsutil::write_atomic(path, &encode(frame.width, frame.height, &frame.data))
}

pub fn write_mask(path: &Path, mask: &LabelImage) -> Result<()> {
    fsutil::write_atomic(path, &encode(mask.width, mask.height, &mask.data))
}

pub fn read_mask(path: &Path) -> Result<LabelImage> {
    let p = read(path)?;
    LabelImage::from_vec(p.width, p.height, p.data).map_err(|e| CliError::data(path, e.to_string()))
}

pub fn read_frame(path: &Path) -> Result<Frame> {
    let p = read(path)?;
    Frame::from_vec(p.width, p.height, p.data).map_err(|e| CliError::data(path, e.to_string()))
}

/// Linear 16→8 bit scaling: `round(255 · (v − lo) / (hi − lo))`, clamped.
pub fn scale_to_8bit(data: &[u16], lo: u16, hi: u16) -> Vec<u8> {
    let span = (hi.saturating_sub(lo)).max(1) as f64;
    data.iter()
        .map(|&v| ((v.saturating_sub(lo)) as f64 * 255.0 / span).round().min(255.0) as u8)
        .collect()
}
