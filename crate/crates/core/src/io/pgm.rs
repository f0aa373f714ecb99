//! Portable graymap, ASCII (`P2`) and binary (`P5`), 8-bit only.
//!
//! Samples are kept as stored; an image with `maxval < 255` is not rescaled.

use std::path::Path;

use thiserror::Error;

use crate::frames::{FramePair, GrayImage};
use crate::io::{read_file, write_file, IoError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PgmError {
    #[error("malformed PGM header: {0}")]
    Header(String),

    #[error("PGM maxval {0} is outside 1..=255")]
    Maxval(u32),

    #[error("truncated PGM payload: expected {expected} samples, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("PGM sample {value} at index {index} exceeds maxval {maxval}")]
    Sample { index: usize, value: u32, maxval: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Ascii,
    Binary,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Skip whitespace and `#` comments up to the end of their line.
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&[u8]> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() && self.bytes[self.pos] != b'#' {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn header_number(&mut self, what: &str) -> Result<u32, PgmError> {
        let tok = self.token().ok_or_else(|| PgmError::Header(format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PgmError::Header(format!("bad {what} {:?}", String::from_utf8_lossy(tok))))
    }
}

pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    let kind = match bytes.get(..2) {
        Some(b"P2") => Kind::Ascii,
        Some(b"P5") => Kind::Binary,
        _ => return Err(PgmError::Header("magic number is not P2 or P5".into())),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.header_number("width")? as usize;
    let height = cur.header_number("height")? as usize;
    if width == 0 || height == 0 {
        return Err(PgmError::Header(format!("empty image {width}x{height}")));
    }
    let maxval = cur.header_number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(PgmError::Maxval(maxval));
    }
    let n = width * height;
    let data = match kind {
        Kind::Binary => {
            // exactly one whitespace byte separates the header from the raster
            match bytes.get(cur.pos) {
                Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
                _ => return Err(PgmError::Header("missing separator after maxval".into())),
            }
            let raster = &bytes[cur.pos..];
            if raster.len() < n {
                return Err(PgmError::Truncated { expected: n, found: raster.len() });
            }
            raster[..n].to_vec()
        }
        Kind::Ascii => {
            let mut data = Vec::with_capacity(n);
            while data.len() < n {
                let Some(tok) = cur.token() else {
                    return Err(PgmError::Truncated { expected: n, found: data.len() });
                };
                let value: u32 = std::str::from_utf8(tok)
                    .ok()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| PgmError::Header(format!("bad sample {:?}", String::from_utf8_lossy(tok))))?;
                data.push(value);
            }
            data.into_iter()
                .enumerate()
                .map(|(index, value)| {
                    if value > maxval {
                        Err(PgmError::Sample { index, value, maxval })
                    } else {
                        Ok(value as u8)
                    }
                })
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    if kind == Kind::Binary {
        if let Some((index, &v)) = data.iter().enumerate().find(|(_, &v)| u32::from(v) > maxval) {
            return Err(PgmError::Sample { index, value: u32::from(v), maxval });
        }
    }
    Ok(GrayImage::new(width, height, data).expect("raster length checked"))
}

/// Binary `P5`, maxval 255.
pub fn write_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.pixels());
    out
}

/// ASCII `P2`, maxval 255, one image row per line.
pub fn write_pgm_ascii(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n255\n", image.width(), image.height());
    for row in image.pixels().chunks(image.width()) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

pub const PREV_FILE: &str = "prev.pgm";
pub const CURR_FILE: &str = "curr.pgm";

/// Load `prev.pgm` and `curr.pgm` from a frame directory.
pub fn read_frames(dir: &Path) -> Result<FramePair, IoError> {
    let prev = read_pgm(&read_file(&dir.join(PREV_FILE))?)?;
    let curr = read_pgm(&read_file(&dir.join(CURR_FILE))?)?;
    Ok(FramePair::new(prev, curr)?)
}

pub fn write_frames(dir: &Path, frames: &FramePair) -> Result<(), IoError> {
    write_file(&dir.join(PREV_FILE), &write_pgm(&frames.prev))?;
    write_file(&dir.join(CURR_FILE), &write_pgm(&frames.curr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_pixel_round_trip() {
        let img = GrayImage::filled(1, 1, 0);
        assert_eq!(read_pgm(&write_pgm(&img)).unwrap(), img);
        assert_eq!(read_pgm(&write_pgm_ascii(&img)).unwrap(), img);
    }

    #[test]
    fn ascii_with_comments_matches_binary() {
        let ascii = b"P2\n# made by hand\n3 2 # trailing\n255\n0 10 20\n# row two\n30 40 255\n";
        let mut binary = b"P5 3 2 255\n".to_vec();
        binary.extend_from_slice(&[0, 10, 20, 30, 40, 255]);
        assert_eq!(read_pgm(ascii).unwrap(), read_pgm(&binary).unwrap());
    }

    #[test]
    fn binary_raster_may_start_with_hash_byte() {
        let mut bytes = b"P5\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(b"# ");
        assert_eq!(read_pgm(&bytes).unwrap().pixels(), b"# ");
    }

    #[test]
    fn distinct_errors() {
        assert!(matches!(read_pgm(b"P6\n1 1\n255\n\0"), Err(PgmError::Header(_))));
        assert!(matches!(read_pgm(b"P5\n1\n"), Err(PgmError::Header(_))));
        assert!(matches!(read_pgm(b"P5\n1 1\n65535\n\0\0"), Err(PgmError::Maxval(65535))));
        assert!(matches!(read_pgm(b"P5\n2 2\n255\n\0\0\0"), Err(PgmError::Truncated { expected: 4, found: 3 })));
        assert!(matches!(read_pgm(b"P2\n2 2\n255\n1 2 3"), Err(PgmError::Truncated { expected: 4, found: 3 })));
        assert!(matches!(read_pgm(b"P2\n1 1\n15\n16"), Err(PgmError::Sample { value: 16, .. })));
    }
}
