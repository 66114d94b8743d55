//! Binary PGM (`P5`) grayscale images.
//!
//! Samples are one byte when `maxval <= 255`, otherwise two bytes,
//! most significant first. Header comments (`#` to end of line) are allowed
//! anywhere whitespace is.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, Shape};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

impl Pgm {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if !bytes.starts_with(b"P5") {
            return Err(Error::Format("not a binary PGM (missing P5 magic)".into()));
        }
        let mut pos = 2;
        let mut fields = [0usize; 3];
        for field in fields.iter_mut() {
            *field = header_number(bytes, &mut pos)?;
        }
        let [width, height, maxval] = fields;
        if width == 0 || height == 0 {
            return Err(Error::Format("PGM has zero width or height".into()));
        }
        if maxval == 0 || maxval > u16::MAX as usize {
            return Err(Error::Format(format!("PGM maxval {maxval} out of range")));
        }
        // exactly one whitespace byte separates the header from the raster
        if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(Error::Format("PGM header not terminated by whitespace".into()));
        }
        pos += 1;
        let wide = maxval > 255;
        let n = width * height;
        let raster = &bytes[pos..];
        let expected = if wide { 2 * n } else { n };
        if raster.len() < expected {
            return Err(Error::Format(format!(
                "PGM raster has {} bytes, expected {expected}",
                raster.len()
            )));
        }
        let samples = if wide {
            raster[..expected]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        } else {
            raster[..expected].iter().map(|&b| b as u16).collect()
        };
        Ok(Self {
            width,
            height,
            maxval: maxval as u16,
            samples,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        if self.maxval > 255 {
            out.extend(self.samples.iter().flat_map(|s| s.to_be_bytes()));
        } else {
            out.extend(self.samples.iter().map(|&s| s as u8));
        }
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Raw sample values on a unit-spacing `[height, width]` grid.
    pub fn to_grid(&self) -> Result<Grid> {
        let shape = Shape::unit(&[self.height, self.width])?;
        Grid::new(shape, self.samples.iter().map(|&s| s as f64).collect())
    }

    /// Quantizes a 2D grid, clamping values to `[0, maxval]`.
    pub fn from_grid(grid: &Grid, maxval: u16) -> Result<Self> {
        let dims = grid.shape().dims();
        if dims.len() != 2 {
            return Err(Error::InvalidShape(format!("PGM needs a 2D grid, got {dims:?}")));
        }
        let samples = grid
            .values()
            .iter()
            .map(|&v| v.round().clamp(0.0, maxval as f64) as u16)
            .collect();
        Ok(Self {
            width: dims[1],
            height: dims[0],
            maxval,
            samples,
        })
    }
}

fn header_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::Format("truncated PGM header".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format("malformed number in PGM header".into()))
}
