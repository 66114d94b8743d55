//! `SVXB` binary volume container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size          field
//! 0       4             magic "SVXB"
//! 4       1             version (1)
//! 5       1             dtype: 0 = u8, 1 = u16, 2 = f32
//! 6       1             ndim: 2, 3, or 4 (leading class axis + 3 spatial)
//! 7       1             padding (0)
//! 8       4 * ndim      dims, u32, row-major order
//! ...     4 * nspatial  spacing in mm, f32, one per spatial axis
//! ...     N * size      payload, row-major, last axis fastest
//! ```
//!
//! Class stacks over a 2D lattice are stored with a unit depth axis, i.e.
//! as `[C, 1, H, W]`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{ClassStack, Grid, LabelMap, Shape};
use crate::slic::SuperpixelMap;

pub const MAGIC: &[u8; 4] = b"SVXB";
pub const VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    U8,
    U16,
    F32,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::U8 => 0,
            DType::U16 => 1,
            DType::F32 => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(DType::U8),
            1 => Ok(DType::U16),
            2 => Ok(DType::F32),
            other => Err(Error::Format(format!("unknown dtype code {other}"))),
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::U16 => 2,
            DType::F32 => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VoxFile {
    pub dtype: DType,
    pub dims: Vec<u32>,
    pub spacing: Vec<f32>,
    pub payload: Vec<u8>,
}

fn spatial_axes(ndim: usize) -> usize {
    if ndim == 4 {
        3
    } else {
        ndim
    }
}

impl VoxFile {
    pub fn new(dtype: DType, dims: Vec<u32>, spacing: Vec<f32>, payload: Vec<u8>) -> Result<Self> {
        let file = Self {
            dtype,
            dims,
            spacing,
            payload,
        };
        file.validate()?;
        Ok(file)
    }

    fn validate(&self) -> Result<()> {
        let ndim = self.dims.len();
        if !(2..=4).contains(&ndim) {
            return Err(Error::Format(format!("ndim must be 2, 3 or 4, got {ndim}")));
        }
        if self.spacing.len() != spatial_axes(ndim) {
            return Err(Error::Format(format!(
                "{} spacing entries for ndim {ndim}",
                self.spacing.len()
            )));
        }
        let expected = self.len() * self.dtype.size();
        if self.payload.len() != expected {
            return Err(Error::Format(format!(
                "payload has {} bytes, expected {expected}",
                self.payload.len()
            )));
        }
        Ok(())
    }

    /// Element count.
    pub fn len(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.dims.len() + self.payload.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.dtype.code());
        out.push(self.dims.len() as u8);
        out.push(0);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for s in &self.spacing {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Format("truncated header".into()));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format("bad magic, not an SVXB file".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::Format(format!("unsupported version {}", bytes[4])));
        }
        let dtype = DType::from_code(bytes[5])?;
        let ndim = bytes[6] as usize;
        if !(2..=4).contains(&ndim) {
            return Err(Error::Format(format!("ndim must be 2, 3 or 4, got {ndim}")));
        }
        let nspatial = spatial_axes(ndim);
        let header = 8 + 4 * ndim + 4 * nspatial;
        if bytes.len() < header {
            return Err(Error::Format("truncated header".into()));
        }
        let word = |k: usize| -> [u8; 4] { bytes[k..k + 4].try_into().unwrap() };
        let dims: Vec<u32> = (0..ndim).map(|a| u32::from_le_bytes(word(8 + 4 * a))).collect();
        let spacing: Vec<f32> = (0..nspatial)
            .map(|a| f32::from_le_bytes(word(8 + 4 * ndim + 4 * a)))
            .collect();
        Self::new(dtype, dims, spacing, bytes[header..].to_vec())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Payload decoded to `f64`.
    pub fn values(&self) -> Vec<f64> {
        match self.dtype {
            DType::U8 => self.payload.iter().map(|&b| b as f64).collect(),
            DType::U16 => self
                .payload
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]) as f64)
                .collect(),
            DType::F32 => self
                .payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect(),
        }
    }

    fn spatial_shape(&self) -> Result<Shape> {
        let dims: Vec<usize> = self.dims.iter().map(|&d| d as usize).collect();
        let spatial = if dims.len() == 4 { &dims[1..] } else { &dims[..] };
        let spacing: Vec<f64> = self.spacing.iter().map(|&s| s as f64).collect();
        Shape::new(spatial, &spacing)
    }

    /// Reads a 2D or 3D scalar volume.
    pub fn to_grid(&self) -> Result<Grid> {
        if self.dims.len() == 4 {
            return Err(Error::Format("expected a 2D or 3D volume, got a class stack".into()));
        }
        Grid::new(self.spatial_shape()?, self.values())
    }

    /// Reads integer labels; every value must be a whole number below
    /// `num_classes`.
    pub fn to_label_map(&self, num_classes: usize) -> Result<LabelMap> {
        let grid = self.to_grid()?;
        let labels = integer_values(grid.values())?;
        LabelMap::new(grid.shape().clone(), labels, num_classes)
    }

    pub fn to_superpixels(&self) -> Result<SuperpixelMap> {
        let grid = self.to_grid()?;
        SuperpixelMap::new(grid.shape().clone(), integer_values(grid.values())?)
    }

    pub fn to_stack(&self) -> Result<ClassStack> {
        if self.dims.len() != 4 {
            return Err(Error::Format("expected a 4-axis class stack".into()));
        }
        ClassStack::new(self.spatial_shape()?, self.dims[0] as usize, self.values())
    }

    pub fn from_grid(grid: &Grid) -> Self {
        let payload = grid.values().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
        Self {
            dtype: DType::F32,
            dims: grid.shape().dims().iter().map(|&d| d as u32).collect(),
            spacing: grid.shape().spacing().iter().map(|&s| s as f32).collect(),
            payload,
        }
    }

    /// Labels as u8 when they fit, u16 otherwise.
    pub fn from_labels(labels: &LabelMap) -> Self {
        let values: Vec<u32> = labels.labels().to_vec();
        let dtype = if labels.num_classes() <= 256 {
            DType::U8
        } else {
            DType::U16
        };
        Self::from_ids(labels.shape(), &values, dtype)
    }

    /// Block ids as u16 when they fit, otherwise as f32 (exact below 2^24).
    pub fn from_superpixels(sp: &SuperpixelMap) -> Self {
        let dtype = if sp.num_blocks() <= 1 << 16 {
            DType::U16
        } else {
            DType::F32
        };
        Self::from_ids(sp.shape(), sp.block_ids(), dtype)
    }

    fn from_ids(shape: &Shape, ids: &[u32], dtype: DType) -> Self {
        let payload = match dtype {
            DType::U8 => ids.iter().map(|&v| v as u8).collect(),
            DType::U16 => ids.iter().flat_map(|&v| (v as u16).to_le_bytes()).collect(),
            DType::F32 => ids.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect(),
        };
        Self {
            dtype,
            dims: shape.dims().iter().map(|&d| d as u32).collect(),
            spacing: shape.spacing().iter().map(|&s| s as f32).collect(),
            payload,
        }
    }

    /// Class stack as f32 with the class axis first.
    pub fn from_stack(stack: &ClassStack) -> Self {
        let shape = stack.shape();
        let mut dims = vec![stack.num_classes() as u32];
        let mut spacing: Vec<f32> = Vec::with_capacity(3);
        if shape.ndim() == 2 {
            dims.push(1);
            spacing.push(1.0);
        }
        dims.extend(shape.dims().iter().map(|&d| d as u32));
        spacing.extend(shape.spacing().iter().map(|&s| s as f32));
        let payload = stack.data().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
        Self {
            dtype: DType::F32,
            dims,
            spacing,
            payload,
        }
    }
}

fn integer_values(values: &[f64]) -> Result<Vec<u32>> {
    values
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(Error::Format(format!("non-integer label value {v}")))
            }
        })
        .collect()
}
