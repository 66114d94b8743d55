//! Superpixel-guided label softening and the Gaussian-blur baseline.
//!
//! For every class plane, each superpixel block is classified against the
//! class foreground. Blocks entirely inside or outside keep their hard
//! values; blocks straddling the boundary receive pseudo-probabilities from
//! the signed distance to the foreground boundary.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ClassStack, Mask, OneHotStack, Shape};
use crate::sdt::signed_edt;
use crate::slic::SuperpixelMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Inside,
    Outside,
    Intersect,
}

/// Relation between a block (flat pixel indices) and a foreground plane.
pub fn classify_relation(block: &[usize], plane: &Mask) -> Relation {
    debug_assert!(!block.is_empty());
    let data = plane.data();
    let inside = block.iter().filter(|&&i| data[i]).count();
    match inside {
        0 => Relation::Outside,
        k if k == block.len() => Relation::Inside,
        _ => Relation::Intersect,
    }
}

/// Maps a signed distance to a probability: 0.5 on the boundary, tending to
/// 1 deep inside and to 0 far outside.
pub fn dist_to_prob(d: f64) -> f64 {
    0.5 * (d / (1.0 + d.abs()) + 1.0)
}

/// Soft label planes `q^c` with values in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct SoftLabelStack {
    stack: ClassStack,
    normalized: bool,
}

impl SoftLabelStack {
    pub fn new(stack: ClassStack, normalized: bool) -> Result<Self> {
        if let Some(v) = stack.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param("soft labels", format!("value {v} outside [0, 1]")));
        }
        Ok(Self { stack, normalized })
    }

    /// Hard labels viewed as (degenerate) soft labels.
    pub fn from_hard(hard: &OneHotStack) -> Self {
        Self {
            stack: hard.stack().clone(),
            normalized: true,
        }
    }

    pub fn stack(&self) -> &ClassStack {
        &self.stack
    }

    pub fn into_stack(self) -> ClassStack {
        self.stack
    }

    pub fn shape(&self) -> &Shape {
        self.stack.shape()
    }

    pub fn num_classes(&self) -> usize {
        self.stack.num_classes()
    }

    pub fn plane(&self, class: usize) -> &[f64] {
        self.stack.plane(class)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }
}

pub fn soften(hard: &OneHotStack, sp: &SuperpixelMap, normalize: bool) -> Result<SoftLabelStack> {
    hard.shape().ensure_same_dims(sp.shape())?;
    let blocks = sp.blocks();
    let planes = (0..hard.num_classes())
        .into_par_iter()
        .map(|c| soften_plane(hard, c, &blocks))
        .collect::<Result<Vec<_>>>()?;

    let mut stack = ClassStack::zeros(hard.shape().clone(), hard.num_classes());
    for (c, plane) in planes.into_iter().enumerate() {
        stack.plane_mut(c).copy_from_slice(&plane);
    }
    if normalize {
        normalize_across_classes(&mut stack);
    }
    Ok(SoftLabelStack {
        stack,
        normalized: normalize,
    })
}

fn soften_plane(hard: &OneHotStack, class: usize, blocks: &[Vec<usize>]) -> Result<Vec<f64>> {
    let mut plane = hard.plane(class).to_vec();
    let foreground = hard.foreground(class);
    let mut field = None;
    for block in blocks.iter().filter(|b| !b.is_empty()) {
        if classify_relation(block, &foreground) != Relation::Intersect {
            continue;
        }
        // the distance only depends on the class boundary, so one field
        // serves every intersecting block
        if field.is_none() {
            field = Some(signed_edt(&foreground)?);
        }
        let d = field.as_ref().unwrap().values();
        for &i in block {
            plane[i] = dist_to_prob(d[i]);
        }
    }
    Ok(plane)
}

/// Rescales every pixel so that the class values sum to one.
fn normalize_across_classes(stack: &mut ClassStack) {
    let n = stack.num_pixels();
    let c = stack.num_classes();
    let data = stack.data_mut();
    for i in 0..n {
        let total: f64 = (0..c).map(|k| data[k * n + i]).sum();
        if total > 0.0 {
            for k in 0..c {
                data[k * n + i] /= total;
            }
        }
    }
}

/// Unit-mass Gaussian kernel truncated at `round(3σ)` pixels.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma + 0.5).floor() as usize;
    let mut kernel: Vec<f64> = (0..=2 * radius)
        .map(|k| {
            let x = k as f64 - radius as f64;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= total);
    kernel
}

/// Separable Gaussian blur with edge replication, `sigma` in pixels.
pub fn gaussian_blur(shape: &Shape, values: &[f64], sigma: f64) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let dims = shape.dims();
    let strides = shape.strides();
    let n = shape.len();
    let mut current = values.to_vec();
    let mut line = Vec::new();
    for axis in 0..dims.len() {
        let len = dims[axis];
        let stride = strides[axis];
        let mut next = vec![0.0; n];
        for outer in 0..n / (len * stride) {
            for inner in 0..stride {
                let start = outer * len * stride + inner;
                line.clear();
                line.extend((0..len).map(|k| current[start + k * stride]));
                for q in 0..len {
                    let mut acc = 0.0;
                    for (k, &w) in kernel.iter().enumerate() {
                        let p = (q as isize + k as isize - radius).clamp(0, len as isize - 1);
                        acc += w * line[p as usize];
                    }
                    next[start + q * stride] = acc;
                }
            }
        }
        current = next;
    }
    current
}

/// Blurs every one-hot plane and renormalises across classes.
pub fn gaussian_soften(hard: &OneHotStack, sigma: f64) -> Result<SoftLabelStack> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param("sigma", "must be positive"));
    }
    let shape = hard.shape().clone();
    let planes: Vec<Vec<f64>> = (0..hard.num_classes())
        .into_par_iter()
        .map(|c| gaussian_blur(&shape, hard.plane(c), sigma))
        .collect();
    let mut stack = ClassStack::zeros(shape, hard.num_classes());
    for (c, plane) in planes.into_iter().enumerate() {
        let out = stack.plane_mut(c);
        for (o, v) in out.iter_mut().zip(plane) {
            *o = v.clamp(0.0, 1.0);
        }
    }
    normalize_across_classes(&mut stack);
    Ok(SoftLabelStack {
        stack,
        normalized: true,
    })
}
