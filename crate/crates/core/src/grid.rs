//! Lattice containers shared by every stage of the pipeline.
//!
//! All buffers are row-major with the last axis varying fastest, so a 2D
//! image of `dims = [rows, cols]` stores pixel `(r, c)` at `r * cols + c`.
//! Class stacks put the class axis in front of the spatial axes.

use crate::error::{Error, Result};

/// Spatial extent and physical spacing (mm) of a 2D or 3D lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct Shape {
    dims: Vec<usize>,
    spacing: Vec<f64>,
}

impl Shape {
    pub fn new(dims: &[usize], spacing: &[f64]) -> Result<Self> {
        if dims.len() != 2 && dims.len() != 3 {
            return Err(Error::InvalidShape(format!("expected 2 or 3 axes, got {}", dims.len())));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidShape(format!("zero-sized axis in {dims:?}")));
        }
        if spacing.len() != dims.len() {
            return Err(Error::InvalidShape(format!(
                "{} spacing entries for {} axes",
                spacing.len(),
                dims.len()
            )));
        }
        if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidShape(format!(
                "spacing must be positive, got {spacing:?}"
            )));
        }
        Ok(Self {
            dims: dims.to_vec(),
            spacing: spacing.to_vec(),
        })
    }

    /// Shape with 1.0 mm spacing on every axis.
    pub fn unit(dims: &[usize]) -> Result<Self> {
        Self::new(dims, &vec![1.0; dims.len()])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Number of pixels `N`.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same dims, spacing replaced.
    pub fn with_spacing(&self, spacing: &[f64]) -> Result<Self> {
        Self::new(&self.dims, spacing)
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for axis in (0..self.dims.len() - 1).rev() {
            strides[axis] = strides[axis + 1] * self.dims[axis + 1];
        }
        strides
    }

    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for axis in (0..self.dims.len()).rev() {
            out[axis] = index % self.dims[axis];
            index /= self.dims[axis];
        }
        out
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.dims).fold(0, |acc, (&c, &d)| acc * d + c)
    }

    /// Visits the face neighbours of `index` (4 in 2D, 6 in 3D). Neighbours
    /// that fall outside the lattice are reported as `None`.
    pub fn for_each_face_neighbor(&self, index: usize, mut f: impl FnMut(Option<usize>)) {
        let strides = self.strides();
        let mut rem = index;
        for axis in 0..self.dims.len() {
            let c = rem / strides[axis];
            rem %= strides[axis];
            f(if c > 0 { Some(index - strides[axis]) } else { None });
            f(if c + 1 < self.dims[axis] {
                Some(index + strides[axis])
            } else {
                None
            });
        }
    }

    pub fn ensure_same_dims(&self, other: &Shape) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch {
                expected: self.dims.clone(),
                found: other.dims.clone(),
            });
        }
        Ok(())
    }
}

/// Dense scalar field over a lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    shape: Shape,
    values: Vec<f64>,
}

impl Grid {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::InvalidShape(format!(
                "{} values for dims {:?}",
                values.len(),
                shape.dims()
            )));
        }
        Ok(Self { shape, values })
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        let values = vec![value; shape.len()];
        Self { shape, values }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, coords: &[usize]) -> f64 {
        self.values[self.shape.index(coords)]
    }
}

/// Binary plane, e.g. the foreground region of one class.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    shape: Shape,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(shape: Shape, data: Vec<bool>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::InvalidShape(format!(
                "{} mask values for dims {:?}",
                data.len(),
                shape.dims()
            )));
        }
        Ok(Self { shape, data })
    }

    /// Interprets a 0/1 grid as a mask; any other value is rejected.
    pub fn from_grid(grid: &Grid) -> Result<Self> {
        let data = grid
            .values()
            .iter()
            .map(|&v| match v {
                v if v == 0.0 => Ok(false),
                v if v == 1.0 => Ok(true),
                v => Err(Error::param("mask", format!("non-binary value {v}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            shape: grid.shape().clone(),
            data,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn to_grid(&self) -> Grid {
        Grid {
            shape: self.shape.clone(),
            values: self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }
}

/// Integer category per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMap {
    shape: Shape,
    labels: Vec<u32>,
    num_classes: usize,
}

impl LabelMap {
    pub fn new(shape: Shape, labels: Vec<u32>, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::param("num_classes", "at least two classes required"));
        }
        if labels.len() != shape.len() {
            return Err(Error::InvalidShape(format!(
                "{} labels for dims {:?}",
                labels.len(),
                shape.dims()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::LabelOutOfRange { label, num_classes });
        }
        Ok(Self {
            shape,
            labels,
            num_classes,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_mask(&self, class: usize) -> Mask {
        Mask {
            shape: self.shape.clone(),
            data: self.labels.iter().map(|&l| l as usize == class).collect(),
        }
    }
}

/// `C` planes over one lattice, stored class-major (`C × N`).
#[derive(Clone, Debug, PartialEq)]
pub struct ClassStack {
    shape: Shape,
    num_classes: usize,
    data: Vec<f64>,
}

impl ClassStack {
    pub fn new(shape: Shape, num_classes: usize, data: Vec<f64>) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::param("num_classes", "must be positive"));
        }
        if data.len() != shape.len() * num_classes {
            return Err(Error::InvalidShape(format!(
                "{} values for {} planes of dims {:?}",
                data.len(),
                num_classes,
                shape.dims()
            )));
        }
        Ok(Self {
            shape,
            num_classes,
            data,
        })
    }

    pub fn zeros(shape: Shape, num_classes: usize) -> Self {
        let data = vec![0.0; shape.len() * num_classes];
        Self {
            shape,
            num_classes,
            data,
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Pixel count `N` of one plane.
    pub fn num_pixels(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn plane(&self, class: usize) -> &[f64] {
        let n = self.num_pixels();
        &self.data[class * n..(class + 1) * n]
    }

    pub fn plane_mut(&mut self, class: usize) -> &mut [f64] {
        let n = self.num_pixels();
        &mut self.data[class * n..(class + 1) * n]
    }

    pub fn plane_grid(&self, class: usize) -> Grid {
        Grid {
            shape: self.shape.clone(),
            values: self.plane(class).to_vec(),
        }
    }

    pub fn planes(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.num_pixels())
    }

    pub fn ensure_compatible(&self, other: &ClassStack) -> Result<()> {
        self.shape.ensure_same_dims(&other.shape)?;
        if self.num_classes != other.num_classes {
            return Err(Error::ShapeMismatch {
                expected: vec![self.num_classes],
                found: vec![other.num_classes],
            });
        }
        Ok(())
    }

    /// Index of the largest plane value per pixel; ties go to the lower class.
    pub fn argmax(&self) -> Vec<u32> {
        let n = self.num_pixels();
        (0..n)
            .map(|i| {
                let mut best = 0;
                for c in 1..self.num_classes {
                    if self.data[c * n + i] > self.data[best * n + i] {
                        best = c;
                    }
                }
                best as u32
            })
            .collect()
    }

    /// Value of each class at one pixel.
    pub fn pixel(&self, index: usize) -> Vec<f64> {
        let n = self.num_pixels();
        (0..self.num_classes).map(|c| self.data[c * n + index]).collect()
    }
}

/// Binary one-hot planes `y^c`; exactly one plane is 1 at every pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct OneHotStack(ClassStack);

impl OneHotStack {
    pub fn stack(&self) -> &ClassStack {
        &self.0
    }

    pub fn into_stack(self) -> ClassStack {
        self.0
    }

    pub fn shape(&self) -> &Shape {
        self.0.shape()
    }

    pub fn num_classes(&self) -> usize {
        self.0.num_classes()
    }

    pub fn plane(&self, class: usize) -> &[f64] {
        self.0.plane(class)
    }

    /// Foreground region of `class`.
    pub fn foreground(&self, class: usize) -> Mask {
        Mask {
            shape: self.0.shape().clone(),
            data: self.0.plane(class).iter().map(|&v| v == 1.0).collect(),
        }
    }

    pub fn to_labels(&self) -> LabelMap {
        LabelMap {
            shape: self.0.shape().clone(),
            labels: self.0.argmax(),
            num_classes: self.0.num_classes(),
        }
    }
}

pub fn one_hot_encode(labels: &LabelMap) -> Result<OneHotStack> {
    let n = labels.shape().len();
    let num_classes = labels.num_classes();
    let mut stack = ClassStack::zeros(labels.shape().clone(), num_classes);
    for (i, &label) in labels.labels().iter().enumerate() {
        let class = label as usize;
        if class >= num_classes {
            return Err(Error::LabelOutOfRange { label, num_classes });
        }
        stack.data[class * n + i] = 1.0;
    }
    Ok(OneHotStack(stack))
}

/// Fraction of pixels in each class, `Σ_i y_i^c / N`.
pub fn class_frequencies(stack: &OneHotStack) -> Vec<f64> {
    let n = stack.stack().num_pixels() as f64;
    stack
        .stack()
        .planes()
        .map(|plane| plane.iter().sum::<f64>() / n)
        .collect()
}

/// Frequencies pooled over several stacks of the same class count.
pub fn pooled_class_frequencies<'a>(stacks: impl IntoIterator<Item = &'a OneHotStack>) -> Vec<f64> {
    let mut counts: Vec<f64> = Vec::new();
    let mut total = 0.0;
    for stack in stacks {
        if counts.is_empty() {
            counts = vec![0.0; stack.num_classes()];
        }
        for (c, plane) in stack.stack().planes().enumerate() {
            counts[c] += plane.iter().sum::<f64>();
        }
        total += stack.stack().num_pixels() as f64;
    }
    counts.into_iter().map(|c| c / total).collect()
}
