//! Boundary extraction and exact signed Euclidean distance transforms.
//!
//! Squared distances are propagated one axis at a time with the lower
//! envelope of parabolas (Felzenszwalb & Huttenlocher), which is exact on
//! the integer lattice: every intermediate value is an integer sum of
//! squares, so the pixel-unit field is bit-identical to a brute-force search.

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask, Shape};

/// Foreground pixels that touch the background through a face.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySet {
    shape: Shape,
    indices: Vec<usize>,
}

impl BoundarySet {
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Flat pixel indices, ascending.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn coords(&self) -> Vec<Vec<usize>> {
        self.indices.iter().map(|&i| self.shape.coords(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn spacing(&self) -> &[f64] {
        self.shape.spacing()
    }
}

/// Boundary membership per pixel. With `border_is_background`, pixels on the
/// lattice frame count as boundary even without a background neighbour.
pub fn boundary_indicator(mask: &Mask, border_is_background: bool) -> Vec<bool> {
    let shape = mask.shape();
    let data = mask.data();
    (0..data.len())
        .map(|i| {
            if !data[i] {
                return false;
            }
            let mut touches = false;
            shape.for_each_face_neighbor(i, |n| match n {
                Some(j) => touches |= !data[j],
                None => touches |= border_is_background,
            });
            touches
        })
        .collect()
}

pub fn extract_boundary(mask: &Mask, border_is_background: bool) -> BoundarySet {
    let indices = boundary_indicator(mask, border_is_background)
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect();
    BoundarySet {
        shape: mask.shape().clone(),
        indices,
    }
}

/// Squared distance from every pixel to the nearest `true` site. Each axis is
/// scaled by `axis_scale` (1.0 for pixel units, the spacing for mm). Pixels
/// with no reachable site get `f64::INFINITY`.
pub fn squared_distance_to_sites(shape: &Shape, sites: &[bool], axis_scale: &[f64]) -> Vec<f64> {
    let mut field: Vec<f64> = sites.iter().map(|&s| if s { 0.0 } else { f64::INFINITY }).collect();
    let dims = shape.dims();
    let strides = shape.strides();
    let n = shape.len();

    let longest = dims.iter().copied().max().unwrap_or(0);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut hull = Vec::with_capacity(longest);
    let mut bounds = Vec::with_capacity(longest + 1);

    for axis in 0..dims.len() {
        let len = dims[axis];
        let stride = strides[axis];
        let w2 = axis_scale[axis] * axis_scale[axis];
        for outer in 0..n / (len * stride) {
            for inner in 0..stride {
                let start = outer * len * stride + inner;
                for k in 0..len {
                    line[k] = field[start + k * stride];
                }
                lower_envelope(&line[..len], w2, &mut out[..len], &mut hull, &mut bounds);
                for k in 0..len {
                    field[start + k * stride] = out[k];
                }
            }
        }
    }
    field
}

/// `out[q] = min_p f[p] + w2 (q - p)^2` over sites with finite `f[p]`.
fn lower_envelope(f: &[f64], w2: f64, out: &mut [f64], hull: &mut Vec<usize>, bounds: &mut Vec<f64>) {
    hull.clear();
    bounds.clear();
    for q in 0..f.len() {
        if f[q].is_infinite() {
            continue;
        }
        let qf = q as f64;
        loop {
            let Some(&p) = hull.last() else {
                hull.push(q);
                bounds.push(f64::NEG_INFINITY);
                break;
            };
            let pf = p as f64;
            let s = ((f[q] + w2 * qf * qf) - (f[p] + w2 * pf * pf)) / (2.0 * w2 * (qf - pf));
            if s <= *bounds.last().unwrap() {
                hull.pop();
                bounds.pop();
                continue;
            }
            hull.push(q);
            bounds.push(s);
            break;
        }
    }
    if hull.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, slot) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while k + 1 < hull.len() && bounds[k + 1] < qf {
            k += 1;
        }
        let d = qf - hull[k] as f64;
        *slot = f[hull[k]] + w2 * d * d;
    }
}

/// Signed distance to the boundary of a foreground region: positive inside,
/// zero on boundary pixels, negative outside.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedDistanceField(Grid);

impl SignedDistanceField {
    pub fn grid(&self) -> &Grid {
        &self.0
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn into_grid(self) -> Grid {
        self.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SdtOptions {
    pub border_is_background: bool,
    /// Measure in mm using the mask spacing instead of pixel units.
    pub use_spacing: bool,
}

/// Pixel-unit signed distance field with the default boundary convention.
pub fn signed_edt(mask: &Mask) -> Result<SignedDistanceField> {
    signed_edt_with(mask, SdtOptions::default())
}

pub fn signed_edt_with(mask: &Mask, options: SdtOptions) -> Result<SignedDistanceField> {
    let boundary = boundary_indicator(mask, options.border_is_background);
    if !boundary.iter().any(|&b| b) {
        return Err(Error::NoBoundary);
    }
    let shape = mask.shape();
    let scale = axis_scale(shape, options.use_spacing);
    let squared = squared_distance_to_sites(shape, &boundary, &scale);
    let values = squared
        .iter()
        .zip(mask.data())
        .map(|(&d2, &fg)| if fg { d2.sqrt() } else { -d2.sqrt() })
        .collect();
    Ok(SignedDistanceField(Grid::new(shape.clone(), values)?))
}

pub(crate) fn axis_scale(shape: &Shape, use_spacing: bool) -> Vec<f64> {
    if use_spacing {
        shape.spacing().to_vec()
    } else {
        vec![1.0; shape.ndim()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(values: &[u8]) -> Mask {
        Mask::new(
            Shape::unit(&[1, values.len()]).unwrap(),
            values.iter().map(|&v| v == 1).collect(),
        )
        .unwrap()
    }

    #[test]
    fn boundary_of_row() {
        let b = extract_boundary(&row(&[0, 0, 1, 1, 1, 0]), false);
        assert_eq!(b.indices(), &[2, 4]);
    }

    #[test]
    fn boundary_empty_cases() {
        assert!(extract_boundary(&row(&[0, 0, 0]), false).is_empty());
        assert!(extract_boundary(&row(&[1, 1, 1]), false).is_empty());
        assert_eq!(extract_boundary(&row(&[1, 1, 1]), true).len(), 3);
    }

    #[test]
    fn single_pixel_boundary() {
        let shape = Shape::unit(&[7, 7]).unwrap();
        let mut data = vec![false; 49];
        data[3 * 7 + 3] = true;
        let b = extract_boundary(&Mask::new(shape, data).unwrap(), false);
        assert_eq!(b.coords(), vec![vec![3, 3]]);
    }

    #[test]
    fn signed_row() {
        let f = signed_edt(&row(&[0, 0, 1, 1, 1, 0])).unwrap();
        assert_eq!(f.values(), &[-2.0, -1.0, 0.0, 1.0, 0.0, -1.0]);
    }

    #[test]
    fn no_boundary_is_an_error() {
        assert!(matches!(signed_edt(&row(&[0, 0, 0])), Err(Error::NoBoundary)));
    }

    #[test]
    fn spacing_scales_distances() {
        let shape = Shape::new(&[1, 5], &[1.0, 0.5]).unwrap();
        let mask = Mask::new(shape, vec![true, false, false, false, false]).unwrap();
        let f = signed_edt_with(
            &mask,
            SdtOptions {
                border_is_background: false,
                use_spacing: true,
            },
        )
        .unwrap();
        assert_eq!(f.values(), &[0.0, -0.5, -1.0, -1.5, -2.0]);
    }

    #[test]
    fn diagonal_distance_is_euclidean() {
        let shape = Shape::unit(&[4, 4]).unwrap();
        let mut sites = vec![false; 16];
        sites[0] = true;
        let d2 = squared_distance_to_sites(&shape, &sites, &[1.0, 1.0]);
        assert_eq!(d2[15], 18.0);
        assert_eq!(d2[6], 5.0);
    }

    #[test]
    fn no_sites_is_infinite() {
        let shape = Shape::unit(&[2, 3]).unwrap();
        let d2 = squared_distance_to_sites(&shape, &[false; 6], &[1.0, 1.0]);
        assert!(d2.iter().all(|v| v.is_infinite()));
    }
}
