//! Overlap, volume and surface-distance measures between binary masks.
//!
//! Surfaces are the boundary pixels of each mask (foreground with a
//! background face neighbour, the lattice frame counting as background), and
//! distances are in mm using the mask spacing. HD95 is the larger of the two
//! directed 95th percentiles, with linear interpolation between order
//! statistics.

use crate::error::{Error, Result};
use crate::grid::{LabelMap, Mask};
use crate::sdt::{boundary_indicator, squared_distance_to_sites};

fn check_dims(a: &Mask, b: &Mask) -> Result<()> {
    a.shape().ensure_same_dims(b.shape())
}

/// `2|A∩B| / (|A| + |B|)`, 1 when both masks are empty.
pub fn dice_score(a: &Mask, b: &Mask) -> Result<f64> {
    check_dims(a, b)?;
    let both = a.data().iter().zip(b.data()).filter(|(&x, &y)| x && y).count();
    let total = a.count() + b.count();
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / total as f64)
}

/// `1 - ||A| - |B|| / (|A| + |B|)`, 1 when both masks are empty.
pub fn volumetric_similarity(a: &Mask, b: &Mask) -> Result<f64> {
    check_dims(a, b)?;
    let (na, nb) = (a.count() as f64, b.count() as f64);
    if na + nb == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - (na - nb).abs() / (na + nb))
}

/// Directed nearest-surface distances, one entry per surface pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceDistances {
    pub a_to_b: Vec<f64>,
    pub b_to_a: Vec<f64>,
}

/// Surface-to-surface distances in mm, using the spacing of `a`.
pub fn surface_distances(a: &Mask, b: &Mask) -> Result<SurfaceDistances> {
    check_dims(a, b)?;
    if a.count() == 0 || b.count() == 0 {
        return Err(Error::EmptyMask);
    }
    let shape = a.shape();
    let surface_a = boundary_indicator(a, true);
    let surface_b = boundary_indicator(b, true);
    let spacing = shape.spacing();
    let to_b = squared_distance_to_sites(shape, &surface_b, spacing);
    let to_a = squared_distance_to_sites(shape, &surface_a, spacing);
    let directed = |from: &[bool], field: &[f64]| -> Vec<f64> {
        from.iter()
            .zip(field)
            .filter(|(&s, _)| s)
            .map(|(_, &d2)| d2.sqrt())
            .collect()
    };
    Ok(SurfaceDistances {
        a_to_b: directed(&surface_a, &to_b),
        b_to_a: directed(&surface_b, &to_a),
    })
}

/// Percentile with linear interpolation between order statistics
/// (`q` in [0, 100]). Returns `None` for an empty slice.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

impl SurfaceDistances {
    pub fn hd95(&self) -> f64 {
        let a = percentile(&self.a_to_b, 95.0).unwrap_or(0.0);
        let b = percentile(&self.b_to_a, 95.0).unwrap_or(0.0);
        a.max(b)
    }

    pub fn asd(&self) -> f64 {
        mean(&self.a_to_b)
    }

    pub fn assd(&self) -> f64 {
        let total: f64 = self.a_to_b.iter().chain(&self.b_to_a).sum();
        total / (self.a_to_b.len() + self.b_to_a.len()) as f64
    }
}

pub fn hd95(a: &Mask, b: &Mask) -> Result<f64> {
    Ok(surface_distances(a, b)?.hd95())
}

/// Mean distance from the surface of `a` to the surface of `b`.
pub fn asd(a: &Mask, b: &Mask) -> Result<f64> {
    Ok(surface_distances(a, b)?.asd())
}

pub fn assd(a: &Mask, b: &Mask) -> Result<f64> {
    Ok(surface_distances(a, b)?.assd())
}

/// One row of a report. `None` marks a measure that is undefined for the
/// class (see [`evaluate_labels`]).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClassMetrics {
    pub dice: Option<f64>,
    pub vs: Option<f64>,
    pub hd95: Option<f64>,
    pub asd: Option<f64>,
    pub assd: Option<f64>,
}

impl ClassMetrics {
    pub fn values(&self) -> [Option<f64>; 5] {
        [self.dice, self.vs, self.hd95, self.asd, self.assd]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub per_class: Vec<ClassMetrics>,
    /// Mean over the classes where each measure is present.
    pub mean: ClassMetrics,
}

/// Compares a prediction with the ground truth class by class.
///
/// Dice and VS are absent only for classes missing from both maps. The
/// surface distances (ASD is measured from the prediction to the ground
/// truth) are absent whenever either mask is empty.
pub fn evaluate_labels(pred: &LabelMap, truth: &LabelMap) -> Result<MetricReport> {
    pred.shape().ensure_same_dims(truth.shape())?;
    if pred.num_classes() != truth.num_classes() {
        return Err(Error::ShapeMismatch {
            expected: vec![truth.num_classes()],
            found: vec![pred.num_classes()],
        });
    }
    let mut per_class = Vec::with_capacity(truth.num_classes());
    for c in 0..truth.num_classes() {
        // spacing always comes from the ground truth
        let b = truth.class_mask(c);
        let a = Mask::new(b.shape().clone(), pred.class_mask(c).data().to_vec())?;
        let mut row = ClassMetrics::default();
        if a.count() + b.count() > 0 {
            row.dice = Some(dice_score(&a, &b)?);
            row.vs = Some(volumetric_similarity(&a, &b)?);
        }
        if a.count() > 0 && b.count() > 0 {
            let sd = surface_distances(&a, &b)?;
            row.hd95 = Some(sd.hd95());
            row.asd = Some(sd.asd());
            row.assd = Some(sd.assd());
        }
        per_class.push(row);
    }
    let mean = mean_metrics(&per_class);
    Ok(MetricReport { per_class, mean })
}

/// Column-wise mean over present entries.
pub fn mean_metrics(rows: &[ClassMetrics]) -> ClassMetrics {
    let column = |get: fn(&ClassMetrics) -> Option<f64>| {
        let present: Vec<f64> = rows.iter().filter_map(get).collect();
        (!present.is_empty()).then(|| mean(&present))
    };
    ClassMetrics {
        dice: column(|r| r.dice),
        vs: column(|r| r.vs),
        hd95: column(|r| r.hd95),
        asd: column(|r| r.asd),
        assd: column(|r| r.assd),
    }
}
