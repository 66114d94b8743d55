//! Desk-scale experiment: synthetic images with boundary-corrupted
//! annotations, a per-pixel linear softmax segmenter trained with the
//! combined loss, and evaluation against the uncorrupted ground truth.
//!
//! Every run is a pure function of `(ExperimentConfig, seed)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{one_hot_encode, pooled_class_frequencies, ClassStack, Grid, LabelMap, OneHotStack, Shape};
use crate::losses::{class_weights_enet, combined_loss, softmax, uniform_weights, LossWeights};
use crate::metrics::{evaluate_labels, mean_metrics, ClassMetrics, MetricReport};
use crate::sdt::signed_edt;
use crate::slic::{slic_segment, SlicParams};
use crate::soften::{gaussian_blur, gaussian_soften, soften, SoftLabelStack};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weighting {
    Uniform,
    Enet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelMode {
    Hard,
    GaussianSoft,
    SuperpixelSoft,
}

impl LabelMode {
    pub fn name(self) -> &'static str {
        match self {
            LabelMode::Hard => "hard",
            LabelMode::GaussianSoft => "gaussian",
            LabelMode::SuperpixelSoft => "superpixel",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub num_train: usize,
    pub num_eval: usize,
    /// Side length of the square images.
    pub size: usize,
    pub num_classes: usize,
    pub target_count: usize,
    pub compactness: f64,
    pub slic_iters: usize,
    pub beta: f64,
    pub alpha: f64,
    pub weighting: Weighting,
    /// Blur width of the Gaussian baseline, pixels.
    pub sigma: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seeds: Vec<u64>,
    /// Largest boundary displacement of the corrupted annotation, pixels.
    pub corruption: f64,
    /// Standard deviation of the additive pixel noise.
    pub noise: f64,
    /// Amplitude of the smooth intensity bias field.
    pub bias: f64,
    /// Partial-volume blur applied to the clean intensity image, pixels.
    pub blur: f64,
    pub shapes: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            num_train: 6,
            num_eval: 4,
            size: 64,
            num_classes: 3,
            target_count: 100,
            compactness: 0.1,
            slic_iters: 10,
            beta: 1.0,
            alpha: 1.0,
            weighting: Weighting::Enet,
            sigma: 1.0,
            learning_rate: 1.0,
            epochs: 300,
            seeds: (0..10).collect(),
            corruption: 2.0,
            noise: 0.08,
            bias: 0.1,
            blur: 0.8,
            shapes: 5,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_train", self.num_train),
            ("num_eval", self.num_eval),
            ("size", self.size),
            ("target_count", self.target_count),
            ("slic_iters", self.slic_iters),
            ("epochs", self.epochs),
            ("seeds", self.seeds.len()),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::param(name, "must be at least 1"));
            }
        }
        if self.num_classes < 2 {
            return Err(Error::param("num_classes", "at least two classes required"));
        }
        if self.target_count > self.size * self.size {
            return Err(Error::param("target_count", "exceeds the pixel count"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::param("learning_rate", "must be positive"));
        }
        if !(self.compactness > 0.0) {
            return Err(Error::param("compactness", "must be positive"));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::param("sigma", "must be positive"));
        }
        if !(self.alpha >= 0.0) || !(self.beta >= 0.0) {
            return Err(Error::param("beta", "loss weights must be non-negative"));
        }
        for (name, v) in [
            ("corruption", self.corruption),
            ("noise", self.noise),
            ("bias", self.bias),
            ("blur", self.blur),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be non-negative"));
            }
        }
        Ok(())
    }

    fn slic_params(&self) -> SlicParams {
        SlicParams {
            target_count: self.target_count,
            compactness: self.compactness,
            max_iters: self.slic_iters,
            ..SlicParams::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSample {
    pub image: Grid,
    pub clean_gt: LabelMap,
    /// Annotation used for training.
    pub noisy_gt: LabelMap,
    pub seed: u64,
}

struct Ellipse {
    center: [f64; 2],
    axes: [f64; 2],
    angle: f64,
    class: u32,
}

impl Ellipse {
    /// Normalised radius; below 1 is inside.
    fn radius(&self, y: f64, x: f64) -> f64 {
        let (dy, dx) = (y - self.center[0], x - self.center[1]);
        let (s, c) = self.angle.sin_cos();
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        ((u / self.axes[0]).powi(2) + (v / self.axes[1]).powi(2)).sqrt()
    }
}

/// Smooth field in [-1, 1] from a few random plane waves, steepened so that
/// most of the lattice sits near ±1.
fn wave_field(rng: &mut ChaCha8Rng, size: usize) -> Vec<f64> {
    let waves: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            let wavelength = rng.gen_range(14.0..28.0);
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let k = std::f64::consts::TAU / wavelength;
            (k * theta.cos(), k * theta.sin(), phase)
        })
        .collect();
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let s: f64 = waves
                .iter()
                .map(|&(ky, kx, p)| (ky * y as f64 + kx * x as f64 + p).sin())
                .sum::<f64>()
                / waves.len() as f64;
            out.push((2.0 * s).clamp(-1.0, 1.0));
        }
    }
    out
}

fn place_shapes(rng: &mut ChaCha8Rng, config: &ExperimentConfig) -> Vec<Ellipse> {
    let size = config.size as f64;
    let margin = config.corruption + 2.0;
    let max_axis = (size / 5.0).max(3.0);
    let min_axis = (size / 12.0).max(2.0);
    let mut shapes: Vec<Ellipse> = Vec::new();
    let mut attempts = 0;
    while shapes.len() < config.shapes && attempts < 200 {
        attempts += 1;
        let axes = [rng.gen_range(min_axis..max_axis), rng.gen_range(min_axis..max_axis)];
        let reach = axes[0].max(axes[1]) + margin;
        if 2.0 * reach >= size {
            continue;
        }
        let center = [rng.gen_range(reach..size - reach), rng.gen_range(reach..size - reach)];
        let angle = rng.gen_range(0.0..std::f64::consts::PI);
        let class = 1 + (shapes.len() % (config.num_classes - 1)) as u32;
        let clash = shapes.iter().any(|s| {
            let d = ((s.center[0] - center[0]).powi(2) + (s.center[1] - center[1]).powi(2)).sqrt();
            d < reach + s.axes[0].max(s.axes[1]) + margin
        });
        if !clash {
            shapes.push(Ellipse {
                center,
                axes,
                angle,
                class,
            });
        }
    }
    shapes
}

/// Intensity per class, evenly spread over [0.2, 0.8]. Background takes the
/// middle level so that the blurred rim of a bright or dark object never
/// passes through the level of another class.
fn class_levels(num_classes: usize) -> Vec<f64> {
    let even: Vec<f64> = (0..num_classes)
        .map(|k| 0.2 + 0.6 * k as f64 / (num_classes - 1) as f64)
        .collect();
    let background = (num_classes - 1) / 2;
    let mut levels = vec![even[background]];
    levels.extend(
        even.iter()
            .enumerate()
            .filter(|&(k, _)| k != background)
            .map(|(_, &v)| v),
    );
    levels
}

/// Draws one synthetic sample; identical seeds give identical samples.
pub fn gen_synthetic(seed: u64, config: &ExperimentConfig) -> Result<SyntheticSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = config.size;
    let shape = Shape::unit(&[size, size])?;
    let c = config.num_classes;

    let shapes = place_shapes(&mut rng, config);
    let mut labels = vec![0u32; size * size];
    for y in 0..size {
        for x in 0..size {
            if let Some(s) = shapes.iter().find(|s| s.radius(y as f64, x as f64) < 1.0) {
                labels[y * size + x] = s.class;
            }
        }
    }
    let clean_gt = LabelMap::new(shape.clone(), labels, c)?;

    let levels = class_levels(c);
    let mut intensity: Vec<f64> = clean_gt.labels().iter().map(|&l| levels[l as usize]).collect();
    if config.blur > 0.0 {
        intensity = gaussian_blur(&shape, &intensity, config.blur);
    }
    let tilt = [
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ];
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let denom = (size.max(2) - 1) as f64;
    for y in 0..size {
        for x in 0..size {
            let (yn, xn) = (y as f64 / denom - 0.5, x as f64 / denom - 0.5);
            let field = config.bias * (tilt[0] * yn + tilt[1] * xn + 2.0 * tilt[2] * yn * xn);
            intensity[y * size + x] += field + config.noise * normal.sample(&mut rng);
        }
    }
    let image = Grid::new(shape.clone(), intensity)?;

    let noisy_gt = corrupt_annotation(&mut rng, &clean_gt, config.corruption)?;
    Ok(SyntheticSample {
        image,
        clean_gt,
        noisy_gt,
        seed,
    })
}

/// Moves every class boundary by a smooth random offset in
/// `[-magnitude, magnitude]`: positive offsets dilate, negative ones erode.
fn corrupt_annotation(rng: &mut ChaCha8Rng, clean: &LabelMap, magnitude: f64) -> Result<LabelMap> {
    let shape = clean.shape();
    let size = shape.dims()[0];
    let mut noisy = vec![0u32; shape.len()];
    for class in 1..clean.num_classes() {
        let offsets = wave_field(rng, size);
        let mask = clean.class_mask(class);
        if mask.count() == 0 {
            continue;
        }
        if magnitude == 0.0 {
            for (dst, &fg) in noisy.iter_mut().zip(mask.data()) {
                if fg {
                    *dst = class as u32;
                }
            }
            continue;
        }
        let field = signed_edt(&mask)?;
        for (i, &d) in field.values().iter().enumerate() {
            if d + magnitude * offsets[i] >= 0.0 {
                noisy[i] = class as u32;
            }
        }
    }
    LabelMap::new(shape.clone(), noisy, clean.num_classes())
}

/// Per-pixel features, stored feature-major (`F × N`).
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    shape: Shape,
    num_features: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn feature(&self, f: usize) -> &[f64] {
        let n = self.shape.len();
        &self.data[f * n..(f + 1) * n]
    }
}

/// Box mean of half-width `radius` along every axis, edges replicated.
fn box_smooth(shape: &Shape, values: &[f64], radius: usize) -> Vec<f64> {
    let dims = shape.dims();
    let strides = shape.strides();
    let n = shape.len();
    let mut current = values.to_vec();
    let width = (2 * radius + 1) as f64;
    for axis in 0..dims.len() {
        let len = dims[axis] as isize;
        let stride = strides[axis];
        let mut next = vec![0.0; n];
        for outer in 0..n / (dims[axis] * stride) {
            for inner in 0..stride {
                let start = outer * dims[axis] * stride + inner;
                for q in 0..len {
                    let acc: f64 = (-(radius as isize)..=radius as isize)
                        .map(|k| current[start + (q + k).clamp(0, len - 1) as usize * stride])
                        .sum();
                    next[start + q as usize * stride] = acc / width;
                }
            }
        }
        current = next;
    }
    current
}

/// Intensity, box-smoothed intensity at two scales, and coordinates scaled
/// to [0, 1]; `F = ndim + 3`.
pub fn featurize(image: &Grid) -> Features {
    let shape = image.shape().clone();
    let n = shape.len();
    let ndim = shape.ndim();
    let mut data = Vec::with_capacity((ndim + 3) * n);
    data.extend_from_slice(image.values());
    data.extend(box_smooth(&shape, image.values(), 1));
    data.extend(box_smooth(&shape, image.values(), 3));
    for axis in 0..ndim {
        let d = shape.dims()[axis];
        let denom = if d > 1 { (d - 1) as f64 } else { 1.0 };
        data.extend((0..n).map(|i| shape.coords(i)[axis] as f64 / denom));
    }
    Features {
        shape,
        num_features: ndim + 3,
        data,
    }
}

/// Linear map from standardised features to class scores.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSegmenter {
    num_classes: usize,
    num_features: usize,
    /// `C × F`, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
    feature_mean: Vec<f64>,
    feature_scale: Vec<f64>,
}

impl LinearSegmenter {
    fn new(num_classes: usize, feature_mean: Vec<f64>, feature_scale: Vec<f64>) -> Self {
        let num_features = feature_mean.len();
        Self {
            num_classes,
            num_features,
            weights: vec![0.0; num_classes * num_features],
            bias: vec![0.0; num_classes],
            feature_mean,
            feature_scale,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn standardized(&self, features: &Features) -> Vec<f64> {
        let n = features.shape.len();
        let mut out = features.data.clone();
        for f in 0..self.num_features {
            for v in &mut out[f * n..(f + 1) * n] {
                *v = (*v - self.feature_mean[f]) / self.feature_scale[f];
            }
        }
        out
    }

    fn logits_from(&self, shape: &Shape, x: &[f64]) -> ClassStack {
        let n = shape.len();
        let mut z = ClassStack::zeros(shape.clone(), self.num_classes);
        for c in 0..self.num_classes {
            let plane = z.plane_mut(c);
            plane.fill(self.bias[c]);
            for f in 0..self.num_features {
                let w = self.weights[c * self.num_features + f];
                for (o, &xf) in plane.iter_mut().zip(&x[f * n..(f + 1) * n]) {
                    *o += w * xf;
                }
            }
        }
        z
    }

    pub fn logits(&self, features: &Features) -> ClassStack {
        self.logits_from(&features.shape, &self.standardized(features))
    }

    /// Hard segmentation: argmax of the softmax scores.
    pub fn predict(&self, image: &Grid) -> Result<LabelMap> {
        let probs = softmax(&self.logits(&featurize(image)));
        LabelMap::new(image.shape().clone(), probs.stack().argmax(), self.num_classes)
    }
}

struct TrainItem {
    x: Vec<f64>,
    shape: Shape,
    hard: OneHotStack,
    soft: SoftLabelStack,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: LinearSegmenter,
    /// Loss before each accepted step, then the final loss.
    pub loss_history: Vec<f64>,
}

/// Soft labels for one training sample under `mode`.
pub fn soft_labels(sample: &SyntheticSample, mode: LabelMode, config: &ExperimentConfig) -> Result<SoftLabelStack> {
    let hard = one_hot_encode(&sample.noisy_gt)?;
    match mode {
        LabelMode::Hard => Ok(SoftLabelStack::from_hard(&hard)),
        LabelMode::GaussianSoft => gaussian_soften(&hard, config.sigma),
        LabelMode::SuperpixelSoft => {
            let sp = slic_segment(&sample.image, &config.slic_params())?;
            soften(&hard, &sp, true)
        }
    }
}

/// Full-batch gradient descent on the combined loss. A step that raises the
/// loss by more than 1e-6 is rejected and the step size halved, so the
/// recorded loss never increases.
pub fn train(samples: &[SyntheticSample], mode: LabelMode, config: &ExperimentConfig) -> Result<TrainOutcome> {
    if samples.is_empty() {
        return Err(Error::param("samples", "at least one training sample required"));
    }
    let features: Vec<Features> = samples.iter().map(|s| featurize(&s.image)).collect();
    let num_features = features[0].num_features;
    let c = config.num_classes;

    // standardisation statistics pooled over the training set
    let mut mean = vec![0.0; num_features];
    let mut scale = vec![0.0; num_features];
    let total: f64 = features.iter().map(|f| f.shape.len() as f64).sum();
    for f in 0..num_features {
        mean[f] = features.iter().flat_map(|x| x.feature(f)).sum::<f64>() / total;
        let var = features
            .iter()
            .flat_map(|x| x.feature(f))
            .map(|v| (v - mean[f]).powi(2))
            .sum::<f64>()
            / total;
        scale[f] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    let mut model = LinearSegmenter::new(c, mean, scale);

    let items = samples
        .par_iter()
        .zip(&features)
        .map(|(s, f)| {
            Ok(TrainItem {
                x: model.standardized(f),
                shape: f.shape.clone(),
                hard: one_hot_encode(&s.noisy_gt)?,
                soft: soft_labels(s, mode, config)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let class_weights = match config.weighting {
        Weighting::Uniform => uniform_weights(c),
        Weighting::Enet => class_weights_enet(&pooled_class_frequencies(items.iter().map(|i| &i.hard))),
    };
    let weights = LossWeights {
        alpha: config.alpha,
        beta: if mode == LabelMode::Hard { 0.0 } else { config.beta },
        class_weights,
    };

    let mut step = config.learning_rate;
    let (mut loss, mut grad) = batch_loss(&model, &items, &weights)?;
    let mut history = Vec::with_capacity(config.epochs + 1);
    for epoch in 0..config.epochs {
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        history.push(loss);
        let mut halvings = 0;
        loop {
            let candidate = stepped(&model, &grad, step);
            let (next_loss, next_grad) = batch_loss(&candidate, &items, &weights)?;
            if next_loss.is_finite() && next_loss <= loss + 1e-6 {
                model = candidate;
                loss = next_loss;
                grad = next_grad;
                break;
            }
            step *= 0.5;
            halvings += 1;
            if halvings > 40 {
                return Err(Error::Divergence { epoch, loss: next_loss });
            }
        }
    }
    history.push(loss);
    Ok(TrainOutcome {
        model,
        loss_history: history,
    })
}

fn stepped(model: &LinearSegmenter, grad: &(Vec<f64>, Vec<f64>), step: f64) -> LinearSegmenter {
    let mut next = model.clone();
    for (w, g) in next.weights.iter_mut().zip(&grad.0) {
        *w -= step * g;
    }
    for (b, g) in next.bias.iter_mut().zip(&grad.1) {
        *b -= step * g;
    }
    next
}

/// Mean combined loss over the batch and its gradient `(dW, db)`.
fn batch_loss(
    model: &LinearSegmenter,
    items: &[TrainItem],
    weights: &LossWeights,
) -> Result<(f64, (Vec<f64>, Vec<f64>))> {
    let f_count = model.num_features;
    let c = model.num_classes;
    let parts = items
        .par_iter()
        .map(|item| {
            let logits = model.logits_from(&item.shape, &item.x);
            let loss = combined_loss(&item.hard, &item.soft, &logits, weights)?;
            let n = item.shape.len();
            let mut gw = vec![0.0; c * f_count];
            let mut gb = vec![0.0; c];
            for k in 0..c {
                let g = loss.grad.plane(k);
                gb[k] = g.iter().sum();
                for f in 0..f_count {
                    gw[k * f_count + f] = g.iter().zip(&item.x[f * n..(f + 1) * n]).map(|(a, b)| a * b).sum();
                }
            }
            Ok((loss.total, gw, gb))
        })
        .collect::<Result<Vec<_>>>()?;

    let m = items.len() as f64;
    let mut total = 0.0;
    let mut gw = vec![0.0; c * f_count];
    let mut gb = vec![0.0; c];
    for (l, w, b) in parts {
        total += l;
        gw.iter_mut().zip(w).for_each(|(a, v)| *a += v);
        gb.iter_mut().zip(b).for_each(|(a, v)| *a += v);
    }
    gw.iter_mut().for_each(|v| *v /= m);
    gb.iter_mut().for_each(|v| *v /= m);
    Ok((total / m, (gw, gb)))
}

/// Evaluates argmax predictions against the clean ground truth.
///
/// Per-class values are averaged over the samples where they are present;
/// the mean row averages those over classes.
pub fn evaluate(model: &LinearSegmenter, samples: &[SyntheticSample]) -> Result<MetricReport> {
    let reports = samples
        .par_iter()
        .map(|s| evaluate_labels(&model.predict(&s.image)?, &s.clean_gt))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate_reports(&reports))
}

pub fn aggregate_reports(reports: &[MetricReport]) -> MetricReport {
    let classes = reports.first().map_or(0, |r| r.per_class.len());
    let per_class: Vec<ClassMetrics> = (0..classes)
        .map(|c| {
            let rows: Vec<ClassMetrics> = reports.iter().map(|r| r.per_class[c].clone()).collect();
            mean_metrics(&rows)
        })
        .collect();
    let mean = mean_metrics(&per_class);
    MetricReport { per_class, mean }
}

/// Training and evaluation sets of one experiment seed.
pub struct SampleSet {
    pub train: Vec<SyntheticSample>,
    pub eval: Vec<SyntheticSample>,
}

pub fn sample_set(seed: u64, config: &ExperimentConfig) -> Result<SampleSet> {
    let base = seed.wrapping_mul(1_000_003);
    let train = (0..config.num_train as u64)
        .map(|j| gen_synthetic(base.wrapping_add(j), config))
        .collect::<Result<Vec<_>>>()?;
    let eval = (0..config.num_eval as u64)
        .map(|j| gen_synthetic(base.wrapping_add(500_000 + j), config))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSet { train, eval })
}

/// Mean metrics of one trained arm.
pub fn run_arm(set: &SampleSet, mode: LabelMode, config: &ExperimentConfig) -> Result<ClassMetrics> {
    let outcome = train(&set.train, mode, config)?;
    Ok(evaluate(&outcome.model, &set.eval)?.mean)
}

/// One raw result line.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub sweep_value: String,
    pub seed: u64,
    pub metrics: ClassMetrics,
}

/// A sweep point: label for the CSV and the arm to run.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub label: String,
    pub mode: LabelMode,
    pub config: ExperimentConfig,
}

/// Runs every sweep point for every seed. Rows are ordered by sweep point,
/// then by seed, independent of scheduling.
pub fn run_sweep(points: &[SweepPoint], base: &ExperimentConfig) -> Result<Vec<RunResult>> {
    base.validate()?;
    for p in points {
        p.config.validate()?;
    }
    let per_seed = base
        .seeds
        .par_iter()
        .map(|&seed| {
            let fail = |label: &str, source: Error| Error::RunFailed {
                sweep_value: label.to_string(),
                seed,
                source: Box::new(source),
            };
            let set = sample_set(seed, base).map_err(|e| fail("data", e))?;
            points
                .iter()
                .map(|p| {
                    run_arm(&set, p.mode, &p.config)
                        .map(|metrics| RunResult {
                            sweep_value: p.label.clone(),
                            seed,
                            metrics,
                        })
                        .map_err(|e| fail(&p.label, e))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(points.len() * base.seeds.len());
    for k in 0..points.len() {
        for seed_rows in &per_seed {
            rows.push(seed_rows[k].clone());
        }
    }
    Ok(rows)
}

/// Hard baseline, Gaussian-soft and superpixel-soft arms.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunResult>> {
    let points: Vec<SweepPoint> = [LabelMode::Hard, LabelMode::GaussianSoft, LabelMode::SuperpixelSoft]
        .into_iter()
        .map(|mode| SweepPoint {
            label: mode.name().to_string(),
            mode,
            config: config.clone(),
        })
        .collect();
    run_sweep(&points, config)
}

pub const DEFAULT_BETAS: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
pub const DEFAULT_TOY_COUNTS: [usize; 5] = [25, 50, 100, 200, 400];

/// Superpixel-soft arm at each β.
pub fn sweep_beta(config: &ExperimentConfig, betas: &[f64]) -> Result<Vec<RunResult>> {
    let points: Vec<SweepPoint> = betas
        .iter()
        .map(|&beta| SweepPoint {
            label: format!("{beta}"),
            mode: LabelMode::SuperpixelSoft,
            config: ExperimentConfig { beta, ..config.clone() },
        })
        .collect();
    run_sweep(&points, config)
}

/// Superpixel-soft arm at each superpixel target count.
pub fn sweep_superpixels(config: &ExperimentConfig, counts: &[usize]) -> Result<Vec<RunResult>> {
    let points: Vec<SweepPoint> = counts
        .iter()
        .map(|&target_count| SweepPoint {
            label: format!("{target_count}"),
            mode: LabelMode::SuperpixelSoft,
            config: ExperimentConfig {
                target_count,
                ..config.clone()
            },
        })
        .collect();
    run_sweep(&points, config)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub sweep_value: String,
    pub runs: usize,
    /// `(mean, sample std)` for dice, vs, hd95, asd, assd.
    pub stats: [(f64, f64); 5],
}

/// Mean and sample standard deviation per sweep value, in first-seen order.
pub fn summarize(rows: &[RunResult]) -> Vec<SummaryRow> {
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.sweep_value.as_str()) {
            order.push(&r.sweep_value);
        }
    }
    order
        .into_iter()
        .map(|label| {
            let group: Vec<&RunResult> = rows.iter().filter(|r| r.sweep_value == label).collect();
            let mut stats = [(f64::NAN, f64::NAN); 5];
            for (m, slot) in stats.iter_mut().enumerate() {
                let values: Vec<f64> = group.iter().filter_map(|r| r.metrics.values()[m]).collect();
                if values.is_empty() {
                    continue;
                }
                let k = values.len() as f64;
                let mean = values.iter().sum::<f64>() / k;
                let std = if values.len() > 1 {
                    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
                } else {
                    0.0
                };
                *slot = (mean, std);
            }
            SummaryRow {
                sweep_value: label.to_string(),
                runs: group.len(),
                stats,
            }
        })
        .collect()
}

pub const RAW_HEADER: &str = "sweep_value,seed,dice,vs,hd95,asd,assd";
pub const SUMMARY_HEADER: &str =
    "sweep_value,runs,dice_mean,dice_std,vs_mean,vs_std,hd95_mean,hd95_std,asd_mean,asd_std,assd_mean,assd_std";

fn cell(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v}"),
        _ => String::new(),
    }
}

pub fn raw_csv(rows: &[RunResult]) -> String {
    let mut out = String::from(RAW_HEADER);
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.metrics.values().iter().map(|&v| cell(v)).collect();
        out.push_str(&format!("{},{},{}\n", r.sweep_value, r.seed, cells.join(",")));
    }
    out
}

pub fn summary_csv(summary: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for s in summary {
        let cells: Vec<String> = s
            .stats
            .iter()
            .flat_map(|&(m, sd)| [cell(Some(m)), cell(Some(sd))])
            .collect();
        out.push_str(&format!("{},{},{}\n", s.sweep_value, s.runs, cells.join(",")));
    }
    out
}

/// Expected superpixel side in pixels for a square image of side `size`.
pub fn block_side(size: usize, count: usize) -> f64 {
    ((size * size) as f64 / count as f64).sqrt()
}
