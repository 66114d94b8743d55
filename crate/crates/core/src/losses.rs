//! Segmentation losses with analytic gradients.
//!
//! Every loss is a mean over pixels. Gradients are first taken with respect
//! to the probabilities and then pulled back through the softmax, so each
//! `*_grad` function returns the derivative with respect to the logits.

use crate::error::{Error, Result};
use crate::grid::{ClassStack, OneHotStack};
use crate::soften::SoftLabelStack;

/// Lower clip for probabilities inside logarithms.
pub const LOG_EPS: f64 = 1e-7;
/// Smoothing term of the soft Dice ratio.
pub const DICE_SMOOTH: f64 = 1e-5;

/// Post-softmax predictions `p^c`; pointwise sums are one.
#[derive(Clone, Debug, PartialEq)]
pub struct Probabilities(ClassStack);

impl Probabilities {
    pub fn new(stack: ClassStack) -> Result<Self> {
        if let Some(v) = stack.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param("probabilities", format!("value {v} outside [0, 1]")));
        }
        let n = stack.num_pixels();
        for i in 0..n {
            let total: f64 = (0..stack.num_classes()).map(|c| stack.data()[c * n + i]).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::param("probabilities", format!("pixel {i} sums to {total}")));
            }
        }
        Ok(Self(stack))
    }

    pub fn stack(&self) -> &ClassStack {
        &self.0
    }

    pub fn into_stack(self) -> ClassStack {
        self.0
    }
}

pub fn softmax(logits: &ClassStack) -> Probabilities {
    let n = logits.num_pixels();
    let c = logits.num_classes();
    let z = logits.data();
    let mut out = ClassStack::zeros(logits.shape().clone(), c);
    let p = out.data_mut();
    for i in 0..n {
        let max = (0..c).map(|k| z[k * n + i]).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for k in 0..c {
            let e = (z[k * n + i] - max).exp();
            p[k * n + i] = e;
            total += e;
        }
        for k in 0..c {
            p[k * n + i] /= total;
        }
    }
    Probabilities(out)
}

/// Pulls a gradient with respect to probabilities back to the logits.
pub fn softmax_backward(probs: &Probabilities, grad_p: &ClassStack) -> ClassStack {
    let p = probs.stack();
    let n = p.num_pixels();
    let c = p.num_classes();
    let mut out = ClassStack::zeros(p.shape().clone(), c);
    let (pd, gd) = (p.data(), grad_p.data());
    let od = out.data_mut();
    for i in 0..n {
        let dot: f64 = (0..c).map(|k| gd[k * n + i] * pd[k * n + i]).sum();
        for k in 0..c {
            od[k * n + i] = pd[k * n + i] * (gd[k * n + i] - dot);
        }
    }
    out
}

/// ENet class weights `1 / ln(1.02 + f_c)`.
pub fn class_weights_enet(freqs: &[f64]) -> Vec<f64> {
    freqs.iter().map(|&f| 1.0 / (1.02 + f).ln()).collect()
}

pub fn uniform_weights(num_classes: usize) -> Vec<f64> {
    vec![1.0; num_classes]
}

fn check_weights(weights: &[f64], num_classes: usize) -> Result<()> {
    if weights.len() != num_classes {
        return Err(Error::ShapeMismatch {
            expected: vec![num_classes],
            found: vec![weights.len()],
        });
    }
    if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::param("class_weights", "weights must be positive"));
    }
    Ok(())
}

fn clipped(p: f64) -> f64 {
    p.max(LOG_EPS)
}

/// `(1/N) Σ_i Σ_c q log(q / p)`, with `q = 0` terms contributing zero.
pub fn kl_loss(soft: &SoftLabelStack, pred: &Probabilities) -> Result<f64> {
    soft.stack().ensure_compatible(pred.stack())?;
    let n = soft.stack().num_pixels() as f64;
    let total: f64 = soft
        .stack()
        .data()
        .iter()
        .zip(pred.stack().data())
        .filter(|(&q, _)| q > 0.0)
        .map(|(&q, &p)| q * (q.ln() - clipped(p).ln()))
        .sum();
    Ok(total / n)
}

/// Weighted cross-entropy; all-ones weights give the standard loss.
pub fn ce_loss(hard: &OneHotStack, pred: &Probabilities, class_weights: &[f64]) -> Result<f64> {
    hard.stack().ensure_compatible(pred.stack())?;
    check_weights(class_weights, hard.num_classes())?;
    let n = hard.stack().num_pixels();
    let mut total = 0.0;
    for (c, &w) in class_weights.iter().enumerate() {
        let y = hard.plane(c);
        let p = pred.stack().plane(c);
        for i in 0..n {
            if y[i] != 0.0 {
                total -= w * y[i] * clipped(p[i]).ln();
            }
        }
    }
    Ok(total / n as f64)
}

struct DiceSums {
    intersection: Vec<f64>,
    pred: Vec<f64>,
    truth: Vec<f64>,
}

fn dice_sums(hard: &OneHotStack, pred: &Probabilities) -> DiceSums {
    let c = hard.num_classes();
    let mut sums = DiceSums {
        intersection: vec![0.0; c],
        pred: vec![0.0; c],
        truth: vec![0.0; c],
    };
    for k in 0..c {
        let y = hard.plane(k);
        let p = pred.stack().plane(k);
        for (&yi, &pi) in y.iter().zip(p) {
            sums.intersection[k] += pi * yi;
            sums.pred[k] += pi;
            sums.truth[k] += yi;
        }
    }
    sums
}

/// `1 - mean_c (2 Σ p y + ε) / (Σ p + Σ y + ε)` against hard labels.
pub fn dice_loss(hard: &OneHotStack, pred: &Probabilities) -> Result<f64> {
    hard.stack().ensure_compatible(pred.stack())?;
    let s = dice_sums(hard, pred);
    let c = hard.num_classes();
    let mean: f64 = (0..c)
        .map(|k| (2.0 * s.intersection[k] + DICE_SMOOTH) / (s.pred[k] + s.truth[k] + DICE_SMOOTH))
        .sum::<f64>()
        / c as f64;
    Ok(1.0 - mean)
}

fn kl_grad_p(soft: &SoftLabelStack, pred: &Probabilities) -> ClassStack {
    let n = soft.stack().num_pixels() as f64;
    let mut g = ClassStack::zeros(pred.stack().shape().clone(), pred.stack().num_classes());
    for ((slot, &q), &p) in g
        .data_mut()
        .iter_mut()
        .zip(soft.stack().data())
        .zip(pred.stack().data())
    {
        if q > 0.0 && p > LOG_EPS {
            *slot = -q / (p * n);
        }
    }
    g
}

fn ce_grad_p(hard: &OneHotStack, pred: &Probabilities, class_weights: &[f64]) -> ClassStack {
    let n = hard.stack().num_pixels();
    let mut g = ClassStack::zeros(pred.stack().shape().clone(), pred.stack().num_classes());
    for (c, &w) in class_weights.iter().enumerate() {
        let y = hard.plane(c);
        let p = pred.stack().plane(c);
        let out = g.plane_mut(c);
        for i in 0..n {
            if y[i] != 0.0 && p[i] > LOG_EPS {
                out[i] = -w * y[i] / (p[i] * n as f64);
            }
        }
    }
    g
}

fn dice_grad_p(hard: &OneHotStack, pred: &Probabilities) -> ClassStack {
    let s = dice_sums(hard, pred);
    let c = hard.num_classes();
    let mut g = ClassStack::zeros(pred.stack().shape().clone(), c);
    for k in 0..c {
        let num = 2.0 * s.intersection[k] + DICE_SMOOTH;
        let den = s.pred[k] + s.truth[k] + DICE_SMOOTH;
        let y = hard.plane(k);
        let out = g.plane_mut(k);
        for (slot, &yi) in out.iter_mut().zip(y) {
            *slot = -(2.0 * yi * den - num) / (den * den * c as f64);
        }
    }
    g
}

pub fn kl_loss_grad(soft: &SoftLabelStack, logits: &ClassStack) -> Result<(f64, ClassStack)> {
    let probs = softmax(logits);
    let value = kl_loss(soft, &probs)?;
    Ok((value, softmax_backward(&probs, &kl_grad_p(soft, &probs))))
}

pub fn ce_loss_grad(hard: &OneHotStack, logits: &ClassStack, class_weights: &[f64]) -> Result<(f64, ClassStack)> {
    let probs = softmax(logits);
    let value = ce_loss(hard, &probs, class_weights)?;
    Ok((value, softmax_backward(&probs, &ce_grad_p(hard, &probs, class_weights))))
}

pub fn dice_loss_grad(hard: &OneHotStack, logits: &ClassStack) -> Result<(f64, ClassStack)> {
    let probs = softmax(logits);
    let value = dice_loss(hard, &probs)?;
    Ok((value, softmax_backward(&probs, &dice_grad_p(hard, &probs))))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossWeights {
    /// Dice weight.
    pub alpha: f64,
    /// Soft-label (KL) weight.
    pub beta: f64,
    pub class_weights: Vec<f64>,
}

impl LossWeights {
    pub fn uniform(num_classes: usize, alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            class_weights: uniform_weights(num_classes),
        }
    }

    fn validate(&self, num_classes: usize) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha", "must be non-negative"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::param("beta", "must be non-negative"));
        }
        check_weights(&self.class_weights, num_classes)
    }
}

#[derive(Clone, Debug)]
pub struct CombinedLoss {
    pub total: f64,
    pub ce: f64,
    pub dice: f64,
    /// Zero (and not evaluated) when `beta == 0`.
    pub kl: f64,
    /// Derivative of `total` with respect to the logits.
    pub grad: ClassStack,
}

/// `L = CE + α Dice + β KL` and its gradient with respect to the logits.
pub fn combined_loss(
    hard: &OneHotStack,
    soft: &SoftLabelStack,
    logits: &ClassStack,
    weights: &LossWeights,
) -> Result<CombinedLoss> {
    hard.stack().ensure_compatible(logits)?;
    hard.stack().ensure_compatible(soft.stack())?;
    weights.validate(hard.num_classes())?;

    let probs = softmax(logits);
    let ce = ce_loss(hard, &probs, &weights.class_weights)?;
    let mut grad_p = ce_grad_p(hard, &probs, &weights.class_weights);
    let mut total = ce;

    let mut dice = 0.0;
    if weights.alpha > 0.0 {
        dice = dice_loss(hard, &probs)?;
        total += weights.alpha * dice;
        let g = dice_grad_p(hard, &probs);
        for (a, b) in grad_p.data_mut().iter_mut().zip(g.data()) {
            *a += weights.alpha * b;
        }
    }

    let mut kl = 0.0;
    if weights.beta > 0.0 {
        kl = kl_loss(soft, &probs)?;
        total += weights.beta * kl;
        let g = kl_grad_p(soft, &probs);
        for (a, b) in grad_p.data_mut().iter_mut().zip(g.data()) {
            *a += weights.beta * b;
        }
    }

    Ok(CombinedLoss {
        total,
        ce,
        dice,
        kl,
        grad: softmax_backward(&probs, &grad_p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{one_hot_encode, LabelMap, Shape};

    fn pixel_stack(values: &[f64]) -> ClassStack {
        ClassStack::new(Shape::unit(&[1, 1]).unwrap(), values.len(), values.to_vec()).unwrap()
    }

    fn probs(values: &[f64]) -> Probabilities {
        Probabilities::new(pixel_stack(values)).unwrap()
    }

    fn hard(label: u32, c: usize) -> OneHotStack {
        one_hot_encode(&LabelMap::new(Shape::unit(&[1, 1]).unwrap(), vec![label], c).unwrap()).unwrap()
    }

    fn soft(values: &[f64]) -> SoftLabelStack {
        SoftLabelStack::new(pixel_stack(values), true).unwrap()
    }

    #[test]
    fn softmax_values() {
        let p = softmax(&pixel_stack(&[0.0, 0.0]));
        assert_eq!(p.stack().data(), &[0.5, 0.5]);
        let p = softmax(&pixel_stack(&[3f64.ln(), 0.0]));
        assert!((p.stack().data()[0] - 0.75).abs() < 1e-15);
        assert!((p.stack().data()[1] - 0.25).abs() < 1e-15);
        let p = softmax(&pixel_stack(&[1000.0, 0.0]));
        assert_eq!(p.stack().data()[0], 1.0);
        assert!(p.stack().data()[1] < 1e-300);
    }

    #[test]
    fn kl_examples() {
        let v = kl_loss(&soft(&[0.75, 0.25]), &probs(&[0.5, 0.5])).unwrap();
        assert!((v - (0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln())).abs() < 1e-15);
        assert!((v - 0.130812).abs() < 1e-6);
        let v = kl_loss(&soft(&[1.0, 0.0]), &probs(&[0.5, 0.5])).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        let v = kl_loss(&soft(&[0.3, 0.7]), &probs(&[0.3, 0.7])).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn ce_examples() {
        let v = ce_loss(&hard(0, 2), &probs(&[1.0 - LOG_EPS, LOG_EPS]), &[1.0, 1.0]).unwrap();
        assert!(v < 1e-6);
        let v = ce_loss(&hard(1, 2), &probs(&[0.5, 0.5]), &[1.0, 1.0]).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12);
        let v = ce_loss(&hard(1, 2), &probs(&[0.5, 0.5]), &[1.0, 2.0]).unwrap();
        assert!((v - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!(ce_loss(&hard(1, 2), &probs(&[0.5, 0.5]), &[1.0]).is_err());
    }

    #[test]
    fn enet_weights() {
        let w = class_weights_enet(&[0.5, 0.0, 1.0]);
        assert!((w[0] - 2.388286).abs() < 1e-6);
        assert!((w[1] - 50.498350).abs() < 1e-6);
        assert!((w[2] - 1.422278).abs() < 1e-6);
        // frequency 0 gives the largest weight, frequency 1 the smallest
        let w = class_weights_enet(&[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(w.windows(2).all(|p| p[0] > p[1]));
    }

    #[test]
    fn dice_examples() {
        let shape = Shape::unit(&[2, 2]).unwrap();
        let labels = LabelMap::new(shape.clone(), vec![0, 0, 1, 1], 2).unwrap();
        let y = one_hot_encode(&labels).unwrap();
        let exact = Probabilities::new(y.stack().clone()).unwrap();
        assert!(dice_loss(&y, &exact).unwrap().abs() < 1e-12);

        let uniform = Probabilities::new(ClassStack::new(shape, 2, vec![0.5; 8]).unwrap()).unwrap();
        assert!((dice_loss(&y, &uniform).unwrap() - 0.5).abs() < 1e-5);
    }

    #[test]
    fn dice_empty_class_is_finite() {
        let y = hard(0, 2);
        let p = probs(&[1.0, 0.0]);
        let v = dice_loss(&y, &p).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn combined_reductions() {
        let shape = Shape::unit(&[2, 3]).unwrap();
        let labels = LabelMap::new(shape.clone(), vec![0, 1, 2, 2, 1, 0], 3).unwrap();
        let y = one_hot_encode(&labels).unwrap();
        let logits = ClassStack::new(shape, 3, (0..18).map(|k| ((k * 7 % 11) as f64 - 5.0) / 3.0).collect()).unwrap();
        let p = softmax(&logits);
        let s = SoftLabelStack::from_hard(&y);
        let w = LossWeights::uniform(3, 1.0, 0.0);
        let l = combined_loss(&y, &s, &logits, &w).unwrap();
        let ce = ce_loss(&y, &p, &w.class_weights).unwrap();
        assert_eq!(l.total, ce + dice_loss(&y, &p).unwrap());

        let w = LossWeights::uniform(3, 0.0, 0.0);
        assert_eq!(combined_loss(&y, &s, &logits, &w).unwrap().total, ce);

        // one-hot soft labels: KL equals unweighted CE
        assert_eq!(kl_loss(&s, &p).unwrap(), ce);
    }
}
