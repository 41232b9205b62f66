//! Small neural networks trained with plain SGD: a ReLU MLP for Q-values
//! and a two-stage convolutional classifier for glyph images.
//!
//! Parameters live in one flat `f64` vector per network so optimisers and
//! gradient checks can treat every model the same way.

mod conv;
mod dense;
mod io;

pub use conv::{ConvNet, ConvShape};
pub use dense::{Activation, DenseNet};
pub use io::{decode_model, encode_model, load_model, save_model, AnyNet, ModelMeta, FORMAT_VERSION, MAGIC};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("target {target} out of range for {outputs} outputs")]
    BadTarget { target: usize, outputs: usize },
    #[error("non-finite {what} (loss {loss}, max |grad| {max_grad})")]
    NonFinite { what: &'static str, loss: f64, max_grad: f64 },
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("model file is truncated")]
    Truncated,
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("feature manifest mismatch: model has {model}, expected {expected}")]
    ManifestMismatch { model: String, expected: String },
    #[error("expected a {expected} model, found {found}")]
    WrongKind { expected: &'static str, found: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Supervision for one example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// Regress output `action` towards `value`; other outputs get no gradient.
    Selected { action: usize, value: f64 },
    /// Class index for the one-vs-all hinge loss.
    Class(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Squared error on the selected output.
    SelectedMse,
    /// One-vs-all hinge with margin 1.
    Hinge,
}

#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub input: &'a [f64],
    pub target: Target,
}

/// Per-example loss and its gradient with respect to the output scores.
/// `dscores` is overwritten.
pub fn output_loss(scores: &[f64], target: Target, loss: Loss, dscores: &mut [f64]) -> Result<f64, NnError> {
    dscores.fill(0.0);
    match (loss, target) {
        (Loss::SelectedMse, Target::Selected { action, value }) => {
            if action >= scores.len() {
                return Err(NnError::BadTarget { target: action, outputs: scores.len() });
            }
            let d = scores[action] - value;
            dscores[action] = 2.0 * d;
            Ok(d * d)
        }
        (Loss::Hinge, Target::Class(label)) => {
            if label >= scores.len() {
                return Err(NnError::BadTarget { target: label, outputs: scores.len() });
            }
            let mut total = 0.0;
            for (k, &s) in scores.iter().enumerate() {
                let t = if k == label { 1.0 } else { -1.0 };
                let m = 1.0 - t * s;
                if m > 0.0 {
                    total += m;
                    dscores[k] = -t;
                }
            }
            Ok(total)
        }
        (Loss::SelectedMse, Target::Class(_)) | (Loss::Hinge, Target::Selected { .. }) => {
            Err(NnError::Corrupt("target does not match loss".into()))
        }
    }
}

/// Softmax over raw scores.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    p
}

pub trait Network {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError>;

    /// Adds the gradient of one example's loss to `grad` and returns the loss.
    fn accumulate_gradient(&self, sample: &Sample, loss: Loss, grad: &mut [f64]) -> Result<f64, NnError>;

    /// Mean batch loss and its gradient, written to `grad`.
    fn loss_and_gradient(&self, batch: &[Sample], loss: Loss, grad: &mut [f64]) -> Result<f64, NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyBatch);
        }
        grad.fill(0.0);
        let mut total = 0.0;
        for s in batch {
            total += self.accumulate_gradient(s, loss, grad)?;
        }
        let n = batch.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok(total / n)
    }

    /// Mean batch loss without gradients.
    fn loss(&self, batch: &[Sample], loss: Loss) -> Result<f64, NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyBatch);
        }
        let mut total = 0.0;
        let mut d = vec![0.0; self.output_dim()];
        for s in batch {
            let out = self.forward(s.input)?;
            total += output_loss(&out, s.target, loss, &mut d)?;
        }
        Ok(total / batch.len() as f64)
    }
}

/// Plain SGD with global gradient-norm clipping. Keeps its gradient buffer
/// between steps.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
    pub clip: f64,
    grad: Vec<f64>,
}

impl Sgd {
    pub fn new(lr: f64, clip: f64) -> Self {
        Sgd { lr, clip, grad: Vec::new() }
    }

    /// One update on `batch`; returns the batch loss before the update.
    pub fn step<N: Network + ?Sized>(&mut self, net: &mut N, batch: &[Sample], loss: Loss) -> Result<f64, NnError> {
        self.grad.resize(net.params().len(), 0.0);
        let value = net.loss_and_gradient(batch, loss, &mut self.grad)?;
        let norm = self.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !value.is_finite() || !norm.is_finite() {
            let max_grad = self.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            return Err(NnError::NonFinite { what: "loss or gradient", loss: value, max_grad });
        }
        let scale = if norm > self.clip { self.clip / norm } else { 1.0 };
        let step = self.lr * scale;
        for (p, g) in net.params_mut().iter_mut().zip(&self.grad) {
            *p -= step * g;
        }
        Ok(value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    pub checked: usize,
}

/// Compares analytic gradients with central differences of step `h` on
/// every parameter. Relative error is `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn gradient_check<N: Network + ?Sized>(net: &mut N, batch: &[Sample], loss: Loss, h: f64) -> Result<GradientReport, NnError> {
    let mut analytic = vec![0.0; net.params().len()];
    net.loss_and_gradient(batch, loss, &mut analytic)?;
    let mut max_rel = 0.0f64;
    let mut sum_rel = 0.0;
    for i in 0..analytic.len() {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + h;
        let up = net.loss(batch, loss)?;
        net.params_mut()[i] = orig - h;
        let down = net.loss(batch, loss)?;
        net.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max(rel);
        sum_rel += rel;
    }
    Ok(GradientReport {
        max_rel_error: max_rel,
        mean_rel_error: sum_rel / analytic.len().max(1) as f64,
        checked: analytic.len(),
    })
}

/// Uniform Glorot bound for a layer.
pub(crate) fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1.0, -2.0, 30.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hinge_is_zero_past_margin() {
        let mut d = [0.0; 3];
        let l = output_loss(&[2.0, -1.5, -1.0], Target::Class(0), Loss::Hinge, &mut d).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(d, [0.0; 3]);
    }

    #[test]
    fn selected_mse_touches_one_output() {
        let mut d = [9.0; 3];
        let l = output_loss(&[1.0, 2.0, 3.0], Target::Selected { action: 1, value: 0.5 }, Loss::SelectedMse, &mut d).unwrap();
        assert_eq!(l, 2.25);
        assert_eq!(d, [0.0, 3.0, 0.0]);
    }
}
