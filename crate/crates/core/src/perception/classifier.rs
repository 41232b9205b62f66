use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::glyphs::{GlyphDataset, GlyphExample, Split};
use super::Glyph;
use crate::nn::{softmax, ConvNet, ConvShape, Loss, Network, NnError, Sample, Sgd, Target};
use crate::seed;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("no training examples")]
    Empty,
    #[error("no examples labelled {0}")]
    MissingClass(Glyph),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Maps a square patch to pseudo-probabilities over nought, cross, nothing.
pub trait GlyphClassifier {
    fn probabilities(&self, patch: &[f64]) -> [f64; 3];
}

impl GlyphClassifier for ConvNet {
    fn probabilities(&self, patch: &[f64]) -> [f64; 3] {
        let p = softmax(&self.forward(patch).expect("patch matches classifier input"));
        [p[0], p[1], p[2]]
    }
}

fn patch_key(patch: &[f64]) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for p in patch {
        p.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Answers from a table of exact patches registered by the renderer. Unknown
/// patches count as misses and read as nothing.
#[derive(Debug, Clone, Default)]
pub struct OracleClassifier {
    table: Arc<RwLock<HashMap<u64, Glyph>>>,
    misses: Arc<AtomicU64>,
}

impl OracleClassifier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, patch: &[f64], glyph: Glyph) {
        self.table.write().expect("oracle table").insert(patch_key(patch), glyph);
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }
}

impl GlyphClassifier for OracleClassifier {
    fn probabilities(&self, patch: &[f64]) -> [f64; 3] {
        let g = self.table.read().expect("oracle table").get(&patch_key(patch)).copied();
        let g = g.unwrap_or_else(|| {
            self.misses.fetch_add(1, Ordering::Relaxed);
            Glyph::Nothing
        });
        let mut p = [0.0; 3];
        p[g.index()] = 1.0;
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    #[serde(skip, default)]
    pub shape: ConvShape,
    pub lr: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            shape: ConvShape::default(),
            lr: 0.01,
            max_epochs: 40,
            seed: 0,
        }
    }
}

/// Per-example SGD on the one-vs-all hinge loss, reshuffling each epoch and
/// stopping after the first epoch in which every example met its margin.
pub fn train_classifier<'a>(
    examples: impl IntoIterator<Item = &'a GlyphExample>,
    config: &ClassifierConfig,
) -> Result<ConvNet, ClassifierError> {
    let examples: Vec<&GlyphExample> = examples.into_iter().collect();
    if examples.is_empty() {
        return Err(ClassifierError::Empty);
    }
    for g in Glyph::ALL {
        if !examples.iter().any(|e| e.label == g) {
            return Err(ClassifierError::MissingClass(g));
        }
    }
    let mut rng = seed::stream(config.seed, "classifier/train");
    let mut net = ConvNet::glorot(config.shape, &mut rng);
    let mut sgd = Sgd::new(config.lr, f64::INFINITY);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for _ in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &i in &order {
            let e = examples[i];
            let sample = Sample {
                input: &e.pixels,
                target: Target::Class(e.label.index()),
            };
            epoch_loss += sgd.step(&mut net, &[sample], Loss::Hinge)?;
        }
        if epoch_loss == 0.0 {
            break;
        }
    }
    net.round_to_f32();
    Ok(net)
}

/// Counts indexed `[predicted][true]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn record(&mut self, predicted: Glyph, truth: Glyph) {
        self.counts[predicted.index()][truth.index()] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for p in 0..3 {
            for t in 0..3 {
                self.counts[p][t] += other.counts[p][t];
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..3).map(|i| self.counts[i][i]).sum();
        correct as f64 / self.total().max(1) as f64
    }

    /// Each true-class column divided by its total. Columns without
    /// examples stay zero.
    pub fn normalized(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for t in 0..3 {
            let n: u64 = (0..3).map(|p| self.counts[p][t]).sum();
            if n > 0 {
                for p in 0..3 {
                    out[p][t] = self.counts[p][t] as f64 / n as f64;
                }
            }
        }
        out
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.normalized();
        writeln!(f, "{:>16} {:>8} {:>8} {:>8}", "predicted\\true", "nought", "cross", "nothing")?;
        for g in Glyph::ALL {
            let r = n[g.index()];
            writeln!(f, "{:>16} {:>8.3} {:>8.3} {:>8.3}", g.name(), r[0], r[1], r[2])?;
        }
        write!(f, "accuracy {:.4} over {} images", self.accuracy(), self.total())
    }
}

pub fn evaluate_classifier<'a, C: GlyphClassifier + ?Sized>(
    classifier: &C,
    examples: impl IntoIterator<Item = &'a GlyphExample>,
) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::default();
    for e in examples {
        let p = classifier.probabilities(&e.pixels);
        let best = (0..3).max_by(|&a, &b| p[a].total_cmp(&p[b])).expect("three classes");
        m.record(Glyph::ALL[best], e.label);
    }
    m
}

/// Leave-one-out cross-validation: one network per held-out example, each
/// trained from its own seed stream. Folds run on all available cores.
pub fn cross_validate_loo<'a>(
    examples: impl IntoIterator<Item = &'a GlyphExample>,
    config: &ClassifierConfig,
) -> Result<ConfusionMatrix, ClassifierError> {
    let examples: Vec<&GlyphExample> = examples.into_iter().collect();
    if examples.is_empty() {
        return Err(ClassifierError::Empty);
    }
    let n = examples.len();
    let threads = std::thread::available_parallelism().map_or(1, |t| t.get()).min(n);
    let folds: Vec<usize> = (0..n).collect();
    let chunk = n.div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = folds
            .chunks(chunk)
            .map(|ids| {
                let examples = &examples;
                scope.spawn(move || -> Result<ConfusionMatrix, ClassifierError> {
                    let mut m = ConfusionMatrix::default();
                    for &held in ids {
                        let fold_config = ClassifierConfig {
                            seed: seed::derive(config.seed, &format!("loo/{held}")),
                            ..config.clone()
                        };
                        let train = examples.iter().enumerate().filter(|&(i, _)| i != held).map(|(_, e)| *e);
                        let net = train_classifier(train, &fold_config)?;
                        m.merge(&evaluate_classifier(&net, [examples[held]]));
                    }
                    Ok(m)
                })
            })
            .collect();
        let mut total = ConfusionMatrix::default();
        for h in handles {
            total.merge(&h.join().expect("cross-validation worker panicked")?);
        }
        Ok(total)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlyphStudyReport {
    pub loo_clean: ConfusionMatrix,
    /// Trained on the clean set, tested on the noisy set.
    pub clean_to_noisy: Option<ConfusionMatrix>,
    /// Trained on the noisy set, tested on the clean set.
    pub noisy_to_clean: Option<ConfusionMatrix>,
    pub seconds: f64,
}

/// Leave-one-out accuracy on the clean split and the two cross-noise
/// transfers. The transfers are absent when the noisy split is empty.
pub fn glyph_study(dataset: &GlyphDataset, config: &ClassifierConfig) -> Result<GlyphStudyReport, ClassifierError> {
    let start = Instant::now();
    let loo_clean = cross_validate_loo(dataset.split(Split::Clean), config)?;
    let (clean_to_noisy, noisy_to_clean) = if dataset.count(Split::Noisy) == 0 {
        (None, None)
    } else {
        let on_clean = train_classifier(dataset.split(Split::Clean), config)?;
        let on_noisy = train_classifier(dataset.split(Split::Noisy), config)?;
        (
            Some(evaluate_classifier(&on_clean, dataset.split(Split::Noisy))),
            Some(evaluate_classifier(&on_noisy, dataset.split(Split::Clean))),
        )
    };
    Ok(GlyphStudyReport {
        loo_clean,
        clean_to_noisy,
        noisy_to_clean,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::glyphs::{generate_glyphs, GlyphDatasetSpec};

    #[test]
    fn confusion_columns_sum_to_one() {
        let mut m = ConfusionMatrix::default();
        m.record(Glyph::Cross, Glyph::Cross);
        m.record(Glyph::Nought, Glyph::Cross);
        m.record(Glyph::Nothing, Glyph::Nothing);
        m.record(Glyph::Nought, Glyph::Nought);
        let n = m.normalized();
        for t in 0..3 {
            assert!(((0..3).map(|p| n[p][t]).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(m.accuracy(), 0.75);
    }

    #[test]
    fn missing_class_is_an_error() {
        let d = generate_glyphs(&GlyphDatasetSpec {
            clean: 6,
            noisy: 0,
            ..Default::default()
        });
        let no_nothing = d.examples.iter().filter(|e| e.label != Glyph::Nothing);
        assert!(matches!(
            train_classifier(no_nothing, &ClassifierConfig::default()),
            Err(ClassifierError::MissingClass(Glyph::Nothing))
        ));
        assert!(matches!(
            train_classifier([], &ClassifierConfig::default()),
            Err(ClassifierError::Empty)
        ));
    }

    #[test]
    fn oracle_reports_unknown_patches() {
        let o = OracleClassifier::new();
        let patch = vec![0.5; 4];
        o.insert(&patch, Glyph::Cross);
        assert_eq!(o.probabilities(&patch), [0.0, 1.0, 0.0]);
        assert_eq!(o.probabilities(&[0.1; 4]), [0.0, 0.0, 1.0]);
        assert_eq!(o.misses(), 1);
    }
}
