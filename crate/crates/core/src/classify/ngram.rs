//! Linear softmax classifier over character n-gram counts.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifierBackend, EpochStats, FitReport, TrainConfig};
use crate::corpus::{IdiomSample, Label};
use crate::{Error, Result};

const K: usize = Label::COUNT;
const MODEL_FILE: &str = "ngram_linear.json";

/// Character 1..=3-gram features, L2-normalised, fed to a softmax layer
/// trained by seeded mini-batch SGD.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NgramLinear {
    pub learning_rate: f64,
    pub max_order: usize,
    vocab: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    /// Row-major `vocab.len() x K`.
    weights: Vec<f64>,
    bias: [f64; K],
}

impl Default for NgramLinear {
    fn default() -> Self {
        NgramLinear {
            learning_rate: 10.0,
            max_order: 3,
            vocab: Vec::new(),
            index: HashMap::new(),
            weights: Vec::new(),
            bias: [0.0; K],
        }
    }
}

type Features = Vec<(usize, f64)>;

fn ngrams(text: &str, max_order: usize) -> impl Iterator<Item = String> + '_ {
    let chars: Vec<char> = format!(" {text} ").chars().collect();
    (1..=max_order).flat_map(move |n| {
        chars
            .windows(n)
            .map(|w| w.iter().collect::<String>())
            .collect::<Vec<_>>()
    })
}

fn softmax_in_place(scores: &mut [f64; K]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

impl NgramLinear {
    pub const NAME: &'static str = "ngram-linear";

    pub fn load(dir: &Path) -> Result<NgramLinear> {
        let path = dir.join(MODEL_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut model: NgramLinear = serde_json::from_str(&text)?;
        if model.weights.len() != model.vocab.len() * K {
            return Err(Error::InvalidArgument(format!(
                "{}: weight matrix does not match vocabulary",
                path.display()
            )));
        }
        model.rebuild_index();
        Ok(model)
    }

    fn rebuild_index(&mut self) {
        self.index = self
            .vocab
            .iter()
            .enumerate()
            .map(|(i, g)| (g.clone(), i))
            .collect();
    }

    fn build_vocab(&mut self, train: &[IdiomSample]) {
        self.vocab.clear();
        self.index.clear();
        for sample in train {
            for g in ngrams(&sample.text, self.max_order) {
                if !self.index.contains_key(&g) {
                    self.index.insert(g.clone(), self.vocab.len());
                    self.vocab.push(g);
                }
            }
        }
        self.weights = vec![0.0; self.vocab.len() * K];
        self.bias = [0.0; K];
    }

    fn features(&self, text: &str) -> Features {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for g in ngrams(text, self.max_order) {
            if let Some(&i) = self.index.get(&g) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        let mut feats: Features = counts.into_iter().collect();
        feats.sort_unstable_by_key(|&(i, _)| i);
        let norm = feats.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, v) in feats.iter_mut() {
                *v /= norm;
            }
        }
        feats
    }

    fn scores(&self, feats: &Features) -> [f64; K] {
        let mut s = self.bias;
        for &(i, v) in feats {
            let row = &self.weights[i * K..(i + 1) * K];
            for (acc, w) in s.iter_mut().zip(row) {
                *acc += v * w;
            }
        }
        s
    }

    fn argmax(scores: &[f64; K]) -> Label {
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate().skip(1) {
            // strict comparison keeps the earliest class on ties
            if s > scores[best] {
                best = i;
            }
        }
        Label::ALL[best]
    }

    fn accuracy(&self, data: &[IdiomSample]) -> f64 {
        let correct = data
            .iter()
            .filter(|s| Self::argmax(&self.scores(&self.features(&s.text))) == s.label)
            .count();
        correct as f64 / data.len() as f64
    }
}

impl ClassifierBackend for NgramLinear {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn fit(
        &mut self,
        train: &[IdiomSample],
        dev: &[IdiomSample],
        config: &TrainConfig,
    ) -> Result<FitReport> {
        config.validate()?;
        if train.is_empty() {
            return Err(Error::Empty("training set"));
        }
        self.build_vocab(train);
        let data: Vec<(Features, usize)> = train
            .iter()
            .map(|s| (self.features(&s.text), s.label.index()))
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut report = FitReport::default();
        for epoch in 1..=config.epochs {
            order.shuffle(&mut rng);
            let mut loss = 0.0;
            for batch in order.chunks(config.batch_size) {
                let step = self.learning_rate / batch.len() as f64;
                // gradients are taken at the pre-batch weights
                let grads: Vec<[f64; K]> = batch
                    .iter()
                    .map(|&j| {
                        let (feats, y) = &data[j];
                        let mut p = self.scores(feats);
                        softmax_in_place(&mut p);
                        loss -= p[*y].max(1e-300).ln();
                        p[*y] -= 1.0;
                        p
                    })
                    .collect();
                for (&j, g) in batch.iter().zip(&grads) {
                    for &(i, v) in &data[j].0 {
                        let row = &mut self.weights[i * K..(i + 1) * K];
                        for (w, gk) in row.iter_mut().zip(g) {
                            *w -= step * v * gk;
                        }
                    }
                    for (b, gk) in self.bias.iter_mut().zip(g) {
                        *b -= step * gk;
                    }
                }
            }
            let stats = EpochStats {
                epoch,
                train_loss: loss / data.len() as f64,
                dev_accuracy: (!dev.is_empty()).then(|| self.accuracy(dev)),
            };
            log::info!(
                "epoch {epoch}: train loss {:.4}, dev accuracy {:?}",
                stats.train_loss,
                stats.dev_accuracy
            );
            report.epochs.push(stats);
        }
        Ok(report)
    }

    fn predict(&self, texts: &[&str]) -> Vec<Label> {
        texts
            .iter()
            .map(|t| Self::argmax(&self.scores(&self.features(t))))
            .collect()
    }

    fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MODEL_FILE);
        fs::write(&path, serde_json::to_string(self)?).map_err(|e| Error::io(&path, e))
    }
}
