//! Token-based idiom classification behind a pluggable backend.
//!
//! A backend is anything implementing [`ClassifierBackend`]. Backends are
//! looked up by name in a [`BackendRegistry`]; the default registry ships the
//! [`NgramLinear`] reference classifier.

mod metrics;
mod ngram;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{IdiomSample, Label};
use crate::{Error, Result};

pub use metrics::{classification_metrics, confusion_matrix, ClassMetrics, ConfusionMatrix};
pub use ngram::NgramLinear;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub backend: String,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(backend: impl Into<String>) -> TrainConfig {
        TrainConfig {
            backend: backend.into(),
            batch_size: 16,
            epochs: 6,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(format!(
                "epochs and batch size must be at least 1 (got {} and {})",
                self.epochs, self.batch_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub epochs: Vec<EpochStats>,
}

/// A trainable figure-of-speech classifier.
///
/// `predict` must be callable concurrently on a fitted model; `fit` takes
/// `&mut self` and is therefore exclusive.
pub trait ClassifierBackend: Send + Sync {
    fn name(&self) -> &str;

    fn fit(
        &mut self,
        train: &[IdiomSample],
        dev: &[IdiomSample],
        config: &TrainConfig,
    ) -> Result<FitReport>;

    /// One label per input text.
    fn predict(&self, texts: &[&str]) -> Vec<Label>;

    /// Persists backend-specific state into `dir` (which already exists).
    fn save(&self, dir: &Path) -> Result<()>;
}

type CreateFn = fn() -> Box<dyn ClassifierBackend>;
type LoadFn = fn(&Path) -> Result<Box<dyn ClassifierBackend>>;

struct Entry {
    create: CreateFn,
    load: LoadFn,
}

/// Name → constructor table for classifier backends.
pub struct BackendRegistry {
    entries: BTreeMap<String, Entry>,
}

impl Default for BackendRegistry {
    fn default() -> Self {
        let mut reg = BackendRegistry::empty();
        reg.register(NgramLinear::NAME, || Box::new(NgramLinear::default()), |dir| {
            Ok(Box::new(NgramLinear::load(dir)?))
        });
        reg
    }
}

impl BackendRegistry {
    pub fn empty() -> BackendRegistry {
        BackendRegistry {
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &str, create: CreateFn, load: LoadFn) {
        self.entries.insert(name.to_string(), Entry { create, load });
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn create(&self, name: &str) -> Result<Box<dyn ClassifierBackend>> {
        self.entries
            .get(name)
            .map(|e| (e.create)())
            .ok_or_else(|| Error::UnknownBackend(name.to_string()))
    }

    /// Loads a model directory written by [`save_model`].
    pub fn load(&self, dir: &Path) -> Result<Box<dyn ClassifierBackend>> {
        let path = dir.join(MODEL_MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: ModelManifest = serde_json::from_str(&text)?;
        let entry = self
            .entries
            .get(&manifest.backend)
            .ok_or_else(|| Error::UnknownBackend(manifest.backend.clone()))?;
        (entry.load)(dir)
    }
}

const MODEL_MANIFEST: &str = "backend.json";

#[derive(Serialize, Deserialize)]
struct ModelManifest {
    backend: String,
    config: Option<TrainConfig>,
}

pub fn save_model(
    model: &dyn ClassifierBackend,
    config: Option<&TrainConfig>,
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = ModelManifest {
        backend: model.name().to_string(),
        config: config.cloned(),
    };
    let path = dir.join(MODEL_MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    model.save(dir)
}

/// Creates the configured backend and fits it.
pub fn train_classifier(
    registry: &BackendRegistry,
    train: &[IdiomSample],
    dev: &[IdiomSample],
    config: &TrainConfig,
) -> Result<(Box<dyn ClassifierBackend>, FitReport)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut model = registry.create(&config.backend)?;
    let report = model.fit(train, dev, config)?;
    Ok((model, report))
}

/// Predictions, metrics and confusion matrix of `model` on `data`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: ClassMetrics,
    pub confusion: ConfusionMatrix,
}

pub fn evaluate_classifier(model: &dyn ClassifierBackend, data: &[IdiomSample]) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation data"));
    }
    let texts: Vec<&str> = data.iter().map(|s| s.text.as_str()).collect();
    let preds = model.predict(&texts);
    let refs: Vec<Label> = data.iter().map(|s| s.label).collect();
    let confusion = confusion_matrix(&refs, &preds)?;
    Ok(Evaluation {
        metrics: ClassMetrics::from_confusion(&confusion),
        confusion,
    })
}

/// One line of the line-delimited evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum ReportLine {
    Metrics {
        model: String,
        data: String,
        #[serde(flatten)]
        metrics: ClassMetrics,
    },
    Confusion {
        truth: Label,
        counts: BTreeMap<Label, u64>,
    },
}

impl Evaluation {
    pub fn report_lines(&self, model: &str, data: &str) -> Vec<ReportLine> {
        let mut lines = vec![ReportLine::Metrics {
            model: model.to_string(),
            data: data.to_string(),
            metrics: self.metrics.clone(),
        }];
        for truth in Label::ALL {
            let counts = Label::ALL
                .iter()
                .map(|&p| (p, self.confusion.get(truth, p)))
                .collect();
            lines.push(ReportLine::Confusion { truth, counts });
        }
        lines
    }
}
