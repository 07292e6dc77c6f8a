//! Language-model backends reachable by name from the command line.

use std::path::Path;

use idiombench::corpus::{split_items, SplitRatios};
use idiombench::dialogue::{
    perplexity, sample_response, ByteBigram, ByteTokenizer, DecodingConfig, LanguageModel, Token,
    TrainableLanguageModel,
};
use idiombench::stats::{aggregate_runs, RunSeries, RunSummary};
use idiombench::transcripts::{DialoguePair, Responder};
use idiombench::{Error, Result};

pub const BACKENDS: &[&str] = &[ByteBigram::NAME];

pub fn load_backend(name: &str, path: &Path) -> Result<ByteBigram> {
    match name {
        ByteBigram::NAME => ByteBigram::load(path),
        other => Err(Error::UnknownBackend(other.to_string())),
    }
}

pub fn new_backend(name: &str) -> Result<ByteBigram> {
    match name {
        ByteBigram::NAME => Ok(ByteBigram::default()),
        other => Err(Error::UnknownBackend(other.to_string())),
    }
}

/// Each pair as one two-turn token sequence.
pub fn encode_pairs(pairs: &[DialoguePair]) -> Vec<Vec<Token>> {
    pairs
        .iter()
        .map(|p| ByteTokenizer.encode_pair(&p.prompt, &p.response))
        .collect()
}

fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// A byte-level model answering prompts through the sampling loop. The
/// decoding seed is mixed with the prompt so replies are reproducible per
/// prompt.
pub struct LmResponder<M> {
    id: String,
    model: M,
    config: DecodingConfig,
}

impl<M: LanguageModel> LmResponder<M> {
    pub fn new(id: impl Into<String>, model: M, config: DecodingConfig) -> Result<Self> {
        config.validate()?;
        Ok(LmResponder {
            id: id.into(),
            model,
            config,
        })
    }

    pub fn generate(&self, prompt: &str) -> Result<String> {
        let mut context = ByteTokenizer.encode(prompt);
        if context.is_empty() {
            context.push(ByteTokenizer::EOS);
        }
        let cfg = DecodingConfig {
            seed: self.config.seed ^ fnv1a(prompt),
            ..self.config.clone()
        };
        let g = sample_response(&self.model, &context, &cfg)?;
        Ok(ByteTokenizer.decode(&g.tokens))
    }
}

impl<M: LanguageModel> Responder for LmResponder<M> {
    fn id(&self) -> &str {
        &self.id
    }

    fn respond(&self, prompt: &str) -> String {
        self.generate(prompt).unwrap_or_default()
    }
}

/// Perplexity on each evaluation set over `runs` trainings. Run `r` trains a
/// fresh model on a seeded `subsample` share of `train` (then of
/// `fine_tune`, when given).
pub fn perplexity_runs(
    backend: &str,
    train: &[DialoguePair],
    fine_tune: Option<&[DialoguePair]>,
    evals: &[(String, Vec<DialoguePair>)],
    runs: usize,
    seed: u64,
    subsample: f64,
) -> Result<Vec<(String, RunSummary, Vec<f64>)>> {
    if runs == 0 {
        return Err(Error::InvalidArgument("at least one run is needed".into()));
    }
    let ratios = SplitRatios::new(subsample, 1.0 - subsample, 0.0)?;
    let mut values = vec![Vec::with_capacity(runs); evals.len()];
    for r in 0..runs as u64 {
        let mut model = new_backend(backend)?;
        let (part, _, _) = split_items(train, ratios, seed.wrapping_add(r))?;
        model.fit(&encode_pairs(&part));
        if let Some(ft) = fine_tune {
            let (part, _, _) = split_items(ft, ratios, seed.wrapping_add(r))?;
            model.fit(&encode_pairs(&part));
        }
        for (i, (_, data)) in evals.iter().enumerate() {
            values[i].push(perplexity(&model, &encode_pairs(data))?.perplexity);
        }
    }
    evals
        .iter()
        .zip(values)
        .map(|((name, _), v)| {
            let summary = aggregate_runs(&RunSeries::new("perplexity", v.clone())?);
            Ok((name.clone(), summary, v))
        })
        .collect()
}
