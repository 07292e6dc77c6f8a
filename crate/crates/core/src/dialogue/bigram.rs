use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LanguageModel, Token, TrainableLanguageModel};
use crate::{Error, Result};

/// UTF-8 bytes as tokens 0..=255, plus an end-of-turn token 256.
#[derive(Debug, Clone, Copy, Default)]
pub struct ByteTokenizer;

impl ByteTokenizer {
    pub const VOCAB: usize = 257;
    pub const EOS: Token = 256;

    /// Bytes of `text` followed by the end-of-turn token.
    pub fn encode(&self, text: &str) -> Vec<Token> {
        text.bytes()
            .map(Token::from)
            .chain(std::iter::once(Self::EOS))
            .collect()
    }

    /// Prompt and response as consecutive turns.
    pub fn encode_pair(&self, prompt: &str, response: &str) -> Vec<Token> {
        let mut seq = self.encode(prompt);
        seq.extend(self.encode(response));
        seq
    }

    /// Lossy decode; end-of-turn tokens are dropped.
    pub fn decode(&self, tokens: &[Token]) -> String {
        let bytes: Vec<u8> = tokens
            .iter()
            .filter(|&&t| t < 256)
            .map(|&t| t as u8)
            .collect();
        String::from_utf8_lossy(&bytes).into_owned()
    }
}

/// Byte-level bigram model with add-alpha (Laplace) smoothing.
///
/// The end-of-turn token doubles as the start state, so an empty context is
/// scored like the beginning of a turn. `fit` accumulates counts, so calling
/// it again on a second corpus fine-tunes the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ByteBigram {
    pub alpha: f64,
    counts: Vec<u64>,
    row_totals: Vec<u64>,
}

impl Default for ByteBigram {
    fn default() -> Self {
        ByteBigram::new(1.0)
    }
}

impl ByteBigram {
    pub const NAME: &'static str = "bigram";
    const V: usize = ByteTokenizer::VOCAB;

    pub fn new(alpha: f64) -> ByteBigram {
        ByteBigram {
            alpha,
            counts: vec![0; Self::V * Self::V],
            row_totals: vec![0; Self::V],
        }
    }

    pub fn observed_transitions(&self) -> u64 {
        self.row_totals.iter().sum()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<ByteBigram> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: ByteBigram = serde_json::from_str(&text)?;
        if model.counts.len() != Self::V * Self::V || model.row_totals.len() != Self::V {
            return Err(Error::InvalidArgument(format!(
                "{}: not a byte bigram model",
                path.display()
            )));
        }
        Ok(model)
    }
}

impl LanguageModel for ByteBigram {
    fn vocab_size(&self) -> usize {
        Self::V
    }

    fn next_token_logits(&self, context: &[Token]) -> Vec<f64> {
        let prev = context.last().copied().unwrap_or(ByteTokenizer::EOS) as usize;
        let row = &self.counts[prev * Self::V..(prev + 1) * Self::V];
        let denom = (self.row_totals[prev] as f64 + self.alpha * Self::V as f64).ln();
        row.iter()
            .map(|&c| (c as f64 + self.alpha).ln() - denom)
            .collect()
    }

    fn eos_token(&self) -> Option<Token> {
        Some(ByteTokenizer::EOS)
    }
}

impl TrainableLanguageModel for ByteBigram {
    fn fit(&mut self, corpus: &[Vec<Token>]) {
        for seq in corpus {
            let mut prev = ByteTokenizer::EOS as usize;
            for &t in seq {
                let t = t as usize;
                if t >= Self::V {
                    continue;
                }
                self.counts[prev * Self::V + t] += 1;
                self.row_totals[prev] += 1;
                prev = t;
            }
        }
    }
}

/// First-order model with an explicit logit row per previous token plus a
/// row for the empty context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitTable {
    vocab: usize,
    start: Vec<f64>,
    rows: Vec<Vec<f64>>,
    eos: Option<Token>,
}

impl LogitTable {
    pub fn new(start: Vec<f64>, rows: Vec<Vec<f64>>, eos: Option<Token>) -> Result<LogitTable> {
        let vocab = start.len();
        if vocab == 0 || rows.len() != vocab || rows.iter().any(|r| r.len() != vocab) {
            return Err(Error::InvalidArgument(
                "logit table must be square with a start row of the same width".into(),
            ));
        }
        Ok(LogitTable {
            vocab,
            start,
            rows,
            eos,
        })
    }

    /// Context-independent model returning `logits` everywhere.
    pub fn constant(logits: Vec<f64>) -> LogitTable {
        let rows = vec![logits.clone(); logits.len()];
        LogitTable {
            vocab: logits.len(),
            start: logits,
            rows,
            eos: None,
        }
    }

    /// Gaussian-ish random logits with the given scale, seeded.
    pub fn random(vocab: usize, scale: f64, seed: u64) -> LogitTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let row = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..vocab)
                .map(|_| {
                    // sum of uniforms: cheap bell-shaped noise
                    let s: f64 = (0..4).map(|_| rng.gen::<f64>()).sum();
                    (s - 2.0) * scale
                })
                .collect()
        };
        let start = row(&mut rng);
        let rows = (0..vocab).map(|_| row(&mut rng)).collect();
        LogitTable {
            vocab,
            start,
            rows,
            eos: None,
        }
    }

    pub fn with_eos(mut self, eos: Option<Token>) -> LogitTable {
        self.eos = eos;
        self
    }
}

impl LanguageModel for LogitTable {
    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn next_token_logits(&self, context: &[Token]) -> Vec<f64> {
        match context.last() {
            Some(&t) => self.rows[t as usize % self.vocab].clone(),
            None => self.start.clone(),
        }
    }

    fn eos_token(&self) -> Option<Token> {
        self.eos
    }
}
