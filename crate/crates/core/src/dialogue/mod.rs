//! Response generation and perplexity over a pluggable language model.

mod bigram;
mod sampling;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use bigram::{ByteBigram, ByteTokenizer, LogitTable};
pub use sampling::{
    argmax, draw, filtered_distribution, ngram_ban, sample_response, softmax, temperature_scale,
    top_k_filter, top_p_filter, DecodingConfig, Generation,
};

pub type Token = u32;

/// An autoregressive next-token model.
///
/// Implementations must tolerate concurrent `next_token_logits` calls.
pub trait LanguageModel: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// Unnormalised scores for the token following `context` (which may be
    /// empty). Must have length [`vocab_size`](Self::vocab_size); `-inf`
    /// marks an impossible token.
    fn next_token_logits(&self, context: &[Token]) -> Vec<f64>;

    fn eos_token(&self) -> Option<Token> {
        None
    }
}

/// A model that can be (further) trained on token sequences.
pub trait TrainableLanguageModel: LanguageModel {
    fn fit(&mut self, corpus: &[Vec<Token>]);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerplexityReport {
    pub perplexity: f64,
    pub token_count: usize,
    /// Mean negative log-likelihood per token, in nats.
    pub mean_nll: f64,
}

/// Log-probability of `token` under `logits`, via log-sum-exp.
fn log_prob(logits: &[f64], token: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits[token] - lse
}

/// Token-level (micro-averaged) perplexity with natural logarithms.
///
/// Every token of every sequence is scored given all tokens before it in the
/// same sequence.
pub fn perplexity(model: &dyn LanguageModel, data: &[Vec<Token>]) -> Result<PerplexityReport> {
    let vocab = model.vocab_size();
    let mut nll = 0.0;
    let mut count = 0usize;
    for (s, seq) in data.iter().enumerate() {
        for (pos, &token) in seq.iter().enumerate() {
            if token as usize >= vocab {
                return Err(Error::InvalidArgument(format!(
                    "token {token} in sequence {s} is outside the vocabulary of {vocab}"
                )));
            }
            let logits = model.next_token_logits(&seq[..pos]);
            let lp = log_prob(&logits, token as usize);
            if lp == f64::NEG_INFINITY || lp.is_nan() {
                return Err(Error::ZeroProbability {
                    sequence: s,
                    position: pos,
                    token,
                });
            }
            nll -= lp;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Empty("perplexity data"));
    }
    let mean_nll = nll / count as f64;
    Ok(PerplexityReport {
        perplexity: mean_nll.exp(),
        token_count: count,
        mean_nll,
    })
}
