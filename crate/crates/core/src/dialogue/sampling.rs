use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LanguageModel, Token};
use crate::{Error, Result};

/// Decoding hyperparameters. `Default` is k=100, p=0.7, T=0.8, 200 tokens,
/// trigram blocking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingConfig {
    pub top_k: usize,
    pub top_p: f64,
    pub temperature: f64,
    pub max_len: usize,
    /// 0 disables n-gram blocking.
    pub no_repeat_ngram: usize,
    pub seed: u64,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        DecodingConfig {
            top_k: 100,
            top_p: 0.7,
            temperature: 0.8,
            max_len: 200,
            no_repeat_ngram: 3,
            seed: 0,
        }
    }
}

impl DecodingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k < 1 {
            return Err(Error::InvalidArgument("top-k must be at least 1".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "top-p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.max_len < 1 {
            return Err(Error::InvalidArgument("max length must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn temperature_scale(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    Ok(logits.iter().map(|l| l / temperature).collect())
}

/// Softmax that tolerates `-inf` logits. Returns `None` when every logit is
/// `-inf`.
pub fn softmax(logits: &[f64]) -> Option<Vec<f64>> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Some(exps.into_iter().map(|e| e / sum).collect())
}

// Indices by descending probability, ties by lowest index.
fn ranked(probs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    idx
}

fn keep_only(probs: &[f64], kept: &[usize]) -> Vec<f64> {
    let mass: f64 = kept.iter().map(|&i| probs[i]).sum();
    let mut out = vec![0.0; probs.len()];
    for &i in kept {
        out[i] = probs[i] / mass;
    }
    out
}

/// Zeroes all but the `k` most probable entries and renormalises.
pub fn top_k_filter(probs: &[f64], k: usize) -> Result<Vec<f64>> {
    if k < 1 {
        return Err(Error::InvalidArgument("top-k must be at least 1".into()));
    }
    if k >= probs.len() {
        return Ok(probs.to_vec());
    }
    let order = ranked(probs);
    Ok(keep_only(probs, &order[..k]))
}

/// Keeps the smallest most-probable prefix whose mass reaches `p`.
pub fn top_p_filter(probs: &[f64], p: f64) -> Result<Vec<f64>> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!("top-p must be in (0, 1], got {p}")));
    }
    if p == 1.0 {
        return Ok(probs.to_vec());
    }
    let order = ranked(probs);
    let mut mass = 0.0;
    let mut cut = order.len();
    for (rank, &i) in order.iter().enumerate() {
        mass += probs[i];
        if mass >= p {
            cut = rank + 1;
            break;
        }
    }
    Ok(keep_only(probs, &order[..cut]))
}

/// Tokens whose appending would repeat an n-gram already in `context`.
pub fn ngram_ban(context: &[Token], n: usize) -> BTreeSet<Token> {
    let mut banned = BTreeSet::new();
    if n == 0 || context.len() < n {
        return banned;
    }
    let prefix = &context[context.len() - (n - 1)..];
    for window in context.windows(n) {
        if &window[..n - 1] == prefix {
            banned.insert(window[n - 1]);
        }
    }
    banned
}

/// The distribution the sampler draws from after the full filter chain:
/// temperature, n-gram ban, softmax, top-k, top-p. `None` when the ban
/// leaves no candidate.
pub fn filtered_distribution(
    logits: &[f64],
    context: &[Token],
    cfg: &DecodingConfig,
) -> Result<Option<Vec<f64>>> {
    let mut scaled = temperature_scale(logits, cfg.temperature)?;
    for t in ngram_ban(context, cfg.no_repeat_ngram) {
        if let Some(l) = scaled.get_mut(t as usize) {
            *l = f64::NEG_INFINITY;
        }
    }
    let Some(probs) = softmax(&scaled) else {
        return Ok(None);
    };
    let probs = top_k_filter(&probs, cfg.top_k)?;
    Ok(Some(top_p_filter(&probs, cfg.top_p)?))
}

/// Categorical draw by inverse CDF over a normalised vector.
pub fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Token {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i as Token;
        }
    }
    last as Token
}

/// First index of the maximum logit.
pub fn argmax(logits: &[f64]) -> Token {
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    best as Token
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generation {
    /// Generated continuation, without the prompt or the end-of-sequence token.
    pub tokens: Vec<Token>,
    /// Steps where blocking removed every candidate and the raw argmax was used.
    pub fallbacks: usize,
}

/// Autoregressive sampling from `model`, seeded by `cfg.seed`.
pub fn sample_response(
    model: &dyn LanguageModel,
    prompt: &[Token],
    cfg: &DecodingConfig,
) -> Result<Generation> {
    cfg.validate()?;
    if prompt.is_empty() {
        return Err(Error::Empty("prompt"));
    }
    let vocab = model.vocab_size();
    let eos = model.eos_token();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut context = prompt.to_vec();
    let mut out = Generation {
        tokens: Vec::new(),
        fallbacks: 0,
    };
    for _ in 0..cfg.max_len {
        let logits = model.next_token_logits(&context);
        if logits.len() != vocab {
            return Err(Error::InvalidArgument(format!(
                "model returned {} logits for a vocabulary of {vocab}",
                logits.len()
            )));
        }
        let token = match filtered_distribution(&logits, &context, cfg)? {
            Some(probs) => draw(&probs, &mut rng),
            None => {
                log::warn!(
                    "no token survives {}-gram blocking at step {}; using unfiltered argmax",
                    cfg.no_repeat_ngram,
                    out.tokens.len()
                );
                out.fallbacks += 1;
                argmax(&logits)
            }
        };
        if Some(token) == eos {
            break;
        }
        context.push(token);
        out.tokens.push(token);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const ABC: [f64; 3] = [0.5, 0.3, 0.2];

    #[test]
    fn temperature_examples() {
        assert_eq!(temperature_scale(&[1.5, -2.0], 1.0).unwrap(), vec![1.5, -2.0]);
        assert_eq!(temperature_scale(&[2.0, 0.0], 0.5).unwrap(), vec![4.0, 0.0]);
        assert!(temperature_scale(&[1.0], 0.0).is_err());
        let base = softmax(&[1.0, 0.2, -0.5]).unwrap();
        let sharp = softmax(&temperature_scale(&[1.0, 0.2, -0.5], 0.8).unwrap()).unwrap();
        assert!(sharp[0] > base[0]);
    }

    #[test]
    fn top_k_examples() {
        let f = top_k_filter(&ABC, 2).unwrap();
        assert_abs_diff_eq!(f[0], 0.625, epsilon = 1e-12);
        assert_abs_diff_eq!(f[1], 0.375, epsilon = 1e-12);
        assert_eq!(f[2], 0.0);
        assert_eq!(top_k_filter(&ABC, 3).unwrap(), ABC.to_vec());
        assert_eq!(top_k_filter(&ABC, 1).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(top_k_filter(&ABC, 0).is_err());
        // ties go to the lower index
        assert_eq!(top_k_filter(&[0.25; 4], 1).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn top_p_examples() {
        let f = top_p_filter(&ABC, 0.7).unwrap();
        assert_abs_diff_eq!(f[0], 0.625, epsilon = 1e-12);
        assert_abs_diff_eq!(f[1], 0.375, epsilon = 1e-12);
        assert_eq!(f[2], 0.0);
        assert_eq!(top_p_filter(&ABC, 1.0).unwrap(), ABC.to_vec());
        assert_eq!(top_p_filter(&[0.0, 1.0, 0.0], 0.3).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(top_p_filter(&ABC, 0.0).is_err());
        assert!(top_p_filter(&ABC, 1.2).is_err());
    }

    #[test]
    fn ngram_ban_examples() {
        let (a, b, c) = (0, 1, 2);
        assert_eq!(ngram_ban(&[a, b, c, a, b], 3), BTreeSet::from([c]));
        assert!(ngram_ban(&[a, b, c, a, b], 0).is_empty());
        assert!(ngram_ban(&[a], 3).is_empty());
        assert!(ngram_ban(&[a, b], 3).is_empty());
        assert_eq!(ngram_ban(&[a, b, a], 1), BTreeSet::from([a, b]));
        assert_eq!(ngram_ban(&[a, b, a, c, a], 2), BTreeSet::from([b, c]));
    }

    #[test]
    fn config_validation() {
        assert!(DecodingConfig::default().validate().is_ok());
        for bad in [
            DecodingConfig { top_k: 0, ..Default::default() },
            DecodingConfig { top_p: 0.0, ..Default::default() },
            DecodingConfig { temperature: -1.0, ..Default::default() },
            DecodingConfig { max_len: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn draw_respects_zero_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(draw(&[0.0, 1.0, 0.0], &mut rng), 1);
        }
    }

    #[test]
    fn all_banned_falls_back_to_argmax() {
        let cfg = DecodingConfig {
            no_repeat_ngram: 1,
            ..Default::default()
        };
        assert_eq!(filtered_distribution(&[0.0, 1.0], &[0, 1], &cfg).unwrap(), None);
    }
}
