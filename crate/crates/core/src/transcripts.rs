//! Blinded human-evaluation transcripts.
//!
//! Two protocols are supported:
//!
//! * Experiment 1 (human-likeness): 32 generated replies to idiom prompts,
//!   32 to dialogue prompts, and 15 + 15 credibility conversations carrying
//!   the genuine test-set responses. 94 items.
//! * Experiment 2 (fitting / diverse): 32 idiom prompts each answered by two
//!   models in randomised Person 2 / Person 3 slots, plus 30 credibility
//!   conversations from the dialogue pool. 62 items.
//!
//! Credibility items are spread through the transcript by [`interleave`].
//! Provenance lives on [`TranscriptItem`] but is written to a separate
//! answer-key file and never appears in [`annotator_view`].

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_records, IdiomSample, RecordFormat};
use crate::{Error, Result};

pub const EXP1_EVAL_PER_POOL: usize = 32;
pub const EXP1_CREDIBILITY_PER_POOL: usize = 15;
pub const EXP2_PAIRED: usize = 32;
pub const EXP2_CREDIBILITY: usize = 30;

const INSTRUCTION_2: &str = "Person 2 & Person 3 respond to Person 1. Please, write which (2 or 3) \
is the a) more fitting response & b) more diverse response (showing variety in language use).";

fn instruction_1(items: usize) -> String {
    format!(
        "Here are {items} different conversations by 2 speakers. Please, write Human-like (H) or \
         Non-human-like (N) or Uncertain (U), based on your own understanding of what is \
         human-like. Sometimes the speakers use idioms. If you wish, you may use a dictionary."
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialoguePair {
    pub prompt: String,
    pub response: String,
}

/// Loads prompt/response pairs (`prompt,response` CSV or JSON lines).
pub fn load_pairs(path: &Path) -> Result<Vec<DialoguePair>> {
    let format = RecordFormat::detect(path)?;
    Ok(read_records::<DialoguePair>(path, format)?
        .into_iter()
        .map(|(_, p)| p)
        .collect())
}

/// Consecutive samples of the same idiom case treated as dialogue turns.
pub fn pairs_from_turns(corpus: &[IdiomSample]) -> Vec<DialoguePair> {
    corpus
        .windows(2)
        .filter(|w| w[0].case_id == w[1].case_id)
        .map(|w| DialoguePair {
            prompt: w[0].text.clone(),
            response: w[1].text.clone(),
        })
        .collect()
}

/// Something that answers a prompt: a model behind a decoding loop, or a
/// fixed lookup table in tests.
pub trait Responder {
    fn id(&self) -> &str;
    fn respond(&self, prompt: &str) -> String;
}

/// [`Responder`] backed by a closure.
pub struct FnResponder<F> {
    id: String,
    f: F,
}

impl<F: Fn(&str) -> String> FnResponder<F> {
    pub fn new(id: impl Into<String>, f: F) -> Self {
        FnResponder { id: id.into(), f }
    }
}

impl<F: Fn(&str) -> String> Responder for FnResponder<F> {
    fn id(&self) -> &str {
        &self.id
    }

    fn respond(&self, prompt: &str) -> String {
        (self.f)(prompt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Experiment {
    HumanLikeness,
    FittingDiverse,
}

impl Experiment {
    pub fn number(self) -> u8 {
        match self {
            Experiment::HumanLikeness => 1,
            Experiment::FittingDiverse => 2,
        }
    }
}

impl TryFrom<u8> for Experiment {
    type Error = String;

    fn try_from(n: u8) -> std::result::Result<Self, String> {
        match n {
            1 => Ok(Experiment::HumanLikeness),
            2 => Ok(Experiment::FittingDiverse),
            other => Err(format!("unknown experiment {other}")),
        }
    }
}

impl From<Experiment> for u8 {
    fn from(e: Experiment) -> u8 {
        e.number()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pool {
    Idioms,
    Dialogue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Generated { model: String, pool: Pool },
    Paired { pool: Pool },
    Credibility { pool: Pool },
}

/// Who wrote a response shown in a Person 2 / Person 3 slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Model(String),
    Genuine,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotMap {
    pub person2: Source,
    pub person3: Source,
}

impl SlotMap {
    pub fn source(&self, slot: Slot) -> &Source {
        match slot {
            Slot::Person2 => &self.person2,
            Slot::Person3 => &self.person3,
        }
    }

    pub fn slot_of(&self, source: &Source) -> Option<Slot> {
        if &self.person2 == source {
            Some(Slot::Person2)
        } else if &self.person3 == source {
            Some(Slot::Person3)
        } else {
            None
        }
    }
}

/// Response slot in Experiment 2, serialised as the person number 2 or 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Slot {
    Person2,
    Person3,
}

impl TryFrom<u8> for Slot {
    type Error = String;

    fn try_from(n: u8) -> std::result::Result<Self, String> {
        match n {
            2 => Ok(Slot::Person2),
            3 => Ok(Slot::Person3),
            other => Err(format!("slot must be 2 or 3, got {other}")),
        }
    }
}

impl From<Slot> for u8 {
    fn from(s: Slot) -> u8 {
        match s {
            Slot::Person2 => 2,
            Slot::Person3 => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptItem {
    /// 1-based position in the transcript.
    pub item_id: u32,
    pub prompt: String,
    /// One response (Experiment 1) or the Person 2 / Person 3 responses.
    pub responses: Vec<String>,
    pub provenance: Provenance,
    pub slot_map: Option<SlotMap>,
}

impl TranscriptItem {
    pub fn is_credibility(&self) -> bool {
        matches!(self.provenance, Provenance::Credibility { .. })
    }

    pub fn pool(&self) -> Pool {
        match &self.provenance {
            Provenance::Generated { pool, .. }
            | Provenance::Paired { pool }
            | Provenance::Credibility { pool } => *pool,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub transcript_id: String,
    pub experiment: Experiment,
    pub instruction: String,
    pub items: Vec<TranscriptItem>,
    pub seed: u64,
}

impl Transcript {
    pub fn credibility_count(&self) -> usize {
        self.items.iter().filter(|i| i.is_credibility()).count()
    }

    pub fn item(&self, item_id: u32) -> Option<&TranscriptItem> {
        self.items
            .get(item_id.checked_sub(1)? as usize)
            .filter(|i| i.item_id == item_id)
            .or_else(|| self.items.iter().find(|i| i.item_id == item_id))
    }

    /// Every model identifier mentioned anywhere in the answer key.
    pub fn model_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        let mut push = |id: &str| {
            if !ids.iter().any(|x| x == id) {
                ids.push(id.to_string());
            }
        };
        for item in &self.items {
            if let Provenance::Generated { model, .. } = &item.provenance {
                push(model);
            }
            if let Some(map) = &item.slot_map {
                for s in [&map.person2, &map.person3] {
                    if let Source::Model(m) = s {
                        push(m);
                    }
                }
            }
        }
        ids
    }
}

/// 1-based positions that credibility items occupy when `n_credibility` of
/// them are spread over `n_eval + n_credibility` slots.
///
/// Item j goes to round(j·L/(C+1)) (halves round up); an occupied slot moves
/// the item to the next free one.
pub fn credibility_positions(n_eval: usize, n_credibility: usize) -> Vec<usize> {
    let len = n_eval + n_credibility;
    let mut taken = vec![false; len + 1];
    let mut positions = Vec::with_capacity(n_credibility);
    for j in 1..=n_credibility {
        let den = 2 * (n_credibility + 1);
        let mut pos = ((2 * j * len + n_credibility + 1) / den).clamp(1, len);
        while taken[pos] {
            pos = if pos == len { 1 } else { pos + 1 };
        }
        taken[pos] = true;
        positions.push(pos);
    }
    positions
}

/// Merges the two lists, placing credibility items at
/// [`credibility_positions`] and evaluation items in the remaining slots.
/// Both lists keep their internal order.
pub fn interleave<T>(evaluation: Vec<T>, credibility: Vec<T>) -> Vec<T> {
    let len = evaluation.len() + credibility.len();
    let positions = credibility_positions(evaluation.len(), credibility.len());
    let mut slots: Vec<Option<T>> = (0..len).map(|_| None).collect();
    let mut cred_slots: Vec<(usize, T)> = positions.into_iter().zip(credibility).collect();
    cred_slots.sort_by_key(|(p, _)| *p);
    for (pos, item) in cred_slots {
        slots[pos - 1] = Some(item);
    }
    let mut eval = evaluation.into_iter();
    slots
        .into_iter()
        .map(|s| s.or_else(|| eval.next()).expect("slot count matches item count"))
        .collect()
}

fn choose<'a>(
    pool: &'a [DialoguePair],
    name: &'static str,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<&'a DialoguePair>> {
    if pool.len() < n {
        return Err(Error::PoolTooSmall {
            pool: name,
            available: pool.len(),
            required: n,
        });
    }
    Ok(index::sample(rng, pool.len(), n)
        .into_iter()
        .map(|i| &pool[i])
        .collect())
}

struct Draft {
    prompt: String,
    responses: Vec<String>,
    provenance: Provenance,
    slot_map: Option<SlotMap>,
}

fn finish(
    transcript_id: &str,
    experiment: Experiment,
    seed: u64,
    evaluation: Vec<Draft>,
    credibility: Vec<Draft>,
    instruction: impl FnOnce(usize) -> String,
) -> Transcript {
    let items: Vec<TranscriptItem> = interleave(evaluation, credibility)
        .into_iter()
        .enumerate()
        .map(|(i, d)| TranscriptItem {
            item_id: i as u32 + 1,
            prompt: d.prompt,
            responses: d.responses,
            provenance: d.provenance,
            slot_map: d.slot_map,
        })
        .collect();
    Transcript {
        transcript_id: transcript_id.to_string(),
        experiment,
        instruction: instruction(items.len()),
        items,
        seed,
    }
}

/// Human-likeness transcript for one model.
///
/// Prompt selection depends only on the pools and `seed`, so building one
/// transcript per model with the same seed gives every model identical
/// prompts. `transcript_id` is shown to annotators and must not name the
/// model.
pub fn build_experiment1(
    transcript_id: &str,
    idiom_pool: &[DialoguePair],
    dialogue_pool: &[DialoguePair],
    model: &dyn Responder,
    seed: u64,
) -> Result<Transcript> {
    let need = EXP1_EVAL_PER_POOL + EXP1_CREDIBILITY_PER_POOL;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idioms = choose(idiom_pool, "idioms", need, &mut rng)?;
    let dialogue = choose(dialogue_pool, "dialogue", need, &mut rng)?;

    let mut eval_prompts = Vec::new();
    let mut cred_pairs = Vec::new();
    for (pool, picked) in [(Pool::Idioms, &idioms), (Pool::Dialogue, &dialogue)] {
        let (eval, cred) = picked.split_at(EXP1_EVAL_PER_POOL);
        eval_prompts.extend(eval.iter().map(|p| (pool, *p)));
        cred_pairs.extend(cred.iter().map(|p| (pool, *p)));
    }
    eval_prompts.shuffle(&mut rng);
    cred_pairs.shuffle(&mut rng);

    let evaluation = eval_prompts
        .into_iter()
        .map(|(pool, pair)| Draft {
            responses: vec![model.respond(&pair.prompt)],
            prompt: pair.prompt.clone(),
            provenance: Provenance::Generated {
                model: model.id().to_string(),
                pool,
            },
            slot_map: None,
        })
        .collect();
    let credibility = cred_pairs
        .into_iter()
        .map(|(pool, pair)| Draft {
            prompt: pair.prompt.clone(),
            responses: vec![pair.response.clone()],
            provenance: Provenance::Credibility { pool },
            slot_map: None,
        })
        .collect();
    Ok(finish(
        transcript_id,
        Experiment::HumanLikeness,
        seed,
        evaluation,
        credibility,
        instruction_1,
    ))
}

/// Paired fitting/diverse transcript comparing `model_a` and `model_b`.
///
/// Credibility items show the genuine test-set response in a random slot and
/// a reply from one of the two models (chosen at random) in the other.
pub fn build_experiment2(
    transcript_id: &str,
    idiom_pool: &[DialoguePair],
    dialogue_pool: &[DialoguePair],
    model_a: &dyn Responder,
    model_b: &dyn Responder,
    seed: u64,
) -> Result<Transcript> {
    if model_a.id() == model_b.id() {
        return Err(Error::InvalidArgument(
            "the two compared models need distinct identifiers".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idioms = choose(idiom_pool, "idioms", EXP2_PAIRED, &mut rng)?;
    let dialogue = choose(dialogue_pool, "dialogue", EXP2_CREDIBILITY, &mut rng)?;
    let model_source = |m: &dyn Responder| Source::Model(m.id().to_string());

    let evaluation = idioms
        .into_iter()
        .map(|pair| {
            let a_first = rng.gen_bool(0.5);
            let (p2, p3) = if a_first {
                (model_a, model_b)
            } else {
                (model_b, model_a)
            };
            Draft {
                prompt: pair.prompt.clone(),
                responses: vec![p2.respond(&pair.prompt), p3.respond(&pair.prompt)],
                provenance: Provenance::Paired { pool: Pool::Idioms },
                slot_map: Some(SlotMap {
                    person2: model_source(p2),
                    person3: model_source(p3),
                }),
            }
        })
        .collect::<Vec<_>>();

    let credibility = dialogue
        .into_iter()
        .map(|pair| {
            let genuine_first = rng.gen_bool(0.5);
            let other = if rng.gen_bool(0.5) { model_a } else { model_b };
            let generated = other.respond(&pair.prompt);
            let (responses, slot_map) = if genuine_first {
                (
                    vec![pair.response.clone(), generated],
                    SlotMap {
                        person2: Source::Genuine,
                        person3: model_source(other),
                    },
                )
            } else {
                (
                    vec![generated, pair.response.clone()],
                    SlotMap {
                        person2: model_source(other),
                        person3: Source::Genuine,
                    },
                )
            };
            Draft {
                prompt: pair.prompt.clone(),
                responses,
                provenance: Provenance::Credibility {
                    pool: Pool::Dialogue,
                },
                slot_map: Some(slot_map),
            }
        })
        .collect::<Vec<_>>();

    Ok(finish(
        transcript_id,
        Experiment::FittingDiverse,
        seed,
        evaluation,
        credibility,
        |_| INSTRUCTION_2.to_string(),
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindedItem {
    pub item_id: u32,
    pub turns: Vec<Turn>,
}

impl BlindedItem {
    pub fn from_item(item: &TranscriptItem) -> BlindedItem {
        BlindedItem::new(item.item_id, &item.prompt, &item.responses)
    }

    fn new(item_id: u32, prompt: &str, responses: &[String]) -> BlindedItem {
        let mut turns = vec![Turn {
            speaker: "Person 1".into(),
            text: prompt.to_string(),
        }];
        for (i, r) in responses.iter().enumerate() {
            turns.push(Turn {
                speaker: format!("Person {}", i + 2),
                text: r.clone(),
            });
        }
        BlindedItem { item_id, turns }
    }
}

/// What annotators see: instruction and conversations, no provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindedTranscript {
    pub transcript_id: String,
    pub experiment: Experiment,
    pub instruction: String,
    pub items: Vec<BlindedItem>,
}

impl BlindedTranscript {
    pub fn render_text(&self) -> String {
        let mut out = format!("{}\n\n", self.instruction);
        for item in &self.items {
            let _ = writeln!(out, "{}.", item.item_id);
            for t in &item.turns {
                let _ = writeln!(out, "  {}: {}", t.speaker, t.text);
            }
            out.push('\n');
        }
        out
    }
}

pub fn annotator_view(transcript: &Transcript) -> BlindedTranscript {
    BlindedTranscript {
        transcript_id: transcript.transcript_id.clone(),
        experiment: transcript.experiment,
        instruction: transcript.instruction.clone(),
        items: transcript.items.iter().map(BlindedItem::from_item).collect(),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum PublicRecord {
    Header {
        transcript_id: String,
        experiment: Experiment,
        instruction: String,
        seed: u64,
    },
    Item {
        item_id: u32,
        prompt: String,
        responses: Vec<String>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum KeyRecord {
    Header {
        transcript_id: String,
    },
    Item {
        item_id: u32,
        provenance: Provenance,
        slot_map: Option<SlotMap>,
    },
}

fn write_lines<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Record {
            path: path.to_path_buf(),
            row: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Writes the annotator-safe transcript file and the answer-key sidecar.
pub fn save_transcript(transcript: &Transcript, public: &Path, key: &Path) -> Result<()> {
    let header = PublicRecord::Header {
        transcript_id: transcript.transcript_id.clone(),
        experiment: transcript.experiment,
        instruction: transcript.instruction.clone(),
        seed: transcript.seed,
    };
    write_lines(
        public,
        std::iter::once(header).chain(transcript.items.iter().map(|i| PublicRecord::Item {
            item_id: i.item_id,
            prompt: i.prompt.clone(),
            responses: i.responses.clone(),
        })),
    )?;
    let header = KeyRecord::Header {
        transcript_id: transcript.transcript_id.clone(),
    };
    write_lines(
        key,
        std::iter::once(header).chain(transcript.items.iter().map(|i| KeyRecord::Item {
            item_id: i.item_id,
            provenance: i.provenance.clone(),
            slot_map: i.slot_map.clone(),
        })),
    )
}

/// Reads the annotator-safe transcript file alone.
pub fn load_blinded(public: &Path) -> Result<BlindedTranscript> {
    let (header, items) = load_public(public)?;
    let PublicRecord::Header {
        transcript_id,
        experiment,
        instruction,
        ..
    } = header
    else {
        unreachable!()
    };
    Ok(BlindedTranscript {
        transcript_id,
        experiment,
        instruction,
        items: items
            .into_iter()
            .map(|(item_id, prompt, responses)| BlindedItem::new(item_id, &prompt, &responses))
            .collect(),
    })
}

type PublicItem = (u32, String, Vec<String>);

fn load_public(public: &Path) -> Result<(PublicRecord, Vec<PublicItem>)> {
    let mut records = read_lines::<PublicRecord>(public)?.into_iter();
    let bad = |m: &str| Error::Record {
        path: public.to_path_buf(),
        row: 1,
        message: m.to_string(),
    };
    let header = records.next().ok_or_else(|| bad("missing header"))?;
    if !matches!(header, PublicRecord::Header { .. }) {
        return Err(bad("first record must be the header"));
    }
    let items = records
        .map(|r| match r {
            PublicRecord::Item {
                item_id,
                prompt,
                responses,
            } => Ok((item_id, prompt, responses)),
            PublicRecord::Header { .. } => Err(bad("duplicate header")),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, items))
}

/// Reassembles a full transcript from its public file and answer key.
pub fn load_transcript(public: &Path, key: &Path) -> Result<Transcript> {
    let (header, items) = load_public(public)?;
    let PublicRecord::Header {
        transcript_id,
        experiment,
        instruction,
        seed,
    } = header
    else {
        unreachable!()
    };
    let mut keys = read_lines::<KeyRecord>(key)?.into_iter();
    let mismatch = |m: String| Error::Record {
        path: key.to_path_buf(),
        row: 0,
        message: m,
    };
    match keys.next() {
        Some(KeyRecord::Header { transcript_id: id }) if id == transcript_id => {}
        _ => return Err(mismatch(format!("answer key does not belong to {transcript_id}"))),
    }
    let keys: Vec<_> = keys.collect();
    if keys.len() != items.len() {
        return Err(mismatch(format!(
            "answer key has {} items, transcript has {}",
            keys.len(),
            items.len()
        )));
    }
    let items = items
        .into_iter()
        .zip(keys)
        .map(|((item_id, prompt, responses), k)| match k {
            KeyRecord::Item {
                item_id: kid,
                provenance,
                slot_map,
            } if kid == item_id => Ok(TranscriptItem {
                item_id,
                prompt,
                responses,
                provenance,
                slot_map,
            }),
            _ => Err(mismatch(format!("answer key out of step at item {item_id}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Transcript {
        transcript_id,
        experiment,
        instruction,
        items,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pool(tag: &str, n: usize) -> Vec<DialoguePair> {
        (0..n)
            .map(|i| DialoguePair {
                prompt: format!("{tag} prompt {i}"),
                response: format!("{tag} reply {i}"),
            })
            .collect()
    }

    fn echo(id: &str) -> FnResponder<impl Fn(&str) -> String> {
        let tag = id.to_string();
        FnResponder::new(id, move |p: &str| format!("{} says {p}", tag.len()))
    }

    #[test]
    fn positions_for_paper_layouts() {
        let expected: Vec<usize> = (1..=30).map(|j| 2 * j).collect();
        assert_eq!(credibility_positions(32, 30), expected);
        assert_eq!(credibility_positions(1, 1), vec![1]);
        assert!(credibility_positions(5, 0).is_empty());
        let exp1 = credibility_positions(64, 30);
        assert_eq!(exp1.len(), 30);
        assert!(exp1.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn interleave_without_credibility_is_identity() {
        assert_eq!(interleave(vec![1, 2, 3], vec![]), vec![1, 2, 3]);
        assert_eq!(interleave(vec![1], vec![9]), vec![9, 1]);
    }

    #[test]
    fn experiment1_layout() {
        let m = echo("model-x");
        let t = build_experiment1("t1", &pool("idiom", 60), &pool("woz", 47), &m, 5).unwrap();
        assert_eq!(t.items.len(), 94);
        assert_eq!(t.credibility_count(), 30);
        assert!(t.instruction.starts_with("Here are 94 different conversations"));
        let by_pool = |p: Pool| t.items.iter().filter(|i| !i.is_credibility() && i.pool() == p).count();
        assert_eq!((by_pool(Pool::Idioms), by_pool(Pool::Dialogue)), (32, 32));
        for (i, item) in t.items.iter().enumerate() {
            assert_eq!(item.item_id as usize, i + 1);
        }
        let again = build_experiment1("t1", &pool("idiom", 60), &pool("woz", 47), &m, 5).unwrap();
        assert_eq!(t, again);
        let other = build_experiment1("t2", &pool("idiom", 60), &pool("woz", 47), &echo("y"), 5).unwrap();
        let prompts = |t: &Transcript| t.items.iter().map(|i| i.prompt.clone()).collect::<Vec<_>>();
        assert_eq!(prompts(&t), prompts(&other));
    }

    #[test]
    fn experiment1_pool_too_small() {
        let err = build_experiment1("t", &pool("i", 46), &pool("w", 47), &echo("m"), 1).unwrap_err();
        assert!(matches!(err, Error::PoolTooSmall { pool: "idioms", .. }));
    }

    #[test]
    fn experiment2_layout() {
        let t = build_experiment2("t", &pool("i", 40), &pool("w", 30), &echo("aa"), &echo("b"), 2)
            .unwrap();
        assert_eq!(t.items.len(), 62);
        for item in &t.items {
            let cred = item.is_credibility();
            assert_eq!(cred, item.item_id % 2 == 0 && item.item_id <= 60);
            let map = item.slot_map.as_ref().unwrap();
            assert_ne!(map.person2, map.person3);
            if !cred {
                let models = [map.person2.clone(), map.person3.clone()];
                assert!(models.contains(&Source::Model("aa".into())));
                assert!(models.contains(&Source::Model("b".into())));
            } else {
                assert!(map.slot_of(&Source::Genuine).is_some());
            }
        }
        assert!(build_experiment2("t", &pool("i", 40), &pool("w", 29), &echo("a"), &echo("b"), 2).is_err());
        assert!(build_experiment2("t", &pool("i", 31), &pool("w", 30), &echo("a"), &echo("b"), 2).is_err());
    }

    #[test]
    fn blinded_view_has_no_key_material() {
        let t = build_experiment2("t", &pool("i", 40), &pool("w", 30), &echo("alpha-model"), &echo("beta-model"), 2)
            .unwrap();
        let view = annotator_view(&t);
        assert_eq!(view.items.len(), 62);
        assert_eq!(view.items[0].turns.len(), 3);
        let text = serde_json::to_string(&view).unwrap() + &view.render_text();
        for needle in ["alpha-model", "beta-model", "genuine", "credibility", "provenance", "slot_map"] {
            assert!(!text.contains(needle), "{needle} leaked");
        }
    }

    #[test]
    fn storage_round_trip() {
        let t = build_experiment2("t", &pool("i", 40), &pool("w", 30), &echo("a"), &echo("b"), 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (public, key) = (dir.path().join("t.jsonl"), dir.path().join("t.key.jsonl"));
        save_transcript(&t, &public, &key).unwrap();
        assert_eq!(load_transcript(&public, &key).unwrap(), t);
        assert_eq!(load_blinded(&public).unwrap(), annotator_view(&t));
        let public_text = std::fs::read_to_string(&public).unwrap();
        assert!(!public_text.contains("\"model\""));
    }

    #[test]
    fn turns_from_corpus() {
        use crate::corpus::Label;
        let s = |t: &str, c: &str| IdiomSample {
            text: t.into(),
            label: Label::Metaphor,
            case_id: c.into(),
        };
        let pairs = pairs_from_turns(&[s("a", "x"), s("b", "x"), s("c", "y"), s("d", "y")]);
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[1].prompt, "c");
    }

    proptest! {
        #[test]
        fn interleave_preserves_orders(e in 1usize..80, c in 0usize..80) {
            let eval: Vec<(bool, usize)> = (0..e).map(|i| (false, i)).collect();
            let cred: Vec<(bool, usize)> = (0..c).map(|i| (true, i)).collect();
            let out = interleave(eval, cred);
            prop_assert_eq!(out.len(), e + c);
            let evals: Vec<usize> = out.iter().filter(|x| !x.0).map(|x| x.1).collect();
            let creds: Vec<usize> = out.iter().filter(|x| x.0).map(|x| x.1).collect();
            prop_assert_eq!(evals, (0..e).collect::<Vec<_>>());
            prop_assert_eq!(creds, (0..c).collect::<Vec<_>>());
        }
    }
}
