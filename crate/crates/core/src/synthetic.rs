//! Small seeded corpora for demos and tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adjudicate::{Majority, Rating, Vote, VoteRecord};
use crate::corpus::{IdiomSample, Label};
use crate::transcripts::{DialoguePair, Provenance, Slot, Source, Transcript};

fn cues(label: Label) -> &'static [&'static str] {
    match label {
        Label::Euphemism => &["passed away", "between jobs", "let go", "powder room"],
        Label::Literal => &["opened the door", "boiled water", "parked the car", "read the label"],
        Label::Metaphor => &["a rollercoaster", "a melting pot", "the heart of", "a goldmine"],
        Label::Personification => &["the wind whispered", "the sun smiled", "time crept", "leaves danced"],
        Label::Simile => &["as brave as a lion", "like a rock", "as busy as a bee", "like clockwork"],
        Label::Parallelism => &["easy come easy go", "like father like son", "no pain no gain", "out of sight out of mind"],
        Label::Paradox => &["less is more", "the only constant is change", "slow down to hurry", "the sound of silence"],
        Label::Hyperbole => &["a million times", "starving to death", "waited forever", "a ton of homework"],
        Label::Oxymoron => &["deafening silence", "bittersweet", "jumbo shrimp", "open secret"],
        Label::Irony => &["a fire station burned", "the traffic cop got a ticket", "the marriage counsellor divorced", "the pilot feared flying"],
    }
}

const FILLER: &[&str] = &[
    "honestly", "yesterday", "my", "neighbour", "said", "that", "we", "really", "felt", "it",
    "was", "at", "the", "office", "again", "so", "they", "told", "me", "about", "weekend",
    "everyone", "knew", "after", "all", "then", "our", "friend", "just",
];

/// `per_class` labelled sentences for every class, each carrying one of the
/// class's cue phrases among random filler words.
pub fn keyword_corpus(per_class: usize, seed: u64) -> Vec<IdiomSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_class * Label::COUNT);
    for label in Label::ALL {
        for i in 0..per_class {
            let cue = cues(label).choose(&mut rng).expect("cue lists are non-empty");
            let before = rng.gen_range(1..=4);
            let after = rng.gen_range(1..=4);
            let mut words: Vec<&str> = (0..before)
                .map(|_| *FILLER.choose(&mut rng).expect("filler is non-empty"))
                .collect();
            words.push(cue);
            words.extend((0..after).map(|_| *FILLER.choose(&mut rng).expect("filler is non-empty")));
            out.push(IdiomSample {
                text: words.join(" "),
                label,
                case_id: format!("{}-{i}", label.as_str()),
            });
        }
    }
    out.shuffle(&mut rng);
    out
}

const IDIOMS: &[&str] = &[
    "break the ice", "spill the beans", "under the weather", "once in a blue moon",
    "bite the bullet", "hit the sack", "cost an arm and a leg", "the last straw",
    "on thin ice", "pull your leg", "a piece of cake", "let the cat out of the bag",
];

const PEOPLE: &[&str] = &["my sister", "the new manager", "our teacher", "my cousin", "the landlord"];

/// Conversational exchanges whose turns use idioms.
pub fn idiom_dialogue(n: usize, seed: u64) -> Vec<DialoguePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let who = PEOPLE.choose(&mut rng).unwrap();
            let a = IDIOMS.choose(&mut rng).unwrap();
            let b = IDIOMS.choose(&mut rng).unwrap();
            DialoguePair {
                prompt: format!("did {who} really {a} last night"),
                response: format!("yes and honestly it was {b} for everyone"),
            }
        })
        .collect()
}

const SLOTS: &[&str] = &["a table for two", "a taxi to the station", "a hotel room", "two tickets", "a train to london"];
const TIMES: &[&str] = &["at seven", "tomorrow morning", "on friday", "for tonight", "at noon"];

/// Task-oriented booking exchanges with plain wording.
pub fn task_dialogue(n: usize, seed: u64) -> Vec<DialoguePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let what = SLOTS.choose(&mut rng).unwrap();
            let when = TIMES.choose(&mut rng).unwrap();
            DialoguePair {
                prompt: format!("i would like to book {what} {when} please"),
                response: format!("certainly i have booked {what} {when} is there anything else"),
            }
        })
        .collect()
}

/// Annotator ids used by the scripted vote builders.
pub const ANNOTATORS: [&str; 3] = ["ann-1", "ann-2", "ann-3"];

fn other(r: Rating) -> Rating {
    match r {
        Rating::H => Rating::U,
        Rating::U => Rating::N,
        Rating::N => Rating::H,
    }
}

fn record(annotator: usize, item_id: u32, vote: Vote, ts: &mut u64) -> VoteRecord {
    *ts += 1;
    VoteRecord {
        annotator_id: ANNOTATORS[annotator].to_string(),
        item_id,
        vote,
        timestamp: *ts,
    }
}

/// Three annotators' votes on a human-likeness transcript.
///
/// Evaluation items take `outcomes` in transcript order: a label outcome is
/// cast 2:1, a three-way outcome as H/U/N. The first `unanimous_credibility`
/// credibility items get three H votes, the rest H, H, N.
pub fn scripted_rating_votes(
    transcript: &Transcript,
    outcomes: &[Majority<Rating>],
    unanimous_credibility: usize,
) -> Vec<VoteRecord> {
    let mut ts = 0;
    let mut eval = outcomes.iter().cycle();
    let mut cred = 0;
    let mut out = Vec::new();
    for item in &transcript.items {
        let votes = if item.is_credibility() {
            cred += 1;
            if cred <= unanimous_credibility {
                [Rating::H; 3]
            } else {
                [Rating::H, Rating::H, Rating::N]
            }
        } else {
            match eval.next().copied().unwrap_or(Majority::ThreeWay) {
                Majority::Label(r) => [r, other(r), r],
                Majority::ThreeWay => [Rating::H, Rating::U, Rating::N],
            }
        };
        for (a, rating) in votes.into_iter().enumerate() {
            out.push(record(a, item.item_id, Vote::Rating { rating }, &mut ts));
        }
    }
    out
}

/// Outcome of one paired item: which model (0 for the first model id in the
/// transcript, 1 for the second) wins "more fitting", and whether all three
/// annotators agree. "More diverse" goes 2:1 to the other model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairedOutcome {
    pub fitting_model: usize,
    pub unanimous: bool,
}

fn flip(s: Slot) -> Slot {
    match s {
        Slot::Person2 => Slot::Person3,
        Slot::Person3 => Slot::Person2,
    }
}

/// Three annotators' votes on a fitting/diverse transcript.
///
/// The first `unanimous_credibility` credibility items have every annotator
/// pick the genuine response as more fitting; the rest split 2:1.
pub fn scripted_paired_votes(
    transcript: &Transcript,
    outcomes: &[PairedOutcome],
    unanimous_credibility: usize,
) -> Vec<VoteRecord> {
    let models = transcript.model_ids();
    let mut ts = 0;
    let mut eval = outcomes.iter().cycle();
    let mut cred = 0;
    let mut out = Vec::new();
    for item in &transcript.items {
        let map = item.slot_map.as_ref().expect("paired items carry a slot map");
        let (target, unanimous) = if let Provenance::Credibility { .. } = item.provenance {
            cred += 1;
            let genuine = map.slot_of(&Source::Genuine).expect("credibility item shows the genuine reply");
            (genuine, cred <= unanimous_credibility)
        } else {
            let o = eval.next().copied().unwrap_or(PairedOutcome {
                fitting_model: 0,
                unanimous: false,
            });
            let model = Source::Model(models[o.fitting_model].clone());
            (map.slot_of(&model).expect("model appears in its item"), o.unanimous)
        };
        for a in 0..3 {
            let fitting = if a == 1 && !unanimous { flip(target) } else { target };
            let diverse = if a == 2 { target } else { flip(target) };
            out.push(record(a, item.item_id, Vote::Paired { fitting, diverse }, &mut ts));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyword_corpus_is_balanced_and_seeded() {
        let c = keyword_corpus(20, 4);
        assert_eq!(c.len(), 200);
        let h = crate::corpus::class_stats(&c);
        assert!(Label::ALL.iter().all(|&l| h.count(l) == 20));
        assert_eq!(c, keyword_corpus(20, 4));
        assert_ne!(c, keyword_corpus(20, 5));
    }

    #[test]
    fn dialogue_generators() {
        assert_eq!(idiom_dialogue(5, 1).len(), 5);
        assert!(task_dialogue(3, 1).iter().all(|p| p.prompt.contains("book")));
    }
}
