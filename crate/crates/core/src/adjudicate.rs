//! Aggregation of annotator votes into evaluation tables.
//!
//! Percentages in tables are rounded half-up to one decimal and the
//! credibility unanimous score (CUS) to a whole number, using integer
//! arithmetic so fixtures match printed values exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::transcripts::{Experiment, Provenance, Slot, Source, Transcript, TranscriptItem};
use crate::{Error, Result};

/// Default minimum credibility score (percent) for an annotator to count as valid.
pub const DEFAULT_THETA: f64 = 70.0;

/// Human-likeness judgement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rating {
    H,
    U,
    N,
}

impl Rating {
    pub const ALL: [Rating; 3] = [Rating::H, Rating::U, Rating::N];

    fn index(self) -> usize {
        self as usize
    }
}

impl std::str::FromStr for Rating {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "H" | "h" => Ok(Rating::H),
            "U" | "u" => Ok(Rating::U),
            "N" | "n" => Ok(Rating::N),
            other => Err(Error::Votes(format!("{other:?} is not one of H, U, N"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Vote {
    Rating { rating: Rating },
    Paired { fitting: Slot, diverse: Slot },
}

impl Vote {
    pub fn experiment(&self) -> Experiment {
        match self {
            Vote::Rating { .. } => Experiment::HumanLikeness,
            Vote::Paired { .. } => Experiment::FittingDiverse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub annotator_id: String,
    pub item_id: u32,
    pub vote: Vote,
    /// Milliseconds since the Unix epoch.
    #[serde(default)]
    pub timestamp: u64,
}

/// A percentage held in tenths of a percent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Percent(u32);

impl Percent {
    /// 100·count/denominator rounded half-up to one decimal.
    pub fn from_ratio(count: usize, denominator: usize) -> Percent {
        if denominator == 0 {
            return Percent(0);
        }
        let (c, d) = (count as u64, denominator as u64);
        Percent(((2000 * c + d) / (2 * d)) as u32)
    }

    pub fn tenths(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 10.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for Percent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Ok(Percent((v * 10.0).round().max(0.0) as u32))
    }
}

/// 100·count/denominator rounded half-up to an integer.
pub fn whole_percent(count: usize, denominator: usize) -> u32 {
    if denominator == 0 {
        return 0;
    }
    let (c, d) = (count as u64, denominator as u64);
    ((200 * c + d) / (2 * d)) as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Majority<T> {
    Label(T),
    ThreeWay,
}

/// Label chosen by at least two of exactly three votes.
pub fn majority_label<T: Copy + Eq>(votes: &[T]) -> Result<Majority<T>> {
    let [a, b, c] = votes else {
        return Err(Error::Votes(format!(
            "majority needs exactly 3 votes, got {}",
            votes.len()
        )));
    };
    Ok(if a == b || a == c {
        Majority::Label(*a)
    } else if b == c {
        Majority::Label(*b)
    } else {
        Majority::ThreeWay
    })
}

pub fn is_unanimous<T: Eq>(votes: &[T]) -> bool {
    votes.windows(2).all(|w| w[0] == w[1])
}

/// Votes validated against a transcript, indexed by item then annotator.
#[derive(Debug, Clone)]
pub struct VoteTable<'t> {
    transcript: &'t Transcript,
    annotators: BTreeSet<String>,
    by_item: BTreeMap<u32, BTreeMap<String, Vote>>,
}

impl<'t> VoteTable<'t> {
    /// Rejects unknown items, votes of the wrong experiment and duplicate
    /// (annotator, item) pairs.
    pub fn new(transcript: &'t Transcript, votes: &[VoteRecord]) -> Result<VoteTable<'t>> {
        let mut table = VoteTable {
            transcript,
            annotators: BTreeSet::new(),
            by_item: BTreeMap::new(),
        };
        let mut duplicates = Vec::new();
        for v in votes {
            if transcript.item(v.item_id).is_none() {
                return Err(Error::Votes(format!(
                    "annotator {} voted on unknown item {}",
                    v.annotator_id, v.item_id
                )));
            }
            if v.vote.experiment() != transcript.experiment {
                return Err(Error::Votes(format!(
                    "annotator {} cast an experiment-{} vote on item {} of an experiment-{} transcript",
                    v.annotator_id,
                    v.vote.experiment().number(),
                    v.item_id,
                    transcript.experiment.number()
                )));
            }
            table.annotators.insert(v.annotator_id.clone());
            let slot = table.by_item.entry(v.item_id).or_default();
            if slot.insert(v.annotator_id.clone(), v.vote).is_some() {
                duplicates.push(format!("{}@{}", v.annotator_id, v.item_id));
            }
        }
        if !duplicates.is_empty() {
            return Err(Error::Votes(format!(
                "duplicate votes (annotator@item): {}",
                duplicates.join(", ")
            )));
        }
        Ok(table)
    }

    /// Restricts the table to the given annotators.
    pub fn only(mut self, annotators: &BTreeSet<String>) -> VoteTable<'t> {
        self.annotators = self.annotators.intersection(annotators).cloned().collect();
        for votes in self.by_item.values_mut() {
            votes.retain(|a, _| annotators.contains(a));
        }
        self
    }

    pub fn annotators(&self) -> &BTreeSet<String> {
        &self.annotators
    }

    /// Annotators who voted on every item.
    pub fn completed(&self) -> BTreeSet<String> {
        self.annotators
            .iter()
            .filter(|a| {
                self.transcript.items.iter().all(|i| {
                    self.by_item
                        .get(&i.item_id)
                        .is_some_and(|v| v.contains_key(*a))
                })
            })
            .cloned()
            .collect()
    }

    fn votes(&self, item: &TranscriptItem) -> Vec<Vote> {
        self.by_item
            .get(&item.item_id)
            .map(|v| v.values().copied().collect())
            .unwrap_or_default()
    }

    /// Fails unless every selected item has a vote from every annotator.
    fn require_complete<'a>(&self, items: impl Iterator<Item = &'a TranscriptItem>) -> Result<()> {
        let mut missing = Vec::new();
        for item in items {
            let votes = self.by_item.get(&item.item_id);
            for a in &self.annotators {
                if !votes.is_some_and(|v| v.contains_key(a)) {
                    missing.push(format!("{a}@{}", item.item_id));
                }
            }
        }
        if self.annotators.is_empty() {
            return Err(Error::Votes("no votes".into()));
        }
        if !missing.is_empty() {
            return Err(Error::Votes(format!(
                "missing votes (annotator@item): {}",
                missing.join(", ")
            )));
        }
        Ok(())
    }
}

fn rating(v: &Vote) -> Rating {
    match v {
        Vote::Rating { rating } => *rating,
        Vote::Paired { .. } => unreachable!("vote kinds are checked on table construction"),
    }
}

fn slots(v: &Vote) -> (Slot, Slot) {
    match v {
        Vote::Paired { fitting, diverse } => (*fitting, *diverse),
        Vote::Rating { .. } => unreachable!("vote kinds are checked on table construction"),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingCounts {
    pub h: usize,
    pub u: usize,
    pub n: usize,
    pub three_way: usize,
}

impl RatingCounts {
    fn bump(&mut self, r: Rating) {
        match r {
            Rating::H => self.h += 1,
            Rating::U => self.u += 1,
            Rating::N => self.n += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingPercents {
    pub h: Percent,
    pub u: Percent,
    pub n: Percent,
    pub three_way: Percent,
}

impl RatingPercents {
    fn of(c: &RatingCounts, d: usize) -> RatingPercents {
        RatingPercents {
            h: Percent::from_ratio(c.h, d),
            u: Percent::from_ratio(c.u, d),
            n: Percent::from_ratio(c.n, d),
            three_way: Percent::from_ratio(c.three_way, d),
        }
    }
}

/// One model's row of the human-likeness table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRow {
    pub model: String,
    pub items: usize,
    pub majority_counts: RatingCounts,
    pub unanimous_counts: RatingCounts,
    pub majority: RatingPercents,
    /// The `three_way` field is always 0 here.
    pub unanimous: RatingPercents,
}

fn group_by_model<'a>(
    items: impl Iterator<Item = &'a TranscriptItem>,
) -> Vec<(String, Vec<&'a TranscriptItem>)> {
    let mut groups: Vec<(String, Vec<&TranscriptItem>)> = Vec::new();
    for item in items {
        if let Provenance::Generated { model, .. } = &item.provenance {
            match groups.iter_mut().find(|(m, _)| m == model) {
                Some((_, g)) => g.push(item),
                None => groups.push((model.clone(), vec![item])),
            }
        }
    }
    groups
}

/// Human-likeness rows per model over the non-credibility items selected by
/// `filter`.
pub fn tally_where(
    transcript: &Transcript,
    votes: &[VoteRecord],
    filter: impl Fn(&TranscriptItem) -> bool,
) -> Result<Vec<RatingRow>> {
    expect_experiment(transcript, Experiment::HumanLikeness)?;
    let table = VoteTable::new(transcript, votes)?;
    tally_table(&table, filter)
}

/// Human-likeness rows per model over all non-credibility items.
pub fn tally(transcript: &Transcript, votes: &[VoteRecord]) -> Result<Vec<RatingRow>> {
    tally_where(transcript, votes, |_| true)
}

fn tally_table(table: &VoteTable, filter: impl Fn(&TranscriptItem) -> bool) -> Result<Vec<RatingRow>> {
    let items: Vec<&TranscriptItem> = table
        .transcript
        .items
        .iter()
        .filter(|i| !i.is_credibility() && filter(i))
        .collect();
    table.require_complete(items.iter().copied())?;
    group_by_model(items.into_iter())
        .into_iter()
        .map(|(model, items)| {
            let mut majority = RatingCounts::default();
            let mut unanimous = RatingCounts::default();
            for item in &items {
                let votes: Vec<Rating> = table.votes(item).iter().map(rating).collect();
                match majority_label(&votes)? {
                    Majority::Label(r) => majority.bump(r),
                    Majority::ThreeWay => majority.three_way += 1,
                }
                if is_unanimous(&votes) {
                    unanimous.bump(votes[0]);
                }
            }
            let d = items.len();
            Ok(RatingRow {
                model,
                items: d,
                majority: RatingPercents::of(&majority, d),
                unanimous: RatingPercents::of(&unanimous, d),
                majority_counts: majority,
                unanimous_counts: unanimous,
            })
        })
        .collect()
}

/// One model's row of the paired fitting/diverse table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedRow {
    pub model: String,
    pub items: usize,
    pub fitting_count: usize,
    pub diverse_count: usize,
    pub unanimous_fitting_count: usize,
    pub unanimous_diverse_count: usize,
    pub fitting: Percent,
    pub diverse: Percent,
    pub unanimous_fitting: Percent,
    pub unanimous_diverse: Percent,
}

/// Share of paired items whose majority picked each model's slot.
pub fn tally_paired(transcript: &Transcript, votes: &[VoteRecord]) -> Result<Vec<PairedRow>> {
    expect_experiment(transcript, Experiment::FittingDiverse)?;
    let table = VoteTable::new(transcript, votes)?;
    tally_paired_table(&table)
}

fn tally_paired_table(table: &VoteTable) -> Result<Vec<PairedRow>> {
    let items: Vec<&TranscriptItem> = table
        .transcript
        .items
        .iter()
        .filter(|i| !i.is_credibility())
        .collect();
    table.require_complete(items.iter().copied())?;

    let mut rows: Vec<PairedRow> = Vec::new();
    let row_for = |rows: &mut Vec<PairedRow>, model: &str| -> usize {
        match rows.iter().position(|r| r.model == model) {
            Some(i) => i,
            None => {
                rows.push(PairedRow {
                    model: model.to_string(),
                    items: 0,
                    fitting_count: 0,
                    diverse_count: 0,
                    unanimous_fitting_count: 0,
                    unanimous_diverse_count: 0,
                    fitting: Percent::default(),
                    diverse: Percent::default(),
                    unanimous_fitting: Percent::default(),
                    unanimous_diverse: Percent::default(),
                });
                rows.len() - 1
            }
        }
    };

    for item in &items {
        let map = item.slot_map.as_ref().ok_or_else(|| {
            Error::Votes(format!("paired item {} has no slot map", item.item_id))
        })?;
        let mut models = Vec::new();
        for slot in [Slot::Person2, Slot::Person3] {
            let Source::Model(m) = map.source(slot) else {
                return Err(Error::Votes(format!(
                    "paired item {} shows a genuine response",
                    item.item_id
                )));
            };
            models.push(row_for(&mut rows, m));
        }
        let model_at = |slot: Slot| match slot {
            Slot::Person2 => models[0],
            Slot::Person3 => models[1],
        };
        let votes = table.votes(item);
        let fitting: Vec<usize> = votes.iter().map(|v| model_at(slots(v).0)).collect();
        let diverse: Vec<usize> = votes.iter().map(|v| model_at(slots(v).1)).collect();
        if let Majority::Label(r) = majority_label(&fitting)? {
            rows[r].fitting_count += 1;
        }
        if let Majority::Label(r) = majority_label(&diverse)? {
            rows[r].diverse_count += 1;
        }
        if is_unanimous(&fitting) {
            rows[fitting[0]].unanimous_fitting_count += 1;
        }
        if is_unanimous(&diverse) {
            rows[diverse[0]].unanimous_diverse_count += 1;
        }
    }
    let d = items.len();
    for row in &mut rows {
        row.items = d;
        row.fitting = Percent::from_ratio(row.fitting_count, d);
        row.diverse = Percent::from_ratio(row.diverse_count, d);
        row.unanimous_fitting = Percent::from_ratio(row.unanimous_fitting_count, d);
        row.unanimous_diverse = Percent::from_ratio(row.unanimous_diverse_count, d);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CusResult {
    pub percent: u32,
    pub unanimous: usize,
    pub items: usize,
}

/// Credibility unanimous score: share of credibility items on which every
/// annotator cast the same vote, whether or not it is the expected one.
///
/// For paired transcripts the "more fitting" pick is compared.
pub fn cus(transcript: &Transcript, votes: &[VoteRecord]) -> Result<CusResult> {
    let table = VoteTable::new(transcript, votes)?;
    cus_table(&table)
}

fn cus_table(table: &VoteTable) -> Result<CusResult> {
    let items: Vec<&TranscriptItem> = table
        .transcript
        .items
        .iter()
        .filter(|i| i.is_credibility())
        .collect();
    if items.is_empty() {
        return Err(Error::Votes("transcript has no credibility items".into()));
    }
    table.require_complete(items.iter().copied())?;
    let unanimous = items
        .iter()
        .filter(|item| {
            let votes = table.votes(item);
            match table.transcript.experiment {
                Experiment::HumanLikeness => is_unanimous(&votes),
                Experiment::FittingDiverse => {
                    is_unanimous(&votes.iter().map(|v| slots(v).0).collect::<Vec<_>>())
                }
            }
        })
        .count();
    Ok(CusResult {
        percent: whole_percent(unanimous, items.len()),
        unanimous,
        items: items.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub value: f64,
    /// Set when expected agreement is 1 and kappa was defined as 1.
    pub degenerate: bool,
}

/// Fleiss' kappa for `ratings[item][rater]` category indices.
pub fn fleiss_kappa(ratings: &[Vec<usize>], categories: usize) -> Result<Kappa> {
    if ratings.len() < 2 {
        return Err(Error::InvalidArgument("kappa needs at least two items".into()));
    }
    let raters = ratings[0].len();
    if raters < 2 || ratings.iter().any(|r| r.len() != raters) {
        return Err(Error::InvalidArgument(
            "kappa needs the same number (at least two) of ratings per item".into(),
        ));
    }
    if ratings.iter().flatten().any(|&c| c >= categories) {
        return Err(Error::InvalidArgument("rating outside the category range".into()));
    }
    let n = raters as f64;
    let items = ratings.len() as f64;
    let mut totals = vec![0usize; categories];
    let mut p_bar = 0.0;
    for row in ratings {
        let mut counts = vec![0usize; categories];
        for &c in row {
            counts[c] += 1;
            totals[c] += 1;
        }
        let sq: usize = counts.iter().map(|&c| c * c).sum();
        p_bar += (sq as f64 - n) / (n * (n - 1.0));
    }
    p_bar /= items;
    let p_e: f64 = totals
        .iter()
        .map(|&t| {
            let p = t as f64 / (items * n);
            p * p
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-15 {
        log::warn!("all ratings fall in one category; kappa defined as 1");
        return Ok(Kappa {
            value: 1.0,
            degenerate: true,
        });
    }
    Ok(Kappa {
        value: (p_bar - p_e) / (1.0 - p_e),
        degenerate: false,
    })
}

/// Kappa over every item of the transcript: ratings for Experiment 1, the
/// "more fitting" slot for Experiment 2.
pub fn transcript_kappa(transcript: &Transcript, votes: &[VoteRecord]) -> Result<Kappa> {
    let table = VoteTable::new(transcript, votes)?;
    kappa_table(&table)
}

fn kappa_table(table: &VoteTable) -> Result<Kappa> {
    table.require_complete(table.transcript.items.iter())?;
    let (rows, categories): (Vec<Vec<usize>>, usize) = match table.transcript.experiment {
        Experiment::HumanLikeness => (
            table
                .transcript
                .items
                .iter()
                .map(|i| table.votes(i).iter().map(|v| rating(v).index()).collect())
                .collect(),
            3,
        ),
        Experiment::FittingDiverse => (
            table
                .transcript
                .items
                .iter()
                .map(|i| {
                    table
                        .votes(i)
                        .iter()
                        .map(|v| usize::from(slots(v).0 == Slot::Person3))
                        .collect()
                })
                .collect(),
            2,
        ),
    };
    fleiss_kappa(&rows, categories)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorCredibility {
    pub annotator_id: String,
    pub correct: usize,
    pub items: usize,
    pub score: Percent,
    pub theta: f64,
    pub valid: bool,
}

/// Share of credibility items the annotator judged as expected: H for
/// Experiment 1, the genuine response as more fitting for Experiment 2.
pub fn annotator_credibility(
    transcript: &Transcript,
    votes: &[VoteRecord],
    annotator_id: &str,
    theta: f64,
) -> Result<AnnotatorCredibility> {
    let table = VoteTable::new(transcript, votes)?;
    credibility_table(&table, annotator_id, theta)
}

fn credibility_table(table: &VoteTable, annotator_id: &str, theta: f64) -> Result<AnnotatorCredibility> {
    let mut correct = 0;
    let mut total = 0;
    let mut missing = Vec::new();
    for item in table.transcript.items.iter().filter(|i| i.is_credibility()) {
        total += 1;
        let Some(vote) = table
            .by_item
            .get(&item.item_id)
            .and_then(|v| v.get(annotator_id))
        else {
            missing.push(item.item_id.to_string());
            continue;
        };
        let ok = match vote {
            Vote::Rating { rating } => *rating == Rating::H,
            Vote::Paired { fitting, .. } => item
                .slot_map
                .as_ref()
                .and_then(|m| m.slot_of(&Source::Genuine))
                == Some(*fitting),
        };
        correct += usize::from(ok);
    }
    if total == 0 {
        return Err(Error::Votes("transcript has no credibility items".into()));
    }
    if !missing.is_empty() {
        return Err(Error::Votes(format!(
            "annotator {annotator_id} has no vote on credibility items {}",
            missing.join(", ")
        )));
    }
    Ok(AnnotatorCredibility {
        annotator_id: annotator_id.to_string(),
        correct,
        items: total,
        score: Percent::from_ratio(correct, total),
        theta,
        valid: correct as f64 * 100.0 >= theta * total as f64,
    })
}

fn expect_experiment(t: &Transcript, e: Experiment) -> Result<()> {
    if t.experiment != e {
        return Err(Error::Votes(format!(
            "transcript {} is experiment {}, expected {}",
            t.transcript_id,
            t.experiment.number(),
            e.number()
        )));
    }
    Ok(())
}

/// Everything derived from one transcript's votes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub transcript_id: String,
    pub experiment: Experiment,
    pub theta: f64,
    /// Annotators who voted on every item; only their votes are used.
    pub annotators: Vec<String>,
    /// Annotators with votes who have not finished.
    pub incomplete: Vec<String>,
    pub provisional: bool,
    pub notes: Vec<String>,
    pub credibility: Vec<AnnotatorCredibility>,
    pub cus: Option<CusResult>,
    pub fleiss_kappa: Option<Kappa>,
    /// Experiment 1 majority/unanimous rows over all evaluation items.
    pub rating_rows: Vec<RatingRow>,
    /// Experiment 1 rows restricted to idiom prompts.
    pub idiom_rating_rows: Vec<RatingRow>,
    /// Experiment 2 fitting/diverse rows.
    pub paired_rows: Vec<PairedRow>,
}

/// Annotators required for a final report.
pub const REQUIRED_ANNOTATORS: usize = 3;

/// Builds the full report from a raw vote log.
///
/// The report is final only when exactly three annotators completed the
/// transcript and all of them meet `theta`; otherwise it is provisional.
/// Tables need exactly three annotators; CUS and kappa need at least two.
pub fn build_report(transcript: &Transcript, votes: &[VoteRecord], theta: f64) -> Result<EvalReport> {
    let table = VoteTable::new(transcript, votes)?;
    let completed = table.completed();
    if completed.is_empty() {
        return Err(Error::Votes(format!(
            "no annotator has completed transcript {}",
            transcript.transcript_id
        )));
    }
    let incomplete: Vec<String> = table.annotators().difference(&completed).cloned().collect();
    let table = table.only(&completed);
    let mut notes = Vec::new();

    let credibility = completed
        .iter()
        .map(|a| credibility_table(&table, a, theta))
        .collect::<Result<Vec<_>>>()?;
    let (cus, kappa) = if completed.len() >= 2 {
        (Some(cus_table(&table)?), Some(kappa_table(&table)?))
    } else {
        notes.push("CUS and kappa need at least two annotators".to_string());
        (None, None)
    };

    let (mut rating_rows, mut idiom_rating_rows, mut paired_rows) = (Vec::new(), Vec::new(), Vec::new());
    if completed.len() == REQUIRED_ANNOTATORS {
        match transcript.experiment {
            Experiment::HumanLikeness => {
                rating_rows = tally_table(&table, |_| true)?;
                idiom_rating_rows =
                    tally_table(&table, |i| i.pool() == crate::transcripts::Pool::Idioms)?;
            }
            Experiment::FittingDiverse => paired_rows = tally_paired_table(&table)?,
        }
    } else {
        notes.push(format!(
            "{} completed annotators; tables need exactly {REQUIRED_ANNOTATORS}",
            completed.len()
        ));
    }
    let invalid: Vec<&str> = credibility
        .iter()
        .filter(|c| !c.valid)
        .map(|c| c.annotator_id.as_str())
        .collect();
    if !invalid.is_empty() {
        notes.push(format!(
            "annotators below the credibility threshold: {}",
            invalid.join(", ")
        ));
    }
    Ok(EvalReport {
        transcript_id: transcript.transcript_id.clone(),
        experiment: transcript.experiment,
        theta,
        provisional: completed.len() != REQUIRED_ANNOTATORS || !invalid.is_empty(),
        annotators: completed.into_iter().collect(),
        incomplete,
        notes,
        credibility,
        cus,
        fleiss_kappa: kappa,
        rating_rows,
        idiom_rating_rows,
        paired_rows,
    })
}

impl EvalReport {
    /// Plain-text tables in the layout of the published result tables.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let cus = self
            .cus
            .map(|c| c.percent.to_string())
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "transcript {} (experiment {}){}",
            self.transcript_id,
            self.experiment.number(),
            if self.provisional { " [PROVISIONAL]" } else { "" }
        );
        let rating_block = |out: &mut String, title: &str, rows: &[RatingRow], unanimous: bool| {
            let _ = writeln!(out, "{title}");
            let _ = writeln!(
                out,
                "{:<20} {:>6} {:>6} {:>6} {:>8} {:>5}",
                "Model", "H (%)", "U (%)", "N (%)", "3-way (%)", "CUS %"
            );
            for r in rows {
                let p = if unanimous { &r.unanimous } else { &r.majority };
                let three = if unanimous { "-".to_string() } else { p.three_way.to_string() };
                let _ = writeln!(
                    out,
                    "{:<20} {:>6} {:>6} {:>6} {:>8} {:>5}",
                    r.model, p.h, p.u, p.n, three, cus
                );
            }
        };
        match self.experiment {
            Experiment::HumanLikeness if !self.rating_rows.is_empty() => {
                rating_block(&mut out, "Scale (majority votes)", &self.rating_rows, false);
                rating_block(&mut out, "unanimous votes - 3/3", &self.rating_rows, true);
                rating_block(&mut out, "idioms only maj. votes", &self.idiom_rating_rows, false);
            }
            Experiment::FittingDiverse if !self.paired_rows.is_empty() => {
                let _ = writeln!(
                    out,
                    "{:<20} {:>16} {:>16} {:>5}",
                    "Model", "More fitting (%)", "More diverse (%)", "CUS %"
                );
                let _ = writeln!(out, "Scale (majority voting)");
                for r in &self.paired_rows {
                    let _ = writeln!(out, "{:<20} {:>16} {:>16} {:>5}", r.model, r.fitting, r.diverse, cus);
                }
                let _ = writeln!(out, "unanimous votes - 3/3");
                for r in &self.paired_rows {
                    let _ = writeln!(
                        out,
                        "{:<20} {:>16} {:>16} {:>5}",
                        r.model, r.unanimous_fitting, r.unanimous_diverse, cus
                    );
                }
            }
            _ => {
                let _ = writeln!(out, "(no tables: {} completed annotators)", self.annotators.len());
            }
        }
        if let Some(k) = self.fleiss_kappa {
            let _ = writeln!(out, "Fleiss kappa: {:.4}{}", k.value, if k.degenerate { " (degenerate)" } else { "" });
        }
        let _ = writeln!(out, "Annotator credibility (theta = {}):", self.theta);
        for c in &self.credibility {
            let _ = writeln!(
                out,
                "  {:<24} {:>5}% ({}/{}) {}",
                c.annotator_id,
                c.score,
                c.correct,
                c.items,
                if c.valid { "valid" } else { "INVALID" }
            );
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}
