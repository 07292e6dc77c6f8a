//! Transcript hosting and vote collection, independent of the transport.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use idiombench::adjudicate::{build_report, EvalReport, Vote, VoteRecord};
use idiombench::transcripts::{
    load_blinded, load_transcript, save_transcript, BlindedItem, BlindedTranscript,
    Experiment, Transcript,
};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::store::{read_log, VoteStore};

type Result<T> = std::result::Result<T, ServiceError>;

/// Where a transcript's files live under the data directory.
#[derive(Debug, Clone)]
pub struct TranscriptPaths {
    pub public: PathBuf,
    pub key: PathBuf,
    pub votes: PathBuf,
    pub closed: PathBuf,
}

impl TranscriptPaths {
    pub fn new(data_dir: &Path, id: &str) -> TranscriptPaths {
        let t = data_dir.join("transcripts");
        TranscriptPaths {
            public: t.join(format!("{id}.public.jsonl")),
            key: t.join(format!("{id}.key.jsonl")),
            closed: t.join(format!("{id}.closed")),
            votes: data_dir.join("votes").join(format!("{id}.jsonl")),
        }
    }
}

/// Ids become file names, so only a conservative character set is allowed.
pub fn validate_id(kind: &str, id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 64
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(ServiceError::BadRequest(format!(
            "{kind} id {id:?} must be 1-64 characters from [A-Za-z0-9._-]"
        )))
    }
}

struct Hosted {
    blinded: BlindedTranscript,
    closed: bool,
    votes: VoteStore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextItem {
    pub transcript_id: String,
    pub experiment: Experiment,
    pub instruction: String,
    pub answered: usize,
    pub total: usize,
    pub completed: bool,
    /// `None` once every item has been answered.
    pub item: Option<BlindedItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteSubmission {
    pub annotator_id: String,
    pub item_id: u32,
    pub vote: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteAck {
    pub accepted: bool,
    pub answered: usize,
    pub total: usize,
    pub completed: bool,
    pub next_item_id: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorProgress {
    pub annotator_id: String,
    pub answered: usize,
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub transcript_id: String,
    pub total: usize,
    pub closed: bool,
    pub votes: usize,
    pub annotators: Vec<AnnotatorProgress>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSummary {
    pub transcript_id: String,
    pub experiment: Experiment,
    pub items: usize,
    pub closed: bool,
}

#[derive(Serialize, Deserialize)]
struct AnnotatorRecord {
    annotator_id: String,
}

/// All hosted transcripts, their vote logs and the annotator registry.
pub struct AnnotationService {
    dir: PathBuf,
    annotators: BTreeSet<String>,
    annotator_log: File,
    transcripts: BTreeMap<String, Hosted>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn append_synced(file: &mut File, path: &Path, line: &str) -> Result<()> {
    file.write_all(line.as_bytes())
        .and_then(|_| file.write_all(b"\n"))
        .and_then(|_| file.sync_data())
        .map_err(|e| ServiceError::io(path, e))
}

impl AnnotationService {
    /// Opens the data directory, replaying the annotator registry and every
    /// vote log.
    pub fn open(dir: &Path) -> Result<AnnotationService> {
        for sub in ["transcripts", "votes"] {
            fs::create_dir_all(dir.join(sub)).map_err(|e| ServiceError::io(dir, e))?;
        }
        let reg_path = dir.join("annotators.jsonl");
        let mut annotators = BTreeSet::new();
        if reg_path.exists() {
            let f = File::open(&reg_path).map_err(|e| ServiceError::io(&reg_path, e))?;
            for line in BufReader::new(f).lines() {
                let line = line.map_err(|e| ServiceError::io(&reg_path, e))?;
                match serde_json::from_str::<AnnotatorRecord>(&line) {
                    Ok(r) => {
                        annotators.insert(r.annotator_id);
                    }
                    Err(_) if line.trim().is_empty() => {}
                    Err(e) => log::warn!("{}: skipping unreadable line ({e})", reg_path.display()),
                }
            }
        }
        let annotator_log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&reg_path)
            .map_err(|e| ServiceError::io(&reg_path, e))?;

        let mut svc = AnnotationService {
            dir: dir.to_path_buf(),
            annotators,
            annotator_log,
            transcripts: BTreeMap::new(),
        };
        let tdir = dir.join("transcripts");
        let mut ids: Vec<String> = fs::read_dir(&tdir)
            .map_err(|e| ServiceError::io(&tdir, e))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                e.file_name()
                    .to_str()
                    .and_then(|n| n.strip_suffix(".public.jsonl"))
                    .map(str::to_string)
            })
            .collect();
        ids.sort();
        for id in ids {
            svc.host(&id)?;
        }
        Ok(svc)
    }

    fn host(&mut self, id: &str) -> Result<()> {
        let paths = TranscriptPaths::new(&self.dir, id);
        let blinded = load_blinded(&paths.public)?;
        let votes = VoteStore::open(&paths.votes)?;
        log::info!("hosting transcript {id} ({} items, {} votes)", blinded.items.len(), votes.records().len());
        self.transcripts.insert(
            id.to_string(),
            Hosted {
                blinded,
                closed: paths.closed.exists(),
                votes,
            },
        );
        Ok(())
    }

    pub fn data_dir(&self) -> &Path {
        &self.dir
    }

    pub fn transcript_ids(&self) -> Vec<String> {
        self.transcripts.keys().cloned().collect()
    }

    /// Registers an annotator under `requested` or a generated id.
    pub fn register(&mut self, requested: Option<String>) -> Result<String> {
        let id = match requested {
            Some(id) => {
                validate_id("annotator", &id)?;
                if self.annotators.contains(&id) {
                    return Err(ServiceError::Conflict(format!("annotator {id} already registered")));
                }
                id
            }
            None => (self.annotators.len() + 1..)
                .map(|n| format!("annotator-{n}"))
                .find(|c| !self.annotators.contains(c))
                .expect("unbounded range"),
        };
        let line = serde_json::to_string(&AnnotatorRecord { annotator_id: id.clone() })
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        let path = self.dir.join("annotators.jsonl");
        append_synced(&mut self.annotator_log, &path, &line)?;
        self.annotators.insert(id.clone());
        Ok(id)
    }

    /// Stores a new transcript (public view and answer key) and starts hosting it.
    pub fn create_transcript(&mut self, transcript: &Transcript) -> Result<TranscriptSummary> {
        validate_id("transcript", &transcript.transcript_id)?;
        if transcript.items.is_empty() {
            return Err(ServiceError::BadRequest("transcript has no items".into()));
        }
        let id = &transcript.transcript_id;
        if self.transcripts.contains_key(id) {
            return Err(ServiceError::Conflict(format!("transcript {id} already exists")));
        }
        let paths = TranscriptPaths::new(&self.dir, id);
        save_transcript(transcript, &paths.public, &paths.key)?;
        self.host(id)?;
        self.summary(id)
    }

    pub fn summary(&self, id: &str) -> Result<TranscriptSummary> {
        let h = self.hosted(id)?;
        Ok(TranscriptSummary {
            transcript_id: id.to_string(),
            experiment: h.blinded.experiment,
            items: h.blinded.items.len(),
            closed: h.closed,
        })
    }

    /// Stops accepting votes for the transcript.
    pub fn close(&mut self, id: &str) -> Result<TranscriptSummary> {
        let paths = TranscriptPaths::new(&self.dir, id);
        let h = self
            .transcripts
            .get_mut(id)
            .ok_or_else(|| ServiceError::NotFound(format!("unknown transcript {id}")))?;
        File::create(&paths.closed)
            .and_then(|f| f.sync_all())
            .map_err(|e| ServiceError::io(&paths.closed, e))?;
        h.closed = true;
        self.summary(id)
    }

    fn hosted(&self, id: &str) -> Result<&Hosted> {
        self.transcripts
            .get(id)
            .ok_or_else(|| ServiceError::NotFound(format!("unknown transcript {id}")))
    }

    fn require_annotator(&self, annotator_id: &str) -> Result<()> {
        if self.annotators.contains(annotator_id) {
            Ok(())
        } else {
            Err(ServiceError::NotFound(format!("unknown annotator {annotator_id}")))
        }
    }

    /// Instruction and the annotator's next unanswered item.
    pub fn next(&self, id: &str, annotator_id: &str) -> Result<NextItem> {
        self.require_annotator(annotator_id)?;
        let h = self.hosted(id)?;
        let answered = h.votes.count_for(annotator_id);
        let total = h.blinded.items.len();
        Ok(NextItem {
            transcript_id: id.to_string(),
            experiment: h.blinded.experiment,
            instruction: h.blinded.instruction.clone(),
            answered,
            total,
            completed: answered == total,
            item: h.blinded.items.get(answered).cloned(),
        })
    }

    /// Validates and durably records one vote. Items must be answered in
    /// transcript order and cannot be revised.
    pub fn record_vote(&mut self, id: &str, sub: VoteSubmission) -> Result<VoteAck> {
        self.require_annotator(&sub.annotator_id)?;
        let h = self
            .transcripts
            .get_mut(id)
            .ok_or_else(|| ServiceError::NotFound(format!("unknown transcript {id}")))?;
        let Some(pos) = h.blinded.items.iter().position(|i| i.item_id == sub.item_id) else {
            return Err(ServiceError::NotFound(format!("transcript {id} has no item {}", sub.item_id)));
        };
        let vote: Vote = serde_json::from_value(sub.vote.clone()).map_err(|_| {
            ServiceError::BadRequest(format!(
                "vote {} is not one of {}",
                sub.vote,
                match h.blinded.experiment {
                    Experiment::HumanLikeness => r#"{"rating": "H" | "U" | "N"}"#,
                    Experiment::FittingDiverse => r#"{"fitting": 2 | 3, "diverse": 2 | 3}"#,
                }
            ))
        })?;
        if vote.experiment() != h.blinded.experiment {
            return Err(ServiceError::BadRequest(format!(
                "transcript {id} takes experiment-{} votes",
                h.blinded.experiment.number()
            )));
        }
        if h.closed {
            return Err(ServiceError::Conflict(format!("transcript {id} is closed")));
        }
        if h.votes.contains(&sub.annotator_id, sub.item_id) {
            return Err(ServiceError::Conflict(format!(
                "annotator {} already voted on item {}",
                sub.annotator_id, sub.item_id
            )));
        }
        let cursor = h.votes.count_for(&sub.annotator_id);
        if pos != cursor {
            return Err(ServiceError::Conflict(format!(
                "item {} is not next for annotator {} (expected item {})",
                sub.item_id, sub.annotator_id, h.blinded.items[cursor].item_id
            )));
        }
        h.votes.append(VoteRecord {
            annotator_id: sub.annotator_id,
            item_id: sub.item_id,
            vote,
            timestamp: now_ms(),
        })?;
        let total = h.blinded.items.len();
        let answered = cursor + 1;
        Ok(VoteAck {
            accepted: true,
            answered,
            total,
            completed: answered == total,
            next_item_id: h.blinded.items.get(answered).map(|i| i.item_id),
        })
    }

    pub fn progress(&self, id: &str) -> Result<Progress> {
        let h = self.hosted(id)?;
        let total = h.blinded.items.len();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for r in h.votes.records() {
            *counts.entry(&r.annotator_id).or_default() += 1;
        }
        Ok(Progress {
            transcript_id: id.to_string(),
            total,
            closed: h.closed,
            votes: h.votes.records().len(),
            annotators: counts
                .into_iter()
                .map(|(a, n)| AnnotatorProgress {
                    annotator_id: a.to_string(),
                    answered: n,
                    completed: n == total,
                })
                .collect(),
        })
    }

    /// Votes accepted so far, in log order.
    pub fn votes(&self, id: &str) -> Result<Vec<VoteRecord>> {
        Ok(self.hosted(id)?.votes.records().to_vec())
    }

    /// Full evaluation report; the answer key is read only here.
    pub fn report(&self, id: &str, theta: f64) -> Result<EvalReport> {
        let h = self.hosted(id)?;
        let paths = TranscriptPaths::new(&self.dir, id);
        let transcript = load_transcript(&paths.public, &paths.key)?;
        report_for(&transcript, h.votes.records(), theta)
    }
}

fn report_for(transcript: &Transcript, votes: &[VoteRecord], theta: f64) -> Result<EvalReport> {
    if !(0.0..=100.0).contains(&theta) {
        return Err(ServiceError::BadRequest(format!("theta must be within [0, 100], got {theta}")));
    }
    build_report(transcript, votes, theta).map_err(|e| match e {
        idiombench::Error::Votes(m) => ServiceError::Conflict(m),
        other => other.into(),
    })
}

/// Recomputes a report straight from the files on disk.
pub fn batch_report(data_dir: &Path, id: &str, theta: f64) -> Result<EvalReport> {
    let paths = TranscriptPaths::new(data_dir, id);
    if !paths.public.exists() {
        return Err(ServiceError::NotFound(format!("unknown transcript {id}")));
    }
    let transcript = load_transcript(&paths.public, &paths.key)?;
    let votes = read_log(&paths.votes)?;
    report_for(&transcript, &votes, theta)
}
