//! Append-only vote log.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use idiombench::adjudicate::VoteRecord;

use crate::error::ServiceError;

/// Line-delimited JSON log of accepted votes plus an index keyed by
/// (annotator, item). Every append is flushed and synced before it returns.
#[derive(Debug)]
pub struct VoteStore {
    path: PathBuf,
    file: File,
    log: Vec<VoteRecord>,
    index: BTreeMap<(String, u32), usize>,
}

impl VoteStore {
    /// Opens (creating if needed) the log at `path` and replays it.
    ///
    /// A torn final line left by a crash mid-write is dropped with a warning
    /// and the file truncated back to the last complete record. Repeated
    /// (annotator, item) pairs keep the first record.
    pub fn open(path: &Path) -> Result<VoteStore, ServiceError> {
        let mut log = Vec::new();
        let mut index = BTreeMap::new();
        let mut good_len = 0u64;
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(|e| ServiceError::io(path, e))?);
            let mut offset = 0u64;
            for (n, line) in reader.split(b'\n').enumerate() {
                let line = line.map_err(|e| ServiceError::io(path, e))?;
                offset += line.len() as u64 + 1;
                if line.iter().all(u8::is_ascii_whitespace) {
                    good_len = offset;
                    continue;
                }
                match serde_json::from_slice::<VoteRecord>(&line) {
                    Ok(rec) => {
                        let key = (rec.annotator_id.clone(), rec.item_id);
                        if index.contains_key(&key) {
                            log::warn!("{}: line {}: repeated vote ignored", path.display(), n + 1);
                        } else {
                            index.insert(key, log.len());
                            log.push(rec);
                        }
                        good_len = offset;
                    }
                    Err(e) => {
                        log::warn!("{}: line {}: unreadable record dropped ({e})", path.display(), n + 1);
                    }
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| ServiceError::io(path, e))?;
        let actual = file.metadata().map_err(|e| ServiceError::io(path, e))?.len();
        if actual > good_len {
            file.set_len(good_len).map_err(|e| ServiceError::io(path, e))?;
        }
        Ok(VoteStore {
            path: path.to_path_buf(),
            file,
            log,
            index,
        })
    }

    pub fn contains(&self, annotator_id: &str, item_id: u32) -> bool {
        self.index.contains_key(&(annotator_id.to_string(), item_id))
    }

    /// Appends `rec` durably. Fails with a conflict if the pair already voted.
    pub fn append(&mut self, rec: VoteRecord) -> Result<(), ServiceError> {
        let key = (rec.annotator_id.clone(), rec.item_id);
        if self.index.contains_key(&key) {
            return Err(ServiceError::Conflict(format!(
                "annotator {} already voted on item {}",
                rec.annotator_id, rec.item_id
            )));
        }
        let mut line = serde_json::to_vec(&rec).map_err(|e| ServiceError::Internal(e.to_string()))?;
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|_| self.file.flush())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| ServiceError::io(&self.path, e))?;
        self.index.insert(key, self.log.len());
        self.log.push(rec);
        Ok(())
    }

    /// Accepted votes in append order.
    pub fn records(&self) -> &[VoteRecord] {
        &self.log
    }

    pub fn count_for(&self, annotator_id: &str) -> usize {
        self.log.iter().filter(|r| r.annotator_id == annotator_id).count()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Reads a vote log without opening it for writing.
pub fn read_log(path: &Path) -> Result<Vec<VoteRecord>, ServiceError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let reader = BufReader::new(File::open(path).map_err(|e| ServiceError::io(path, e))?);
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| ServiceError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let Ok(rec) = serde_json::from_str::<VoteRecord>(&line) else {
            log::warn!("{}: unreadable record skipped", path.display());
            continue;
        };
        if seen.insert((rec.annotator_id.clone(), rec.item_id)) {
            out.push(rec);
        }
    }
    Ok(out)
}
