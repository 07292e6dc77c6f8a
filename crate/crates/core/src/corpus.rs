//! Idioms corpus ingestion, cleaning and deterministic splitting.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Figure-of-speech class of a corpus sample.
///
/// The declaration order is the canonical class order used for confusion
/// matrices, histograms and tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Euphemism,
    Literal,
    Metaphor,
    Personification,
    Simile,
    Parallelism,
    Paradox,
    Hyperbole,
    Oxymoron,
    Irony,
}

impl Label {
    pub const COUNT: usize = 10;

    pub const ALL: [Label; Label::COUNT] = [
        Label::Euphemism,
        Label::Literal,
        Label::Metaphor,
        Label::Personification,
        Label::Simile,
        Label::Parallelism,
        Label::Paradox,
        Label::Hyperbole,
        Label::Oxymoron,
        Label::Irony,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Euphemism => "euphemism",
            Label::Literal => "literal",
            Label::Metaphor => "metaphor",
            Label::Personification => "personification",
            Label::Simile => "simile",
            Label::Parallelism => "parallelism",
            Label::Paradox => "paradox",
            Label::Hyperbole => "hyperbole",
            Label::Oxymoron => "oxymoron",
            Label::Irony => "irony",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Error returned when a string is not one of the ten class names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseLabelError(pub String);

impl fmt::Display for ParseLabelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown label {:?}", self.0)
    }
}

impl std::error::Error for ParseLabelError {}

impl FromStr for Label {
    type Err = ParseLabelError;

    /// Case-insensitive; surrounding whitespace is ignored.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let wanted = s.trim().to_lowercase();
        Label::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == wanted)
            .ok_or_else(|| ParseLabelError(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdiomSample {
    pub text: String,
    pub label: Label,
    pub case_id: String,
}

/// On-disk record layout for corpus files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    /// Comma-separated with a header row.
    Csv,
    /// One JSON object per line.
    Jsonl,
}

impl RecordFormat {
    /// Picks the format from the file extension, falling back to sniffing the
    /// first non-blank line (`{` means JSON lines).
    pub fn detect(path: &Path) -> Result<RecordFormat> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => return Ok(RecordFormat::Csv),
            Some("jsonl") | Some("ndjson") => return Ok(RecordFormat::Jsonl),
            _ => {}
        }
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if !line.is_empty() {
                return Ok(if line.starts_with('{') {
                    RecordFormat::Jsonl
                } else {
                    RecordFormat::Csv
                });
            }
        }
        Err(Error::EmptyFile {
            path: path.to_path_buf(),
        })
    }
}

impl FromStr for RecordFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(RecordFormat::Csv),
            "jsonl" | "ndjson" => Ok(RecordFormat::Jsonl),
            other => Err(Error::InvalidArgument(format!(
                "unknown record format {other:?} (expected csv or jsonl)"
            ))),
        }
    }
}

/// Reads typed records from a CSV (with header) or JSON-lines file.
///
/// Each record comes back with its 1-based data row number. Blank lines in
/// JSON-lines files are skipped but still counted.
pub fn read_records<T: DeserializeOwned>(
    path: &Path,
    format: RecordFormat,
) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let record_err = |row: usize, message: String| Error::Record {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut out = Vec::new();
    match format {
        RecordFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .flexible(false)
                .from_reader(file);
            for (i, rec) in reader.deserialize::<T>().enumerate() {
                let rec = rec.map_err(|e| record_err(i + 1, e.to_string()))?;
                out.push((i + 1, rec));
            }
        }
        RecordFormat::Jsonl => {
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec = serde_json::from_str::<T>(&line)
                    .map_err(|e| record_err(i + 1, e.to_string()))?;
                out.push((i + 1, rec));
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    Ok(out)
}

/// Writes records in the given format, creating or truncating `path`.
pub fn write_records<T: Serialize>(path: &Path, format: RecordFormat, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    match format {
        RecordFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            for rec in records {
                w.serialize(rec).map_err(|e| Error::Record {
                    path: path.to_path_buf(),
                    row: 0,
                    message: e.to_string(),
                })?;
            }
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        RecordFormat::Jsonl => {
            for rec in records {
                serde_json::to_writer(&mut writer, rec)?;
                writer.write_all(b"\n").map_err(|e| Error::io(path, e))?;
            }
            writer.flush().map_err(|e| Error::io(path, e))?;
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct RawSample {
    text: String,
    label: String,
    case_id: String,
}

/// Loads a corpus file, validating labels and cleaning each text with
/// [`preprocess`]. Record order is preserved.
pub fn ingest(path: &Path, format: RecordFormat) -> Result<Vec<IdiomSample>> {
    let rows = read_records::<RawSample>(path, format)?;
    rows.into_iter()
        .map(|(row, raw)| {
            let label = raw.label.parse::<Label>().map_err(|_| Error::UnknownLabel {
                row,
                label: raw.label.clone(),
            })?;
            let text = preprocess(&raw.text);
            if text.is_empty() {
                return Err(Error::Record {
                    path: path.to_path_buf(),
                    row,
                    message: "text is empty after preprocessing".into(),
                });
            }
            Ok(IdiomSample {
                text,
                label,
                case_id: raw.case_id,
            })
        })
        .collect()
}

fn is_kept(c: char) -> bool {
    c.is_alphabetic() || c.is_whitespace() || c == '\'' || c == '\u{2019}'
}

/// Lowercases, strips `<...>` markup, drops digits and every character other
/// than letters, whitespace and apostrophes, then collapses whitespace.
pub fn preprocess(text: &str) -> String {
    let mut untagged = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('<') {
        untagged.push_str(&rest[..open]);
        match rest[open..].find('>') {
            Some(close) => rest = &rest[open + close + 1..],
            None => {
                // unterminated tag: the '<' is dropped by the character filter
                untagged.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    untagged.push_str(rest);

    let filtered: String = untagged.to_lowercase().chars().filter(|&c| is_kept(c)).collect();
    filtered.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Train/dev/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const EIGHTY_TEN_TEN: SplitRatios = SplitRatios {
        train: 0.8,
        dev: 0.1,
        test: 0.1,
    };

    pub fn new(train: f64, dev: f64, test: f64) -> Result<SplitRatios> {
        let r = SplitRatios { train, dev, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.dev, self.test];
        if parts.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "split ratios must be non-negative, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split ratios must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }

    /// Part sizes for `n` samples: floor for train and dev, remainder to test.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // the epsilon absorbs products like 10 * 0.7 landing just under an integer
        let part = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
        let train = part(self.train).min(n);
        let dev = part(self.dev).min(n - train);
        (train, dev, n - train - dev)
    }
}

impl FromStr for SplitRatios {
    type Err = Error;

    /// Parses `"80:10:10"`, `"0.8,0.1,0.1"` and similar; parts are normalised
    /// by their sum so integer percentages work.
    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split([':', ','])
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad split ratio {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let [a, b, c] = parts[..] else {
            return Err(Error::InvalidArgument(format!(
                "split ratio needs three parts, got {s:?}"
            )));
        };
        let total = a + b + c;
        if !(total > 0.0) {
            return Err(Error::InvalidArgument(format!("bad split ratio {s:?}")));
        }
        SplitRatios::new(a / total, b / total, c / total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<IdiomSample>,
    pub dev: Vec<IdiomSample>,
    pub test: Vec<IdiomSample>,
    pub seed: u64,
    pub ratios: SplitRatios,
}

/// Shuffles with a seeded permutation, then cuts into train/dev/test.
pub fn split(corpus: &[IdiomSample], ratios: SplitRatios, seed: u64) -> Result<CorpusSplit> {
    let (train, dev, test) = split_items(corpus, ratios, seed)?;
    Ok(CorpusSplit {
        train,
        dev,
        test,
        seed,
        ratios,
    })
}

/// [`split`] for arbitrary items.
pub fn split_items<T: Clone>(
    items: &[T],
    ratios: SplitRatios,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    ratios.validate()?;
    if items.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (n_train, n_dev, _) = ratios.sizes(items.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    Ok((
        pick(&order[..n_train]),
        pick(&order[n_train..n_train + n_dev]),
        pick(&order[n_train + n_dev..]),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub name: String,
    pub seed: u64,
    pub ratios: SplitRatios,
    pub format: RecordFormat,
    pub sizes: [usize; 3],
    pub files: [PathBuf; 3],
}

/// Writes `<name>.train`, `<name>.dev`, `<name>.test` and
/// `<name>.manifest.json` into `dir`.
pub fn write_split(
    split: &CorpusSplit,
    dir: &Path,
    name: &str,
    format: RecordFormat,
) -> Result<SplitManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let parts = [
        ("train", &split.train),
        ("dev", &split.dev),
        ("test", &split.test),
    ];
    let mut files: [PathBuf; 3] = Default::default();
    for (slot, (suffix, samples)) in files.iter_mut().zip(parts) {
        let path = dir.join(format!("{name}.{suffix}"));
        write_records(&path, format, samples)?;
        *slot = path;
    }
    let manifest = SplitManifest {
        name: name.to_string(),
        seed: split.seed,
        ratios: split.ratios,
        format,
        sizes: [split.train.len(), split.dev.len(), split.test.len()],
        files,
    };
    let path = dir.join(format!("{name}.manifest.json"));
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Per-class sample counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassHistogram {
    counts: [usize; Label::COUNT],
    pub total: usize,
}

impl ClassHistogram {
    pub fn count(&self, label: Label) -> usize {
        self.counts[label.index()]
    }

    /// Fraction of samples carrying `label`; 0 for an empty histogram.
    pub fn share(&self, label: Label) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(label) as f64 / self.total as f64
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Label, usize)> + '_ {
        Label::ALL.iter().map(|&l| (l, self.count(l)))
    }
}

impl fmt::Display for ClassHistogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (label, count) in self.iter() {
            writeln!(
                f,
                "{:<16} {:>7} {:>7.2}%",
                label.as_str(),
                count,
                100.0 * self.share(label)
            )?;
        }
        write!(f, "{:<16} {:>7}", "total", self.total)
    }
}

pub fn class_stats(corpus: &[IdiomSample]) -> ClassHistogram {
    let mut hist = ClassHistogram::default();
    for sample in corpus {
        hist.counts[sample.label.index()] += 1;
    }
    hist.total = corpus.len();
    hist
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(text: &str, label: Label) -> IdiomSample {
        IdiomSample {
            text: text.into(),
            label,
            case_id: "case".into(),
        }
    }

    #[test]
    fn preprocess_examples() {
        assert_eq!(preprocess("Carry the day"), "carry the day");
        assert_eq!(preprocess("<b>Time flies</b> in 2022!"), "time flies in");
        assert_eq!(preprocess(""), "");
        assert_eq!(
            preprocess("  There'd  be\tno one\n"),
            "there'd be no one"
        );
        assert_eq!(preprocess("a < b"), "a b");
    }

    #[test]
    fn label_parsing() {
        assert_eq!("Metaphor".parse::<Label>().unwrap(), Label::Metaphor);
        assert_eq!(" irony ".parse::<Label>().unwrap(), Label::Irony);
        assert!("sarcasm".parse::<Label>().is_err());
        for l in Label::ALL {
            assert_eq!(Label::from_index(l.index()), Some(l));
        }
    }

    #[test]
    fn paper_corpus_split_sizes() {
        assert_eq!(
            SplitRatios::EIGHTY_TEN_TEN.sizes(20_174),
            (16_139, 2_017, 2_018)
        );
    }

    #[test]
    fn degenerate_ratios_put_everything_in_train() {
        let corpus: Vec<_> = (0..10).map(|i| sample(&format!("t{i}"), Label::Literal)).collect();
        let s = split(&corpus, SplitRatios::new(1.0, 0.0, 0.0).unwrap(), 3).unwrap();
        assert_eq!(s.train.len(), 10);
        assert!(s.dev.is_empty() && s.test.is_empty());
    }

    #[test]
    fn split_rejects_bad_input() {
        let corpus = vec![sample("a", Label::Literal)];
        assert!(split(&[], SplitRatios::EIGHTY_TEN_TEN, 1).is_err());
        let bad = SplitRatios {
            train: 0.5,
            dev: 0.1,
            test: 0.1,
        };
        assert!(split(&corpus, bad, 1).is_err());
        assert!(SplitRatios::new(0.9, 0.2, -0.1).is_err());
    }

    #[test]
    fn ratio_strings() {
        assert_eq!("80:10:10".parse::<SplitRatios>().unwrap().sizes(20_174).0, 16_139);
        let r: SplitRatios = "0.8,0.1,0.1".parse().unwrap();
        assert!((r.train - 0.8).abs() < 1e-12);
        assert!("80:20".parse::<SplitRatios>().is_err());
    }

    #[test]
    fn class_stats_counts() {
        assert_eq!(class_stats(&[]).total, 0);
        assert!(class_stats(&[]).iter().all(|(_, c)| c == 0));
        let hist = class_stats(&[
            sample("a", Label::Metaphor),
            sample("b", Label::Simile),
            sample("c", Label::Metaphor),
        ]);
        assert_eq!(hist.count(Label::Metaphor), 2);
        assert_eq!(hist.count(Label::Simile), 1);
        assert_eq!(hist.total, 3);
    }

    proptest! {
        #[test]
        fn preprocess_is_idempotent(s in "\\PC{0,60}") {
            let once = preprocess(&s);
            prop_assert_eq!(preprocess(&once), once);
        }

        #[test]
        fn split_is_a_partition(n in 1usize..300, seed in any::<u64>(), a in 0u32..10, b in 0u32..10) {
            let total = (a + b + 1) as f64;
            let ratios = SplitRatios::new(a as f64 / total, b as f64 / total, 1.0 / total).unwrap();
            let corpus: Vec<_> = (0..n).map(|i| sample(&format!("s{i}"), Label::ALL[i % 10])).collect();
            let s = split(&corpus, ratios, seed).unwrap();
            prop_assert_eq!((s.train.len(), s.dev.len(), s.test.len()), ratios.sizes(n));
            let mut seen: Vec<_> = s.train.iter().chain(&s.dev).chain(&s.test).map(|x| x.text.clone()).collect();
            seen.sort();
            let mut expected: Vec<_> = corpus.iter().map(|x| x.text.clone()).collect();
            expected.sort();
            prop_assert_eq!(seen, expected);
            let other = split(&corpus, ratios, seed.wrapping_add(1)).unwrap();
            prop_assert_eq!(other.train.len(), s.train.len());
        }

        #[test]
        fn histogram_total_matches_length(labels in proptest::collection::vec(0usize..10, 0..200)) {
            let corpus: Vec<_> = labels.iter().map(|&i| sample("x", Label::ALL[i])).collect();
            let hist = class_stats(&corpus);
            prop_assert_eq!(hist.total, corpus.len());
            prop_assert_eq!(hist.iter().map(|(_, c)| c).sum::<usize>(), corpus.len());
        }
    }
}
