//! Note ingestion, dataset splitting, prepared-example files and length
//! statistics.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::input_builder::TargetKind;
use crate::tokenizer::Tokenizer;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("duplicate hadm_id {id:?} at record {index}")]
    DuplicateId { id: String, index: usize },
    #[error("malformed record {index}: {reason}")]
    MalformedRecord { index: usize, reason: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    BadFraction(String),
}

impl CorpusError {
    fn io(path: &Path, source: io::Error) -> Self {
        CorpusError::Io { path: path.display().to_string(), source }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DischargeNote {
    pub hadm_id: String,
    pub note_id: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum NoteFormat {
    Csv,
    Jsonl,
}

impl NoteFormat {
    /// Guesses the format from the file extension; anything but `.jsonl`
    /// and `.json` is read as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => NoteFormat::Jsonl,
            _ => NoteFormat::Csv,
        }
    }
}

const REQUIRED_COLUMNS: [&str; 3] = ["hadm_id", "note_id", "text"];

pub fn load_notes(path: &Path, format: NoteFormat) -> Result<Vec<DischargeNote>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let notes = match format {
        NoteFormat::Csv => read_csv_notes(file)?,
        NoteFormat::Jsonl => read_jsonl_notes(BufReader::new(file))?,
    };
    check_notes(&notes)?;
    Ok(notes)
}

fn read_csv_notes<R: io::Read>(reader: R) -> Result<Vec<DischargeNote>, CorpusError> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| CorpusError::MalformedRecord { index: 0, reason: e.to_string() })?
        .clone();
    // A zero-byte file has no header row and no records.
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let mut columns = [0usize; 3];
    for (slot, name) in columns.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))?;
    }
    let mut notes = Vec::new();
    for (index, record) in csv.records().enumerate() {
        let record = record.map_err(|e| CorpusError::MalformedRecord { index, reason: e.to_string() })?;
        let field = |i: usize| {
            record.get(columns[i]).map(str::to_string).ok_or_else(|| CorpusError::MalformedRecord {
                index,
                reason: format!("missing field {:?}", REQUIRED_COLUMNS[i]),
            })
        };
        notes.push(DischargeNote { hadm_id: field(0)?, note_id: field(1)?, text: field(2)? });
    }
    Ok(notes)
}

fn read_jsonl_notes<R: BufRead>(reader: R) -> Result<Vec<DischargeNote>, CorpusError> {
    let mut notes = Vec::new();
    for (index, line) in non_blank_lines(reader) {
        let line = line.map_err(|e| CorpusError::MalformedRecord { index, reason: e.to_string() })?;
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| CorpusError::MalformedRecord { index, reason: e.to_string() })?;
        let object = value.as_object().ok_or_else(|| CorpusError::MalformedRecord {
            index,
            reason: "record is not a JSON object".into(),
        })?;
        let mut fields = REQUIRED_COLUMNS.iter().map(|key| match object.get(*key) {
            Some(serde_json::Value::String(s)) => Ok(s.clone()),
            // Identifiers are often numeric in exported tables.
            Some(serde_json::Value::Number(n)) if *key != "text" => Ok(n.to_string()),
            Some(_) => Err(CorpusError::MalformedRecord { index, reason: format!("{key:?} is not a string") }),
            None => Err(CorpusError::MissingColumn(key.to_string())),
        });
        notes.push(DischargeNote {
            hadm_id: fields.next().unwrap()?,
            note_id: fields.next().unwrap()?,
            text: fields.next().unwrap()?,
        });
    }
    Ok(notes)
}

/// Lines that hold something besides whitespace, numbered from zero in
/// record order.
fn non_blank_lines<R: BufRead>(reader: R) -> impl Iterator<Item = (usize, io::Result<String>)> {
    reader
        .lines()
        .filter(|line| line.as_ref().map(|l| !l.trim().is_empty()).unwrap_or(true))
        .enumerate()
}

fn check_notes(notes: &[DischargeNote]) -> Result<(), CorpusError> {
    let mut seen = HashSet::with_capacity(notes.len());
    for (index, note) in notes.iter().enumerate() {
        if note.text.trim().is_empty() {
            return Err(CorpusError::MalformedRecord { index, reason: "empty note text".into() });
        }
        if !seen.insert(note.hadm_id.as_str()) {
            return Err(CorpusError::DuplicateId { id: note.hadm_id.clone(), index });
        }
    }
    Ok(())
}

/// Writes notes as JSONL with the same keys `load_notes` reads.
pub fn write_notes(notes: &[DischargeNote], path: &Path) -> Result<(), CorpusError> {
    write_jsonl(notes, path)
}

/// Fraction of notes assigned to the training side, kept as a ratio so the
/// split size is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub numerator: u64,
    pub denominator: u64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { numerator: 4, denominator: 5, seed: 0 }
    }
}

impl SplitSpec {
    pub fn new(numerator: u64, denominator: u64, seed: u64) -> Result<Self, CorpusError> {
        if numerator == 0 || numerator >= denominator {
            return Err(CorpusError::BadFraction(format!("{numerator}/{denominator}")));
        }
        Ok(Self { numerator, denominator, seed })
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// `round(n * numerator / denominator)`, halves rounded up.
    pub fn train_size(&self, n: usize) -> usize {
        let n = n as u128;
        ((2 * n * self.numerator as u128 + self.denominator as u128) / (2 * self.denominator as u128)) as usize
    }
}

impl fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

/// Parses `"4/5"` or a decimal such as `"0.8"`; the seed is left at zero.
impl FromStr for SplitSpec {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CorpusError::BadFraction(s.to_string());
        if let Some((num, den)) = s.split_once('/') {
            let num = num.trim().parse().map_err(|_| bad())?;
            let den = den.trim().parse().map_err(|_| bad())?;
            return SplitSpec::new(num, den, 0);
        }
        let digits = s.trim().strip_prefix("0.").ok_or_else(bad)?;
        if digits.is_empty() || digits.len() > 18 || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let num: u64 = digits.parse().map_err(|_| bad())?;
        SplitSpec::new(num, 10u64.pow(digits.len() as u32), 0)
    }
}

/// Order in which `ids` are dealt into the split: ids are sorted, then
/// shuffled with a Fisher-Yates pass driven by ChaCha8 seeded from
/// `seed` (`j = next_u64() % (i + 1)` for `i` from `n - 1` down to 1).
pub fn shuffled_order(ids: &[&str], seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|a, b| ids[*a].cmp(ids[*b]).then(a.cmp(b)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..order.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
    order
}

/// Splits notes into `(train, validation)`. The assignment depends only on
/// the set of hadm_ids and the seed, not on input order.
pub fn split_dataset(
    notes: &[DischargeNote],
    spec: &SplitSpec,
) -> Result<(Vec<DischargeNote>, Vec<DischargeNote>), CorpusError> {
    if notes.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let ids: Vec<&str> = notes.iter().map(|n| n.hadm_id.as_str()).collect();
    let order = shuffled_order(&ids, spec.seed);
    let cut = spec.train_size(notes.len());
    let pick = |idx: &[usize]| idx.iter().map(|i| notes[*i].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..cut]), pick(&order[cut..])))
}

pub const DEFAULT_BUCKET_WIDTH: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub count: usize,
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    pub total: u64,
    pub bucket_width: usize,
    /// `(bucket lower bound, count)` for every bucket from 0 to the one
    /// holding `max`.
    pub histogram: Vec<(usize, usize)>,
}

impl LengthStats {
    pub fn from_lengths(lengths: &[usize], bucket_width: usize) -> Result<Self, CorpusError> {
        let (&first, _) = lengths.split_first().ok_or(CorpusError::EmptyCorpus)?;
        let bucket_width = bucket_width.max(1);
        let (mut min, mut max, mut total) = (first, first, 0u64);
        for &len in lengths {
            min = min.min(len);
            max = max.max(len);
            total += len as u64;
        }
        let mut counts = vec![0usize; max / bucket_width + 1];
        for &len in lengths {
            counts[len / bucket_width] += 1;
        }
        Ok(Self {
            count: lengths.len(),
            min,
            max,
            mean: total as f64 / lengths.len() as f64,
            total,
            bucket_width,
            histogram: counts.into_iter().enumerate().map(|(i, c)| (i * bucket_width, c)).collect(),
        })
    }

    /// Mean rounded to the nearest token, as length tables report it.
    pub fn mean_rounded(&self) -> u64 {
        self.mean.round() as u64
    }
}

pub fn corpus_stats<S: AsRef<str> + Sync>(
    texts: &[S],
    tokenizer: &Tokenizer,
    bucket_width: usize,
) -> Result<LengthStats, CorpusError> {
    use rayon::prelude::*;
    let lengths: Vec<usize> = texts.par_iter().map(|t| tokenizer.count(t.as_ref())).collect();
    LengthStats::from_lengths(&lengths, bucket_width)
}

/// One model training pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreparedExample {
    pub hadm_id: String,
    pub target: TargetKind,
    pub input_text: String,
    pub target_text: String,
}

/// One generated summary, keyed like a prepared example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generation {
    pub hadm_id: String,
    pub target: TargetKind,
    pub generated_text: String,
}

pub fn write_prepared(examples: &[PreparedExample], path: &Path) -> Result<(), CorpusError> {
    write_jsonl(examples, path)
}

pub fn read_prepared(path: &Path) -> Result<Vec<PreparedExample>, CorpusError> {
    read_jsonl(path)
}

pub fn write_generations(generations: &[Generation], path: &Path) -> Result<(), CorpusError> {
    write_jsonl(generations, path)
}

pub fn read_generations(path: &Path) -> Result<Vec<Generation>, CorpusError> {
    read_jsonl(path)
}

pub(crate) fn write_jsonl<T: Serialize>(records: &[T], path: &Path) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (index, record) in records.iter().enumerate() {
        serde_json::to_writer(&mut out, record)
            .map_err(|e| CorpusError::MalformedRecord { index, reason: e.to_string() })?;
        out.write_all(b"\n").map_err(|e| CorpusError::io(path, e))?;
    }
    out.flush().map_err(|e| CorpusError::io(path, e))
}

pub(crate) fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut records = Vec::new();
    for (index, line) in non_blank_lines(BufReader::new(file)) {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        let record =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord { index, reason: e.to_string() })?;
        records.push(record);
    }
    Ok(records)
}
