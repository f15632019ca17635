//! End-to-end stages behind the command-line tool.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus_io::{
    self, load_notes, read_generations, read_prepared, split_dataset, write_prepared, CorpusError, DischargeNote,
    NoteFormat, PreparedExample, SplitSpec,
};
use crate::input_builder::{build_input, TargetKind, DEFAULT_INPUT_BUDGET};
use crate::metrics::{aggregate, read_external_scores, score_target, MetricReport, MetricsError, ScoreReport};
use crate::section_extractor::{extract_sections, extract_target, strip_targets, SectionKind};
use crate::target_cleaner::clean_target;
use crate::tokenizer::{Tokenizer, TokenizerError, TokenizerMode};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("generated and reference files do not align; unmatched: {}", .unmatched.join(", "))]
    Alignment { unmatched: Vec<String> },
}

impl PipelineError {
    /// Whether the failure came from the configuration rather than the data.
    pub fn is_usage(&self) -> bool {
        matches!(self, PipelineError::Config(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TargetSelection {
    Bhc,
    Di,
    Both,
}

impl TargetSelection {
    pub fn targets(self) -> Vec<TargetKind> {
        match self {
            TargetSelection::Bhc => vec![TargetKind::BriefHospitalCourse],
            TargetSelection::Di => vec![TargetKind::DischargeInstructions],
            TargetSelection::Both => TargetKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub format: Option<NoteFormat>,
    pub output_dir: PathBuf,
    pub targets: TargetSelection,
    pub tokenizer: TokenizerMode,
    pub vocab: Option<PathBuf>,
    pub budget: usize,
    pub split: SplitSpec,
    /// Reference summaries keyed by hadm_id (columns `hadm_id`,
    /// `brief_hospital_course`, `discharge_instructions`). When absent the
    /// targets are cut from the notes themselves.
    pub target_file: Option<PathBuf>,
    pub external_scores: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(input: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            format: None,
            output_dir: output_dir.into(),
            targets: TargetSelection::Both,
            tokenizer: TokenizerMode::Whitespace,
            vocab: None,
            budget: DEFAULT_INPUT_BUDGET,
            split: SplitSpec::default(),
            target_file: None,
            external_scores: None,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.budget == 0 {
            return Err(PipelineError::Config("budget must be positive".into()));
        }
        if !self.input.is_file() {
            return Err(PipelineError::Config(format!("input {} is not a readable file", self.input.display())));
        }
        if let Some(t) = &self.target_file {
            if !t.is_file() {
                return Err(PipelineError::Config(format!("target file {} is not a readable file", t.display())));
            }
        }
        if self.output_dir.exists() && !self.output_dir.is_dir() {
            return Err(PipelineError::Config(format!("{} is not a directory", self.output_dir.display())));
        }
        if same_file(&self.input, &self.output_dir) {
            return Err(PipelineError::Config("output directory must differ from the input".into()));
        }
        Ok(())
    }

    pub fn load_tokenizer(&self) -> Result<Tokenizer, PipelineError> {
        Ok(Tokenizer::from_mode(self.tokenizer, self.vocab.as_deref())?)
    }

    fn note_format(&self) -> NoteFormat {
        self.format.unwrap_or_else(|| NoteFormat::from_path(&self.input))
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn create_dir(dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|source| PipelineError::Io { path: dir.to_path_buf(), source })
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })
}

pub fn prepared_file_name(target: TargetKind, split: &str) -> String {
    format!("{}_{split}.jsonl", target.as_str())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
}

/// Everything needed to rerun `prepare` bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub input: String,
    pub target_file: Option<String>,
    pub tokenizer: String,
    pub budget: usize,
    pub train_fraction: String,
    pub seed: u64,
    pub notes: usize,
    pub counts: BTreeMap<TargetKind, SplitCounts>,
    pub files: Vec<String>,
    /// Fraction of notes in which each section header was found.
    pub section_hit_rates: BTreeMap<String, f64>,
    pub missing_targets: BTreeMap<TargetKind, usize>,
    pub truncated_inputs: BTreeMap<TargetKind, usize>,
}

struct NoteOutput {
    examples: Vec<PreparedExample>,
    found: BTreeSet<SectionKind>,
    missing_targets: Vec<TargetKind>,
    truncated: Vec<TargetKind>,
}

fn prepare_note(
    note: &DischargeNote,
    targets: &[TargetKind],
    tokenizer: &Tokenizer,
    budget: usize,
    external_targets: Option<&HashMap<String, ReferenceTargets>>,
) -> NoteOutput {
    let stripped = strip_targets(&note.text);
    let sections = extract_sections(&stripped);
    let mut out = NoteOutput {
        examples: Vec::with_capacity(targets.len()),
        found: sections.found().collect(),
        missing_targets: Vec::new(),
        truncated: Vec::new(),
    };
    for &target in targets {
        let raw_target = match external_targets {
            Some(map) => map.get(&note.hadm_id).map(|t| t.get(target).to_string()),
            None => extract_target(&note.text, target.section()).map(str::to_string),
        };
        let target_text = raw_target.as_deref().map(|t| clean_target(t).into_string()).unwrap_or_default();
        if target_text.is_empty() {
            out.missing_targets.push(target);
        }
        let input_text = build_input(&sections, target, tokenizer, budget);
        if input_text.len() < build_input(&sections, target, tokenizer, usize::MAX).len() {
            out.truncated.push(target);
        }
        out.examples.push(PreparedExample { hadm_id: note.hadm_id.clone(), target, input_text, target_text });
    }
    out
}

#[derive(Debug, Clone, Deserialize)]
struct ReferenceTargets {
    hadm_id: String,
    #[serde(default)]
    brief_hospital_course: String,
    #[serde(default)]
    discharge_instructions: String,
}

impl ReferenceTargets {
    fn get(&self, target: TargetKind) -> &str {
        match target {
            TargetKind::BriefHospitalCourse => &self.brief_hospital_course,
            TargetKind::DischargeInstructions => &self.discharge_instructions,
        }
    }
}

fn load_reference_targets(path: &Path) -> Result<HashMap<String, ReferenceTargets>, PipelineError> {
    let records: Vec<ReferenceTargets> = match NoteFormat::from_path(path) {
        NoteFormat::Jsonl => corpus_io::read_jsonl(path)?,
        NoteFormat::Csv => {
            let mut reader = csv::Reader::from_path(path)
                .map_err(|e| CorpusError::MalformedRecord { index: 0, reason: e.to_string() })?;
            reader
                .deserialize()
                .enumerate()
                .map(|(index, r)| r.map_err(|e| CorpusError::MalformedRecord { index, reason: e.to_string() }))
                .collect::<Result<_, _>>()?
        }
    };
    Ok(records.into_iter().map(|r| (r.hadm_id.clone(), r)).collect())
}

/// Extracts, assembles, cleans and splits the corpus, writing one JSONL
/// file per target and split plus `manifest.json`.
pub fn run_prepare(config: &PipelineConfig) -> Result<Manifest, PipelineError> {
    config.validate()?;
    let tokenizer = config.load_tokenizer()?;
    let notes = load_notes(&config.input, config.note_format())?;
    info!("loaded {} notes from {}", notes.len(), config.input.display());
    let references = config.target_file.as_deref().map(load_reference_targets).transpose()?;

    let (train, validation) = split_dataset(&notes, &config.split)?;
    let targets = config.targets.targets();
    create_dir(&config.output_dir)?;

    let mut hits: BTreeMap<SectionKind, usize> = SectionKind::INPUTS.iter().map(|k| (*k, 0)).collect();
    let mut missing_targets: BTreeMap<TargetKind, usize> = targets.iter().map(|t| (*t, 0)).collect();
    let mut truncated: BTreeMap<TargetKind, usize> = targets.iter().map(|t| (*t, 0)).collect();
    let mut counts: BTreeMap<TargetKind, SplitCounts> =
        targets.iter().map(|t| (*t, SplitCounts { train: 0, validation: 0 })).collect();
    let mut files = Vec::new();

    for (split_name, split_notes) in [("train", &train), ("validation", &validation)] {
        let outputs: Vec<NoteOutput> = split_notes
            .par_iter()
            .map(|note| prepare_note(note, &targets, &tokenizer, config.budget, references.as_ref()))
            .collect();
        let mut per_target: BTreeMap<TargetKind, Vec<PreparedExample>> = BTreeMap::new();
        for output in outputs {
            for kind in &output.found {
                *hits.entry(*kind).or_default() += 1;
            }
            for t in output.missing_targets {
                *missing_targets.entry(t).or_default() += 1;
            }
            for t in output.truncated {
                *truncated.entry(t).or_default() += 1;
            }
            for example in output.examples {
                per_target.entry(example.target).or_default().push(example);
            }
        }
        for target in &targets {
            let examples = per_target.remove(target).unwrap_or_default();
            let name = prepared_file_name(*target, split_name);
            write_prepared(&examples, &config.output_dir.join(&name))?;
            let entry = counts.get_mut(target).expect("target counted");
            if split_name == "train" {
                entry.train = examples.len();
            } else {
                entry.validation = examples.len();
            }
            info!("wrote {} examples to {name}", examples.len());
            files.push(name);
        }
    }
    for (target, n) in &missing_targets {
        if *n > 0 {
            warn!("{n} notes have no {target} target text");
        }
    }

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        input: config.input.display().to_string(),
        target_file: config.target_file.as_ref().map(|p| p.display().to_string()),
        tokenizer: tokenizer.to_string(),
        budget: config.budget,
        train_fraction: config.split.to_string(),
        seed: config.split.seed,
        notes: notes.len(),
        counts,
        files,
        section_hit_rates: hits
            .into_iter()
            .map(|(k, n)| (k.label().to_string(), n as f64 / notes.len() as f64))
            .collect(),
        missing_targets,
        truncated_inputs: truncated,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(&config.output_dir.join("manifest.json"), &(json + "\n"))?;
    Ok(manifest)
}

/// Writes `train.jsonl` and `validation.jsonl` note files.
pub fn run_split(config: &PipelineConfig) -> Result<(usize, usize), PipelineError> {
    config.validate()?;
    let notes = load_notes(&config.input, config.note_format())?;
    let (train, validation) = split_dataset(&notes, &config.split)?;
    create_dir(&config.output_dir)?;
    corpus_io::write_notes(&train, &config.output_dir.join("train.jsonl"))?;
    corpus_io::write_notes(&validation, &config.output_dir.join("validation.jsonl"))?;
    Ok((train.len(), validation.len()))
}

/// Scores generations against references and writes `score.json` and
/// `score.txt` into `output_dir`. Pairs are matched on `(hadm_id, target)`.
pub fn run_score(
    generated: &Path,
    reference: &Path,
    external: Option<&Path>,
    output_dir: &Path,
) -> Result<ScoreReport, PipelineError> {
    let generations = read_generations(generated)?;
    let references = read_prepared(reference)?;

    let mut gen_map: BTreeMap<(TargetKind, &str), &str> = BTreeMap::new();
    for g in &generations {
        gen_map.insert((g.target, g.hadm_id.as_str()), g.generated_text.as_str());
    }
    let mut ref_map: BTreeMap<(TargetKind, &str), &str> = BTreeMap::new();
    for r in &references {
        ref_map.insert((r.target, r.hadm_id.as_str()), r.target_text.as_str());
    }
    let mut unmatched: Vec<String> = gen_map
        .keys()
        .filter(|k| !ref_map.contains_key(*k))
        .map(|(t, id)| format!("{id}/{t} (generated only)"))
        .chain(ref_map.keys().filter(|k| !gen_map.contains_key(*k)).map(|(t, id)| format!("{id}/{t} (reference only)")))
        .collect();
    if !unmatched.is_empty() {
        unmatched.sort();
        return Err(PipelineError::Alignment { unmatched });
    }

    let external_scores = external.map(read_external_scores).transpose()?;
    let mut reports = Vec::with_capacity(2);
    for target in TargetKind::ALL {
        let pairs: Vec<(&str, &str)> = gen_map
            .iter()
            .filter(|((t, _), _)| *t == target)
            .map(|(key, cand)| (*cand, ref_map[key]))
            .collect();
        let report = if pairs.is_empty() { MetricReport::new(target, 0) } else { score_target(target, &pairs)? };
        reports.push(report);
    }
    let di = reports.pop().expect("two targets");
    let bhc = reports.pop().expect("two targets");
    let report = aggregate(bhc, di, external_scores.as_deref())?;

    create_dir(output_dir)?;
    let json = serde_json::to_string_pretty(&report).expect("score report serializes");
    write_text(&output_dir.join("score.json"), &(json + "\n"))?;
    write_text(&output_dir.join("score.txt"), &report.render_table())?;
    if report.overall.is_none() {
        warn!("overall score is partial; missing {:?}", report.missing);
    }
    Ok(report)
}
