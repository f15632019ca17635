//! N-gram evaluation metrics and Overall-score aggregation.
//!
//! BLEU-4, ROUGE-1/2/L and METEOR are computed here. BERTScore, AlignScore
//! and MEDCON are accepted from an external scores file and merged in.
//! The Overall score averages each metric over the two targets, then
//! averages the eight per-metric values.

mod bleu;
mod meteor;
mod rouge;

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus_io::{read_jsonl, CorpusError};
use crate::input_builder::TargetKind;

pub use bleu::{bleu4, bleu4_tokens, BleuStats, MAX_ORDER};
pub use meteor::{align as meteor_align, count_chunks, meteor, meteor_tokens, MeteorScore};
pub use rouge::{lcs_len, rouge_l, rouge_l_tokens, rouge_n, rouge_n_tokens, RougeScore};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{candidates} candidates but {references} references")]
    LengthMismatch { candidates: usize, references: usize },
    #[error("no candidate/reference pairs")]
    EmptyCorpus,
    #[error("overall score is partial, missing: {}", list(.0))]
    MissingMetric(Vec<Metric>),
    #[error("{metric} value {value} is outside [0, 1]")]
    OutOfRange { metric: Metric, value: f64 },
    #[error("external scores: {0}")]
    External(#[from] CorpusError),
}

fn list(metrics: &[Metric]) -> String {
    metrics.iter().map(Metric::as_str).collect::<Vec<_>>().join(", ")
}

/// Lowercased alphanumeric runs; everything else separates tokens.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "bleu")]
    Bleu,
    #[serde(rename = "rouge1")]
    Rouge1,
    #[serde(rename = "rouge2")]
    Rouge2,
    #[serde(rename = "rougeL")]
    RougeL,
    #[serde(rename = "bertscore")]
    BertScore,
    #[serde(rename = "meteor")]
    Meteor,
    #[serde(rename = "alignscore")]
    AlignScore,
    #[serde(rename = "medcon")]
    Medcon,
}

impl Metric {
    /// The eight task metrics in leaderboard column order.
    pub const ALL: [Metric; 8] = [
        Metric::Bleu,
        Metric::Rouge1,
        Metric::Rouge2,
        Metric::RougeL,
        Metric::BertScore,
        Metric::Meteor,
        Metric::AlignScore,
        Metric::Medcon,
    ];

    /// Metrics computed natively.
    pub const NGRAM: [Metric; 5] = [Metric::Bleu, Metric::Rouge1, Metric::Rouge2, Metric::RougeL, Metric::Meteor];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Bleu => "bleu",
            Metric::Rouge1 => "rouge1",
            Metric::Rouge2 => "rouge2",
            Metric::RougeL => "rougeL",
            Metric::BertScore => "bertscore",
            Metric::Meteor => "meteor",
            Metric::AlignScore => "alignscore",
            Metric::Medcon => "medcon",
        }
    }

    pub fn column(&self) -> &'static str {
        match self {
            Metric::Bleu => "BLEU",
            Metric::Rouge1 => "ROUGE-1",
            Metric::Rouge2 => "ROUGE-2",
            Metric::RougeL => "ROUGE-L",
            Metric::BertScore => "BERTScore",
            Metric::Meteor => "Meteor",
            Metric::AlignScore => "AlignScore",
            Metric::Medcon => "MEDCON",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

fn check_range(metric: Metric, value: f64) -> Result<f64, MetricsError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(MetricsError::OutOfRange { metric, value })
    }
}

/// Metric values for one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub target: TargetKind,
    pub sample_count: usize,
    pub values: BTreeMap<Metric, f64>,
}

impl MetricReport {
    pub fn new(target: TargetKind, sample_count: usize) -> Self {
        Self { target, sample_count, values: BTreeMap::new() }
    }

    pub fn with(mut self, metric: Metric, value: f64) -> Result<Self, MetricsError> {
        self.insert(metric, value)?;
        Ok(self)
    }

    pub fn insert(&mut self, metric: Metric, value: f64) -> Result<(), MetricsError> {
        self.values.insert(metric, check_range(metric, value)?);
        Ok(())
    }

    pub fn get(&self, metric: Metric) -> Option<f64> {
        self.values.get(&metric).copied()
    }
}

/// Scores `(candidate, reference)` pairs for one target. ROUGE and METEOR
/// are averaged per pair; BLEU is corpus-level.
pub fn score_target<S: AsRef<str> + Sync>(target: TargetKind, pairs: &[(S, S)]) -> Result<MetricReport, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    struct PairScore {
        rouge1: f64,
        rouge2: f64,
        rouge_l: f64,
        meteor: f64,
        bleu: BleuStats,
    }
    let scores: Vec<PairScore> = pairs
        .par_iter()
        .map(|(c, r)| {
            let cand = normalize_tokens(c.as_ref());
            let refs = normalize_tokens(r.as_ref());
            let mut bleu = BleuStats::default();
            bleu.add_pair(&cand, &refs);
            PairScore {
                rouge1: rouge_n_tokens(&cand, &refs, 1).f1,
                rouge2: rouge_n_tokens(&cand, &refs, 2).f1,
                rouge_l: rouge_l_tokens(&cand, &refs).f1,
                meteor: meteor_tokens(&cand, &refs).score,
                bleu,
            }
        })
        .collect();
    let n = scores.len() as f64;
    let mean = |f: fn(&PairScore) -> f64| scores.iter().map(f).sum::<f64>() / n;
    let bleu = scores.iter().fold(BleuStats::default(), |acc, s| acc.merge(&s.bleu));
    MetricReport::new(target, pairs.len())
        .with(Metric::Bleu, bleu.score())?
        .with(Metric::Rouge1, mean(|s| s.rouge1))?
        .with(Metric::Rouge2, mean(|s| s.rouge2))?
        .with(Metric::RougeL, mean(|s| s.rouge_l))?
        .with(Metric::Meteor, mean(|s| s.meteor))
}

/// One externally computed score, as read from the external-scores file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalScore {
    pub target: TargetKind,
    pub metric: Metric,
    pub value: f64,
}

pub fn read_external_scores(path: &Path) -> Result<Vec<ExternalScore>, MetricsError> {
    let scores: Vec<ExternalScore> = read_jsonl(path)?;
    for s in &scores {
        check_range(s.metric, s.value)?;
    }
    Ok(scores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub bhc: MetricReport,
    pub di: MetricReport,
    pub per_metric_overall: BTreeMap<Metric, f64>,
    /// Mean of the eight per-metric values; absent when any is missing.
    pub overall: Option<f64>,
    pub missing: Vec<Metric>,
}

/// Merges external values (they replace computed ones for the same target
/// and metric) and averages across targets, then across metrics.
pub fn aggregate(
    mut bhc: MetricReport,
    mut di: MetricReport,
    external: Option<&[ExternalScore]>,
) -> Result<ScoreReport, MetricsError> {
    for score in external.unwrap_or_default() {
        match score.target {
            TargetKind::BriefHospitalCourse => bhc.insert(score.metric, score.value)?,
            TargetKind::DischargeInstructions => di.insert(score.metric, score.value)?,
        }
    }
    let per_metric_overall: BTreeMap<Metric, f64> = Metric::ALL
        .iter()
        .filter_map(|m| Some((*m, (bhc.get(*m)? + di.get(*m)?) / 2.0)))
        .collect();
    let missing: Vec<Metric> = Metric::ALL.iter().filter(|m| !per_metric_overall.contains_key(m)).copied().collect();
    let overall = missing
        .is_empty()
        .then(|| per_metric_overall.values().sum::<f64>() / Metric::ALL.len() as f64);
    Ok(ScoreReport { bhc, di, per_metric_overall, overall, missing })
}

impl ScoreReport {
    pub fn overall(&self) -> Result<f64, MetricsError> {
        self.overall.ok_or_else(|| MetricsError::MissingMetric(self.missing.clone()))
    }

    /// Plain-text table with the leaderboard's columns: one row per target
    /// and one for the overall values. Missing cells print as `-`.
    pub fn render_table(&self) -> String {
        let fmt_cell = |v: Option<f64>| v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
        let mut header = vec!["Target".to_string(), "Overall".to_string()];
        header.extend(Metric::ALL.iter().map(|m| m.column().to_string()));
        let target_overall = |r: &MetricReport| {
            let vals: Option<Vec<f64>> = Metric::ALL.iter().map(|m| r.get(*m)).collect();
            vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
        };
        let mut rows = vec![header];
        for (name, report) in [("BHC", &self.bhc), ("DI", &self.di)] {
            let mut row = vec![name.to_string(), fmt_cell(target_overall(report))];
            row.extend(Metric::ALL.iter().map(|m| fmt_cell(report.get(*m))));
            rows.push(row);
        }
        let mut row = vec!["Overall".to_string(), fmt_cell(self.overall)];
        row.extend(Metric::ALL.iter().map(|m| fmt_cell(self.per_metric_overall.get(m).copied())));
        rows.push(row);

        let widths: Vec<usize> =
            (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in &rows {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, w))| if i == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}
