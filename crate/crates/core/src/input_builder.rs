//! Assembly of model input text from extracted sections.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::section_extractor::{SectionKind, SectionSet};
use crate::tokenizer::Tokenizer;

/// Separator placed between prompted segments, with no surrounding spaces.
pub const SEP: &str = "<sep>";

/// Input budget in tokens.
pub const DEFAULT_INPUT_BUDGET: usize = 1596;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("{0} is a target section and has no prompt")]
    UnknownKind(SectionKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TargetKind {
    #[serde(rename = "bhc")]
    BriefHospitalCourse,
    #[serde(rename = "di")]
    DischargeInstructions,
}

impl TargetKind {
    pub const ALL: [TargetKind; 2] = [TargetKind::BriefHospitalCourse, TargetKind::DischargeInstructions];

    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::BriefHospitalCourse => "bhc",
            TargetKind::DischargeInstructions => "di",
        }
    }

    pub fn section(self) -> SectionKind {
        match self {
            TargetKind::BriefHospitalCourse => SectionKind::BriefHospitalCourse,
            TargetKind::DischargeInstructions => SectionKind::DischargeInstructions,
        }
    }

    /// Maximum generated length in tokens for this target.
    pub fn max_target_tokens(self) -> usize {
        match self {
            TargetKind::BriefHospitalCourse => 832,
            TargetKind::DischargeInstructions => 792,
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bhc" => Ok(TargetKind::BriefHospitalCourse),
            "di" => Ok(TargetKind::DischargeInstructions),
            other => Err(format!("unknown target {other:?}, expected \"bhc\" or \"di\"")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptSpec {
    pub kind: SectionKind,
    pub prompt: &'static str,
    pub bhc_priority: Option<u8>,
    pub di_priority: Option<u8>,
}

impl PromptSpec {
    pub fn priority(&self, target: TargetKind) -> Option<u8> {
        match target {
            TargetKind::BriefHospitalCourse => self.bhc_priority,
            TargetKind::DischargeInstructions => self.di_priority,
        }
    }
}

const fn spec(kind: SectionKind, prompt: &'static str, bhc: Option<u8>, di: Option<u8>) -> PromptSpec {
    PromptSpec { kind, prompt, bhc_priority: bhc, di_priority: di }
}

pub const PROMPTS: [PromptSpec; 14] = [
    spec(SectionKind::Name, "The patient's name is provided as follows:", Some(1), Some(1)),
    spec(SectionKind::Sex, "Gender details are as follows:", Some(2), Some(2)),
    spec(SectionKind::Service, "The service details are as follows:", Some(9), Some(9)),
    spec(SectionKind::Allergies, "Information on any allergies is detailed as follows:", Some(7), Some(6)),
    spec(SectionKind::ChiefComplaint, "The primary reason for the visit is summarized as follows:", Some(3), Some(3)),
    spec(
        SectionKind::MajorSurgicalOrInvasiveProcedure,
        "Details on any major surgeries or invasive procedures are as follows:",
        Some(8),
        Some(7),
    ),
    spec(
        SectionKind::HistoryOfPresentIllness,
        "An overview of the current illness's history is provided as follows:",
        Some(4),
        Some(4),
    ),
    spec(
        SectionKind::PastMedicalHistory,
        "A summary of the patient's past medical history is as follows:",
        Some(6),
        Some(5),
    ),
    spec(
        SectionKind::PertinentResults,
        "Clinically significant findings impacting the treatment and diagnosis are as follows:",
        Some(5),
        None,
    ),
    spec(SectionKind::MedicationsOnAdmission, "Medications upon admission are detailed as follows:", None, Some(8)),
    spec(SectionKind::DischargeDiagnosis, "The final diagnosis at discharge is as follows:", None, Some(10)),
    spec(SectionKind::DischargeDisposition, "The disposition at discharge is provided as follows:", None, Some(11)),
    spec(
        SectionKind::DischargeCondition,
        "The patient's condition upon discharge is described as follows:",
        None,
        Some(12),
    ),
    spec(SectionKind::DischargeMedications, "Medications prescribed at discharge are as follows:", None, Some(13)),
];

pub fn prompt_spec(kind: SectionKind) -> Result<&'static PromptSpec, PromptError> {
    PROMPTS.iter().find(|p| p.kind == kind).ok_or(PromptError::UnknownKind(kind))
}

pub fn prompt_for(kind: SectionKind) -> Result<&'static str, PromptError> {
    prompt_spec(kind).map(|p| p.prompt)
}

/// Sections used for `target`, in ascending priority.
pub fn priorities_for(target: TargetKind) -> Vec<SectionKind> {
    let mut ranked: Vec<(u8, SectionKind)> =
        PROMPTS.iter().filter_map(|p| p.priority(target).map(|rank| (rank, p.kind))).collect();
    ranked.sort_unstable();
    ranked.into_iter().map(|(_, kind)| kind).collect()
}

/// One `prompt text.` segment per section, in priority order.
pub fn segments(sections: &SectionSet, target: TargetKind) -> Vec<String> {
    priorities_for(target)
        .into_iter()
        .map(|kind| {
            let prompt = prompt_for(kind).expect("priority list holds input kinds only");
            let body = sections.get(kind).trim();
            if body.ends_with(['.', '!', '?']) {
                format!("{prompt} {body}")
            } else {
                format!("{prompt} {body}.")
            }
        })
        .collect()
}

/// Joins the prompted segments with `<sep>` and truncates to `budget`
/// tokens at a token boundary. A separator left dangling by the cut is
/// dropped.
pub fn build_input(sections: &SectionSet, target: TargetKind, tokenizer: &Tokenizer, budget: usize) -> String {
    let joined = segments(sections, target).join(SEP);
    let mut cut = tokenizer.truncate(&joined, budget).trim_end();
    while let Some(rest) = cut.strip_suffix(SEP) {
        cut = rest.trim_end();
    }
    cut.to_string()
}
