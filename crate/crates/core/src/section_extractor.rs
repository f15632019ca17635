//! Section location and normalization for discharge notes.
//!
//! A section body runs from its header (anchored at line start,
//! case-sensitive) to the next layout header or the end of the note. The
//! layout set includes headers we never extract, such as `Social History:`
//! and `Physical Exam:`, so their content does not leak into the section
//! above them. `Name:` and `Sex:` are inline fields on the demographic lines.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Value of a section that is absent or empty.
pub const UNKNOWN: &str = "Unknown";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SectionKind {
    Name,
    Sex,
    Service,
    Allergies,
    ChiefComplaint,
    MajorSurgicalOrInvasiveProcedure,
    HistoryOfPresentIllness,
    PastMedicalHistory,
    PertinentResults,
    MedicationsOnAdmission,
    DischargeDiagnosis,
    DischargeDisposition,
    DischargeCondition,
    DischargeMedications,
    BriefHospitalCourse,
    DischargeInstructions,
}

impl SectionKind {
    /// The fourteen kinds that feed model inputs.
    pub const INPUTS: [SectionKind; 14] = [
        SectionKind::Name,
        SectionKind::Sex,
        SectionKind::Service,
        SectionKind::Allergies,
        SectionKind::ChiefComplaint,
        SectionKind::MajorSurgicalOrInvasiveProcedure,
        SectionKind::HistoryOfPresentIllness,
        SectionKind::PastMedicalHistory,
        SectionKind::PertinentResults,
        SectionKind::MedicationsOnAdmission,
        SectionKind::DischargeDiagnosis,
        SectionKind::DischargeDisposition,
        SectionKind::DischargeCondition,
        SectionKind::DischargeMedications,
    ];

    pub const TARGETS: [SectionKind; 2] =
        [SectionKind::BriefHospitalCourse, SectionKind::DischargeInstructions];

    pub fn header(self) -> &'static str {
        match self {
            SectionKind::Name => "Name:",
            SectionKind::Sex => "Sex:",
            SectionKind::Service => "Service:",
            SectionKind::Allergies => "Allergies:",
            SectionKind::ChiefComplaint => "Chief Complaint:",
            SectionKind::MajorSurgicalOrInvasiveProcedure => "Major Surgical or Invasive Procedure:",
            SectionKind::HistoryOfPresentIllness => "History of Present Illness:",
            SectionKind::PastMedicalHistory => "Past Medical History:",
            SectionKind::PertinentResults => "Pertinent Results:",
            SectionKind::MedicationsOnAdmission => "Medications on Admission:",
            SectionKind::DischargeDiagnosis => "Discharge Diagnosis:",
            SectionKind::DischargeDisposition => "Discharge Disposition:",
            SectionKind::DischargeCondition => "Discharge Condition:",
            SectionKind::DischargeMedications => "Discharge Medications:",
            SectionKind::BriefHospitalCourse => "Brief Hospital Course:",
            SectionKind::DischargeInstructions => "Discharge Instructions:",
        }
    }

    pub fn is_target(self) -> bool {
        matches!(self, SectionKind::BriefHospitalCourse | SectionKind::DischargeInstructions)
    }

    /// Header text without the trailing colon.
    pub fn label(self) -> &'static str {
        self.header().trim_end_matches(':')
    }
}

impl fmt::Display for SectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Headers that bound a section but are never extracted themselves.
const LAYOUT_HEADERS: &[&str] = &[
    "Admission Date:",
    "Date of Birth:",
    "Attending:",
    "Social History:",
    "Family History:",
    "Physical Exam:",
    "Facility:",
    "Followup Instructions:",
];

/// Normalized text for each of the fourteen input kinds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionSet {
    sections: BTreeMap<SectionKind, String>,
    found: BTreeSet<SectionKind>,
}

impl Default for SectionSet {
    fn default() -> Self {
        Self {
            sections: SectionKind::INPUTS.iter().map(|k| (*k, UNKNOWN.to_string())).collect(),
            found: BTreeSet::new(),
        }
    }
}

impl SectionSet {
    /// Every kind set to `Unknown`.
    pub fn unknown() -> Self {
        Self::default()
    }

    /// Sets `kind` to already-normalized `text`. Empty text stores `Unknown`.
    ///
    /// # Panics
    /// If `kind` is a target kind.
    pub fn set(&mut self, kind: SectionKind, text: impl Into<String>) {
        assert!(!kind.is_target(), "{kind} is a target, not an input section");
        let text = text.into();
        if text.trim().is_empty() {
            self.sections.insert(kind, UNKNOWN.to_string());
            self.found.remove(&kind);
        } else {
            self.sections.insert(kind, text);
            self.found.insert(kind);
        }
    }

    pub fn with(mut self, kind: SectionKind, text: impl Into<String>) -> Self {
        self.set(kind, text);
        self
    }

    pub fn get(&self, kind: SectionKind) -> &str {
        self.sections.get(&kind).map(String::as_str).unwrap_or(UNKNOWN)
    }

    /// Whether `kind` was located in the note (as opposed to defaulted).
    pub fn was_found(&self, kind: SectionKind) -> bool {
        self.found.contains(&kind)
    }

    pub fn found(&self) -> impl Iterator<Item = SectionKind> + '_ {
        self.found.iter().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (SectionKind, &str)> {
        self.sections.iter().map(|(k, v)| (*k, v.as_str()))
    }
}

fn header_regex(header: &str) -> Regex {
    Regex::new(&format!(r"(?m)^[ \t]*{}", regex::escape(header))).expect("static header pattern")
}

static BOUNDARY: LazyLock<Regex> = LazyLock::new(|| {
    let alternatives: Vec<String> = SectionKind::INPUTS
        .iter()
        .chain(SectionKind::TARGETS.iter())
        .filter(|k| !matches!(k, SectionKind::Sex))
        .map(|k| k.header())
        .chain(LAYOUT_HEADERS.iter().copied())
        .map(regex::escape)
        .collect();
    Regex::new(&format!(r"(?m)^[ \t]*(?:{})", alternatives.join("|"))).expect("static boundary pattern")
});

static HEADERS: LazyLock<BTreeMap<SectionKind, Regex>> = LazyLock::new(|| {
    SectionKind::INPUTS
        .iter()
        .chain(SectionKind::TARGETS.iter())
        .map(|k| (*k, header_regex(k.header())))
        .collect()
});

static NAME_FIELD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^[ \t]*Name:[ \t]*(.*?)[ \t]*(?:Unit No:.*)?$").unwrap());

static SEX_FIELD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"Sex:[ \t]*(\S+)").unwrap());

static TIMESTAMP_PREFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:[^\S\n]*_+[^\S\n]+\d{1,2}:\d{2}[^\S\n]?(?:AM|PM)\b[^\S\n]*)+").unwrap());

static LIST_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[^\S\n]*(?:\d+[.)]|-)[^\S\n]+(.*)$").unwrap());

static CONDITION_COLON: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[^\S\n]*:+(?:\s+|$)").unwrap());

/// Start of the first line-anchored occurrence of `kind`'s header, and the
/// end of its header text.
fn locate(text: &str, kind: SectionKind) -> Option<(usize, usize)> {
    HEADERS[&kind].find(text).map(|m| (m.start(), m.end()))
}

/// End of the body starting at `from`: the next layout header or end of text.
fn body_end(text: &str, from: usize) -> usize {
    BOUNDARY.find_at(text, from).map(|m| m.start()).unwrap_or(text.len())
}

fn raw_body(text: &str, kind: SectionKind) -> Option<&str> {
    match kind {
        SectionKind::Name => NAME_FIELD.captures(text).map(|c| c.get(1).unwrap().as_str()),
        SectionKind::Sex => SEX_FIELD.captures(text).map(|c| c.get(1).unwrap().as_str()),
        _ => locate(text, kind).map(|(_, end)| &text[end..body_end(text, end)]),
    }
}

/// Byte range of a target section, header included.
fn target_span(text: &str, kind: SectionKind) -> Option<(usize, usize)> {
    let (start, header_end) = locate(text, kind)?;
    let end = match kind {
        // Falls back to the next layout header when the note has no
        // admission medication list.
        SectionKind::BriefHospitalCourse => header_regex("Medications on Admission:")
            .find_at(text, header_end)
            .map(|m| m.start())
            .unwrap_or_else(|| body_end(text, header_end)),
        SectionKind::DischargeInstructions => header_regex("Followup Instructions:")
            .find_at(text, header_end)
            .map(|m| m.start())
            .unwrap_or(text.len()),
        _ => unreachable!("only target kinds have spans"),
    };
    Some((start, end))
}

/// Raw (unnormalized) text of a target section, if the note has one.
pub fn extract_target(raw: &str, kind: SectionKind) -> Option<&str> {
    assert!(kind.is_target(), "{kind} is not a target section");
    let (start, end) = target_span(raw, kind)?;
    let body = &raw[start..end];
    Some(&body[body.find(':').map(|i| i + 1).unwrap_or(0)..])
}

/// Removes the Brief Hospital Course and Discharge Instructions spans,
/// leaving everything else byte-for-byte.
pub fn strip_targets(raw: &str) -> String {
    let mut spans: Vec<(usize, usize)> =
        SectionKind::TARGETS.iter().filter_map(|k| target_span(raw, *k)).collect();
    spans.sort_unstable();
    let mut out = String::with_capacity(raw.len());
    let mut cursor = 0;
    for (start, end) in spans {
        let start = start.max(cursor);
        out.push_str(&raw[cursor..start]);
        cursor = cursor.max(end);
    }
    out.push_str(&raw[cursor..]);
    // A stripped span can expose another header that was inside it.
    if out.len() < raw.len() && SectionKind::TARGETS.iter().any(|k| locate(&out, *k).is_some()) {
        return strip_targets(&out);
    }
    out
}

/// Extracts and normalizes all fourteen input sections. Missing sections
/// hold `Unknown`.
pub fn extract_sections(raw: &str) -> SectionSet {
    let mut set = SectionSet::unknown();
    for kind in SectionKind::INPUTS {
        if let Some(body) = raw_body(raw, kind) {
            set.set(kind, normalize_section(kind, body));
        }
    }
    set
}

/// Applies the kind-specific rule, then flattens line breaks, collapses
/// whitespace runs and trims.
pub fn normalize_section(kind: SectionKind, raw_body: &str) -> String {
    let ruled = match kind {
        SectionKind::Sex => map_sex(raw_body),
        SectionKind::PertinentResults => canonicalize_list(&strip_result_timestamps(raw_body)),
        SectionKind::MedicationsOnAdmission | SectionKind::DischargeMedications => {
            canonicalize_list(raw_body)
        }
        SectionKind::DischargeCondition => CONDITION_COLON.replace_all(raw_body, " is ").into_owned(),
        _ => raw_body.to_string(),
    };
    collapse_whitespace(&ruled)
}

fn map_sex(body: &str) -> String {
    match body.trim() {
        "M" => "Male".to_string(),
        "F" => "Female".to_string(),
        _ => body.to_string(),
    }
}

/// Removes `___ 08:00AM`-style prefixes from each line.
pub fn strip_result_timestamps(body: &str) -> String {
    body.split('\n')
        .map(|line| TIMESTAMP_PREFIX.replace(line, ""))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Rewrites `1.`, `1)` and `-` list markers at line start as `* ` and ends
/// each rewritten item with a period.
pub fn canonicalize_list(body: &str) -> String {
    body.split('\n')
        .map(|line| match LIST_MARKER.captures(line) {
            Some(caps) => {
                let item = caps[1].trim_end();
                if item.is_empty() || item.ends_with(['.', '!', '?']) {
                    format!("* {item}")
                } else {
                    format!("* {item}.")
                }
            }
            None => line.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
