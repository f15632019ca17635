#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use discharge_prep::corpus_io::DischargeNote;
use discharge_prep::section_extractor::{SectionKind, SectionSet};
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The Service prompt as printed in the worked input examples.
pub const SERVICE_VARIANT: &str = "The service details are provided as follows:";
pub const SERVICE_PROMPT: &str = "The service details are as follows:";

pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn words(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Section bodies behind the two worked input examples.
pub fn table_sections() -> SectionSet {
    let raw: BTreeMap<SectionKind, String> = serde_json::from_str(&fixture("table_sections.json")).unwrap();
    raw.into_iter().fold(SectionSet::unknown(), |set, (kind, body)| set.with(kind, body))
}

/// Leaderboard rows: rank, eight metric values in column order, Overall.
pub const LEADERBOARD: [(&str, [f64; 8], f64); 17] = [
    ("rank 1", [0.124, 0.453, 0.201, 0.308, 0.438, 0.403, 0.315, 0.411], 0.332),
    ("rank 2", [0.106, 0.423, 0.180, 0.284, 0.412, 0.381, 0.265, 0.353], 0.300),
    ("rank 3", [0.097, 0.414, 0.192, 0.284, 0.383, 0.398, 0.274, 0.332], 0.297),
    ("rank 4", [0.098, 0.444, 0.155, 0.262, 0.399, 0.336, 0.255, 0.360], 0.289),
    ("rank 5", [0.102, 0.401, 0.174, 0.275, 0.395, 0.289, 0.296, 0.355], 0.286),
    ("rank 6", [0.097, 0.404, 0.166, 0.265, 0.389, 0.376, 0.231, 0.339], 0.284),
    ("rank 7", [0.092, 0.401, 0.158, 0.256, 0.378, 0.363, 0.247, 0.320], 0.277),
    ("rank 8", [0.068, 0.370, 0.131, 0.245, 0.360, 0.314, 0.215, 0.324], 0.253),
    ("rank 9", [0.063, 0.394, 0.131, 0.252, 0.351, 0.312, 0.210, 0.276], 0.248),
    ("rank 10", [0.024, 0.377, 0.106, 0.205, 0.300, 0.332, 0.174, 0.254], 0.221),
    ("rank 11", [0.030, 0.319, 0.084, 0.182, 0.289, 0.287, 0.195, 0.265], 0.206),
    ("rank 12", [0.017, 0.341, 0.109, 0.209, 0.268, 0.247, 0.143, 0.193], 0.191),
    ("rank 13", [0.022, 0.290, 0.076, 0.163, 0.258, 0.294, 0.182, 0.223], 0.188),
    ("rank 14", [0.016, 0.259, 0.057, 0.144, 0.282, 0.284, 0.210, 0.215], 0.183),
    ("rank 15", [0.039, 0.210, 0.092, 0.131, 0.186, 0.306, 0.205, 0.191], 0.170),
    ("rank 16", [0.002, 0.197, 0.016, 0.106, 0.179, 0.106, 0.132, 0.091], 0.104),
    ("rank 17", [0.015, 0.126, 0.052, 0.113, 0.138, 0.089, 0.167, 0.121], 0.102),
];

// ---------------------------------------------------------------- oracles

/// All contiguous windows of length `n`, compared pairwise without hashing.
pub fn oracle_ngram_matches(cand: &[&str], refs: &[&str], n: usize) -> (usize, usize, usize) {
    let windows = |s: &[&str]| -> Vec<Vec<String>> {
        if s.len() < n {
            return Vec::new();
        }
        (0..=s.len() - n).map(|i| s[i..i + n].iter().map(|w| w.to_string()).collect()).collect()
    };
    let c = windows(cand);
    let mut r = windows(refs);
    let total_r = r.len();
    let mut matches = 0;
    for gram in &c {
        if let Some(pos) = r.iter().position(|g| g == gram) {
            r.remove(pos);
            matches += 1;
        }
    }
    (matches, c.len(), total_r)
}

/// Harmonic mean of P = m/c and R = m/r kept as an exact fraction and
/// rounded once at the end.
pub fn oracle_f1(matches: usize, c: usize, r: usize) -> f64 {
    if matches == 0 || c == 0 || r == 0 {
        return 0.0;
    }
    let (m, c, r) = (matches as u128, c as u128, r as u128);
    // 2PR / (P + R) = (2 m^2 / cr) / (m (c + r) / cr)
    let num = 2 * m * m * c * r;
    let den = m * (c + r) * c * r;
    let g = gcd(num, den);
    (num / g) as f64 / (den / g) as f64
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn is_subsequence(sub: &[&str], seq: &[&str]) -> bool {
    let mut it = seq.iter();
    sub.iter().all(|w| it.any(|s| s == w))
}

/// Longest common subsequence by enumerating every subsequence of `a`.
pub fn oracle_lcs(a: &[&str], b: &[&str]) -> usize {
    assert!(a.len() <= 16);
    (0u32..1 << a.len())
        .filter_map(|mask| {
            let sub: Vec<&str> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| a[i]).collect();
            is_subsequence(&sub, b).then_some(sub.len())
        })
        .max()
        .unwrap_or(0)
}

/// Corpus BLEU-4 from the textbook definition.
pub fn oracle_bleu(pairs: &[(Vec<&str>, Vec<&str>)]) -> f64 {
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (cand, refs) in pairs {
        for n in 1..=4 {
            let (m, ct, _) = oracle_ngram_matches(cand, refs, n);
            matches[n - 1] += m;
            totals[n - 1] += ct;
        }
        c += cand.len();
        r += refs.len();
    }
    if (0..4).any(|i| matches[i] == 0 || totals[i] == 0) {
        return 0.0;
    }
    let log_p: f64 = (0..4).map(|i| (matches[i] as f64 / totals[i] as f64).ln()).sum::<f64>() / 4.0;
    let bp = if c >= r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * log_p.exp()
}

/// Reference dealing for the split: sorted ids, Fisher-Yates from the top.
pub fn oracle_split(ids: &[&str], seed: u64, fraction: f64) -> (Vec<String>, Vec<String>) {
    let mut sorted: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
    sorted.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut i = sorted.len();
    while i > 1 {
        i -= 1;
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        sorted.swap(i, j);
    }
    let cut = (sorted.len() as f64 * fraction).round() as usize;
    let val = sorted.split_off(cut);
    (sorted, val)
}

// ------------------------------------------------------------ synthetic data

const VOCAB: &[&str] = &[
    "patient", "pain", "abdominal", "fever", "stable", "discharged", "home", "with", "and", "the", "was", "no",
    "acute", "history", "of", "chest", "denies", "nausea", "vomiting", "mg", "daily", "tablet", "followed", "by",
    "surgery", "admitted", "for", "evaluation", "antibiotics", "course", "improved", "tolerated", "diet", "___",
];

pub struct NoteGen {
    rng: ChaCha8Rng,
}

impl NoteGen {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn below(&mut self, n: usize) -> usize {
        (self.rng.next_u64() % n as u64) as usize
    }

    pub fn sentence(&mut self, words: usize) -> String {
        let mut out: Vec<&str> = (0..words).map(|_| VOCAB[self.below(VOCAB.len())]).collect();
        if let Some(first) = out.first_mut() {
            if *first == "___" {
                *first = "patient";
            }
        }
        format!("{}.", out.join(" "))
    }

    /// `min + below(spread)` sentences, one per line.
    fn paragraph(&mut self, min: usize, spread: usize) -> String {
        let sentences = min + self.below(spread);
        let mut lines = Vec::new();
        for _ in 0..sentences {
            let len = 4 + self.below(10);
            lines.push(self.sentence(len));
        }
        lines.join("\n")
    }

    /// A note in the usual discharge layout with both targets present.
    pub fn note(&mut self, id: usize) -> DischargeNote {
        let sex = if self.below(2) == 0 { "M" } else { "F" };
        let text = format!(
            " \nName:  ___                     Unit No:   ___\n \nAdmission Date:  ___              Discharge Date:   ___\n \n\
             Date of Birth:  ___             Sex:   {sex}\n \nService: {service}\n \nAllergies: \n{allergies}\n \n\
             Attending: ___.\n \nChief Complaint:\n{cc}\n \nMajor Surgical or Invasive Procedure:\n{proc}\n \n\
             History of Present Illness:\n{hpi}\n \nPast Medical History:\n{pmh}\n \nSocial History:\n___\n\
             Family History:\nNon-contributory\n \nPhysical Exam:\n{exam}\n \nPertinent Results:\n\
             ___ 06:10AM BLOOD WBC-{wbc} Hgb-___ Plt ___\n___ 07:35PM URINE pH-6.0\n{results}\n \n\
             Brief Hospital Course:\n{bhc}\n \nMedications on Admission:\n1. {med1}\n2. {med2}\n \n\
             Discharge Medications:\n1. {med1}\n2. {med2}\n \nDischarge Disposition:\nHome\n \n\
             Discharge Diagnosis:\n{dx}\n \nDischarge Condition:\nMental Status: Clear and coherent.\n\
             Activity Status: Ambulatory - Independent.\n \nDischarge Instructions:\n{di}\n \n\
             Followup Instructions:\n___\n",
            service = ["SURGERY", "MEDICINE", "ORTHOPAEDICS", "NEUROLOGY"][self.below(4)],
            allergies = ["No Known Allergies / Adverse Drug Reactions", "Codeine / Levaquin", "Penicillins"][self.below(3)],
            cc = self.sentence(3),
            proc = ["None", "Laparoscopic appendectomy", "ERCP"][self.below(3)],
            hpi = self.paragraph(3, 5),
            pmh = self.paragraph(1, 3),
            exam = self.paragraph(2, 1),
            wbc = 4 + self.below(12),
            results = self.paragraph(1, 2),
            bhc = self.paragraph(4, 8),
            med1 = ["Acetaminophen 1000 mg PO TID", "Aspirin 81 mg PO DAILY"][self.below(2)],
            med2 = ["Docusate Sodium 100 mg PO BID", "Lisinopril 10 mg PO DAILY"][self.below(2)],
            dx = self.sentence(2),
            di = self.paragraph(3, 5),
        );
        DischargeNote { hadm_id: format!("{}", 20_000_000 + id), note_id: format!("{}-DS-{id}", 10_000 + id), text }
    }

    pub fn corpus(&mut self, n: usize) -> Vec<DischargeNote> {
        (0..n).map(|i| self.note(i)).collect()
    }

    /// A note whose every input section is far longer than any budget.
    pub fn adversarial_note(&mut self, id: usize, words_per_section: usize) -> DischargeNote {
        let mut note = self.note(id);
        let blob = |gen: &mut Self| -> String {
            let mut s = String::new();
            while s.split_whitespace().count() < words_per_section {
                let len = 12;
                s.push_str(&gen.sentence(len));
                s.push(if gen.below(3) == 0 { '\n' } else { ' ' });
            }
            s
        };
        for header in ["History of Present Illness:\n", "Past Medical History:\n", "Chief Complaint:\n"] {
            let extra = blob(self);
            note.text = note.text.replacen(header, &format!("{header}{extra}\n"), 1);
        }
        let sep_storm = "<sep> ".repeat(words_per_section / 4);
        note.text = note.text.replacen("Discharge Diagnosis:\n", &format!("Discharge Diagnosis:\n{sep_storm}\n"), 1);
        note
    }
}
