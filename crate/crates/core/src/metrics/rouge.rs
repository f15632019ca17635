use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::normalize_tokens;

/// Precision, recall and F1 from a match count and the two totals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub matches: usize,
    pub candidate_total: usize,
    pub reference_total: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub fn from_counts(matches: usize, candidate_total: usize, reference_total: usize) -> Self {
        if matches == 0 || candidate_total == 0 || reference_total == 0 {
            return Self { matches, candidate_total, reference_total, precision: 0.0, recall: 0.0, f1: 0.0 };
        }
        let precision = matches as f64 / candidate_total as f64;
        let recall = matches as f64 / reference_total as f64;
        let f1 = 2.0 * matches as f64 / (candidate_total + reference_total) as f64;
        Self { matches, candidate_total, reference_total, precision, recall, f1 }
    }
}

pub(crate) fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for window in tokens.windows(n) {
        *counts.entry(window.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram overlap between two token sequences.
pub(crate) fn overlap(candidate: &HashMap<Vec<&str>, usize>, reference: &HashMap<Vec<&str>, usize>) -> usize {
    candidate.iter().map(|(gram, c)| (*c).min(reference.get(gram).copied().unwrap_or(0))).sum()
}

pub fn rouge_n_tokens<T: AsRef<str>>(candidate: &[T], reference: &[T], n: usize) -> RougeScore {
    assert!(n >= 1, "ROUGE-N needs n >= 1");
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    RougeScore::from_counts(
        overlap(&cand, &refs),
        candidate.len().saturating_sub(n - 1),
        reference.len().saturating_sub(n - 1),
    )
}

/// ROUGE-N over normalized tokens.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> RougeScore {
    rouge_n_tokens(&normalize_tokens(candidate), &normalize_tokens(reference), n)
}

/// Length of the longest common subsequence, in O(|b|) memory.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

pub fn rouge_l_tokens<T: AsRef<str> + PartialEq>(candidate: &[T], reference: &[T]) -> RougeScore {
    RougeScore::from_counts(lcs_len(candidate, reference), candidate.len(), reference.len())
}

/// ROUGE-L (LCS-based) over normalized tokens.
pub fn rouge_l(candidate: &str, reference: &str) -> RougeScore {
    rouge_l_tokens(&normalize_tokens(candidate), &normalize_tokens(reference))
}
