use serde::{Deserialize, Serialize};

use super::rouge::{ngram_counts, overlap};
use super::{normalize_tokens, MetricsError};

pub const MAX_ORDER: usize = 4;

/// Corpus-level tallies behind a BLEU-4 score.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub candidate_len: u64,
    pub reference_len: u64,
}

impl BleuStats {
    pub fn add_pair<T: AsRef<str>>(&mut self, candidate: &[T], reference: &[T]) {
        for n in 1..=MAX_ORDER {
            let cand = ngram_counts(candidate, n);
            let refs = ngram_counts(reference, n);
            self.matches[n - 1] += overlap(&cand, &refs) as u64;
            self.totals[n - 1] += candidate.len().saturating_sub(n - 1) as u64;
        }
        self.candidate_len += candidate.len() as u64;
        self.reference_len += reference.len() as u64;
    }

    pub fn merge(mut self, other: &BleuStats) -> Self {
        for n in 0..MAX_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.candidate_len += other.candidate_len;
        self.reference_len += other.reference_len;
        self
    }

    pub fn brevity_penalty(&self) -> f64 {
        match (self.candidate_len, self.reference_len) {
            (0, _) => 0.0,
            (c, r) if c < r => (1.0 - r as f64 / c as f64).exp(),
            _ => 1.0,
        }
    }

    /// Unsmoothed geometric mean of the four modified precisions times the
    /// brevity penalty. Any order with no matches (or no candidate n-grams)
    /// gives zero.
    pub fn score(&self) -> f64 {
        if self.matches.iter().zip(&self.totals).any(|(m, t)| *m == 0 || *t == 0) {
            return 0.0;
        }
        let log_mean = self
            .matches
            .iter()
            .zip(&self.totals)
            .map(|(m, t)| (*m as f64 / *t as f64).ln())
            .sum::<f64>()
            / MAX_ORDER as f64;
        self.brevity_penalty() * log_mean.exp()
    }
}

/// Corpus BLEU-4 over normalized tokens.
pub fn bleu4<S: AsRef<str>>(candidates: &[S], references: &[S]) -> Result<f64, MetricsError> {
    let pairs: Vec<(Vec<String>, Vec<String>)> = check_pairs(candidates, references)?
        .map(|(c, r)| (normalize_tokens(c), normalize_tokens(r)))
        .collect();
    Ok(bleu4_tokens(&pairs))
}

pub fn bleu4_tokens<T: AsRef<str>>(pairs: &[(Vec<T>, Vec<T>)]) -> f64 {
    let mut stats = BleuStats::default();
    for (cand, refs) in pairs {
        stats.add_pair(cand, refs);
    }
    stats.score()
}

fn check_pairs<'a, S: AsRef<str>>(
    candidates: &'a [S],
    references: &'a [S],
) -> Result<impl Iterator<Item = (&'a str, &'a str)>, MetricsError> {
    if candidates.len() != references.len() {
        return Err(MetricsError::LengthMismatch { candidates: candidates.len(), references: references.len() });
    }
    if candidates.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    Ok(candidates.iter().zip(references).map(|(c, r)| (c.as_ref(), r.as_ref())))
}
