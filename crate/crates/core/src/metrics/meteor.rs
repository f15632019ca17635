//! METEOR with exact and stem matching stages.
//!
//! Each stage aligns still-unmatched unigrams by greedy tiling: the longest
//! contiguous runs shared by candidate and reference are taken first, which
//! keeps the chunk count low. Synonym and paraphrase stages are not
//! implemented.

use std::sync::LazyLock;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use super::normalize_tokens;

static STEMMER: LazyLock<Stemmer> = LazyLock::new(|| Stemmer::create(Algorithm::English));

const ALPHA: f64 = 0.9;
const BETA: f64 = 3.0;
const GAMMA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeteorScore {
    pub matches: usize,
    pub chunks: usize,
    pub candidate_len: usize,
    pub reference_len: usize,
    pub fmean: f64,
    pub penalty: f64,
    pub score: f64,
}

impl MeteorScore {
    pub fn from_counts(matches: usize, chunks: usize, candidate_len: usize, reference_len: usize) -> Self {
        if matches == 0 {
            return Self { matches, chunks, candidate_len, reference_len, fmean: 0.0, penalty: 0.0, score: 0.0 };
        }
        let precision = matches as f64 / candidate_len as f64;
        let recall = matches as f64 / reference_len as f64;
        // 10PR / (R + 9P)
        let fmean = precision * recall / (ALPHA * precision + (1.0 - ALPHA) * recall);
        let penalty = GAMMA * (chunks as f64 / matches as f64).powf(BETA);
        Self { matches, chunks, candidate_len, reference_len, fmean, penalty, score: fmean * (1.0 - penalty) }
    }
}

/// Matched `(candidate index, reference index)` pairs, sorted by candidate.
pub fn align<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> Vec<(usize, usize)> {
    let mut cand_used = vec![false; candidate.len()];
    let mut ref_used = vec![false; reference.len()];
    let mut pairs = Vec::new();

    let exact = |t: &T| t.as_ref().to_string();
    let stem = |t: &T| STEMMER.stem(t.as_ref()).into_owned();
    for key in [&exact as &dyn Fn(&T) -> String, &stem] {
        let cand_keys: Vec<String> = candidate.iter().map(key).collect();
        let ref_keys: Vec<String> = reference.iter().map(key).collect();
        tile(&cand_keys, &ref_keys, &mut cand_used, &mut ref_used, &mut pairs);
    }
    pairs.sort_unstable();
    pairs
}

fn tile(
    cand: &[String],
    refs: &[String],
    cand_used: &mut [bool],
    ref_used: &mut [bool],
    pairs: &mut Vec<(usize, usize)>,
) {
    let width = refs.len() + 1;
    let mut run = vec![0usize; (cand.len() + 1) * width];
    loop {
        // run[i][j]: length of the free common run ending at cand[i-1], refs[j-1].
        let mut longest = 0;
        for i in 1..=cand.len() {
            for j in 1..=refs.len() {
                let cell = if !cand_used[i - 1] && !ref_used[j - 1] && cand[i - 1] == refs[j - 1] {
                    run[(i - 1) * width + j - 1] + 1
                } else {
                    0
                };
                run[i * width + j] = cell;
                longest = longest.max(cell);
            }
        }
        if longest == 0 {
            return;
        }
        let mut starts: Vec<(usize, usize)> = Vec::new();
        for i in 1..=cand.len() {
            for j in 1..=refs.len() {
                if run[i * width + j] >= longest {
                    starts.push((i - longest, j - longest));
                }
            }
        }
        starts.sort_unstable();
        for (ci, rj) in starts {
            if (0..longest).any(|k| cand_used[ci + k] || ref_used[rj + k]) {
                continue;
            }
            for k in 0..longest {
                cand_used[ci + k] = true;
                ref_used[rj + k] = true;
                pairs.push((ci + k, rj + k));
            }
        }
    }
}

/// Number of runs that are contiguous in both sequences.
pub fn count_chunks(sorted_pairs: &[(usize, usize)]) -> usize {
    if sorted_pairs.is_empty() {
        return 0;
    }
    1 + sorted_pairs
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

pub fn meteor_tokens<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> MeteorScore {
    let pairs = align(candidate, reference);
    MeteorScore::from_counts(pairs.len(), count_chunks(&pairs), candidate.len(), reference.len())
}

/// METEOR score of one candidate against one reference.
pub fn meteor(candidate: &str, reference: &str) -> f64 {
    meteor_tokens(&normalize_tokens(candidate), &normalize_tokens(reference)).score
}
