//! Token counting and budget truncation.
//!
//! Two modes are supported. Whitespace mode splits on whitespace runs and
//! keeps punctuation attached. Subword mode splits each whitespace word by
//! greedy longest match against a plain-text vocabulary; characters with no
//! vocabulary entry become single-character tokens, and the literal `<sep>`
//! marker is always one token.
//!
//! Tokens are byte ranges into the original text, so truncation always
//! returns a prefix of its input.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Markers that are never split by the subword segmenter.
const SPECIAL_TOKENS: &[&str] = &["<sep>"];

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("subword mode requires a vocabulary file")]
    VocabularyNotLoaded,
    #[error("failed to read vocabulary {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("vocabulary line {line}: {reason}")]
    BadVocabulary { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerMode {
    Whitespace,
    Subword,
}

/// A subword vocabulary: one entry per line, optionally followed by a tab
/// and an integer rank. Lines without a rank take their line order.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    ranks: HashMap<String, u32>,
    longest: usize,
}

impl Vocabulary {
    pub fn parse(source: &str) -> Result<Self, TokenizerError> {
        let mut ranks = HashMap::new();
        let mut longest = 0;
        for (idx, line) in source.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (token, rank) = match line.split_once('\t') {
                Some((token, rank)) => {
                    let rank = rank.trim().parse::<u32>().map_err(|e| {
                        TokenizerError::BadVocabulary {
                            line: idx + 1,
                            reason: format!("bad rank {rank:?}: {e}"),
                        }
                    })?;
                    (token, rank)
                }
                None => (line, idx as u32),
            };
            if token.chars().any(char::is_whitespace) {
                return Err(TokenizerError::BadVocabulary {
                    line: idx + 1,
                    reason: "entry contains whitespace".into(),
                });
            }
            longest = longest.max(token.chars().count());
            ranks.entry(token.to_string()).or_insert(rank);
        }
        Ok(Self { ranks, longest })
    }

    pub fn load(path: &Path) -> Result<Self, TokenizerError> {
        let source = fs::read_to_string(path).map_err(|source| TokenizerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&source)
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.ranks.contains_key(piece)
    }

    pub fn rank(&self, piece: &str) -> Option<u32> {
        self.ranks.get(piece).copied()
    }
}

#[derive(Debug, Clone, Default)]
pub enum Tokenizer {
    #[default]
    Whitespace,
    Subword(Vocabulary),
}

impl fmt::Display for Tokenizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tokenizer::Whitespace => f.write_str("whitespace"),
            Tokenizer::Subword(vocab) => write!(f, "subword({} entries)", vocab.len()),
        }
    }
}

impl Tokenizer {
    pub fn from_mode(mode: TokenizerMode, vocab: Option<&Path>) -> Result<Self, TokenizerError> {
        match (mode, vocab) {
            (TokenizerMode::Whitespace, _) => Ok(Tokenizer::Whitespace),
            (TokenizerMode::Subword, Some(path)) => Ok(Tokenizer::Subword(Vocabulary::load(path)?)),
            (TokenizerMode::Subword, None) => Err(TokenizerError::VocabularyNotLoaded),
        }
    }

    pub fn mode(&self) -> TokenizerMode {
        match self {
            Tokenizer::Whitespace => TokenizerMode::Whitespace,
            Tokenizer::Subword(_) => TokenizerMode::Subword,
        }
    }

    /// Byte ranges of each token in `text`, in order.
    pub fn spans(&self, text: &str) -> Vec<Range<usize>> {
        let words = whitespace_spans(text);
        match self {
            Tokenizer::Whitespace => words,
            Tokenizer::Subword(vocab) => {
                let mut out = Vec::with_capacity(words.len() * 2);
                for word in words {
                    segment_word(vocab, text, word, &mut out);
                }
                out
            }
        }
    }

    pub fn tokenize<'a>(&self, text: &'a str) -> Vec<&'a str> {
        self.spans(text).into_iter().map(|r| &text[r]).collect()
    }

    pub fn count(&self, text: &str) -> usize {
        self.spans(text).len()
    }

    /// Longest prefix of `text` holding at most `budget` tokens and ending
    /// on a token boundary. Text already within budget is returned whole.
    pub fn truncate<'a>(&self, text: &'a str, budget: usize) -> &'a str {
        let spans = self.spans(text);
        if spans.len() <= budget {
            return text;
        }
        match budget.checked_sub(1).map(|i| spans[i].end) {
            Some(end) => &text[..end],
            None => "",
        }
    }
}

fn whitespace_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push(s..i);
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push(s..text.len());
    }
    spans
}

fn segment_word(vocab: &Vocabulary, text: &str, word: Range<usize>, out: &mut Vec<Range<usize>>) {
    let mut pos = word.start;
    while pos < word.end {
        let rest = &text[pos..word.end];
        if let Some(special) = SPECIAL_TOKENS.iter().find(|s| rest.starts_with(**s)) {
            out.push(pos..pos + special.len());
            pos += special.len();
            continue;
        }
        // Pieces never swallow the start of a special marker.
        let limit = SPECIAL_TOKENS
            .iter()
            .filter_map(|s| rest.find(s))
            .min()
            .unwrap_or(rest.len());
        let rest = &rest[..limit];
        let ends: Vec<usize> = rest
            .char_indices()
            .map(|(i, c)| i + c.len_utf8())
            .take(vocab.longest.max(1))
            .collect();
        let len = ends
            .iter()
            .rev()
            .copied()
            .find(|&end| vocab.contains(&rest[..end]))
            .unwrap_or(ends[0]);
        out.push(pos..pos + len);
        pos += len;
    }
}
