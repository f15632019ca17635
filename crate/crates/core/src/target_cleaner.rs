//! Cleaning of target summaries.
//!
//! The text is cut into segments at blank lines (lines holding only
//! whitespace). Inside a segment, line breaks become spaces, whitespace runs
//! collapse to one space and the ends are trimmed. Empty segments are dropped
//! and the rest are joined with a single blank line.

use std::fmt;

use serde::{Deserialize, Serialize};

const SEGMENT_BREAK: &str = "\n\n";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CleanedTarget(String);

impl CleanedTarget {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    pub fn segments(&self) -> impl Iterator<Item = &str> {
        self.0.split(SEGMENT_BREAK).filter(|s| !s.is_empty())
    }
}

impl fmt::Display for CleanedTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for CleanedTarget {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

pub fn clean_target(raw: &str) -> CleanedTarget {
    let mut segments: Vec<String> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in raw.split('\n') {
        if line.trim().is_empty() {
            flush(&mut current, &mut segments);
        } else {
            current.push(line);
        }
    }
    flush(&mut current, &mut segments);
    CleanedTarget(segments.join(SEGMENT_BREAK))
}

fn flush(lines: &mut Vec<&str>, segments: &mut Vec<String>) {
    let joined = lines.iter().flat_map(|l| l.split_whitespace()).collect::<Vec<_>>().join(" ");
    if !joined.is_empty() {
        segments.push(joined);
    }
    lines.clear();
}
