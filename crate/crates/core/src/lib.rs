//! Preprocessing and evaluation toolkit for discharge summary generation.
//!
//! The pipeline turns raw discharge notes into `(input, target)` text pairs:
//! the two target sections are removed from the note, fourteen source
//! sections are extracted and normalized, each is prefixed with a fixed
//! prompt, ordered by a per-target priority and joined with `<sep>`. Target
//! sections are cleaned of hard wraps. Generated summaries are scored with
//! BLEU-4, ROUGE-1/2/L and METEOR, and merged with externally computed
//! model-based scores into a single Overall value.

pub mod corpus_io;
pub mod input_builder;
pub mod metrics;
pub mod pipeline;
pub mod section_extractor;
pub mod target_cleaner;
pub mod tokenizer;

pub use corpus_io::{DischargeNote, LengthStats, PreparedExample, SplitSpec};
pub use input_builder::{build_input, priorities_for, prompt_for, PromptSpec, TargetKind, SEP};
pub use section_extractor::{extract_sections, strip_targets, SectionKind, SectionSet};
pub use target_cleaner::{clean_target, CleanedTarget};
pub use tokenizer::{Tokenizer, TokenizerMode};
