use std::io::{self, Read};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use discharge_prep::corpus_io::{self, corpus_stats, read_prepared, NoteFormat, SplitSpec, DEFAULT_BUCKET_WIDTH};
use discharge_prep::input_builder::DEFAULT_INPUT_BUDGET;
use discharge_prep::pipeline::{run_prepare, run_score, run_split, PipelineConfig, PipelineError, TargetSelection};
use discharge_prep::target_cleaner::clean_target;
use discharge_prep::tokenizer::{Tokenizer, TokenizerMode};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

#[derive(Parser)]
#[command(name = "discharge-prep", version, about = "Prepare discharge notes for summary generation and score the results")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct TokenizerArgs {
    /// Token unit used for budgets and statistics.
    #[arg(long, value_enum, default_value_t = TokenizerMode::Whitespace)]
    tokenizer: TokenizerMode,
    /// Vocabulary file for the subword tokenizer.
    #[arg(long)]
    vocab: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SplitArgs {
    /// Training fraction, as a ratio ("4/5") or decimal ("0.8").
    #[arg(long, default_value = "4/5")]
    train_fraction: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SplitArgs {
    fn spec(&self) -> anyhow::Result<SplitSpec> {
        let spec: SplitSpec = self.train_fraction.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
        Ok(spec.with_seed(self.seed))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build (input, target) example files for training and validation.
    Prepare {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        format: Option<NoteFormat>,
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = TargetSelection::Both)]
        targets: TargetSelection,
        #[command(flatten)]
        tokenizer: TokenizerArgs,
        /// Maximum input length in tokens.
        #[arg(long, default_value_t = DEFAULT_INPUT_BUDGET)]
        budget: usize,
        #[command(flatten)]
        split: SplitArgs,
        /// Reference summaries (hadm_id, brief_hospital_course, discharge_instructions).
        #[arg(long)]
        target_file: Option<PathBuf>,
    },
    /// Split a note corpus into train.jsonl and validation.jsonl.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        format: Option<NoteFormat>,
        #[arg(long)]
        output_dir: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Clean a target summary read from a file or standard input.
    CleanTargets {
        /// Text file; standard input when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Token-length statistics as JSON.
    Stats {
        #[arg(long)]
        input: PathBuf,
        /// Which text to measure.
        #[arg(long, value_enum, default_value_t = StatsField::Text)]
        field: StatsField,
        #[arg(long, value_enum)]
        format: Option<NoteFormat>,
        #[command(flatten)]
        tokenizer: TokenizerArgs,
        #[arg(long, default_value_t = DEFAULT_BUCKET_WIDTH)]
        bucket_width: usize,
    },
    /// Score generations against references.
    Score {
        /// Generations JSONL (hadm_id, target, generated_text).
        #[arg(long)]
        generated: PathBuf,
        /// Prepared-example JSONL whose target_text is the reference.
        #[arg(long)]
        reference: PathBuf,
        /// Externally computed scores JSONL (target, metric, value).
        #[arg(long)]
        external_scores: Option<PathBuf>,
        #[arg(long)]
        output_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StatsField {
    /// Raw note text of a note corpus.
    Text,
    /// input_text of a prepared file.
    InputText,
    /// target_text of a prepared file.
    TargetText,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let usage = err.downcast_ref::<PipelineError>().map(PipelineError::is_usage).unwrap_or(false)
                || err.downcast_ref::<UsageError>().is_some();
            ExitCode::from(if usage { EXIT_USAGE } else { EXIT_DATA })
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn tokenizer_from(args: &TokenizerArgs) -> anyhow::Result<Tokenizer> {
    if args.tokenizer == TokenizerMode::Subword && args.vocab.is_none() {
        return Err(UsageError("--tokenizer subword needs --vocab".into()).into());
    }
    Ok(Tokenizer::from_mode(args.tokenizer, args.vocab.as_deref())?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Prepare { input, format, output_dir, targets, tokenizer, budget, split, target_file } => {
            if tokenizer.tokenizer == TokenizerMode::Subword && tokenizer.vocab.is_none() {
                return Err(UsageError("--tokenizer subword needs --vocab".into()).into());
            }
            let split = split.spec().map_err(|e| UsageError(e.to_string()))?;
            let mut config = PipelineConfig::new(input, output_dir);
            config.format = format;
            config.targets = targets;
            config.tokenizer = tokenizer.tokenizer;
            config.vocab = tokenizer.vocab;
            config.budget = budget;
            config.split = split;
            config.target_file = target_file;
            let manifest = run_prepare(&config)?;
            for (target, c) in &manifest.counts {
                info!("{target}: {} train / {} validation", c.train, c.validation);
            }
        }
        Command::Split { input, format, output_dir, split } => {
            let mut config = PipelineConfig::new(input, output_dir);
            config.format = format;
            config.split = split.spec().map_err(|e| UsageError(e.to_string()))?;
            let (train, validation) = run_split(&config)?;
            info!("{train} train / {validation} validation notes");
        }
        Command::CleanTargets { input } => {
            let raw = match input {
                Some(path) => std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?,
                None => {
                    let mut buf = String::new();
                    io::stdin().read_to_string(&mut buf).context("reading standard input")?;
                    buf
                }
            };
            println!("{}", clean_target(&raw));
        }
        Command::Stats { input, field, format, tokenizer, bucket_width } => {
            let tok = tokenizer_from(&tokenizer)?;
            let texts: Vec<String> = match field {
                StatsField::Text => {
                    let format = format.unwrap_or_else(|| NoteFormat::from_path(&input));
                    corpus_io::load_notes(&input, format)?.into_iter().map(|n| n.text).collect()
                }
                StatsField::InputText => read_prepared(&input)?.into_iter().map(|e| e.input_text).collect(),
                StatsField::TargetText => read_prepared(&input)?.into_iter().map(|e| e.target_text).collect(),
            };
            let stats = corpus_stats(&texts, &tok, bucket_width)?;
            let json = serde_json::json!({ "tokenizer": tok.to_string(), "stats": stats });
            println!("{}", serde_json::to_string_pretty(&json)?);
        }
        Command::Score { generated, reference, external_scores, output_dir } => {
            let report = run_score(&generated, &reference, external_scores.as_deref(), &output_dir)?;
            print!("{}", report.render_table());
        }
    }
    Ok(())
}
