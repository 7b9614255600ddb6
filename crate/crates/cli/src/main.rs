//! `phonemix`: ingest a corpus, train duration strategies, compare them and
//! inspect predicted phoneme durations.

mod config;
mod corpus;
mod evaluate;
mod infer;
mod ingest;
mod synth;
mod train;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

/// A mistake in how the tool was invoked or configured.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "phonemix", version, about = "Phoneme duration strategies for singing voice synthesis")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "phonemix.toml")]
    pub config: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// type1, type2 or phoneix.
    #[arg(long, global = true)]
    pub strategy: Option<String>,
    /// Output directory, overriding `paths.out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Machine-readable output on stdout.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic corpus with known phoneme proportions and a run config.
    Synth(synth::SynthArgs),
    /// Parse, align and extract features; writes the manifest.
    Ingest,
    /// Train one strategy and keep the best-validation checkpoint.
    Train,
    /// Evaluate trained strategies on the test split as one table.
    Compare {
        /// Strategies to compare, overriding `compare.strategies`.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        strategies: Option<Vec<String>>,
    },
    /// Evaluate one trained strategy on the test split.
    Eval,
    /// Predict phoneme durations for a score with a PHONEix checkpoint.
    InferDurations(infer::InferArgs),
}

impl Common {
    /// The config file with flag overrides applied. A missing config file is
    /// allowed only when it is the implicit default.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = if self.config.exists() {
            RunConfig::load(&self.config)?
        } else if self.config.as_os_str() == "phonemix.toml" {
            RunConfig::default()
        } else {
            return Err(UsageError(format!("config file {} not found", self.config.display())).into());
        };
        if let Some(seed) = self.seed {
            cfg.train.seed = seed;
        }
        if let Some(s) = &self.strategy {
            cfg.strategy(s)?;
            cfg.train.strategy = s.clone();
        }
        if let Some(out) = &self.out {
            cfg.paths.out = out.clone();
        }
        cfg.model.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    match cli.command {
        Command::Synth(args) => synth::run(common, &args),
        Command::Ingest => {
            let cfg = common.run_config()?;
            let summary = ingest::run(&cfg)?;
            let m = &summary.manifest;
            if common.json {
                println!("{}", serde_json::to_string(&m.report)?);
            } else {
                let segments: usize = m.songs.iter().map(|s| s.segments.len()).sum();
                println!("{} songs, {segments} segments -> {}", m.songs.len(), summary.path.display());
            }
            Ok(())
        }
        Command::Train => train::run(&common.run_config()?, common.json),
        Command::Compare { strategies } => {
            let mut cfg = common.run_config()?;
            if let Some(s) = strategies {
                cfg.compare.strategies = s;
            }
            evaluate::compare(&cfg, common.json)
        }
        Command::Eval => evaluate::eval(&common.run_config()?, common.json),
        Command::InferDurations(args) => infer::run(&common.run_config()?, &args, common.json),
    }
}

/// 2 for user or input errors, 1 for internal faults.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<phonemix_core::Error>() {
            return if e.is_user_error() { 2 } else { 1 };
        }
        if cause.is::<UsageError>() || cause.is::<toml::de::Error>() || cause.is::<std::io::Error>() {
            return 2;
        }
    }
    1
}

/// The error chain on one line, skipping causes an outer message already
/// includes.
fn render(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.ends_with(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PHONEMIX_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", render(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_origin() {
        let user: anyhow::Error = phonemix_core::Error::MissingTier("phones".into()).at_path("a.TextGrid").into();
        assert_eq!(exit_code(&user), 2);
        let internal: anyhow::Error = phonemix_core::Error::Numeric("loss is NaN".into()).into();
        assert_eq!(exit_code(&internal), 1);
        assert_eq!(exit_code(&UsageError("x".into()).into()), 2);
        assert_eq!(exit_code(&anyhow::anyhow!("bug")), 1);
        let wrapped = anyhow::Error::from(UsageError("x".into())).context("loading");
        assert_eq!(exit_code(&wrapped), 2);
    }

    #[test]
    fn rendering_drops_repeated_causes() {
        let err: anyhow::Error = phonemix_core::Error::MissingTier("phones".into()).at_path("a.TextGrid").into();
        assert_eq!(render(&err), "a.TextGrid: tier \"phones\" not found");
        let ctx = anyhow::Error::from(UsageError("bad".into())).context("loading");
        assert_eq!(render(&ctx), "loading: bad");
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
