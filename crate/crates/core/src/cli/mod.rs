//! Command-line front end: `score`, `trend`, `centrality`, `eval`, `synth`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error.

mod commands;
mod config;

pub use config::{synth_config, RunConfig, Settings, Zeta, RUN_KEYS, SYNTH_KEYS};

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kinetic", version, about = "Velocity-based influence scoring for mention streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat key = value file with defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Extra KEY=VALUE override (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Replay the event stream and write velocity snapshots.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        events: Option<String>,
        #[arg(long)]
        edges: Option<String>,
        #[arg(long)]
        follower_counts: Option<String>,
        /// Damping per hour, or `auto`.
        #[arg(long)]
        zeta: Option<String>,
        #[arg(long)]
        mass_mode: Option<String>,
        #[arg(long)]
        force_source: Option<String>,
        #[arg(long)]
        week_hours: Option<String>,
        #[arg(long)]
        epoch: Option<String>,
        #[arg(long)]
        max_skip_rate: Option<String>,
    },
    /// List the users trending during one week.
    Trend {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        week: Option<String>,
        #[arg(long)]
        threshold: Option<String>,
        #[arg(long)]
        k: Option<String>,
    },
    /// Compute follower-graph and retweet-graph scores.
    Centrality {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        edges: Option<String>,
        #[arg(long)]
        events: Option<String>,
        /// One algorithm name, or `all`.
        #[arg(long)]
        algorithm: Option<String>,
        #[arg(long)]
        damping: Option<String>,
        #[arg(long)]
        retweet_prob: Option<String>,
        #[arg(long)]
        tol: Option<String>,
        #[arg(long)]
        max_iter: Option<String>,
        #[arg(long)]
        max_skip_rate: Option<String>,
    },
    /// Correlate accumulated scores with URL clicks.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        events: Option<String>,
        #[arg(long)]
        edges: Option<String>,
        #[arg(long)]
        clicks: Option<String>,
        #[arg(long)]
        quartile_rule: Option<String>,
        #[arg(long)]
        iqr_k: Option<String>,
        #[arg(long)]
        max_skip_rate: Option<String>,
    },
    /// Generate a synthetic stream, graph and click table.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        users: Option<String>,
        #[arg(long)]
        hours: Option<String>,
        #[arg(long)]
        urls: Option<String>,
        #[arg(long)]
        signal: Option<String>,
        #[arg(long)]
        mode: Option<String>,
        /// `user:start-end:rate` (repeatable).
        #[arg(long = "burst")]
        bursts: Vec<String>,
    },
}

fn settings(common: &Common, flags: &[(&str, &Option<String>)]) -> Result<Settings, CliError> {
    let mut s = match &common.config {
        Some(p) => Settings::from_file(p)?,
        None => Settings::default(),
    };
    for (key, value) in flags {
        if let Some(v) = value {
            s.set(key, v)?;
        }
    }
    for pair in &common.set {
        s.set_pair(pair)?;
    }
    Ok(s)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn execute<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    ExitCode::from(execute(args))
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Score {
            common,
            events,
            edges,
            follower_counts,
            zeta,
            mass_mode,
            force_source,
            week_hours,
            epoch,
            max_skip_rate,
        } => {
            let s = settings(
                &common,
                &[
                    ("events", &events),
                    ("edges", &edges),
                    ("follower_counts", &follower_counts),
                    ("zeta", &zeta),
                    ("mass_mode", &mass_mode),
                    ("force_source", &force_source),
                    ("week_hours", &week_hours),
                    ("epoch", &epoch),
                    ("max_skip_rate", &max_skip_rate),
                ],
            )?;
            commands::score(&RunConfig::from_settings(&s)?, &s, &common.out)
        }
        Command::Trend {
            common,
            week,
            threshold,
            k,
        } => {
            let s = settings(&common, &[("week", &week), ("threshold", &threshold), ("k", &k)])?;
            commands::trend(&RunConfig::from_settings(&s)?, &common.out)
        }
        Command::Centrality {
            common,
            edges,
            events,
            algorithm,
            damping,
            retweet_prob,
            tol,
            max_iter,
            max_skip_rate,
        } => {
            let s = settings(
                &common,
                &[
                    ("edges", &edges),
                    ("events", &events),
                    ("algorithm", &algorithm),
                    ("damping", &damping),
                    ("retweet_prob", &retweet_prob),
                    ("tol", &tol),
                    ("max_iter", &max_iter),
                    ("max_skip_rate", &max_skip_rate),
                ],
            )?;
            commands::centrality(&RunConfig::from_settings(&s)?, &s, &common.out)
        }
        Command::Eval {
            common,
            events,
            edges,
            clicks,
            quartile_rule,
            iqr_k,
            max_skip_rate,
        } => {
            let s = settings(
                &common,
                &[
                    ("events", &events),
                    ("edges", &edges),
                    ("clicks", &clicks),
                    ("quartile_rule", &quartile_rule),
                    ("iqr_k", &iqr_k),
                    ("max_skip_rate", &max_skip_rate),
                ],
            )?;
            commands::eval(&RunConfig::from_settings(&s)?, &s, &common.out)
        }
        Command::Synth {
            common,
            seed,
            users,
            hours,
            urls,
            signal,
            mode,
            bursts,
        } => {
            let joined = (!bursts.is_empty()).then(|| bursts.join(","));
            let mut s = settings(
                &common,
                &[
                    ("seed", &seed),
                    ("users", &users),
                    ("hours", &hours),
                    ("urls", &urls),
                    ("signal", &signal),
                    ("mode", &mode),
                ],
            )?;
            if let Some(b) = joined {
                s.set("bursts", &b)?;
            }
            commands::synth(&synth_config(&s)?, &s, &common.out)
        }
    }
}
