use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Utc};

use super::CliError;
use crate::centrality::{Convergence, PageRankParams, TunkRankParams};
use crate::dynamics::{ForceSource, MassMode};
use crate::evaluation::QuartileRule;
use crate::ingest::parse_timestamp;
use crate::synth::{Burst, SynthConfig};

/// Keys accepted in config files and `--set`.
pub const RUN_KEYS: &[&str] = &[
    "events",
    "edges",
    "clicks",
    "follower_counts",
    "zeta",
    "mass_mode",
    "default_mass",
    "force_source",
    "threshold",
    "k",
    "week",
    "week_hours",
    "epoch",
    "damping",
    "retweet_prob",
    "tol",
    "max_iter",
    "quartile_rule",
    "iqr_k",
    "max_skip_rate",
    "algorithm",
];

pub const SYNTH_KEYS: &[&str] = &[
    "seed",
    "users",
    "hours",
    "week_hours",
    "celebrity_fraction",
    "bursts",
    "base_mention_rate",
    "post_rate",
    "graph_model",
    "mean_followees",
    "spam_cluster_size",
    "retweet_fraction",
    "urls",
    "recurring_url_fraction",
    "min_promoters",
    "max_promoters",
    "signal",
    "base_click_prob",
    "click_noise",
    "mode",
];

/// Ordered key/value settings; later entries win.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Reads a flat `key = value` file. `#` starts a comment line.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut s = Settings::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("{}:{}: expected key = value", path.display(), idx + 1))
            })?;
            s.set(k.trim(), v.trim())?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !RUN_KEYS.contains(&key) && !SYNTH_KEYS.contains(&key) {
            return Err(CliError::Usage(format!("unknown setting `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected KEY=VALUE, got `{pair}`")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| CliError::Usage(format!("bad value for {key} (`{v}`): {e}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Zeta {
    Auto,
    Fixed(f64),
}

impl FromStr for Zeta {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Zeta::Auto);
        }
        s.parse::<f64>()
            .map(Zeta::Fixed)
            .map_err(|_| "expected `auto` or a number".to_string())
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub events: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub clicks: Option<PathBuf>,
    pub follower_counts: Option<PathBuf>,
    pub zeta: Zeta,
    pub mass_mode: MassMode,
    pub default_mass: f64,
    pub force_source: ForceSource,
    pub threshold: f64,
    pub k: usize,
    pub week: Option<u64>,
    pub week_hours: u64,
    /// Start of hour 0; defaults to midnight UTC of the earliest event.
    pub epoch: Option<DateTime<Utc>>,
    pub pagerank: PageRankParams,
    pub tunkrank: TunkRankParams,
    pub convergence: Convergence,
    pub quartile_rule: QuartileRule,
    pub iqr_k: f64,
    pub max_skip_rate: f64,
    pub algorithm: String,
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self, CliError> {
        let path = |key: &str| s.get(key).map(PathBuf::from);
        let convergence = Convergence {
            tol: s.parse("tol", 1e-8)?,
            max_iter: s.parse("max_iter", 200)?,
        };
        let epoch = match s.get("epoch") {
            None | Some("auto") => None,
            Some(v) => Some(parse_timestamp(v).map_err(|e| CliError::Usage(e.to_string()))?),
        };
        let cfg = RunConfig {
            events: path("events"),
            edges: path("edges"),
            clicks: path("clicks"),
            follower_counts: path("follower_counts"),
            zeta: s.parse("zeta", Zeta::Auto)?,
            mass_mode: s.parse("mass_mode", MassMode::RawFollowers)?,
            default_mass: s.parse("default_mass", 1.0)?,
            force_source: s.parse("force_source", ForceSource::Mentions)?,
            threshold: s.parse("threshold", 0.10)?,
            k: s.parse("k", 5)?,
            week: s.get("week").map(|_| s.parse("week", 0)).transpose()?,
            week_hours: s.parse("week_hours", 168)?,
            epoch,
            pagerank: PageRankParams {
                damping: s.parse("damping", 0.85)?,
                convergence,
            },
            tunkrank: TunkRankParams {
                retweet_prob: s.parse("retweet_prob", 0.05)?,
                convergence,
            },
            convergence,
            quartile_rule: s.parse("quartile_rule", QuartileRule::Linear)?,
            iqr_k: s.parse("iqr_k", 1.5)?,
            max_skip_rate: s.parse("max_skip_rate", 0.01)?,
            algorithm: s.get("algorithm").unwrap_or("all").to_string(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if let Zeta::Fixed(z) = self.zeta {
            if !(z >= 0.0 && z.is_finite()) {
                return bad(format!("zeta must be >= 0, got {z}"));
            }
        }
        if !(self.threshold >= 0.0) {
            return bad(format!("threshold must be >= 0, got {}", self.threshold));
        }
        if self.week_hours == 0 {
            return bad("week_hours must be > 0".into());
        }
        if !(0.0..=1.0).contains(&self.max_skip_rate) {
            return bad(format!("max_skip_rate must lie in [0, 1], got {}", self.max_skip_rate));
        }
        if !(self.iqr_k >= 0.0) {
            return bad(format!("iqr_k must be >= 0, got {}", self.iqr_k));
        }
        if !(self.default_mass > 0.0 && self.default_mass.is_finite()) {
            return bad(format!("default_mass must be > 0, got {}", self.default_mass));
        }
        for p in [&self.events, &self.edges, &self.clicks, &self.follower_counts]
            .into_iter()
            .flatten()
        {
            if std::fs::metadata(p).is_err() {
                return bad(format!("cannot read {}", p.display()));
            }
        }
        Ok(())
    }
}

pub fn synth_config(s: &Settings) -> Result<SynthConfig, CliError> {
    let d = SynthConfig::default();
    let bursts = match s.get("bursts") {
        None | Some("") => Vec::new(),
        Some(list) => list
            .split(',')
            .map(|b| b.parse::<Burst>().map_err(CliError::Usage))
            .collect::<Result<_, _>>()?,
    };
    let cfg = SynthConfig {
        seed: s.parse("seed", d.seed)?,
        users: s.parse("users", d.users)?,
        hours: s.parse("hours", d.hours)?,
        week_hours: s.parse("week_hours", d.week_hours)?,
        celebrity_fraction: s.parse("celebrity_fraction", d.celebrity_fraction)?,
        bursts,
        base_mention_rate: s.parse("base_mention_rate", d.base_mention_rate)?,
        post_rate: s.parse("post_rate", d.post_rate)?,
        graph_model: s.parse("graph_model", d.graph_model)?,
        mean_followees: s.parse("mean_followees", d.mean_followees)?,
        spam_cluster_size: s.parse("spam_cluster_size", d.spam_cluster_size)?,
        retweet_fraction: s.parse("retweet_fraction", d.retweet_fraction)?,
        urls: s.parse("urls", d.urls)?,
        recurring_url_fraction: s.parse("recurring_url_fraction", d.recurring_url_fraction)?,
        min_promoters: s.parse("min_promoters", d.min_promoters)?,
        max_promoters: s.parse("max_promoters", d.max_promoters)?,
        signal: s.parse("signal", d.signal)?,
        base_click_prob: s.parse("base_click_prob", d.base_click_prob)?,
        click_noise: s.parse("click_noise", d.click_noise)?,
        mode: s.parse("mode", d.mode)?,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}
