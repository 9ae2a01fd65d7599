//! Damped-motion influence model.
//!
//! Each user carries a mass (follower count), receives an applied force each
//! hour (mentions addressed to them) and moves with velocity
//!
//! ```text
//! v[t] = max(0, v[t-1] + F[t] / m - zeta)
//! ```
//!
//! where `zeta` is a per-hour damping constant. Acceleration is the realized
//! per-hour change `v[t] - v[t-1]` after clamping.

mod engine;
mod snapshot_file;
mod trending;

pub use engine::{Kinetics, Snapshot};
pub use snapshot_file::{read_checkpoints, read_snapshots, write_checkpoints, write_snapshots, SnapshotStore};
pub use trending::{trending, TrendingEntry};

use std::collections::{BTreeSet, HashMap};
use std::str::FromStr;

use thiserror::Error;

use crate::ingest::{HourBucket, UserGraph, UserId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid kinetics configuration: {0}")]
    Config(String),
    #[error("bucket for hour {got} does not follow hour {expected}")]
    NonContiguous { expected: u64, got: u64 },
    #[error("hour {0} lies beyond the last processed hour")]
    BoundaryAhead(u64),
    #[error("no snapshot retained for hour {0}")]
    UnknownBoundary(u64),
    #[error("cannot estimate damping: {0}")]
    Estimate(&'static str),
    #[error("snapshot file line {line}: {reason}")]
    SnapshotFormat { line: usize, reason: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for DynamicsError {
    fn from(e: std::io::Error) -> Self {
        DynamicsError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassMode {
    RawFollowers,
    LnFollowers,
}

impl FromStr for MassMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" | "raw_followers" => Ok(MassMode::RawFollowers),
            "ln" | "ln_followers" => Ok(MassMode::LnFollowers),
            _ => Err(format!("unknown mass mode `{s}` (expected raw_followers or ln_followers)")),
        }
    }
}

/// Which per-hour tally acts as applied force.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForceSource {
    Mentions,
    Retweets,
}

impl FromStr for ForceSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mentions" => Ok(ForceSource::Mentions),
            "retweets" => Ok(ForceSource::Retweets),
            _ => Err(format!("unknown force source `{s}` (expected mentions or retweets)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KineticsConfig {
    /// Damping per hour, in mentions per hour per follower.
    pub zeta: f64,
    pub mass_mode: MassMode,
    /// Mass of users without follower data (or with zero followers in raw mode).
    pub default_mass: f64,
    pub force_source: ForceSource,
}

impl Default for KineticsConfig {
    fn default() -> Self {
        KineticsConfig {
            zeta: 0.0,
            mass_mode: MassMode::RawFollowers,
            default_mass: 1.0,
            force_source: ForceSource::Mentions,
        }
    }
}

impl KineticsConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.zeta.is_finite() && self.zeta >= 0.0) {
            return Err(DynamicsError::Config(format!("zeta must be finite and >= 0, got {}", self.zeta)));
        }
        if !(self.default_mass.is_finite() && self.default_mass >= 1.0) {
            return Err(DynamicsError::Config(format!(
                "default mass must be >= 1, got {}",
                self.default_mass
            )));
        }
        Ok(())
    }

    /// Mass for a user with the given follower count (`None`: no graph data).
    pub fn mass(&self, followers: Option<u64>) -> f64 {
        match (followers, self.mass_mode) {
            (None, _) | (Some(0), MassMode::RawFollowers) => self.default_mass,
            (Some(f), MassMode::RawFollowers) => f as f64,
            (Some(f), MassMode::LnFollowers) => ((f as f64).ln() + 1.0).max(1.0),
        }
    }

    fn force<'a>(&self, bucket: &'a HourBucket) -> &'a std::collections::BTreeMap<UserId, u32> {
        match self.force_source {
            ForceSource::Mentions => &bucket.force,
            ForceSource::Retweets => &bucket.retweet_force,
        }
    }
}

/// User masses frozen when the state is created.
#[derive(Debug, Clone)]
pub struct MassTable {
    masses: HashMap<UserId, f64>,
    default_mass: f64,
}

impl MassTable {
    pub fn from_graph(graph: &UserGraph, cfg: &KineticsConfig) -> Result<Self, DynamicsError> {
        cfg.validate()?;
        let masses = graph
            .users()
            .iter()
            .chain(graph.overrides().keys())
            .map(|u| (u.clone(), cfg.mass(graph.follower_count(u))))
            .collect::<HashMap<_, _>>();
        if let Some((u, m)) = masses.iter().find(|(_, &m)| !(m > 0.0 && m.is_finite())) {
            return Err(DynamicsError::Config(format!("non-positive mass {m} for {u}")));
        }
        Ok(MassTable {
            masses,
            default_mass: cfg.default_mass,
        })
    }

    /// Every user gets `default_mass`.
    pub fn uniform(cfg: &KineticsConfig) -> Result<Self, DynamicsError> {
        cfg.validate()?;
        Ok(MassTable {
            masses: HashMap::new(),
            default_mass: cfg.default_mass,
        })
    }

    pub fn mass(&self, user: &UserId) -> f64 {
        self.masses.get(user).copied().unwrap_or(self.default_mass)
    }
}

/// Damping estimate: mean mentions per hour per user, divided by the mean
/// follower count over graph nodes.
///
/// Users counted are those mentioned or authoring at least once.
pub fn estimate_zeta(buckets: &[HourBucket], graph: &UserGraph) -> Result<f64, DynamicsError> {
    if buckets.is_empty() {
        return Err(DynamicsError::Estimate("no hours"));
    }
    let mean_followers = graph
        .mean_follower_count()
        .ok_or(DynamicsError::Estimate("empty graph"))?;
    let total: u64 = buckets.iter().map(HourBucket::total_force).sum();
    if total == 0 {
        return Ok(0.0);
    }
    let users: BTreeSet<&UserId> = buckets
        .iter()
        .flat_map(|b| b.force.keys().chain(b.authors.iter()))
        .collect();
    if mean_followers <= 0.0 {
        return Err(DynamicsError::Estimate("graph has no followers"));
    }
    let per_user_hour = total as f64 / (buckets.len() as f64 * users.len() as f64);
    Ok(per_user_hour / mean_followers)
}
