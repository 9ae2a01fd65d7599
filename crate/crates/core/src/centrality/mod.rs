//! Baseline influence scorers over the follower graph and the retweet graph.

mod passivity;
mod pagerank;
mod tunkrank;

pub use pagerank::{pagerank, pagerank_indexed, PageRankParams};
pub use passivity::{
    build_retweet_graph, influence_passivity, influence_passivity_indexed, IpOutcome, RetweetGraph,
    RetweetGraphStats,
};
pub use tunkrank::{tunkrank, tunkrank_indexed, TunkRankParams};

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::ingest::{UserGraph, UserId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CentralityError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("retweet graph has no edges")]
    NoRetweetEdges,
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("score file line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for CentralityError {
    fn from(e: std::io::Error) -> Self {
        CentralityError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Followers,
    FollowRatio,
    PageRank,
    TunkRank,
    Influence,
    Passivity,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Followers => "followers",
            Algorithm::FollowRatio => "ratio",
            Algorithm::PageRank => "pagerank",
            Algorithm::TunkRank => "tunkrank",
            Algorithm::Influence => "ip_influence",
            Algorithm::Passivity => "ip_passivity",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Scores of one algorithm plus its convergence record.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub algorithm: Algorithm,
    pub scores: BTreeMap<UserId, f64>,
    pub iterations: usize,
    /// L1 change of the last iteration.
    pub residual: f64,
    pub converged: bool,
}

impl ScoreVector {
    fn from_indexed(
        algorithm: Algorithm,
        users: &[UserId],
        values: &[f64],
        iterations: usize,
        residual: f64,
        converged: bool,
    ) -> Self {
        ScoreVector {
            algorithm,
            scores: users.iter().cloned().zip(values.iter().copied()).collect(),
            iterations,
            residual,
            converged,
        }
    }

    /// Score of `user`, 0 when unscored.
    pub fn get(&self, user: &UserId) -> f64 {
        self.scores.get(user).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.scores.values().sum()
    }
}

/// Shared stopping rule for the fixed-point scorers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    /// Stop once the L1 change of an iteration is at most this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for Convergence {
    fn default() -> Self {
        Convergence {
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

impl Convergence {
    fn validate(&self) -> Result<(), CentralityError> {
        if !(self.tol >= 0.0) || self.max_iter == 0 {
            return Err(CentralityError::Parameter(format!(
                "tol must be >= 0 and max_iter > 0 (got {}, {})",
                self.tol, self.max_iter
            )));
        }
        Ok(())
    }
}

/// Follower count of every node (zero-iteration scorer).
pub fn followers_scores(graph: &UserGraph) -> ScoreVector {
    let scores = graph
        .users()
        .iter()
        .map(|u| (u.clone(), graph.follower_count(u).unwrap_or(0) as f64))
        .collect();
    ScoreVector {
        algorithm: Algorithm::Followers,
        scores,
        iterations: 0,
        residual: 0.0,
        converged: true,
    }
}

/// Followers divided by followees; a user following nobody divides by one.
pub fn follow_ratio_scores(graph: &UserGraph) -> ScoreVector {
    let scores = graph
        .users()
        .iter()
        .map(|u| {
            let followers = graph.follower_count(u).unwrap_or(0) as f64;
            let followees = graph.followee_count(u).unwrap_or(0).max(1) as f64;
            (u.clone(), followers / followees)
        })
        .collect();
    ScoreVector {
        algorithm: Algorithm::FollowRatio,
        scores,
        iterations: 0,
        residual: 0.0,
        converged: true,
    }
}

pub(crate) fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Divides by the sum when it is positive; returns whether it was.
pub(crate) fn normalize_l1(v: &mut [f64]) -> bool {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
        true
    } else {
        false
    }
}

/// Writes `user<TAB>score` lines in lexicographic user order, 12 significant digits.
pub fn write_scores<W: Write>(mut w: W, scores: &ScoreVector) -> std::io::Result<()> {
    for (user, score) in &scores.scores {
        writeln!(w, "{}\t{}", user, crate::fmt::sig12(*score))?;
    }
    Ok(())
}

pub fn read_scores<R: BufRead>(reader: R) -> Result<BTreeMap<UserId, f64>, CentralityError> {
    let mut out = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| CentralityError::Format {
            line: idx + 1,
            reason,
        };
        let (u, s) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected user<TAB>score".into()))?;
        let user = UserId::parse(u).map_err(|e| bad(e.to_string()))?;
        let score = s
            .trim()
            .parse::<f64>()
            .map_err(|_| bad(format!("bad score `{s}`")))?;
        out.insert(user, score);
    }
    Ok(out)
}
