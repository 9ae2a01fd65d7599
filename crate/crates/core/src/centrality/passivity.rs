//! Influence-Passivity scoring on the retweet interaction graph.
//!
//! Edge `(i, j)` says follower `i` retweeted followee `j`, weighted by
//! `w_ij` = retweets of `j` by `i` over the number of events `j` authored.
//!
//! ```text
//! acceptance(i, j) = w_ij / sum_{k in followees(i)} w_ik
//! rejection(i, j)  = (1 - w_ij) / sum_{k in followers(j)} (1 - w_kj)   (0/0 = 0)
//! I(j) <- sum_{i in followers(j)} acceptance(i, j) * P(i)
//! P(i) <- sum_{j in followees(i)} rejection(i, j) * I(j)
//! ```
//!
//! Each round updates influence from the previous passivity, normalizes it,
//! then updates passivity from the new influence and normalizes that.
//! Iteration starts from uniform vectors. If an update leaves either vector
//! with zero mass the iteration stops there and reports non-convergence.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{l1_distance, normalize_l1, Algorithm, CentralityError, Convergence, ScoreVector};
use crate::ingest::{Event, UserGraph, UserId};

#[derive(Debug, Clone, PartialEq)]
pub struct RetweetGraph {
    users: Vec<UserId>,
    /// (follower, followee, weight), sorted.
    edges: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RetweetGraphStats {
    /// Retweet pairs whose retweeter does not follow the source.
    pub dropped_no_follow: usize,
    /// Retweet pairs whose source authored no events.
    pub dropped_no_opportunity: usize,
}

impl RetweetGraph {
    /// Weighted edges from explicit triples. Weights must lie in (0, 1].
    pub fn from_weighted_edges<I>(edges: I) -> Result<Self, CentralityError>
    where
        I: IntoIterator<Item = (UserId, UserId, f64)>,
    {
        let mut map = BTreeMap::new();
        for (a, b, w) in edges {
            if a == b {
                continue;
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(CentralityError::Parameter(format!(
                    "retweet weight {w} for {a} -> {b} outside (0, 1]"
                )));
            }
            map.insert((a, b), w);
        }
        let users: Vec<UserId> = map
            .keys()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: HashMap<&UserId, usize> = users.iter().enumerate().map(|(i, u)| (u, i)).collect();
        let edges = map
            .iter()
            .map(|((a, b), &w)| (index[a], index[b], w))
            .collect();
        Ok(RetweetGraph { users, edges })
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn weight(&self, follower: &UserId, followee: &UserId) -> Option<f64> {
        let i = self.users.binary_search(follower).ok()?;
        let j = self.users.binary_search(followee).ok()?;
        self.edges
            .iter()
            .find(|&&(a, b, _)| a == i && b == j)
            .map(|&(_, _, w)| w)
    }

    pub fn indexed_edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }
}

/// Builds the interaction graph from retweet attributions, keeping only
/// pairs backed by a follow edge.
pub fn build_retweet_graph(events: &[Event], graph: &UserGraph) -> (RetweetGraph, RetweetGraphStats) {
    let mut authored: HashMap<&UserId, u64> = HashMap::new();
    let mut retweets: BTreeMap<(&UserId, &UserId), u64> = BTreeMap::new();
    for ev in events {
        *authored.entry(&ev.author).or_insert(0) += 1;
        if let Some(src) = &ev.retweet_of {
            *retweets.entry((&ev.author, src)).or_insert(0) += 1;
        }
    }
    let mut stats = RetweetGraphStats::default();
    let mut edges = Vec::new();
    for ((follower, followee), count) in retweets {
        if !graph.follows(follower, followee) {
            stats.dropped_no_follow += 1;
            continue;
        }
        let Some(&opportunities) = authored.get(followee) else {
            stats.dropped_no_opportunity += 1;
            continue;
        };
        let w = (count as f64 / opportunities as f64).min(1.0);
        edges.push((follower.clone(), followee.clone(), w));
    }
    let rg = RetweetGraph::from_weighted_edges(edges).expect("weights are clamped to (0, 1]");
    (rg, stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpOutcome {
    pub influence: ScoreVector,
    pub passivity: ScoreVector,
}

pub fn influence_passivity(rg: &RetweetGraph, conv: &Convergence) -> Result<IpOutcome, CentralityError> {
    let (inf, pas, iterations, residual, converged) =
        influence_passivity_indexed(rg.users.len(), &rg.edges, conv)?;
    Ok(IpOutcome {
        influence: ScoreVector::from_indexed(Algorithm::Influence, &rg.users, &inf, iterations, residual, converged),
        passivity: ScoreVector::from_indexed(Algorithm::Passivity, &rg.users, &pas, iterations, residual, converged),
    })
}

/// Returns (influence, passivity, iterations, residual, converged).
pub fn influence_passivity_indexed(
    n: usize,
    edges: &[(usize, usize, f64)],
    conv: &Convergence,
) -> Result<(Vec<f64>, Vec<f64>, usize, f64, bool), CentralityError> {
    if edges.is_empty() {
        return Err(CentralityError::NoRetweetEdges);
    }
    conv.validate()?;

    let mut accepted_by = vec![0.0; n];
    let mut rejected_from = vec![0.0; n];
    for &(i, j, w) in edges {
        accepted_by[i] += w;
        rejected_from[j] += 1.0 - w;
    }
    // (follower, followee, acceptance, rejection)
    let rates: Vec<(usize, usize, f64, f64)> = edges
        .iter()
        .map(|&(i, j, w)| {
            let acc = if accepted_by[i] > 0.0 { w / accepted_by[i] } else { 0.0 };
            let rej = if rejected_from[j] > 0.0 {
                (1.0 - w) / rejected_from[j]
            } else {
                0.0
            };
            (i, j, acc, rej)
        })
        .collect();

    let mut inf = vec![1.0 / n as f64; n];
    let mut pas = inf.clone();
    let mut residual = f64::INFINITY;
    for iter in 1..=conv.max_iter {
        let mut next_inf = vec![0.0; n];
        for &(i, j, acc, _) in &rates {
            next_inf[j] += acc * pas[i];
        }
        let mut alive = normalize_l1(&mut next_inf);
        let mut next_pas = vec![0.0; n];
        for &(i, j, _, rej) in &rates {
            next_pas[i] += rej * next_inf[j];
        }
        alive &= normalize_l1(&mut next_pas);
        residual = l1_distance(&inf, &next_inf) + l1_distance(&pas, &next_pas);
        inf = next_inf;
        pas = next_pas;
        if !alive {
            return Ok((inf, pas, iter, residual, false));
        }
        if residual <= conv.tol {
            return Ok((inf, pas, iter, residual, true));
        }
    }
    Ok((inf, pas, conv.max_iter, residual, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{load_graph, parse_timestamp};

    fn u(s: &str) -> UserId {
        UserId::parse(s).unwrap()
    }

    fn ev(author: &str, rt: Option<&str>) -> Event {
        Event {
            event_id: String::new(),
            author: u(author),
            timestamp: parse_timestamp("2024-01-01T00:00:00Z").unwrap(),
            mentions: rt.iter().map(|r| u(r)).collect(),
            self_mentions: 0,
            retweet_of: rt.map(u),
            urls: vec![],
        }
    }

    #[test]
    fn weight_is_retweet_rate() {
        let (g, _) = load_graph("i\tj\n".as_bytes()).unwrap();
        let mut events: Vec<Event> = (0..10).map(|_| ev("j", None)).collect();
        events.extend((0..3).map(|_| ev("i", Some("j"))));
        let (rg, stats) = build_retweet_graph(&events, &g);
        assert_eq!(rg.weight(&u("i"), &u("j")), Some(0.3));
        assert_eq!(stats, RetweetGraphStats::default());
    }

    #[test]
    fn retweet_without_follow_is_dropped() {
        let (g, _) = load_graph("x\tj\n".as_bytes()).unwrap();
        let events = vec![ev("j", None), ev("i", Some("j"))];
        let (rg, stats) = build_retweet_graph(&events, &g);
        assert_eq!(rg.edge_count(), 0);
        assert_eq!(stats.dropped_no_follow, 1);
    }

    #[test]
    fn silent_source_has_no_edge() {
        let (g, _) = load_graph("i\tj\n".as_bytes()).unwrap();
        let events = vec![ev("i", Some("j"))];
        let (rg, stats) = build_retweet_graph(&events, &g);
        assert_eq!(rg.edge_count(), 0);
        assert_eq!(stats.dropped_no_opportunity, 1);
    }

    #[test]
    fn total_acceptance_single_edge() {
        let rg = RetweetGraph::from_weighted_edges([(u("i"), u("j"), 1.0)]).unwrap();
        let out = influence_passivity(&rg, &Convergence::default()).unwrap();
        assert_eq!(out.influence.get(&u("j")), 1.0);
        assert_eq!(out.influence.get(&u("i")), 0.0);
        assert_eq!(out.passivity.get(&u("i")), 0.0);
        assert_eq!(out.passivity.get(&u("j")), 0.0);
    }

    #[test]
    fn symmetric_two_cycle() {
        let rg = RetweetGraph::from_weighted_edges([(u("a"), u("b"), 0.4), (u("b"), u("a"), 0.4)]).unwrap();
        let out = influence_passivity(&rg, &Convergence::default()).unwrap();
        assert!((out.influence.get(&u("a")) - 0.5).abs() < 1e-12);
        assert!((out.influence.get(&u("b")) - 0.5).abs() < 1e-12);
        assert!(out.influence.converged);
    }

    #[test]
    fn empty_graph_is_an_error() {
        let rg = RetweetGraph::from_weighted_edges(std::iter::empty()).unwrap();
        assert_eq!(
            influence_passivity(&rg, &Convergence::default()),
            Err(CentralityError::NoRetweetEdges)
        );
        assert!(RetweetGraph::from_weighted_edges([(u("a"), u("b"), 1.5)]).is_err());
    }
}
