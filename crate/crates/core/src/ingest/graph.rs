use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use super::{IngestError, UserId};

/// Directed follower → followee graph with users indexed in lexicographic order.
#[derive(Debug, Clone, Default)]
pub struct UserGraph {
    users: Vec<UserId>,
    index: HashMap<UserId, usize>,
    followees: Vec<Vec<usize>>,
    followers: Vec<Vec<usize>>,
    overrides: BTreeMap<UserId, u64>,
}

impl UserGraph {
    /// Builds a deduplicated graph; self-loops are dropped and their number returned.
    pub fn from_edges<I>(edges: I) -> (Self, usize)
    where
        I: IntoIterator<Item = (UserId, UserId)>,
    {
        let mut self_loops = 0;
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                self_loops += 1;
            } else {
                set.insert((a, b));
            }
        }
        let users: Vec<UserId> = set
            .iter()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: HashMap<UserId, usize> = users
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), i))
            .collect();
        let mut followees = vec![Vec::new(); users.len()];
        let mut followers = vec![Vec::new(); users.len()];
        for (a, b) in &set {
            let (ia, ib) = (index[a], index[b]);
            followees[ia].push(ib);
            followers[ib].push(ia);
        }
        for list in followers.iter_mut() {
            list.sort_unstable();
        }
        (
            UserGraph {
                users,
                index,
                followees,
                followers,
                overrides: BTreeMap::new(),
            },
            self_loops,
        )
    }

    /// Installs explicit follower counts; they take precedence over in-degree.
    pub fn with_follower_counts(mut self, counts: BTreeMap<UserId, u64>) -> Self {
        self.overrides = counts;
        self
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.followees.iter().map(Vec::len).sum()
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn index_of(&self, user: &UserId) -> Option<usize> {
        self.index.get(user).copied()
    }

    pub fn user(&self, idx: usize) -> &UserId {
        &self.users[idx]
    }

    /// Indices of the users `idx` follows, ascending.
    pub fn followees(&self, idx: usize) -> &[usize] {
        &self.followees[idx]
    }

    /// Indices of the users following `idx`, ascending.
    pub fn followers(&self, idx: usize) -> &[usize] {
        &self.followers[idx]
    }

    pub fn follows(&self, follower: &UserId, followee: &UserId) -> bool {
        match (self.index_of(follower), self.index_of(followee)) {
            (Some(a), Some(b)) => self.followees[a].binary_search(&b).is_ok(),
            _ => false,
        }
    }

    /// (follower, followee) index pairs in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.followees
            .iter()
            .enumerate()
            .flat_map(|(a, outs)| outs.iter().map(move |&b| (a, b)))
    }

    /// Follower count from the override table, else in-degree; `None` when
    /// the user has no graph data at all.
    pub fn follower_count(&self, user: &UserId) -> Option<u64> {
        if let Some(&c) = self.overrides.get(user) {
            return Some(c);
        }
        self.index_of(user).map(|i| self.followers[i].len() as u64)
    }

    pub fn followee_count(&self, user: &UserId) -> Option<u64> {
        self.index_of(user).map(|i| self.followees[i].len() as u64)
    }

    /// Explicit follower counts installed with [`UserGraph::with_follower_counts`].
    pub fn overrides(&self) -> &BTreeMap<UserId, u64> {
        &self.overrides
    }

    pub fn has_user(&self, user: &UserId) -> bool {
        self.index.contains_key(user) || self.overrides.contains_key(user)
    }

    /// Mean follower count over graph nodes.
    pub fn mean_follower_count(&self) -> Option<f64> {
        if self.is_empty() {
            return None;
        }
        let total: f64 = self
            .users
            .iter()
            .map(|u| self.follower_count(u).unwrap_or(0) as f64)
            .sum();
        Some(total / self.len() as f64)
    }
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct GraphLoadStats {
    pub lines: usize,
    pub self_loops: usize,
    pub duplicates: usize,
    pub errors: Vec<IngestError>,
}

/// Reads a `follower<TAB>followee` edge list. `#` lines and blank lines are ignored.
pub fn load_graph<R: BufRead>(reader: R) -> Result<(UserGraph, GraphLoadStats), IngestError> {
    let mut stats = GraphLoadStats::default();
    let mut valid = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        stats.lines += 1;
        let parsed = parse_pair(body).and_then(|(a, b)| {
            let a = UserId::parse(a).map_err(|e| e.to_string())?;
            let b = UserId::parse(b).map_err(|e| e.to_string())?;
            Ok((a, b))
        });
        match parsed {
            Ok(pair) => valid.push(pair),
            Err(reason) => stats.errors.push(IngestError::GraphLine {
                line: idx + 1,
                reason,
            }),
        }
    }
    let raw = valid.len();
    let (graph, self_loops) = UserGraph::from_edges(valid);
    stats.self_loops = self_loops;
    stats.duplicates = raw - self_loops - graph.edge_count();
    Ok((graph, stats))
}

/// Reads a `user<TAB>count` override table.
pub fn load_follower_counts<R: BufRead>(
    reader: R,
) -> Result<(BTreeMap<UserId, u64>, Vec<IngestError>), IngestError> {
    let mut counts = BTreeMap::new();
    let mut errors = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let parsed = parse_pair(body).and_then(|(u, c)| {
            let user = UserId::parse(u).map_err(|e| e.to_string())?;
            let count = c
                .parse::<u64>()
                .map_err(|_| format!("bad follower count `{c}`"))?;
            Ok((user, count))
        });
        match parsed {
            Ok((u, c)) => {
                counts.insert(u, c);
            }
            Err(reason) => errors.push(IngestError::GraphLine {
                line: idx + 1,
                reason,
            }),
        }
    }
    Ok((counts, errors))
}

fn parse_pair(line: &str) -> Result<(&str, &str), String> {
    let mut parts = line.split('\t');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(b), None) if !a.trim().is_empty() && !b.trim().is_empty() => {
            Ok((a.trim(), b.trim()))
        }
        _ => Err(format!("expected two tab-separated fields, got `{line}`")),
    }
}
