//! Snapshot persistence.
//!
//! `snapshots.tsv` holds one `hour_index<TAB>user<TAB>velocity<TAB>acceleration`
//! line per user per checkpoint hour, hours ascending and users in
//! lexicographic order. Floats use the shortest representation that reads
//! back to the same value, so a write/read cycle is lossless.
//!
//! `checkpoints.tsv` lists every checkpoint hour with a label
//! (`hour_index<TAB>label`), including hours where no user was moving.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use super::{DynamicsError, Snapshot};
use crate::ingest::UserId;

pub fn write_snapshots<'a, W, I>(mut w: W, snapshots: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a Snapshot>,
{
    for snap in snapshots {
        let users: BTreeSet<&UserId> = snap
            .velocity
            .keys()
            .chain(snap.acceleration.keys())
            .collect();
        for user in users {
            let v = snap.velocity_of(user);
            let a = snap.acceleration.get(user).copied().unwrap_or(0.0);
            writeln!(w, "{}\t{}\t{}\t{}", snap.hour, user, v, a)?;
        }
    }
    Ok(())
}

pub fn write_checkpoints<W: Write>(mut w: W, labels: &BTreeMap<u64, String>) -> std::io::Result<()> {
    for (hour, label) in labels {
        writeln!(w, "{hour}\t{label}")?;
    }
    Ok(())
}

pub fn read_checkpoints<R: BufRead>(reader: R) -> Result<BTreeMap<u64, String>, DynamicsError> {
    let mut labels = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| DynamicsError::SnapshotFormat {
            line: idx + 1,
            reason: reason.to_string(),
        };
        let (hour, label) = line.split_once('\t').ok_or_else(|| bad("expected hour<TAB>label"))?;
        let hour = hour.parse::<u64>().map_err(|_| bad("bad hour index"))?;
        labels.insert(hour, label.to_string());
    }
    Ok(labels)
}

pub fn read_snapshots<R: BufRead>(reader: R) -> Result<BTreeMap<u64, Snapshot>, DynamicsError> {
    let mut out: BTreeMap<u64, Snapshot> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| DynamicsError::SnapshotFormat {
            line: idx + 1,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 fields, got {}", fields.len())));
        }
        let hour = fields[0]
            .parse::<u64>()
            .map_err(|_| bad(format!("bad hour `{}`", fields[0])))?;
        let user = UserId::parse(fields[1]).map_err(|e| bad(e.to_string()))?;
        let v = fields[2]
            .parse::<f64>()
            .map_err(|_| bad(format!("bad velocity `{}`", fields[2])))?;
        let a = fields[3]
            .parse::<f64>()
            .map_err(|_| bad(format!("bad acceleration `{}`", fields[3])))?;
        let snap = out.entry(hour).or_insert_with(|| Snapshot::at_rest(hour));
        if v != 0.0 {
            snap.velocity.insert(user.clone(), v);
        }
        if a != 0.0 {
            snap.acceleration.insert(user, a);
        }
    }
    Ok(out)
}

/// Checkpoints loaded back from disk.
#[derive(Debug, Clone, Default)]
pub struct SnapshotStore {
    labels: BTreeMap<u64, String>,
    snapshots: BTreeMap<u64, Snapshot>,
}

impl SnapshotStore {
    pub fn new(labels: BTreeMap<u64, String>, mut snapshots: BTreeMap<u64, Snapshot>) -> Self {
        for &hour in labels.keys() {
            snapshots.entry(hour).or_insert_with(|| Snapshot::at_rest(hour));
        }
        SnapshotStore { labels, snapshots }
    }

    pub fn load<R1: BufRead, R2: BufRead>(checkpoints: R1, snapshots: R2) -> Result<Self, DynamicsError> {
        Ok(Self::new(read_checkpoints(checkpoints)?, read_snapshots(snapshots)?))
    }

    pub fn get(&self, hour: u64) -> Option<&Snapshot> {
        self.labels.contains_key(&hour).then(|| &self.snapshots[&hour])
    }

    pub fn labels(&self) -> &BTreeMap<u64, String> {
        &self.labels
    }

    /// Latest checkpoint hour.
    pub fn final_hour(&self) -> Option<u64> {
        self.labels.keys().next_back().copied()
    }
}
