use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};

use super::{Event, IngestError, UserId};

pub const HOUR_SECS: i64 = 3600;

/// Per-user applied-force tallies for one discrete hour.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HourBucket {
    pub hour_index: u64,
    /// Mention tokens received during the hour.
    pub force: BTreeMap<UserId, u32>,
    /// Retweet attributions received during the hour.
    pub retweet_force: BTreeMap<UserId, u32>,
    /// Users who authored at least one event during the hour.
    pub authors: BTreeSet<UserId>,
}

impl HourBucket {
    pub fn empty(hour_index: u64) -> Self {
        HourBucket {
            hour_index,
            ..Default::default()
        }
    }

    pub fn total_force(&self) -> u64 {
        self.force.values().map(|&c| c as u64).sum()
    }

    fn add(&mut self, ev: &Event) {
        for m in &ev.mentions {
            *self.force.entry(m.clone()).or_insert(0) += 1;
        }
        if let Some(src) = &ev.retweet_of {
            *self.retweet_force.entry(src.clone()).or_insert(0) += 1;
        }
        self.authors.insert(ev.author.clone());
    }
}

/// Streaming hour discretizer with a one-hour out-of-order window.
///
/// An hour is sealed once an event two or more hours newer has been seen;
/// events for sealed hours are rejected. Sealed buckets come out in
/// increasing `hour_index` order with empty hours between them filled in.
#[derive(Debug)]
pub struct Bucketizer {
    epoch: DateTime<Utc>,
    open: BTreeMap<u64, HourBucket>,
    /// First hour not yet emitted; `None` until the first seal.
    next_emit: Option<u64>,
    max_hour: Option<u64>,
}

impl Bucketizer {
    pub fn new(epoch: DateTime<Utc>) -> Self {
        Bucketizer {
            epoch,
            open: BTreeMap::new(),
            next_emit: None,
            max_hour: None,
        }
    }

    pub fn epoch(&self) -> DateTime<Utc> {
        self.epoch
    }

    pub fn hour_of(&self, ts: DateTime<Utc>) -> Result<u64, IngestError> {
        let secs = (ts - self.epoch).num_seconds();
        if secs < 0 {
            return Err(IngestError::BeforeEpoch {
                ts,
                epoch: self.epoch,
            });
        }
        Ok((secs / HOUR_SECS) as u64)
    }

    /// Adds one event and returns whatever buckets it sealed.
    pub fn push(&mut self, ev: &Event) -> Result<Vec<HourBucket>, IngestError> {
        let hour = self.hour_of(ev.timestamp)?;
        if let Some(open) = self.next_emit {
            if hour < open {
                return Err(IngestError::OutOfOrder { hour, open });
            }
        }
        self.open
            .entry(hour)
            .or_insert_with(|| HourBucket::empty(hour))
            .add(ev);
        let max = self.max_hour.map_or(hour, |m| m.max(hour));
        self.max_hour = Some(max);
        Ok(match max.checked_sub(2) {
            Some(limit) => self.seal_through(limit),
            None => Vec::new(),
        })
    }

    /// Seals and returns everything still open.
    pub fn finish(mut self) -> Vec<HourBucket> {
        match self.max_hour {
            Some(max) => self.seal_through(max),
            None => Vec::new(),
        }
    }

    fn seal_through(&mut self, limit: u64) -> Vec<HourBucket> {
        let start = match self.next_emit.or_else(|| self.open.keys().next().copied()) {
            Some(s) if s <= limit => s,
            _ => return Vec::new(),
        };
        let sealed = (start..=limit)
            .map(|h| self.open.remove(&h).unwrap_or_else(|| HourBucket::empty(h)))
            .collect();
        self.next_emit = Some(limit + 1);
        sealed
    }
}

/// Discretizes a whole event sequence. Events rejected by the out-of-order
/// window or the epoch check are returned alongside the buckets.
pub fn bucketize<'a, I>(events: I, epoch: DateTime<Utc>) -> (Vec<HourBucket>, Vec<IngestError>)
where
    I: IntoIterator<Item = &'a Event>,
{
    let mut b = Bucketizer::new(epoch);
    let mut buckets = Vec::new();
    let mut rejected = Vec::new();
    for ev in events {
        match b.push(ev) {
            Ok(sealed) => buckets.extend(sealed),
            Err(e) => rejected.push(e),
        }
    }
    buckets.extend(b.finish());
    (buckets, rejected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_timestamp;

    fn ev(ts: &str, author: &str, mentions: &[&str]) -> Event {
        Event {
            event_id: String::new(),
            author: UserId::parse(author).unwrap(),
            timestamp: parse_timestamp(ts).unwrap(),
            mentions: mentions.iter().map(|m| UserId::parse(m).unwrap()).collect(),
            self_mentions: 0,
            retweet_of: None,
            urls: vec![],
        }
    }

    fn alice() -> UserId {
        UserId::parse("alice").unwrap()
    }

    fn epoch() -> DateTime<Utc> {
        parse_timestamp("2024-01-01T00:00:00Z").unwrap()
    }

    #[test]
    fn counts_within_one_hour() {
        let evs = [
            ev("2024-01-01T10:05:00Z", "b", &["alice"]),
            ev("2024-01-01T10:30:00Z", "c", &["alice"]),
            ev("2024-01-01T10:59:00Z", "d", &["alice"]),
        ];
        let (buckets, rejected) = bucketize(&evs, epoch());
        assert!(rejected.is_empty());
        assert_eq!(buckets.len(), 1);
        assert_eq!(buckets[0].hour_index, 10);
        assert_eq!(buckets[0].force[&alice()], 3);
    }

    #[test]
    fn gaps_are_filled() {
        let evs = [
            ev("2024-01-01T10:05:00Z", "b", &["alice"]),
            ev("2024-01-01T12:05:00Z", "b", &["alice"]),
        ];
        let (buckets, _) = bucketize(&evs, epoch());
        let hours: Vec<u64> = buckets.iter().map(|b| b.hour_index).collect();
        assert_eq!(hours, vec![10, 11, 12]);
        assert_eq!(buckets[1].total_force(), 0);
    }

    #[test]
    fn repeated_mentions_count_per_token() {
        let evs = [ev("2024-01-01T00:10:00Z", "b", &["alice", "alice"])];
        let (buckets, _) = bucketize(&evs, epoch());
        assert_eq!(buckets[0].force[&alice()], 2);
    }

    #[test]
    fn out_of_order_window() {
        let mut b = Bucketizer::new(epoch());
        assert!(b.push(&ev("2024-01-01T10:05:00Z", "b", &["alice"])).unwrap().is_empty());
        // one hour late is fine
        assert!(b.push(&ev("2024-01-01T09:59:00Z", "b", &["alice"])).unwrap().is_empty());
        // an event two hours newer than an open hour seals it
        let sealed = b.push(&ev("2024-01-01T11:00:00Z", "b", &[])).unwrap();
        assert_eq!(sealed.iter().map(|b| b.hour_index).collect::<Vec<_>>(), vec![9]);
        assert_eq!(sealed[0].force[&alice()], 1);
        let sealed = b.push(&ev("2024-01-01T12:00:00Z", "b", &[])).unwrap();
        assert_eq!(sealed.iter().map(|b| b.hour_index).collect::<Vec<_>>(), vec![10]);
        let late = b.push(&ev("2024-01-01T10:59:59Z", "b", &["alice"]));
        assert_eq!(late, Err(IngestError::OutOfOrder { hour: 10, open: 11 }));
        let rest = b.finish();
        assert_eq!(rest.iter().map(|b| b.hour_index).collect::<Vec<_>>(), vec![11, 12]);
    }

    #[test]
    fn before_epoch_rejected() {
        let evs = [ev("2023-12-31T23:00:00Z", "b", &["alice"])];
        let (buckets, rejected) = bucketize(&evs, epoch());
        assert!(buckets.is_empty());
        assert!(matches!(rejected[0], IngestError::BeforeEpoch { .. }));
    }

    #[test]
    fn empty_stream() {
        let (buckets, rejected) = bucketize(&[], epoch());
        assert!(buckets.is_empty() && rejected.is_empty());
    }
}
