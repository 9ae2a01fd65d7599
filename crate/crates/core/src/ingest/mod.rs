//! Event-stream and follower-graph ingestion.
//!
//! Records are newline-delimited JSON objects:
//!
//! ```text
//! {"id":"1","ts":"2024-01-01T10:05:00Z","author":"bob","text":"RT @alice: Hello world! (cc @carol)"}
//! {"id":"2","ts":"2024-01-01T10:06:00Z","author":"dan","mentions":["alice"],"rt_of":"alice"}
//! ```
//!
//! Pre-extracted `mentions` / `rt_of` / `urls` fields win over whatever the
//! `text` would yield.

mod bucket;
mod graph;

pub use bucket::{bucketize, Bucketizer, HourBucket, HOUR_SECS};
pub use graph::{load_follower_counts, load_graph, GraphLoadStats, UserGraph};

use std::fmt;
use std::io::BufRead;

use chrono::{DateTime, SubsecRound, Utc};
use serde::Deserialize;
use thiserror::Error;

/// Longest handle accepted by the historical handle grammar.
pub const MAX_HANDLE_LEN: usize = 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("malformed timestamp `{0}`")]
    Timestamp(String),
    #[error("empty author")]
    EmptyAuthor,
    #[error("invalid handle `{0}`")]
    InvalidHandle(String),
    #[error("event at {ts} precedes the stream epoch {epoch}")]
    BeforeEpoch { ts: DateTime<Utc>, epoch: DateTime<Utc> },
    #[error("event for hour {hour} arrived after that hour was sealed (next open hour {open})")]
    OutOfOrder { hour: u64, open: u64 },
    #[error("line {line}: {reason}")]
    GraphLine { line: usize, reason: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for IngestError {
    fn from(e: std::io::Error) -> Self {
        IngestError::Io(e.to_string())
    }
}

/// Case-folded user handle without the leading `@`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(String);

impl UserId {
    pub fn parse(raw: &str) -> Result<Self, IngestError> {
        let trimmed = raw.trim();
        let handle = trimmed.strip_prefix('@').unwrap_or(trimmed);
        if handle.is_empty()
            || handle.len() > MAX_HANDLE_LEN
            || !handle.bytes().all(is_handle_byte)
        {
            return Err(IngestError::InvalidHandle(raw.to_string()));
        }
        Ok(UserId(handle.to_ascii_lowercase()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn is_handle_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// One parsed stream item.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub event_id: String,
    pub author: UserId,
    pub timestamp: DateTime<Utc>,
    /// Mention tokens in order of appearance, self-mentions removed.
    pub mentions: Vec<UserId>,
    /// Number of `@author` tokens dropped from `mentions`.
    pub self_mentions: u32,
    pub retweet_of: Option<UserId>,
    pub urls: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    id: Option<serde_json::Value>,
    ts: Option<String>,
    author: Option<String>,
    text: Option<String>,
    mentions: Option<Vec<String>>,
    rt_of: Option<String>,
    urls: Option<Vec<String>>,
}

pub fn parse_timestamp(raw: &str) -> Result<DateTime<Utc>, IngestError> {
    DateTime::parse_from_rfc3339(raw.trim())
        .map(|t| t.with_timezone(&Utc).trunc_subsecs(0))
        .map_err(|_| IngestError::Timestamp(raw.to_string()))
}

/// Parses one event-stream record.
pub fn parse_event(line: &str) -> Result<Event, IngestError> {
    let raw: RawRecord =
        serde_json::from_str(line).map_err(|e| IngestError::Malformed(e.to_string()))?;

    let event_id = match raw.id {
        Some(serde_json::Value::String(s)) => s,
        Some(serde_json::Value::Number(n)) => n.to_string(),
        Some(_) => return Err(IngestError::Malformed("`id` must be a string".into())),
        None => return Err(IngestError::MissingField("id")),
    };
    let ts = raw.ts.ok_or(IngestError::MissingField("ts"))?;
    let timestamp = parse_timestamp(&ts)?;
    let author = match raw.author.as_deref().map(str::trim) {
        None | Some("") | Some("@") => return Err(IngestError::EmptyAuthor),
        Some(a) => UserId::parse(a)?,
    };

    let text = raw.text.as_deref().unwrap_or("");
    let pre_extracted = raw.mentions.is_some() || raw.rt_of.is_some();
    let (tokens, mut retweet_of) = if pre_extracted {
        let tokens = raw
            .mentions
            .unwrap_or_default()
            .iter()
            .map(|m| UserId::parse(m))
            .collect::<Result<Vec<_>, _>>()?;
        let rt = raw.rt_of.as_deref().map(UserId::parse).transpose()?;
        (tokens, rt)
    } else {
        (extract_mentions(text), retweet_source(text))
    };

    let mut mentions = Vec::with_capacity(tokens.len() + 1);
    if let Some(src) = &retweet_of {
        // an attribution always counts as a mention of its source
        if !tokens.contains(src) {
            mentions.push(src.clone());
        }
    }
    mentions.extend(tokens);
    let before = mentions.len();
    mentions.retain(|m| *m != author);
    let self_mentions = (before - mentions.len()) as u32;
    if retweet_of.as_ref() == Some(&author) {
        retweet_of = None;
    }

    let urls = match raw.urls {
        Some(u) => u,
        None => extract_urls(text),
    };

    Ok(Event {
        event_id,
        author,
        timestamp,
        mentions,
        self_mentions,
        retweet_of,
        urls,
    })
}

/// Every `@handle` token in `text`. An `@` glued to a preceding word
/// character (e-mail addresses) or followed by an over-long handle is ignored.
pub fn extract_mentions(text: &str) -> Vec<UserId> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'@' && (i == 0 || !is_handle_byte(bytes[i - 1])) {
            let start = i + 1;
            let mut end = start;
            while end < bytes.len() && is_handle_byte(bytes[end]) {
                end += 1;
            }
            if end > start && end - start <= MAX_HANDLE_LEN {
                if let Ok(id) = UserId::parse(&text[start..end]) {
                    out.push(id);
                }
            }
            i = end.max(i + 1);
        } else {
            i += 1;
        }
    }
    out
}

/// Source of an `RT @handle:` prefix, if present.
pub fn retweet_source(text: &str) -> Option<UserId> {
    let rest = text.trim_start().strip_prefix("RT @")?;
    let (handle, _) = rest.split_once(':')?;
    UserId::parse(handle).ok()
}

fn extract_urls(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter(|w| w.starts_with("http://") || w.starts_with("https://"))
        .map(|w| {
            w.trim_end_matches(|c: char| matches!(c, '.' | ',' | ')' | '!' | '?' | ';'))
                .to_string()
        })
        .collect()
}

/// Outcome of reading a stream under the skip-and-count policy.
#[derive(Debug, Default)]
pub struct StreamRead {
    pub events: Vec<Event>,
    /// Non-blank records seen.
    pub records: usize,
    /// (1-based line number, error) for each skipped record.
    pub skipped: Vec<(usize, IngestError)>,
}

impl StreamRead {
    pub fn skip_rate(&self) -> f64 {
        if self.records == 0 {
            0.0
        } else {
            self.skipped.len() as f64 / self.records as f64
        }
    }
}

/// Reads every record, skipping (and counting) the ones that fail to parse.
pub fn read_events<R: BufRead>(reader: R) -> Result<StreamRead, IngestError> {
    let mut out = StreamRead::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.records += 1;
        match parse_event(&line) {
            Ok(ev) => out.events.push(ev),
            Err(e) => out.skipped.push((idx + 1, e)),
        }
    }
    Ok(out)
}
