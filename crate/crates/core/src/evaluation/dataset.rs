use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use chrono::{DateTime, Utc};

use super::EvalError;
use crate::ingest::{Event, UserGraph, UserId, HOUR_SECS};

/// Fewest distinct qualified promoters a URL needs.
pub const MIN_PROMOTERS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct UrlRecord {
    pub url: String,
    pub clicks: u64,
    /// Distinct posters of the URL that have graph data.
    pub promoters: BTreeSet<UserId>,
    /// Week of every occurrence; only set in the weekly dataset.
    pub week_index: Option<u64>,
    /// Sum of the promoters' follower counts.
    pub audience: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetStats {
    pub urls_seen: usize,
    pub missing_clicks: usize,
    pub too_few_promoters: usize,
    /// Qualified URLs left out of the weekly set for spanning several weeks.
    pub multi_week: usize,
    pub before_epoch: usize,
}

#[derive(Debug, Clone, Default)]
pub struct UrlDatasets {
    /// Every qualified URL, regardless of when it appeared.
    pub global: Vec<UrlRecord>,
    /// Qualified URLs whose occurrences all fall within one week.
    pub weekly: Vec<UrlRecord>,
    pub stats: DatasetStats,
}

/// Reads a `url<TAB>clicks` table.
pub fn load_clicks<R: BufRead>(reader: R) -> Result<BTreeMap<String, u64>, EvalError> {
    let mut out = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let bad = |reason: String| EvalError::ClicksFormat {
            line: idx + 1,
            reason,
        };
        let (url, clicks) = body
            .split_once('\t')
            .ok_or_else(|| bad("expected url<TAB>clicks".into()))?;
        let clicks = clicks
            .trim()
            .parse::<u64>()
            .map_err(|_| bad(format!("bad click count `{clicks}`")))?;
        out.insert(url.trim().to_string(), clicks);
    }
    Ok(out)
}

#[derive(Default)]
struct UrlSeen {
    promoters: BTreeSet<UserId>,
    weeks: BTreeSet<u64>,
}

pub fn build_url_datasets(
    events: &[Event],
    clicks: &BTreeMap<String, u64>,
    graph: &UserGraph,
    epoch: DateTime<Utc>,
    week_hours: u64,
) -> UrlDatasets {
    let week_secs = week_hours.max(1) as i64 * HOUR_SECS;
    let mut stats = DatasetStats::default();
    let mut seen: BTreeMap<&str, UrlSeen> = BTreeMap::new();
    for ev in events {
        if ev.urls.is_empty() {
            continue;
        }
        let secs = (ev.timestamp - epoch).num_seconds();
        if secs < 0 {
            stats.before_epoch += 1;
            continue;
        }
        let week = (secs / week_secs) as u64;
        for url in &ev.urls {
            let entry = seen.entry(url.as_str()).or_default();
            entry.weeks.insert(week);
            if graph.has_user(&ev.author) {
                entry.promoters.insert(ev.author.clone());
            }
        }
    }

    stats.urls_seen = seen.len();
    let mut global = Vec::new();
    let mut weekly = Vec::new();
    for (url, s) in seen {
        if s.promoters.len() < MIN_PROMOTERS {
            stats.too_few_promoters += 1;
            continue;
        }
        let Some(&clicks) = clicks.get(url) else {
            stats.missing_clicks += 1;
            continue;
        };
        let audience = s
            .promoters
            .iter()
            .map(|p| graph.follower_count(p).unwrap_or(0))
            .sum();
        let record = UrlRecord {
            url: url.to_string(),
            clicks,
            promoters: s.promoters,
            week_index: None,
            audience,
        };
        if s.weeks.len() == 1 {
            weekly.push(UrlRecord {
                week_index: s.weeks.first().copied(),
                ..record.clone()
            });
        } else {
            stats.multi_week += 1;
        }
        global.push(record);
    }
    UrlDatasets { global, weekly, stats }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{load_graph, parse_timestamp};

    fn post(author: &str, ts: &str, url: &str) -> Event {
        Event {
            event_id: String::new(),
            author: UserId::parse(author).unwrap(),
            timestamp: parse_timestamp(ts).unwrap(),
            mentions: vec![],
            self_mentions: 0,
            retweet_of: None,
            urls: vec![url.to_string()],
        }
    }

    fn graph() -> UserGraph {
        let (g, _) = load_graph("x\ta\ny\ta\nx\tb\nx\tc\nx\td\n".as_bytes()).unwrap();
        g
    }

    fn epoch() -> DateTime<Utc> {
        parse_timestamp("2024-01-01T00:00:00Z").unwrap()
    }

    #[test]
    fn weekly_excludes_recurring_urls() {
        let events = vec![
            post("a", "2024-01-22T10:00:00Z", "u/1"), // week 3
            post("b", "2024-01-23T10:00:00Z", "u/1"),
            post("c", "2024-02-05T10:00:00Z", "u/1"), // week 5
        ];
        let clicks = [("u/1".to_string(), 10)].into_iter().collect();
        let ds = build_url_datasets(&events, &clicks, &graph(), epoch(), 168);
        assert_eq!(ds.global.len(), 1);
        assert!(ds.weekly.is_empty());
        assert_eq!(ds.stats.multi_week, 1);
        assert_eq!(ds.global[0].audience, 2 + 1 + 1);
    }

    #[test]
    fn two_promoters_is_not_enough() {
        let events = vec![
            post("a", "2024-01-02T10:00:00Z", "u/2"),
            post("b", "2024-01-02T11:00:00Z", "u/2"),
            post("b", "2024-01-02T12:00:00Z", "u/2"),
            // no graph data
            post("zed", "2024-01-02T12:00:00Z", "u/2"),
        ];
        let clicks = [("u/2".to_string(), 10)].into_iter().collect();
        let ds = build_url_datasets(&events, &clicks, &graph(), epoch(), 168);
        assert!(ds.global.is_empty() && ds.weekly.is_empty());
        assert_eq!(ds.stats.too_few_promoters, 1);
    }

    #[test]
    fn single_week_url_in_both() {
        let events = vec![
            post("a", "2024-01-08T10:00:00Z", "u/3"),
            post("b", "2024-01-09T11:00:00Z", "u/3"),
            post("c", "2024-01-14T23:59:59Z", "u/3"),
            post("d", "2024-01-10T12:00:00Z", "u/4"),
        ];
        let clicks = [("u/3".to_string(), 7)].into_iter().collect();
        let ds = build_url_datasets(&events, &clicks, &graph(), epoch(), 168);
        assert_eq!(ds.weekly.len(), 1);
        assert_eq!(ds.weekly[0].week_index, Some(1));
        assert_eq!(ds.global[0].week_index, None);
        assert_eq!(ds.stats.urls_seen, 2);
    }

    #[test]
    fn missing_click_entry_is_counted() {
        let events = vec![
            post("a", "2024-01-08T10:00:00Z", "u/5"),
            post("b", "2024-01-09T11:00:00Z", "u/5"),
            post("c", "2024-01-09T11:00:00Z", "u/5"),
        ];
        let ds = build_url_datasets(&events, &BTreeMap::new(), &graph(), epoch(), 168);
        assert!(ds.global.is_empty());
        assert_eq!(ds.stats.missing_clicks, 1);
    }

    #[test]
    fn clicks_table() {
        let t = load_clicks("# c\nhttp://a\t12\nhttp://b\t0\n".as_bytes()).unwrap();
        assert_eq!(t["http://a"], 12);
        assert!(load_clicks("http://a 12\n".as_bytes()).is_err());
        assert!(load_clicks("http://a\t-1\n".as_bytes()).is_err());
    }
}
