//! Seeded generator for event streams, follow graphs and click tables with
//! known ground truth.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Duration, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use thiserror::Error;

use crate::dynamics::{estimate_zeta, Kinetics, KineticsConfig, MassTable};
use crate::evaluation::{accumulate, build_url_datasets, flavor_boundary, VelocityFlavor};
use crate::ingest::{bucketize, load_graph, parse_event, UserId};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error("generated data failed to replay: {0}")]
    Replay(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GraphModel {
    /// Targets drawn in proportion to followers already gained.
    #[default]
    Preferential,
    Uniform,
}

impl FromStr for GraphModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "preferential" => Ok(GraphModel::Preferential),
            "uniform" => Ok(GraphModel::Uniform),
            _ => Err(format!("unknown graph model `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SynthMode {
    /// Each rate becomes `round(rate * hours)` mentions at random hours.
    #[default]
    Exact,
    /// Poisson counts per hour.
    Sampled,
}

impl FromStr for SynthMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(SynthMode::Exact),
            "sampled" => Ok(SynthMode::Sampled),
            _ => Err(format!("unknown synth mode `{s}`")),
        }
    }
}

/// Extra mentions for one user at `rate` per hour over `start..end`.
#[derive(Debug, Clone, PartialEq)]
pub struct Burst {
    pub user: usize,
    pub start: u64,
    pub end: u64,
    pub rate: f64,
}

impl FromStr for Burst {
    type Err = String;

    /// `user:start-end:rate`, the user given as an index or a `uNNNNN` handle.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("bad burst `{s}` (expected user:start-end:rate)");
        let mut parts = s.trim().split(':');
        let (user, span, rate) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(u), Some(sp), Some(r), None) => (u, sp, r),
            _ => return Err(bad()),
        };
        let user = user
            .trim_start_matches('u')
            .parse::<usize>()
            .map_err(|_| bad())?;
        let (start, end) = span.split_once('-').ok_or_else(bad)?;
        Ok(Burst {
            user,
            start: start.parse().map_err(|_| bad())?,
            end: end.parse().map_err(|_| bad())?,
            rate: rate.parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub users: usize,
    pub hours: u64,
    pub week_hours: u64,
    /// Share of users drawing extra followers.
    pub celebrity_fraction: f64,
    pub bursts: Vec<Burst>,
    /// Mean mentions received per user per hour.
    pub base_mention_rate: f64,
    /// Mean own posts per user per hour.
    pub post_rate: f64,
    pub graph_model: GraphModel,
    pub mean_followees: usize,
    /// Size of a clique of users who all follow each other.
    pub spam_cluster_size: usize,
    /// Share of mentions delivered as retweets by a follower.
    pub retweet_fraction: f64,
    pub urls: usize,
    /// Share of URLs promoted in two different weeks.
    pub recurring_url_fraction: f64,
    pub min_promoters: usize,
    pub max_promoters: usize,
    /// Weight of promoter velocity in the click model; 0 gives clicks
    /// driven by audience alone.
    pub signal: f64,
    pub base_click_prob: f64,
    /// Log-space standard deviation of multiplicative click noise.
    pub click_noise: f64,
    pub mode: SynthMode,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            users: 1000,
            hours: 672,
            week_hours: 168,
            celebrity_fraction: 0.02,
            bursts: Vec::new(),
            base_mention_rate: 0.01,
            post_rate: 0.005,
            graph_model: GraphModel::Preferential,
            mean_followees: 8,
            spam_cluster_size: 0,
            retweet_fraction: 0.4,
            urls: 600,
            recurring_url_fraction: 0.1,
            min_promoters: 3,
            max_promoters: 12,
            signal: 1.0,
            base_click_prob: 0.2,
            click_noise: 0.25,
            mode: SynthMode::Exact,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: String| Err(SynthError::Config(m));
        if self.users == 0 {
            return fail("users must be > 0".into());
        }
        if self.hours == 0 {
            return fail("hours must be > 0".into());
        }
        if self.week_hours == 0 {
            return fail("week_hours must be > 0".into());
        }
        if self.users > 100_000 {
            return fail("at most 100000 users".into());
        }
        for (name, v) in [
            ("celebrity_fraction", self.celebrity_fraction),
            ("retweet_fraction", self.retweet_fraction),
            ("recurring_url_fraction", self.recurring_url_fraction),
            ("base_click_prob", self.base_click_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        for (name, v) in [
            ("base_mention_rate", self.base_mention_rate),
            ("post_rate", self.post_rate),
            ("signal", self.signal),
            ("click_noise", self.click_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be >= 0, got {v}"));
            }
        }
        if self.spam_cluster_size > self.users {
            return fail("spam_cluster_size exceeds users".into());
        }
        if self.urls > 0 {
            if self.min_promoters == 0 || self.min_promoters > self.max_promoters {
                return fail("need 0 < min_promoters <= max_promoters".into());
            }
            if self.max_promoters > self.users {
                return fail("max_promoters exceeds users".into());
            }
        }
        for b in &self.bursts {
            if b.user >= self.users {
                return fail(format!("burst user {} out of range", b.user));
            }
            if b.start >= b.end || b.end > self.hours {
                return fail(format!("burst span {}-{} outside 0-{}", b.start, b.end, self.hours));
            }
            if !(b.rate >= 0.0 && b.rate.is_finite()) {
                return fail(format!("burst rate must be >= 0, got {}", b.rate));
            }
        }
        Ok(())
    }
}

/// Handle of user `i`.
pub fn handle(i: usize) -> String {
    format!("u{i:05}")
}

/// Start of every generated stream.
pub fn epoch() -> DateTime<Utc> {
    DateTime::parse_from_rfc3339("2024-01-01T00:00:00Z")
        .expect("valid literal")
        .with_timezone(&Utc)
}

/// The four generated documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthOutput {
    pub events: String,
    pub edges: String,
    pub clicks: String,
    pub manifest: String,
}

impl SynthOutput {
    pub const EVENTS: &'static str = "events.jsonl";
    pub const EDGES: &'static str = "edges.tsv";
    pub const CLICKS: &'static str = "clicks.tsv";
    pub const MANIFEST: &'static str = "manifest.txt";

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(Self::EVENTS), &self.events)?;
        std::fs::write(dir.join(Self::EDGES), &self.edges)?;
        std::fs::write(dir.join(Self::CLICKS), &self.clicks)?;
        std::fs::write(dir.join(Self::MANIFEST), &self.manifest)
    }
}

/// Reads a flat `key=value` document; blank and `#` lines are skipped.
pub fn read_manifest<R: BufRead>(reader: R) -> std::io::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for line in reader.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            out.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(out)
}

struct Post {
    hour: u64,
    second: u32,
    author: usize,
    body: Body,
}

enum Body {
    Own,
    Mention(usize),
    Retweet(usize),
    Url(usize),
}

struct Graph {
    followers: Vec<Vec<usize>>,
    celebrities: BTreeSet<usize>,
    spam: BTreeSet<usize>,
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.users;
    let graph = follow_graph(cfg, &mut rng);
    let followers: Vec<u64> = graph.followers.iter().map(|f| f.len() as u64).collect();

    // Mention rates grow slightly faster than audience.
    let pull: Vec<f64> = (0..n)
        .map(|u| {
            let p = (followers[u] as f64).powf(1.2);
            if graph.spam.contains(&u) {
                p * 0.05
            } else {
                p
            }
        })
        .collect();
    let mean_pull = pull.iter().sum::<f64>() / n as f64;
    let rates: Vec<f64> = pull.iter().map(|p| cfg.base_mention_rate * p / mean_pull).collect();

    let mut posts: Vec<Post> = Vec::new();
    let mut planted: BTreeMap<usize, u64> = BTreeMap::new();
    for target in 0..n {
        for hour in spread(cfg, rates[target], 0, cfg.hours, &mut rng) {
            posts.push(mention_post(cfg, &graph, target, hour, &mut rng));
        }
    }
    for b in &cfg.bursts {
        let hours = spread(cfg, b.rate, b.start, b.end, &mut rng);
        *planted.entry(b.user).or_default() += hours.len() as u64;
        for hour in hours {
            let author = other_user(n, b.user, &mut rng);
            posts.push(Post {
                hour,
                second: rng.random_range(0..3600),
                author,
                body: Body::Mention(b.user),
            });
        }
    }
    for author in 0..n {
        let rate = cfg.post_rate + 0.5 * rates[author];
        for hour in spread(cfg, rate, 0, cfg.hours, &mut rng) {
            posts.push(Post {
                hour,
                second: rng.random_range(0..3600),
                author,
                body: Body::Own,
            });
        }
    }
    let url_weeks = url_posts(cfg, &graph, &mut rng, &mut posts);

    posts.sort_by_key(|p| (p.hour, p.second));
    let ep = epoch();
    let mut events = String::new();
    let mut mention_hours: BTreeMap<usize, BTreeMap<u64, u64>> = BTreeMap::new();
    for (i, p) in posts.iter().enumerate() {
        let ts = ep + Duration::seconds(p.hour as i64 * 3600 + p.second as i64);
        let text = match p.body {
            Body::Own => format!("status update {i}"),
            Body::Mention(t) => format!("hey @{} about item {i}", handle(t)),
            Body::Retweet(t) => format!("RT @{}: status update {i}", handle(t)),
            Body::Url(k) => format!("reading {} now", url_of(k)),
        };
        if let Body::Mention(t) | Body::Retweet(t) = p.body {
            *mention_hours.entry(t).or_default().entry(p.hour).or_default() += 1;
        }
        let record = serde_json::json!({
            "id": format!("e{i:07}"),
            "ts": ts.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            "author": handle(p.author),
            "text": text,
        });
        events.push_str(&record.to_string());
        events.push('\n');
    }

    let mut edges = String::new();
    for (followee, fs) in graph.followers.iter().enumerate() {
        for &f in fs {
            let _ = writeln!(edges, "{}\t{}", handle(f), handle(followee));
        }
    }

    let (clicks, zeta) = plant_clicks(cfg, &events, &edges, &url_weeks, &mut rng)?;

    let mut m = String::new();
    let _ = writeln!(m, "seed={}", cfg.seed);
    let _ = writeln!(m, "users={n}");
    let _ = writeln!(m, "hours={}", cfg.hours);
    let _ = writeln!(m, "week_hours={}", cfg.week_hours);
    let _ = writeln!(m, "epoch={}", ep.format("%Y-%m-%dT%H:%M:%SZ"));
    let _ = writeln!(m, "events={}", posts.len());
    let _ = writeln!(m, "urls={}", cfg.urls);
    let _ = writeln!(m, "signal={}", cfg.signal);
    let _ = writeln!(
        m,
        "mode={}",
        match cfg.mode {
            SynthMode::Exact => "exact",
            SynthMode::Sampled => "sampled",
        }
    );
    let _ = writeln!(m, "zeta={zeta}");
    for &c in &graph.celebrities {
        let _ = writeln!(m, "celebrity.{}=1", handle(c));
    }
    for &s in &graph.spam {
        let _ = writeln!(m, "spam.{}=1", handle(s));
    }
    for (u, f) in followers.iter().enumerate() {
        let _ = writeln!(m, "followers.{}={f}", handle(u));
    }
    for (u, hours) in &mention_hours {
        let _ = writeln!(m, "mentions.{}={}", handle(*u), hours.values().sum::<u64>());
    }
    for (u, hours) in &mention_hours {
        for (h, c) in hours {
            let _ = writeln!(m, "mentions.{}.{h}={c}", handle(*u));
        }
    }
    for (u, c) in &planted {
        let _ = writeln!(m, "planted.{}={c}", handle(*u));
    }

    Ok(SynthOutput {
        events,
        edges,
        clicks,
        manifest: m,
    })
}

fn url_of(k: usize) -> String {
    format!("http://s.example/k{k:05}")
}

fn other_user(n: usize, not: usize, rng: &mut ChaCha8Rng) -> usize {
    if n == 1 {
        return not;
    }
    let v = rng.random_range(0..n - 1);
    if v >= not {
        v + 1
    } else {
        v
    }
}

/// Hours at which `rate`-per-hour events fall within `start..end`.
fn spread(cfg: &SynthConfig, rate: f64, start: u64, end: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    if rate <= 0.0 || start >= end {
        return Vec::new();
    }
    match cfg.mode {
        SynthMode::Exact => {
            let count = (rate * (end - start) as f64).round() as u64;
            (0..count).map(|_| rng.random_range(start..end)).collect()
        }
        SynthMode::Sampled => {
            let dist = Poisson::new(rate).expect("positive rate");
            let mut out = Vec::new();
            for h in start..end {
                let c: f64 = dist.sample(rng);
                out.extend(std::iter::repeat_n(h, c as usize));
            }
            out
        }
    }
}

fn mention_post(cfg: &SynthConfig, g: &Graph, target: usize, hour: u64, rng: &mut ChaCha8Rng) -> Post {
    let fs = &g.followers[target];
    let (author, body) = if !fs.is_empty() && rng.random::<f64>() < cfg.retweet_fraction {
        (fs[rng.random_range(0..fs.len())], Body::Retweet(target))
    } else {
        (other_user(cfg.users, target, rng), Body::Mention(target))
    };
    Post {
        hour,
        second: rng.random_range(0..3600),
        author,
        body,
    }
}

fn follow_graph(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Graph {
    let n = cfg.users;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let n_celeb = ((cfg.celebrity_fraction * n as f64).round() as usize).min(n);
    let celebrities: BTreeSet<usize> = order[..n_celeb].iter().copied().collect();
    let spam: BTreeSet<usize> = order[n - cfg.spam_cluster_size.min(n - n_celeb)..].iter().copied().collect();

    let mut follows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    // Ticket pool: drawing uniformly from it picks a followee with
    // probability proportional to its weight.
    let mut tickets: Vec<usize> = Vec::new();
    for u in 0..n {
        let w = if celebrities.contains(&u) { 40 } else { 1 };
        tickets.extend(std::iter::repeat_n(u, w));
    }
    let mean = cfg.mean_followees.max(1);
    for &u in &order {
        let want = rng.random_range(mean.div_ceil(2)..=mean + mean / 2).min(n - 1);
        let mut tries = 0;
        while follows[u].len() < want && tries < want * 20 {
            tries += 1;
            let v = tickets[rng.random_range(0..tickets.len())];
            if v != u && follows[u].insert(v) && cfg.graph_model == GraphModel::Preferential {
                tickets.push(v);
            }
        }
    }
    for &a in &spam {
        for &b in &spam {
            if a != b {
                follows[a].insert(b);
            }
        }
    }
    let mut followers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (u, fs) in follows.iter().enumerate() {
        for &v in fs {
            followers[v].push(u);
        }
    }
    if n > 1 {
        for v in 0..n {
            if followers[v].is_empty() {
                let u = other_user(n, v, rng);
                followers[v].push(u);
            }
        }
    }
    for fs in &mut followers {
        fs.sort_unstable();
        fs.dedup();
    }
    Graph {
        followers,
        celebrities,
        spam,
    }
}

/// Adds URL posts and returns each URL's first week.
fn url_posts(cfg: &SynthConfig, g: &Graph, rng: &mut ChaCha8Rng, posts: &mut Vec<Post>) -> Vec<u64> {
    let weeks = cfg.hours.div_ceil(cfg.week_hours);
    let pool: Vec<usize> = (0..cfg.users).filter(|u| !g.spam.contains(u)).collect();
    let pool = if pool.len() >= cfg.max_promoters {
        pool
    } else {
        (0..cfg.users).collect()
    };
    let window = |w: u64| (w * cfg.week_hours, ((w + 1) * cfg.week_hours).min(cfg.hours));
    let mut first_weeks = Vec::with_capacity(cfg.urls);
    for k in 0..cfg.urls {
        let w = rng.random_range(0..weeks);
        let second_week = (weeks > 1 && rng.random::<f64>() < cfg.recurring_url_fraction).then(|| {
            let o = rng.random_range(0..weeks - 1);
            if o >= w {
                o + 1
            } else {
                o
            }
        });
        let count = rng.random_range(cfg.min_promoters..=cfg.max_promoters);
        let promoters: Vec<usize> = pool.choose_multiple(rng, count).copied().collect();
        for (i, &author) in promoters.iter().enumerate() {
            let week = match second_week {
                Some(w2) if i % 2 == 1 => w2,
                _ => w,
            };
            let (lo, hi) = window(week);
            posts.push(Post {
                hour: rng.random_range(lo..hi),
                second: rng.random_range(0..3600),
                author,
                body: Body::Url(k),
            });
        }
        first_weeks.push(second_week.map_or(w, |w2| w.min(w2)));
    }
    first_weeks
}

/// Replays the generated stream through the scoring pipeline and derives
/// clicks from audience and on-week promoter velocity.
fn plant_clicks(
    cfg: &SynthConfig,
    events_text: &str,
    edges_text: &str,
    first_weeks: &[u64],
    rng: &mut ChaCha8Rng,
) -> Result<(String, f64), SynthError> {
    let replay = |e: &dyn std::fmt::Display| SynthError::Replay(e.to_string());
    let events = events_text
        .lines()
        .map(parse_event)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| replay(&e))?;
    let (graph, _) = load_graph(edges_text.as_bytes()).map_err(|e| replay(&e))?;
    let (buckets, rejected) = bucketize(&events, epoch());
    if let Some(e) = rejected.first() {
        return Err(replay(e));
    }
    if buckets.is_empty() {
        return Ok((String::new(), 0.0));
    }
    let zeta = estimate_zeta(&buckets, &graph).map_err(|e| replay(&e))?;
    let kcfg = KineticsConfig {
        zeta,
        ..Default::default()
    };
    let masses = MassTable::from_graph(&graph, &kcfg).map_err(|e| replay(&e))?;
    let mut kin = Kinetics::new(kcfg, masses)
        .map_err(|e| replay(&e))?
        .with_checkpoint_period(cfg.week_hours);
    let final_hour = kin
        .replay(&buckets)
        .map_err(|e| replay(&e))?
        .expect("non-empty replay");

    // Every URL with promoters, keyed by its URL string.
    let all: BTreeMap<String, u64> = (0..cfg.urls).map(|k| (url_of(k), 0)).collect();
    let ds = build_url_datasets(&events, &all, &graph, epoch(), cfg.week_hours);
    let week_of: BTreeMap<String, u64> = (0..cfg.urls).map(|k| (url_of(k), first_weeks[k])).collect();

    let mut scored = Vec::with_capacity(ds.global.len());
    for rec in &ds.global {
        let week = week_of[&rec.url];
        let hour = flavor_boundary(VelocityFlavor::OnWeek, Some(week), final_hour, cfg.week_hours)
            .map_err(|e| replay(&e))?
            .expect("on-week boundary always exists");
        let snap = kin.snapshot_at(hour).map_err(|e| replay(&e))?;
        let v = accumulate(rec, |u: &UserId| snap.velocity_of(u));
        let x = if rec.audience > 0 { v / rec.audience as f64 } else { 0.0 };
        scored.push((rec, x));
    }
    let mean_x = scored.iter().map(|(_, x)| x).sum::<f64>() / scored.len().max(1) as f64;
    let noise = LogNormal::new(0.0, cfg.click_noise).expect("finite sigma");

    let mut out = String::new();
    for (rec, x) in scored {
        let nv = if mean_x > 0.0 { x / mean_x } else { 0.0 };
        let lift = (1.0 + cfg.signal * nv).max(0.0);
        let eps: f64 = noise.sample(rng);
        let clicks = (rec.audience as f64 * cfg.base_click_prob * lift * eps).round() as u64;
        let _ = writeln!(out, "{}\t{clicks}", rec.url);
    }
    Ok((out, zeta))
}
