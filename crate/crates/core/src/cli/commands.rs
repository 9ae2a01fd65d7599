use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};

use super::config::{RunConfig, Settings, Zeta, SYNTH_KEYS};
use super::CliError;
use crate::centrality::{
    build_retweet_graph, follow_ratio_scores, followers_scores, influence_passivity, pagerank, read_scores,
    tunkrank, write_scores, Algorithm, ScoreVector,
};
use crate::dynamics::{
    estimate_zeta, trending, write_checkpoints, write_snapshots, Kinetics, KineticsConfig, MassTable, Snapshot,
    SnapshotStore,
};
use crate::evaluation::{
    audience_confound_report, build_url_datasets, correlate_corrected, correlate_uncorrected, correlate_weekly,
    flavor_boundary, iqr_filter, load_clicks, write_report_table, write_report_tsv, CorrelationReport, EvalError,
    Grouping, ReportSection, VelocityFlavor,
};
use crate::fmt::sig12;
use crate::ingest::{bucketize, load_follower_counts, load_graph, read_events, Event, UserGraph, UserId};
use crate::synth::{generate, read_manifest, SynthConfig};

pub const SNAPSHOTS: &str = "snapshots.tsv";
pub const CHECKPOINTS: &str = "checkpoints.tsv";
pub const VELOCITY: &str = "velocity.tsv";
pub const SCORE_CONF: &str = "score.conf";

/// Scorers compared against clicks, in report order.
const REPORT_SCORES: [Algorithm; 4] = [
    Algorithm::Followers,
    Algorithm::Influence,
    Algorithm::PageRank,
    Algorithm::TunkRank,
];

fn data<E: std::fmt::Display>(context: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Data(format!("{context}: {e}"))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    p.as_deref()
        .ok_or_else(|| CliError::Usage(format!("missing required setting `{key}` (--{key})")))
}

fn write_out(out: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .and_then(|_| std::fs::write(out.join(name), bytes))
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", out.join(name).display())))
}

/// Records the settings a command ran with, overrides applied.
fn conf_text(s: &Settings, keys: &[&str], resolved: &[(&str, String)]) -> String {
    let mut text = String::new();
    for key in keys {
        if let Some((_, v)) = resolved.iter().find(|(k, _)| k == key) {
            let _ = writeln!(text, "{key} = {v}");
        } else if let Some(v) = s.get(key) {
            let _ = writeln!(text, "{key} = {v}");
        }
    }
    text
}

fn require_artifact(out: &Path, name: &str, command: &str) -> Result<PathBuf, CliError> {
    let p = out.join(name);
    if p.is_file() {
        Ok(p)
    } else {
        Err(CliError::Usage(format!(
            "{} not found; run `kinetic {command}` with the same --out first",
            p.display()
        )))
    }
}

fn read_stream(cfg: &RunConfig) -> Result<(Vec<Event>, usize, usize), CliError> {
    let path = required(&cfg.events, "events")?;
    let read = read_events(open(path)?).map_err(data(&path.display().to_string()))?;
    if read.skip_rate() > cfg.max_skip_rate {
        let (line, err) = &read.skipped[0];
        return Err(CliError::Data(format!(
            "{}: {} of {} records unparseable (ceiling {}); first at line {line}: {err}",
            path.display(),
            read.skipped.len(),
            read.records,
            cfg.max_skip_rate
        )));
    }
    Ok((read.events, read.records, read.skipped.len()))
}

fn read_user_graph(cfg: &RunConfig) -> Result<UserGraph, CliError> {
    let path = required(&cfg.edges, "edges")?;
    let (graph, _) = load_graph(open(path)?).map_err(data(&path.display().to_string()))?;
    match &cfg.follower_counts {
        None => Ok(graph),
        Some(p) => {
            let (counts, errors) = load_follower_counts(open(p)?).map_err(data(&p.display().to_string()))?;
            if let Some(e) = errors.first() {
                return Err(CliError::Data(format!("{}: {e}", p.display())));
            }
            Ok(graph.with_follower_counts(counts))
        }
    }
}

fn default_epoch(events: &[Event]) -> Option<DateTime<Utc>> {
    let first = events.iter().map(|e| e.timestamp).min()?;
    Some(first.date_naive().and_hms_opt(0, 0, 0)?.and_utc())
}

fn fmt_epoch(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

fn checkpoint_label(hour: u64, week_hours: u64) -> String {
    if (hour + 1) % week_hours == 0 {
        format!("week_{}", (hour + 1) / week_hours - 1)
    } else {
        "final".to_string()
    }
}

pub fn score(cfg: &RunConfig, s: &Settings, out: &Path) -> Result<(), CliError> {
    let (events, records, mut skipped) = read_stream(cfg)?;
    let graph = read_user_graph(cfg)?;
    let epoch = cfg.epoch.or_else(|| default_epoch(&events));

    let mut resolved = vec![("week_hours", cfg.week_hours.to_string())];
    let mut snapshots = Vec::new();
    let mut checkpoints = Vec::new();
    let mut velocity = String::new();
    let mut users_tracked = 0;
    let mut hours = 0;

    if let Some(epoch) = epoch {
        resolved.push(("epoch", fmt_epoch(epoch)));
        let (buckets, rejected) = bucketize(&events, epoch);
        skipped += rejected.len();
        if records > 0 && skipped as f64 / records as f64 > cfg.max_skip_rate {
            return Err(CliError::Data(format!(
                "{skipped} of {records} records rejected (ceiling {}); first: {}",
                cfg.max_skip_rate,
                rejected.first().map(|e| e.to_string()).unwrap_or_default()
            )));
        }
        let zeta = match cfg.zeta {
            Zeta::Fixed(z) => z,
            Zeta::Auto if buckets.is_empty() => 0.0,
            Zeta::Auto => estimate_zeta(&buckets, &graph).map_err(data("zeta estimate"))?,
        };
        resolved.push(("zeta", zeta.to_string()));
        let kcfg = KineticsConfig {
            zeta,
            mass_mode: cfg.mass_mode,
            default_mass: cfg.default_mass,
            force_source: cfg.force_source,
        };
        let masses = MassTable::from_graph(&graph, &kcfg).map_err(|e| CliError::Usage(e.to_string()))?;
        let mut kin = Kinetics::new(kcfg, masses)
            .map_err(|e| CliError::Usage(e.to_string()))?
            .with_checkpoint_period(cfg.week_hours);
        kin.replay(&buckets).map_err(data("replay"))?;

        let labels: BTreeMap<u64, String> = kin
            .checkpoints()
            .map(|c| (c.hour, checkpoint_label(c.hour, cfg.week_hours)))
            .collect();
        write_snapshots(&mut snapshots, kin.checkpoints()).map_err(data("snapshots"))?;
        write_checkpoints(&mut checkpoints, &labels).map_err(data("checkpoints"))?;
        for (user, v) in kin.velocities() {
            let _ = writeln!(velocity, "{user}\t{}", sig12(*v));
        }
        users_tracked = buckets
            .iter()
            .flat_map(|b| b.force.keys().chain(b.authors.iter()))
            .collect::<BTreeSet<&UserId>>()
            .len();
        hours = kin.last_hour().map_or(0, |h| h + 1);
    }

    write_out(out, SNAPSHOTS, &snapshots)?;
    write_out(out, CHECKPOINTS, &checkpoints)?;
    write_out(out, VELOCITY, velocity.as_bytes())?;
    let keys = [
        "events",
        "edges",
        "follower_counts",
        "zeta",
        "mass_mode",
        "default_mass",
        "force_source",
        "week_hours",
        "epoch",
        "max_skip_rate",
    ];
    write_out(out, SCORE_CONF, conf_text(s, &keys, &resolved).as_bytes())?;
    println!("users tracked: {users_tracked}");
    println!("hours processed: {hours}");
    println!("records skipped: {skipped} of {records}");
    Ok(())
}

struct ScoreRun {
    store: SnapshotStore,
    epoch: Option<DateTime<Utc>>,
    week_hours: u64,
}

fn load_score_run(out: &Path) -> Result<ScoreRun, CliError> {
    let conf = require_artifact(out, SCORE_CONF, "score")?;
    let cps = require_artifact(out, CHECKPOINTS, "score")?;
    let snaps = require_artifact(out, SNAPSHOTS, "score")?;
    let values = read_manifest(open(&conf)?).map_err(data(SCORE_CONF))?;
    let week_hours = values
        .get("week_hours")
        .map(|v| v.parse::<u64>())
        .transpose()
        .map_err(data(SCORE_CONF))?
        .unwrap_or(168);
    let epoch = values
        .get("epoch")
        .map(|v| crate::ingest::parse_timestamp(v))
        .transpose()
        .map_err(data(SCORE_CONF))?;
    let store = SnapshotStore::load(open(&cps)?, open(&snaps)?).map_err(data(SNAPSHOTS))?;
    Ok(ScoreRun {
        store,
        epoch,
        week_hours: week_hours.max(1),
    })
}

pub fn trend(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let week = cfg
        .week
        .ok_or_else(|| CliError::Usage("missing required setting `week` (--week)".into()))?;
    let run = load_score_run(out)?;
    let wh = run.week_hours;
    let rows = match run.store.final_hour() {
        None => Vec::new(),
        Some(final_hour) => {
            if week * wh > final_hour {
                return Err(CliError::Data(format!(
                    "week {week} starts after the last scored hour {final_hour}"
                )));
            }
            let to_hour = ((week + 1) * wh - 1).min(final_hour);
            let rest = Snapshot::at_rest(0);
            let from = match week {
                0 => &rest,
                w => snapshot(&run.store, w * wh - 1)?,
            };
            let to = snapshot(&run.store, to_hour)?;
            trending(from, to, cfg.threshold, cfg.k)
        }
    };
    let mut text = String::from("rank\tuser\tfrom_hour\tto_hour\tacceleration\trelative_increase\n");
    for (i, e) in rows.iter().enumerate() {
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}\t{}",
            i + 1,
            e.user,
            e.from_hour,
            e.to_hour,
            sig12(e.acceleration),
            sig12(e.relative_increase)
        );
    }
    write_out(out, &format!("trending_week_{week}.tsv"), text.as_bytes())?;
    print!("{text}");
    Ok(())
}

fn snapshot(store: &SnapshotStore, hour: u64) -> Result<&Snapshot, CliError> {
    store
        .get(hour)
        .ok_or_else(|| CliError::Data(format!("no snapshot for boundary hour {hour}")))
}

fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>, CliError> {
    let all = [
        Algorithm::Followers,
        Algorithm::FollowRatio,
        Algorithm::PageRank,
        Algorithm::TunkRank,
        Algorithm::Influence,
        Algorithm::Passivity,
    ];
    if list == "all" {
        return Ok(all.to_vec());
    }
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim) {
        let alg = match name {
            "ip" => {
                out.extend([Algorithm::Influence, Algorithm::Passivity]);
                continue;
            }
            n => all
                .iter()
                .copied()
                .find(|a| a.name() == n)
                .ok_or_else(|| CliError::Usage(format!("unknown algorithm `{n}`")))?,
        };
        out.push(alg);
    }
    out.sort();
    out.dedup();
    Ok(out)
}

pub fn centrality(cfg: &RunConfig, s: &Settings, out: &Path) -> Result<(), CliError> {
    let algorithms = parse_algorithms(&cfg.algorithm)?;
    let graph = read_user_graph(cfg)?;
    let needs_events = algorithms
        .iter()
        .any(|a| matches!(a, Algorithm::Influence | Algorithm::Passivity));
    let mut results: Vec<ScoreVector> = Vec::new();
    let mut ip = None;
    for alg in algorithms {
        let sv = match alg {
            Algorithm::Followers => followers_scores(&graph),
            Algorithm::FollowRatio => follow_ratio_scores(&graph),
            Algorithm::PageRank => pagerank(&graph, &cfg.pagerank).map_err(data("pagerank"))?,
            Algorithm::TunkRank => tunkrank(&graph, &cfg.tunkrank).map_err(data("tunkrank"))?,
            Algorithm::Influence | Algorithm::Passivity => {
                if ip.is_none() {
                    let (events, _, _) = read_stream(cfg)?;
                    let (rg, stats) = build_retweet_graph(&events, &graph);
                    println!(
                        "retweet graph: {} edges ({} pairs without follow edge dropped)",
                        rg.edge_count(),
                        stats.dropped_no_follow
                    );
                    ip = Some(influence_passivity(&rg, &cfg.convergence).map_err(data("influence-passivity"))?);
                }
                let outcome = ip.as_ref().expect("computed above");
                if alg == Algorithm::Influence {
                    outcome.influence.clone()
                } else {
                    outcome.passivity.clone()
                }
            }
        };
        results.push(sv);
    }
    for sv in &results {
        let mut buf = Vec::new();
        write_scores(&mut buf, sv).map_err(data(sv.algorithm.name()))?;
        write_out(out, &format!("{}.tsv", sv.algorithm.name()), &buf)?;
        println!(
            "{}: {} users, {} iterations, residual {}, {}",
            sv.algorithm,
            sv.scores.len(),
            sv.iterations,
            sig12(sv.residual),
            if sv.converged { "converged" } else { "not converged" }
        );
    }
    let mut keys = vec!["edges", "follower_counts", "algorithm", "damping", "retweet_prob", "tol", "max_iter"];
    if needs_events {
        keys.insert(1, "events");
    }
    write_out(out, "centrality.conf", conf_text(s, &keys, &[]).as_bytes())?;
    Ok(())
}

fn load_scores(out: &Path, alg: Algorithm) -> Result<BTreeMap<UserId, f64>, CliError> {
    let p = require_artifact(out, &format!("{}.tsv", alg.name()), "centrality")?;
    read_scores(open(&p)?).map_err(data(&p.display().to_string()))
}

fn finish(name: &str, r: Result<CorrelationReport, EvalError>) -> Result<CorrelationReport, String> {
    r.map_err(|e| format!("{name}: {e}"))
}

pub fn eval(cfg: &RunConfig, s: &Settings, out: &Path) -> Result<(), CliError> {
    let run = load_score_run(out)?;
    let scores: Vec<(Algorithm, BTreeMap<UserId, f64>)> = REPORT_SCORES
        .iter()
        .map(|&a| load_scores(out, a).map(|m| (a, m)))
        .collect::<Result<_, _>>()?;
    let (events, _, _) = read_stream(cfg)?;
    let graph = read_user_graph(cfg)?;
    let clicks_path = required(&cfg.clicks, "clicks")?;
    let clicks = load_clicks(open(clicks_path)?).map_err(data(&clicks_path.display().to_string()))?;
    let wh = run.week_hours;

    let (Some(epoch), Some(final_hour)) = (run.epoch, run.store.final_hour()) else {
        return Err(CliError::Data("the scored stream is empty".into()));
    };
    let ds = build_url_datasets(&events, &clicks, &graph, epoch, wh);
    let global = iqr_filter(&ds.global, cfg.iqr_k, cfg.quartile_rule, Grouping::Global).map_err(data("iqr"))?;
    let weekly = iqr_filter(&ds.weekly, cfg.iqr_k, cfg.quartile_rule, Grouping::PerWeek).map_err(data("iqr"))?;

    let final_snap = snapshot(&run.store, final_hour)?;
    let rest = Snapshot::at_rest(0);
    let weeks: BTreeSet<u64> = weekly.kept.iter().filter_map(|r| r.week_index).collect();
    let mut flavor_snaps: BTreeMap<(u8, u64), &Snapshot> = BTreeMap::new();
    for &w in &weeks {
        for (tag, flavor) in [(0u8, VelocityFlavor::OnWeek), (1, VelocityFlavor::PriorWeek)] {
            let snap = match flavor_boundary(flavor, Some(w), final_hour, wh).map_err(data("boundary"))? {
                None => &rest,
                Some(h) => snapshot(&run.store, h)?,
            };
            flavor_snaps.insert((tag, w), snap);
        }
    }

    let lookup = |m: &BTreeMap<UserId, f64>, u: &UserId| m.get(u).copied().unwrap_or(0.0);
    let static_scores = || scores.iter().filter(|(a, _)| *a != Algorithm::Followers);
    let vel = |u: &UserId| final_snap.velocity_of(u);

    let mut uncorrected = Vec::new();
    for (alg, m) in &scores {
        uncorrected.push(finish(alg.name(), correlate_uncorrected(&global.kept, alg.name(), |u| lookup(m, u))));
    }
    uncorrected.push(finish("velocity", correlate_uncorrected(&global.kept, "velocity", vel)));

    let mut confound = Vec::new();
    let mut corrected = Vec::new();
    let mut by_week = Vec::new();
    for (alg, m) in static_scores() {
        let name = alg.name();
        confound.push(finish(name, audience_confound_report(&global.kept, name, |u| lookup(m, u))));
        corrected.push(finish(name, correlate_corrected(&global.kept, name, |u| lookup(m, u))));
        by_week.push(finish(
            name,
            correlate_weekly(&weekly.kept, name, |_| move |u: &UserId| lookup(m, u)),
        ));
    }
    confound.push(finish("velocity", audience_confound_report(&global.kept, "velocity", vel)));
    corrected.push(finish("velocity", correlate_corrected(&global.kept, "velocity", vel)));
    for (tag, flavor) in [
        (None, VelocityFlavor::FinalDate),
        (Some(0u8), VelocityFlavor::OnWeek),
        (Some(1u8), VelocityFlavor::PriorWeek),
    ] {
        let name = flavor.label();
        let snaps = &flavor_snaps;
        by_week.push(finish(
            name,
            correlate_weekly(&weekly.kept, name, |w| {
                let snap: &Snapshot = match tag {
                    None => final_snap,
                    Some(t) => snaps[&(t, w)],
                };
                move |u: &UserId| snap.velocity_of(u)
            }),
        ));
    }

    let sections = vec![
        ReportSection {
            key: "uncorrected_global".into(),
            title: format!("Uncorrected scores vs clicks, all URLs (n = {})", global.kept.len()),
            reports: uncorrected,
        },
        ReportSection {
            key: "confound_followers".into(),
            title: "Accumulated followers vs accumulated scores".into(),
            reports: confound,
        },
        ReportSection {
            key: "corrected_global".into(),
            title: "Audience-corrected scores vs clicks, all URLs".into(),
            reports: corrected,
        },
        ReportSection {
            key: "corrected_weekly".into(),
            title: format!("Audience-corrected, averaged over {} weeks", weeks.len()),
            reports: by_week,
        },
    ];
    let mut tsv = Vec::new();
    write_report_tsv(&mut tsv, &sections).map_err(data("report"))?;
    let mut table = Vec::new();
    write_report_table(&mut table, &sections).map_err(data("report"))?;
    let st = &ds.stats;
    let summary = format!(
        "\nURLs seen {}, qualified {} (weekly {}), too few promoters {}, no click data {}, \
         spanning weeks {}, IQR removed {} global / {} weekly\n",
        st.urls_seen,
        ds.global.len(),
        ds.weekly.len(),
        st.too_few_promoters,
        st.missing_clicks,
        st.multi_week,
        global.removed,
        weekly.removed
    );
    table.extend_from_slice(summary.as_bytes());
    write_out(out, "report.tsv", &tsv)?;
    write_out(out, "report.txt", &table)?;
    let keys = ["events", "edges", "follower_counts", "clicks", "quartile_rule", "iqr_k"];
    write_out(out, "eval.conf", conf_text(s, &keys, &[]).as_bytes())?;
    print!("{}", String::from_utf8_lossy(&table));
    Ok(())
}

pub fn synth(cfg: &SynthConfig, s: &Settings, out: &Path) -> Result<(), CliError> {
    let generated = generate(cfg).map_err(|e| match e {
        crate::synth::SynthError::Config(m) => CliError::Usage(m),
        other => CliError::Data(other.to_string()),
    })?;
    generated
        .write_to(out)
        .map_err(|e| CliError::Data(format!("cannot write to {}: {e}", out.display())))?;
    write_out(out, "synth.conf", conf_text(s, SYNTH_KEYS, &[]).as_bytes())?;
    println!(
        "wrote {} events, {} follow edges, {} click rows to {}",
        generated.events.lines().count(),
        generated.edges.lines().count(),
        generated.clicks.lines().count(),
        out.display()
    );
    Ok(())
}
