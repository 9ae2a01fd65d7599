mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use common::*;
use kinetic::dynamics::{estimate_zeta, Kinetics, KineticsConfig, MassTable};
use kinetic::ingest::{bucketize, load_graph, parse_timestamp, read_events};
use kinetic::synth::SynthConfig;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinetic"))
        .args(args)
        .output()
        .expect("spawn kinetic")
}

fn small_synth() -> SynthConfig {
    SynthConfig {
        seed: 5,
        users: 200,
        hours: 336,
        urls: 80,
        ..Default::default()
    }
}

fn read_tsv(path: &Path) -> BTreeMap<String, f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once('\t').unwrap();
            (k.to_string(), v.parse().unwrap())
        })
        .collect()
}

#[test]
fn manifest_mentions_survive_bucketing() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth_into(&small_synth(), tmp.path());
    let fx = Fixture::at(tmp.path());
    let read = read_events(std::io::BufReader::new(std::fs::File::open(&fx.events).unwrap())).unwrap();
    assert!(read.skipped.is_empty());
    let epoch = parse_timestamp(&manifest["epoch"]).unwrap();
    let (buckets, rejected) = bucketize(&read.events, epoch);
    assert!(rejected.is_empty());

    let mut totals: BTreeMap<String, u64> = BTreeMap::new();
    for b in &buckets {
        for (u, &c) in &b.force {
            *totals.entry(u.to_string()).or_default() += c as u64;
            let key = format!("mentions.{u}.{}", b.hour_index);
            assert_eq!(manifest[&key], c.to_string(), "{key}");
        }
    }
    for (key, value) in &manifest {
        if let Some(user) = key.strip_prefix("mentions.").filter(|k| !k.contains('.')) {
            assert_eq!(totals.get(user).copied().unwrap_or(0).to_string(), *value, "{key}");
        }
    }
}

#[test]
fn truncated_replay_matches_history() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth_into(&small_synth(), tmp.path());
    let fx = Fixture::at(tmp.path());
    let read = read_events(std::io::BufReader::new(std::fs::File::open(&fx.events).unwrap())).unwrap();
    let (graph, _) = load_graph(std::io::BufReader::new(std::fs::File::open(&fx.edges).unwrap())).unwrap();
    let (buckets, _) = bucketize(&read.events, parse_timestamp(&manifest["epoch"]).unwrap());
    let cfg = KineticsConfig {
        zeta: estimate_zeta(&buckets, &graph).unwrap(),
        ..Default::default()
    };
    let masses = MassTable::from_graph(&graph, &cfg).unwrap();
    let mut full = Kinetics::new(cfg.clone(), masses.clone())
        .unwrap()
        .with_ring_capacity(400);
    full.replay(&buckets).unwrap();

    for cut in [1usize, 50, 167, 200] {
        let mut part = Kinetics::new(cfg.clone(), masses.clone()).unwrap();
        part.replay(&buckets[..cut]).unwrap();
        let hour = buckets[cut - 1].hour_index;
        for (u, &v) in part.velocities() {
            assert_eq!(full.velocity_at(u, hour).unwrap(), v, "{u} at {hour}");
        }
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let edges = tmp.path().join("edges.tsv");
    std::fs::write(&edges, "a\tb\n").unwrap();

    assert_eq!(bin(&[]).status.code(), Some(1));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
    assert_eq!(bin(&["score", "--out", p(&out), "--bogus"]).status.code(), Some(1));

    let missing = tmp.path().join("nope.jsonl");
    let r = bin(&["score", "--out", p(&out), "--events", p(&missing), "--edges", p(&edges)]);
    assert_eq!(r.status.code(), Some(1));

    let garbage = tmp.path().join("garbage.jsonl");
    std::fs::write(&garbage, "not json\n{\"id\":1}\n").unwrap();
    let r = bin(&["score", "--out", p(&out), "--events", p(&garbage), "--edges", p(&edges)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 1"));

    let r = bin(&["score", "--out", p(&out), "--events", p(&garbage), "--edges", p(&edges), "--set", "colour=red"]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn empty_stream_succeeds_with_empty_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let events = tmp.path().join("events.jsonl");
    let edges = tmp.path().join("edges.tsv");
    std::fs::write(&events, "").unwrap();
    std::fs::write(&edges, "a\tb\n").unwrap();
    let r = bin(&["score", "--out", p(&out), "--events", p(&events), "--edges", p(&edges)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(std::fs::read_to_string(out.join("velocity.tsv")).unwrap(), "");
}

#[test]
fn missing_upstream_artifacts_name_the_command() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let r = bin(&["trend", "--out", p(&out), "--week", "0"]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("kinetic score"));

    synth_into(&small_synth(), tmp.path());
    let fx = Fixture::at(tmp.path());
    assert_eq!(
        cli(&["score", "--out", p(&out), "--events", p(&fx.events), "--edges", p(&fx.edges)]),
        0
    );
    let r = bin(&[
        "eval",
        "--out",
        p(&out),
        "--events",
        p(&fx.events),
        "--edges",
        p(&fx.edges),
        "--clicks",
        p(&fx.clicks),
    ]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("kinetic centrality"));
}

#[test]
fn follower_scores_on_tiny_graphs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let edges = tmp.path().join("edges.tsv");
    // eight fans follow hub; hub follows four others
    let mut text = String::new();
    for i in 0..8 {
        text.push_str(&format!("fan{i}\thub\n"));
    }
    for i in 0..4 {
        text.push_str(&format!("hub\tpick{i}\n"));
    }
    std::fs::write(&edges, text).unwrap();
    let code = cli(&[
        "centrality",
        "--out",
        p(&out),
        "--edges",
        p(&edges),
        "--algorithm",
        "followers,ratio,pagerank",
    ]);
    assert_eq!(code, 0);
    let followers = read_tsv(&out.join("followers.tsv"));
    assert_eq!(followers["hub"], 8.0);
    assert_eq!(followers["pick0"], 1.0);
    assert_eq!(followers["fan0"], 0.0);
    assert_eq!(read_tsv(&out.join("ratio.tsv"))["hub"], 2.0);
    let pr = read_tsv(&out.join("pagerank.tsv"));
    assert!((pr.values().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(pr["hub"] > pr["fan0"]);

    let pair = tmp.path().join("pair.tsv");
    std::fs::write(&pair, "a\tb\n").unwrap();
    assert_eq!(cli(&["centrality", "--out", p(&out), "--edges", p(&pair), "--algorithm", "followers"]), 0);
    let f = read_tsv(&out.join("followers.tsv"));
    assert_eq!((f["a"], f["b"]), (0.0, 1.0));
}

#[test]
fn week_zero_trends_from_rest_and_config_files_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let events = tmp.path().join("events.jsonl");
    let edges = tmp.path().join("edges.tsv");
    std::fs::write(&edges, "x\tstar\ny\tstar\nx\tdim\n").unwrap();
    std::fs::write(
        &events,
        concat!(
            r#"{"id":"1","ts":"2024-05-06T01:10:00Z","author":"x","text":"@star @dim"}"#,
            "\n",
            r#"{"id":"2","ts":"2024-05-06T02:10:00Z","author":"y","text":"RT @star: look"}"#,
            "\n"
        ),
    )
    .unwrap();
    let conf = tmp.path().join("run.conf");
    std::fs::write(
        &conf,
        format!("# fixed damping\nevents = {}\nedges = {}\nzeta = 0\n", p(&events), p(&edges)),
    )
    .unwrap();
    assert_eq!(cli(&["score", "--config", p(&conf), "--out", p(&out)]), 0);
    let v = read_tsv(&out.join("velocity.tsv"));
    assert_eq!(v["star"], 1.0);
    assert_eq!(v["dim"], 1.0);

    assert_eq!(cli(&["trend", "--out", p(&out), "--week", "0"]), 0);
    let text = std::fs::read_to_string(out.join("trending_week_0.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][1], "dim");
    assert_eq!(rows[0][2], "0");
    assert_eq!(rows[0][5], "inf");
}
