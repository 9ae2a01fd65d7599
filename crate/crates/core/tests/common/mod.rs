#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use kinetic::synth::{generate, read_manifest, SynthConfig, SynthOutput};

/// Runs the CLI in-process and returns its exit code.
pub fn cli(args: &[&str]) -> u8 {
    let mut full = vec!["kinetic"];
    full.extend_from_slice(args);
    kinetic::cli::execute(full)
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// Writes a synth fixture into `dir` and returns the manifest.
pub fn synth_into(cfg: &SynthConfig, dir: &Path) -> BTreeMap<String, String> {
    let out = generate(cfg).expect("synth");
    out.write_to(dir).expect("write fixture");
    read_manifest(out.manifest.as_bytes()).expect("manifest")
}

pub struct Fixture {
    pub dir: PathBuf,
    pub events: PathBuf,
    pub edges: PathBuf,
    pub clicks: PathBuf,
}

impl Fixture {
    pub fn at(dir: &Path) -> Self {
        Fixture {
            dir: dir.to_path_buf(),
            events: dir.join(SynthOutput::EVENTS),
            edges: dir.join(SynthOutput::EDGES),
            clicks: dir.join(SynthOutput::CLICKS),
        }
    }
}

/// score, centrality and eval into `out`; panics on a nonzero exit.
pub fn full_pipeline(fx: &Fixture, out: &Path, extra_score: &[&str]) {
    let mut score = vec!["score", "--out", p(out), "--events", p(&fx.events), "--edges", p(&fx.edges)];
    score.extend_from_slice(extra_score);
    assert_eq!(cli(&score), 0, "score failed");
    let centrality = ["centrality", "--out", p(out), "--events", p(&fx.events), "--edges", p(&fx.edges)];
    assert_eq!(cli(&centrality), 0, "centrality failed");
    let eval = [
        "eval",
        "--out",
        p(out),
        "--events",
        p(&fx.events),
        "--edges",
        p(&fx.edges),
        "--clicks",
        p(&fx.clicks),
    ];
    assert_eq!(cli(&eval), 0, "eval failed");
}

#[derive(Debug, Clone, Copy)]
pub struct Row {
    pub r: f64,
    pub r_squared: f64,
    pub p: f64,
    pub n: usize,
}

/// `report.tsv` keyed by (section, score).
pub fn read_report(out: &Path) -> BTreeMap<(String, String), Row> {
    let text = std::fs::read_to_string(out.join("report.tsv")).expect("report.tsv");
    text.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            let row = Row {
                r: f[2].parse().unwrap(),
                r_squared: f[3].parse().unwrap(),
                p: f[4].parse().unwrap(),
                n: f[5].parse().unwrap(),
            };
            ((f[0].to_string(), f[1].to_string()), row)
        })
        .collect()
}

pub fn row(report: &BTreeMap<(String, String), Row>, section: &str, score: &str) -> Row {
    report[&(section.to_string(), score.to_string())]
}

// ---------------------------------------------------------------------------
// Dense oracles. Nodes are 0..n; `adj[i][j]` means i follows j.

pub fn dense_pagerank(adj: &[Vec<bool>], d: f64, iters: usize) -> Vec<f64> {
    let n = adj.len();
    let out: Vec<usize> = adj.iter().map(|row| row.iter().filter(|&&x| x).count()).collect();
    let mut r = vec![1.0 / n as f64; n];
    for _ in 0..iters {
        let mut next = vec![0.0; n];
        for j in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                if out[i] == 0 {
                    s += r[i] / n as f64;
                } else if adj[i][j] {
                    s += r[i] / out[i] as f64;
                }
            }
            next[j] = (1.0 - d) / n as f64 + d * s;
        }
        r = next;
    }
    r
}

pub fn dense_tunkrank(adj: &[Vec<bool>], p: f64, iters: usize) -> Vec<f64> {
    let n = adj.len();
    let out: Vec<usize> = adj.iter().map(|row| row.iter().filter(|&&x| x).count()).collect();
    let mut v = vec![0.0; n];
    for _ in 0..iters {
        let mut next = vec![0.0; n];
        for u in 0..n {
            for f in 0..n {
                if adj[f][u] {
                    next[u] += (1.0 + p * v[f]) / out[f] as f64;
                }
            }
        }
        v = next;
    }
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    }
    v
}

fn normalized(v: &mut [f64]) -> bool {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
        true
    } else {
        false
    }
}

/// Influence and passivity from a dense weight matrix `w[i][j]` (0 = no edge).
pub fn dense_influence_passivity(w: &[Vec<f64>], iters: usize) -> (Vec<f64>, Vec<f64>) {
    let n = w.len();
    let mut acc = vec![vec![0.0; n]; n];
    let mut rej = vec![vec![0.0; n]; n];
    for i in 0..n {
        let row: f64 = (0..n).map(|k| w[i][k]).sum();
        for j in 0..n {
            if w[i][j] > 0.0 {
                acc[i][j] = w[i][j] / row;
                let col: f64 = (0..n).filter(|&k| w[k][j] > 0.0).map(|k| 1.0 - w[k][j]).sum();
                rej[i][j] = if col > 0.0 { (1.0 - w[i][j]) / col } else { 0.0 };
            }
        }
    }
    let mut inf = vec![1.0 / n as f64; n];
    let mut pas = inf.clone();
    for _ in 0..iters {
        let mut ni = vec![0.0; n];
        for j in 0..n {
            for i in 0..n {
                ni[j] += acc[i][j] * pas[i];
            }
        }
        let ok_i = normalized(&mut ni);
        let mut np = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                np[i] += rej[i][j] * ni[j];
            }
        }
        let ok_p = normalized(&mut np);
        inf = ni;
        pas = np;
        if !(ok_i && ok_p) {
            break;
        }
    }
    (inf, pas)
}

/// Product-moment correlation straight from the textbook sums.
pub fn direct_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Keeps values inside the 1.5 IQR fences (linear-interpolated quartiles);
/// lists shorter than four pass through.
pub fn scan_iqr(values: &[u64], k: f64) -> Vec<u64> {
    if values.len() < 4 {
        return values.to_vec();
    }
    let mut s = values.to_vec();
    s.sort_unstable();
    let q = |p: f64| {
        let h = (s.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        if lo + 1 < s.len() {
            s[lo] as f64 * (1.0 - frac) + s[lo + 1] as f64 * frac
        } else {
            s[lo] as f64
        }
    };
    let (q1, q3) = (q(0.25), q(0.75));
    let iqr = q3 - q1;
    values
        .iter()
        .copied()
        .filter(|&v| (v as f64) >= q1 - k * iqr && (v as f64) <= q3 + k * iqr)
        .collect()
}
