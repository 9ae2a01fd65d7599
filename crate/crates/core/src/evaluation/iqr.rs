use std::collections::BTreeMap;
use std::str::FromStr;

use super::{EvalError, UrlRecord};

/// How the first and third quartiles are read off a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuartileRule {
    /// Linear interpolation between order statistics at `p * (n - 1)`.
    #[default]
    Linear,
    /// Medians of the lower and upper halves, both including the median
    /// when `n` is odd.
    TukeyHinges,
}

impl FromStr for QuartileRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(QuartileRule::Linear),
            "tukey" | "hinges" => Ok(QuartileRule::TukeyHinges),
            _ => Err(format!("unknown quartile rule `{s}` (expected linear or tukey)")),
        }
    }
}

/// (Q1, Q3) of an ascending, non-empty sample.
pub fn quartiles(sorted: &[f64], rule: QuartileRule) -> (f64, f64) {
    assert!(!sorted.is_empty(), "quartiles of an empty sample");
    match rule {
        QuartileRule::Linear => (interpolate(sorted, 0.25), interpolate(sorted, 0.75)),
        QuartileRule::TukeyHinges => {
            let n = sorted.len();
            let half = n.div_ceil(2);
            (median(&sorted[..half]), median(&sorted[n - half..]))
        }
    }
}

fn interpolate(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    /// One set of fences over all records.
    Global,
    /// Fences computed separately for each `week_index`.
    PerWeek,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IqrOutcome {
    pub kept: Vec<UrlRecord>,
    pub removed: usize,
    /// Groups with fewer than four records, passed through unfiltered.
    pub unfiltered_groups: usize,
}

/// Drops records whose clicks fall outside `[Q1 - k*IQR, Q3 + k*IQR]`.
/// Kept records retain their input order.
pub fn iqr_filter(
    records: &[UrlRecord],
    k: f64,
    rule: QuartileRule,
    grouping: Grouping,
) -> Result<IqrOutcome, EvalError> {
    if !(k >= 0.0) {
        return Err(EvalError::Parameter(format!("IQR multiplier must be >= 0, got {k}")));
    }
    let mut groups: BTreeMap<Option<u64>, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let key = match grouping {
            Grouping::Global => None,
            Grouping::PerWeek => r.week_index,
        };
        groups.entry(key).or_default().push(i);
    }

    let mut keep = vec![true; records.len()];
    let mut unfiltered_groups = 0;
    for members in groups.values() {
        if members.len() < 4 {
            unfiltered_groups += 1;
            continue;
        }
        let mut clicks: Vec<f64> = members.iter().map(|&i| records[i].clicks as f64).collect();
        clicks.sort_by(f64::total_cmp);
        let (q1, q3) = quartiles(&clicks, rule);
        let (lo, hi) = fences(q1, q3, k);
        for &i in members {
            let c = records[i].clicks as f64;
            keep[i] = lo <= c && c <= hi;
        }
    }

    let kept: Vec<UrlRecord> = records
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(r, _)| r.clone())
        .collect();
    Ok(IqrOutcome {
        removed: records.len() - kept.len(),
        kept,
        unfiltered_groups,
    })
}

fn fences(q1: f64, q3: f64, k: f64) -> (f64, f64) {
    if k.is_infinite() {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let spread = k * (q3 - q1);
    (q1 - spread, q3 + spread)
}
