use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use super::{average_weekly_r, pearson, EvalError, UrlRecord};
use crate::fmt::sig12;
use crate::ingest::UserId;

/// Which velocity checkpoint a URL is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocityFlavor {
    /// Last checkpoint of the stream.
    FinalDate,
    /// End of the week the URL appeared in.
    OnWeek,
    /// End of the week before.
    PriorWeek,
}

impl VelocityFlavor {
    pub const ALL: [VelocityFlavor; 3] = [Self::FinalDate, Self::OnWeek, Self::PriorWeek];

    pub fn label(self) -> &'static str {
        match self {
            VelocityFlavor::FinalDate => "velocity_final",
            VelocityFlavor::OnWeek => "velocity_on_week",
            VelocityFlavor::PriorWeek => "velocity_prior_week",
        }
    }
}

impl FromStr for VelocityFlavor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "final_date" | "final" => Ok(Self::FinalDate),
            "on_week" => Ok(Self::OnWeek),
            "prior_week" => Ok(Self::PriorWeek),
            _ => Err(format!("unknown velocity flavor `{s}`")),
        }
    }
}

/// Checkpoint hour to read velocities at; `None` means the stream epoch,
/// where everyone is at rest. Week ends past the final hour clamp to it.
pub fn flavor_boundary(
    flavor: VelocityFlavor,
    week: Option<u64>,
    final_hour: u64,
    week_hours: u64,
) -> Result<Option<u64>, EvalError> {
    let week_end = |w: u64| ((w + 1) * week_hours - 1).min(final_hour);
    match (flavor, week) {
        (VelocityFlavor::FinalDate, _) => Ok(Some(final_hour)),
        (VelocityFlavor::OnWeek, Some(w)) => Ok(Some(week_end(w))),
        (VelocityFlavor::PriorWeek, Some(0)) => Ok(None),
        (VelocityFlavor::PriorWeek, Some(w)) => Ok(Some(week_end(w - 1))),
        (_, None) => Err(EvalError::Parameter(format!(
            "{} needs a week index",
            flavor.label()
        ))),
    }
}

/// Sum of the promoters' scores.
pub fn accumulate<F: Fn(&UserId) -> f64>(record: &UrlRecord, score: F) -> f64 {
    record.promoters.iter().map(score).sum()
}

/// `(score / audience, clicks / audience)`, or `None` for an empty audience.
pub fn audience_correct(record: &UrlRecord, accumulated: f64, clicks: u64) -> Option<(f64, f64)> {
    (record.audience > 0).then(|| {
        let a = record.audience as f64;
        (accumulated / a, clicks as f64 / a)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeekCorrelation {
    pub week: u64,
    pub r: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub score: String,
    pub pearson_r: f64,
    pub r_squared: f64,
    pub n: usize,
    pub p_value: f64,
    pub per_week: Option<Vec<WeekCorrelation>>,
    /// Records (or weeks, for weekly reports) left out.
    pub excluded: usize,
}

impl CorrelationReport {
    fn from_pairs(score: &str, xs: &[f64], ys: &[f64], excluded: usize) -> Result<Self, EvalError> {
        let c = pearson(xs, ys)?;
        Ok(CorrelationReport {
            score: score.to_string(),
            pearson_r: c.r,
            r_squared: c.r_squared,
            n: c.n,
            p_value: c.p_value,
            per_week: None,
            excluded,
        })
    }
}

/// Accumulated score against raw clicks.
pub fn correlate_uncorrected<F: Fn(&UserId) -> f64>(
    records: &[UrlRecord],
    name: &str,
    score: F,
) -> Result<CorrelationReport, EvalError> {
    let xs: Vec<f64> = records.iter().map(|r| accumulate(r, &score)).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.clicks as f64).collect();
    CorrelationReport::from_pairs(name, &xs, &ys, 0)
}

/// Accumulated score and clicks, both divided by the audience.
pub fn correlate_corrected<F: Fn(&UserId) -> f64>(
    records: &[UrlRecord],
    name: &str,
    score: F,
) -> Result<CorrelationReport, EvalError> {
    let (xs, ys, excluded) = corrected_pairs(records, &score);
    CorrelationReport::from_pairs(name, &xs, &ys, excluded)
}

fn corrected_pairs<F: Fn(&UserId) -> f64>(records: &[UrlRecord], score: &F) -> (Vec<f64>, Vec<f64>, usize) {
    let mut xs = Vec::with_capacity(records.len());
    let mut ys = Vec::with_capacity(records.len());
    let mut excluded = 0;
    for r in records {
        match audience_correct(r, accumulate(r, score), r.clicks) {
            Some((x, y)) => {
                xs.push(x);
                ys.push(y);
            }
            None => excluded += 1,
        }
    }
    (xs, ys, excluded)
}

/// Corrected correlation computed week by week and averaged through Fisher's
/// z. `score_for_week(w)` yields the score lookup for week `w`. Weeks where
/// the correlation is undefined are skipped and counted in `excluded`.
pub fn correlate_weekly<S, F>(
    records: &[UrlRecord],
    name: &str,
    score_for_week: S,
) -> Result<CorrelationReport, EvalError>
where
    S: Fn(u64) -> F,
    F: Fn(&UserId) -> f64,
{
    let mut by_week: BTreeMap<u64, Vec<UrlRecord>> = BTreeMap::new();
    for r in records {
        let w = r
            .week_index
            .ok_or_else(|| EvalError::Parameter(format!("record {} has no week", r.url)))?;
        by_week.entry(w).or_default().push(r.clone());
    }
    let mut weeks = Vec::new();
    let mut skipped = 0;
    for (&week, recs) in &by_week {
        let lookup = score_for_week(week);
        let (xs, ys, _) = corrected_pairs(recs, &lookup);
        match pearson(&xs, &ys) {
            Ok(c) if c.r.abs() < 1.0 => weeks.push(WeekCorrelation { week, r: c.r, n: c.n }),
            Ok(_) | Err(EvalError::ZeroVariance) | Err(EvalError::TooFewSamples { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let pairs: Vec<(f64, usize)> = weeks.iter().map(|w| (w.r, w.n)).collect();
    let avg = average_weekly_r(&pairs)?;
    Ok(CorrelationReport {
        score: name.to_string(),
        pearson_r: avg.mean_r,
        r_squared: avg.mean_r * avg.mean_r,
        n: avg.n,
        p_value: avg.p_value,
        per_week: Some(weeks),
        excluded: skipped,
    })
}

/// Accumulated follower count against an accumulated score (raw, uncorrected).
pub fn audience_confound_report<F: Fn(&UserId) -> f64>(
    records: &[UrlRecord],
    name: &str,
    score: F,
) -> Result<CorrelationReport, EvalError> {
    let xs: Vec<f64> = records.iter().map(|r| r.audience as f64).collect();
    let ys: Vec<f64> = records.iter().map(|r| accumulate(r, &score)).collect();
    CorrelationReport::from_pairs(name, &xs, &ys, 0)
}

/// A titled group of reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportSection {
    pub key: String,
    pub title: String,
    pub reports: Vec<Result<CorrelationReport, String>>,
}

/// Machine-readable report: `section<TAB>score<TAB>r<TAB>r2<TAB>p<TAB>n`.
/// Scores whose correlation is undefined get `nan` fields and n = 0.
pub fn write_report_tsv<W: Write>(mut w: W, sections: &[ReportSection]) -> std::io::Result<()> {
    writeln!(w, "section\tscore\tr\tr_squared\tp_value\tn")?;
    for s in sections {
        for rep in &s.reports {
            match rep {
                Ok(r) => writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    s.key,
                    r.score,
                    sig12(r.pearson_r),
                    sig12(r.r_squared),
                    sig12(r.p_value),
                    r.n
                )?,
                Err(msg) => {
                    let name = msg.split(':').next().unwrap_or(msg);
                    writeln!(w, "{}\t{}\tnan\tnan\tnan\t0", s.key, name)?
                }
            }
        }
    }
    Ok(())
}

/// Human-readable tables, one per section.
pub fn write_report_table<W: Write>(mut w: W, sections: &[ReportSection]) -> std::io::Result<()> {
    for (i, s) in sections.iter().enumerate() {
        if i > 0 {
            writeln!(w)?;
        }
        writeln!(w, "{}", s.title)?;
        writeln!(w, "{:<22} {:>10} {:>10} {:>12} {:>7}", "score", "r", "R^2", "p", "n")?;
        for rep in &s.reports {
            match rep {
                Ok(r) => writeln!(
                    w,
                    "{:<22} {:>10.5} {:>10.5} {:>12} {:>7}{}",
                    r.score,
                    r.pearson_r,
                    r.r_squared,
                    significance(r.p_value),
                    r.n,
                    r.per_week
                        .as_ref()
                        .map(|ws| format!("  ({} weeks)", ws.len()))
                        .unwrap_or_default()
                )?,
                Err(msg) => writeln!(w, "{msg}")?,
            }
        }
    }
    Ok(())
}

fn significance(p: f64) -> String {
    if p < 0.001 {
        "p<0.001".to_string()
    } else if p < 0.05 {
        format!("{p:.4}")
    } else {
        format!("n.s. {p:.3}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn u(s: &str) -> UserId {
        UserId::parse(s).unwrap()
    }

    fn rec(promoters: &[&str], clicks: u64, audience: u64, week: Option<u64>) -> UrlRecord {
        UrlRecord {
            url: format!("u/{clicks}/{audience}"),
            clicks,
            promoters: promoters.iter().map(|p| u(p)).collect::<BTreeSet<_>>(),
            week_index: week,
            audience,
        }
    }

    #[test]
    fn accumulation_sums_promoters() {
        let scores: BTreeMap<UserId, f64> = [(u("a"), 0.2), (u("b"), 0.3), (u("c"), 0.5)].into_iter().collect();
        let r = rec(&["a", "b", "c"], 1, 3, None);
        let total = accumulate(&r, |p| scores.get(p).copied().unwrap_or(0.0));
        assert!((total - 1.0).abs() < 1e-15);
        assert_eq!(accumulate(&r, |_| 0.0), 0.0);
    }

    #[test]
    fn correction_divides_by_audience() {
        let r = rec(&["a", "b", "c"], 500, 1000, None);
        assert_eq!(audience_correct(&r, 1.0, 500), Some((0.001, 0.5)));
        let empty = rec(&["a", "b", "c"], 500, 0, None);
        assert_eq!(audience_correct(&empty, 1.0, 500), None);
    }

    #[test]
    fn boundaries() {
        use VelocityFlavor::*;
        assert_eq!(flavor_boundary(FinalDate, None, 700, 168).unwrap(), Some(700));
        assert_eq!(flavor_boundary(OnWeek, Some(1), 700, 168).unwrap(), Some(335));
        assert_eq!(flavor_boundary(OnWeek, Some(4), 700, 168).unwrap(), Some(700));
        assert_eq!(flavor_boundary(PriorWeek, Some(1), 700, 168).unwrap(), Some(167));
        assert_eq!(flavor_boundary(PriorWeek, Some(0), 700, 168).unwrap(), None);
        assert!(flavor_boundary(OnWeek, None, 700, 168).is_err());
    }

    #[test]
    fn confound_is_perfect_when_scores_track_audience() {
        let followers: BTreeMap<UserId, f64> =
            [("a", 10.0), ("b", 20.0), ("c", 5.0), ("d", 40.0)].iter().map(|&(k, v)| (u(k), v)).collect();
        let records = vec![
            rec(&["a", "b", "c"], 1, 35, None),
            rec(&["b", "c", "d"], 1, 65, None),
            rec(&["a", "c", "d"], 1, 55, None),
            rec(&["a", "b", "d"], 1, 70, None),
        ];
        let rep = audience_confound_report(&records, "followers", |p| followers[p]).unwrap();
        assert!((rep.pearson_r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weekly_skips_undefined_weeks() {
        let mut records = Vec::new();
        for (i, c) in [3u64, 5, 9, 4].iter().enumerate() {
            records.push(rec(&["a"], *c, 10 + i as u64, Some(0)));
            records.push(rec(&["a"], *c, 10 + i as u64, Some(1)));
        }
        // week 0 scores vary, week 1 scores are constant
        let rep = correlate_weekly(&records, "v", |w| move |_: &UserId| if w == 0 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(rep.per_week.as_ref().unwrap().len(), 1);
        assert_eq!(rep.excluded, 1);
        assert_eq!(rep.r_squared, rep.pearson_r * rep.pearson_r);
    }

    #[test]
    fn tsv_layout() {
        let records = vec![
            rec(&["a"], 1, 1, None),
            rec(&["a", "b"], 3, 2, None),
            rec(&["a", "b", "c"], 2, 3, None),
        ];
        let ok = correlate_uncorrected(&records, "count", |_| 1.0).unwrap();
        let sections = vec![ReportSection {
            key: "uncorrected_global".into(),
            title: "Uncorrected".into(),
            reports: vec![Ok(ok), Err("pagerank: correlation undefined".into())],
        }];
        let mut buf = Vec::new();
        write_report_tsv(&mut buf, &sections).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "section\tscore\tr\tr_squared\tp_value\tn");
        assert_eq!(lines[1], "uncorrected_global\tcount\t0.5\t0.25\t0.666666666667\t3");
        assert_eq!(lines[2], "uncorrected_global\tpagerank\tnan\tnan\tnan\t0");
        let mut table = Vec::new();
        write_report_table(&mut table, &sections).unwrap();
        assert!(String::from_utf8(table).unwrap().contains("Uncorrected"));
    }
}
