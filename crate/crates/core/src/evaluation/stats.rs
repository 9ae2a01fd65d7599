use statrs::distribution::{ContinuousCDF, StudentsT};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub r: f64,
    pub r_squared: f64,
    pub n: usize,
    /// Two-tailed, from Student's t with `n - 2` degrees of freedom.
    pub p_value: f64,
}

/// Pearson product-moment correlation with its two-tailed significance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Correlation, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < 3 {
        return Err(EvalError::TooFewSamples { need: 3, got: n });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(Correlation {
        r,
        r_squared: r * r,
        n,
        p_value: p_value(r, n),
    })
}

/// Two-tailed p for correlation `r` observed on `n` pairs.
pub fn p_value(r: f64, n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeeklyAverage {
    pub mean_r: f64,
    /// Mean weekly sample size, rounded.
    pub n: usize,
    pub p_value: f64,
}

/// Averages weekly coefficients through Fisher's z; significance is taken at
/// the mean weekly sample size.
pub fn average_weekly_r(weeks: &[(f64, usize)]) -> Result<WeeklyAverage, EvalError> {
    if weeks.is_empty() {
        return Err(EvalError::NoWeeks);
    }
    for (week, &(r, n)) in weeks.iter().enumerate() {
        if n < 3 {
            return Err(EvalError::TooFewSamples { need: 3, got: n });
        }
        if !(r.abs() < 1.0) {
            return Err(EvalError::InfiniteZ { week });
        }
    }
    let mean_n = weeks.iter().map(|&(_, n)| n as f64).sum::<f64>() / weeks.len() as f64;
    let n = mean_n.round() as usize;
    let first = weeks[0].0;
    let mean_r = if weeks.iter().all(|&(r, _)| r == first) {
        first
    } else {
        let z = weeks.iter().map(|&(r, _)| r.atanh()).sum::<f64>() / weeks.len() as f64;
        z.tanh()
    };
    Ok(WeeklyAverage {
        mean_r,
        n,
        p_value: p_value(mean_r, n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_negation() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert_eq!(pearson(&xs, &xs).unwrap().r, 1.0);
        assert_eq!(pearson(&xs, &neg).unwrap().r, -1.0);
        assert_eq!(pearson(&xs, &xs).unwrap().p_value, 0.0);
    }

    #[test]
    fn textbook_value() {
        // sum dx*dy = 10, sum dx^2 = 10, sum dy^2 = 14.8
        let c = pearson(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 6.0]).unwrap();
        let expect = 10.0 / (10.0f64 * 14.8).sqrt();
        assert!((c.r - expect).abs() < 1e-15);
        assert!((c.r - 0.8219949365267865).abs() < 1e-15);
        assert_eq!(c.r_squared, c.r * c.r);
        // scipy.stats.pearsonr: p = 0.08770664700806553
        assert!((c.p_value - 0.08770664700806553).abs() < 1e-12, "{}", c.p_value);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(EvalError::ZeroVariance));
        assert_eq!(
            pearson(&[1.0, 2.0], &[1.0, 2.0]),
            Err(EvalError::TooFewSamples { need: 3, got: 2 })
        );
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0]), Err(EvalError::LengthMismatch(3, 1)));
    }

    #[test]
    fn fisher_average() {
        let same = average_weekly_r(&[(0.37735, 300), (0.37735, 400)]).unwrap();
        assert_eq!(same.mean_r, 0.37735);
        assert_eq!(same.n, 350);
        let anti = average_weekly_r(&[(0.3, 100), (-0.3, 100)]).unwrap();
        assert!(anti.mean_r.abs() < 1e-15);
        let three = average_weekly_r(&[(0.2, 50), (0.4, 50), (0.6, 50)]).unwrap();
        // numpy: tanh(mean(arctanh([.2, .4, .6]))) = 0.41351420408153683
        assert!((three.mean_r - 0.41351420408153683).abs() < 1e-15, "{}", three.mean_r);
        assert_eq!(
            average_weekly_r(&[(0.2, 50), (1.0, 50)]),
            Err(EvalError::InfiniteZ { week: 1 })
        );
        assert_eq!(average_weekly_r(&[]), Err(EvalError::NoWeeks));
    }

    #[test]
    fn significance_shrinks_with_n() {
        assert!(p_value(0.1, 2000) < 1e-4);
        assert!(p_value(0.1, 30) > 0.5);
    }
}
