//! Multi-run aggregation and Welch's two-sample t-test.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::{Error, Result};

/// Values of one metric across repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeries {
    pub metric: String,
    values: Vec<f64>,
}

impl RunSeries {
    pub fn new(metric: impl Into<String>, values: Vec<f64>) -> Result<RunSeries> {
        if values.is_empty() {
            return Err(Error::Empty("run series"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("run values must be finite".into()));
        }
        Ok(RunSeries {
            metric: metric.into(),
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single run.
    pub sd: f64,
    pub runs: usize,
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let prec = f.precision().unwrap_or(2);
        write!(f, "{:.*} ({:.*})", prec, self.mean, prec, self.sd)
    }
}

// Summing in sorted order makes the result independent of run order.
fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn mean_and_var(values: &[f64]) -> (f64, f64) {
    let v = sorted(values);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let mut sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    sq.sort_by(f64::total_cmp);
    (mean, sq.iter().sum::<f64>() / (n - 1.0))
}

pub fn aggregate_runs(series: &RunSeries) -> RunSummary {
    let (mean, var) = mean_and_var(&series.values);
    RunSummary {
        mean,
        sd: var.sqrt(),
        runs: series.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    pub alpha: f64,
    pub significant: bool,
    /// Set when the statistic is undefined and a convention was applied.
    pub degenerate: bool,
}

/// Two-sided tail probability P(|T| >= |t|) of Student's t with `df`
/// degrees of freedom, via the regularized incomplete beta function.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Welch's unequal-variance two-sample t-test.
pub fn two_sample_ttest(a: &RunSeries, b: &RunSeries, alpha: f64) -> Result<TTestResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0,1), got {alpha}")));
    }
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument(
            "each series needs at least two runs".into(),
        ));
    }
    let (ma, va) = mean_and_var(&a.values);
    let (mb, vb) = mean_and_var(&b.values);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;

    if se2 == 0.0 {
        let equal = ma == mb;
        if equal {
            log::warn!("t-test on two identical constant series; reporting t = 0, p = 1");
        } else {
            log::warn!("t-test on two distinct constant series; reporting infinite t");
        }
        let t = if equal {
            0.0
        } else {
            (ma - mb).signum() * f64::INFINITY
        };
        let p_value = if equal { 1.0 } else { 0.0 };
        return Ok(TTestResult {
            t,
            p_value,
            df: na + nb - 2.0,
            alpha,
            significant: p_value < alpha,
            degenerate: true,
        });
    }

    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let p_value = student_t_two_sided(t, df);
    Ok(TTestResult {
        t,
        p_value,
        df,
        alpha,
        significant: p_value < alpha,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn series(v: &[f64]) -> RunSeries {
        RunSeries::new("m", v.to_vec()).unwrap()
    }

    #[test]
    fn aggregate_examples() {
        let s = aggregate_runs(&series(&[0.96, 0.96, 0.96]));
        assert_abs_diff_eq!(s.mean, 0.96, epsilon = 1e-15);
        assert_eq!(s.sd, 0.0);
        let s = aggregate_runs(&series(&[1.0, 2.0, 3.0]));
        assert_eq!((s.mean, s.sd), (2.0, 1.0));
        let s = aggregate_runs(&series(&[5.0]));
        assert_eq!((s.mean, s.sd), (5.0, 0.0));
        assert!(RunSeries::new("m", vec![]).is_err());
    }

    #[test]
    fn identical_series() {
        let a = series(&[1.0, 2.0, 4.0]);
        let r = two_sample_ttest(&a, &a, 0.05).unwrap();
        assert_eq!(r.t, 0.0);
        assert_abs_diff_eq!(r.p_value, 1.0, epsilon = 1e-12);
        assert!(!r.significant);

        let c = series(&[0.5, 0.5]);
        let r = two_sample_ttest(&c, &c, 0.05).unwrap();
        assert!(r.degenerate);
        assert_eq!((r.t, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn separated_macro_f1_runs_are_significant() {
        let a = series(&[0.73, 0.72, 0.74]);
        let b = series(&[0.97, 0.98, 0.97]);
        let r = two_sample_ttest(&a, &b, 0.05).unwrap();
        assert!(r.p_value < 1e-4, "p = {}", r.p_value);
        assert!(r.significant);
    }

    #[test]
    fn rejects_short_series() {
        assert!(two_sample_ttest(&series(&[1.0]), &series(&[1.0, 2.0]), 0.05).is_err());
        assert!(two_sample_ttest(&series(&[1.0, 3.0]), &series(&[1.0, 2.0]), 1.5).is_err());
    }

    #[test]
    fn summary_display() {
        let s = aggregate_runs(&series(&[1.0, 2.0, 3.0]));
        assert_eq!(format!("{s}"), "2.00 (1.00)");
    }
}
