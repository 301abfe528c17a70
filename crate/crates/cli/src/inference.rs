//! Distribution tests used by the experiment reports.

use esig_core::stats;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};

/// Kolmogorov–Smirnov distance between the sample and `N(0,1)`.
pub fn ks_normal(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let normal = Normal::standard();
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sided paired t-test of `mean(a − b) > 0`.
pub fn paired_t_greater(a: &[f64], b: &[f64]) -> TestResult {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let se = stats::std_error(&diff);
    let t = stats::mean(&diff) / se;
    let p = if se > 0.0 && diff.len() > 1 {
        let dist = StudentsT::new(0.0, 1.0, (diff.len() - 1) as f64).expect("valid dof");
        1.0 - dist.cdf(t)
    } else {
        f64::NAN
    };
    TestResult { statistic: t, p_value: p }
}

/// One-sided F-test of `Var(a) > Var(b)`.
pub fn variance_f_greater(a: &[f64], b: &[f64]) -> TestResult {
    let f = stats::variance(a) / stats::variance(b);
    let p = match FisherSnedecor::new((a.len() - 1) as f64, (b.len() - 1) as f64) {
        Ok(dist) if f.is_finite() => 1.0 - dist.cdf(f),
        _ => f64::NAN,
    };
    TestResult { statistic: f, p_value: p }
}

/// Least-squares slope and intercept of `ys` on `xs`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let slope = stats::ols_slope(xs, ys);
    (slope, stats::mean(ys) - slope * stats::mean(xs))
}
