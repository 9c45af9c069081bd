//! Kolmogorov–Smirnov checks and the coordinate-limit (Poincaré–Maxwell–Borel)
//! and empirical-measure experiments built on them.
//!
//! Convergence in distribution is checked through the KS distance to the
//! limiting CDF. For laws on `ℝ` the KS distance dominates the Lévy–Prokhorov
//! distance, so a small KS distance certifies weak closeness.

use serde::{Deserialize, Serialize};

use super::parallel::{map_chunks, map_streams};
use crate::error::{Error, Result};
use crate::moments::{regularized_gamma_cdf, regularized_gamma_pq, Exponent};
use crate::samplers::{BallSampler, RandomStream};

/// Asymptotic 99% quantile of `√N · D_N` under the null.
pub const KS_NULL_99: f64 = 1.63;

/// Median of the Kolmogorov distribution.
pub const KS_NULL_MEDIAN: f64 = 0.8276;

/// Acceptance threshold `coefficient / √N + bias`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsThreshold {
    pub coefficient: f64,
    pub bias: f64,
}

impl KsThreshold {
    /// The plain null quantile `1.63/√N`.
    pub fn null() -> Self {
        KsThreshold { coefficient: KS_NULL_99, bias: 0.0 }
    }

    /// The null quantile plus a measured finite-size bias.
    pub fn with_bias(bias: f64) -> Self {
        KsThreshold { coefficient: KS_NULL_99, bias }
    }

    /// A fixed threshold independent of `N`.
    pub fn fixed(value: f64) -> Self {
        KsThreshold { coefficient: 0.0, bias: value }
    }

    pub fn value(&self, n_samples: usize) -> f64 {
        self.coefficient / (n_samples as f64).sqrt() + self.bias
    }
}

/// The finite-size bias implied by one calibration run: the excess of the
/// observed statistic over the typical (median) null value.
pub fn calibrate_bias(statistic: f64, n_samples: usize) -> f64 {
    (statistic - KS_NULL_MEDIAN / (n_samples as f64).sqrt()).max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub statistic: f64,
    pub n_samples: usize,
    pub reference: String,
    pub threshold: f64,
    pub pass: bool,
}

/// `sup_x |F_N(x) − F(x)|` for the empirical CDF of `samples`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// One-sample KS test of `samples` against `cdf`; needs at least 100 samples.
pub fn ks_distance<F: Fn(f64) -> f64>(
    samples: &[f64],
    cdf: F,
    reference: impl Into<String>,
    threshold: KsThreshold,
) -> Result<KsReport> {
    if samples.len() < 100 {
        return Err(Error::TooFewSamples { got: samples.len(), need: 100 });
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("KS samples contain NaN".into()));
    }
    let statistic = ks_statistic(samples, cdf);
    let limit = threshold.value(samples.len());
    Ok(KsReport {
        statistic,
        n_samples: samples.len(),
        reference: reference.into(),
        threshold: limit,
        pass: statistic <= limit,
    })
}

/// CDF of `N_q`: `½ + sign(x)/2 · P(1/q, |x|^q/q)`; `Unif[−1, 1]` for `q = ∞`.
pub fn q_gaussian_cdf(q: Exponent, x: f64) -> f64 {
    match q {
        Exponent::Infinity => ((x + 1.0) / 2.0).clamp(0.0, 1.0),
        Exponent::Finite(q) => {
            if x == 0.0 {
                return 0.5;
            }
            let (p, qq) = regularized_gamma_pq(1.0 / q, x.abs().powf(q) / q).unwrap_or((f64::NAN, f64::NAN));
            if x > 0.0 {
                0.5 + 0.5 * p
            } else {
                0.5 * qq
            }
        }
    }
}

/// CDF of `|ξ|^{1/n}` for `ξ ~ N_{p/n}`: `P[Γ(n/p, p/n) ≤ r^p]`, or `r^n` on
/// `[0, 1]` when `p = ∞`.
pub fn radial_limit_cdf(p: Exponent, n: usize, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    match p {
        Exponent::Infinity => r.min(1.0).powf(nf),
        Exponent::Finite(p) => regularized_gamma_cdf(nf / p, p / nf, r.powf(p)).unwrap_or(f64::NAN),
    }
}

/// Which coordinate limit a [`pmb_check`] tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PmbTheorem {
    /// `m → ∞`, `n` fixed: `m^{1/p} R_i ⇒ |ξ_i|^{1/n}` for the row norms.
    RowNorms,
    /// `m, n → ∞`: `m^{1/p} n^{1/q} X_{i,j} ⇒ η_{i,j}` i.i.d. `N_q`.
    Entries,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmbReport {
    pub theorem: PmbTheorem,
    pub reports: Vec<KsReport>,
    /// Largest absolute sample correlation between distinct `|scaled entries|`.
    pub max_abs_correlation: f64,
    pub correlation_threshold: f64,
    pub pass: bool,
}

/// Correlations above `CORRELATION_COEF / √N` fail the independence proxy.
pub const CORRELATION_COEF: f64 = 4.5;

fn max_abs_correlation(columns: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    let stats: Vec<(f64, f64)> = columns
        .iter()
        .map(|c| {
            let n = c.len() as f64;
            let mean = c.iter().sum::<f64>() / n;
            let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            (mean, sd)
        })
        .collect();
    for a in 0..columns.len() {
        for b in a + 1..columns.len() {
            let ((ma, sa), (mb, sb)) = (stats[a], stats[b]);
            if sa == 0.0 || sb == 0.0 {
                continue;
            }
            let n = columns[a].len() as f64;
            let cov = columns[a].iter().zip(&columns[b]).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n;
            worst = worst.max((cov / (sa * sb)).abs());
        }
    }
    worst
}

/// Coordinate-limit check on `samples` draws from `Unif(B_{p,q}^{m,n})`.
///
/// `RowNorms` tests `m^{1/p} R_i`, `i ≤ k`, against the law of `|ξ|^{1/n}`;
/// `Entries` tests `m^{1/p} n^{1/q} X_{i,j}`, `i ≤ k`, `j ≤ l`, against `N_q`.
/// Only the first `k` row directions are drawn, which is exact for the
/// marginal of those rows. Independence is probed through the correlations
/// of the absolute values of the tested quantities.
#[allow(clippy::too_many_arguments)]
pub fn pmb_check(
    theorem: PmbTheorem,
    p: Exponent,
    q: Exponent,
    m: usize,
    n: usize,
    k: usize,
    l: usize,
    samples: usize,
    master: &RandomStream,
    workers: usize,
    threshold: KsThreshold,
) -> Result<PmbReport> {
    if m == 0 || n == 0 {
        return Err(Error::DimensionMismatch("m and n must be >= 1".into()));
    }
    if k == 0 || k > m || l == 0 || l > n {
        return Err(Error::DimensionMismatch(format!("need 1 <= k <= m and 1 <= l <= n, got k={k}, l={l}")));
    }
    let row_scale = Exponent::divide((m as f64).ln(), p).exp();
    let entry_scale = row_scale * Exponent::divide((n as f64).ln(), q).exp();
    let width = match theorem {
        PmbTheorem::RowNorms => k,
        PmbTheorem::Entries => k * l,
    };
    let chunks = map_chunks(samples, workers, master, |len, stream| {
        let mut sampler = BallSampler::new(p, q, m, n);
        let mut out = Vec::with_capacity(len * width);
        for _ in 0..len {
            match theorem {
                PmbTheorem::RowNorms => {
                    sampler.draw_rows(0, stream);
                    out.extend(sampler.radial[..k].iter().map(|r| r * row_scale));
                }
                PmbTheorem::Entries => {
                    sampler.draw_rows(k, stream);
                    for i in 0..k {
                        out.extend(sampler.values[i * n..i * n + l].iter().map(|x| x * entry_scale));
                    }
                }
            }
        }
        out
    })?;
    let mut columns = vec![Vec::with_capacity(samples); width];
    for chunk in &chunks {
        for row in chunk.chunks_exact(width) {
            for (c, &v) in columns.iter_mut().zip(row) {
                c.push(v);
            }
        }
    }
    let mut reports = Vec::with_capacity(width);
    for column in &columns {
        let report = match theorem {
            PmbTheorem::RowNorms => ks_distance(
                column,
                |r| radial_limit_cdf(p, n, r),
                format!("|xi|^(1/{n}), xi ~ N_{}/{n}", p),
                threshold,
            )?,
            PmbTheorem::Entries => ks_distance(column, |x| q_gaussian_cdf(q, x), format!("N_{q}"), threshold)?,
        };
        reports.push(report);
    }
    let abs_columns: Vec<Vec<f64>> = columns.iter().map(|c| c.iter().map(|v| v.abs()).collect()).collect();
    let max_abs_correlation = max_abs_correlation(&abs_columns);
    let correlation_threshold = CORRELATION_COEF / (samples as f64).sqrt();
    let pass = reports.iter().all(|r| r.pass) && max_abs_correlation <= correlation_threshold;
    Ok(PmbReport { theorem, reports, max_abs_correlation, correlation_threshold, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasureReport {
    /// KS distance of each trial's empirical measure.
    pub statistics: Vec<f64>,
    pub median: f64,
    pub report: KsReport,
}

/// KS distance between the empirical measure `(1/m) Σ δ_{m^{1/p} R_i}` of a
/// single ball draw and the law of `|ξ|^{1/n}`, `ξ ~ N_{p/n}`, repeated over
/// `trials` independent draws. The reported statistic is the median over
/// trials and is judged against `threshold` with `N = m`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_measure_check(
    p: Exponent,
    q: Exponent,
    m: usize,
    n: usize,
    trials: usize,
    master: &RandomStream,
    workers: usize,
    threshold: KsThreshold,
) -> Result<EmpiricalMeasureReport> {
    if m < 1000 {
        return Err(Error::TooFewSamples { got: m, need: 1000 });
    }
    if n == 0 || trials == 0 {
        return Err(Error::DimensionMismatch("n and trials must be >= 1".into()));
    }
    let scale = Exponent::divide((m as f64).ln(), p).exp();
    let per_trial = map_streams(trials, workers, master, |_, stream| {
        let mut sampler = BallSampler::new(p, q, m, n);
        sampler.draw_rows(0, stream);
        let scaled: Vec<f64> = sampler.radial.iter().map(|r| r * scale).collect();
        ks_statistic(&scaled, |r| radial_limit_cdf(p, n, r))
    })?;
    let mut sorted = per_trial.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 { sorted[mid] } else { 0.5 * (sorted[mid - 1] + sorted[mid]) };
    let limit = threshold.value(m);
    let report = KsReport {
        statistic: median,
        n_samples: m,
        reference: format!("|xi|^(1/{n}), xi ~ N_{}/{n}", p),
        threshold: limit,
        pass: median <= limit,
    };
    Ok(EmpiricalMeasureReport { statistics: per_trial, median, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    #[test]
    fn statistic_of_known_samples() {
        let samples: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_statistic(&samples, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.005).abs() < 1e-15);
        let constant = vec![0.3; 200];
        let r = ks_distance(&constant, |x| x.clamp(0.0, 1.0), "U", KsThreshold::null()).unwrap();
        assert!(r.statistic >= 0.5 && !r.pass);
        assert!(ks_distance(&samples[..50], |x| x, "U", KsThreshold::null()).is_err());
    }

    #[test]
    fn null_calibration() {
        let mut failures = 0;
        for rep in 0..100 {
            let mut s = RandomStream::new(500, rep);
            let xs: Vec<f64> = (0..10_000).map(|_| s.standard_normal()).collect();
            let r = ks_distance(&xs, |x| q_gaussian_cdf(e(2.0), x), "N_2", KsThreshold::null()).unwrap();
            failures += usize::from(!r.pass);
        }
        assert!(failures <= 3, "{failures} null failures");
    }

    #[test]
    fn reference_cdfs() {
        assert_eq!(q_gaussian_cdf(e(1.3), 0.0), 0.5);
        assert!((q_gaussian_cdf(e(2.0), 1.0) - 0.841_344_746_068_542_9).abs() < 1e-14);
        // N_1 is Laplace
        assert!((q_gaussian_cdf(e(1.0), -2.0) - 0.5 * (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(q_gaussian_cdf(Exponent::Infinity, 0.5), 0.75);
        assert_eq!(radial_limit_cdf(Exponent::Infinity, 3, 0.5), 0.125);
        // n = 1, p = 2: |N(0,1)|
        assert!((radial_limit_cdf(e(2.0), 1, 1.0) - 0.682_689_492_137_085_9).abs() < 1e-14);
    }

    #[test]
    fn calibration_bias() {
        assert_eq!(calibrate_bias(0.001, 10_000), 0.0);
        assert!((calibrate_bias(0.02, 10_000) - (0.02 - 0.008276)).abs() < 1e-15);
        assert_eq!(KsThreshold::fixed(0.02).value(7), 0.02);
    }

    #[test]
    fn pmb_classical_case() {
        // p = q, m = 1: n^{1/q} X_j ⇒ N_q
        let r = pmb_check(
            PmbTheorem::Entries,
            e(2.0),
            e(2.0),
            1,
            2000,
            1,
            2,
            4000,
            &RandomStream::from_seed(3),
            1,
            KsThreshold::with_bias(0.01),
        )
        .unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.reports.len(), 2);
    }

    #[test]
    fn pmb_infinite_rows_are_exact() {
        let r = pmb_check(
            PmbTheorem::RowNorms,
            Exponent::Infinity,
            e(1.5),
            50,
            3,
            2,
            1,
            5000,
            &RandomStream::from_seed(4),
            2,
            KsThreshold::null(),
        )
        .unwrap();
        assert!(r.pass, "{r:?}");
        assert!(pmb_check(PmbTheorem::RowNorms, e(1.0), e(1.0), 3, 3, 4, 1, 200, &RandomStream::from_seed(4), 1, KsThreshold::null()).is_err());
    }

    #[test]
    fn empirical_measure_for_cube_rows() {
        let r = empirical_measure_check(
            Exponent::Infinity,
            e(2.0),
            2000,
            4,
            5,
            &RandomStream::from_seed(8),
            1,
            KsThreshold::null(),
        )
        .unwrap();
        assert_eq!(r.statistics.len(), 5);
        assert!(r.report.pass, "{r:?}");
        assert!(empirical_measure_check(e(1.0), e(1.0), 10, 2, 1, &RandomStream::from_seed(8), 1, KsThreshold::null()).is_err());
    }
}
