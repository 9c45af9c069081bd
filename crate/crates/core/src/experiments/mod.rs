//! Monte Carlo harness.
//!
//! Every randomized routine takes a master [`RandomStream`] and a worker
//! count. Work is cut into fixed chunks and chunk `i` draws from
//! `master.child(i)`, so results are bit-identical for any number of
//! workers.
//!
//! Intersection volumes use the identity
//! `V^{m,n}(t) = P[‖X‖_{p2,q2} ≤ (r_{p1,q1}^{m,n} / r_{p2,q2}^{m,n}) t]` for
//! `X ~ Unif(B_{p1,q1}^{m,n})`.

mod ks;
mod parallel;

pub use ks::{
    calibrate_bias, empirical_measure_check, ks_distance, ks_statistic, pmb_check, q_gaussian_cdf,
    radial_limit_cdf, EmpiricalMeasureReport, KsReport, KsThreshold, PmbReport, PmbTheorem, CORRELATION_COEF,
    KS_NULL_99, KS_NULL_MEDIAN,
};
pub use parallel::{map_chunks, map_streams, CHUNK_SIZE};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::{
    corollary_threshold, critical_volume_limit, scaled_moment, theta_norm_moments, Corollary, Estimate, Regime,
    RegimeParams, Size,
};
use crate::mixed_norm::{lp_norm_iter, mixed_norm_slice};
use crate::moments::{moment_m, Exponent};
use crate::samplers::{BallSampler, RandomStream};
use crate::volumes::normalized_radius_log;

/// An estimate with its standard error and provenance.
///
/// `wall_time` is informational and excluded from serialization so that
/// emitted results are byte-identical across runs and worker counts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub estimate: f64,
    pub stderr: f64,
    pub n_samples: usize,
    #[serde(with = "seed_string")]
    pub seed: u64,
    #[serde(skip)]
    pub wall_time: f64,
}

impl PartialEq for MonteCarloResult {
    fn eq(&self, other: &Self) -> bool {
        self.estimate == other.estimate
            && self.stderr == other.stderr
            && self.n_samples == other.n_samples
            && self.seed == other.seed
    }
}

impl MonteCarloResult {
    fn proportion(hits: usize, n_samples: usize, seed: u64, started: Instant) -> Self {
        let p = hits as f64 / n_samples as f64;
        MonteCarloResult {
            estimate: p,
            stderr: (p * (1.0 - p) / n_samples as f64).sqrt(),
            n_samples,
            seed,
            wall_time: started.elapsed().as_secs_f64(),
        }
    }
}

/// Seeds travel as unsigned decimal strings so JSON consumers never round them.
pub mod seed_string {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&seed.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

fn check_samples(samples: usize, need: usize) -> Result<()> {
    if samples < need {
        return Err(Error::TooFewSamples { got: samples, need });
    }
    Ok(())
}

fn check_dims(m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::DimensionMismatch("m and n must be >= 1".into()));
    }
    Ok(())
}

/// `‖X‖_{p2,q2}` of the sampler's current draw. When `q2 = q1` every row
/// direction has unit `q2`-norm, so only the row norms are needed.
fn draw_norm(sampler: &mut BallSampler, p2: Exponent, q2: Exponent, stream: &mut RandomStream) -> f64 {
    if q2 == sampler.q {
        sampler.draw_rows(0, stream);
        lp_norm_iter(sampler.radial.iter().copied(), p2)
    } else {
        sampler.draw(stream);
        mixed_norm_slice(&sampler.values, sampler.n, p2, q2)
    }
}

/// `‖X‖_{p2,q2}` for `samples` independent `X ~ Unif(B_{p1,q1}^{m,n})`, in
/// sample order.
#[allow(clippy::too_many_arguments)]
pub fn ball_norm_samples(
    p1: Exponent,
    q1: Exponent,
    p2: Exponent,
    q2: Exponent,
    m: usize,
    n: usize,
    samples: usize,
    master: &RandomStream,
    workers: usize,
) -> Result<Vec<f64>> {
    check_dims(m, n)?;
    let chunks = map_chunks(samples, workers, master, |len, stream| {
        let mut sampler = BallSampler::new(p1, q1, m, n);
        (0..len).map(|_| draw_norm(&mut sampler, p2, q2, stream)).collect::<Vec<_>>()
    })?;
    Ok(chunks.concat())
}

/// `ln(r_{p1,q1}^{m,n} / r_{p2,q2}^{m,n})`.
pub fn log_radius_ratio(p1: Exponent, q1: Exponent, p2: Exponent, q2: Exponent, m: usize, n: usize) -> Result<f64> {
    Ok(normalized_radius_log(m as u64, n as u64, p1, q1)? - normalized_radius_log(m as u64, n as u64, p2, q2)?)
}

/// Relative slack on the membership test, so that rounding in the norm never
/// excludes a boundary point of identical balls.
const MEMBERSHIP_SLACK: f64 = 1e-12;

/// Fraction of `sorted` norms inside the scaled ball of radius `ratio · t`.
fn fraction_inside(sorted: &[f64], ratio: f64, t: f64) -> usize {
    let cutoff = ratio * t * (1.0 + MEMBERSHIP_SLACK);
    sorted.partition_point(|&v| v <= cutoff)
}

/// `V^{m,n}(t)` by Monte Carlo with `samples` draws from the first ball.
#[allow(clippy::too_many_arguments)]
pub fn estimate_intersection_volume(
    p1: Exponent,
    q1: Exponent,
    p2: Exponent,
    q2: Exponent,
    m: usize,
    n: usize,
    t: f64,
    samples: usize,
    master: &RandomStream,
    workers: usize,
) -> Result<MonteCarloResult> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("t must be finite and > 0, got {t}")));
    }
    check_samples(samples, 1000)?;
    let started = Instant::now();
    let ratio = log_radius_ratio(p1, q1, p2, q2, m, n)?.exp();
    let norms = ball_norm_samples(p1, q1, p2, q2, m, n, samples, master, workers)?;
    let cutoff = ratio * t * (1.0 + MEMBERSHIP_SLACK);
    let hits = norms.iter().filter(|&&v| v <= cutoff).count();
    Ok(MonteCarloResult::proportion(hits, samples, master.seed(), started))
}

/// Largest `m·n` accepted by [`hit_or_miss_volume`].
pub const HIT_OR_MISS_MAX_DIM: usize = 20;

/// `vol(B_{p,q}^{m,n})` as `2^{mn}` times the fraction of uniform points of
/// `[−1, 1]^{mn}` inside the ball.
#[allow(clippy::too_many_arguments)]
pub fn hit_or_miss_volume(
    p: Exponent,
    q: Exponent,
    m: usize,
    n: usize,
    samples: usize,
    master: &RandomStream,
    workers: usize,
) -> Result<MonteCarloResult> {
    check_dims(m, n)?;
    if m * n > HIT_OR_MISS_MAX_DIM {
        return Err(Error::DimensionMismatch(format!(
            "hit-or-miss needs m*n <= {HIT_OR_MISS_MAX_DIM}, got {}",
            m * n
        )));
    }
    check_samples(samples, 1)?;
    let started = Instant::now();
    let counts = map_chunks(samples, workers, master, |len, stream| {
        let mut x = vec![0.0; m * n];
        let mut hits = 0usize;
        for _ in 0..len {
            x.iter_mut().for_each(|v| *v = stream.symmetric_unit());
            if mixed_norm_slice(&x, n, p, q) <= 1.0 {
                hits += 1;
            }
        }
        hits
    })?;
    let hits: usize = counts.iter().sum();
    let cube = 2f64.powi((m * n) as i32);
    let mut result = MonteCarloResult::proportion(hits, samples, master.seed(), started);
    result.estimate *= cube;
    result.stderr *= cube;
    Ok(result)
}

/// Fills in `E‖Θ_1‖_{q2}^{p2}` (and its square moment) when a regime needs
/// it and it is not exactly 1, from `samples` cone-measure draws.
pub fn fill_theta_moments(params: &mut RegimeParams, stream: &mut RandomStream, samples: usize) -> Result<()> {
    if params.fill_exact_theta() || params.e_theta.is_some() {
        return Ok(());
    }
    let n = params.n.finite().ok_or_else(|| Error::Hypothesis("n must be finite".into()))?;
    let p2 = params.p2.finite_value().ok_or_else(|| Error::Hypothesis("p2 must be finite".into()))?;
    let (e1, e2) = theta_norm_moments(params.q1, params.q2, p2, n as usize, stream, samples)?;
    params.e_theta = Some(e1);
    params.e_theta_sq = Some(e2);
    Ok(())
}

/// The affine map `stat = scale · (a · ‖X‖ − 1)` or `stat = scale · (1 − a‖X‖)`
/// that turns a norm into the regime's normalized statistic, with `ln a`.
#[derive(Clone, Copy, Debug)]
struct Normalization {
    ln_a: f64,
    scale: f64,
    /// `true` for `scale (1 − a‖X‖)`, `false` for `scale (a‖X‖ − 1)`.
    deficit: bool,
}

impl Normalization {
    fn apply(&self, norm: f64) -> f64 {
        let d = (self.ln_a + norm.ln()).exp_m1();
        if self.deficit {
            -self.scale * d
        } else {
            self.scale * d
        }
    }
}

fn normalization(regime: Regime, params: &RegimeParams) -> Result<Normalization> {
    params.check(regime)?;
    let m = params.m.finite().ok_or_else(|| Error::Hypothesis("statistics need a finite m".into()))?;
    let n = params.n.finite().ok_or_else(|| Error::Hypothesis("statistics need a finite n".into()))?;
    let (mf, nf) = (m as f64, n as f64);
    let p2 = params.p2.finite_value().ok_or_else(|| Error::Hypothesis("p2 must be finite".into()))?;
    let gap_p = params.p1.recip() - 1.0 / p2;
    let theta = || -> Result<Estimate> {
        if params.q1 == params.q2 || n == 1 {
            return Ok(Estimate::exact(1.0));
        }
        params
            .e_theta
            .ok_or_else(|| Error::MissingInput("E‖Θ_1‖_{q2}^{p2} (e_theta) is required".into()))
    };
    let with_moment = |ln_extra: f64| -> Result<f64> {
        Ok(gap_p * mf.ln() - (scaled_moment(params.p1, p2, n).ln() + ln_extra) / p2)
    };
    let (ln_a, scale, deficit) = match regime {
        Regime::ThmC => (with_moment(theta()?.value.ln())?, mf.sqrt(), false),
        Regime::ThmEA => (with_moment(theta()?.value.ln())?, (mf * nf).sqrt(), false),
        Regime::ThmEB => (with_moment(0.0)?, mf.sqrt() * nf, false),
        Regime::ThmEC => (-mf.ln() / p2 - scaled_moment(params.p1, p2, n).ln() / p2, mf.sqrt() * nf, false),
        Regime::ThmDA | Regime::PropSs => {
            let q2 = params.q2.finite_value().ok_or_else(|| Error::Hypothesis("q2 must be finite".into()))?;
            if regime == Regime::PropSs && m != 1 {
                return Err(Error::Hypothesis("the single-ball regime needs m = 1".into()));
            }
            let ln_m = moment_m(params.q1, params.q2)?.ln();
            let ln_a = gap_p * mf.ln() + (params.q1.recip() - 1.0 / q2) * nf.ln() - ln_m / q2;
            (ln_a, nf.sqrt(), false)
        }
        Regime::ThmDB => (gap_p * mf.ln(), mf * nf, true),
        Regime::ThmDC => (-mf.ln() / p2, mf * nf, true),
    };
    Ok(Normalization { ln_a, scale, deficit })
}

/// `samples` realizations of the normalized statistic of `regime` at the
/// finite `(m, n)` in `params`, using exact moments and the supplied
/// `E‖Θ_1‖` where the normalization needs it.
///
/// | regime | statistic |
/// |---|---|
/// | ThmC | `√m (m^{1/p1−1/p2} ‖X‖ / (M_{p1/n}^{p2/n} E‖Θ_1‖^{p2})^{1/p2} − 1)` |
/// | ThmDA | `√n (m^{1/p1−1/p2} n^{1/q1−1/q2} ‖X‖ / (M_{q1}^{q2})^{1/q2} − 1)` |
/// | ThmDB | `mn (1 − m^{1/p1−1/p2} ‖X‖)` |
/// | ThmDC | `mn (1 − m^{−1/p2} ‖X‖)` |
/// | ThmEA | `√(mn) (m^{1/p1−1/p2} ‖X‖ / (M_{p1/n}^{p2/n} E‖Θ_1‖^{p2})^{1/p2} − 1)` |
/// | ThmEB | `√m n (m^{1/p1−1/p2} ‖X‖ / (M_{p1/n}^{p2/n})^{1/p2} − 1)` |
/// | ThmEC | `√m n (‖X‖ / (m^{1/p2} (M_∞^{p2/n})^{1/p2}) − 1)` |
/// | PropSs | ThmDA with `m = 1` |
///
/// Here `‖X‖ = ‖X‖_{p2,q2}` with `X ~ Unif(B_{p1,q1}^{m,n})`.
pub fn clt_statistic_samples(
    regime: Regime,
    params: &RegimeParams,
    samples: usize,
    master: &RandomStream,
    workers: usize,
) -> Result<Vec<f64>> {
    let norm = normalization(regime, params)?;
    let (m, n) = (params.m.finite().unwrap_or(0) as usize, params.n.finite().unwrap_or(0) as usize);
    let norms = ball_norm_samples(params.p1, params.q1, params.p2, params.q2, m, n, samples, master, workers)?;
    Ok(norms.into_iter().map(|v| norm.apply(v)).collect())
}

/// Parameters of a threshold sweep. The dilation factors are given as
/// multiples of `1/A`, with `A` the threshold constant of `corollary`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub corollary: Corollary,
    pub p1: Exponent,
    pub q1: Exponent,
    pub p2: Exponent,
    pub q2: Exponent,
    pub m_schedule: Vec<usize>,
    pub n_schedule: Vec<usize>,
    pub t_factors: Vec<f64>,
    pub samples: usize,
    /// Cone-measure draws for `E‖Θ_1‖` when the finite-`n` constant needs it.
    pub theta_samples: usize,
    /// The limit `M` at the threshold for the `m, n → ∞` corollary with `q1 ≠ q2`.
    pub big_m: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub n: usize,
    pub t_factor: f64,
    pub t: f64,
    pub a: f64,
    pub a_stderr: f64,
    pub corollary: Corollary,
    /// The corollary's limit at this `t`, when it is determined.
    pub limit: Option<f64>,
    pub result: MonteCarloResult,
}

/// Estimates `V^{m,n}(t)` on the grid `m_schedule × n_schedule × t_factors`.
///
/// Each `(m, n)` cell uses one batch of draws for every `t`, so estimates
/// are exactly monotone in `t` within a cell. Cell `c` (in row-major order of
/// the schedules) draws from `master.child(c)`.
pub fn threshold_sweep(config: &SweepConfig, master: &RandomStream, workers: usize) -> Result<Vec<SweepRow>> {
    if config.m_schedule.is_empty() || config.n_schedule.is_empty() || config.t_factors.is_empty() {
        return Err(Error::Domain("sweep schedules must be nonempty".into()));
    }
    if config.t_factors.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
        return Err(Error::Domain("t factors must be finite and > 0".into()));
    }
    check_samples(config.samples, 1000)?;
    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &m in &config.m_schedule {
        for &n in &config.n_schedule {
            check_dims(m, n)?;
            let started = Instant::now();
            let cell_stream = master.child(cell);
            cell += 1;
            let mut params = RegimeParams::new(
                config.p1,
                config.q1,
                config.p2,
                config.q2,
                Size::Finite(m as u64),
                Size::Finite(n as u64),
            );
            if config.corollary == Corollary::Cor16 {
                let mut theta_stream = cell_stream.child(u64::MAX);
                fill_theta_moments(&mut params, &mut theta_stream, config.theta_samples)?;
            }
            let a = corollary_threshold(config.corollary, &params)?;
            let ratio = log_radius_ratio(config.p1, config.q1, config.p2, config.q2, m, n)?.exp();
            let mut norms = ball_norm_samples(
                config.p1,
                config.q1,
                config.p2,
                config.q2,
                m,
                n,
                config.samples,
                &cell_stream,
                workers,
            )?;
            norms.sort_by(f64::total_cmp);
            let wall = started.elapsed().as_secs_f64();
            for &factor in &config.t_factors {
                let t = factor / a.value;
                let hits = fraction_inside(&norms, ratio, t);
                let mut result = MonteCarloResult::proportion(hits, config.samples, master.seed(), started);
                result.wall_time = wall;
                let limit = critical_volume_limit(config.corollary, &params, t, config.big_m).ok();
                rows.push(SweepRow {
                    m,
                    n,
                    t_factor: factor,
                    t,
                    a: a.value,
                    a_stderr: a.stderr,
                    corollary: config.corollary,
                    limit,
                    result,
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::{limit_cdf, limit_law, threshold_a_lp, LimitLaw};
    use crate::volumes::mixed_ball_log_volume;

    fn e(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    const INF: Exponent = Exponent::Infinity;

    #[test]
    fn identical_balls_give_exactly_one() {
        for &(p, q) in &[(e(2.0), e(1.0)), (e(0.5), e(3.0)), (INF, e(2.0)), (e(1.5), INF)] {
            let r = estimate_intersection_volume(p, q, p, q, 3, 5, 1.0, 2000, &RandomStream::from_seed(1), 1).unwrap();
            assert_eq!(r.estimate, 1.0);
            assert_eq!(r.stderr, 0.0);
        }
    }

    #[test]
    fn small_t_gives_small_volume() {
        let r =
            estimate_intersection_volume(e(2.0), e(1.0), e(1.0), e(2.0), 2, 3, 0.2, 5000, &RandomStream::from_seed(2), 1)
                .unwrap();
        assert!(r.estimate < 0.01);
    }

    #[test]
    fn intersection_is_worker_independent() {
        let run = |w| {
            estimate_intersection_volume(e(3.0), e(1.0), e(2.0), e(2.0), 3, 16, 1.0, 5000, &RandomStream::new(9, 1), w)
                .unwrap()
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn hit_or_miss_agrees_with_formula() {
        let cube = hit_or_miss_volume(INF, INF, 2, 3, 1000, &RandomStream::from_seed(3), 1).unwrap();
        assert_eq!(cube.estimate, 64.0);
        for &(p, q, m, n) in &[(e(2.0), e(2.0), 1usize, 2usize), (e(1.0), e(2.0), 2, 2), (e(3.0), e(0.5), 2, 1)] {
            let r = hit_or_miss_volume(p, q, m, n, 400_000, &RandomStream::from_seed(4), 2).unwrap();
            let exact = mixed_ball_log_volume(m as u64, n as u64, p, q).unwrap().exp();
            assert!((r.estimate - exact).abs() < 4.0 * r.stderr, "{p},{q},{m},{n}: {} vs {exact}", r.estimate);
        }
        assert!(hit_or_miss_volume(e(1.0), e(1.0), 5, 5, 10, &RandomStream::from_seed(4), 1).is_err());
    }

    #[test]
    fn equal_balls_statistic_is_exact() {
        // (p1,q1) = (p2,q2): mn(1 − ‖X‖) = mn(1 − U^{1/(mn)})
        let params = RegimeParams::new(e(1.5), e(2.0), e(1.5), e(2.0), Size::Finite(3), Size::Finite(40));
        let stats = clt_statistic_samples(Regime::ThmDB, &params, 20_000, &RandomStream::from_seed(5), 1).unwrap();
        let mn = 120.0;
        let r = ks_distance(
            &stats,
            |x: f64| if x <= 0.0 { 0.0 } else { 1.0 - (1.0 - x / mn).max(0.0).powf(mn) },
            "mn(1-U^(1/mn))",
            KsThreshold::null(),
        )
        .unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn thm_dc_statistic_is_close_to_gamma() {
        let params = RegimeParams::new(INF, e(2.0), e(1.0), e(2.0), Size::Finite(2), Size::Finite(512));
        let law = limit_law(Regime::ThmDC, &params).unwrap();
        assert_eq!(law, LimitLaw::SumOfExponentials { m: 2 });
        let stats = clt_statistic_samples(Regime::ThmDC, &params, 5000, &RandomStream::from_seed(6), 1).unwrap();
        let r = ks_distance(&stats, |x| limit_cdf(law, x), law.to_string(), KsThreshold::with_bias(0.02)).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn thm_c_drift_shrinks() {
        let mut params = RegimeParams::new(e(2.0), e(2.0), e(1.0), e(2.0), Size::Finite(64), Size::Finite(3));
        params.fill_exact_theta();
        let mut means = Vec::new();
        for &m in &[64u64, 1024] {
            params.m = Size::Finite(m);
            let stats = clt_statistic_samples(Regime::ThmC, &params, 20_000, &RandomStream::from_seed(7), 1).unwrap();
            means.push(stats.iter().sum::<f64>() / stats.len() as f64);
        }
        assert!(means[1].abs() < 0.05, "{means:?}");
    }

    #[test]
    fn regime_guards() {
        let params = RegimeParams::new(e(2.0), e(2.0), e(2.0), e(2.0), Size::Finite(4), Size::Finite(8));
        assert!(clt_statistic_samples(Regime::ThmEB, &params, 100, &RandomStream::from_seed(1), 1).is_err());
        let params = RegimeParams::new(e(2.0), e(1.0), e(2.0), e(2.0), Size::Finite(4), Size::Finite(8));
        assert!(matches!(
            clt_statistic_samples(Regime::ThmEA, &params, 100, &RandomStream::from_seed(1), 1),
            Err(Error::MissingInput(_))
        ));
    }

    #[test]
    fn sweep_is_monotone_and_worker_independent() {
        let config = SweepConfig {
            corollary: Corollary::Cor17,
            p1: e(3.0),
            q1: e(1.0),
            p2: e(2.0),
            q2: e(2.0),
            m_schedule: vec![2],
            n_schedule: vec![32, 64],
            t_factors: vec![0.8, 0.9, 1.0, 1.1, 1.25],
            samples: 3000,
            theta_samples: 1000,
            big_m: None,
        };
        let one = threshold_sweep(&config, &RandomStream::from_seed(11), 1).unwrap();
        let two = threshold_sweep(&config, &RandomStream::from_seed(11), 2).unwrap();
        assert_eq!(one, two);
        assert_eq!(one.len(), 10);
        for cell in one.chunks(5) {
            assert!(cell.windows(2).all(|w| w[0].result.estimate <= w[1].result.estimate));
        }
        let a = threshold_a_lp(e(1.0), 2.0).unwrap();
        assert!((one[2].t * a - 1.0).abs() < 1e-15);
        assert_eq!(one[2].limit, Some(0.5));
    }

    #[test]
    fn result_serialization_hides_wall_time() {
        let r = MonteCarloResult { estimate: 0.5, stderr: 0.1, n_samples: 10, seed: u64::MAX, wall_time: 3.0 };
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, r#"{"estimate":0.5,"stderr":0.1,"n_samples":10,"seed":"18446744073709551615"}"#);
        let back: MonteCarloResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
