//! Threshold constants, limit-law variances, limit-law CDFs and the limiting
//! intersection volumes at the threshold.
//!
//! Notation: `X ~ Unif(B_{p1,q1}^{m,n})` and the statistic of interest is a
//! normalization of `‖X‖_{p2,q2}`. `Θ_1` is a cone-measure point of
//! `S_{q1}^{n−1}`; `E‖Θ_1‖_{q2}^{p2}` is exact when `p2 = q2` and is otherwise
//! carried as a Monte Carlo [`Estimate`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mixed_norm::lp_norm_iter;
use crate::moments::{
    cov_c, ln_gamma, ln_gamma_shift, ln_moment_m, moment_m, moment_m_finite, normal_cdf, regularized_gamma_cdf,
    regularized_gamma_sf, var_v, Exponent,
};
use crate::samplers::{cone_measure_into, RandomStream};
use crate::volumes::lp_ball_log_volume;

/// A value with its standard error; exact values carry `stderr = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0 }
    }
}

/// A dimension that is either fixed or sent to infinity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Size {
    Finite(u64),
    Unbounded,
}

impl Size {
    pub fn finite(self) -> Option<u64> {
        match self {
            Size::Finite(k) => Some(k),
            Size::Unbounded => None,
        }
    }
}

impl fmt::Display for Size {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Size::Finite(k) => write!(f, "{k}"),
            Size::Unbounded => f.write_str("inf"),
        }
    }
}

/// Weak limits appearing in the limit theorems.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum LimitLaw {
    /// `σ N` with `N` standard normal; `σ = 0` is the point mass at zero.
    ScaledGaussian { sigma: f64 },
    /// `E_1 + … + E_m` with i.i.d. standard exponentials, i.e. `Γ(m, 1)`.
    SumOfExponentials { m: u64 },
    /// `E + c (N_1² + … + N_dof²)` with everything independent.
    ExpPlusScaledChiSquare { dof: u64, c: f64 },
}

impl fmt::Display for LimitLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LimitLaw::ScaledGaussian { sigma } => write!(f, "{sigma}·N(0,1)"),
            LimitLaw::SumOfExponentials { m } => write!(f, "Gamma({m}, 1)"),
            LimitLaw::ExpPlusScaledChiSquare { dof, c } => write!(f, "Exp(1) + {c}·chi2({dof})"),
        }
    }
}

/// The weak-limit regimes for `‖X‖_{p2,q2}`.
///
/// `ThmC`: `m → ∞`, `n` fixed. `ThmD*`: `m` fixed, `n → ∞`. `ThmE*`: both
/// grow. `PropSs` is the single-`ℓ_p` case (`m = 1`) with `p = q1`, `q = q2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    ThmC,
    ThmDA,
    ThmDB,
    ThmDC,
    ThmEA,
    ThmEB,
    ThmEC,
    PropSs,
}

impl Regime {
    pub const ALL: [Regime; 8] = [
        Regime::ThmC,
        Regime::ThmDA,
        Regime::ThmDB,
        Regime::ThmDC,
        Regime::ThmEA,
        Regime::ThmEB,
        Regime::ThmEC,
        Regime::PropSs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Regime::ThmC => "thm-c",
            Regime::ThmDA => "thm-d-a",
            Regime::ThmDB => "thm-d-b",
            Regime::ThmDC => "thm-d-c",
            Regime::ThmEA => "thm-e-a",
            Regime::ThmEB => "thm-e-b",
            Regime::ThmEC => "thm-e-c",
            Regime::PropSs => "prop-ss",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Regime::ALL
            .into_iter()
            .find(|r| r.name() == lower)
            .ok_or_else(|| Error::Domain(format!("unknown regime '{s}'")))
    }
}

/// The threshold corollaries: `Cor16` (`m → ∞`), `Cor17` (`n → ∞`), `Cor18` (both).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Corollary {
    Cor16,
    Cor17,
    Cor18,
}

impl Corollary {
    pub fn name(self) -> &'static str {
        match self {
            Corollary::Cor16 => "cor-1-6",
            Corollary::Cor17 => "cor-1-7",
            Corollary::Cor18 => "cor-1-8",
        }
    }
}

impl fmt::Display for Corollary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Corollary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cor-1-6" => Ok(Corollary::Cor16),
            "cor-1-7" => Ok(Corollary::Cor17),
            "cor-1-8" => Ok(Corollary::Cor18),
            _ => Err(Error::Domain(format!("unknown corollary '{s}'"))),
        }
    }
}

/// Parameters shared by the limit theorems and corollaries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub p1: Exponent,
    pub q1: Exponent,
    pub p2: Exponent,
    pub q2: Exponent,
    pub m: Size,
    pub n: Size,
    /// `E‖Θ_1‖_{q2}^{p2}`.
    pub e_theta: Option<Estimate>,
    /// `E‖Θ_1‖_{q2}^{2 p2}`; only the variance of the `m → ∞` regime needs it.
    pub e_theta_sq: Option<Estimate>,
}

impl RegimeParams {
    pub fn new(p1: Exponent, q1: Exponent, p2: Exponent, q2: Exponent, m: Size, n: Size) -> Self {
        RegimeParams { p1, q1, p2, q2, m, n, e_theta: None, e_theta_sq: None }
    }

    pub fn with_theta(mut self, e_theta: Estimate, e_theta_sq: Option<Estimate>) -> Self {
        self.e_theta = Some(e_theta);
        self.e_theta_sq = e_theta_sq;
        self
    }

    /// Fills in `E‖Θ_1‖^{p2}` and `E‖Θ_1‖^{2p2}` when they are exactly 1
    /// (`q2 = q1` or `n = 1`). Returns whether it did.
    pub fn fill_exact_theta(&mut self) -> bool {
        if self.q1 == self.q2 || self.n == Size::Finite(1) {
            self.e_theta = Some(Estimate::exact(1.0));
            self.e_theta_sq = Some(Estimate::exact(1.0));
            true
        } else {
            false
        }
    }

    fn finite_p2(&self) -> Result<f64> {
        self.p2.finite_value().ok_or_else(|| hypothesis("p2 must be finite"))
    }

    fn finite_q2(&self) -> Result<f64> {
        self.q2.finite_value().ok_or_else(|| hypothesis("q2 must be finite"))
    }

    fn finite_m(&self) -> Result<u64> {
        self.m.finite().ok_or_else(|| hypothesis("m must be finite"))
    }

    fn finite_n(&self) -> Result<u64> {
        self.n.finite().ok_or_else(|| hypothesis("n must be finite"))
    }

    fn theta(&self) -> Result<Estimate> {
        if self.q1 == self.q2 || self.n == Size::Finite(1) {
            return Ok(Estimate::exact(1.0));
        }
        self.e_theta.ok_or_else(|| Error::MissingInput("E‖Θ_1‖_{q2}^{p2} (e_theta) is required".into()))
    }

    fn theta_sq(&self) -> Result<Estimate> {
        if self.q1 == self.q2 || self.n == Size::Finite(1) {
            return Ok(Estimate::exact(1.0));
        }
        self.e_theta_sq.ok_or_else(|| Error::MissingInput("E‖Θ_1‖_{q2}^{2p2} (e_theta_sq) is required".into()))
    }

    /// Checks the hypotheses of `regime`.
    pub fn check(&self, regime: Regime) -> Result<()> {
        let same = self.p1 == self.p2 && self.q1 == self.q2;
        match regime {
            Regime::PropSs => {
                self.finite_q2()?;
                return Ok(());
            }
            // (p1,q1) = (p2,q2) is admitted here: the statistic is mn(1 − U^{1/(mn)}).
            Regime::ThmDB => {}
            _ if same => return Err(hypothesis("(p1, q1) must differ from (p2, q2)")),
            _ => {}
        }
        self.finite_p2()?;
        match regime {
            Regime::ThmC => {
                self.finite_n()?;
            }
            Regime::ThmDA | Regime::ThmEA => {
                self.finite_q2()?;
                if self.q1 == self.q2 {
                    return Err(hypothesis("this regime needs q1 != q2"));
                }
            }
            Regime::ThmDB | Regime::ThmEB => {
                self.finite_q2()?;
                if self.q1 != self.q2 {
                    return Err(hypothesis("this regime needs q1 = q2"));
                }
                if self.p1.is_infinite() {
                    return Err(hypothesis("this regime needs p1 < inf"));
                }
                if regime == Regime::ThmEB && self.p1 == self.p2 {
                    return Err(hypothesis("q1 = q2 and p1 = p2 leaves no limit theorem here"));
                }
            }
            Regime::ThmDC | Regime::ThmEC => {
                self.finite_q2()?;
                if self.q1 != self.q2 {
                    return Err(hypothesis("this regime needs q1 = q2"));
                }
                if self.p1.is_finite() {
                    return Err(hypothesis("this regime needs p1 = inf"));
                }
            }
            Regime::PropSs => unreachable!(),
        }
        Ok(())
    }
}

fn hypothesis(msg: &str) -> Error {
    Error::Hypothesis(msg.to_string())
}

/// `A_{p,q} = Γ(1/p+1)/Γ(1/q+1) · e^{1/p − 1/q} · p^{1/p}/q^{1/q} · (M_p^q)^{−1/q}`.
pub fn threshold_a_lp(p: Exponent, q: f64) -> Result<f64> {
    if !(q > 0.0) || !q.is_finite() {
        return domain(format!("q must be finite and > 0, got {q}"));
    }
    let ln_a = ln_gamma(p.recip() + 1.0) - ln_gamma(1.0 / q + 1.0) + p.recip() - 1.0 / q + p.ln_self_root()
        - q.ln() / q
        - ln_moment_m(p, q) / q;
    Ok(ln_a.exp())
}

/// Monte Carlo estimates of `E‖Θ_1‖_{q2}^{p2}` and `E‖Θ_1‖_{q2}^{2 p2}` for
/// `Θ_1` on the cone measure of `S_{q1}^{n−1}`, from `samples` draws.
/// Both are exactly 1 when `q2 = q1` or `n = 1`, and known in closed form
/// when `p2 = q2`; only the remaining cases are sampled.
pub fn theta_norm_moments(
    q1: Exponent,
    q2: Exponent,
    p2: f64,
    n: usize,
    stream: &mut RandomStream,
    samples: usize,
) -> Result<(Estimate, Estimate)> {
    if n == 0 {
        return Err(Error::DimensionMismatch("n must be >= 1".into()));
    }
    if !(p2 > 0.0) || !p2.is_finite() {
        return domain(format!("p2 must be finite and > 0, got {p2}"));
    }
    if q1 == q2 || n == 1 {
        return Ok((Estimate::exact(1.0), Estimate::exact(1.0)));
    }
    if let Some((e1, e2)) = exact_theta_moments(q1, q2, p2, n) {
        return Ok((Estimate::exact(e1), Estimate::exact(e2)));
    }
    sampled_theta_moments(q1, q2, p2, n, stream, samples)
}

/// `E‖Θ_1‖_{q2}^{q2}` and `E‖Θ_1‖_{q2}^{2q2}` in closed form, available when
/// `p2 = q2 < ∞`. With `G` having i.i.d. `N_{q1}` coordinates, `‖G‖_{q1}` is
/// independent of `Θ = G/‖G‖_{q1}`, so `E‖Θ‖^s = E‖G‖_{q2}^s / E‖G‖_{q1}^s`
/// and `‖G‖_{q2}^{q2}` is a sum of i.i.d. terms.
fn exact_theta_moments(q1: Exponent, q2: Exponent, p2: f64, n: usize) -> Option<(f64, f64)> {
    let q = q2.finite_value()?;
    if p2 != q {
        return None;
    }
    let nf = n as f64;
    // E|g|^s and E‖G‖_{q1}^s, without the common factor q1^{s/q1}.
    let coord = |s: f64| match q1 {
        Exponent::Infinity => 1.0 / (s + 1.0),
        Exponent::Finite(r) => (ln_gamma((s + 1.0) / r) - ln_gamma(1.0 / r)).exp(),
    };
    let radius = |s: f64| match q1 {
        Exponent::Infinity => nf / (nf + s),
        Exponent::Finite(r) => ln_gamma_shift(nf / r - 1.0, s / r).exp(),
    };
    let first = nf * coord(q) / radius(q);
    let second = (nf * coord(2.0 * q) + nf * (nf - 1.0) * coord(q).powi(2)) / radius(2.0 * q);
    Some((first, second))
}

fn sampled_theta_moments(
    q1: Exponent,
    q2: Exponent,
    p2: f64,
    n: usize,
    stream: &mut RandomStream,
    samples: usize,
) -> Result<(Estimate, Estimate)> {
    if samples < 1000 {
        return Err(Error::TooFewSamples { got: samples, need: 1000 });
    }
    let mut theta = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
    for _ in 0..samples {
        cone_measure_into(q1, &mut theta, &mut scratch, stream);
        let v = lp_norm_iter(theta.iter().copied(), q2).powf(p2);
        s1 += v;
        s2 += v * v;
        s4 += v * v * v * v;
    }
    let k = samples as f64;
    let (mean1, mean2) = (s1 / k, s2 / k);
    let var1 = (s2 / k - mean1 * mean1).max(0.0) * k / (k - 1.0);
    let var2 = (s4 / k - mean2 * mean2).max(0.0) * k / (k - 1.0);
    Ok((
        Estimate { value: mean1, stderr: (var1 / k).sqrt() },
        Estimate { value: mean2, stderr: (var2 / k).sqrt() },
    ))
}

/// Monte Carlo estimate of `E‖Θ_1‖_{q2}^{p2}`; see [`theta_norm_moments`].
pub fn expected_theta_norm(
    q1: Exponent,
    q2: Exponent,
    p2: f64,
    n: usize,
    stream: &mut RandomStream,
    samples: usize,
) -> Result<Estimate> {
    Ok(theta_norm_moments(q1, q2, p2, n, stream, samples)?.0)
}

/// The finite-`n` threshold constant of the `m → ∞` regime,
///
/// ```text
/// A = (V_{q1}^n Γ(n/p1+1) / (V_{q2}^n Γ(n/p2+1)))^{1/n} (e/n)^{1/p1−1/p2}
///     · p1^{1/p1} / p2^{1/p2} · (M_{p1/n}^{p2/n} E‖Θ_1‖_{q2}^{p2})^{−1/p2},
/// ```
///
/// with the standard error of `E‖Θ_1‖` carried through by the delta method.
pub fn threshold_a_finite_n(params: &RegimeParams) -> Result<Estimate> {
    let p2 = params.finite_p2()?;
    let n = params.finite_n()?;
    if params.p1 == params.p2 && params.q1 == params.q2 {
        return Err(hypothesis("(p1, q1) must differ from (p2, q2)"));
    }
    let theta = params.theta()?;
    let nf = n as f64;
    let ln_gamma_term = |p: Exponent| match p {
        Exponent::Infinity => 0.0,
        Exponent::Finite(p) => ln_gamma(nf / p + 1.0),
    };
    let ln_vol = (lp_ball_log_volume(n, params.q1)?.0 + ln_gamma_term(params.p1)
        - lp_ball_log_volume(n, params.q2)?.0
        - ln_gamma_term(params.p2))
        / nf;
    let exponent_gap = params.p1.recip() - 1.0 / p2;
    let ln_moment = ln_moment_m(params.p1.scaled_down(nf), p2 / nf);
    let ln_a = ln_vol + exponent_gap * (1.0 - nf.ln()) + params.p1.ln_self_root() - p2.ln() / p2
        - (ln_moment + theta.value.ln()) / p2;
    let value = ln_a.exp();
    Ok(Estimate { value, stderr: value * theta.stderr / (p2 * theta.value) })
}

/// `V_q^q/q² − 2 C_q^{q,q'}/(q q' M_q^{q'}) + V_q^{q'}/(q' M_q^{q'})²`, the
/// common bracket of the `n → ∞` Gaussian variances; terms divided by an
/// infinite `q` vanish.
fn gaussian_bracket(q: Exponent, q_prime: f64) -> Result<f64> {
    let qp = Exponent::Finite(q_prime);
    let m = moment_m(q, qp)?;
    let mut value = var_v(q, qp)? / (q_prime * m).powi(2);
    if let Exponent::Finite(qf) = q {
        value += var_v(q, q)? / (qf * qf) - 2.0 * cov_c(q, q, qp)? / (qf * q_prime * m);
    }
    Ok(value)
}

/// Variance of the Gaussian limit in `regime`.
pub fn sigma2_regime(regime: Regime, params: &RegimeParams) -> Result<f64> {
    params.check(regime)?;
    let value = match regime {
        Regime::ThmC => {
            let p2 = params.finite_p2()?;
            let nf = params.finite_n()? as f64;
            let (e1, e2) = (params.theta()?.value, params.theta_sq()?.value);
            let base = params.p1.scaled_down(nf);
            let (a, b) = (Exponent::Finite(p2 / nf), Exponent::Finite(2.0 * p2 / nf));
            let m_a = moment_m(base, a)?;
            let mut value = -1.0 / (p2 * p2) + moment_m(base, b)? * e2 / (p2 * m_a * e1).powi(2);
            if let Exponent::Finite(p1) = params.p1 {
                let c = cov_c(base, base, a)?;
                value += 1.0 / (nf * p1) - 2.0 * c / (p1 * p2 * m_a);
            }
            value
        }
        Regime::ThmDA => gaussian_bracket(params.q1, params.finite_q2()?)? / params.finite_m()? as f64,
        Regime::ThmEA | Regime::PropSs => gaussian_bracket(params.q1, params.finite_q2()?)?,
        Regime::ThmEB => {
            let (p1, p2) = (params.p1.value(), params.finite_p2()?);
            (p2 - p1).powi(2) / (2.0 * p1 * p1)
        }
        Regime::ThmEC => 1.0,
        Regime::ThmDB | Regime::ThmDC => {
            return Err(hypothesis("this regime has a non-Gaussian limit"));
        }
    };
    // Cancellation can leave a tiny negative value in degenerate cases.
    Ok(value.max(0.0))
}

/// The weak limit of the normalized statistic in `regime`.
pub fn limit_law(regime: Regime, params: &RegimeParams) -> Result<LimitLaw> {
    params.check(regime)?;
    match regime {
        Regime::ThmDB => {
            let m = params.finite_m()?;
            let (p1, p2) = (params.p1.value(), params.finite_p2()?);
            Ok(LimitLaw::ExpPlusScaledChiSquare { dof: m - 1, c: (p1 - p2) / (2.0 * p1) })
        }
        Regime::ThmDC => Ok(LimitLaw::SumOfExponentials { m: params.finite_m()? }),
        _ => Ok(LimitLaw::ScaledGaussian { sigma: sigma2_regime(regime, params)?.sqrt() }),
    }
}

/// CDF of a limit law.
pub fn limit_cdf(law: LimitLaw, x: f64) -> f64 {
    match law {
        LimitLaw::ScaledGaussian { sigma } => {
            if sigma > 0.0 {
                normal_cdf(x / sigma)
            } else if x >= 0.0 {
                1.0
            } else {
                0.0
            }
        }
        LimitLaw::SumOfExponentials { m } => {
            if x <= 0.0 {
                0.0
            } else {
                regularized_gamma_cdf(m as f64, 1.0, x).unwrap_or(f64::NAN)
            }
        }
        LimitLaw::ExpPlusScaledChiSquare { dof, c } => exp_plus_chi2_cdf(dof, c, x),
    }
}

fn exp_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-x).exp_m1()
    }
}

/// CDF of `E + c·χ²_dof` in closed form for `c < 1/2`; by quadrature otherwise.
///
/// With `S ~ Γ(k, 2)`, `k = dof/2`, and `G` the CDF of `Γ(k, 2/(1−2c))`:
/// for `c > 0`, `F(x) = F_S(x/c) − e^{−x}(1−2c)^{−k} G(x/c)`; for `c < 0`,
/// `F(x) = 1 − e^{−x}(1−2c)^{−k}` when `x ≥ 0` and
/// `F(x) = (1 − F_S(x/c)) − e^{−x}(1−2c)^{−k}(1 − G(x/c))` when `x < 0`.
pub fn exp_plus_chi2_cdf(dof: u64, c: f64, x: f64) -> f64 {
    if dof == 0 || c == 0.0 {
        return exp_cdf(x);
    }
    if c >= 0.5 {
        return exp_plus_chi2_cdf_quadrature(dof, c, x);
    }
    let k = dof as f64 / 2.0;
    let ln_factor = -x - k * (-2.0 * c).ln_1p();
    let tilted_scale = 2.0 / (1.0 - 2.0 * c);
    let value = if c > 0.0 {
        if x <= 0.0 {
            return 0.0;
        }
        let s = x / c;
        let f_s = regularized_gamma_cdf(k, 2.0, s).unwrap_or(f64::NAN);
        let g = regularized_gamma_cdf(k, tilted_scale, s).unwrap_or(f64::NAN);
        f_s - ln_factor.exp() * g
    } else if x >= 0.0 {
        -ln_factor.exp_m1()
    } else {
        let s = x / c;
        let sf_s = regularized_gamma_sf(k, 2.0, s).unwrap_or(f64::NAN);
        let sf_g = regularized_gamma_sf(k, tilted_scale, s).unwrap_or(f64::NAN);
        sf_s - ln_factor.exp() * sf_g
    };
    value.clamp(0.0, 1.0)
}

/// `P[E + c S ≤ x] = ∫_0^∞ e^{−y} P[c S ≤ x − y] dy` by adaptive Gauss–Kronrod.
pub fn exp_plus_chi2_cdf_quadrature(dof: u64, c: f64, x: f64) -> f64 {
    if dof == 0 || c == 0.0 {
        return exp_cdf(x);
    }
    let k = dof as f64 / 2.0;
    // P[cS ≤ z] as a function of z
    let law_cs = |z: f64| -> f64 {
        if c > 0.0 {
            if z <= 0.0 {
                0.0
            } else {
                regularized_gamma_cdf(k, 2.0, z / c).unwrap_or(f64::NAN)
            }
        } else if z >= 0.0 {
            1.0
        } else {
            regularized_gamma_sf(k, 2.0, z / c).unwrap_or(f64::NAN)
        }
    };
    let integrand = |y: f64| (-y).exp() * law_cs(x - y);
    let value = if c > 0.0 {
        if x <= 0.0 {
            return 0.0;
        }
        integrate(&integrand, 0.0, x, 1e-13)
    } else {
        let split = x.max(0.0);
        // the integrand equals e^{−y} on [0, x] when x > 0
        let head = exp_cdf(split);
        head + integrate(&integrand, split, split + 60.0, 1e-13)
    };
    value.clamp(0.0, 1.0)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel and its embedded 7-point Gauss estimate.
fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let centre = f(mid);
    let mut kronrod = GK_WEIGHTS[7] * centre;
    let mut gauss = GAUSS_WEIGHTS[3] * centre;
    for j in 0..7 {
        let dx = half * GK_NODES[j];
        let pair = f(mid - dx) + f(mid + dx);
        kronrod += GK_WEIGHTS[j] * pair;
        if j % 2 == 1 {
            gauss += GAUSS_WEIGHTS[j / 2] * pair;
        }
    }
    (kronrod * half, gauss * half)
}

fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (k, g) = gauss_kronrod(f, a, b);
        if (k - g).abs() <= tol || depth == 0 {
            return k;
        }
        let mid = 0.5 * (a + b);
        recurse(f, a, mid, 0.5 * tol, depth - 1) + recurse(f, mid, b, 0.5 * tol, depth - 1)
    }
    recurse(f, a, b, tol, 40)
}

/// `|tA − 1|` below this counts as sitting on the threshold.
pub const CRITICAL_TOLERANCE: f64 = 1e-9;

/// The threshold constant governing `corollary`.
pub fn corollary_threshold(corollary: Corollary, params: &RegimeParams) -> Result<Estimate> {
    match corollary {
        Corollary::Cor16 => threshold_a_finite_n(params),
        Corollary::Cor17 | Corollary::Cor18 => {
            let q2 = params.finite_q2()?;
            Ok(Estimate::exact(threshold_a_lp(params.q1, q2)?))
        }
    }
}

/// `lim V^{m,n}(t)` for the given corollary.
///
/// Off the threshold the limit is 0 or 1. On it (`|tA − 1| ≤ 1e-9`):
/// `Cor16` gives ½; `Cor17` gives ½ for `q1 ≠ q2`, 1 for `q1 = q2, p1 < ∞,
/// m = 1`, 0 for `q1 = q2, p1 = ∞`, and for `m ≥ 2` the gamma-measure
/// expression
/// `Γ(k, 2 max{1, p1/p2})((0, x*]) + Γ(k, 2 min{1, p1/p2})((x*, ∞))`,
/// `k = (m−1)/2`, `x* = p1 (m−1) ln(p1/p2)/(p1 − p2)`; `Cor18` gives
/// `Φ(M/σ)` for `q1 ≠ q2` (with the caller-supplied `M`) and 0 for `q1 = q2`.
pub fn critical_volume_limit(
    corollary: Corollary,
    params: &RegimeParams,
    t: f64,
    big_m: Option<f64>,
) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("t must be finite and > 0, got {t}"));
    }
    if params.p1 == params.p2 && params.q1 == params.q2 {
        return Err(hypothesis("(p1, q1) must differ from (p2, q2)"));
    }
    match corollary {
        Corollary::Cor16 => {
            params.finite_p2()?;
        }
        Corollary::Cor17 | Corollary::Cor18 => {
            params.finite_p2()?;
            params.finite_q2()?;
        }
    }
    let a = corollary_threshold(corollary, params)?.value;
    let ta = t * a;
    if ta < 1.0 - CRITICAL_TOLERANCE {
        return Ok(0.0);
    }
    if ta > 1.0 + CRITICAL_TOLERANCE {
        return Ok(1.0);
    }
    match corollary {
        Corollary::Cor16 => Ok(0.5),
        Corollary::Cor17 => {
            if params.q1 != params.q2 {
                return Ok(0.5);
            }
            let p1 = match params.p1 {
                Exponent::Infinity => return Ok(0.0),
                Exponent::Finite(p1) => p1,
            };
            let m = params.finite_m()?;
            if m == 1 {
                return Ok(1.0);
            }
            let p2 = params.finite_p2()?;
            let k = (m - 1) as f64 / 2.0;
            let ratio = p1 / p2;
            let crossover = p1 * (m - 1) as f64 * ratio.ln() / (p1 - p2);
            let head = regularized_gamma_cdf(k, 2.0 * ratio.max(1.0), crossover)?;
            let tail = regularized_gamma_sf(k, 2.0 * ratio.min(1.0), crossover)?;
            Ok(head + tail)
        }
        Corollary::Cor18 => {
            if params.q1 == params.q2 {
                return Ok(0.0);
            }
            let big_m = big_m.ok_or_else(|| {
                Error::MissingInput("the critical case with q1 != q2 needs the limit M".into())
            })?;
            if big_m.is_nan() {
                return domain("M must not be NaN");
            }
            let sigma = sigma2_regime(Regime::ThmEA, params)?.sqrt();
            Ok(if big_m == f64::INFINITY {
                1.0
            } else if big_m == f64::NEG_INFINITY {
                0.0
            } else {
                normal_cdf(big_m / sigma)
            })
        }
    }
}

/// `M_{p1/n}^{p2/n}` for a finite `n`, used by the statistic normalizations.
pub(crate) fn scaled_moment(p1: Exponent, p2: f64, n: u64) -> f64 {
    let nf = n as f64;
    moment_m_finite(p1.scaled_down(nf), p2 / nf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    const INF: Exponent = Exponent::Infinity;

    fn params(p1: Exponent, q1: Exponent, p2: Exponent, q2: Exponent, m: Size, n: Size) -> RegimeParams {
        RegimeParams::new(p1, q1, p2, q2, m, n)
    }

    #[test]
    fn threshold_a_lp_values() {
        for &p in &[0.3, 1.0, 2.0, 7.5] {
            assert!((threshold_a_lp(e(p), p).unwrap() - 1.0).abs() < 1e-13);
        }
        // independent high-precision evaluation
        assert!((threshold_a_lp(INF, 2.0).unwrap() - 0.838_211_177_622_817_2).abs() < 1e-14);
        assert!(threshold_a_lp(e(1.0), f64::INFINITY).is_err());
    }

    #[test]
    fn finite_n_threshold_at_n_one_is_the_lp_constant() {
        let mut par = params(e(1.5), e(3.0), e(2.5), e(0.7), Size::Unbounded, Size::Finite(1));
        assert!(par.fill_exact_theta());
        let a = threshold_a_finite_n(&par).unwrap();
        assert_eq!(a.stderr, 0.0);
        assert!((a.value - threshold_a_lp(e(1.5), 2.5).unwrap()).abs() < 1e-13);
        let par = params(e(1.5), e(3.0), e(2.5), e(0.7), Size::Unbounded, Size::Finite(4));
        assert!(matches!(threshold_a_finite_n(&par), Err(Error::MissingInput(_))));
    }

    #[test]
    fn theta_moments_shortcuts_and_limit() {
        let mut s = RandomStream::from_seed(1);
        assert_eq!(expected_theta_norm(e(2.0), e(2.0), 3.0, 50, &mut s, 10).unwrap(), Estimate::exact(1.0));
        assert_eq!(expected_theta_norm(e(2.0), e(1.0), 3.0, 1, &mut s, 10).unwrap(), Estimate::exact(1.0));
        assert!(expected_theta_norm(e(2.0), e(1.0), 3.0, 5, &mut s, 10).is_err());
        // n^{p2(1/q1 − 1/q2)} E‖Θ‖_{q2}^{p2} → (M_{q1}^{q2})^{p2/q2}
        let target = moment_m(e(2.0), e(1.0)).unwrap().powi(2);
        let mut last_gap = f64::INFINITY;
        for &n in &[50usize, 400] {
            let est = expected_theta_norm(e(2.0), e(1.0), 2.0, n, &mut s, 20_000).unwrap();
            let scale = (n as f64).powf(2.0 * (0.5 - 1.0));
            let gap = (est.value * scale - target).abs();
            assert!(gap < 0.02, "n={n}: gap {gap}");
            assert!(gap < last_gap + 4.0 * est.stderr * scale);
            last_gap = gap;
        }
    }

    #[test]
    fn theta_closed_form_matches_simplex_and_sampling() {
        // Θ on the ℓ_1 sphere in R^2 is (±U, ±(1−U)) with U uniform.
        let (e1, e2) = exact_theta_moments(e(1.0), e(2.0), 2.0, 2).unwrap();
        assert!((e1 - 2.0 / 3.0).abs() < 1e-14);
        assert!((e2 - 7.0 / 15.0).abs() < 1e-14);
        assert!(exact_theta_moments(e(1.0), e(2.0), 1.0, 2).is_none());
        assert!(exact_theta_moments(e(1.0), INF, 2.0, 2).is_none());
        for (q1, q2, n) in [(e(1.0), 2.0, 3), (e(2.0), 1.0, 7), (INF, 3.0, 4), (e(0.7), 1.5, 40), (e(3.0), 3.5, 400)] {
            let (e1, e2) = exact_theta_moments(q1, e(q2), q2, n).unwrap();
            let mut s = RandomStream::from_seed(11);
            let (m1, m2) = sampled_theta_moments(q1, e(q2), q2, n, &mut s, 40_000).unwrap();
            assert!((e1 - m1.value).abs() < 4.5 * m1.stderr, "{q1} {q2} {n}: {e1} vs {m1:?}");
            assert!((e2 - m2.value).abs() < 4.5 * m2.stderr, "{q1} {q2} {n}: {e2} vs {m2:?}");
            let via_public = theta_norm_moments(q1, e(q2), q2, n, &mut s, 0).unwrap();
            assert_eq!(via_public, (Estimate::exact(e1), Estimate::exact(e2)));
        }
    }

    #[test]
    fn sigma2_conventions_and_relations() {
        let unb = Size::Unbounded;
        for &q2 in &[0.5, 1.0, 3.0] {
            let par = params(e(2.0), INF, e(1.0), e(q2), Size::Finite(3), unb);
            let m = moment_m(INF, e(q2)).unwrap();
            let want = var_v(INF, e(q2)).unwrap() / (3.0 * q2 * q2 * m * m);
            assert!((sigma2_regime(Regime::ThmDA, &par).unwrap() - want).abs() < 1e-15);
            let ea = sigma2_regime(Regime::ThmEA, &par).unwrap();
            assert!((ea - 3.0 * sigma2_regime(Regime::ThmDA, &par).unwrap()).abs() < 1e-15);
        }
        for &p in &[0.5, 1.0, 2.0, 4.0] {
            let par = params(e(1.0), e(p), e(1.0), e(p), Size::Finite(1), unb);
            assert!(sigma2_regime(Regime::PropSs, &par).unwrap() < 1e-14);
            for &q in &[0.5, 1.0, 2.0, 4.0] {
                if q != p {
                    let par = params(e(1.0), e(p), e(1.0), e(q), Size::Finite(1), unb);
                    assert!(sigma2_regime(Regime::PropSs, &par).unwrap() > 1e-6, "p={p} q={q}");
                }
            }
        }
    }

    #[test]
    fn sigma2_thm_c_with_equal_q_is_positive() {
        for &(p1, p2, n) in &[(2.0, 1.0, 1u64), (1.0, 3.0, 5), (0.5, 2.0, 20)] {
            let mut par = params(e(p1), e(2.0), e(p2), e(2.0), Size::Unbounded, Size::Finite(n));
            par.fill_exact_theta();
            let s = sigma2_regime(Regime::ThmC, &par).unwrap();
            assert!(s > 0.0, "{p1} {p2} {n}: {s}");
        }
        // p1 = ∞ leaves (1/p2²)(M^{2β}/(M^β)² − 1) = β²/(p2²(2β+1)), β = p2/n
        let par = params(INF, e(2.0), e(3.0), e(2.0), Size::Unbounded, Size::Finite(6));
        let beta: f64 = 0.5;
        let want = beta * beta / (9.0 * (2.0 * beta + 1.0));
        assert!((sigma2_regime(Regime::ThmC, &par).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn limit_laws() {
        let unb = Size::Unbounded;
        let par = params(INF, e(2.0), e(1.0), e(2.0), Size::Finite(3), unb);
        assert_eq!(limit_law(Regime::ThmDC, &par).unwrap(), LimitLaw::SumOfExponentials { m: 3 });
        let par = params(e(2.0), e(1.0), e(1.0), e(1.0), Size::Finite(1), unb);
        assert_eq!(limit_law(Regime::ThmDB, &par).unwrap(), LimitLaw::ExpPlusScaledChiSquare { dof: 0, c: 0.25 });
        let par = params(e(1.0), e(2.0), e(3.0), e(2.0), unb, unb);
        let LimitLaw::ScaledGaussian { sigma } = limit_law(Regime::ThmEB, &par).unwrap() else { panic!() };
        assert!((sigma - 2.0 / 2f64.sqrt()).abs() < 1e-15);
        let par = params(e(3.0), e(2.0), e(3.0), e(2.0), unb, unb);
        assert!(matches!(limit_law(Regime::ThmEB, &par), Err(Error::Hypothesis(_))));
        let par = params(e(3.0), e(2.0), e(3.0), e(2.0), Size::Finite(4), unb);
        assert!(limit_law(Regime::ThmDB, &par).is_ok());
        assert!(limit_law(Regime::ThmDA, &par).is_err());
        let par = params(e(3.0), e(2.0), e(1.0), INF, Size::Finite(4), unb);
        assert!(limit_law(Regime::ThmDA, &par).is_err());
    }

    #[test]
    fn basic_cdf_values() {
        assert_eq!(limit_cdf(LimitLaw::ScaledGaussian { sigma: 2.0 }, 0.0), 0.5);
        assert_eq!(limit_cdf(LimitLaw::ScaledGaussian { sigma: 0.0 }, -1e-300), 0.0);
        assert_eq!(limit_cdf(LimitLaw::ScaledGaussian { sigma: 0.0 }, 0.0), 1.0);
        let med = limit_cdf(LimitLaw::SumOfExponentials { m: 1 }, 2f64.ln());
        assert!((med - 0.5).abs() < 1e-15);
        let exp = limit_cdf(LimitLaw::ExpPlusScaledChiSquare { dof: 0, c: 0.3 }, 1.0);
        assert!((exp - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for &dof in &[1u64, 2, 3, 5, 12] {
            for &c in &[-2.0, -0.5, -0.1, 0.05, 0.25, 0.4, 0.49] {
                for &x in &[-6.0, -1.0, -0.1, 0.0, 0.1, 0.7, 2.0, 5.0, 20.0] {
                    let closed = exp_plus_chi2_cdf(dof, c, x);
                    let quad = exp_plus_chi2_cdf_quadrature(dof, c, x);
                    assert!((closed - quad).abs() < 1e-8, "dof={dof} c={c} x={x}: {closed} vs {quad}");
                }
            }
        }
    }

    #[test]
    fn cdfs_are_monotone_with_limits() {
        let laws = [
            LimitLaw::ScaledGaussian { sigma: 0.7 },
            LimitLaw::SumOfExponentials { m: 4 },
            LimitLaw::ExpPlusScaledChiSquare { dof: 3, c: 0.25 },
            LimitLaw::ExpPlusScaledChiSquare { dof: 2, c: -0.5 },
            LimitLaw::ExpPlusScaledChiSquare { dof: 2, c: 0.75 },
        ];
        for law in laws {
            let mut prev = 0.0;
            for i in 0..=800 {
                let x = -40.0 + 0.1 * i as f64;
                let f = limit_cdf(law, x);
                assert!((0.0..=1.0).contains(&f));
                assert!(f >= prev - 1e-12, "{law}: {x}");
                prev = f;
            }
            assert!(limit_cdf(law, -200.0) < 1e-12);
            assert!(limit_cdf(law, 500.0) > 1.0 - 1e-12);
        }
    }

    fn simulate_tail(dof: usize, c: f64, level: f64, draws: usize, seed: u64) -> (f64, f64) {
        let mut s = RandomStream::from_seed(seed);
        let hits = (0..draws)
            .filter(|_| {
                let chi: f64 = (0..dof).map(|_| s.standard_normal().powi(2)).sum();
                s.standard_exponential() + c * chi >= level
            })
            .count();
        let p = hits as f64 / draws as f64;
        (p, (p * (1.0 - p) / draws as f64).sqrt())
    }

    #[test]
    fn exp_plus_chi2_matches_simulation() {
        for (i, &(dof, c, x)) in [(2u64, 0.25, 1.2), (3, -0.5, -0.4), (2, -1.0, 0.3)].iter().enumerate() {
            let (p, se) = simulate_tail(dof as usize, c, x, 400_000, 20 + i as u64);
            let want = 1.0 - exp_plus_chi2_cdf(dof, c, x);
            assert!((p - want).abs() < 4.0 * se, "dof={dof} c={c} x={x}: {p} vs {want}");
        }
    }

    #[test]
    fn critical_limits() {
        let unb = Size::Unbounded;
        let a12 = threshold_a_lp(e(1.0), 2.0).unwrap();
        let par = params(e(3.0), e(1.0), e(2.0), e(2.0), Size::Finite(3), unb);
        assert_eq!(critical_volume_limit(Corollary::Cor17, &par, 1.0 / a12, None).unwrap(), 0.5);
        assert_eq!(critical_volume_limit(Corollary::Cor17, &par, 0.9 / a12, None).unwrap(), 0.0);
        assert_eq!(critical_volume_limit(Corollary::Cor17, &par, 1.1 / a12, None).unwrap(), 1.0);

        let par = params(e(2.0), e(1.5), e(1.0), e(1.5), Size::Finite(1), unb);
        assert_eq!(critical_volume_limit(Corollary::Cor17, &par, 1.0, None).unwrap(), 1.0);
        let par = params(INF, e(1.5), e(1.0), e(1.5), Size::Finite(5), unb);
        assert_eq!(critical_volume_limit(Corollary::Cor17, &par, 1.0, None).unwrap(), 0.0);

        // the gamma-measure expression is the upper tail of the Thm D(b) limit
        for &(m, p1, p2) in &[(2u64, 2.0, 1.0), (4, 1.0, 3.0), (6, 5.0, 2.0), (4, 2.0, 1.0)] {
            let par = params(e(p1), e(2.0), e(p2), e(2.0), Size::Finite(m), unb);
            let v = critical_volume_limit(Corollary::Cor17, &par, 1.0, None).unwrap();
            let level = (m - 1) as f64 * (p1 / p2).ln() / 2.0;
            let tail = 1.0 - exp_plus_chi2_cdf(m - 1, (p1 - p2) / (2.0 * p1), level);
            assert!((v - tail).abs() < 1e-12, "m={m}: {v} vs {tail}");
            assert!(v < 1.0 && v > 0.0);
        }

        let par = params(e(3.0), e(1.0), e(2.0), e(2.0), unb, unb);
        assert!(matches!(
            critical_volume_limit(Corollary::Cor18, &par, 1.0 / a12, None),
            Err(Error::MissingInput(_))
        ));
        assert_eq!(critical_volume_limit(Corollary::Cor18, &par, 1.0 / a12, Some(0.0)).unwrap(), 0.5);
        assert_eq!(critical_volume_limit(Corollary::Cor18, &par, 1.0 / a12, Some(f64::INFINITY)).unwrap(), 1.0);
        let sigma = sigma2_regime(Regime::ThmEA, &par).unwrap().sqrt();
        let v = critical_volume_limit(Corollary::Cor18, &par, 1.0 / a12, Some(0.3)).unwrap();
        assert!((v - normal_cdf(0.3 / sigma)).abs() < 1e-15);
        let par = params(e(3.0), e(2.0), e(2.0), e(2.0), unb, unb);
        assert_eq!(critical_volume_limit(Corollary::Cor18, &par, 1.0, None).unwrap(), 0.0);
    }

    #[test]
    fn regime_names_round_trip() {
        for r in Regime::ALL {
            assert_eq!(r.name().parse::<Regime>().unwrap(), r);
        }
        assert_eq!("COR-1-7".parse::<Corollary>().unwrap(), Corollary::Cor17);
        assert!("thm-z".parse::<Regime>().is_err());
    }
}
