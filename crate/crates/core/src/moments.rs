//! Exponents, special functions and the absolute moments of the
//! p-generalized Gaussian.
//!
//! For `p ∈ (0, ∞)` the p-generalized Gaussian `N_p` has density
//! `exp(-|x|^p / p) / (2 p^{1/p} Γ(1/p + 1))`; `N_∞` is `Unif[-1, 1]`.
//! Its absolute moments are
//!
//! ```text
//! M_p^α     = p^{α/p} / (α + 1) · Γ((α + 1)/p + 1) / Γ(1/p + 1)
//! C_p^{α,β} = M_p^{α+β} − M_p^α M_p^β
//! V_p^α     = C_p^{α,α}
//! ```
//!
//! together with the conventions `M_∞^∞ = 1` and `C_∞^{∞,β} = V_∞^∞ = 0`.
//! All Γ ratios are evaluated as exponentials of sums of [`log_gamma`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, Error, Result};

/// An exponent in `(0, ∞]`.
///
/// Infinity is a distinguished state rather than `f64::INFINITY`, and the
/// helpers implement `c/∞ = 0`, `∞/c = ∞` and `∞^{1/∞} = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub const INFINITY: Exponent = Exponent::Infinity;

    /// Builds an exponent from a real value. `+∞` maps to [`Exponent::Infinity`];
    /// zero, negatives and NaN are rejected.
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value <= 0.0 {
            return domain(format!("exponent must lie in (0, inf], got {value}"));
        }
        if value == f64::INFINITY {
            Ok(Exponent::Infinity)
        } else {
            Ok(Exponent::Finite(value))
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    pub fn is_finite(self) -> bool {
        !self.is_infinite()
    }

    pub fn finite_value(self) -> Option<f64> {
        match self {
            Exponent::Finite(p) => Some(p),
            Exponent::Infinity => None,
        }
    }

    /// The value as an `f64`, with `f64::INFINITY` for the infinite exponent.
    pub fn value(self) -> f64 {
        self.finite_value().unwrap_or(f64::INFINITY)
    }

    /// `c / p`, which is `0` for `p = ∞`.
    pub fn divide(c: f64, p: Exponent) -> f64 {
        match p {
            Exponent::Finite(p) => c / p,
            Exponent::Infinity => 0.0,
        }
    }

    /// `1 / p`, which is `0` for `p = ∞`.
    pub fn recip(self) -> f64 {
        Exponent::divide(1.0, self)
    }

    /// `p / c` for `c > 0`; stays infinite for `p = ∞`.
    pub fn scaled_down(self, c: f64) -> Exponent {
        debug_assert!(c > 0.0);
        match self {
            Exponent::Finite(p) => Exponent::Finite(p / c),
            Exponent::Infinity => Exponent::Infinity,
        }
    }

    /// `p · c` for `c > 0`; stays infinite for `p = ∞`.
    pub fn scaled_up(self, c: f64) -> Exponent {
        debug_assert!(c > 0.0);
        match self {
            Exponent::Finite(p) => Exponent::Finite(p * c),
            Exponent::Infinity => Exponent::Infinity,
        }
    }

    /// `ln(p^{1/p})`, which is `0` for `p = ∞`.
    pub fn ln_self_root(self) -> f64 {
        match self {
            Exponent::Finite(p) => p.ln() / p,
            Exponent::Infinity => 0.0,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") || t == "∞" {
            return Ok(Exponent::Infinity);
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::Domain(format!("cannot parse exponent {s:?}")))?;
        if !v.is_finite() {
            return domain(format!("exponent {s:?} must be a positive decimal or \"inf\""));
        }
        Exponent::new(v)
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => serializer.serialize_f64(*p),
            Exponent::Infinity => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Exponent::new(v),
            Raw::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return domain(format!("log_gamma needs x > 0, got {x}"));
    }
    Ok(ln_gamma(x))
}

/// `ζ(k)` for `k = 2, …, 30`.
const ZETA: [f64; 29] = [
    1.6449340668482264365,
    1.2020569031595942854,
    1.0823232337111381915,
    1.0369277551433699263,
    1.0173430619844491397,
    1.0083492773819228268,
    1.0040773561979443394,
    1.0020083928260822144,
    1.0009945751278180853,
    1.0004941886041194646,
    1.0002460865533080483,
    1.0001227133475784891,
    1.0000612481350587048,
    1.0000305882363070205,
    1.0000152822594086519,
    1.0000076371976378998,
    1.0000038172932649998,
    1.0000019082127165539,
    1.0000009539620338728,
    1.0000004769329867878,
    1.0000002384505027277,
    1.0000001192199259653,
    1.0000000596081890513,
    1.0000000298035035147,
    1.0000000149015548284,
    1.0000000074507117898,
    1.0000000037253340248,
    1.0000000018626597235,
    1.0000000009313274324,
];

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `ln Γ(1 + ε) = −γε + Σ_{k≥2} (−1)^k ζ(k) ε^k / k` for `|ε| ≤ 0.2`.
fn ln_gamma_1p_series(eps: f64) -> f64 {
    let mut sum = 0.0;
    let mut power = -eps;
    for (i, z) in ZETA.iter().enumerate() {
        power *= -eps;
        sum += z * power / (i + 2) as f64;
    }
    sum - EULER_GAMMA * eps
}

/// `ln Γ(x)`; near the zeros at 1 and 2 a Taylor series keeps full relative accuracy.
#[inline]
pub(crate) fn ln_gamma(x: f64) -> f64 {
    if (x - 1.0).abs() <= 0.2 {
        ln_gamma_1p_series(x - 1.0)
    } else if (x - 2.0).abs() <= 0.2 {
        let eps = x - 2.0;
        ln_gamma_1p_series(eps) + eps.ln_1p()
    } else {
        libm::lgamma(x)
    }
}

/// `ln Γ(a + h + 1) − ln Γ(a + 1)` without cancellation for large `a`.
pub(crate) fn ln_gamma_shift(a: f64, h: f64) -> f64 {
    if a < 15.0 {
        return ln_gamma(a + h + 1.0) - ln_gamma(a + 1.0);
    }
    let b = a + h;
    (a + 0.5) * (h / a).ln_1p() + h * (b.ln() - 1.0) + stirling_error(b) - stirling_error(a)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln(1 + t) − t`, accurate for small `|t|`.
fn log1pmx(t: f64) -> f64 {
    if t.abs() > 0.25 {
        return t.ln_1p() - t;
    }
    // −t²/2 + t³/3 − …
    let mut term = -t;
    let mut sum = 0.0;
    for k in 2..200 {
        term *= -t;
        let contrib = term / k as f64;
        sum += contrib;
        if contrib.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    -sum
}

/// `ln Γ(a + 1) − (a ln a − a + ½ ln(2πa))`.
fn stirling_error(a: f64) -> f64 {
    if a < 15.0 {
        return ln_gamma(a + 1.0) - (a * a.ln() - a + 0.5 * (2.0 * std::f64::consts::PI * a).ln());
    }
    let inv = 1.0 / a;
    let inv2 = inv * inv;
    inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))))
}

/// `ln(z^a e^{−z} / Γ(a + 1))`, kept accurate for large `a`.
fn ln_gamma_prefactor(a: f64, z: f64) -> f64 {
    if a < 10.0 {
        a * z.ln() - z - ln_gamma(a + 1.0)
    } else {
        let t = (z - a) / a;
        a * log1pmx(t) - 0.5 * (2.0 * std::f64::consts::PI * a).ln() - stirling_error(a)
    }
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 100_000;

/// Lower and upper regularized incomplete gamma `(P(a, z), Q(a, z))`.
///
/// Series below `z < a + 1`, Lentz continued fraction above.
pub fn regularized_gamma_pq(a: f64, z: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) {
        return domain(format!("gamma shape must be > 0, got {a}"));
    }
    if z.is_nan() {
        return domain("gamma argument is NaN");
    }
    if z <= 0.0 {
        return Ok((0.0, 1.0));
    }
    if z == f64::INFINITY {
        return Ok((1.0, 0.0));
    }
    let ln_pre = ln_gamma_prefactor(a, z);
    if z < a + 1.0 {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut denom = a;
        for _ in 0..GAMMA_MAX_ITER {
            denom += 1.0;
            term *= z / denom;
            sum += term;
            if term < sum * GAMMA_EPS {
                break;
            }
        }
        let p = (ln_pre + sum.ln()).exp().min(1.0);
        Ok((p, 1.0 - p))
    } else {
        let tiny = 1e-300;
        let mut b = z + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        // z^a e^{-z} / Γ(a) = a · prefactor
        let q = (ln_pre + a.ln() + h.ln()).exp().min(1.0);
        Ok((1.0 - q, q))
    }
}

/// CDF of the gamma distribution with the given shape and scale at `x`.
pub fn regularized_gamma_cdf(shape: f64, scale: f64, x: f64) -> Result<f64> {
    if !(scale > 0.0) {
        return domain(format!("gamma scale must be > 0, got {scale}"));
    }
    Ok(regularized_gamma_pq(shape, x / scale)?.0)
}

/// Survival function `1 − CDF` of the gamma distribution, without cancellation.
pub fn regularized_gamma_sf(shape: f64, scale: f64, x: f64) -> Result<f64> {
    if !(scale > 0.0) {
        return domain(format!("gamma scale must be > 0, got {scale}"));
    }
    Ok(regularized_gamma_pq(shape, x / scale)?.1)
}

/// `M_p^α`, the `α`-th absolute moment of `N_p`.
pub fn moment_m(p: Exponent, alpha: Exponent) -> Result<f64> {
    match (p, alpha) {
        (Exponent::Infinity, Exponent::Infinity) => Ok(1.0),
        (Exponent::Finite(_), Exponent::Infinity) => {
            domain("M_p^alpha with alpha = inf is only defined for p = inf")
        }
        (p, Exponent::Finite(a)) => Ok(moment_m_finite(p, a)),
    }
}

/// `M_p^α` for finite `α > 0` (the caller guarantees the sign).
pub(crate) fn moment_m_finite(p: Exponent, alpha: f64) -> f64 {
    ln_moment_m(p, alpha).exp()
}

pub(crate) fn ln_moment_m(p: Exponent, alpha: f64) -> f64 {
    match p {
        Exponent::Infinity => -(alpha.ln_1p()),
        Exponent::Finite(p) => {
            alpha / p * p.ln() - alpha.ln_1p() + ln_gamma_shift(1.0 / p, alpha / p)
        }
    }
}

/// `C_p^{α,β} = M_p^{α+β} − M_p^α M_p^β`, with `C_∞^{∞,β} = 0`.
pub fn cov_c(p: Exponent, alpha: Exponent, beta: Exponent) -> Result<f64> {
    // Order the pair so the computation is symmetric bit for bit.
    let (a, b) = match (alpha, beta) {
        (Exponent::Finite(x), Exponent::Finite(y)) if y < x => (beta, alpha),
        (Exponent::Infinity, Exponent::Finite(_)) => (beta, alpha),
        _ => (alpha, beta),
    };
    match (p, a, b) {
        (Exponent::Infinity, _, Exponent::Infinity) => Ok(0.0),
        (Exponent::Finite(_), _, Exponent::Infinity) => {
            domain("C_p^{alpha,beta} with an infinite index needs p = inf")
        }
        (p, Exponent::Finite(a), Exponent::Finite(b)) => {
            Ok(moment_m_finite(p, a + b) - moment_m_finite(p, a) * moment_m_finite(p, b))
        }
        (_, Exponent::Infinity, Exponent::Finite(_)) => unreachable!("pair is ordered"),
    }
}

/// `V_p^α = C_p^{α,α}`.
pub fn var_v(p: Exponent, alpha: Exponent) -> Result<f64> {
    cov_c(p, alpha, alpha)
}

/// `M_p^α`, `C_p^{α,β}` and `V_p^α` evaluated together.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentTriple {
    pub m_alpha: f64,
    pub c_alpha_beta: f64,
    pub v_alpha: f64,
}

impl MomentTriple {
    pub fn new(p: Exponent, alpha: Exponent, beta: Exponent) -> Result<Self> {
        Ok(MomentTriple {
            m_alpha: moment_m(p, alpha)?,
            c_alpha_beta: cov_c(p, alpha, beta)?,
            v_alpha: var_v(p, alpha)?,
        })
    }
}

/// Large-`n` expansion of `M_{p/n}^{q/n}`.
///
/// For finite `p` this is `1 + q(q−p)/(2p)·n⁻¹ + (q²/(8p²) − 5q/(12p) + 3/8 − p/(12q))·q²·n⁻²`,
/// accurate to `O(n⁻³)`. For `p = ∞` it is the geometric series
/// `Σ_k (−q/n)^k` summed to convergence, which requires `q < n`.
pub fn moment_m_asymptotic(p: Exponent, q: f64, n: u64) -> Result<f64> {
    if !(q > 0.0) {
        return domain(format!("q must be > 0, got {q}"));
    }
    if n == 0 {
        return domain("n must be >= 1");
    }
    let n = n as f64;
    match p {
        Exponent::Finite(p) => {
            let first = q * (q - p) / (2.0 * p);
            let second = (q * q / (8.0 * p * p) - 5.0 * q / (12.0 * p) + 3.0 / 8.0 - p / (12.0 * q)) * q * q;
            Ok(1.0 + first / n + second / (n * n))
        }
        Exponent::Infinity => {
            let ratio = -q / n;
            if ratio.abs() >= 1.0 {
                return domain(format!("geometric expansion diverges for q/n = {}", q / n));
            }
            let mut term = 1.0;
            let mut sum = 0.0;
            for _ in 0..10_000 {
                sum += term;
                term *= ratio;
                if term.abs() < 1e-18 {
                    break;
                }
            }
            Ok(sum)
        }
    }
}
