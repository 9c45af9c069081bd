//! Log-volumes of `ℓ_p` balls, mixed-norm balls and order-k mixed-norm balls.
//!
//! Everything stays in natural-log space: `Γ(mn/p + 1)` overflows a double
//! long before the dimensions of interest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixed_norm::MixedNormSpec;
use crate::moments::{ln_gamma, Exponent};

/// Natural logarithm of a Lebesgue volume.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogVolume(pub f64);

impl LogVolume {
    pub fn log_value(self) -> f64 {
        self.0
    }

    /// The volume itself; may overflow to `inf` or underflow to `0`.
    pub fn exp(self) -> f64 {
        self.0.exp()
    }
}

fn check_dim(name: &str, d: u64) -> Result<()> {
    if d == 0 {
        return Err(Error::Domain(format!("{name} must be >= 1")));
    }
    Ok(())
}

/// `ln Γ(c/p + 1)` with the convention `c/∞ = 0`.
fn ln_gamma_ratio_term(c: f64, p: Exponent) -> f64 {
    match p {
        Exponent::Infinity => 0.0,
        Exponent::Finite(p) => ln_gamma(c / p + 1.0),
    }
}

fn lp_ball_log_volume_real(n: f64, p: Exponent) -> f64 {
    n * (std::f64::consts::LN_2 + ln_gamma_ratio_term(1.0, p)) - ln_gamma_ratio_term(n, p)
}

/// `ln vol_n(B_p^n) = n ln(2Γ(1/p + 1)) − ln Γ(n/p + 1)`.
pub fn lp_ball_log_volume(n: u64, p: Exponent) -> Result<LogVolume> {
    check_dim("n", n)?;
    Ok(LogVolume(lp_ball_log_volume_real(n as f64, p)))
}

/// `ln vol_{mn}(B_{p,q}^{m,n})`, from
/// `2^{mn} Γ(1/q+1)^{mn} Γ(n/p+1)^m / (Γ(mn/p+1) Γ(n/q+1)^m)`.
pub fn mixed_ball_log_volume(m: u64, n: u64, p: Exponent, q: Exponent) -> Result<LogVolume> {
    check_dim("m", m)?;
    check_dim("n", n)?;
    let (m, n) = (m as f64, n as f64);
    let mn = m * n;
    let value = mn * (std::f64::consts::LN_2 + ln_gamma_ratio_term(1.0, q))
        + m * ln_gamma_ratio_term(n, p)
        - ln_gamma_ratio_term(mn, p)
        - m * ln_gamma_ratio_term(n, q);
    Ok(LogVolume(value))
}

/// Order-k ball volume by the level recursion
/// `V_k = V_{k−1}^{n_k} · V_{p_k/(n_1⋯n_{k−1})}^{n_k} / 2^{n_k}`.
pub fn mixed_ball_log_volume_k(spec: &MixedNormSpec) -> LogVolume {
    let levels = spec.levels();
    let first = levels[0];
    let mut log_vol = lp_ball_log_volume_real(first.dim as f64, first.exponent);
    let mut inner = first.dim as f64;
    for level in &levels[1..] {
        let nk = level.dim as f64;
        log_vol = nk * log_vol + lp_ball_log_volume_real(nk, level.exponent.scaled_down(inner))
            - nk * std::f64::consts::LN_2;
        inner *= nk;
    }
    LogVolume(log_vol)
}

/// Order-k ball volume by the closed product formula
/// `2^{N} ∏_j Γ(N_{j−1}/p_j + 1)^{n_j⋯n_k} / Γ(N_j/p_j + 1)^{n_{j+1}⋯n_k}`,
/// where `N_j = n_1⋯n_j`. Used to cross-check the recursion.
pub fn mixed_ball_log_volume_k_explicit(spec: &MixedNormSpec) -> LogVolume {
    let dims: Vec<f64> = spec.levels().iter().map(|l| l.dim as f64).collect();
    let total: f64 = dims.iter().product();
    let k = dims.len();
    let mut value = total * std::f64::consts::LN_2;
    let mut prefix = 1.0;
    for (j, level) in spec.levels().iter().enumerate() {
        let suffix_from_j: f64 = dims[j..k].iter().product();
        let suffix_after_j: f64 = dims[j + 1..k].iter().product();
        let prefix_with_j = prefix * dims[j];
        value += suffix_from_j * ln_gamma_ratio_term(prefix, level.exponent)
            - suffix_after_j * ln_gamma_ratio_term(prefix_with_j, level.exponent);
        prefix = prefix_with_j;
    }
    LogVolume(value)
}

/// `ln r_{p,q}^{m,n}` where `r = vol(B_{p,q}^{m,n})^{1/(mn)}`.
pub fn normalized_radius_log(m: u64, n: u64, p: Exponent, q: Exponent) -> Result<f64> {
    let lv = mixed_ball_log_volume(m, n, p, q)?;
    Ok(lv.0 / (m as f64 * n as f64))
}
