//! Exact samplers for the p-generalized Gaussian, the cone measure on
//! `S_q^{n−1}`, and the uniform distributions on `B_p^n` and `B_{p,q}^{m,n}`.
//!
//! A uniform point of `B_{p,q}^{m,n}` factors as `X_{i,j} = R_i Θ_{i,j}`
//! where the row norms `(R_i)` and the row directions `Θ_1, …, Θ_m` are
//! independent, each `Θ_i` follows the cone measure on `S_q^{n−1}`, and
//!
//! ```text
//! (R_i) = U^{1/(mn)} (|ξ_i|^{1/n} / (Σ_k |ξ_k|^{p/n})^{1/p})     p < ∞
//! (R_i) = (|ξ_i|^{1/n})                                           p = ∞
//! ```
//!
//! with `ξ_i` i.i.d. `N_{p/n}`. Since `|ξ|^{p/n}/(p/n) ~ Γ(n/p, 1)`, the
//! radial part is `U^{1/(mn)} (G_i / Σ G_k)^{1/p}` with `G_i ~ Γ(n/p, 1)`;
//! it is evaluated from `ln G_i` so that `|ξ_i|` is never materialized.

mod gamma;
mod stream;

pub use gamma::sample_ln_gamma;
pub use stream::RandomStream;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixed_norm::Matrix;
use crate::moments::Exponent;

/// One draw from `N_p`.
///
/// For finite `p`, `|X|^p / p ~ Γ(1/p, 1)`, so `X = S (pG)^{1/p}` with a
/// uniform sign `S`; `N_∞` is `Unif[-1, 1]`.
pub fn sample_p_gaussian(p: Exponent, stream: &mut RandomStream) -> f64 {
    match p {
        Exponent::Infinity => stream.symmetric_unit(),
        Exponent::Finite(p) => {
            let ln_g = sample_ln_gamma(1.0 / p, stream);
            stream.sign() * ((p.ln() + ln_g) / p).exp()
        }
    }
}

/// Largest entry of a slice, or `-inf` when every entry is `-inf`.
fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Fills `out` with a cone-measure draw on `S_q^{n−1}`, `n = out.len()`.
///
/// `scratch` must have the same length. The all-zero event has probability
/// zero; if it ever occurs numerically the vector is redrawn.
pub(crate) fn cone_measure_into(q: Exponent, out: &mut [f64], scratch: &mut [f64], stream: &mut RandomStream) {
    debug_assert_eq!(out.len(), scratch.len());
    loop {
        match q {
            Exponent::Infinity => {
                let mut max = 0.0f64;
                for v in out.iter_mut() {
                    *v = stream.symmetric_unit();
                    max = max.max(v.abs());
                }
                if max > 0.0 {
                    out.iter_mut().for_each(|v| *v /= max);
                    return;
                }
            }
            // |η| for η ~ N_2 and N_1 is |N(0,1)| and Exp(1); draw them directly.
            Exponent::Finite(q) if q == 2.0 => {
                let mut sum = 0.0;
                for v in out.iter_mut() {
                    *v = stream.standard_normal();
                    sum += *v * *v;
                }
                if sum > 0.0 {
                    let inv = 1.0 / sum.sqrt();
                    out.iter_mut().for_each(|v| *v *= inv);
                    return;
                }
            }
            Exponent::Finite(q) if q == 1.0 => {
                let mut sum = 0.0;
                for v in out.iter_mut() {
                    let mag = stream.standard_exponential();
                    sum += mag;
                    *v = stream.sign() * mag;
                }
                if sum > 0.0 {
                    let inv = 1.0 / sum;
                    out.iter_mut().for_each(|v| *v *= inv);
                    return;
                }
            }
            Exponent::Finite(q) => {
                // |η_j|^q / q = G_j ~ Γ(1/q, 1) and |θ_j| = (G_j / Σ G)^{1/q}
                let shape = 1.0 / q;
                for g in scratch.iter_mut() {
                    *g = sample_ln_gamma(shape, stream);
                }
                let total = log_sum_exp(scratch);
                if total.is_finite() {
                    for (v, g) in out.iter_mut().zip(scratch.iter()) {
                        *v = stream.sign() * ((g - total) / q).exp();
                    }
                    return;
                }
            }
        }
    }
}

/// A draw from the cone measure on `S_q^{n−1}`.
pub fn sample_cone_measure(q: Exponent, n: usize, stream: &mut RandomStream) -> Result<Vec<f64>> {
    check_dim("n", n)?;
    let mut out = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    cone_measure_into(q, &mut out, &mut scratch, stream);
    Ok(out)
}

/// A uniform draw from `B_p^n`: `U^{1/n}` times a cone-measure direction, or
/// `n` independent `Unif[-1, 1]` coordinates for `p = ∞`.
pub fn sample_lp_ball(p: Exponent, n: usize, stream: &mut RandomStream) -> Result<Vec<f64>> {
    check_dim("n", n)?;
    if p.is_infinite() {
        return Ok((0..n).map(|_| stream.symmetric_unit()).collect());
    }
    let mut out = sample_cone_measure(p, n, stream)?;
    let radius = (stream.open01().ln() / n as f64).exp();
    out.iter_mut().for_each(|v| *v *= radius);
    Ok(out)
}

/// Fills `out` (length `m`) with the row norms `(R_i)` of a uniform draw
/// from `B_{p,q}^{m,n}`.
pub(crate) fn radial_into(p: Exponent, n: usize, out: &mut [f64], stream: &mut RandomStream) {
    let nf = n as f64;
    match p {
        Exponent::Infinity => {
            for r in out.iter_mut() {
                *r = (stream.open01().ln() / nf).exp();
            }
        }
        Exponent::Finite(p) => {
            let shape = nf / p;
            for g in out.iter_mut() {
                *g = sample_ln_gamma(shape, stream);
            }
            let total = log_sum_exp(out);
            let ln_u = stream.open01().ln() / (out.len() as f64 * nf);
            for r in out.iter_mut() {
                *r = (ln_u + (*r - total) / p).exp();
            }
        }
    }
}

/// The row-norm vector `(R_1, …, R_m)` of a uniform draw from `B_{p,q}^{m,n}`
/// (its law does not depend on `q`).
pub fn sample_radial(p: Exponent, n: usize, m: usize, stream: &mut RandomStream) -> Result<Vec<f64>> {
    check_dim("n", n)?;
    check_dim("m", m)?;
    let mut out = vec![0.0; m];
    radial_into(p, n, &mut out, stream);
    Ok(out)
}

/// Where a matrix sample came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub p: Exponent,
    pub q: Exponent,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub stream_id: u64,
}

/// A uniform draw from `B_{p,q}^{m,n}` with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSample {
    pub values: Matrix,
    pub meta: SampleMeta,
}

/// Reusable buffers for repeated ball draws of one shape.
#[derive(Clone, Debug)]
pub(crate) struct BallSampler {
    pub p: Exponent,
    pub q: Exponent,
    pub m: usize,
    pub n: usize,
    pub radial: Vec<f64>,
    pub values: Vec<f64>,
    scratch: Vec<f64>,
}

impl BallSampler {
    pub(crate) fn new(p: Exponent, q: Exponent, m: usize, n: usize) -> Self {
        BallSampler { p, q, m, n, radial: vec![0.0; m], values: vec![0.0; m * n], scratch: vec![0.0; n] }
    }

    /// Draws the full matrix into `self.values` and its row norms into `self.radial`.
    pub(crate) fn draw(&mut self, stream: &mut RandomStream) {
        self.draw_rows(self.m, stream);
    }

    /// Draws all row norms but only the first `k` row directions; the
    /// leading `k·n` entries of `self.values` are an exact marginal draw.
    pub(crate) fn draw_rows(&mut self, k: usize, stream: &mut RandomStream) {
        radial_into(self.p, self.n, &mut self.radial, stream);
        for i in 0..k {
            let row = &mut self.values[i * self.n..(i + 1) * self.n];
            cone_measure_into(self.q, row, &mut self.scratch, stream);
            let r = self.radial[i];
            row.iter_mut().for_each(|v| *v *= r);
        }
    }
}

/// A uniform draw from `B_{p,q}^{m,n}`.
pub fn sample_mixed_ball(
    p: Exponent,
    q: Exponent,
    m: usize,
    n: usize,
    stream: &mut RandomStream,
) -> Result<MatrixSample> {
    check_dim("m", m)?;
    check_dim("n", n)?;
    let meta = SampleMeta { p, q, m, n, seed: stream.seed(), stream_id: stream.stream_id() };
    let mut sampler = BallSampler::new(p, q, m, n);
    sampler.draw(stream);
    Ok(MatrixSample { values: Matrix::new(m, n, sampler.values)?, meta })
}

/// The first `k` rows of a uniform draw from `B_{p,q}^{m,n}` as a `k × n`
/// matrix, together with all `m` row norms. Only `k` directions are drawn.
pub fn sample_mixed_ball_leading_rows(
    p: Exponent,
    q: Exponent,
    m: usize,
    n: usize,
    k: usize,
    stream: &mut RandomStream,
) -> Result<(Vec<f64>, Matrix)> {
    check_dim("m", m)?;
    check_dim("n", n)?;
    if k == 0 || k > m {
        return Err(Error::DimensionMismatch(format!("need 1 <= k <= m, got k={k}, m={m}")));
    }
    let mut sampler = BallSampler::new(p, q, m, n);
    sampler.draw_rows(k, stream);
    sampler.values.truncate(k * n);
    Ok((sampler.radial, Matrix::new(k, n, sampler.values)?))
}

fn check_dim(name: &str, d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::DimensionMismatch(format!("{name} must be >= 1")));
    }
    Ok(())
}
