//! Exact geometry and probability of the finite-dimensional mixed-norm
//! sequence spaces `ℓ_p^m(ℓ_q^n)`.
//!
//! The crate is organised bottom-up:
//!
//! - [`moments`]: the [`Exponent`] type with its `p = ∞` conventions, special
//!   functions, and the absolute moments `M_p^α`, `C_p^{α,β}`, `V_p^α` of the
//!   p-generalized Gaussian.
//! - [`mixed_norm`]: `ℓ_p` norms, the order-2 mixed norm `‖·‖_{p,q}` and the
//!   recursive order-k mixed norm on tensors.
//! - [`volumes`]: log-volumes of `ℓ_p` balls, mixed-norm balls and order-k
//!   balls, plus normalized radii.
//! - [`samplers`]: deterministic random streams and exact samplers for the
//!   p-generalized Gaussian, the cone measure, `Unif(B_p^n)` and
//!   `Unif(B_{p,q}^{m,n})`.
//! - [`limits`]: threshold constants, limit-law variances and CDFs, and the
//!   limiting volume fractions at the threshold.
//! - [`experiments`]: the Monte Carlo harness (intersection volumes,
//!   hit-or-miss oracle, KS checks, threshold sweeps), parallel but
//!   independent of the worker count.

pub mod error;
pub mod experiments;
pub mod limits;
pub mod mixed_norm;
pub mod moments;
pub mod samplers;
pub mod volumes;

pub use error::{Error, Result};
pub use moments::Exponent;
