//! Nonlinear LFR models and their exact affine-LPV embeddings.
//!
//! This crate simulates and identifies discrete-time nonlinear
//! linear-fractional-representation (LFR) models — an LTI core in feedback
//! with a single scalar static nonlinearity `w = f(z)` — and rewrites them,
//! exactly, as affine linear-parameter-varying (LPV) state-space models.
//! The rewrite factorizes the nonlinearity as `f(z) = z·f̄(z) + c`; `f̄`
//! becomes the scheduling map `p(t) = f̄(z(t))` and `c` is relocated into
//! constant input/output offsets computed from the DC gains of the four
//! core channels.
//!
//! Module layout:
//! - [`lti`]: state-space / transfer-function machinery (simulation, DC
//!   gain, canonical and minimal realization, frequency response).
//! - [`static_nl`]: scalar static nonlinearities (polynomial, tanh and RBF
//!   networks), least-squares fitting and the `z·f̄(z) + c` factorization.
//! - [`nl_lfr`]: the nonlinear LFR model class — assembly from four SISO
//!   blocks, structural validation, simulation.
//! - [`lpv`]: the embedding itself plus self-scheduled and externally
//!   scheduled LPV simulation.
//! - [`ident`]: identification pipelines (linear approximation, pole-zero
//!   allocation scan, feedback-LFR initialization, joint refinement) and
//!   the RMSE evaluation protocol.
//! - [`lm`]: the shared Levenberg-Marquardt engine.
//! - [`spectrum`], [`signals`], [`schema`]: DFT magnitude spectra, test
//!   signal generation, and the JSON model document.

pub mod error;
pub mod ident;
pub mod lm;
pub mod lpv;
pub mod lti;
pub mod nl_lfr;
pub mod schema;
pub mod signals;
pub mod spectrum;
pub mod static_nl;

pub use error::{Error, Result};
