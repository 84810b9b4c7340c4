//! Simulation and compensation laboratory for quadrature-modulated transmit
//! chains with polynomial (Volterra) distortion.
//!
//! The crate is organized around one period of a transmit frame:
//!
//! - [`frames`] — periodic discrete-time (symbol) and continuous-time
//!   (oversampled grid) signal frames and exact spectral operations.
//! - [`chain`] — the brute-force reference chain: ideal modulator, CT
//!   Volterra distortion, ideal band-pass, ideal demodulator, and the
//!   end-to-end symbol map `S` they compose, plus the ideal `2I - S`
//!   pre-compensator.
//! - [`closed_form`] — the closed-form discrete-time equivalent of the
//!   chain: per-branch monomials and filter responses, their consolidation
//!   into a monomial-generator/LTI factorization, and the low-order
//!   polynomial projection of the LTI stage.
//! - [`compensator`] — compensator bases (filter-bank structure and plain
//!   Volterra), least-squares fitting, significance pruning, prediction and
//!   compensation.
//! - [`experiments`] — QAM sources, the EVM metric, the benchmark sweep,
//!   closed-form verification, and CSV/SVG reporting.

pub mod chain;
pub mod closed_form;
pub mod compensator;
mod error;
pub mod experiments;
pub mod frames;

pub use chain::{DemodConfig, VolterraModel, VolterraTerm};
pub use error::{Error, Result};
pub use frames::{ChainParams, CtFrame, DtFrame, SpectrumFrame};
