//! Continuous-variable QKD over a downstream passive-splitter access network.
//!
//! The core math ([`gaussian`], [`protocol`], [`keyrate`]) is generic over
//! the scalar type through [`Real`]; the aliases below fix it to `f64`,
//! which is what the analysis, Monte Carlo and CLI layers use.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod fmt;
pub mod gaussian;
pub mod keyrate;
pub mod linalg;
pub mod montecarlo;
pub mod plot;
pub mod protocol;
pub mod rootfind;
pub mod scalar;
pub mod table;

pub use error::{Error, Result};
pub use scalar::Real;

pub type CovarianceMatrix = gaussian::CovarianceMatrix<f64>;
pub type CovarianceMatrix32 = gaussian::CovarianceMatrix<f32>;
pub type ProtocolParams = protocol::ProtocolParams<f64>;
pub type ChannelTotals = protocol::ChannelTotals<f64>;
pub type KeyRateReport = keyrate::KeyRateReport<f64>;
