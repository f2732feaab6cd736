//! Statistical mechanics of the Public Goods game with cooperation risk and
//! punishment.
//!
//! Players are two-level systems (cooperate/defect). Their payoffs, corrected
//! by the Nash-equilibrium cooperation risk, define a Hamiltonian that depends
//! only on the number of cooperators `M`:
//!
//! ```text
//! H(M) = -alpha2 * M^2 - alpha1 * M
//! ```
//!
//! The crate offers several independent routes to the equilibrium
//! observables of that Hamiltonian:
//!
//! * [`analytic::exact_thermo`]: exact degeneracy sum over `M` in log space.
//! * [`series`]: the Stirling-number expansion of the partition function.
//! * [`analytic::density_condition_roots`]: the digamma stationarity condition.
//! * [`montecarlo`]: single-flip Metropolis sampling with autocorrelation-aware
//!   error bars.
//! * [`oracle`]: brute-force enumeration of all `2^N` strategy profiles.
//!
//! [`experiments`] builds density sweeps, crossing detection, transition gaps,
//! variance curves and decay fits on top of these.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod autocorr;
mod error;
pub mod experiments;
pub mod fit;
pub mod model;
pub mod montecarlo;
pub mod oracle;
mod scalar;
pub mod series;
pub mod special;
pub mod stirling;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use model::{Configuration, RiskMode};

pub type GameParams = model::GameParams<f64>;
pub type EnergyModel = model::EnergyModel<f64>;
pub type ThermoResult = analytic::ThermoResult<f64>;
pub type ChainResult = montecarlo::ChainResult<f64>;
pub type SeriesParams = series::SeriesParams;

pub type GameParamsF32 = model::GameParams<f32>;
pub type EnergyModelF32 = model::EnergyModel<f32>;
