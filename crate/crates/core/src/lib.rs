//! Pricing and hedging of European options on an asset whose diffusion
//! carries an additive, time-dependent crisis term:
//!
//! ```text
//! dS_t = r S_t dt + (σ S_t + β g(t)) dW_t,   S_0 = x
//! ```
//!
//! The crate is split along the lines of the computation:
//!
//! * [`model`] holds the market constants, the `g(t)` family, time grids and
//!   the standard normal CDF.
//! * [`paths`] simulates the geometric factor `ξ_t` and the asset, both from
//!   the closed-form solution and with an Euler–Maruyama oracle, and provides
//!   the three-sigma price band and the admissible `β` threshold.
//! * [`pricing`] has the closed-form premiums for `g(t) = e^{rt}`, time-t
//!   prices, the classical Black–Scholes baseline and a Monte Carlo pricer.
//! * [`hedging`] computes deltas and runs discrete self-financing replication.
//! * [`cli`] is the command-line front end used by the `crisisopt` binary.

pub mod cli;
pub mod error;
pub mod hedging;
pub mod model;
pub mod output;
pub mod paths;
pub mod pricing;

pub use error::{Error, Result};
pub use model::{std_normal_cdf, validate_params, GFunction, ModelParams, TimeGrid};
pub use paths::{beta_max, price_bounds, PathSet, Scheme, SimConfig, SolutionMode};
pub use pricing::{OptionKind, OptionSpec, PriceMethod, PriceQuote};
