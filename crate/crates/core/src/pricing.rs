//! Option premiums and time-t prices.
//!
//! With `g(t) = e^{rt}` the terminal price is an affine function of the
//! lognormal factor, so every quote reduces to a Black–Scholes call on a
//! shifted spot and strike:
//!
//! | mode        | effective spot          | effective strike       |
//! |-------------|-------------------------|------------------------|
//! | `Paper`     | `S_t`                   | `K + (β/σ) e^{r(T-t)}` |
//! | `Corrected` | `S_t + (β/σ) e^{rt}`    | `K + (β/σ) e^{rT}`     |
//!
//! Puts always come from parity against the observed spot,
//! `P = C + K e^{-r(T-t)} - S_t`. Any other `g` goes through [`mc_price`].

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{norm_cdf, GFunction, ModelParams};
use crate::output::{fmt_opt, fmt_sig17};
use crate::paths::{path_rng, walk_exact, ExactCoeffs, SimConfig, SolutionMode};

/// Smallest path count accepted by the Monte Carlo estimators.
pub const MIN_MC_PATHS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    #[inline]
    pub fn payoff(&self, s: f64, strike: f64) -> f64 {
        match self {
            OptionKind::Call => (s - strike).max(0.0),
            OptionKind::Put => (strike - s).max(0.0),
        }
    }
}

impl fmt::Display for OptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptionKind::Call => "call",
            OptionKind::Put => "put",
        })
    }
}

impl FromStr for OptionKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "call" => Ok(OptionKind::Call),
            "put" => Ok(OptionKind::Put),
            other => Err(format!("unknown option kind '{other}' (expected call|put)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceMethod {
    ClosedForm,
    MonteCarlo,
}

impl fmt::Display for PriceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriceMethod::ClosedForm => "closed",
            PriceMethod::MonteCarlo => "mc",
        })
    }
}

impl FromStr for PriceMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "closed" => Ok(PriceMethod::ClosedForm),
            "mc" => Ok(PriceMethod::MonteCarlo),
            other => Err(format!("unknown method '{other}' (expected closed|mc)")),
        }
    }
}

/// A European contract valued at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    pub kind: OptionKind,
    pub strike: f64,
    pub t: f64,
}

impl OptionSpec {
    pub fn new(kind: OptionKind, strike: f64, t: f64, params: &ModelParams) -> Result<Self> {
        let spec = OptionSpec { kind, strike, t };
        spec.check(params)?;
        Ok(spec)
    }

    pub fn check(&self, params: &ModelParams) -> Result<()> {
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return Err(Error::domain(format!("K must be positive (got {})", self.strike)));
        }
        if !(self.t.is_finite() && self.t >= 0.0 && self.t < params.maturity) {
            return Err(Error::domain(format!(
                "valuation time t = {} must lie in [0, T = {})",
                self.t, params.maturity
            )));
        }
        Ok(())
    }

    pub fn tau(&self, params: &ModelParams) -> f64 {
        params.maturity - self.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceQuote {
    pub kind: OptionKind,
    /// `None` for the classical Black–Scholes quote.
    pub mode: Option<SolutionMode>,
    pub method: PriceMethod,
    pub t: f64,
    pub strike: f64,
    pub value: f64,
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    /// Spot fed into the Black–Scholes formula.
    pub effective_spot: Option<f64>,
    /// `K'`, the strike fed into the Black–Scholes formula.
    pub effective_strike: Option<f64>,
    pub std_error: Option<f64>,
}

impl PriceQuote {
    pub const CSV_HEADER: &'static str = "kind,mode,method,t,K,value,d1,d2,effective_strike,std_error";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.kind,
            self.mode.map_or_else(|| "classical".to_string(), |m| m.to_string()),
            self.method,
            fmt_sig17(self.t),
            fmt_sig17(self.strike),
            fmt_sig17(self.value),
            fmt_opt(self.d1),
            fmt_opt(self.d2),
            fmt_opt(self.effective_strike),
            fmt_opt(self.std_error),
        )
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive (got {v})")))
    }
}

/// `(call value, d1, d2)`; inputs already checked.
fn bs_call(spot: f64, strike: f64, r: f64, sigma: f64, tau: f64) -> (f64, f64, f64) {
    let vol = sigma * tau.sqrt();
    let d1 = ((spot / strike).ln() + (r + 0.5 * sigma * sigma) * tau) / vol;
    let d2 = d1 - vol;
    let value = spot * norm_cdf(d1) - strike * (-r * tau).exp() * norm_cdf(d2);
    (value.max(0.0), d1, d2)
}

/// Classical Black–Scholes; puts via parity.
pub fn bs_price(spot: f64, strike: f64, r: f64, sigma: f64, tau: f64, kind: OptionKind) -> Result<PriceQuote> {
    check_positive("spot", spot)?;
    check_positive("strike", strike)?;
    check_positive("tau", tau)?;
    check_positive("sigma", sigma)?;
    let (call, d1, d2) = bs_call(spot, strike, r, sigma, tau);
    let value = match kind {
        OptionKind::Call => call,
        OptionKind::Put => call + strike * (-r * tau).exp() - spot,
    };
    Ok(PriceQuote {
        kind,
        mode: None,
        method: PriceMethod::ClosedForm,
        t: 0.0,
        strike,
        value,
        d1: Some(d1),
        d2: Some(d2),
        effective_spot: Some(spot),
        effective_strike: Some(strike),
        std_error: None,
    })
}

fn require_exponential(g: &GFunction) -> Result<()> {
    if g.is_exponential() {
        Ok(())
    } else {
        Err(Error::Unsupported(
            "closed-form prices exist only for g(t) = e^{rt}; use Monte Carlo".into(),
        ))
    }
}

/// Time-t price given the observed spot `S_t`, for `g(t) = e^{rt}`.
///
/// `Paper` evaluates the displayed time-t formula with strike
/// `K + (β/σ) e^{r(T-t)}`; `Corrected` prices under the conditional law of
/// the corrected solution.
pub fn price_at_t(
    params: &ModelParams,
    g: &GFunction,
    spec: &OptionSpec,
    spot: f64,
    mode: SolutionMode,
) -> Result<PriceQuote> {
    require_exponential(g)?;
    spec.check(params)?;
    if !spot.is_finite() {
        return Err(Error::domain(format!("spot must be finite (got {spot})")));
    }
    let (eff_spot, eff_strike) = effective_inputs(params, spec.t, spec.strike, spot, mode);
    if eff_spot <= 0.0 {
        return Err(Error::domain(format!(
            "effective spot {eff_spot} is not positive; the option is no longer tradeable"
        )));
    }
    let tau = spec.tau(params);
    let (call, d1, d2) = bs_call(eff_spot, eff_strike, params.r, params.sigma, tau);
    let value = match spec.kind {
        OptionKind::Call => call,
        OptionKind::Put => call + spec.strike * (-params.r * tau).exp() - spot,
    };
    Ok(PriceQuote {
        kind: spec.kind,
        mode: Some(mode),
        method: PriceMethod::ClosedForm,
        t: spec.t,
        strike: spec.strike,
        value,
        d1: Some(d1),
        d2: Some(d2),
        effective_spot: Some(eff_spot),
        effective_strike: Some(eff_strike),
        std_error: None,
    })
}

/// Black–Scholes spot and strike that reproduce the crisis-model price.
pub(crate) fn effective_inputs(
    params: &ModelParams,
    t: f64,
    strike: f64,
    spot: f64,
    mode: SolutionMode,
) -> (f64, f64) {
    let c = params.beta_over_sigma();
    let r = params.r;
    match mode {
        SolutionMode::Paper => (spot, strike + c * (r * (params.maturity - t)).exp()),
        SolutionMode::Corrected => (spot + c * (r * t).exp(), strike + c * (r * params.maturity).exp()),
    }
}

fn premium(params: &ModelParams, g: &GFunction, spec: &OptionSpec, mode: SolutionMode, kind: OptionKind) -> Result<PriceQuote> {
    if spec.kind != kind {
        return Err(Error::domain(format!("expected a {kind} contract, got a {}", spec.kind)));
    }
    if spec.t != 0.0 {
        return Err(Error::domain(format!(
            "premiums are quoted at t = 0 (got t = {}); use price_at_t",
            spec.t
        )));
    }
    price_at_t(params, g, spec, params.x, mode)
}

/// Call premium at `t = 0` for `g(t) = e^{rt}`.
pub fn call_premium(params: &ModelParams, g: &GFunction, spec: &OptionSpec, mode: SolutionMode) -> Result<PriceQuote> {
    premium(params, g, spec, mode, OptionKind::Call)
}

/// Put premium at `t = 0`, `P = C + K e^{-rT} - x`.
pub fn put_premium(params: &ModelParams, g: &GFunction, spec: &OptionSpec, mode: SolutionMode) -> Result<PriceQuote> {
    premium(params, g, spec, mode, OptionKind::Put)
}

/// Monte Carlo premium from closed-form terminal values, for any `g`.
///
/// The solution mode comes from `mode`; `config` supplies the path count,
/// grid (only used for the integral term when `g` is not exponential) and
/// seed. Terminal prices are used as simulated, negative ones included.
pub fn mc_price(
    params: &ModelParams,
    g: &GFunction,
    spec: &OptionSpec,
    config: &SimConfig,
    mode: SolutionMode,
) -> Result<PriceQuote> {
    spec.check(params)?;
    if spec.t != 0.0 {
        return Err(Error::domain(format!(
            "Monte Carlo premiums are quoted at t = 0 (got t = {})",
            spec.t
        )));
    }
    if config.n_paths < MIN_MC_PATHS {
        return Err(Error::TooFewPaths {
            n: config.n_paths,
            min: MIN_MC_PATHS,
        });
    }
    if (config.grid.t0(), config.grid.t1()) != (0.0, params.maturity) {
        return Err(Error::Consistency(format!(
            "pricing grid must span [0, {}]",
            params.maturity
        )));
    }
    let grid = config.grid;
    let sqrt_h = grid.step().sqrt();
    let coeffs = ExactCoeffs::new(params, g, &grid, mode);
    let payoffs: Vec<f64> = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = path_rng(config.seed, id);
            let mut last = 0.0;
            walk_exact(
                params,
                &coeffs,
                &grid,
                params.x,
                || sqrt_h * rng.sample::<f64, _>(StandardNormal),
                |_, _, s| last = s,
            );
            spec.kind.payoff(last, spec.strike)
        })
        .collect();

    let (mean, se) = mean_and_std_error(&payoffs);
    let disc = (-params.r * params.maturity).exp();
    Ok(PriceQuote {
        kind: spec.kind,
        mode: Some(mode),
        method: PriceMethod::MonteCarlo,
        t: 0.0,
        strike: spec.strike,
        value: disc * mean,
        d1: None,
        d2: None,
        effective_spot: None,
        effective_strike: None,
        std_error: Some(disc * se),
    })
}

/// Sample mean and `std / sqrt(n)`, summed in input order.
pub(crate) fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}
