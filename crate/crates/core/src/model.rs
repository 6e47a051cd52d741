//! Market constants, the crisis coupling `g(t)`, time grids and the normal CDF.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, ParamViolation, Result};
use crate::paths::beta_max;

/// Market and model constants. Rates are per year, times in years.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Initial price level `x = S_0`.
    pub x: f64,
    /// Risk-free rate.
    pub r: f64,
    /// Base volatility.
    pub sigma: f64,
    /// Crisis coupling; scales `g(t)` in the diffusion term.
    pub beta: f64,
    /// Maturity `T`.
    pub maturity: f64,
}

impl ModelParams {
    pub fn new(x: f64, r: f64, sigma: f64, beta: f64, maturity: f64) -> Result<Self> {
        validate_params(
            ModelParams {
                x,
                r,
                sigma,
                beta,
                maturity,
            },
            false,
        )
    }

    /// The recurring shift `β/σ`.
    pub fn beta_over_sigma(&self) -> f64 {
        self.beta / self.sigma
    }

    pub fn with_beta(self, beta: f64) -> Self {
        ModelParams { beta, ..self }
    }
}

/// Checks every invariant of `params` and reports all violations at once.
///
/// With `enforce_positivity` the coupling must also satisfy
/// `beta <= beta_max(params)`, the threshold above which the price falls
/// below zero with more than three-sigma probability.
pub fn validate_params(params: ModelParams, enforce_positivity: bool) -> Result<ModelParams> {
    let mut bad = Vec::new();
    let mut check = |ok: bool, field: &'static str, message: String| {
        if !ok {
            bad.push(ParamViolation { field, message });
        }
    };

    check(
        params.x.is_finite() && params.x > 0.0,
        "x",
        format!("x must be positive (got {})", params.x),
    );
    check(
        params.r.is_finite() && params.r >= 0.0,
        "r",
        format!("r must be non-negative (got {})", params.r),
    );
    check(
        params.sigma.is_finite() && params.sigma > 0.0,
        "sigma",
        "sigma must be positive".to_string(),
    );
    check(
        params.beta.is_finite() && params.beta >= 0.0,
        "beta",
        format!("beta must be non-negative (got {})", params.beta),
    );
    check(
        params.maturity.is_finite() && params.maturity > 0.0,
        "T",
        format!("T must be positive (got {})", params.maturity),
    );

    if bad.is_empty() && enforce_positivity {
        let bound = beta_max(&params);
        if params.beta > bound {
            bad.push(ParamViolation {
                field: "beta",
                message: format!(
                    "beta must not exceed beta_max = {bound:.6} for positive prices (got {})",
                    params.beta
                ),
            });
        }
    }

    if bad.is_empty() {
        Ok(params)
    } else {
        Err(Error::InvalidParams(bad))
    }
}

/// The deterministic coupling `g(t)` in the diffusion coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum GFunction {
    /// `g(t) = e^{rt}`, the riskless asset itself. The rate comes from
    /// [`ModelParams::r`].
    #[default]
    Exponential,
    /// `g(t) = A + B e^{αt} sin(ωt)`.
    DampedOscillator {
        a: f64,
        b: f64,
        alpha: f64,
        omega: f64,
    },
}

impl GFunction {
    pub fn is_exponential(&self) -> bool {
        matches!(self, GFunction::Exponential)
    }

    pub fn eval(&self, params: &ModelParams, t: f64) -> Result<f64> {
        check_time(params, t)?;
        Ok(self.value(params.r, t))
    }

    pub fn deriv(&self, params: &ModelParams, t: f64) -> Result<f64> {
        check_time(params, t)?;
        Ok(self.slope(params.r, t))
    }

    /// `g(t)` without the domain check.
    #[inline]
    pub(crate) fn value(&self, r: f64, t: f64) -> f64 {
        match *self {
            GFunction::Exponential => (r * t).exp(),
            GFunction::DampedOscillator { a, b, alpha, omega } => {
                a + b * (alpha * t).exp() * (omega * t).sin()
            }
        }
    }

    #[inline]
    pub(crate) fn slope(&self, r: f64, t: f64) -> f64 {
        match *self {
            GFunction::Exponential => r * self.value(r, t),
            GFunction::DampedOscillator { b, alpha, omega, .. } => {
                b * (alpha * t).exp() * (alpha * (omega * t).sin() + omega * (omega * t).cos())
            }
        }
    }

    /// `r g(t) - g'(t)`, the integrand weight of the closed-form solution.
    /// Identically zero for the exponential variant.
    #[inline]
    pub(crate) fn drift_gap(&self, r: f64, t: f64) -> f64 {
        match self {
            GFunction::Exponential => 0.0,
            GFunction::DampedOscillator { .. } => r * self.value(r, t) - self.slope(r, t),
        }
    }
}

/// Evaluates `g(t)` for `0 <= t <= T`.
pub fn g_eval(g: &GFunction, params: &ModelParams, t: f64) -> Result<f64> {
    g.eval(params, t)
}

/// Analytic derivative `g'(t)` for `0 <= t <= T`.
pub fn g_deriv(g: &GFunction, params: &ModelParams, t: f64) -> Result<f64> {
    g.deriv(params, t)
}

fn check_time(params: &ModelParams, t: f64) -> Result<()> {
    if t.is_finite() && (0.0..=params.maturity).contains(&t) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "t = {t} lies outside [0, T = {}]",
            params.maturity
        )))
    }
}

/// Uniform partition of `[t0, t1]` into `n_steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, n_steps: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite()) || t1 <= t0 {
            return Err(Error::domain(format!(
                "time grid needs t0 < t1 (got [{t0}, {t1}])"
            )));
        }
        if n_steps == 0 {
            return Err(Error::domain("time grid needs at least one step"));
        }
        Ok(TimeGrid { t0, t1, n_steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn step(&self) -> f64 {
        (self.t1 - self.t0) / self.n_steps as f64
    }

    /// Node `k`; the last node is `t1` exactly.
    pub fn node(&self, k: usize) -> f64 {
        if k >= self.n_steps {
            self.t1
        } else {
            self.t0 + k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(move |k| self.node(k))
    }
}

/// Standard normal CDF `Φ(d)`, absolute error below 1e-12.
pub fn std_normal_cdf(d: f64) -> Result<f64> {
    if !d.is_finite() {
        return Err(Error::domain(format!("normal CDF argument must be finite (got {d})")));
    }
    Ok(norm_cdf(d))
}

#[inline]
pub(crate) fn norm_cdf(d: f64) -> f64 {
    0.5 * libm::erfc(-d * FRAC_1_SQRT_2)
}
