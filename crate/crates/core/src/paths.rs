//! Path simulation: the geometric factor `ξ_t`, the asset from its
//! closed-form solution, an Euler–Maruyama oracle, and the price band and
//! `β` threshold that go with the closed form.
//!
//! Every path draws its Brownian increments from its own ChaCha stream keyed
//! by `(seed, path_id)`, so results never depend on how paths are spread over
//! worker threads.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{GFunction, ModelParams, TimeGrid};
use crate::output::fmt_sig17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    ExactSolution,
    EulerMaruyama,
}

/// Which integration constant the closed-form solution uses.
///
/// `Paper` evaluates
/// `S_t = x ξ_t - (β/σ)(g(t) + ∫_0^t ξ_t ξ_s^{-1}(r g(s) - g'(s)) ds)`
/// as written, which starts at `x - (β/σ) g(0)`. `Corrected` adds the missing
/// `(β/σ) g(0) ξ_t` so that `S_0 = x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolutionMode {
    Paper,
    #[default]
    Corrected,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::ExactSolution => "exact",
            Scheme::EulerMaruyama => "euler",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Scheme::ExactSolution),
            "euler" => Ok(Scheme::EulerMaruyama),
            other => Err(format!("unknown scheme '{other}' (expected exact|euler)")),
        }
    }
}

impl fmt::Display for SolutionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolutionMode::Paper => "paper",
            SolutionMode::Corrected => "corrected",
        })
    }
}

impl FromStr for SolutionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(SolutionMode::Paper),
            "corrected" => Ok(SolutionMode::Corrected),
            other => Err(format!("unknown mode '{other}' (expected paper|corrected)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub grid: TimeGrid,
    pub seed: u64,
    pub scheme: Scheme,
    /// Only read by [`Scheme::ExactSolution`].
    pub mode: SolutionMode,
}

impl SimConfig {
    pub fn new(
        n_paths: usize,
        grid: TimeGrid,
        seed: u64,
        scheme: Scheme,
        mode: SolutionMode,
    ) -> Result<Self> {
        if n_paths == 0 {
            return Err(Error::domain("n_paths must be at least 1"));
        }
        Ok(SimConfig {
            n_paths,
            grid,
            seed,
            scheme,
            mode,
        })
    }
}

/// The per-path random stream.
pub fn path_rng(seed: u64, path_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_id);
    rng
}

/// Brownian increments `ΔW_k ~ N(0, h)` of one path on `grid`.
pub fn brownian_increments(seed: u64, path_id: u64, grid: &TimeGrid) -> Vec<f64> {
    let mut rng = path_rng(seed, path_id);
    let sqrt_h = grid.step().sqrt();
    (0..grid.n_steps())
        .map(|_| sqrt_h * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Path-independent coefficients of the closed-form solution on one grid:
/// `g` on the mode's clock and the integrand weight `r g - g'`.
#[derive(Debug, Clone)]
pub(crate) struct ExactCoeffs {
    g: Vec<f64>,
    gap: Vec<f64>,
    g_start: f64,
    integrand: bool,
    mode: SolutionMode,
}

impl ExactCoeffs {
    /// In `Corrected` mode `g` runs on the absolute clock. In `Paper` mode
    /// the uncorrected formula is restarted at `grid.t0()`, so `g` is read at
    /// `t - t0`.
    pub(crate) fn new(params: &ModelParams, g: &GFunction, grid: &TimeGrid, mode: SolutionMode) -> Self {
        let r = params.r;
        let t0 = grid.t0();
        let clock = |t: f64| match mode {
            SolutionMode::Paper => t - t0,
            SolutionMode::Corrected => t,
        };
        ExactCoeffs {
            g: grid.nodes().map(|t| g.value(r, clock(t))).collect(),
            gap: grid.nodes().map(|t| g.drift_gap(r, clock(t))).collect(),
            g_start: g.value(r, t0),
            integrand: !g.is_exponential(),
            mode,
        }
    }
}

/// Walks the closed-form solution started from `s_start` at `grid.t0()`,
/// pulling one Brownian increment per step and reporting
/// `(node, ξ_{t0,t_k}, S_{t_k})` at every node.
///
/// In `Corrected` mode this is the exact solution of the SDE from
/// `(t0, s_start)`.
///
/// The integral term is carried by the trapezoidal recursion
/// `J_{k+1} = ρ_k J_k + h/2 (ρ_k f_k + f_{k+1})` with `ρ_k = ξ_{k+1}/ξ_k`
/// the exponentiated log-increment.
pub(crate) fn walk_exact(
    params: &ModelParams,
    coeffs: &ExactCoeffs,
    grid: &TimeGrid,
    s_start: f64,
    mut next_dw: impl FnMut() -> f64,
    mut visit: impl FnMut(usize, f64, f64),
) {
    let c = params.beta_over_sigma();
    let h = grid.step();
    let drift = (params.r - 0.5 * params.sigma * params.sigma) * h;
    let asset = |k: usize, xi: f64, j: f64| match coeffs.mode {
        SolutionMode::Paper => s_start * xi - c * (coeffs.g[k] + j),
        SolutionMode::Corrected => s_start * xi - c * (coeffs.g[k] - coeffs.g_start * xi + j),
    };
    visit(0, 1.0, asset(0, 1.0, 0.0));

    let mut log_xi = 0.0;
    let mut j = 0.0;
    for k in 0..grid.n_steps() {
        let dlog = drift + params.sigma * next_dw();
        log_xi += dlog;
        let xi = log_xi.exp();
        if coeffs.integrand {
            let rho = dlog.exp();
            j = rho * j + 0.5 * h * (rho * coeffs.gap[k] + coeffs.gap[k + 1]);
        }
        visit(k + 1, xi, asset(k + 1, xi, j));
    }
}

/// Euler–Maruyama for `dS = rS dt + (σS + βg(t)) dW` from `(grid.t0(), s_start)`.
pub(crate) fn walk_euler(
    params: &ModelParams,
    g: &GFunction,
    grid: &TimeGrid,
    s_start: f64,
    mut next_dw: impl FnMut() -> f64,
    mut visit: impl FnMut(usize, f64, f64),
) {
    let h = grid.step();
    let drift = (params.r - 0.5 * params.sigma * params.sigma) * h;
    let mut s = s_start;
    let mut log_xi = 0.0;
    visit(0, 1.0, s);
    for k in 0..grid.n_steps() {
        let dw = next_dw();
        let t = grid.node(k);
        s += params.r * s * h + (params.sigma * s + params.beta * g.value(params.r, t)) * dw;
        log_xi += drift + params.sigma * dw;
        visit(k + 1, log_xi.exp(), s);
    }
}

/// `ξ` and `S` of one path on explicit increments, closed-form solution.
pub fn exact_path_from_increments(
    params: &ModelParams,
    g: &GFunction,
    grid: &TimeGrid,
    s_start: f64,
    mode: SolutionMode,
    dw: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_increments(grid, dw)?;
    let coeffs = ExactCoeffs::new(params, g, grid, mode);
    let mut it = dw.iter().copied();
    let mut xi = Vec::with_capacity(grid.n_nodes());
    let mut s = Vec::with_capacity(grid.n_nodes());
    walk_exact(params, &coeffs, grid, s_start, || it.next().unwrap(), |_, a, b| {
        xi.push(a);
        s.push(b);
    });
    Ok((xi, s))
}

/// `ξ` and `S` of one path on explicit increments, Euler–Maruyama.
pub fn euler_path_from_increments(
    params: &ModelParams,
    g: &GFunction,
    grid: &TimeGrid,
    s_start: f64,
    dw: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_increments(grid, dw)?;
    let mut it = dw.iter().copied();
    let mut xi = Vec::with_capacity(grid.n_nodes());
    let mut s = Vec::with_capacity(grid.n_nodes());
    walk_euler(params, g, grid, s_start, || it.next().unwrap(), |_, a, b| {
        xi.push(a);
        s.push(b);
    });
    Ok((xi, s))
}

fn check_increments(grid: &TimeGrid, dw: &[f64]) -> Result<()> {
    if dw.len() != grid.n_steps() {
        return Err(Error::Consistency(format!(
            "{} increments supplied for a grid of {} steps",
            dw.len(),
            grid.n_steps()
        )));
    }
    Ok(())
}

/// First node with `S <= 0`.
pub fn first_bankruptcy(s: &[f64]) -> Option<usize> {
    s.iter().position(|&v| v <= 0.0)
}

/// One simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SinglePath {
    pub path_id: u64,
    pub xi: Vec<f64>,
    pub s: Vec<f64>,
    pub bankrupt_at: Option<usize>,
}

/// Simulates path `path_id` of `config` with the configured scheme.
pub fn simulate_path(
    params: &ModelParams,
    g: &GFunction,
    config: &SimConfig,
    path_id: u64,
) -> SinglePath {
    let coeffs = ExactCoeffs::new(params, g, &config.grid, config.mode);
    simulate_path_with(params, g, &coeffs, config, path_id)
}

pub(crate) fn simulate_path_with(
    params: &ModelParams,
    g: &GFunction,
    coeffs: &ExactCoeffs,
    config: &SimConfig,
    path_id: u64,
) -> SinglePath {
    let grid = &config.grid;
    let mut rng = path_rng(config.seed, path_id);
    let sqrt_h = grid.step().sqrt();
    let draw = move || sqrt_h * rng.sample::<f64, _>(StandardNormal);
    let mut xi = Vec::with_capacity(grid.n_nodes());
    let mut s = Vec::with_capacity(grid.n_nodes());
    let visit = |_, a, b| {
        xi.push(a);
        s.push(b);
    };
    match config.scheme {
        Scheme::ExactSolution => walk_exact(params, coeffs, grid, params.x, draw, visit),
        Scheme::EulerMaruyama => walk_euler(params, g, grid, params.x, draw, visit),
    }
    let bankrupt_at = first_bankruptcy(&s);
    SinglePath {
        path_id,
        xi,
        s,
        bankrupt_at,
    }
}

/// Draws single paths of one configuration on demand, for callers that
/// stream over many paths without holding a [`PathSet`].
#[derive(Debug, Clone)]
pub struct PathSampler {
    params: ModelParams,
    g: GFunction,
    config: SimConfig,
    coeffs: ExactCoeffs,
}

impl PathSampler {
    pub fn new(params: &ModelParams, g: &GFunction, config: &SimConfig) -> Self {
        PathSampler {
            params: *params,
            g: *g,
            config: *config,
            coeffs: ExactCoeffs::new(params, g, &config.grid, config.mode),
        }
    }

    pub fn path(&self, path_id: u64) -> SinglePath {
        simulate_path_with(&self.params, &self.g, &self.coeffs, &self.config, path_id)
    }
}

/// Simulated trajectories stored row-major, one row of `n_steps + 1` nodes
/// per path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    grid: TimeGrid,
    n_paths: usize,
    xi: Vec<f64>,
    s: Option<Vec<f64>>,
    bankrupt_at: Vec<Option<usize>>,
    provenance: SimConfig,
}

impl PathSet {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn provenance(&self) -> &SimConfig {
        &self.provenance
    }

    pub fn xi_row(&self, path: usize) -> &[f64] {
        let w = self.grid.n_nodes();
        &self.xi[path * w..(path + 1) * w]
    }

    pub fn has_asset(&self) -> bool {
        self.s.is_some()
    }

    /// Asset row of `path`. Panics if only the factor has been simulated.
    pub fn s_row(&self, path: usize) -> &[f64] {
        let w = self.grid.n_nodes();
        let s = self.s.as_ref().expect("asset prices have not been simulated");
        &s[path * w..(path + 1) * w]
    }

    pub fn bankrupt_at(&self, path: usize) -> Option<usize> {
        self.bankrupt_at[path]
    }

    fn from_paths(params_grid: TimeGrid, config: SimConfig, paths: Vec<SinglePath>, with_s: bool) -> Self {
        let n_paths = paths.len();
        let w = params_grid.n_nodes();
        let mut xi = Vec::with_capacity(n_paths * w);
        let mut s = Vec::with_capacity(if with_s { n_paths * w } else { 0 });
        let mut bankrupt_at = Vec::with_capacity(n_paths);
        for p in paths {
            xi.extend_from_slice(&p.xi);
            if with_s {
                s.extend_from_slice(&p.s);
                bankrupt_at.push(p.bankrupt_at);
            } else {
                bankrupt_at.push(None);
            }
        }
        PathSet {
            grid: params_grid,
            n_paths,
            xi,
            s: with_s.then_some(s),
            bankrupt_at,
            provenance: config,
        }
    }

    /// Writes `t,path_id,xi,s`, one row per node and path, node-major.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,path_id,xi,s")?;
        let w = self.grid.n_nodes();
        for k in 0..w {
            let t = fmt_sig17(self.grid.node(k));
            for p in 0..self.n_paths {
                let s = match &self.s {
                    Some(s) => fmt_sig17(s[p * w + k]),
                    None => String::new(),
                };
                writeln!(out, "{t},{p},{},{s}", fmt_sig17(self.xi[p * w + k]))?;
            }
        }
        Ok(())
    }
}

fn simulate_all(params: &ModelParams, g: &GFunction, config: &SimConfig) -> Vec<SinglePath> {
    let coeffs = ExactCoeffs::new(params, g, &config.grid, config.mode);
    (0..config.n_paths as u64)
        .into_par_iter()
        .map(|id| simulate_path_with(params, g, &coeffs, config, id))
        .collect()
}

/// `ξ_t = exp[(r - σ²/2)t + σW_t]` on every path. Log-increments are exact,
/// so `ξ` carries no discretization error.
pub fn simulate_gbm_factor(params: &ModelParams, config: &SimConfig) -> Result<PathSet> {
    let paths: Vec<SinglePath> = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|id| {
            let dw = brownian_increments(config.seed, id, &config.grid);
            let drift = (params.r - 0.5 * params.sigma * params.sigma) * config.grid.step();
            let mut log_xi = 0.0;
            let mut xi = Vec::with_capacity(dw.len() + 1);
            xi.push(1.0);
            for d in dw {
                log_xi += drift + params.sigma * d;
                xi.push(log_xi.exp());
            }
            SinglePath {
                path_id: id,
                xi,
                s: Vec::new(),
                bankrupt_at: None,
            }
        })
        .collect();
    Ok(PathSet::from_paths(config.grid, *config, paths, false))
}

/// Fills `S` from the closed-form solution on the factor paths in `factor`.
///
/// `config` must describe the same grid, seed and path count that produced
/// `factor`, with the exact scheme.
pub fn solve_asset_path_closed(
    params: &ModelParams,
    g: &GFunction,
    factor: PathSet,
    config: &SimConfig,
) -> Result<PathSet> {
    if config.scheme != Scheme::ExactSolution {
        return Err(Error::Consistency(
            "closed-form asset paths require the exact scheme".into(),
        ));
    }
    let prov = factor.provenance;
    if factor.grid != config.grid || prov.seed != config.seed || factor.n_paths != config.n_paths {
        return Err(Error::Consistency(format!(
            "factor paths were simulated on {:?} (seed {}, {} paths), asset requested on {:?} (seed {}, {} paths)",
            factor.grid, prov.seed, factor.n_paths, config.grid, config.seed, config.n_paths
        )));
    }

    let w = config.grid.n_nodes();
    let drift = (params.r - 0.5 * params.sigma * params.sigma) * config.grid.step();
    let coeffs = ExactCoeffs::new(params, g, &config.grid, config.mode);
    let rows: Vec<(Vec<f64>, Option<usize>)> = (0..factor.n_paths)
        .into_par_iter()
        .map(|p| {
            let row = &factor.xi[p * w..(p + 1) * w];
            // recover σΔW from consecutive log-factors
            let mut k = 0;
            let next = || {
                let d = row[k + 1].ln() - row[k].ln();
                k += 1;
                (d - drift) / params.sigma
            };
            let mut s = Vec::with_capacity(w);
            walk_exact(params, &coeffs, &config.grid, params.x, next, |_, _, v| {
                s.push(v)
            });
            let b = first_bankruptcy(&s);
            (s, b)
        })
        .collect();

    let mut s = Vec::with_capacity(factor.n_paths * w);
    let mut bankrupt_at = Vec::with_capacity(factor.n_paths);
    for (row, b) in rows {
        s.extend_from_slice(&row);
        bankrupt_at.push(b);
    }
    Ok(PathSet {
        s: Some(s),
        bankrupt_at,
        provenance: *config,
        ..factor
    })
}

/// Euler–Maruyama asset paths. Uses the same per-path increments as
/// [`simulate_gbm_factor`] for an equal seed and grid.
pub fn simulate_asset_euler(params: &ModelParams, g: &GFunction, config: &SimConfig) -> Result<PathSet> {
    if config.scheme != Scheme::EulerMaruyama {
        return Err(Error::Consistency(
            "simulate_asset_euler requires the Euler-Maruyama scheme".into(),
        ));
    }
    Ok(PathSet::from_paths(
        config.grid,
        *config,
        simulate_all(params, g, config),
        true,
    ))
}

/// Full path set for the configured scheme.
pub fn simulate(params: &ModelParams, g: &GFunction, config: &SimConfig) -> Result<PathSet> {
    match config.scheme {
        Scheme::ExactSolution => Ok(PathSet::from_paths(
            config.grid,
            *config,
            simulate_all(params, g, config),
            true,
        )),
        Scheme::EulerMaruyama => simulate_asset_euler(params, g, config),
    }
}

/// Three-sigma band
/// `x e^{(r-σ²/2)t ∓ 3σ√t} - (β/σ) e^{rt}` for the uncorrected solution with
/// `g(t) = e^{rt}`.
pub fn price_bounds(params: &ModelParams, t: f64) -> Result<(f64, f64)> {
    if !t.is_finite() || t < 0.0 || t > params.maturity {
        return Err(Error::domain(format!(
            "t = {t} lies outside [0, T = {}]",
            params.maturity
        )));
    }
    let center = (params.r - 0.5 * params.sigma * params.sigma) * t;
    let width = 3.0 * params.sigma * t.sqrt();
    let shift = params.beta_over_sigma() * (params.r * t).exp();
    Ok((
        params.x * (center - width).exp() - shift,
        params.x * (center + width).exp() - shift,
    ))
}

/// Largest `β` keeping the lower band edge positive on `[0, T]`:
/// `x σ e^{-(σ²T/2 + 3σ√T)}`.
pub fn beta_max(params: &ModelParams) -> f64 {
    let s = params.sigma;
    let t = params.maturity;
    params.x * s * (-(0.5 * s * s * t + 3.0 * s * t.sqrt())).exp()
}
