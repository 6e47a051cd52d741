//! Hedge ratios and discrete self-financing replication.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{norm_cdf, GFunction, ModelParams, TimeGrid};
use crate::output::fmt_sig17;
use crate::paths::{path_rng, simulate_path_with, walk_exact, ExactCoeffs, Scheme, SimConfig, SolutionMode};
use crate::pricing::{
    effective_inputs, mc_price, mean_and_std_error, price_at_t, OptionKind, OptionSpec, MIN_MC_PATHS,
};

/// Closed-form delta `Φ(d1)` (call) or `Φ(d1) - 1` (put) at `(spec.t, spot)`
/// for `g(t) = e^{rt}`, with the same effective inputs as
/// [`price_at_t`].
pub fn delta_closed(
    params: &ModelParams,
    g: &GFunction,
    spec: &OptionSpec,
    spot: f64,
    mode: SolutionMode,
) -> Result<f64> {
    if !g.is_exponential() {
        return Err(Error::Unsupported(
            "closed-form deltas exist only for g(t) = e^{rt}".into(),
        ));
    }
    spec.check(params)?;
    let (s, k) = effective_inputs(params, spec.t, spec.strike, spot, mode);
    if s.is_nan() || s <= 0.0 {
        return Err(Error::domain(format!(
            "effective spot {s} is not positive; the option is no longer tradeable"
        )));
    }
    let tau = spec.tau(params);
    let d1 = ((s / k).ln() + (params.r + 0.5 * params.sigma * params.sigma) * tau)
        / (params.sigma * tau.sqrt());
    let call = norm_cdf(d1);
    Ok(match spec.kind {
        OptionKind::Call => call,
        OptionKind::Put => call - 1.0,
    })
}

/// Monte Carlo delta `e^{-r(T-t)} E[ξ_{t,T} 1{S_T >= K}]` from fresh forward
/// paths started at `(spec.t, spot)`; for puts `-e^{-r(T-t)} E[ξ_{t,T} 1{S_T < K}]`.
///
/// The forward dynamics restart the closed-form solution from the observed
/// state in the requested mode, over `config.grid.n_steps()` steps spanning
/// `[t, T]`. Returns `(estimate, std_error)`.
pub fn delta_mc(
    params: &ModelParams,
    g: &GFunction,
    spec: &OptionSpec,
    spot: f64,
    config: &SimConfig,
    mode: SolutionMode,
) -> Result<(f64, f64)> {
    spec.check(params)?;
    if config.n_paths < MIN_MC_PATHS {
        return Err(Error::TooFewPaths {
            n: config.n_paths,
            min: MIN_MC_PATHS,
        });
    }
    let grid = TimeGrid::new(spec.t, params.maturity, config.grid.n_steps())?;
    let sqrt_h = grid.step().sqrt();
    let coeffs = ExactCoeffs::new(params, g, &grid, mode);
    let samples: Vec<f64> = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = path_rng(config.seed, id);
            let mut last = (1.0, spot);
            walk_exact(
                params,
                &coeffs,
                &grid,
                spot,
                || sqrt_h * rng.sample::<f64, _>(StandardNormal),
                |_, xi, s| last = (xi, s),
            );
            let (xi, s_t) = last;
            match spec.kind {
                OptionKind::Call if s_t >= spec.strike => xi,
                OptionKind::Put if s_t < spec.strike => -xi,
                _ => 0.0,
            }
        })
        .collect();
    let (mean, se) = mean_and_std_error(&samples);
    let disc = (-params.r * spec.tau(params)).exp();
    Ok((disc * mean, disc * se))
}

/// How [`replicate`] obtains its hedge ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaMethod {
    ClosedForm,
    /// Nested Monte Carlo at every rebalance node; expensive.
    MonteCarlo { n_paths: usize, n_steps: usize, seed: u64 },
}

/// Holdings along one rebalance grid. Entry `k` is the position held from
/// node `k` to node `k + 1`; the final entry repeats the last position.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgePortfolio {
    pub eta: Vec<f64>,
    pub zeta: Vec<f64>,
    pub value: Vec<f64>,
    pub rebalance_times: TimeGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub portfolio: HedgePortfolio,
    /// Spot observed at each node reached.
    pub spot: Vec<f64>,
    /// `V - h(S)` at maturity, or at the bankruptcy node.
    pub terminal_error: f64,
    pub bankrupt_at: Option<usize>,
}

fn initial_capital(
    params: &ModelParams,
    g: &GFunction,
    spec: &OptionSpec,
    mode: SolutionMode,
    method: &DeltaMethod,
) -> Result<f64> {
    match *method {
        DeltaMethod::ClosedForm => Ok(price_at_t(params, g, spec, params.x, mode)?.value),
        DeltaMethod::MonteCarlo { n_paths, n_steps, seed } => {
            let grid = TimeGrid::new(0.0, params.maturity, n_steps)?;
            let cfg = SimConfig::new(n_paths, grid, seed, Scheme::ExactSolution, mode)?;
            Ok(mc_price(params, g, spec, &cfg, mode)?.value)
        }
    }
}

/// Discrete self-financing replication of `spec` along one asset path.
///
/// Starts from the same-mode premium, rebalances to the model delta at every
/// node of `grid` and lets the bond leg accrue at `e^{rh}` in between. Stops
/// at the first node where the spot is not positive.
pub fn replicate(
    params: &ModelParams,
    g: &GFunction,
    spec: &OptionSpec,
    grid: &TimeGrid,
    path: &[f64],
    mode: SolutionMode,
    method: &DeltaMethod,
) -> Result<Replication> {
    let v0 = initial_capital(params, g, spec, mode, method)?;
    replicate_from(params, g, spec, grid, path, mode, method, v0)
}

#[allow(clippy::too_many_arguments)]
fn replicate_from(
    params: &ModelParams,
    g: &GFunction,
    spec: &OptionSpec,
    grid: &TimeGrid,
    path: &[f64],
    mode: SolutionMode,
    method: &DeltaMethod,
    v0: f64,
) -> Result<Replication> {
    spec.check(params)?;
    if spec.t != 0.0 {
        return Err(Error::domain("replication starts at t = 0"));
    }
    if (grid.t0(), grid.t1()) != (0.0, params.maturity) {
        return Err(Error::Consistency(format!(
            "rebalance grid must span [0, {}]",
            params.maturity
        )));
    }
    if path.len() != grid.n_nodes() {
        return Err(Error::Consistency(format!(
            "path has {} nodes, rebalance grid has {}",
            path.len(),
            grid.n_nodes()
        )));
    }
    if method == &DeltaMethod::ClosedForm && !g.is_exponential() {
        return Err(Error::Unsupported(
            "closed-form hedging needs g(t) = e^{rt}; use Monte Carlo deltas".into(),
        ));
    }

    let n = grid.n_steps();
    let bond = |t: f64| (params.r * t).exp();
    let mut eta = Vec::with_capacity(n + 1);
    let mut zeta = Vec::with_capacity(n + 1);
    let mut value = Vec::with_capacity(n + 1);
    let mut v = v0;

    for k in 0..=n {
        let s = path[k];
        value.push(v);
        if s <= 0.0 || k == n {
            // hold the previous position through the last node
            let (e, z) = match (eta.last(), zeta.last()) {
                (Some(&e), Some(&z)) => (e, z),
                _ => (0.0, v),
            };
            eta.push(e);
            zeta.push(z);
            let bankrupt_at = (s <= 0.0).then_some(k);
            return Ok(Replication {
                portfolio: HedgePortfolio {
                    eta,
                    zeta,
                    value,
                    rebalance_times: *grid,
                },
                spot: path[..=k].to_vec(),
                terminal_error: v - spec.kind.payoff(s, spec.strike),
                bankrupt_at,
            });
        }
        let t = grid.node(k);
        let at = OptionSpec { t, ..*spec };
        let e = match *method {
            DeltaMethod::ClosedForm => delta_closed(params, g, &at, s, mode)?,
            DeltaMethod::MonteCarlo { n_paths, n_steps, seed } => {
                let sub = TimeGrid::new(t, params.maturity, n_steps)?;
                let cfg = SimConfig::new(
                    n_paths,
                    sub,
                    seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
                    Scheme::ExactSolution,
                    mode,
                )?;
                delta_mc(params, g, &at, s, &cfg, mode)?.0
            }
        };
        let z = (v - e * s) / bond(t);
        eta.push(e);
        zeta.push(z);
        v = z * bond(grid.node(k + 1)) + e * path[k + 1];
    }
    unreachable!("loop returns at the final node")
}

/// Summary statistics of terminal hedging errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator; zero for one value).
    pub std: f64,
    pub mean_abs: f64,
    pub q01: f64,
    pub q99: f64,
}

impl ErrorStats {
    pub fn std_error(&self) -> f64 {
        self.std / (self.n as f64).sqrt()
    }
}

/// Mean, standard deviation, mean absolute value and the 1%/99% quantiles
/// (linear interpolation between order statistics).
pub fn hedging_error_stats(errors: &[f64]) -> Result<ErrorStats> {
    if errors.is_empty() {
        return Err(Error::domain("no hedging errors to summarize"));
    }
    let n = errors.len();
    let mean = errors.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mean_abs = errors.iter().map(|e| e.abs()).sum::<f64>() / n as f64;
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(ErrorStats {
        n,
        mean,
        std,
        mean_abs,
        q01: quantile(&sorted, 0.01),
        q99: quantile(&sorted, 0.99),
    })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-path outcome of a hedging backtest.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeRow {
    pub path_id: u64,
    pub terminal_error: f64,
    pub bankrupt_at: Option<usize>,
    pub trajectory: Option<Replication>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedgeReport {
    pub rows: Vec<HedgeRow>,
    pub stats: ErrorStats,
}

impl HedgeReport {
    pub fn n_bankrupt(&self) -> usize {
        self.rows.iter().filter(|r| r.bankrupt_at.is_some()).count()
    }

    /// `path_id,terminal_error,bankrupt_at` rows followed by
    /// `summary,<mean error>,<bankrupt path count>`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "path_id,terminal_error,bankrupt_at")?;
        for r in &self.rows {
            let b = r.bankrupt_at.map(|k| k.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{b}", r.path_id, fmt_sig17(r.terminal_error))?;
        }
        writeln!(out, "summary,{},{}", fmt_sig17(self.stats.mean), self.n_bankrupt())?;
        Ok(())
    }

    /// `path_id,t,S,eta,zeta,V` for every path that kept its trajectory.
    pub fn write_trajectories_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "path_id,t,S,eta,zeta,V")?;
        for r in &self.rows {
            let Some(rep) = &r.trajectory else { continue };
            let pf = &rep.portfolio;
            for k in 0..pf.value.len() {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.path_id,
                    fmt_sig17(pf.rebalance_times.node(k)),
                    fmt_sig17(rep.spot[k]),
                    fmt_sig17(pf.eta[k]),
                    fmt_sig17(pf.zeta[k]),
                    fmt_sig17(pf.value[k]),
                )?;
            }
        }
        Ok(())
    }
}

/// Replicates `spec` along `config.n_paths` closed-form paths simulated in
/// `config.mode`, rebalancing on `config.grid`.
pub fn hedge_backtest(
    params: &ModelParams,
    g: &GFunction,
    spec: &OptionSpec,
    config: &SimConfig,
    method: &DeltaMethod,
    keep_trajectories: bool,
) -> Result<HedgeReport> {
    let mode = config.mode;
    let v0 = initial_capital(params, g, spec, mode, method)?;
    let coeffs = ExactCoeffs::new(params, g, &config.grid, config.mode);
    let rows = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|id| {
            let path = simulate_path_with(params, g, &coeffs, config, id);
            let rep = replicate_from(params, g, spec, &config.grid, &path.s, mode, method, v0)?;
            Ok(HedgeRow {
                path_id: id,
                terminal_error: rep.terminal_error,
                bankrupt_at: rep.bankrupt_at,
                trajectory: keep_trajectories.then_some(rep),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let errors: Vec<f64> = rows.iter().map(|r| r.terminal_error).collect();
    let stats = hedging_error_stats(&errors)?;
    Ok(HedgeReport { rows, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::simulate_path;
    use crate::pricing::price_at_t;

    fn params(beta: f64) -> ModelParams {
        ModelParams::new(100.0, 0.05, 0.2, beta, 1.0).unwrap()
    }

    fn spec(p: &ModelParams, kind: OptionKind, k: f64, t: f64) -> OptionSpec {
        OptionSpec::new(kind, k, t, p).unwrap()
    }

    const EXP: GFunction = GFunction::Exponential;

    #[test]
    fn delta_extremes() {
        let p = params(0.0);
        for mode in [SolutionMode::Paper, SolutionMode::Corrected] {
            let c = spec(&p, OptionKind::Call, 100.0, 0.0);
            assert!((delta_closed(&p, &EXP, &c, 1e4, mode).unwrap() - 1.0).abs() < 1e-9);
            assert!(delta_closed(&p, &EXP, &c, 1.0, mode).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn delta_matches_price_slope() {
        let p = params(1.0);
        for mode in [SolutionMode::Paper, SolutionMode::Corrected] {
            for kind in [OptionKind::Call, OptionKind::Put] {
                let sp = spec(&p, kind, 100.0, 0.0);
                let s = 100.0;
                let h = 1e-4 * s;
                let up = price_at_t(&p, &EXP, &sp, s + h, mode).unwrap().value;
                let dn = price_at_t(&p, &EXP, &sp, s - h, mode).unwrap().value;
                let fd = (up - dn) / (2.0 * h);
                let d = delta_closed(&p, &EXP, &sp, s, mode).unwrap();
                assert!((fd - d).abs() / d.abs() < 1e-6, "{mode} {kind}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn call_put_delta_gap_is_one() {
        let p = params(2.0);
        for t in [0.0, 0.3, 0.9] {
            let c = delta_closed(&p, &EXP, &spec(&p, OptionKind::Call, 105.0, t), 98.0, SolutionMode::Corrected).unwrap();
            let q = delta_closed(&p, &EXP, &spec(&p, OptionKind::Put, 105.0, t), 98.0, SolutionMode::Corrected).unwrap();
            assert_eq!(c - q, 1.0);
            assert!((0.0..=1.0).contains(&c) && (-1.0..=0.0).contains(&q));
        }
    }

    #[test]
    fn delta_rejects_maturity_and_oscillator() {
        let p = params(1.0);
        let late = OptionSpec { kind: OptionKind::Call, strike: 100.0, t: 1.0 };
        assert!(delta_closed(&p, &EXP, &late, 100.0, SolutionMode::Paper).is_err());
        let osc = GFunction::DampedOscillator { a: 1.0, b: 0.5, alpha: 0.1, omega: 1.0 };
        let c = spec(&p, OptionKind::Call, 100.0, 0.0);
        assert!(matches!(
            delta_closed(&p, &osc, &c, 100.0, SolutionMode::Paper),
            Err(Error::Unsupported(_))
        ));
    }

    fn mc_config(n: usize) -> SimConfig {
        SimConfig::new(n, TimeGrid::new(0.0, 1.0, 1).unwrap(), 5, Scheme::ExactSolution, SolutionMode::Corrected).unwrap()
    }

    #[test]
    fn mc_delta_with_vanishing_strike_is_one() {
        let p = params(1.0);
        let c = spec(&p, OptionKind::Call, 1e-12, 0.25);
        let (est, se) = delta_mc(&p, &EXP, &c, 100.0, &mc_config(100_000), SolutionMode::Corrected).unwrap();
        assert!((est - 1.0).abs() < 3.0 * se, "{est} ± {se}");
    }

    #[test]
    fn mc_call_and_put_deltas_differ_by_one() {
        let p = params(1.0);
        for mode in [SolutionMode::Paper, SolutionMode::Corrected] {
            let (c, se_c) = delta_mc(&p, &EXP, &spec(&p, OptionKind::Call, 100.0, 0.5), 101.0, &mc_config(100_000), mode).unwrap();
            let (q, se_q) = delta_mc(&p, &EXP, &spec(&p, OptionKind::Put, 100.0, 0.5), 101.0, &mc_config(100_000), mode).unwrap();
            assert!((c - q - 1.0).abs() < 3.0 * (se_c + se_q), "{c} {q}");
        }
    }

    #[test]
    fn mc_delta_refuses_few_paths() {
        let p = params(1.0);
        let c = spec(&p, OptionKind::Call, 100.0, 0.0);
        assert!(delta_mc(&p, &EXP, &c, 100.0, &mc_config(10), SolutionMode::Paper).is_err());
    }

    #[test]
    fn quasi_deterministic_hedge_is_exact() {
        let p = ModelParams::new(100.0, 0.05, 1e-9, 0.0, 1.0).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 64).unwrap();
        let cfg = SimConfig::new(1, grid, 3, Scheme::ExactSolution, SolutionMode::Corrected).unwrap();
        let path = simulate_path(&p, &EXP, &cfg, 0);
        for k in [90.0, 110.0] {
            for kind in [OptionKind::Call, OptionKind::Put] {
                let rep = replicate(&p, &EXP, &spec(&p, kind, k, 0.0), &grid, &path.s, SolutionMode::Corrected, &DeltaMethod::ClosedForm).unwrap();
                assert!(rep.terminal_error.abs() < 1e-6, "{}", rep.terminal_error);
            }
        }
    }

    #[test]
    fn self_financing_identity_holds() {
        let p = params(1.0);
        let grid = TimeGrid::new(0.0, 1.0, 50).unwrap();
        let cfg = SimConfig::new(1, grid, 9, Scheme::ExactSolution, SolutionMode::Corrected).unwrap();
        let path = simulate_path(&p, &EXP, &cfg, 0);
        let rep = replicate(&p, &EXP, &spec(&p, OptionKind::Call, 100.0, 0.0), &grid, &path.s, SolutionMode::Corrected, &DeltaMethod::ClosedForm).unwrap();
        let pf = &rep.portfolio;
        for k in 0..pf.value.len() {
            let a = (p.r * grid.node(k)).exp();
            let v = pf.zeta[k] * a + pf.eta[k] * rep.spot[k];
            assert!((v - pf.value[k]).abs() <= 1e-10 * pf.value[k].abs().max(1.0));
            assert!((0.0..=1.0).contains(&pf.eta[k]));
        }
    }

    #[test]
    fn replication_stops_at_bankruptcy() {
        let p = params(1.0);
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let path = [100.0, 80.0, -1.0, 5.0, 3.0];
        let rep = replicate(&p, &EXP, &spec(&p, OptionKind::Put, 100.0, 0.0), &grid, &path, SolutionMode::Corrected, &DeltaMethod::ClosedForm).unwrap();
        assert_eq!(rep.bankrupt_at, Some(2));
        assert_eq!(rep.portfolio.value.len(), 3);
        let v = rep.portfolio.value[2];
        assert!((rep.terminal_error - (v - 101.0)).abs() < 1e-12);
    }

    #[test]
    fn replication_rejects_bad_paths() {
        let p = params(1.0);
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let c = spec(&p, OptionKind::Call, 100.0, 0.0);
        assert!(replicate(&p, &EXP, &c, &grid, &[100.0; 3], SolutionMode::Corrected, &DeltaMethod::ClosedForm).is_err());
        let osc = GFunction::DampedOscillator { a: 1.0, b: 0.5, alpha: 0.1, omega: 1.0 };
        assert!(replicate(&p, &osc, &c, &grid, &[100.0; 5], SolutionMode::Corrected, &DeltaMethod::ClosedForm).is_err());
    }

    #[test]
    fn mc_deltas_hedge_oscillator_paths() {
        let p = params(1.0);
        let osc = GFunction::DampedOscillator { a: 1.0, b: 0.5, alpha: 0.1, omega: 2.0 * std::f64::consts::PI };
        let grid = TimeGrid::new(0.0, 1.0, 8).unwrap();
        let cfg = SimConfig::new(1, grid, 21, Scheme::ExactSolution, SolutionMode::Corrected).unwrap();
        let path = simulate_path(&p, &osc, &cfg, 0);
        let method = DeltaMethod::MonteCarlo { n_paths: 20_000, n_steps: 16, seed: 4 };
        let rep = replicate(&p, &osc, &spec(&p, OptionKind::Call, 100.0, 0.0), &grid, &path.s, SolutionMode::Corrected, &method).unwrap();
        assert!(rep.portfolio.eta.iter().all(|e| (0.0..=1.0).contains(e)));
        // eight rebalances on a 20-ish dollar option: error well inside the payoff scale
        assert!(rep.terminal_error.abs() < 5.0, "{}", rep.terminal_error);
    }

    #[test]
    fn stats_known_values() {
        let s = hedging_error_stats(&[0.0; 7]).unwrap();
        assert_eq!((s.mean, s.std, s.mean_abs, s.q01, s.q99), (0.0, 0.0, 0.0, 0.0, 0.0));
        let s = hedging_error_stats(&[2.5]).unwrap();
        assert_eq!((s.mean, s.std), (2.5, 0.0));
        let s = hedging_error_stats(&[-2.0, -1.0, 0.0, 1.0, 2.0]).unwrap();
        assert_eq!(s.mean, 0.0);
        assert!((s.mean_abs - 1.2).abs() < 1e-15);
        assert!((s.std - 2.5f64.sqrt()).abs() < 1e-15);
        assert!((s.q01 - -1.96).abs() < 1e-12);
        assert!((s.q99 - 1.96).abs() < 1e-12);
        assert!(hedging_error_stats(&[]).is_err());
    }

    #[test]
    fn backtest_csv_has_summary() {
        let p = params(1.0);
        let cfg = SimConfig::new(3, TimeGrid::new(0.0, 1.0, 8).unwrap(), 1, Scheme::ExactSolution, SolutionMode::Corrected).unwrap();
        let rep = hedge_backtest(&p, &EXP, &spec(&p, OptionKind::Call, 100.0, 0.0), &cfg, &DeltaMethod::ClosedForm, true).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "path_id,terminal_error,bankrupt_at");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("summary,"));
        let mut traj = Vec::new();
        rep.write_trajectories_csv(&mut traj).unwrap();
        assert_eq!(String::from_utf8(traj).unwrap().lines().count(), 1 + 3 * 9);
    }
}
