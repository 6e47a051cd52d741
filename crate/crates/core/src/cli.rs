//! `crisisopt` command-line front end.
//!
//! Flags can be preset in a flat `key = value` file passed with
//! `--config FILE`; keys are the long flag names and explicit flags win.
//! Exit codes: 0 success, 1 domain error, 2 usage error.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::hedging::{delta_closed, delta_mc, hedge_backtest, DeltaMethod};
use crate::model::{validate_params, GFunction, ModelParams, TimeGrid};
use crate::output::{fmt_opt, fmt_sig17, write_header_comment};
use crate::paths::{beta_max, price_bounds, simulate, Scheme, SimConfig, SolutionMode};
use crate::pricing::{mc_price, price_at_t, OptionKind, OptionSpec, PriceMethod, PriceQuote};

#[derive(Debug, Parser)]
#[command(name = "crisisopt", version, about = "Price and hedge European options under crisis volatility")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Option price (closed form for g = exp, or Monte Carlo).
    Price(MethodArgs),
    /// Hedge ratio at (t, spot).
    Delta(MethodArgs),
    /// Simulate paths and write `t,path_id,xi,s`.
    Paths(PathsArgs),
    /// Three-sigma price band at time t.
    Bounds(CommonArgs),
    /// Largest beta keeping prices positive with three-sigma confidence.
    Betamax(CommonArgs),
    /// Discrete delta-hedging backtest.
    Hedgesim(HedgeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Initial price level x
    #[arg(long, allow_negative_numbers = true, default_value_t = 100.0)]
    pub x: f64,
    /// Risk-free rate per year
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.05)]
    pub r: f64,
    /// Base volatility per sqrt(year)
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.2)]
    pub sigma: f64,
    /// Crisis coupling beta
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    pub beta: f64,
    /// Maturity in years
    #[arg(long = "T", allow_negative_numbers = true, default_value_t = 1.0)]
    pub maturity: f64,
    /// Strike
    #[arg(long = "K", allow_negative_numbers = true, default_value_t = 100.0)]
    pub strike: f64,
    /// Valuation time in years
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    pub t: f64,
    /// Observed spot at time t [default: x]
    #[arg(long, allow_negative_numbers = true)]
    pub spot: Option<f64>,
    /// Option kind
    #[arg(long, default_value = "call", value_parser = ["call", "put"])]
    pub kind: String,
    /// Solution mode
    #[arg(long, default_value = "corrected", value_parser = ["paper", "corrected"])]
    pub mode: String,
    /// Coupling function: exp = e^{rt}, osc = A + B e^{alpha t} sin(omega t)
    #[arg(long, default_value = "exp", value_parser = ["exp", "osc"])]
    pub g: String,
    /// Oscillator level A
    #[arg(long = "A", allow_negative_numbers = true, default_value_t = 1.0)]
    pub a: f64,
    /// Oscillator amplitude B
    #[arg(long = "B", allow_negative_numbers = true, default_value_t = 0.5)]
    pub b: f64,
    /// Oscillator growth rate alpha
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.1)]
    pub alpha: f64,
    /// Oscillator angular frequency omega
    #[arg(long, allow_negative_numbers = true, default_value_t = std::f64::consts::TAU)]
    pub omega: f64,
    /// Number of simulated paths
    #[arg(long, allow_negative_numbers = true, default_value_t = 10_000)]
    pub paths: usize,
    /// Time steps per path
    #[arg(long, default_value_t = 256)]
    pub steps: usize,
    /// RNG seed; required by every simulating command [default: none]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Reject beta above beta_max
    #[arg(long, default_value_t = false)]
    pub enforce_positivity: bool,
    /// CSV output file [default: none]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat key = value file supplying defaults [default: none]
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Closed form or Monte Carlo
    #[arg(long, default_value = "closed", value_parser = ["closed", "mc"])]
    pub method: String,
}

#[derive(Debug, Clone, Args)]
pub struct PathsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Simulation scheme
    #[arg(long, default_value = "exact", value_parser = ["exact", "euler"])]
    pub scheme: String,
}

#[derive(Debug, Clone, Args)]
pub struct HedgeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Delta source: closed form (g = exp only) or nested Monte Carlo
    #[arg(long, default_value = "closed", value_parser = ["closed", "mc"])]
    pub method: String,
    /// Paths per nested Monte Carlo delta
    #[arg(long, default_value_t = 2_000)]
    pub delta_paths: usize,
    /// Optional trajectory dump `path_id,t,S,eta,zeta,V` [default: none]
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

impl CommonArgs {
    fn params(&self) -> Result<ModelParams> {
        validate_params(
            ModelParams {
                x: self.x,
                r: self.r,
                sigma: self.sigma,
                beta: self.beta,
                maturity: self.maturity,
            },
            self.enforce_positivity,
        )
    }

    fn g(&self) -> GFunction {
        match self.g.as_str() {
            "osc" => GFunction::DampedOscillator {
                a: self.a,
                b: self.b,
                alpha: self.alpha,
                omega: self.omega,
            },
            _ => GFunction::Exponential,
        }
    }

    fn kind(&self) -> OptionKind {
        self.kind.parse().expect("validated by clap")
    }

    fn mode(&self) -> SolutionMode {
        self.mode.parse().expect("validated by clap")
    }

    fn spec(&self, params: &ModelParams) -> Result<OptionSpec> {
        OptionSpec::new(self.kind(), self.strike, self.t, params)
    }

    fn spot(&self) -> f64 {
        self.spot.unwrap_or(self.x)
    }

    fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::domain("--seed is required for simulation commands"))
    }

    fn sim(&self, scheme: Scheme) -> Result<SimConfig> {
        let grid = TimeGrid::new(0.0, self.maturity, self.steps)?;
        SimConfig::new(self.paths, grid, self.seed()?, scheme, self.mode())
    }

    /// Effective configuration, echoed into CSV headers.
    fn entries(&self) -> Vec<(String, String)> {
        let opt = |v: Option<String>| v.unwrap_or_default();
        vec![
            ("x".into(), self.x.to_string()),
            ("r".into(), self.r.to_string()),
            ("sigma".into(), self.sigma.to_string()),
            ("beta".into(), self.beta.to_string()),
            ("T".into(), self.maturity.to_string()),
            ("K".into(), self.strike.to_string()),
            ("t".into(), self.t.to_string()),
            ("spot".into(), self.spot().to_string()),
            ("kind".into(), self.kind.clone()),
            ("mode".into(), self.mode.clone()),
            ("g".into(), self.g.clone()),
            ("A".into(), self.a.to_string()),
            ("B".into(), self.b.to_string()),
            ("alpha".into(), self.alpha.to_string()),
            ("omega".into(), self.omega.to_string()),
            ("paths".into(), self.paths.to_string()),
            ("steps".into(), self.steps.to_string()),
            ("seed".into(), opt(self.seed.map(|s| s.to_string()))),
            ("enforce-positivity".into(), self.enforce_positivity.to_string()),
        ]
    }
}

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Domain(Error::Io(e))
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Results go to `stdout`, diagnostics to stderr.
pub fn run(args: Vec<String>, stdout: &mut dyn Write) -> i32 {
    let cli = match parse(args) {
        Ok(cli) => cli,
        Err(ParseOutcome::Clap(e)) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
        Err(ParseOutcome::Config(msg)) => {
            eprintln!("error[usage]: {msg}");
            return 2;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error[usage]: {msg}");
            2
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error[domain]: {}", e.to_string().replace('\n', " "));
            1
        }
    }
}

enum ParseOutcome {
    Clap(clap::Error),
    Config(String),
}

fn parse(args: Vec<String>) -> std::result::Result<Cli, ParseOutcome> {
    let mut cmd = Cli::command();
    if let Some(path) = config_path(&args) {
        let entries = read_config(Path::new(&path)).map_err(ParseOutcome::Config)?;
        cmd = apply_config(cmd, &entries).map_err(ParseOutcome::Config)?;
    }
    let matches = cmd.try_get_matches_from(args).map_err(ParseOutcome::Clap)?;
    Cli::from_arg_matches(&matches).map_err(ParseOutcome::Clap)
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn read_config(path: &Path) -> std::result::Result<BTreeMap<String, String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> std::result::Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", i + 1))?;
        let k = k.trim().trim_start_matches("--");
        if k == "config" {
            return Err(format!("config line {}: nested config files are not supported", i + 1));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn apply_config(
    mut cmd: clap::Command,
    entries: &BTreeMap<String, String>,
) -> std::result::Result<clap::Command, String> {
    let names: Vec<String> = cmd
        .get_subcommands()
        .map(|s| s.get_name().to_string())
        .collect();
    for key in entries.keys() {
        let known = cmd
            .get_subcommands()
            .any(|s| s.get_arguments().any(|a| a.get_long() == Some(key.as_str())));
        if !known {
            return Err(format!("unknown config key '{key}'"));
        }
    }
    for name in names {
        cmd = cmd.mut_subcommand(name, |mut sub| {
            for (key, value) in entries {
                let id = sub
                    .get_arguments()
                    .find(|a| a.get_long() == Some(key.as_str()))
                    .map(|a| a.get_id().clone());
                if let Some(id) = id {
                    let value = value.clone();
                    sub = sub.mut_arg(id, move |a| a.default_value(value));
                }
            }
            sub
        });
    }
    Ok(cmd)
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    match cli.command {
        Command::Price(a) => cmd_price(&a, stdout),
        Command::Delta(a) => cmd_delta(&a, stdout),
        Command::Paths(a) => cmd_paths(&a, stdout),
        Command::Bounds(a) => cmd_bounds(&a, stdout),
        Command::Betamax(a) => cmd_betamax(&a, stdout),
        Command::Hedgesim(a) => cmd_hedgesim(&a, stdout),
    }
}

fn create(path: &Path) -> std::result::Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path)?))
}

fn with_csv(
    common: &CommonArgs,
    extra: &[(&str, &str)],
    body: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> std::result::Result<(), Failure> {
    if let Some(path) = &common.out {
        let mut w = create(path)?;
        let mut entries = common.entries();
        entries.extend(extra.iter().map(|(k, v)| (k.to_string(), v.to_string())));
        write_header_comment(&mut w, &entries)?;
        body(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn method_of(s: &str) -> PriceMethod {
    s.parse().expect("validated by clap")
}

fn cmd_price(a: &MethodArgs, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    let c = &a.common;
    let params = c.params()?;
    let g = c.g();
    let spec = c.spec(&params)?;
    let quote = match method_of(&a.method) {
        PriceMethod::ClosedForm => price_at_t(&params, &g, &spec, c.spot(), c.mode())?,
        PriceMethod::MonteCarlo => mc_price(&params, &g, &spec, &c.sim(Scheme::ExactSolution)?, c.mode())?,
    };
    writeln!(
        stdout,
        "kind={} mode={} method={} t={} K={} value={} d1={} d2={} effective_strike={} std_error={}",
        spec.kind,
        c.mode(),
        quote.method,
        spec.t,
        spec.strike,
        quote.value,
        show(quote.d1),
        show(quote.d2),
        show(quote.effective_strike),
        show(quote.std_error)
    )?;
    with_csv(c, &[("method", &a.method)], |w| {
        writeln!(w, "{}", PriceQuote::CSV_HEADER)?;
        writeln!(w, "{}", quote.csv_row())?;
        Ok(())
    })
}

fn show(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into())
}

fn cmd_delta(a: &MethodArgs, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    let c = &a.common;
    let params = c.params()?;
    let g = c.g();
    let spec = c.spec(&params)?;
    let (delta, se) = match method_of(&a.method) {
        PriceMethod::ClosedForm => (delta_closed(&params, &g, &spec, c.spot(), c.mode())?, None),
        PriceMethod::MonteCarlo => {
            let cfg = c.sim(Scheme::ExactSolution)?;
            let (d, se) = delta_mc(&params, &g, &spec, c.spot(), &cfg, c.mode())?;
            (d, Some(se))
        }
    };
    writeln!(
        stdout,
        "kind={} mode={} method={} t={} K={} spot={} delta={} std_error={}",
        spec.kind,
        c.mode(),
        a.method,
        spec.t,
        spec.strike,
        c.spot(),
        delta,
        show(se)
    )?;
    with_csv(c, &[("method", &a.method)], |w| {
        writeln!(w, "kind,mode,method,t,K,spot,delta,std_error")?;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            spec.kind,
            c.mode(),
            a.method,
            fmt_sig17(spec.t),
            fmt_sig17(spec.strike),
            fmt_sig17(c.spot()),
            fmt_sig17(delta),
            fmt_opt(se)
        )?;
        Ok(())
    })
}

fn cmd_paths(a: &PathsArgs, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    let c = &a.common;
    let params = c.params()?;
    let scheme: Scheme = a.scheme.parse().map_err(Failure::Usage)?;
    let cfg = c.sim(scheme)?;
    let set = simulate(&params, &c.g(), &cfg)?;
    let n = set.n_paths();
    let mean_st = (0..n).map(|p| *set.s_row(p).last().unwrap()).sum::<f64>() / n as f64;
    let bankrupt = (0..n).filter(|&p| set.bankrupt_at(p).is_some()).count();
    let summary = format!(
        "paths={n} steps={} scheme={scheme} mode={} mean_S_T={mean_st} bankrupt={bankrupt}",
        cfg.grid.n_steps(),
        cfg.mode
    );
    if c.out.is_some() {
        with_csv(c, &[("scheme", &a.scheme)], |w| set.write_csv(w))?;
        writeln!(stdout, "{summary}")?;
    } else {
        set.write_csv(&mut *stdout)?;
        eprintln!("{summary}");
    }
    Ok(())
}

fn cmd_bounds(c: &CommonArgs, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    let params = c.params()?;
    let (lo, hi) = price_bounds(&params, c.t)?;
    writeln!(stdout, "t={} lower={lo} upper={hi}", c.t)?;
    with_csv(c, &[], |w| {
        writeln!(w, "t,lower,upper")?;
        writeln!(w, "{},{},{}", fmt_sig17(c.t), fmt_sig17(lo), fmt_sig17(hi))?;
        Ok(())
    })
}

fn cmd_betamax(c: &CommonArgs, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    let params = c.params()?;
    let b = beta_max(&params);
    writeln!(stdout, "beta_max={b}")?;
    with_csv(c, &[], |w| {
        writeln!(w, "x,sigma,T,beta_max")?;
        writeln!(
            w,
            "{},{},{},{}",
            fmt_sig17(c.x),
            fmt_sig17(c.sigma),
            fmt_sig17(c.maturity),
            fmt_sig17(b)
        )?;
        Ok(())
    })
}

fn cmd_hedgesim(a: &HedgeArgs, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    let c = &a.common;
    let params = c.params()?;
    let g = c.g();
    if c.t != 0.0 {
        return Err(Error::domain("hedgesim replicates from t = 0").into());
    }
    let spec = c.spec(&params)?;
    let cfg = c.sim(Scheme::ExactSolution)?;
    let method = match method_of(&a.method) {
        PriceMethod::ClosedForm => DeltaMethod::ClosedForm,
        PriceMethod::MonteCarlo => DeltaMethod::MonteCarlo {
            n_paths: a.delta_paths,
            n_steps: c.steps,
            seed: cfg.seed ^ 0x5DEE_CE66_D1CE_5EED,
        },
    };
    let report = hedge_backtest(&params, &g, &spec, &cfg, &method, a.trajectory.is_some())?;
    let s = report.stats;
    let delta_paths = a.delta_paths.to_string();
    let extra = [("method", a.method.as_str()), ("delta-paths", delta_paths.as_str())];
    if c.out.is_some() {
        with_csv(c, &extra, |w| report.write_csv(w))?;
    } else {
        report.write_csv(&mut *stdout)?;
    }
    if let Some(path) = &a.trajectory {
        let mut w = create(path)?;
        let mut entries = c.entries();
        entries.extend(extra.iter().map(|(k, v)| (k.to_string(), v.to_string())));
        write_header_comment(&mut w, &entries)?;
        report.write_trajectories_csv(&mut w)?;
        w.flush()?;
    }
    let summary = format!(
        "paths={} steps={} mean={} std={} std_error={} mean_abs={} q01={} q99={} bankrupt={}",
        s.n,
        c.steps,
        s.mean,
        s.std,
        s.std_error(),
        s.mean_abs,
        s.q01,
        s.q99,
        report.n_bankrupt()
    );
    if c.out.is_some() {
        writeln!(stdout, "{summary}")?;
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}
