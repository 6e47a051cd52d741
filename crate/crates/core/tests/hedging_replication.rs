//! Discrete replication behaviour over many paths.

use crisis_options::hedging::{delta_closed, delta_mc, hedge_backtest, DeltaMethod};
use crisis_options::*;

fn mean_abs_error(p: &ModelParams, mode: SolutionMode, steps: usize, seed: u64) -> f64 {
    let spec = OptionSpec::new(OptionKind::Call, 100.0, 0.0, p).unwrap();
    let grid = TimeGrid::new(0.0, p.maturity, steps).unwrap();
    let cfg = SimConfig::new(10_000, grid, seed, Scheme::ExactSolution, mode).unwrap();
    hedge_backtest(p, &GFunction::Exponential, &spec, &cfg, &DeltaMethod::ClosedForm, false)
        .unwrap()
        .stats
        .mean_abs
}

#[test]
fn error_scales_like_inverse_root_of_rebalances() {
    let p = ModelParams::new(100.0, 0.05, 0.2, 0.0, 1.0).unwrap();
    let errors: Vec<f64> = (4..=10).map(|k| mean_abs_error(&p, SolutionMode::Corrected, 1 << k, 17)).collect();
    for pair in errors.windows(2) {
        let ratio = pair[1] / pair[0];
        assert!((0.6..0.8).contains(&ratio), "{errors:?}");
    }
    let slope = (errors[6] / errors[0]).log2() / 6.0;
    assert!((-0.55..-0.45).contains(&slope), "slope {slope}");
}

#[test]
fn refinement_never_hurts_in_either_mode() {
    let p = ModelParams::new(100.0, 0.05, 0.2, 1.0, 1.0).unwrap();
    for mode in [SolutionMode::Paper, SolutionMode::Corrected] {
        let mut previous = f64::INFINITY;
        for steps in [16, 32, 64, 128, 256] {
            let e = mean_abs_error(&p, mode, steps, 23);
            assert!(e < previous, "{mode} at {steps}: {e} >= {previous}");
            previous = e;
        }
    }
}

#[test]
fn mc_put_deltas_match_closed_form() {
    let p = ModelParams::new(100.0, 0.05, 0.3, 2.0, 1.0).unwrap();
    let grid = TimeGrid::new(0.0, 1.0, 1).unwrap();
    for (mode, spot, t) in [(SolutionMode::Corrected, 90.0, 0.2), (SolutionMode::Paper, 115.0, 0.6)] {
        let spec = OptionSpec::new(OptionKind::Put, 100.0, t, &p).unwrap();
        let cfg = SimConfig::new(400_000, grid, 5, Scheme::ExactSolution, mode).unwrap();
        let (est, se) = delta_mc(&p, &GFunction::Exponential, &spec, spot, &cfg, mode).unwrap();
        let exact = delta_closed(&p, &GFunction::Exponential, &spec, spot, mode).unwrap();
        assert!((est - exact).abs() <= 3.0 * se, "{mode}: {est} ± {se} vs {exact}");
        assert!((-1.0..=0.0).contains(&exact));
    }
}
