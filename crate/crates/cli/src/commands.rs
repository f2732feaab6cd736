//! Subcommand implementations.

use std::collections::BTreeSet;
use std::io::Write;

use coopfield::analytic::{crossing_beta, exact_thermo, pg_mean_density};
use coopfield::experiments::{
    beta_sweep, find_crossing, fit_decay, transition_gap, uniform_grid, variance_curve, Solver,
    SweepRecord,
};
use coopfield::fit::{fit_decay_points, Beta0Grid, FitResult};
use coopfield::model::build_energy_model;
use coopfield::montecarlo::{split_seed, ChainConfig};
use coopfield::oracle::{enumerate_pair_correlation, enumerate_thermo};
use coopfield::series::{density_series, density_upper_bound, series_log_partition};
use coopfield::{GameParams, RiskMode, SeriesParams};

use crate::config::{Format, Plan};
use crate::error::{CliError, CliResult};
use crate::records::{emit_gap_table, emit_records, format_real, read_table, GapRow, Table};

pub const DEFAULT_CROSSING_WINDOW: (f64, f64) = (0.05, 6.0);
pub const DEFAULT_FIT_WINDOW: (f64, f64) = (2.3, 4.5);

pub fn sweep(plan: &Plan, out: &mut dyn Write) -> CliResult<()> {
    let records = beta_sweep(&plan.params, &plan.betas, &plan.solvers, plan.mode, &plan.chain)?;
    emit_records(&records, plan.format, out)
}

fn single_solver(plan: &Plan) -> CliResult<Solver> {
    match plan.solvers.as_slice() {
        [s] => Ok(*s),
        _ => Err(CliError::Usage("this command takes exactly one solver".into())),
    }
}

pub fn crossing(plan: &Plan, out: &mut dyn Write) -> CliResult<()> {
    let solver = single_solver(plan)?;
    let window = plan.window.unwrap_or(DEFAULT_CROSSING_WINDOW);
    let p = &plan.params;
    let beta = find_crossing(p, window, solver, plan.mode)?;
    let closed = crossing_beta(p.benefit(), p.cost())?;
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::io("writing CSV", e);
    w.write_record(["b", "c", "gamma", "n", "mode", "solver", "beta_cross", "beta_closed_form"])
        .map_err(io)?;
    w.write_record([
        format_real(p.benefit()),
        format_real(p.cost()),
        format_real(p.punishment()),
        p.n_players().to_string(),
        plan.mode.tag().to_string(),
        solver.tag().to_string(),
        format_real(beta),
        format_real(closed),
    ])
    .map_err(io)?;
    w.flush().map_err(|e| CliError::io("writing CSV", e))
}

pub fn gap_rows(p_low: &GameParams, c_high: f64, betas: &[f64], mode: RiskMode) -> CliResult<Vec<GapRow>> {
    let p_high = p_low.with_cost(c_high)?;
    betas
        .iter()
        .map(|&beta| {
            let density = |p: &GameParams| -> CliResult<f64> {
                let model = build_energy_model(p, beta, mode)?;
                Ok(exact_thermo(&model, beta)?.mean_density)
            };
            Ok(GapRow {
                beta,
                b: p_low.benefit(),
                gamma: p_low.punishment(),
                n: p_low.n_players(),
                mode,
                c_low: p_low.cost(),
                c_high,
                density_low: density(p_low)?,
                density_high: density(&p_high)?,
                gap: transition_gap(p_low, &p_high, beta, mode)?,
            })
        })
        .collect()
}

pub fn transition(plan: &Plan, out: &mut dyn Write) -> CliResult<()> {
    let c_high = plan
        .c_high
        .ok_or_else(|| CliError::Usage("transition needs `c-high`".into()))?;
    let rows = gap_rows(&plan.params, c_high, &plan.betas, plan.mode)?;
    emit_gap_table(&rows, plan.format, out)
}

pub fn variance(plan: &Plan, out: &mut dyn Write, log: &mut dyn Write) -> CliResult<()> {
    let solver = single_solver(plan)?;
    let curve = variance_curve(&plan.params, &plan.betas, solver, plan.mode, &plan.chain)?;
    report_peak(curve.peak_beta, curve.peak_variance, curve.boundary_warning, log)?;
    let records = beta_sweep(&plan.params, &plan.betas, &[solver], plan.mode, &plan.chain)?;
    emit_records(&records, plan.format, out)
}

fn report_peak(beta: f64, var: f64, boundary: bool, log: &mut dyn Write) -> CliResult<()> {
    writeln!(log, "variance peak: beta = {}, variance = {}", format_real(beta), format_real(var))
        .map_err(|e| CliError::io("writing log", e))?;
    if boundary {
        writeln!(log, "warning: variance peak lies on the grid boundary")
            .map_err(|e| CliError::io("writing log", e))?;
    }
    Ok(())
}

/// Points of a previously emitted table for the decay fit. Sweep files are
/// narrowed by any explicitly given `solver`, `mode`, `c` and `gamma` and
/// must then hold a single curve; gap tables contribute their high-cost
/// branch.
pub fn fit_points(table: &Table, plan: &Plan) -> CliResult<Vec<(f64, f64)>> {
    match table {
        Table::Gap(rows) => Ok(rows.iter().map(|r| (r.beta, r.density_high)).collect()),
        Table::Sweep(records) => {
            let given = |k: &str| plan.explicit.contains(k);
            let kept: Vec<&SweepRecord<f64>> = records
                .iter()
                .filter(|r| !given("solver") || plan.solvers.contains(&r.solver))
                .filter(|r| !given("mode") || r.mode.tag() == plan.mode.tag())
                .filter(|r| !given("c") || r.c == plan.params.cost())
                .filter(|r| !given("gamma") || r.gamma == plan.params.punishment())
                .collect();
            let curves: BTreeSet<String> = kept
                .iter()
                .map(|r| {
                    format!(
                        "solver={} mode={} c={} gamma={} b={} n={}",
                        r.solver,
                        r.mode.tag(),
                        format_real(r.c),
                        format_real(r.gamma),
                        format_real(r.b),
                        r.n
                    )
                })
                .collect();
            if curves.len() > 1 {
                return Err(CliError::Usage(format!(
                    "input holds {} curves; select one with --solver/--mode/--c/--gamma: {}",
                    curves.len(),
                    curves.into_iter().collect::<Vec<_>>().join("; ")
                )));
            }
            Ok(kept
                .iter()
                .filter(|r| r.error.is_none())
                .map(|r| (r.beta, r.mean_density))
                .collect())
        }
    }
}

pub fn write_fit(fit: &FitResult, out: &mut dyn Write) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::io("writing CSV", e);
    w.write_record([
        "beta0",
        "omega1",
        "omega2",
        "constant",
        "residual_rms",
        "window_lo",
        "window_hi",
        "n_points",
    ])
    .map_err(io)?;
    w.write_record([
        format_real(fit.beta0),
        format_real(fit.omega1),
        format_real(fit.omega2),
        format_real(fit.constant),
        format_real(fit.residual_rms),
        format_real(fit.fit_window.0),
        format_real(fit.fit_window.1),
        fit.n_points.to_string(),
    ])
    .map_err(io)?;
    w.flush().map_err(|e| CliError::io("writing CSV", e))
}

pub fn fit(input: &str, plan: &Plan, out: &mut dyn Write) -> CliResult<()> {
    let table = read_table(input)?;
    let points = fit_points(&table, plan)?;
    let window = plan.window.unwrap_or(DEFAULT_FIT_WINDOW);
    let fit = fit_decay_points(&points, window, &Beta0Grid::default())?;
    write_fit(&fit, out)
}

/// Deterministic uniform numbers on `[0, 1)` for the check grid.
struct Draws {
    seed: u64,
    index: u64,
}

impl Draws {
    fn next(&mut self) -> f64 {
        self.index += 1;
        (split_seed(self.seed, self.index) >> 11) as f64 / (1u64 << 53) as f64
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next()
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) || a == b
}

/// Cross-solver invariant suite; prints one line per check.
pub fn oracle_check(seed: u64, out: &mut dyn Write) -> CliResult<()> {
    let mut draws = Draws { seed, index: 0 };
    let mut results: Vec<(&str, bool, String)> = Vec::new();

    let mut worst = 0.0f64;
    let mut ok = true;
    for i in 0..40 {
        let n = 2 + (draws.next() * 11.0) as usize;
        let b = draws.range(0.0, 2.0);
        let c = draws.range(0.0, 2.0);
        let gamma = [0.0, 0.5, 1.0][i % 3];
        let beta = draws.range(0.0, 5.0);
        let mode = if i % 2 == 0 {
            RiskMode::MeanFieldClosedForm
        } else {
            RiskMode::self_consistent()
        };
        let p = GameParams::new(n, b, c, gamma)?;
        let brute = enumerate_thermo(&p, beta, mode)?;
        let exact = exact_thermo(&build_energy_model(&p, beta, mode)?, beta)?;
        for (x, y) in [
            (brute.log_partition, exact.log_partition),
            (brute.mean_density, exact.mean_density),
            (brute.density_variance, exact.density_variance),
        ] {
            ok &= close(x, y, 1e-10);
            worst = worst.max((x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE));
        }
    }
    results.push(("enumeration-vs-degeneracy-sum", ok, format!("max relative deviation {worst:.2e}")));

    let mut worst = 0.0f64;
    for _ in 0..10 {
        let p = GameParams::new(8, draws.range(0.0, 2.0), draws.range(0.0, 2.0), 0.0)?;
        let beta = draws.range(0.0, 5.0);
        let v = enumerate_pair_correlation(&p, beta, RiskMode::Bare, 0, 5)?;
        worst = worst.max(v.abs());
    }
    results.push(("unpunished-pair-correlation", worst < 1e-12, format!("max |corr| {worst:.2e}")));

    let mut worst = 0.0f64;
    for &c in &[0.3, 0.5, 0.75] {
        for &beta in &[0.0, 0.5, 1.0, 2.0, 5.0] {
            let p = GameParams::new(1024, 1.0, c, 0.0)?;
            let exact = exact_thermo(&build_energy_model(&p, beta, RiskMode::Bare)?, beta)?;
            let nbar = pg_mean_density(&p, beta)?;
            worst = worst.max((exact.mean_density - nbar).abs() / nbar);
        }
    }
    results.push(("unpunished-closed-form", worst < 1e-10, format!("max relative deviation {worst:.2e}")));

    let p = GameParams::new(8, 1.0, 0.5, 1.0)?;
    let sp = SeriesParams::default();
    let mut worst = 0.0f64;
    let mut bound_ok = true;
    for beta in uniform_grid(0.05, 0.5, 0.05)? {
        let model = build_energy_model(&p, beta, RiskMode::MeanFieldClosedForm)?;
        let exact = exact_thermo(&model, beta)?;
        let ln_z = series_log_partition(&model, beta, &sp)?;
        let density = density_series(&model, beta, &sp)?;
        worst = worst
            .max((ln_z / exact.log_partition - 1.0).abs())
            .max((density / exact.mean_density - 1.0).abs());
        let bound = density_upper_bound(beta * model.alpha1(), beta * model.alpha2(), 8, &sp)?;
        bound_ok &= bound >= density;
    }
    results.push(("series-vs-degeneracy-sum", worst < 1e-6, format!("max relative deviation {worst:.2e}")));
    results.push(("series-density-bound", bound_ok, String::new()));

    let beta_star = crossing_beta(1.0, 0.75)?;
    results.push((
        "crossing-closed-form",
        (beta_star - 2f64.ln() / 0.5).abs() < 1e-12,
        format!("beta* = {}", format_real(beta_star)),
    ));

    let mut failed = 0;
    for (name, pass, detail) in &results {
        failed += usize::from(!pass);
        writeln!(out, "{} {name} {detail}", if *pass { "PASS" } else { "FAIL" })
            .map_err(|e| CliError::io("writing report", e))?;
    }
    if failed > 0 {
        Err(CliError::Check(format!("{failed} of {} checks failed", results.len())))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    F2a,
    F2b,
    F3a,
    F3b,
    F4,
}

#[derive(Debug, Clone)]
pub struct FigureOptions {
    pub mode: RiskMode,
    /// Adds a Monte Carlo overlay with this chain configuration.
    pub mc: Option<ChainConfig>,
    pub format: Format,
}

fn punished_mode(mode: RiskMode, gamma: f64) -> RiskMode {
    // bare closure is only defined without punishment
    if mode == RiskMode::Bare && gamma > 0.0 {
        RiskMode::MeanFieldClosedForm
    } else {
        mode
    }
}

fn figure_sweeps(
    costs: &[f64],
    gammas: &[f64],
    betas: &[f64],
    opts: &FigureOptions,
) -> CliResult<Vec<SweepRecord<f64>>> {
    let mut solvers = vec![Solver::Exact];
    let chain = opts.mc.clone().unwrap_or_default();
    if opts.mc.is_some() {
        solvers.push(Solver::Mc);
    }
    let mut out = Vec::new();
    for &c in costs {
        for &gamma in gammas {
            let p = GameParams::new(1024, 1.0, c, gamma)?;
            out.extend(beta_sweep(&p, betas, &solvers, punished_mode(opts.mode, gamma), &chain)?);
        }
    }
    Ok(out)
}

/// Canned parameter sets (`N = 1024`, `b = 1`).
pub fn figure(which: Figure, opts: &FigureOptions, out: &mut dyn Write, log: &mut dyn Write) -> CliResult<()> {
    match which {
        Figure::F2a => {
            let betas = uniform_grid(0.0, 5.0, 0.05)?;
            let records = figure_sweeps(&[0.3, 0.5], &[0.0, 0.5, 1.0], &betas, opts)?;
            emit_records(&records, opts.format, out)
        }
        Figure::F2b => {
            let betas = uniform_grid(0.0, 5.0, 0.05)?;
            let records = figure_sweeps(&[0.75], &[0.0, 1.0], &betas, opts)?;
            emit_records(&records, opts.format, out)
        }
        Figure::F3a => {
            if opts.mc.is_some() {
                return Err(CliError::Usage("figure 3a has no Monte Carlo overlay".into()));
            }
            let betas = uniform_grid(0.0, 6.0, 0.05)?;
            let p = GameParams::new(1024, 1.0, 0.664, 1.0)?;
            let rows = gap_rows(&p, 0.665, &betas, punished_mode(opts.mode, 1.0))?;
            emit_gap_table(&rows, opts.format, out)
        }
        Figure::F3b => {
            let betas = uniform_grid(2.0, 6.0, 0.01)?;
            let records = figure_sweeps(&[0.665], &[1.0], &betas, opts)?;
            let exact: Vec<_> = records.iter().filter(|r| r.solver == Solver::Exact).cloned().collect();
            match fit_decay(&exact, DEFAULT_FIT_WINDOW) {
                Ok(f) => writeln!(
                    log,
                    "decay fit on [{}, {}]: beta0 = {}, omega1 = {}, omega2 = {}, rms = {}",
                    f.fit_window.0,
                    f.fit_window.1,
                    format_real(f.beta0),
                    format_real(f.omega1),
                    format_real(f.omega2),
                    format_real(f.residual_rms)
                ),
                Err(e) => writeln!(log, "decay fit failed: {e}"),
            }
            .map_err(|e| CliError::io("writing log", e))?;
            emit_records(&records, opts.format, out)
        }
        Figure::F4 => {
            let betas = uniform_grid(0.5, 5.0, 0.01)?;
            let p = GameParams::new(1024, 1.0, 0.665, 1.0)?;
            let mode = punished_mode(opts.mode, 1.0);
            let curve = variance_curve(&p, &betas, Solver::Exact, mode, &ChainConfig::default())?;
            report_peak(curve.peak_beta, curve.peak_variance, curve.boundary_warning, log)?;
            let records = figure_sweeps(&[0.665], &[1.0], &betas, opts)?;
            emit_records(&records, opts.format, out)
        }
    }
}
