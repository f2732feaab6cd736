//! Density sweeps, crossing detection, transition gaps, variance curves and
//! the decay fit.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::analytic::{digamma_density, exact_thermo};
use crate::fit::{fit_decay_points, Beta0Grid, FitResult};
use crate::model::{build_energy_model, closed_form_density, Configuration, GameParams, RiskMode};
use crate::montecarlo::{metropolis_from, split_seed, ChainConfig};
use crate::series::{density_series, series_density_at, SeriesParams};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Solver {
    Mc,
    Exact,
    Series,
    Digamma,
}

impl Solver {
    pub const ALL: [Solver; 4] = [Solver::Mc, Solver::Exact, Solver::Series, Solver::Digamma];

    pub fn tag(&self) -> &'static str {
        match self {
            Solver::Mc => "mc",
            Solver::Exact => "exact",
            Solver::Series => "series",
            Solver::Digamma => "digamma",
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Solver::ALL
            .into_iter()
            .find(|v| v.tag() == s)
            .ok_or_else(|| Error::param("solver", "must be one of mc, exact, series, digamma", s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord<T> {
    pub beta: T,
    pub b: T,
    pub c: T,
    pub gamma: T,
    pub n: usize,
    pub solver: Solver,
    pub mode: RiskMode,
    pub mean_density: T,
    pub density_variance: T,
    /// Monte Carlo only.
    pub stderr: Option<T>,
    /// Monte Carlo only.
    pub tau_int: Option<T>,
    /// Set when the solver failed at this point; the observables are NaN.
    pub error: Option<String>,
}

impl<T: Scalar> SweepRecord<T> {
    fn new(p: &GameParams<T>, beta: T, solver: Solver, mode: RiskMode) -> Self {
        Self {
            beta,
            b: p.benefit(),
            c: p.cost(),
            gamma: p.punishment(),
            n: p.n_players(),
            solver,
            mode,
            mean_density: T::nan(),
            density_variance: T::nan(),
            stderr: None,
            tau_int: None,
            error: None,
        }
    }

    fn failed(mut self, e: &Error) -> Self {
        self.error = Some(e.to_string());
        self
    }
}

fn check_grid<T: Scalar>(betas: &[T]) -> Result<()> {
    if betas.is_empty() {
        return Err(Error::param("betas", "grid must be non-empty", "[]"));
    }
    if let Some(b) = betas.iter().find(|b| !(**b >= T::zero()) || !b.is_finite()) {
        return Err(Error::param("betas", "must be finite and non-negative", b));
    }
    if betas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("betas", "grid must be sorted ascending", "unsorted grid"));
    }
    Ok(())
}

/// Step used for the series variance, `Var(n) = (1/N) ∂⟨n⟩/∂x`.
const SERIES_DX: f64 = 1e-4;

fn deterministic_point<T: Scalar>(
    p: &GameParams<T>,
    beta: T,
    solver: Solver,
    mode: RiskMode,
    sp: &SeriesParams,
) -> Result<(T, T)> {
    let model = build_energy_model(p, beta, mode)?;
    match solver {
        Solver::Exact => {
            let t = exact_thermo(&model, beta)?;
            Ok((t.mean_density, t.density_variance))
        }
        Solver::Series => {
            let density = density_series(&model, beta, sp)?;
            let x = beta * model.alpha1();
            let y = beta * model.alpha2();
            let n = model.n_players();
            let h = T::of(SERIES_DX);
            let up = series_density_at(x + h, y, n, sp)?;
            let down = series_density_at(x - h, y, n, sp)?;
            Ok((density, (up - down) / (T::of(2.0) * h * T::of_usize(n))))
        }
        Solver::Digamma => digamma_density(&model, beta),
        Solver::Mc => unreachable!("sampled separately"),
    }
}

/// Annealed chain across the grid: each point starts from the previous
/// point's final profile and uses the seed `split_seed(cfg.seed, i)`.
fn mc_sweep<T: Scalar>(
    p: &GameParams<T>,
    betas: &[T],
    mode: RiskMode,
    cfg: &ChainConfig,
) -> Vec<SweepRecord<T>> {
    let mut state: Option<Configuration> = None;
    betas
        .iter()
        .enumerate()
        .map(|(i, &beta)| {
            let record = SweepRecord::new(p, beta, Solver::Mc, mode);
            let point_cfg = ChainConfig {
                seed: split_seed(cfg.seed, i as u64),
                ..cfg.clone()
            };
            let run = build_energy_model(p, beta, mode)
                .and_then(|model| metropolis_from(&model, beta, &point_cfg, state.clone()));
            match run {
                Ok((r, last)) => {
                    state = Some(last);
                    SweepRecord {
                        mean_density: r.mean_density,
                        density_variance: r.density_variance,
                        stderr: Some(r.stderr),
                        tau_int: Some(r.tau_int),
                        ..record
                    }
                }
                Err(e) => record.failed(&e),
            }
        })
        .collect()
}

/// Evaluates every requested solver at every grid point.
///
/// Failures are recorded per point and do not stop the sweep. The output is
/// sorted by solver, then by `β`.
pub fn beta_sweep<T: Scalar>(
    p: &GameParams<T>,
    betas: &[T],
    solvers: &[Solver],
    mode: RiskMode,
    cfg: &ChainConfig,
) -> Result<Vec<SweepRecord<T>>> {
    check_grid(betas)?;
    if solvers.is_empty() {
        return Err(Error::param("solvers", "at least one solver is required", "[]"));
    }
    if solvers.contains(&Solver::Mc) {
        cfg.validate()?;
    }
    let mut solvers = solvers.to_vec();
    solvers.sort();
    solvers.dedup();
    let sp = SeriesParams::default();
    let tasks: Vec<(Solver, T)> = solvers
        .iter()
        .filter(|&&s| s != Solver::Mc)
        .flat_map(|&s| betas.iter().map(move |&b| (s, b)))
        .collect();
    let (mc, mut records) = rayon::join(
        || {
            if solvers.contains(&Solver::Mc) {
                mc_sweep(p, betas, mode, cfg)
            } else {
                Vec::new()
            }
        },
        || {
            tasks
                .par_iter()
                .map(|&(solver, beta)| {
                    let record = SweepRecord::new(p, beta, solver, mode);
                    match deterministic_point(p, beta, solver, mode, &sp) {
                        Ok((mean, var)) => SweepRecord {
                            mean_density: mean,
                            density_variance: var,
                            ..record
                        },
                        Err(e) => record.failed(&e),
                    }
                })
                .collect::<Vec<_>>()
        },
    );
    records.extend(mc);
    records.sort_by(|a, b| {
        a.solver
            .cmp(&b.solver)
            .then(a.beta.partial_cmp(&b.beta).expect("finite grid"))
    });
    Ok(records)
}

fn point_density<T: Scalar>(p: &GameParams<T>, beta: T, solver: Solver, mode: RiskMode) -> Result<T> {
    match solver {
        Solver::Exact | Solver::Digamma => {
            Ok(deterministic_point(p, beta, solver, mode, &SeriesParams::default())?.0)
        }
        other => Err(Error::Mode(format!(
            "solver `{other}` is not supported here; use exact or digamma"
        ))),
    }
}

/// Subintervals scanned for the first sign change in [`find_crossing`].
const CROSSING_SCAN: usize = 64;

/// `β` where the punished density meets the unpunished closed form.
///
/// The window is scanned for the first sign change of
/// `⟨n⟩_γ(β) - n̄(β)`, which is then bisected to `1e-10`.
pub fn find_crossing<T: Scalar>(
    p: &GameParams<T>,
    window: (T, T),
    solver: Solver,
    mode: RiskMode,
) -> Result<T> {
    let two = T::of(2.0);
    if !(two * p.cost() > p.benefit()) {
        return Err(Error::Domain(format!(
            "a crossing requires 2c > b (b = {}, c = {})",
            p.benefit(),
            p.cost()
        )));
    }
    let (lo, hi) = window;
    if !(lo >= T::zero() && lo < hi && hi.is_finite()) {
        return Err(Error::param("window", "must satisfy 0 <= lo < hi", format!("[{lo}, {hi}]")));
    }
    let bare = p.with_punishment(T::zero())?;
    let gap = |beta: T| -> Result<T> {
        Ok(point_density(p, beta, solver, mode)? - closed_form_density(&bare, beta))
    };
    let mut a = lo;
    let mut ga = gap(a)?;
    for i in 1..=CROSSING_SCAN {
        let b = lo + (hi - lo) * T::of_usize(i) / T::of_usize(CROSSING_SCAN);
        let gb = gap(b)?;
        if ga == T::zero() && a > T::zero() {
            return Ok(a);
        }
        if ga != T::zero() && (ga < T::zero()) != (gb < T::zero()) {
            let (mut x0, mut x1, mut g0) = (a, b, ga);
            let tol = T::of(1e-10);
            while x1 - x0 > tol {
                let mid = (x0 + x1) / two;
                let gm = gap(mid)?;
                if gm == T::zero() {
                    return Ok(mid);
                }
                if (gm < T::zero()) == (g0 < T::zero()) {
                    x0 = mid;
                    g0 = gm;
                } else {
                    x1 = mid;
                }
                if mid == x0 && mid == x1 {
                    break;
                }
            }
            return Ok((x0 + x1) / two);
        }
        a = b;
        ga = gb;
    }
    Err(Error::NotFound(format!(
        "no crossing of the punished and unpunished densities in [{lo}, {hi}]"
    )))
}

/// `Λ_c(β) = ⟨n⟩(c₀) - ⟨n⟩(c₁)` on the exact solver.
pub fn transition_gap<T: Scalar>(
    p_low: &GameParams<T>,
    p_high: &GameParams<T>,
    beta: T,
    mode: RiskMode,
) -> Result<T> {
    if p_low.n_players() != p_high.n_players()
        || p_low.benefit() != p_high.benefit()
        || p_low.punishment() != p_high.punishment()
    {
        return Err(Error::param(
            "p_high",
            "must differ from p_low only in cost",
            format!(
                "N {}/{}, b {}/{}, gamma {}/{}",
                p_low.n_players(),
                p_high.n_players(),
                p_low.benefit(),
                p_high.benefit(),
                p_low.punishment(),
                p_high.punishment()
            ),
        ));
    }
    if p_low.cost() > p_high.cost() {
        return Err(Error::param(
            "p_high",
            "cost must not be below the low-cost parameters",
            format!("{} < {}", p_high.cost(), p_low.cost()),
        ));
    }
    if p_low.cost() == p_high.cost() {
        return Ok(T::zero());
    }
    let low = point_density(p_low, beta, Solver::Exact, mode)?;
    let high = point_density(p_high, beta, Solver::Exact, mode)?;
    Ok(low - high)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceCurve<T> {
    pub points: Vec<(T, T)>,
    /// Vertex of the parabola through the maximal sample and its neighbours.
    pub peak_beta: T,
    pub peak_variance: T,
    /// The maximal sample sits on the grid boundary; the peak is that sample.
    pub boundary_warning: bool,
}

/// Density variance along the grid with a three-point peak estimate.
pub fn variance_curve<T: Scalar>(
    p: &GameParams<T>,
    betas: &[T],
    solver: Solver,
    mode: RiskMode,
    cfg: &ChainConfig,
) -> Result<VarianceCurve<T>> {
    let records = beta_sweep(p, betas, &[solver], mode, cfg)?;
    let points: Vec<(T, T)> = records.iter().map(|r| (r.beta, r.density_variance)).collect();
    let (imax, _) = points
        .iter()
        .enumerate()
        .filter(|(_, (_, v))| v.is_finite())
        .fold(None::<(usize, T)>, |best, (i, &(_, v))| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((i, v)),
        })
        .ok_or_else(|| Error::Numerical("no finite variance on the grid".into()))?;
    let interior = imax > 0
        && imax + 1 < points.len()
        && points[imax - 1].1.is_finite()
        && points[imax + 1].1.is_finite();
    let (peak_beta, peak_variance) = if interior {
        parabola_vertex(points[imax - 1], points[imax], points[imax + 1])
    } else {
        points[imax]
    };
    Ok(VarianceCurve {
        points,
        peak_beta,
        peak_variance,
        boundary_warning: !interior,
    })
}

fn parabola_vertex<T: Scalar>(a: (T, T), b: (T, T), c: (T, T)) -> (T, T) {
    let (x0, y0) = a;
    let (x1, y1) = b;
    let (x2, y2) = c;
    let d1 = x1 - x0;
    let d2 = x1 - x2;
    let num = d1 * d1 * (y1 - y2) - d2 * d2 * (y1 - y0);
    let den = d1 * (y1 - y2) - d2 * (y1 - y0);
    if den == T::zero() {
        return b;
    }
    let x = x1 - T::of(0.5) * num / den;
    // evaluate the interpolating parabola (Lagrange form) at its vertex
    let l0 = (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2));
    let l1 = (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2));
    let l2 = (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1));
    (x, y0 * l0 + y1 * l1 + y2 * l2)
}

/// Decay-law fit on the successful records inside `window`.
pub fn fit_decay<T: Scalar>(records: &[SweepRecord<T>], window: (T, T)) -> Result<FitResult> {
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| (r.beta.to_f64_lossy(), r.mean_density.to_f64_lossy()))
        .collect();
    fit_decay_points(
        &points,
        (window.0.to_f64_lossy(), window.1.to_f64_lossy()),
        &Beta0Grid::default(),
    )
}

/// `lo, lo+step, …` up to `hi` inclusive (with a small tolerance).
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::param(
            "grid",
            "needs lo <= hi and step > 0",
            format!("{lo}:{hi}:{step}"),
        ));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + i as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{crossing_beta, pg_mean_density};
    use approx::assert_relative_eq;

    fn params(n: usize, b: f64, c: f64, g: f64) -> GameParams<f64> {
        GameParams::new(n, b, c, g).unwrap()
    }

    #[test]
    fn unpunished_exact_sweep_is_closed_form() {
        let p = params(1024, 1.0, 0.75, 0.0);
        let betas = uniform_grid(0.0, 5.0, 0.25).unwrap();
        let rec = beta_sweep(&p, &betas, &[Solver::Exact], RiskMode::Bare, &ChainConfig::default()).unwrap();
        assert_eq!(rec.len(), betas.len());
        for r in &rec {
            let nbar = pg_mean_density(&p, r.beta).unwrap();
            assert_relative_eq!(r.mean_density, nbar, max_relative = 1e-10);
            assert!(r.stderr.is_none());
        }
    }

    #[test]
    fn symmetric_point() {
        let betas = uniform_grid(0.5, 5.0, 0.5).unwrap();
        let flat = beta_sweep(&params(1024, 1.0, 0.5, 0.0), &betas, &[Solver::Exact], RiskMode::Bare, &ChainConfig::default()).unwrap();
        let punished = beta_sweep(
            &params(1024, 1.0, 0.5, 1.0),
            &betas,
            &[Solver::Exact],
            RiskMode::MeanFieldClosedForm,
            &ChainConfig::default(),
        )
        .unwrap();
        for (f, q) in flat.iter().zip(&punished) {
            assert!((f.mean_density - 0.5).abs() < 2e-3);
            assert!(q.mean_density > 0.5);
        }
    }

    #[test]
    fn sweep_records_failures_and_sorts() {
        let p = params(64, 1.0, 0.7, 0.0);
        let betas = [0.5, 1.0, 2.0];
        let rec = beta_sweep(
            &p,
            &betas,
            &[Solver::Digamma, Solver::Exact, Solver::Mc],
            RiskMode::Bare,
            &ChainConfig::with_steps(20_000),
        )
        .unwrap();
        assert_eq!(rec.len(), 9);
        assert!(rec.windows(2).all(|w| (w[0].solver, w[0].beta) <= (w[1].solver, w[1].beta)));
        assert!(rec.iter().filter(|r| r.solver == Solver::Mc).all(|r| r.stderr.is_some()));
        // thinning of one sweep leaves fewer than the required samples
        let rec = beta_sweep(&p, &betas, &[Solver::Mc], RiskMode::Bare, &ChainConfig::with_steps(1_000)).unwrap();
        assert!(rec.iter().all(|r| r.error.is_some() && r.mean_density.is_nan()));
        assert!(beta_sweep(&p, &[1.0, 0.5], &[Solver::Exact], RiskMode::Bare, &ChainConfig::default()).is_err());
        assert!(beta_sweep(&p, &[], &[Solver::Exact], RiskMode::Bare, &ChainConfig::default()).is_err());
    }

    #[test]
    fn series_variance_matches_exact_in_convergent_regime() {
        let p = params(8, 1.0, 0.5, 1.0);
        let betas = [0.1, 0.3, 0.5];
        let mode = RiskMode::MeanFieldClosedForm;
        let rec = beta_sweep(&p, &betas, &[Solver::Exact, Solver::Series], mode, &ChainConfig::default()).unwrap();
        let (exact, series) = rec.split_at(3);
        for (e, s) in exact.iter().zip(series) {
            assert_relative_eq!(e.mean_density, s.mean_density, max_relative = 1e-6);
            assert_relative_eq!(e.density_variance, s.density_variance, max_relative = 1e-5);
        }
    }

    #[test]
    fn crossing_near_closed_form_value() {
        let p = params(1024, 1.0, 0.75, 1.0);
        let beta = find_crossing(&p, (0.2, 4.0), Solver::Exact, RiskMode::MeanFieldClosedForm).unwrap();
        assert!((beta - crossing_beta(1.0, 0.75).unwrap()).abs() < 0.05, "{beta}");
        let model = build_energy_model(&p, beta, RiskMode::MeanFieldClosedForm).unwrap();
        let punished = exact_thermo(&model, beta).unwrap().mean_density;
        let bare = closed_form_density(&p.with_punishment(0.0).unwrap(), beta);
        assert!((punished - bare).abs() < 1e-6);
    }

    #[test]
    fn crossing_preconditions() {
        let p = params(1024, 1.0, 0.45, 1.0);
        assert!(matches!(
            find_crossing(&p, (0.1, 5.0), Solver::Exact, RiskMode::default()),
            Err(Error::Domain(_))
        ));
        let p = params(1024, 1.0, 0.75, 1.0);
        assert!(matches!(
            find_crossing(&p, (3.0, 5.0), Solver::Exact, RiskMode::default()),
            Err(Error::NotFound(_))
        ));
        assert!(find_crossing(&p, (0.2, 4.0), Solver::Mc, RiskMode::default()).is_err());
    }

    #[test]
    fn moderate_cost_has_no_exact_crossing() {
        // the punished density stays far above its unpunished counterpart
        let p = params(1024, 1.0, 0.6, 1.0);
        assert!(matches!(
            find_crossing(&p, (0.2, 6.0), Solver::Exact, RiskMode::MeanFieldClosedForm),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn gap_edge_cases() {
        let lo = params(1024, 1.0, 0.664, 1.0);
        let hi = params(1024, 1.0, 0.665, 1.0);
        let mode = RiskMode::MeanFieldClosedForm;
        assert_eq!(transition_gap(&lo, &lo, 3.0, mode).unwrap(), 0.0);
        assert!(transition_gap(&lo, &hi, 0.0, mode).unwrap().abs() < 1e-12);
        assert!(transition_gap(&hi, &lo, 1.0, mode).is_err());
        assert!(transition_gap(&lo, &params(1024, 1.0, 0.665, 0.5), 1.0, mode).is_err());
        for beta in [1.0, 2.0, 3.0, 6.0] {
            assert!(transition_gap(&lo, &hi, beta, mode).unwrap() >= 0.0);
        }
    }

    #[test]
    fn unpunished_variance_peak() {
        // Var = n̄(1-n̄)/N, maximal where β(Δ-μ) = 0, i.e. only at β = 0 for a
        // fixed sign of the drive; the sample maximum is at the left boundary
        let p = params(256, 1.0, 0.3, 0.0);
        let betas = uniform_grid(0.0, 3.0, 0.1).unwrap();
        let curve = variance_curve(&p, &betas, Solver::Exact, RiskMode::Bare, &ChainConfig::default()).unwrap();
        assert!(curve.boundary_warning);
        for &(beta, v) in &curve.points {
            let nbar = pg_mean_density(&p, beta).unwrap();
            assert_relative_eq!(v, nbar * (1.0 - nbar) / 256.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn parabola_vertex_is_exact_for_quadratics() {
        let f = |x: f64| 3.0 - 2.0 * (x - 1.3) * (x - 1.3);
        let (x, y) = parabola_vertex((1.0, f(1.0)), (1.2, f(1.2)), (1.5, f(1.5)));
        assert_relative_eq!(x, 1.3, epsilon = 1e-12);
        assert_relative_eq!(y, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn solver_tags_round_trip() {
        for s in Solver::ALL {
            assert_eq!(s.tag().parse::<Solver>().unwrap(), s);
        }
        assert!("nope".parse::<Solver>().is_err());
    }
}
