//! Single-flip Metropolis sampling of strategy profiles.
//!
//! Proposals pick a player uniformly and flip its strategy. Because the
//! energy depends on the cooperator count only, the energy change of a flip
//! is `E(M ± 1) - E(M)`, evaluated in O(1).
//!
//! Streams are `ChaCha8` seeded from a 64-bit seed; replica `i` of an
//! ensemble uses [`split_seed`]`(seed, i)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::autocorr::integrated_autocorrelation;
use crate::model::{check_beta, Configuration, EnergyModel};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    AllDefect,
    AllCooperate,
    /// Independent fair coin per player, drawn from the chain's own stream.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    /// Total single-flip proposals, burn-in included.
    pub steps: u64,
    /// Leading proposals discarded before recording.
    pub burn_in: u64,
    /// Record every `thinning` proposals; `None` means one sweep (`N`).
    pub thinning: Option<u64>,
    pub seed: u64,
    pub initial_state: InitialState,
    /// Keep the recorded cooperator counts in the result.
    pub keep_trace: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self::with_steps(10_000_000)
    }
}

impl ChainConfig {
    /// `steps` proposals with the default 10% burn-in.
    pub fn with_steps(steps: u64) -> Self {
        Self {
            steps,
            burn_in: steps / 10,
            thinning: None,
            seed: 0,
            initial_state: InitialState::Random,
            keep_trace: false,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn initial_state(mut self, state: InitialState) -> Self {
        self.initial_state = state;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.steps {
            return Err(Error::Chain(format!(
                "burn_in ({}) must be smaller than steps ({})",
                self.burn_in, self.steps
            )));
        }
        if self.thinning == Some(0) {
            return Err(Error::Chain("thinning must be at least 1".into()));
        }
        Ok(())
    }

    fn thinning_for(&self, n: usize) -> u64 {
        self.thinning.unwrap_or(n as u64).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult<T> {
    pub mean_density: T,
    pub density_variance: T,
    /// Integrated autocorrelation time in recorded samples.
    pub tau_int: T,
    pub stderr: T,
    pub n_samples: usize,
    pub n_effective: T,
    pub acceptance_rate: T,
    /// The recorded densities were constant.
    pub degenerate_trace: bool,
    pub trace: Option<Vec<u32>>,
}

/// Deterministic 64-bit stream splitter (SplitMix64 finalizer).
pub fn split_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn metropolis_run<T: Scalar>(
    model: &EnergyModel<T>,
    beta: T,
    cfg: &ChainConfig,
) -> Result<ChainResult<T>> {
    metropolis_from(model, beta, cfg, None).map(|(r, _)| r)
}

/// Runs one chain, optionally from an explicit starting profile (used to
/// anneal across a temperature grid), and returns the final profile.
pub fn metropolis_from<T: Scalar>(
    model: &EnergyModel<T>,
    beta: T,
    cfg: &ChainConfig,
    start: Option<Configuration>,
) -> Result<(ChainResult<T>, Configuration)> {
    check_beta(beta)?;
    cfg.validate()?;
    let n = model.n_players();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut config = match start {
        Some(c) if c.len() != n => {
            return Err(Error::Chain(format!(
                "start configuration has {} players, model has {n}",
                c.len()
            )))
        }
        Some(c) => c,
        None => match cfg.initial_state {
            InitialState::AllDefect => Configuration::all_defect(n),
            InitialState::AllCooperate => Configuration::all_cooperate(n),
            InitialState::Random => {
                Configuration::new((0..n).map(|_| rng.random::<bool>()).collect())
            }
        },
    };

    let thin = cfg.thinning_for(n);
    let mut trace: Vec<u32> = Vec::with_capacity(((cfg.steps - cfg.burn_in) / thin) as usize);
    let mut accepted: u64 = 0;
    let mut energy = model.energy_at(config.cooperators());
    for step in 0..cfg.steps {
        let k = rng.random_range(0..n);
        let m = config.cooperators();
        let to_cooperate = !config.is_cooperator(k);
        let delta = model.flip_delta(m, to_cooperate);
        let accept = delta <= T::zero() || T::of(rng.random::<f64>()) < (-beta * delta).exp();
        if accept {
            config.flip(k);
            accepted += 1;
            energy = energy + delta;
            if cfg!(debug_assertions) && step % 100 == 0 {
                let full = model.energy_at(config.cooperators());
                let tol = T::of(1e-10) * (T::one() + full.abs());
                debug_assert!((full - energy).abs() <= tol, "flip energy drifted");
                energy = full;
            }
        }
        if step >= cfg.burn_in && (step - cfg.burn_in + 1).is_multiple_of(thin) {
            trace.push(config.cooperators() as u32);
        }
    }

    let nf = T::of_usize(n);
    let samples = trace.len();
    if samples == 0 {
        return Err(Error::Chain("no samples recorded after burn-in".into()));
    }
    let count = T::of_usize(samples);
    let densities: Vec<T> = trace.iter().map(|&m| T::of_usize(m as usize) / nf).collect();
    let mean = densities.iter().fold(T::zero(), |a, &d| a + d) / count;
    let variance = densities
        .iter()
        .fold(T::zero(), |a, &d| a + (d - mean) * (d - mean))
        / count;
    let est = integrated_autocorrelation(&densities).map_err(|_| {
        Error::Chain(format!(
            "only {samples} samples recorded; at least {} are needed for error bars",
            crate::autocorr::MIN_TRACE_LEN
        ))
    })?;
    let tau = T::of(est.tau_int);
    let two = T::of(2.0);
    let result = ChainResult {
        mean_density: mean,
        density_variance: variance,
        tau_int: tau,
        stderr: (variance * two * tau / count).sqrt(),
        n_samples: samples,
        n_effective: count / (two * tau),
        acceptance_rate: T::of(accepted as f64 / cfg.steps as f64),
        degenerate_trace: est.degenerate,
        trace: cfg.keep_trace.then_some(trace),
    };
    Ok((result, config))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult<T> {
    /// Pooled summary; `stderr` comes from the spread of replica means.
    pub pooled: ChainResult<T>,
    pub replica_means: Vec<T>,
    /// Replica means form two histogram modes more than 0.5 apart.
    pub bimodal: bool,
}

/// `replicas` independent chains seeded with `split_seed(cfg.seed, i)`.
pub fn ensemble_run<T: Scalar>(
    model: &EnergyModel<T>,
    beta: T,
    cfg: &ChainConfig,
    replicas: usize,
) -> Result<EnsembleResult<T>> {
    run_replicas(model, beta, cfg, replicas, |_| cfg.initial_state)
}

/// Like [`ensemble_run`], alternating all-cooperate (even replicas) and
/// all-defect (odd replicas) starting profiles.
pub fn ensemble_run_mixed<T: Scalar>(
    model: &EnergyModel<T>,
    beta: T,
    cfg: &ChainConfig,
    replicas: usize,
) -> Result<EnsembleResult<T>> {
    run_replicas(model, beta, cfg, replicas, |i| {
        if i % 2 == 0 {
            InitialState::AllCooperate
        } else {
            InitialState::AllDefect
        }
    })
}

fn run_replicas<T: Scalar>(
    model: &EnergyModel<T>,
    beta: T,
    cfg: &ChainConfig,
    replicas: usize,
    start: impl Fn(usize) -> InitialState + Sync,
) -> Result<EnsembleResult<T>> {
    if replicas < 1 {
        return Err(Error::param("replicas", "must be at least 1", replicas));
    }
    let results: Vec<ChainResult<T>> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let replica_cfg = ChainConfig {
                seed: split_seed(cfg.seed, i as u64),
                initial_state: start(i),
                ..cfg.clone()
            };
            metropolis_run(model, beta, &replica_cfg)
        })
        .collect::<Result<_>>()?;
    let replica_means: Vec<T> = results.iter().map(|r| r.mean_density).collect();
    let bimodal = is_bimodal(&replica_means);
    if replicas == 1 {
        let pooled = results.into_iter().next().expect("one replica");
        return Ok(EnsembleResult {
            pooled,
            replica_means,
            bimodal,
        });
    }
    let r = T::of_usize(replicas);
    let avg = |f: &dyn Fn(&ChainResult<T>) -> T| results.iter().fold(T::zero(), |a, x| a + f(x)) / r;
    let mean = avg(&|x| x.mean_density);
    let between = replica_means
        .iter()
        .fold(T::zero(), |a, &m| a + (m - mean) * (m - mean))
        / (r - T::one());
    let pooled = ChainResult {
        mean_density: mean,
        density_variance: avg(&|x| x.density_variance),
        tau_int: avg(&|x| x.tau_int),
        stderr: (between / r).sqrt(),
        n_samples: results.iter().map(|x| x.n_samples).sum(),
        n_effective: results.iter().fold(T::zero(), |a, x| a + x.n_effective),
        acceptance_rate: avg(&|x| x.acceptance_rate),
        degenerate_trace: results.iter().all(|x| x.degenerate_trace),
        trace: None,
    };
    Ok(EnsembleResult {
        pooled,
        replica_means,
        bimodal,
    })
}

/// Two local maxima of a ten-bin histogram on `[0, 1]` more than 0.5 apart.
pub fn is_bimodal<T: Scalar>(means: &[T]) -> bool {
    const BINS: usize = 10;
    let mut counts = [0usize; BINS];
    for m in means {
        let x = m.to_f64_lossy().clamp(0.0, 1.0);
        counts[((x * BINS as f64) as usize).min(BINS - 1)] += 1;
    }
    let modes: Vec<usize> = (0..BINS)
        .filter(|&i| {
            let left = if i > 0 { counts[i - 1] } else { 0 };
            let right = if i + 1 < BINS { counts[i + 1] } else { 0 };
            counts[i] > 0 && counts[i] >= left && counts[i] >= right
        })
        .collect();
    match (modes.first(), modes.last()) {
        (Some(&lo), Some(&hi)) => (hi - lo) as f64 / BINS as f64 > 0.5,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{exact_thermo, pg_mean_density};
    use crate::model::{build_energy_model, GameParams, RiskMode};

    fn model(n: usize, b: f64, c: f64, g: f64, beta: f64) -> EnergyModel<f64> {
        let p = GameParams::new(n, b, c, g).unwrap();
        let mode = if g == 0.0 {
            RiskMode::Bare
        } else {
            RiskMode::MeanFieldClosedForm
        };
        build_energy_model(&p, beta, mode).unwrap()
    }

    #[test]
    fn infinite_temperature_accepts_everything() {
        let m = model(64, 1.0, 0.5, 1.0, 0.0);
        let r = metropolis_run(&m, 0.0, &ChainConfig::with_steps(200_000).seed(1)).unwrap();
        assert_eq!(r.acceptance_rate, 1.0);
        assert!((r.mean_density - 0.5).abs() < 3.0 * r.stderr, "{r:?}");
        assert!(r.n_effective <= r.n_samples as f64);
        let expected = (r.density_variance * 2.0 * r.tau_int / r.n_samples as f64).sqrt();
        assert!((r.stderr - expected).abs() < 1e-15);
    }

    #[test]
    fn unpunished_chain_matches_closed_form() {
        let (n, beta) = (1024, 1.0);
        let m = model(n, 1.0, 0.3, 0.0, beta);
        let cfg = ChainConfig::with_steps(2_000_000).seed(7);
        let r = metropolis_run(&m, beta, &cfg).unwrap();
        let p = GameParams::new(n, 1.0, 0.3, 0.0).unwrap();
        let nbar = pg_mean_density(&p, beta).unwrap();
        assert!((r.mean_density - nbar).abs() < 3.0 * r.stderr, "{} vs {nbar}", r.mean_density);
    }

    #[test]
    fn punished_chain_matches_exact() {
        let beta = 1.0;
        let m = model(64, 1.0, 0.5, 1.0, beta);
        let cfg = ChainConfig::with_steps(2_000_000).seed(3);
        let r = metropolis_run(&m, beta, &cfg).unwrap();
        let exact = exact_thermo(&m, beta).unwrap().mean_density;
        assert!((r.mean_density - exact).abs() < 3.0 * r.stderr, "{} vs {exact}", r.mean_density);
    }

    #[test]
    fn equal_seeds_reproduce_traces() {
        let m = model(32, 1.0, 0.6, 0.5, 1.5);
        let mut cfg = ChainConfig::with_steps(100_000).seed(99);
        cfg.keep_trace = true;
        let a = metropolis_run(&m, 1.5, &cfg).unwrap();
        let b = metropolis_run(&m, 1.5, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.trace.is_some());
        let c = metropolis_run(&m, 1.5, &cfg.clone().seed(100)).unwrap();
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn config_errors() {
        let m = model(8, 1.0, 0.5, 0.0, 1.0);
        let mut cfg = ChainConfig::with_steps(1000);
        cfg.burn_in = 1000;
        assert!(matches!(metropolis_run(&m, 1.0, &cfg), Err(Error::Chain(_))));
        cfg.burn_in = 0;
        cfg.thinning = Some(0);
        assert!(metropolis_run(&m, 1.0, &cfg).is_err());
        let cfg = ChainConfig::with_steps(1000);
        let start = Configuration::all_defect(5);
        assert!(metropolis_from(&m, 1.0, &cfg, Some(start)).is_err());
    }

    #[test]
    fn single_replica_is_plain_chain() {
        let m = model(16, 1.0, 0.5, 1.0, 1.0);
        let cfg = ChainConfig::with_steps(50_000).seed(42);
        let e = ensemble_run(&m, 1.0, &cfg, 1).unwrap();
        let direct = metropolis_run(&m, 1.0, &cfg.clone().seed(split_seed(42, 0))).unwrap();
        assert_eq!(e.pooled, direct);
        assert!(ensemble_run(&m, 1.0, &cfg, 0).is_err());
    }

    #[test]
    fn ensemble_at_infinite_temperature() {
        let m = model(64, 1.0, 0.5, 1.0, 0.0);
        let e = ensemble_run(&m, 0.0, &ChainConfig::with_steps(50_000).seed(5), 8).unwrap();
        assert!((e.pooled.mean_density - 0.5).abs() < 3.0 * e.pooled.stderr);
        assert!(!e.bimodal);
    }

    #[test]
    fn stderr_scales_with_replicas() {
        let m = model(64, 1.0, 0.5, 1.0, 0.2);
        let cfg = ChainConfig::with_steps(64_000).seed(8);
        // average over independent ensembles to tame the noise of a single estimate
        let mean_stderr = |replicas: usize| {
            (0..6u64)
                .map(|s| {
                    let cfg = cfg.clone().seed(1000 * s + replicas as u64);
                    ensemble_run(&m, 0.2, &cfg, replicas).unwrap().pooled.stderr
                })
                .sum::<f64>()
                / 6.0
        };
        let (s4, s16) = (mean_stderr(4), mean_stderr(16));
        let ratio = s4 / s16;
        assert!((ratio - 2.0).abs() < 0.25 * 2.0, "ratio {ratio}");
    }

    #[test]
    fn bimodality_detection() {
        assert!(is_bimodal(&[0.02, 0.03, 0.97, 0.99]));
        assert!(!is_bimodal(&[0.4, 0.45, 0.5, 0.52]));
        assert!(!is_bimodal::<f64>(&[]));
    }

    #[test]
    fn split_seed_is_stable() {
        assert_eq!(split_seed(0, 0), split_seed(0, 0));
        assert_ne!(split_seed(0, 0), split_seed(0, 1));
        assert_ne!(split_seed(1, 0), split_seed(0, 0));
    }
}
