use coopfield::analytic::exact_thermo;
use coopfield::model::build_energy_model;
use coopfield::montecarlo::{ensemble_run_mixed, metropolis_run, ChainConfig, InitialState};
use coopfield::special::ln_binomial;
use coopfield::{GameParams, RiskMode};

/// Cooperator-count histogram of a long chain against the exact weights
/// `C(N,m) e^{-βE(m)} / Z`.
#[test]
fn count_histogram_matches_boltzmann_weights() {
    let n = 8;
    let beta = 1.0;
    let p = GameParams::new(n, 1.0, 0.5, 1.0).unwrap();
    let model = build_energy_model(&p, beta, RiskMode::MeanFieldClosedForm).unwrap();
    let ln_z = exact_thermo(&model, beta).unwrap().log_partition;
    let sweeps = 1_000_000u64;
    let mut cfg = ChainConfig::with_steps((sweeps + sweeps / 10) * n as u64).seed(31);
    cfg.burn_in = sweeps / 10 * n as u64;
    cfg.keep_trace = true;
    let run = metropolis_run(&model, beta, &cfg).unwrap();
    let trace = run.trace.unwrap();
    assert_eq!(trace.len() as u64, sweeps);
    let mut counts = vec![0u64; n + 1];
    for &m in &trace {
        counts[m as usize] += 1;
    }
    // samples one sweep apart are correlated; widen by the integrated time
    let inflation = (2.0 * run.tau_int).max(1.0);
    for (m, &h) in counts.iter().enumerate() {
        let prob = (ln_binomial::<f64>(n, m) - beta * model.energy(m).unwrap() - ln_z).exp();
        let expected = prob * sweeps as f64;
        let sigma = (expected * (1.0 - prob) * inflation).sqrt();
        assert!(
            (h as f64 - expected).abs() < 4.0 * sigma,
            "m={m}: {h} vs {expected:.1} ± {sigma:.1}"
        );
    }
}

#[test]
fn coexisting_states_are_flagged() {
    // the density condition has low- and high-density maxima here; chains
    // started from the two pure profiles stay in their basins
    let p = GameParams::new(1024, 1.0, 0.665, 1.0).unwrap();
    let model = build_energy_model(&p, 3.0, RiskMode::MeanFieldClosedForm).unwrap();
    let cfg = ChainConfig::with_steps(400_000)
        .seed(9)
        .initial_state(InitialState::AllDefect);
    let e = ensemble_run_mixed(&model, 3.0, &cfg, 16).unwrap();
    assert!(e.bimodal, "{:?}", e.replica_means);
}
