//! Game parameters, strategy profiles, payoff operators and the reduced
//! Hamiltonian of the Public Goods game with punishment.

use crate::analytic;
use crate::{Error, Result, Scalar};

/// Economic parameters of one Public Goods game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameParams<T> {
    n_players: usize,
    benefit: T,
    cost: T,
    punishment: T,
}

impl<T: Scalar> GameParams<T> {
    pub fn new(n_players: usize, benefit: T, cost: T, punishment: T) -> Result<Self> {
        if n_players < 2 {
            return Err(Error::param("n_players", "must be at least 2", n_players));
        }
        if !benefit.is_finite() || benefit < T::zero() {
            return Err(Error::param("benefit", "must be finite and non-negative", benefit));
        }
        if !cost.is_finite() || cost < T::zero() {
            return Err(Error::param("cost", "must be finite and non-negative", cost));
        }
        if !(punishment >= T::zero() && punishment <= T::one()) {
            return Err(Error::param("punishment", "must lie in [0,1]", punishment));
        }
        Ok(Self {
            n_players,
            benefit,
            cost,
            punishment,
        })
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn benefit(&self) -> T {
        self.benefit
    }

    pub fn cost(&self) -> T {
        self.cost
    }

    pub fn punishment(&self) -> T {
        self.punishment
    }

    /// Net profit `b - c` of a cooperator when everybody cooperates.
    pub fn net_profit(&self) -> T {
        self.benefit - self.cost
    }

    /// `Δ - μ = b - 2c + b/N`, the one-body coupling without punishment.
    pub fn bare_coupling(&self) -> T {
        self.net_profit() - cooperation_risk(self)
    }

    pub fn with_cost(&self, cost: T) -> Result<Self> {
        Self::new(self.n_players, self.benefit, cost, self.punishment)
    }

    pub fn with_punishment(&self, punishment: T) -> Result<Self> {
        Self::new(self.n_players, self.benefit, self.cost, punishment)
    }

    fn n(&self) -> T {
        T::of_usize(self.n_players)
    }
}

/// Strategy profile `|n_0 n_1 ... n_{N-1}>`, `true` meaning cooperate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    strategies: Vec<bool>,
    cooperators: usize,
}

impl Configuration {
    pub fn new(strategies: Vec<bool>) -> Self {
        let cooperators = strategies.iter().filter(|&&s| s).count();
        Self {
            strategies,
            cooperators,
        }
    }

    pub fn uniform(n: usize, cooperate: bool) -> Self {
        Self {
            strategies: vec![cooperate; n],
            cooperators: if cooperate { n } else { 0 },
        }
    }

    pub fn all_defect(n: usize) -> Self {
        Self::uniform(n, false)
    }

    pub fn all_cooperate(n: usize) -> Self {
        Self::uniform(n, true)
    }

    /// Bit `k` of `mask` is the strategy of player `k`. Requires `n <= 64`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        assert!(n <= 64, "mask configurations hold at most 64 players");
        Self::new((0..n).map(|k| mask >> k & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    pub fn cooperators(&self) -> usize {
        self.cooperators
    }

    pub fn strategies(&self) -> &[bool] {
        &self.strategies
    }

    pub fn is_cooperator(&self, k: usize) -> bool {
        self.strategies[k]
    }

    /// Toggles player `k` and returns its new strategy.
    pub fn flip(&mut self, k: usize) -> bool {
        let s = &mut self.strategies[k];
        *s = !*s;
        if *s {
            self.cooperators += 1;
        } else {
            self.cooperators -= 1;
        }
        *s
    }
}

/// How the punishment correction of the cooperation risk is closed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RiskMode {
    /// Only the bare risk `μ = c - b/N`; requires `γ = 0`.
    Bare,
    /// `⟨n⟩` replaced by the unpunished closed-form density `n̄(β)`.
    #[default]
    MeanFieldClosedForm,
    /// `⟨n⟩` solved as a fixed point of the exact thermodynamics.
    SelfConsistent { tol: f64, max_iter: usize },
}

impl RiskMode {
    pub const DEFAULT_TOL: f64 = 1e-10;
    pub const DEFAULT_MAX_ITER: usize = 10_000;

    pub fn self_consistent() -> Self {
        RiskMode::SelfConsistent {
            tol: Self::DEFAULT_TOL,
            max_iter: Self::DEFAULT_MAX_ITER,
        }
    }

    /// Short stable tag used in emitted records.
    pub fn tag(&self) -> &'static str {
        match self {
            RiskMode::Bare => "bare",
            RiskMode::MeanFieldClosedForm => "mean-field",
            RiskMode::SelfConsistent { .. } => "self-consistent",
        }
    }
}

impl std::str::FromStr for RiskMode {
    type Err = Error;

    /// Parses [`RiskMode::tag`]; the self-consistent mode gets default settings.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bare" => Ok(RiskMode::Bare),
            "mean-field" => Ok(RiskMode::MeanFieldClosedForm),
            "self-consistent" => Ok(RiskMode::self_consistent()),
            other => Err(Error::param(
                "mode",
                "must be one of bare, mean-field, self-consistent",
                other,
            )),
        }
    }
}

/// Reduced Hamiltonian `E(M) = -alpha2 M^2 - alpha1 M`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel<T> {
    alpha1: T,
    alpha2: T,
    n_players: usize,
    source_params: Option<GameParams<T>>,
    risk_mode: Option<RiskMode>,
    mean_density_used: T,
}

impl<T: Scalar> EnergyModel<T> {
    /// Model with explicit couplings, detached from any game.
    pub fn from_couplings(n_players: usize, alpha1: T, alpha2: T) -> Self {
        Self {
            alpha1,
            alpha2,
            n_players,
            source_params: None,
            risk_mode: None,
            mean_density_used: T::zero(),
        }
    }

    /// Couplings for a given density `rho` baked into the risk correction:
    /// `alpha2 = γb/N`, `alpha1 = (Δ - c + b/N) - γb(1 - rho (N-1)/N)`.
    pub fn with_density(p: &GameParams<T>, rho: T, mode: RiskMode) -> Self {
        let n = p.n();
        let gb = p.punishment * p.benefit;
        let alpha2 = gb / n;
        let coordination = n - T::one();
        let alpha1 = p.bare_coupling() - gb * (T::one() - rho * coordination / n);
        Self {
            alpha1,
            alpha2,
            n_players: p.n_players,
            source_params: Some(*p),
            risk_mode: Some(mode),
            mean_density_used: rho,
        }
    }

    pub fn alpha1(&self) -> T {
        self.alpha1
    }

    pub fn alpha2(&self) -> T {
        self.alpha2
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn source_params(&self) -> Option<&GameParams<T>> {
        self.source_params.as_ref()
    }

    pub fn risk_mode(&self) -> Option<RiskMode> {
        self.risk_mode
    }

    pub fn mean_density_used(&self) -> T {
        self.mean_density_used
    }

    pub fn energy(&self, m: usize) -> Result<T> {
        if m > self.n_players {
            return Err(Error::param("m", "cooperator count must not exceed N", m));
        }
        Ok(self.energy_at(m))
    }

    #[inline]
    pub(crate) fn energy_at(&self, m: usize) -> T {
        let m = T::of_usize(m);
        -(self.alpha2 * m + self.alpha1) * m
    }

    /// `E(m ± 1) - E(m)` for a single strategy flip.
    #[inline]
    pub(crate) fn flip_delta(&self, m: usize, to_cooperate: bool) -> T {
        let m = T::of_usize(m);
        let two = T::of(2.0);
        if to_cooperate {
            -(self.alpha2 * (two * m + T::one()) + self.alpha1)
        } else {
            self.alpha2 * (two * m - T::one()) + self.alpha1
        }
    }
}

/// Builds the reduced Hamiltonian of `p` at inverse temperature `beta`.
pub fn build_energy_model<T: Scalar>(
    p: &GameParams<T>,
    beta: T,
    mode: RiskMode,
) -> Result<EnergyModel<T>> {
    check_beta(beta)?;
    let rho = match mode {
        RiskMode::Bare => {
            if p.punishment > T::zero() {
                return Err(Error::Mode(format!(
                    "bare risk mode requires punishment 0, got {}",
                    p.punishment
                )));
            }
            T::zero()
        }
        RiskMode::MeanFieldClosedForm => closed_form_density(p, beta),
        RiskMode::SelfConsistent { tol, max_iter } => {
            analytic::self_consistent_density(p, beta, tol, max_iter)?
        }
    };
    Ok(EnergyModel::with_density(p, rho, mode))
}

/// `n̄ = 1 / (1 + exp(-β(Δ - μ)))`, independent of γ.
pub(crate) fn closed_form_density<T: Scalar>(p: &GameParams<T>, beta: T) -> T {
    logistic(beta * p.bare_coupling())
}

pub(crate) fn logistic<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn check_beta<T: Scalar>(beta: T) -> Result<()> {
    if beta.is_finite() && beta >= T::zero() {
        Ok(())
    } else {
        Err(Error::param("beta", "must be finite and non-negative", beta))
    }
}

fn check_player<T: Scalar>(config: &Configuration, k: usize, p: &GameParams<T>) -> Result<()> {
    if config.len() != p.n_players {
        return Err(Error::param(
            "config",
            "length must equal the number of players",
            config.len(),
        ));
    }
    if k >= p.n_players {
        return Err(Error::param("k", "player index must be below N", k));
    }
    Ok(())
}

fn indicator<T: Scalar>(b: bool) -> T {
    if b {
        T::one()
    } else {
        T::zero()
    }
}

/// Bracket `(b/N) M - c n_k` shared by both payoff projections.
fn share_minus_cost<T: Scalar>(config: &Configuration, k: usize, p: &GameParams<T>) -> T {
    let m = T::of_usize(config.cooperators());
    p.benefit / p.n() * m - p.cost * indicator::<T>(config.is_cooperator(k))
}

/// Cooperator payoff `n_k [(b/N) M - c n_k]`.
pub fn payoff_cooperator<T: Scalar>(config: &Configuration, k: usize, p: &GameParams<T>) -> Result<T> {
    check_player(config, k, p)?;
    Ok(indicator::<T>(config.is_cooperator(k)) * share_minus_cost(config, k, p))
}

/// Defector payoff `(1 - n_k) [(b/N) M - c n_k]`.
pub fn payoff_defector<T: Scalar>(config: &Configuration, k: usize, p: &GameParams<T>) -> Result<T> {
    check_player(config, k, p)?;
    Ok(indicator::<T>(!config.is_cooperator(k)) * share_minus_cost(config, k, p))
}

/// Defector payoff after punishment, `(1 - γ)` times [`payoff_defector`].
pub fn payoff_defector_punished<T: Scalar>(
    config: &Configuration,
    k: usize,
    p: &GameParams<T>,
) -> Result<T> {
    Ok((T::one() - p.punishment) * payoff_defector(config, k, p)?)
}

/// Total payoff of player `k`: `-c n_k + (b/N)(1 - γ + γ n_k) M`.
pub fn earnings<T: Scalar>(config: &Configuration, k: usize, p: &GameParams<T>) -> Result<T> {
    check_player(config, k, p)?;
    let nk = indicator::<T>(config.is_cooperator(k));
    let m = T::of_usize(config.cooperators());
    let g = p.punishment;
    Ok(-p.cost * nk + p.benefit / p.n() * (T::one() - g + g * nk) * m)
}

/// Cooperation risk `μ = c - b/N`.
pub fn cooperation_risk<T: Scalar>(p: &GameParams<T>) -> T {
    p.cost - p.benefit / p.n()
}

/// Punishment-reduced risk `μ' = μ - γ b ρ (N-1)/N`.
pub fn cooperation_risk_punished<T: Scalar>(p: &GameParams<T>, mean_density: T) -> Result<T> {
    check_density(mean_density)?;
    let n = p.n();
    Ok(cooperation_risk(p) - p.punishment * p.benefit * mean_density * (n - T::one()) / n)
}

/// Mean-field payoff loss due to punishment, `-γ b ρ (1 - ρ)`.
pub fn payoff_decrement_meanfield<T: Scalar>(gamma: T, b: T, mean_density: T) -> Result<T> {
    check_density(mean_density)?;
    if !(gamma >= T::zero() && gamma <= T::one()) {
        return Err(Error::param("gamma", "must lie in [0,1]", gamma));
    }
    Ok(-gamma * b * mean_density * (T::one() - mean_density))
}

/// Energy of a full configuration, `-Σ_k (ε_k - μ'_k n_k)`, evaluated player
/// by player from the payoff operators. Oracle path; the solvers use
/// [`EnergyModel::energy`].
pub fn configuration_energy<T: Scalar>(
    config: &Configuration,
    p: &GameParams<T>,
    mean_density: T,
) -> Result<T> {
    let risk = cooperation_risk_punished(p, mean_density)?;
    let mut total = T::zero();
    for k in 0..p.n_players {
        let eps = payoff_cooperator(config, k, p)? + payoff_defector_punished(config, k, p)?;
        total = total + eps - risk * indicator::<T>(config.is_cooperator(k));
    }
    Ok(-total)
}

fn check_density<T: Scalar>(rho: T) -> Result<()> {
    if rho >= T::zero() && rho <= T::one() {
        Ok(())
    } else {
        Err(Error::param("mean_density", "must lie in [0,1]", rho))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(n: usize, b: f64, c: f64, g: f64) -> GameParams<f64> {
        GameParams::new(n, b, c, g).unwrap()
    }

    fn cfg(bits: &str) -> Configuration {
        Configuration::new(bits.chars().map(|c| c == '1').collect())
    }

    #[test]
    fn mode_tags_round_trip() {
        for mode in [RiskMode::Bare, RiskMode::MeanFieldClosedForm, RiskMode::self_consistent()] {
            assert_eq!(mode.tag().parse::<RiskMode>().unwrap(), mode);
        }
        assert!("exact".parse::<RiskMode>().is_err());
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(GameParams::new(1, 1.0, 0.5, 0.0).is_err());
        assert!(GameParams::new(4, -1.0, 0.5, 0.0).is_err());
        assert!(GameParams::new(4, 1.0, 0.5, 1.5).is_err());
        assert!(GameParams::new(4, 1.0, f64::NAN, 0.0).is_err());
        assert_relative_eq!(params(4, 2.0, 0.5, 0.0).net_profit(), 1.5);
    }

    #[test]
    fn configuration_tracks_count() {
        let mut c = Configuration::from_mask(5, 0b10110);
        assert_eq!(c.cooperators(), 3);
        assert!(!c.flip(1));
        assert_eq!(c.cooperators(), 2);
        assert!(c.flip(0));
        assert_eq!(c.cooperators(), 3);
        assert_eq!(c.strategies(), &[true, false, true, false, true]);
    }

    #[test]
    fn cooperator_payoffs() {
        let p = params(2, 1.0, 0.25, 0.0);
        assert_relative_eq!(payoff_cooperator(&cfg("11"), 0, &p).unwrap(), 0.75);
        assert_eq!(payoff_cooperator(&cfg("01"), 0, &p).unwrap(), 0.0);
        let p = params(4, 2.0, 0.5, 0.0);
        assert_relative_eq!(payoff_cooperator(&cfg("1010"), 0, &p).unwrap(), 0.5);
        assert!(payoff_cooperator(&cfg("1010"), 4, &p).is_err());
        assert!(payoff_cooperator(&cfg("10"), 0, &p).is_err());
    }

    #[test]
    fn defector_payoffs() {
        let p = params(2, 1.0, 0.25, 0.0);
        assert_relative_eq!(payoff_defector(&cfg("10"), 1, &p).unwrap(), 0.5);
        assert_eq!(payoff_defector(&cfg("10"), 0, &p).unwrap(), 0.0);
        let p = params(4, 2.0, 0.5, 0.0);
        assert_eq!(payoff_defector(&cfg("0000"), 2, &p).unwrap(), 0.0);
    }

    #[test]
    fn punished_defector() {
        let p = params(2, 1.0, 0.25, 0.5);
        assert_relative_eq!(payoff_defector_punished(&cfg("10"), 1, &p).unwrap(), 0.25);
        let p = params(3, 1.0, 0.25, 1.0);
        for mask in 0..8 {
            for k in 0..3 {
                assert_eq!(
                    payoff_defector_punished(&Configuration::from_mask(3, mask), k, &p).unwrap(),
                    0.0
                );
            }
        }
    }

    #[test]
    fn total_earnings() {
        let p = params(2, 1.0, 0.25, 0.0);
        assert_relative_eq!(earnings(&cfg("11"), 0, &p).unwrap(), 0.75);
        assert_eq!(earnings(&cfg("00"), 1, &p).unwrap(), 0.0);
        let p = params(2, 1.0, 0.25, 1.0);
        assert_eq!(earnings(&cfg("01"), 0, &p).unwrap(), 0.0);
    }

    #[test]
    fn risks() {
        assert_relative_eq!(cooperation_risk(&params(2, 1.0, 0.75, 0.0)), 0.25);
        assert_eq!(cooperation_risk(&params(4, 2.0, 0.5, 0.0)), 0.0);
        assert_relative_eq!(
            cooperation_risk(&params(1024, 1.0, 0.664, 0.0)),
            0.664 - 1.0 / 1024.0
        );
        let p = params(2, 1.0, 0.75, 1.0);
        assert_relative_eq!(cooperation_risk_punished(&p, 0.5).unwrap(), 0.0);
        assert_eq!(cooperation_risk_punished(&p, 0.0).unwrap(), cooperation_risk(&p));
        assert!(cooperation_risk_punished(&p, 1.1).is_err());
        let p0 = params(2, 1.0, 0.75, 0.0);
        assert_eq!(cooperation_risk_punished(&p0, 0.7).unwrap(), cooperation_risk(&p0));
    }

    #[test]
    fn decrement() {
        assert_eq!(payoff_decrement_meanfield(1.0, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(payoff_decrement_meanfield(1.0, 1.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(payoff_decrement_meanfield(1.0, 1.0, 0.5).unwrap(), -0.25);
        assert_eq!(payoff_decrement_meanfield(0.0, 1.0, 0.3).unwrap(), 0.0);
        assert!(payoff_decrement_meanfield(1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn energy_models() {
        let p = params(2, 1.0, 0.75, 0.0);
        let m = build_energy_model(&p, 1.0, RiskMode::Bare).unwrap();
        assert_relative_eq!(m.alpha1(), 0.0, epsilon = 1e-15);
        assert_eq!(m.alpha2(), 0.0);

        let p = params(2, 1.0, 0.25, 0.0);
        let m = build_energy_model(&p, 1.0, RiskMode::Bare).unwrap();
        assert_relative_eq!(m.alpha1(), 1.0);
        assert_relative_eq!(m.energy(2).unwrap(), -2.0);
        assert_eq!(m.energy(0).unwrap(), 0.0);
        assert!(m.energy(3).is_err());

        let m = build_energy_model(&params(7, 1.3, 0.2, 0.4), 0.0, RiskMode::MeanFieldClosedForm)
            .unwrap();
        assert_eq!(m.mean_density_used(), 0.5);

        let p = params(1024, 1.0, 0.665, 1.0);
        let m = build_energy_model(&p, 2.0, RiskMode::MeanFieldClosedForm).unwrap();
        assert_relative_eq!(m.alpha2(), 1.0 / 1024.0);

        let m = EnergyModel::from_couplings(5, 1.0, 0.5);
        assert_relative_eq!(m.energy(3).unwrap(), -7.5);
    }

    #[test]
    fn bare_mode_rejects_punishment() {
        let p = params(4, 1.0, 0.5, 0.5);
        assert!(matches!(
            build_energy_model(&p, 1.0, RiskMode::Bare),
            Err(Error::Mode(_))
        ));
        assert!(build_energy_model(&p, -1.0, RiskMode::MeanFieldClosedForm).is_err());
    }

    #[test]
    fn flip_delta_matches_energy_difference() {
        let m = EnergyModel::from_couplings(10, -0.3, 0.07);
        for k in 0..10 {
            let up = m.energy_at(k + 1) - m.energy_at(k);
            assert_relative_eq!(m.flip_delta(k, true), up, epsilon = 1e-14);
            assert_relative_eq!(m.flip_delta(k + 1, false), -up, epsilon = 1e-14);
        }
    }

    #[test]
    fn count_energy_matches_player_sum_exhaustively() {
        for n in 2..=12usize {
            for &(b, c) in &[(1.0, 0.25), (2.0, 1.3), (0.7, 0.0)] {
                let p = params(n, b, c, 0.0);
                let model = build_energy_model(&p, 1.0, RiskMode::Bare).unwrap();
                let mu = cooperation_risk(&p);
                for mask in 0..(1u64 << n) {
                    let config = Configuration::from_mask(n, mask);
                    let direct: f64 = -(0..n)
                        .map(|k| {
                            earnings(&config, k, &p).unwrap()
                                - mu * if config.is_cooperator(k) { 1.0 } else { 0.0 }
                        })
                        .sum::<f64>();
                    let reduced = model.energy(config.cooperators()).unwrap();
                    assert!((direct - reduced).abs() <= 1e-12 * (1.0 + direct.abs()));
                }
            }
        }
    }

    #[test]
    fn punished_configuration_energy_matches_couplings() {
        let p = params(6, 1.2, 0.4, 0.7);
        let rho = 0.37;
        let model = EnergyModel::with_density(&p, rho, RiskMode::MeanFieldClosedForm);
        for mask in 0..64 {
            let config = Configuration::from_mask(6, mask);
            let full = configuration_energy(&config, &p, rho).unwrap();
            assert_relative_eq!(full, model.energy(config.cooperators()).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn generic_over_f32() {
        let p = GameParams::<f32>::new(4, 1.0, 0.5, 1.0).unwrap();
        let m = build_energy_model(&p, 1.0f32, RiskMode::MeanFieldClosedForm).unwrap();
        assert!((m.alpha2() - 0.25).abs() < 1e-7);
    }

    proptest! {
        #[test]
        fn earnings_split_into_payoffs(
            n in 2usize..10, mask in any::<u64>(), b in 0.0..3.0f64, c in 0.0..3.0f64,
            g in 0.0..=1.0f64, k in 0usize..10,
        ) {
            let p = params(n, b, c, g);
            let config = Configuration::from_mask(n, mask & ((1 << n) - 1));
            let k = k % n;
            let total = earnings(&config, k, &p).unwrap();
            let parts = payoff_cooperator(&config, k, &p).unwrap()
                + payoff_defector_punished(&config, k, &p).unwrap();
            prop_assert!((total - parts).abs() <= 1e-12 * (1.0 + total.abs()));
        }

        #[test]
        fn punishment_never_raises_risk(
            n in 2usize..2000, b in 0.0..3.0f64, c in 0.0..3.0f64, g in 0.0..=1.0f64,
            rho in 0.0..=1.0f64,
        ) {
            let p = params(n, b, c, g);
            prop_assert!(cooperation_risk_punished(&p, rho).unwrap() <= cooperation_risk(&p));
        }

        #[test]
        fn energy_is_permutation_invariant(
            n in 2usize..12, mask in any::<u64>(), shift in 0usize..12, g in 0.0..=1.0f64,
        ) {
            let p = params(n, 1.0, 0.6, g);
            let mask = mask & ((1 << n) - 1);
            let shift = shift % n;
            let rotated = ((mask << shift) | (mask >> (n - shift))) & ((1 << n) - 1);
            let a = configuration_energy(&Configuration::from_mask(n, mask), &p, 0.4).unwrap();
            let r = configuration_energy(&Configuration::from_mask(n, rotated), &p, 0.4).unwrap();
            prop_assert!((a - r).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn two_body_coupling_sign(n in 2usize..100, b in 0.0..3.0f64, g in 0.0..=1.0f64) {
            let p = params(n, b, 0.5, g);
            let m = EnergyModel::with_density(&p, 0.3, RiskMode::MeanFieldClosedForm);
            prop_assert!(m.alpha2() >= 0.0);
            prop_assert_eq!(m.alpha2() == 0.0, g * b == 0.0);
        }
    }
}
