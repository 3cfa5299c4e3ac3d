//! Concentration of the success sums `S_n`, exact win sets, and last-loss censuses.
//!
//! For suffix-only deterministic strategies the win sets `G_j` are enumerated
//! exactly over all `2^H` prefixes; their measures are exact rationals.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hatgame::{repeat_runs, GameConfig, InputLaw, StrategySpec, Visible};

/// Horizon guard for [`win_set`].
pub const MAX_WIN_SET_HORIZON: usize = 24;
/// Player-count guard for [`exact_expected_wins`].
pub const MAX_EXACT_PLAYERS: usize = 20;

/// Parameters of the two-sided Azuma–Hoeffding bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AzumaQuery {
    pub n: usize,
    pub t: f64,
    /// Bound on each increment `|s_j|`.
    pub c: f64,
}

impl AzumaQuery {
    pub fn new(n: usize, t: f64) -> Result<Self> {
        if n == 0 || t.is_nan() || t < 0.0 {
            return Err(Error::Config(format!("invalid Azuma query n={n}, t={t}")));
        }
        Ok(Self { n, t, c: 1.0 })
    }
}

/// `min(1, 2·exp(-t² / (2 n c²)))`.
pub fn azuma_bound(q: &AzumaQuery) -> f64 {
    (2.0 * (-(q.t * q.t) / (2.0 * q.n as f64 * q.c * q.c)).exp()).min(1.0)
}

/// Deviation `t*` at which the Azuma bound equals `delta`.
pub fn azuma_threshold(n: usize, delta: f64) -> f64 {
    (2.0 * n as f64 * (2.0 / delta).ln()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub strategy: String,
    pub players: usize,
    pub trials: usize,
    pub delta: f64,
    /// `t* = sqrt(2n ln(2/δ))`.
    pub threshold: f64,
    pub azuma_bound: f64,
    pub exceedances: usize,
    pub fraction: f64,
    /// `δ + 3 sqrt(δ(1-δ)/T)`.
    pub allowed: f64,
    pub verdict: Verdict,
    /// Fewer than five exceedances expected: the verdict says little.
    pub low_power: bool,
}

/// Runs `trials` games under fair uniform inputs and compares the fraction of
/// trials with `|S_n| ≥ t*` against `δ` plus three standard errors.
pub fn verify_concentration(
    strategy: StrategySpec,
    players: usize,
    trials: usize,
    delta: f64,
    seed: u64,
) -> Result<ConcentrationReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!("delta must lie in (0, 1), got {delta}")));
    }
    if players == 0 {
        return Err(Error::Config("at least one player is required".into()));
    }
    let config = GameConfig::new(strategy, InputLaw::Uniform { p: 0.5 }, players);
    let runs = repeat_runs(&config, trials, seed)?;
    let threshold = azuma_threshold(players, delta);
    let exceedances = runs
        .iter()
        .filter(|r| (r.sum.unsigned_abs() as f64) >= threshold)
        .count();
    let fraction = exceedances as f64 / trials as f64;
    let allowed = delta + 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt();
    Ok(ConcentrationReport {
        strategy: strategy.to_string(),
        players,
        trials,
        delta,
        threshold,
        azuma_bound: azuma_bound(&AzumaQuery::new(players, threshold)?),
        exceedances,
        fraction,
        allowed,
        verdict: if fraction <= allowed {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        low_power: (trials as f64) * delta < 5.0,
    })
}

fn require_deterministic(strategy: StrategySpec) -> Result<()> {
    if strategy.is_deterministic() {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "strategy {strategy} is not deterministic"
        )))
    }
}

fn fill_prefix(bits: &mut [u8], prefix: u64) {
    for (k, b) in bits.iter_mut().enumerate() {
        *b = (prefix >> k & 1) as u8;
    }
}

/// `G_j` over length-`H` prefixes; prefix bit `k` is `x_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WinSet {
    pub player: usize,
    pub horizon: usize,
    words: Vec<u64>,
    count: u64,
}

impl WinSet {
    pub fn contains(&self, prefix: u64) -> bool {
        self.words[(prefix / 64) as usize] >> (prefix % 64) & 1 == 1
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// `|G_j| / 2^H`.
    pub fn measure(&self) -> Ratio<u64> {
        Ratio::new(self.count, 1u64 << self.horizon)
    }
}

/// Replays `strategy` for player `player` on every prefix of length `horizon`.
pub fn win_set(strategy: StrategySpec, player: usize, horizon: usize) -> Result<WinSet> {
    require_deterministic(strategy)?;
    if horizon == 0 || horizon > MAX_WIN_SET_HORIZON {
        return Err(Error::Capacity(format!(
            "horizon {horizon} outside 1..={MAX_WIN_SET_HORIZON}"
        )));
    }
    if player >= horizon {
        return Err(Error::Domain(format!(
            "player {player} is beyond horizon {horizon}"
        )));
    }
    let s = strategy.instantiate(0);
    let size = 1u64 << horizon;
    let mut words = vec![0u64; size.div_ceil(64) as usize];
    let mut count = 0;
    let mut bits = vec![0u8; horizon];
    for prefix in 0..size {
        fill_prefix(&mut bits, prefix);
        let visible = Visible::new(player + 1, &bits[player + 1..]);
        if s.guess(player, &visible)? == bits[player] {
            words[(prefix / 64) as usize] |= 1 << (prefix % 64);
            count += 1;
        }
    }
    Ok(WinSet {
        player,
        horizon,
        words,
        count,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedWins {
    pub players: usize,
    /// Total wins summed over all `2^n` inputs.
    pub total_wins: u64,
    /// `|G_j|` for each player.
    pub per_player: Vec<u64>,
}

impl ExpectedWins {
    /// `Σ_j |G_j| / 2^n`.
    pub fn expected(&self) -> Ratio<u64> {
        Ratio::new(self.total_wins, 1u64 << self.players)
    }

    pub fn player_measure(&self, j: usize) -> Ratio<u64> {
        Ratio::new(self.per_player[j], 1u64 << self.players)
    }
}

/// Exact expected number of winners under fair uniform inputs with `H = n`.
pub fn exact_expected_wins(strategy: StrategySpec, players: usize) -> Result<ExpectedWins> {
    require_deterministic(strategy)?;
    if players == 0 || players > MAX_EXACT_PLAYERS {
        return Err(Error::Capacity(format!(
            "player count {players} outside 1..={MAX_EXACT_PLAYERS}"
        )));
    }
    let s = strategy.instantiate(0);
    let mut per_player = vec![0u64; players];
    let mut bits = vec![0u8; players];
    for prefix in 0..1u64 << players {
        fill_prefix(&mut bits, prefix);
        for (j, wins) in per_player.iter_mut().enumerate() {
            let visible = Visible::new(j + 1, &bits[j + 1..]);
            if s.guess(j, &visible)? == bits[j] {
                *wins += 1;
            }
        }
    }
    Ok(ExpectedWins {
        players,
        total_wins: per_player.iter().sum(),
        per_player,
    })
}

/// Histogram of `last_loss` over trials; `None` means every player won.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LossCensus {
    pub trials: usize,
    pub histogram: BTreeMap<Option<usize>, u64>,
}

impl LossCensus {
    pub fn from_losses(losses: impl IntoIterator<Item = Option<usize>>) -> Self {
        let mut census = Self::default();
        for l in losses {
            census.trials += 1;
            *census.histogram.entry(l).or_insert(0) += 1;
        }
        census
    }

    /// Fraction of trials whose last loss is at index `threshold` or later.
    pub fn fraction_at_least(&self, threshold: usize) -> f64 {
        let hits: u64 = self
            .histogram
            .iter()
            .filter(|(l, _)| l.is_some_and(|l| l >= threshold))
            .map(|(_, c)| c)
            .sum();
        hits as f64 / self.trials as f64
    }

    pub fn max_loss(&self) -> Option<usize> {
        self.histogram.keys().rev().find_map(|l| *l)
    }

    /// `last_loss,count` rows; `none` for loss-free trials.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("last_loss,count\n");
        for (l, c) in &self.histogram {
            match l {
                Some(l) => out.push_str(&format!("{l},{c}\n")),
                None => out.push_str(&format!("none,{c}\n")),
            }
        }
        out
    }
}

/// Last-loss histogram on eventually-zero inputs stabilizing at `m`.
pub fn tail_loss_census(
    strategy: StrategySpec,
    m: usize,
    players: usize,
    trials: usize,
    seed: u64,
) -> Result<LossCensus> {
    if m > players {
        return Err(Error::Config(format!(
            "stabilization index {m} exceeds {players} players"
        )));
    }
    let config = GameConfig::new(strategy, InputLaw::EventuallyZero { m, p: 0.5 }, players);
    let runs = repeat_runs(&config, trials, seed)?;
    Ok(LossCensus::from_losses(runs.iter().map(|r| r.last_loss)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn azuma_bound_examples() {
        assert_eq!(azuma_bound(&AzumaQuery::new(10, 0.0).unwrap()), 1.0);
        let b = azuma_bound(&AzumaQuery::new(100, 20.0).unwrap());
        assert!((b - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!((b - 0.270_670_566).abs() < 1e-9);
        let b = azuma_bound(&AzumaQuery::new(10_000, 400.0).unwrap());
        assert!((b - 2.0 * (-8.0f64).exp()).abs() < 1e-18);
        assert!((b - 6.709_252_558e-4).abs() < 1e-12);
        assert!(AzumaQuery::new(0, 1.0).is_err());
        assert!(AzumaQuery::new(1, -1.0).is_err());
    }

    #[test]
    fn threshold_inverts_bound() {
        let t = azuma_threshold(10_000, 0.05);
        let b = azuma_bound(&AzumaQuery::new(10_000, t).unwrap());
        assert!((b - 0.05).abs() < 1e-12);
    }

    /// Brute-force oracle: count prefixes `x ∈ {0,1}^H` with `x_j = 0`.
    fn count_zero_at(j: usize, h: usize) -> u64 {
        (0..1u64 << h).filter(|x| x >> j & 1 == 0).count() as u64
    }

    #[test]
    fn win_set_examples() {
        for j in 0..3 {
            let g = win_set(StrategySpec::Constant(0), j, 3).unwrap();
            assert_eq!(g.len(), count_zero_at(j, 3));
            assert_eq!(g.measure(), Ratio::new(1, 2));
            for x in 0..8u64 {
                assert_eq!(g.contains(x), x >> j & 1 == 0);
            }
        }
        let g = win_set(StrategySpec::Flipped(2), 0, 3).unwrap();
        for x in 0..8u64 {
            assert_eq!(g.contains(x), x & 1 == 1);
        }
        assert_eq!(g.measure(), Ratio::new(1, 2));
    }

    #[test]
    fn win_set_contracts() {
        assert!(matches!(
            win_set(StrategySpec::MixtureD, 0, 3),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            win_set(StrategySpec::BaseG, 0, 25),
            Err(Error::Capacity(_))
        ));
        assert!(win_set(StrategySpec::BaseG, 3, 3).is_err());
    }

    #[test]
    fn expected_wins_examples() {
        let c = exact_expected_wins(StrategySpec::Constant(0), 3).unwrap();
        assert_eq!(c.total_wins, 12);
        assert_eq!(c.expected(), Ratio::new(3, 2));
        let m = exact_expected_wins(StrategySpec::Majority, 3).unwrap();
        assert_eq!(m.expected(), Ratio::new(3, 2));
        for spec in StrategySpec::deterministic_catalogue(1) {
            assert_eq!(exact_expected_wins(spec, 1).unwrap().expected(), Ratio::new(1, 2));
        }
        assert!(matches!(
            exact_expected_wins(StrategySpec::Random, 3),
            Err(Error::Contract(_))
        ));
        assert!(exact_expected_wins(StrategySpec::BaseG, 21).is_err());
    }

    #[test]
    fn expected_wins_agree_with_win_sets() {
        for spec in StrategySpec::deterministic_catalogue(6) {
            let e = exact_expected_wins(spec, 6).unwrap();
            for j in 0..6 {
                assert_eq!(e.per_player[j], win_set(spec, j, 6).unwrap().len());
            }
        }
    }

    #[test]
    fn concentration_for_measurable_strategies() {
        for spec in [StrategySpec::Constant(0), StrategySpec::Majority, StrategySpec::Random] {
            let r = verify_concentration(spec, 2000, 400, 0.05, 9).unwrap();
            assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
            assert!(!r.low_power);
        }
    }

    #[test]
    fn single_trial_is_low_power() {
        let r = verify_concentration(StrategySpec::Constant(0), 100, 1, 0.05, 0).unwrap();
        assert!(r.fraction == 0.0 || r.fraction == 1.0);
        assert!(r.low_power);
        assert!(verify_concentration(StrategySpec::Constant(0), 100, 10, 1.0, 0).is_err());
    }

    #[test]
    fn census_examples() {
        let c = tail_loss_census(StrategySpec::BaseG, 0, 1000, 50, 1).unwrap();
        assert_eq!(c.histogram.get(&None), Some(&50));
        let c = tail_loss_census(StrategySpec::MixtureD, 10, 1000, 1000, 2).unwrap();
        assert!(c.max_loss().unwrap() <= 10);
        assert!(tail_loss_census(StrategySpec::BaseG, 11, 10, 1, 0).is_err());
    }

    #[test]
    fn census_tail_of_e_follows_the_geometric_index() {
        // losses past m come only from the flipped block [0, K), so
        // P(last_loss >= m + k) = P(K >= m + k + 1) = 2^-(m+k+1)
        let m = 2;
        let trials = 20_000;
        let c = tail_loss_census(StrategySpec::MixtureE, m, 200, trials, 5).unwrap();
        for k in 1..=6 {
            let p = 0.5f64.powi((m + k + 1) as i32);
            let slack = 3.0 * (p / trials as f64).sqrt();
            let f = c.fraction_at_least(m + k);
            assert!((f - p).abs() <= slack, "k={k}: {f} vs {p}");
        }
    }

    #[test]
    fn census_csv() {
        let c = LossCensus::from_losses([None, Some(3), Some(3)]);
        assert_eq!(c.to_csv(), "last_loss,count\nnone,1\n3,2\n");
        assert_eq!(c.fraction_at_least(3), 2.0 / 3.0);
    }
}
