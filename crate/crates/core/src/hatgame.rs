//! The infinite hat game at finite horizon.
//!
//! A referee samples hat colours `x_0 … x_{H-1}`; every `x_j` with `j ≥ H` is 0, so
//! each simulated input lies in the tail class of eventually-zero strings. That
//! class's representative is fixed to the all-zeros string, which makes the
//! choice-function strategy `g` computable: `g(y_j) = 0…0`.
//!
//! Player `j` sees only `x_{j+1} … x_{H-1}` through a [`Visible`] window.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, keyed_bit, stream};

/// Hat colours of one run; bits beyond the horizon are 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HatInput {
    bits: Vec<u8>,
}

impl HatInput {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Domain("hat colours must be 0 or 1".into()));
        }
        Ok(Self { bits })
    }

    pub fn from_bitstring(s: &str) -> Result<Self> {
        Self::new(parse_bitstring(s)?)
    }

    pub fn horizon(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn bit(&self, j: usize) -> u8 {
        self.bits.get(j).copied().unwrap_or(0)
    }

    /// What player `j` is allowed to see.
    pub fn visible(&self, j: usize) -> Visible<'_> {
        let start = (j + 1).min(self.bits.len());
        Visible::new(j + 1, &self.bits[start..])
    }
}

pub fn parse_bitstring(s: &str) -> Result<Vec<u8>> {
    s.bytes()
        .map(|b| match b {
            b'0' => Ok(0),
            b'1' => Ok(1),
            _ => Err(Error::Domain(format!("invalid bit character {:?}", b as char))),
        })
        .collect()
}

pub fn to_bitstring(bits: &[u8]) -> String {
    bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
}

/// The suffix `x_{start} … x_{H-1}` shown to player `start - 1`.
#[derive(Debug, Clone, Copy)]
pub struct Visible<'a> {
    start: usize,
    bits: &'a [u8],
    ones: usize,
}

impl<'a> Visible<'a> {
    pub fn new(start: usize, bits: &'a [u8]) -> Self {
        let ones = bits.iter().filter(|&&b| b == 1).count();
        Self { start, bits, ones }
    }

    /// `ones` must equal the number of 1 bits in `bits`.
    pub(crate) fn with_ones(start: usize, bits: &'a [u8], ones: usize) -> Self {
        Self { start, bits, ones }
    }

    /// Absolute index of the first visible hat.
    pub fn first_index(&self) -> usize {
        self.start
    }

    pub fn horizon(&self) -> usize {
        self.start + self.bits.len()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.ones
    }

    pub fn zeros(&self) -> usize {
        self.bits.len() - self.ones
    }

    /// Hat `index` (absolute). Reading below the window is a tripwire.
    pub fn bit(&self, index: usize) -> u8 {
        assert!(
            index >= self.start,
            "out-of-window read: x_{index} requested, window starts at x_{}",
            self.start
        );
        self.bits.get(index - self.start).copied().unwrap_or(0)
    }

    pub fn as_slice(&self) -> &'a [u8] {
        self.bits
    }
}

/// Which mixture a latent index is drawn for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixtureKind {
    /// `½e₀ + ½e₁`
    D,
    /// `Σ_j 2^-(j+1) e_j`
    E,
}

/// Draws the mixture component for one run.
pub fn sample_mixture_index(kind: MixtureKind, seed: u64) -> u64 {
    let mut rng = stream(seed);
    match kind {
        MixtureKind::D => rng.next_u64() & 1,
        MixtureKind::E => {
            // failures before the first success of a fair coin
            let mut index = 0u64;
            loop {
                let word = rng.next_u64();
                if word != 0 {
                    return index + u64::from(word.trailing_zeros());
                }
                index += 64;
            }
        }
    }
}

/// A strategy family, before its per-run latent state is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrategySpec {
    /// The choice-function strategy `g` on the eventually-zero class.
    BaseG,
    /// `g_J`: `g` with the first `J` guesses swapped.
    Flipped(u64),
    MixtureD,
    MixtureE,
    /// A fresh fair coin per player.
    Random,
    /// Majority colour of the visible window, ties guess 0.
    Majority,
    Constant(u8),
}

impl StrategySpec {
    pub fn is_deterministic(&self) -> bool {
        !matches!(
            self,
            StrategySpec::MixtureD | StrategySpec::MixtureE | StrategySpec::Random
        )
    }

    /// Draws the latent state for one run.
    pub fn instantiate(&self, seed: u64) -> Strategy {
        let latent = match self {
            StrategySpec::MixtureD => Latent::Index(sample_mixture_index(MixtureKind::D, seed)),
            StrategySpec::MixtureE => Latent::Index(sample_mixture_index(MixtureKind::E, seed)),
            StrategySpec::Random => Latent::Seed(seed),
            _ => Latent::None,
        };
        Strategy { spec: *self, latent }
    }

    /// One representative of every deterministic family, for exhaustive checks
    /// up to `players` players.
    pub fn deterministic_catalogue(players: usize) -> Vec<StrategySpec> {
        let mut out = vec![
            StrategySpec::BaseG,
            StrategySpec::Majority,
            StrategySpec::Constant(0),
            StrategySpec::Constant(1),
        ];
        out.extend((0..=players as u64 + 1).map(StrategySpec::Flipped));
        out
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategySpec::BaseG => write!(f, "g"),
            StrategySpec::Flipped(j) => write!(f, "gj:{j}"),
            StrategySpec::MixtureD => write!(f, "d"),
            StrategySpec::MixtureE => write!(f, "e"),
            StrategySpec::Random => write!(f, "random"),
            StrategySpec::Majority => write!(f, "majority"),
            StrategySpec::Constant(c) => write!(f, "const:{c}"),
        }
    }
}

impl FromStr for StrategySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown strategy {s:?}"));
        Ok(match s {
            "g" => StrategySpec::BaseG,
            "d" => StrategySpec::MixtureD,
            "e" => StrategySpec::MixtureE,
            "random" => StrategySpec::Random,
            "majority" => StrategySpec::Majority,
            _ => match s.split_once(':') {
                Some(("gj", j)) => StrategySpec::Flipped(j.parse().map_err(|_| bad())?),
                Some(("const", "0")) => StrategySpec::Constant(0),
                Some(("const", "1")) => StrategySpec::Constant(1),
                _ => return Err(bad()),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Latent {
    None,
    /// Mixture component: play `g_index`.
    Index(u64),
    /// Key for per-player coins.
    Seed(u64),
}

/// A strategy with its latent state drawn for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Strategy {
    spec: StrategySpec,
    latent: Latent,
}

impl Strategy {
    pub fn spec(&self) -> StrategySpec {
        self.spec
    }

    pub fn latent_index(&self) -> Option<u64> {
        match self.latent {
            Latent::Index(j) => Some(j),
            _ => None,
        }
    }

    /// Guess of player `player` from its visible window.
    pub fn guess(&self, player: usize, visible: &Visible<'_>) -> Result<u8> {
        if player >= visible.horizon() {
            return Err(Error::Domain(format!(
                "player {player} is beyond the horizon {}",
                visible.horizon()
            )));
        }
        if visible.first_index() != player + 1 {
            return Err(Error::Domain(format!(
                "window for player {player} must start at x_{}, got x_{}",
                player + 1,
                visible.first_index()
            )));
        }
        Ok(self.guess_unchecked(player, visible))
    }

    #[inline]
    fn guess_unchecked(&self, player: usize, visible: &Visible<'_>) -> u8 {
        let swapped = |flips: u64| u8::from((player as u64) < flips);
        match (self.spec, self.latent) {
            // g(y_j)_j for the all-zeros representative
            (StrategySpec::BaseG, _) => 0,
            (StrategySpec::Flipped(flips), _) => swapped(flips),
            (StrategySpec::MixtureD | StrategySpec::MixtureE, Latent::Index(flips)) => {
                swapped(flips)
            }
            (StrategySpec::Random, Latent::Seed(key)) => keyed_bit(key, player as u64),
            (StrategySpec::Majority, _) => u8::from(visible.ones() > visible.zeros()),
            (StrategySpec::Constant(c), _) => c,
            _ => unreachable!("latent state is drawn by instantiate"),
        }
    }
}

/// How the referee draws hat colours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InputLaw {
    /// Independent Bernoulli(`p`) hats.
    Uniform { p: f64 },
    /// Bernoulli(`p`) hats below `m`, zeros from `m` on.
    EventuallyZero { m: usize, p: f64 },
}

impl Default for InputLaw {
    fn default() -> Self {
        InputLaw::Uniform { p: 0.5 }
    }
}

impl fmt::Display for InputLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputLaw::Uniform { p } => write!(f, "uniform:{p}"),
            InputLaw::EventuallyZero { m, p } if *p == 0.5 => write!(f, "evzero:{m}"),
            InputLaw::EventuallyZero { m, p } => write!(f, "evzero:{m}:{p}"),
        }
    }
}

impl FromStr for InputLaw {
    type Err = Error;

    /// `uniform`, `uniform:P`, `evzero:M` or `evzero:M:P`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown input law {s:?}"));
        let prob = |t: &str| -> Result<f64> {
            let p: f64 = t.parse().map_err(|_| bad())?;
            if (0.0..=1.0).contains(&p) {
                Ok(p)
            } else {
                Err(Error::Config(format!("bias {p} outside [0, 1]")))
            }
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["uniform"] => Ok(InputLaw::Uniform { p: 0.5 }),
            ["uniform", p] => Ok(InputLaw::Uniform { p: prob(p)? }),
            ["evzero", m] => Ok(InputLaw::EventuallyZero {
                m: m.parse().map_err(|_| bad())?,
                p: 0.5,
            }),
            ["evzero", m, p] => Ok(InputLaw::EventuallyZero {
                m: m.parse().map_err(|_| bad())?,
                p: prob(p)?,
            }),
            _ => Err(bad()),
        }
    }
}

fn bernoulli_fill<R: Rng>(rng: &mut R, out: &mut [u8], p: f64) {
    if p == 0.5 {
        for chunk in out.chunks_mut(64) {
            let word = rng.next_u64();
            for (k, b) in chunk.iter_mut().enumerate() {
                *b = (word >> k & 1) as u8;
            }
        }
    } else {
        for b in out.iter_mut() {
            *b = u8::from(rng.random_bool(p));
        }
    }
}

/// Draws hat colours for horizon `horizon`; deterministic in `seed`.
pub fn sample_input(law: InputLaw, horizon: usize, seed: u64) -> Result<HatInput> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let mut rng = stream(seed);
    let mut bits = vec![0u8; horizon];
    match law {
        InputLaw::Uniform { p } => {
            check_bias(p)?;
            bernoulli_fill(&mut rng, &mut bits, p);
        }
        InputLaw::EventuallyZero { m, p } => {
            check_bias(p)?;
            if m > horizon {
                return Err(Error::Config(format!(
                    "stabilization index {m} exceeds horizon {horizon}"
                )));
            }
            bernoulli_fill(&mut rng, &mut bits[..m], p);
        }
    }
    Ok(HatInput { bits })
}

fn check_bias(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("bias {p} outside [0, 1]")))
    }
}

/// `S_k` after the first `k` players.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub k: usize,
    pub sum: i64,
}

impl Checkpoint {
    /// `W_k = (S_k / k + 1) / 2`.
    pub fn win_ratio(&self) -> f64 {
        (self.sum as f64 / self.k as f64 + 1.0) / 2.0
    }
}

/// Per-run statistics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    /// Number of players scored.
    pub players: usize,
    /// `Σ r_j`.
    pub wins: u64,
    /// `S_n = Σ s_j` with `s_j = 2 r_j - 1`.
    pub sum: i64,
    /// Largest `j` with `r_j = 0`.
    pub last_loss: Option<usize>,
    pub checkpoints: Vec<Checkpoint>,
    /// Mixture component, for `d` and `e`.
    pub latent_index: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub guesses: Option<Vec<u8>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub results: Option<Vec<u8>>,
}

impl RunStats {
    /// `W_n = (1/n) Σ r_j`.
    pub fn win_ratio(&self) -> f64 {
        if self.players == 0 {
            return 0.0;
        }
        self.wins as f64 / self.players as f64
    }
}

/// Streaming scorer shared by in-process and networked runs.
#[derive(Debug)]
pub struct ScoreKeeper {
    scored: usize,
    wins: u64,
    sum: i64,
    last_loss: Option<usize>,
    pending: std::vec::IntoIter<usize>,
    next_checkpoint: Option<usize>,
    checkpoints: Vec<Checkpoint>,
    guesses: Option<Vec<u8>>,
    results: Option<Vec<u8>>,
}

impl ScoreKeeper {
    /// `checkpoints` must lie in `1..=players`.
    pub fn new(players: usize, checkpoints: &[usize], retain: bool) -> Result<Self> {
        let mut ks = checkpoints.to_vec();
        ks.sort_unstable();
        ks.dedup();
        if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k > players) {
            return Err(Error::Config(format!(
                "checkpoint {bad} outside 1..={players}"
            )));
        }
        let mut pending = ks.into_iter();
        let next_checkpoint = pending.next();
        Ok(Self {
            scored: 0,
            wins: 0,
            sum: 0,
            last_loss: None,
            pending,
            next_checkpoint,
            checkpoints: Vec::new(),
            guesses: retain.then(|| Vec::with_capacity(players)),
            results: retain.then(|| Vec::with_capacity(players)),
        })
    }

    /// Scores the next player in order.
    #[inline]
    pub fn record(&mut self, guess: u8, hat: u8) {
        let won = guess == hat;
        let j = self.scored;
        self.scored += 1;
        if won {
            self.wins += 1;
            self.sum += 1;
        } else {
            self.sum -= 1;
            self.last_loss = Some(j);
        }
        if self.next_checkpoint == Some(self.scored) {
            self.checkpoints.push(Checkpoint {
                k: self.scored,
                sum: self.sum,
            });
            self.next_checkpoint = self.pending.next();
        }
        if let Some(g) = self.guesses.as_mut() {
            g.push(guess);
        }
        if let Some(r) = self.results.as_mut() {
            r.push(u8::from(won));
        }
    }

    pub fn finish(self, latent_index: Option<u64>) -> RunStats {
        RunStats {
            players: self.scored,
            wins: self.wins,
            sum: self.sum,
            last_loss: self.last_loss,
            checkpoints: self.checkpoints,
            latent_index,
            guesses: self.guesses,
            results: self.results,
        }
    }
}

/// Plays the first `players` players of `input` with `strategy`.
pub fn play(
    strategy: &Strategy,
    input: &HatInput,
    players: usize,
    checkpoints: &[usize],
    retain: bool,
) -> Result<RunStats> {
    let horizon = input.horizon();
    if players > horizon {
        return Err(Error::Config(format!(
            "{players} players exceed horizon {horizon}"
        )));
    }
    let mut keeper = ScoreKeeper::new(players, checkpoints, retain)?;
    let bits = input.bits();
    let mut suffix_ones = bits.iter().skip(1).filter(|&&b| b == 1).count();
    for j in 0..players {
        let window = &bits[(j + 1).min(horizon)..];
        let visible = Visible::with_ones(j + 1, window, suffix_ones);
        let guess = strategy.guess_unchecked(j, &visible);
        keeper.record(guess, bits[j]);
        if let Some(&b) = window.first() {
            suffix_ones -= usize::from(b);
        }
    }
    Ok(keeper.finish(strategy.latent_index()))
}

/// Everything that defines a run apart from its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub strategy: StrategySpec,
    pub law: InputLaw,
    pub horizon: usize,
    pub players: usize,
    pub checkpoints: Vec<usize>,
    pub retain: bool,
}

impl GameConfig {
    /// `players` players with horizon equal to the player count.
    pub fn new(strategy: StrategySpec, law: InputLaw, players: usize) -> Self {
        Self {
            strategy,
            law,
            horizon: players,
            players,
            checkpoints: Vec::new(),
            retain: false,
        }
    }
}

/// Seed of the referee's hat sampler within a run.
pub fn input_seed(run_seed: u64) -> u64 {
    derive_seed(run_seed, 0)
}

/// Seed of the players' shared latent state within a run.
pub fn strategy_seed(run_seed: u64) -> u64 {
    derive_seed(run_seed, 1)
}

/// Seed of trial `trial` under `master`.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    derive_seed(master, trial)
}

/// One run: samples the input, draws the latent state once, streams all players.
pub fn run_game(config: &GameConfig, seed: u64) -> Result<RunStats> {
    let input = sample_input(config.law, config.horizon, input_seed(seed))?;
    let strategy = config.strategy.instantiate(strategy_seed(seed));
    play(
        &strategy,
        &input,
        config.players,
        &config.checkpoints,
        config.retain,
    )
}

/// `trials` independent runs keyed by [`trial_seed`]; results are in trial order.
pub fn repeat_runs(config: &GameConfig, trials: usize, master_seed: u64) -> Result<Vec<RunStats>> {
    if trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    (0..trials as u64)
        .into_par_iter()
        .map(|t| run_game(config, trial_seed(master_seed, t)))
        .collect()
}
