//! Random scenarios, measures and models for property checks.
//!
//! Weights are drawn independently uniform on `[0, 1)` and then normalized.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dist::{BellScenario, FiniteDist, Odometer, PartySubset};
use crate::error::Result;
use crate::nosignalling::{
    EmpiricalModel, HiddenVariableMeasure, JointFunction, ResponseFunction,
};

/// Mass moved by [`perturb_signalling`].
pub const SIGNALLING_EPS: f64 = 0.05;

pub fn rng(seed: u64) -> ChaCha8Rng {
    crate::rng::stream(seed)
}

/// Scenario with `1..=max` parties, inputs and outcomes each.
pub fn random_scenario<R: Rng>(
    rng: &mut R,
    max_parties: usize,
    max_inputs: usize,
    max_outcomes: usize,
) -> BellScenario {
    BellScenario::with_sizes(
        rng.random_range(1..=max_parties),
        rng.random_range(1..=max_inputs),
        rng.random_range(1..=max_outcomes),
    )
    .expect("sizes are positive")
}

fn normalized<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        if total > 1e-9 {
            return raw.into_iter().map(|w| w / total).collect();
        }
    }
}

/// Distribution on the full joint-outcome space with random weights.
pub fn random_outcome_dist<R: Rng>(rng: &mut R, scenario: &BellScenario) -> Result<FiniteDist> {
    let points: Vec<Vec<usize>> =
        Odometer::new(scenario.num_parties(), scenario.num_outcomes()).collect();
    let weights = normalized(rng, points.len());
    FiniteDist::new(scenario.all_parties(), scenario.num_outcomes(), points.into_iter().zip(weights))
}

pub fn random_response<R: Rng>(rng: &mut R, scenario: &BellScenario) -> ResponseFunction {
    ResponseFunction::from_fn(scenario, |_, _| rng.random_range(0..scenario.num_outcomes()))
        .expect("outcomes in range")
}

/// Measure on up to `max_support` distinct random response functions.
pub fn random_measure<R: Rng>(
    rng: &mut R,
    scenario: &BellScenario,
    max_support: usize,
) -> Result<HiddenVariableMeasure> {
    let target = rng.random_range(1..=max_support.max(1));
    let mut functions = BTreeMap::new();
    for _ in 0..target {
        functions.insert(random_response(rng, scenario), ());
    }
    let weights = normalized(rng, functions.len());
    HiddenVariableMeasure::new(scenario, functions.into_keys().zip(weights))
}

/// Arbitrary table; signals with high probability when `|J|, |I| ≥ 2`.
pub fn random_model<R: Rng>(rng: &mut R, scenario: &BellScenario) -> Result<EmpiricalModel> {
    EmpiricalModel::from_fn(scenario.clone(), |_| random_outcome_dist(rng, scenario))
}

/// `e_x(o) = |O|^-(|J|-1)` when `Σ o ≡ target(x) (mod |O|)`, else 0.
///
/// Every proper marginal is uniform, so the model is no-signalling for any target.
pub fn pr_type_box(
    scenario: &BellScenario,
    target: impl Fn(&[usize]) -> usize,
) -> Result<EmpiricalModel> {
    let n_out = scenario.num_outcomes();
    let n_parties = scenario.num_parties();
    let p = 1.0 / (n_out as f64).powi(n_parties as i32 - 1);
    EmpiricalModel::from_fn(scenario.clone(), |x| {
        let t = target(x) % n_out;
        let support = Odometer::new(n_parties, n_out)
            .filter(|o| o.iter().sum::<usize>() % n_out == t)
            .map(|o| (o, p));
        FiniteDist::new(scenario.all_parties(), n_out, support)
    })
}

/// The Popescu–Rohrlich box: `e_x(ab) = 1/2` iff `a ⊕ b = x₀·x₁`.
pub fn pr_box() -> EmpiricalModel {
    let s = BellScenario::with_sizes(2, 2, 2).expect("valid");
    pr_type_box(&s, |x| x[0] * x[1]).expect("valid")
}

/// Random PR-type box with a random target function.
pub fn random_pr_type_box<R: Rng>(rng: &mut R, scenario: &BellScenario) -> Result<EmpiricalModel> {
    let targets: Vec<usize> = scenario
        .joint_inputs()
        .map(|_| rng.random_range(0..scenario.num_outcomes()))
        .collect();
    pr_type_box(scenario, |x| targets[scenario.joint_input_index(x)])
}

/// Moves up to `eps` of mass at a receiving party whenever a remote party's input
/// equals a chosen value. Returns `None` when the scenario cannot signal
/// (one party, one input, or one outcome).
pub fn perturb_signalling<R: Rng>(
    rng: &mut R,
    model: &EmpiricalModel,
    eps: f64,
) -> Option<EmpiricalModel> {
    let s = model.scenario();
    if s.num_parties() < 2 || s.num_inputs() < 2 || s.num_outcomes() < 2 {
        return None;
    }
    let remote = rng.random_range(0..s.num_parties());
    let receiver = (remote + rng.random_range(1..s.num_parties())) % s.num_parties();
    let trigger = rng.random_range(0..s.num_inputs());
    let shift = rng.random_range(1..s.num_outcomes());
    let n_out = s.num_outcomes();
    let table = model
        .rows()
        .map(|(x, d)| {
            if x[remote] != trigger {
                return d.clone();
            }
            let (from, mass) = d
                .support()
                .iter()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(o, p)| (o.clone(), p.min(eps)))
                .expect("nonempty support");
            let mut to = from.clone();
            to[receiver] = (to[receiver] + shift) % n_out;
            let mut map: BTreeMap<Vec<usize>, f64> =
                d.support().iter().cloned().collect();
            *map.get_mut(&from).expect("present") -= mass;
            *map.entry(to).or_insert(0.0) += mass;
            FiniteDist::new(s.all_parties(), n_out, map).expect("mass preserved")
        })
        .collect();
    Some(EmpiricalModel::new(s.clone(), table).expect("same shape"))
}

/// A joint function built from a random response function (always functional NS).
pub fn random_fns_function<R: Rng>(rng: &mut R, scenario: &BellScenario) -> Result<JointFunction> {
    let hat = random_response(rng, scenario);
    JointFunction::from_fn(scenario.clone(), |x| hat.outcomes_for(x))
}

/// Arbitrary joint function with uniformly random outputs.
pub fn random_joint_function<R: Rng>(rng: &mut R, scenario: &BellScenario) -> Result<JointFunction> {
    JointFunction::from_fn(scenario.clone(), |x| {
        x.iter()
            .map(|_| rng.random_range(0..scenario.num_outcomes()))
            .collect()
    })
}

/// Picks one of `models` uniformly.
pub fn choose<'a, R: Rng, T>(rng: &mut R, items: &'a [T]) -> &'a T {
    items.choose(rng).expect("nonempty")
}

/// Random subset of `parties`.
pub fn random_subset<R: Rng>(rng: &mut R, parties: &PartySubset) -> PartySubset {
    PartySubset::new(parties.iter().filter(|_| rng.random_bool(0.5)))
}
