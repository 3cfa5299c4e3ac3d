//! Empirical models over finite Bell scenarios and the no-signalling checks.

use crate::dist::{
    checked_pow, mixed_radix_index, truncate_weights, BellScenario, FiniteDist, JointAssignment,
    PartySubset,
};
use crate::error::{Error, Result};

/// Largest number of joint inputs a tabular model may have.
pub const MAX_JOINT_INPUTS: usize = 1_000_000;

fn joint_input_count(scenario: &BellScenario) -> Result<usize> {
    scenario
        .num_joint_inputs()
        .filter(|&n| n <= MAX_JOINT_INPUTS)
        .ok_or_else(|| {
            Error::Capacity(format!(
                "{}^{} joint inputs exceed the tabular limit of {MAX_JOINT_INPUTS}",
                scenario.num_inputs(),
                scenario.num_parties()
            ))
        })
}

/// A family `(e_x)` of distributions over joint outcomes, one per joint input.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel {
    scenario: BellScenario,
    table: Vec<FiniteDist>,
}

impl EmpiricalModel {
    /// `table` is indexed in [`BellScenario::joint_inputs`] order.
    pub fn new(scenario: BellScenario, table: Vec<FiniteDist>) -> Result<Self> {
        let expected = joint_input_count(&scenario)?;
        if table.len() != expected {
            return Err(Error::Validation(format!(
                "table has {} rows, scenario has {expected} joint inputs",
                table.len()
            )));
        }
        let all = scenario.all_parties();
        for (k, d) in table.iter().enumerate() {
            if d.parties() != &all || d.alphabet() != scenario.num_outcomes() {
                return Err(Error::Domain(format!(
                    "row {k} is not a distribution over joint outcomes"
                )));
            }
        }
        Ok(Self { scenario, table })
    }

    pub fn from_fn(
        scenario: BellScenario,
        mut row: impl FnMut(&[usize]) -> Result<FiniteDist>,
    ) -> Result<Self> {
        joint_input_count(&scenario)?;
        let table = scenario
            .joint_inputs()
            .map(|x| row(&x))
            .collect::<Result<Vec<_>>>()?;
        Self::new(scenario, table)
    }

    pub fn scenario(&self) -> &BellScenario {
        &self.scenario
    }

    pub fn dist(&self, x: &[usize]) -> &FiniteDist {
        &self.table[mixed_radix_index(x, self.scenario.num_inputs())]
    }

    pub fn rows(&self) -> impl Iterator<Item = (Vec<usize>, &FiniteDist)> + '_ {
        self.scenario.joint_inputs().zip(self.table.iter())
    }

    /// Row-wise finite mixture.
    pub fn mix(terms: &[(f64, &EmpiricalModel)]) -> Result<EmpiricalModel> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::Validation("empty mixture".into()))?;
        if terms.iter().any(|(_, m)| m.scenario != first.scenario) {
            return Err(Error::Domain("mixture of models over different scenarios".into()));
        }
        let table = (0..first.table.len())
            .map(|k| FiniteDist::convex_combination(terms.iter().map(|(w, m)| (*w, &m.table[k]))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scenario: first.scenario.clone(),
            table,
        })
    }

    /// Countable mixture, truncated like [`FiniteDist::countable_combination`].
    pub fn countable_mix(
        weights: impl IntoIterator<Item = f64>,
        term: impl FnMut(usize) -> EmpiricalModel,
    ) -> Result<EmpiricalModel> {
        let weights = truncate_weights(weights)?;
        let models: Vec<EmpiricalModel> = (0..weights.len()).map(term).collect();
        let terms: Vec<(f64, &EmpiricalModel)> = weights.iter().copied().zip(&models).collect();
        Self::mix(&terms)
    }

    /// Largest pointwise difference between two tables.
    pub fn max_table_deviation(&self, other: &EmpiricalModel) -> Result<f64> {
        if self.scenario != other.scenario {
            return Err(Error::Domain("models over different scenarios".into()));
        }
        self.table
            .iter()
            .zip(&other.table)
            .try_fold(0.0f64, |acc, (a, b)| Ok(acc.max(a.max_deviation(b)?.0)))
    }
}

/// `[x = y]`: the parties on which two joint inputs agree.
pub fn agreement_set(x: &JointAssignment, y: &JointAssignment) -> Result<PartySubset> {
    if x.parties() != y.parties() || x.alphabet() != y.alphabet() {
        return Err(Error::Domain(
            "joint inputs over different parties or alphabets".into(),
        ));
    }
    Ok(agreement(x.parties().as_slice(), x.values(), y.values()))
}

fn agreement(parties: &[usize], x: &[usize], y: &[usize]) -> PartySubset {
    PartySubset::new(
        parties
            .iter()
            .zip(x.iter().zip(y))
            .filter(|(_, (a, b))| a == b)
            .map(|(&p, _)| p),
    )
}

/// Evidence that a model signals: the marginals of `e_x` and `e_y` on `subset`
/// differ by `deviation` at the outcome assignment `outcome`.
#[derive(Debug, Clone, PartialEq)]
pub struct NsWitness {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub subset: PartySubset,
    pub outcome: Vec<usize>,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NsVerdict {
    Pass,
    /// Carries the worst witness found.
    Fail(NsWitness),
}

impl NsVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, NsVerdict::Pass)
    }

    pub fn witness(&self) -> Option<&NsWitness> {
        match self {
            NsVerdict::Pass => None,
            NsVerdict::Fail(w) => Some(w),
        }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("tolerance must be positive, got {tol}")))
    }
}

/// Tracks the maximum-deviation witness; ties keep the earliest pair.
#[derive(Default)]
struct WorstWitness(Option<NsWitness>);

impl WorstWitness {
    fn offer(&mut self, x: &[usize], y: &[usize], subset: &PartySubset, a: &FiniteDist, b: &FiniteDist) {
        let (deviation, outcome) = a.max_deviation(b).expect("same domain by construction");
        if self.0.as_ref().map_or(true, |w| deviation > w.deviation) {
            self.0 = Some(NsWitness {
                x: x.to_vec(),
                y: y.to_vec(),
                subset: subset.clone(),
                outcome,
                deviation,
            });
        }
    }

    fn verdict(self, tol: f64) -> NsVerdict {
        match self.0 {
            Some(w) if w.deviation > tol => NsVerdict::Fail(w),
            _ => NsVerdict::Pass,
        }
    }
}

/// Checks `e_x|[x=y] = e_y|[x=y]` for every pair of joint inputs.
pub fn is_no_signalling(model: &EmpiricalModel, tol: f64) -> Result<NsVerdict> {
    check_tol(tol)?;
    let all = model.scenario.all_parties();
    let inputs: Vec<Vec<usize>> = model.scenario.joint_inputs().collect();
    let mut worst = WorstWitness::default();
    for (i, x) in inputs.iter().enumerate() {
        for (k, y) in inputs.iter().enumerate().skip(i + 1) {
            let subset = agreement(all.as_slice(), x, y);
            let a = model.table[i].marginalize(&subset)?;
            let b = model.table[k].marginalize(&subset)?;
            worst.offer(x, y, &subset, &a, &b);
        }
    }
    Ok(worst.verdict(tol))
}

/// Same verdict as [`is_no_signalling`], checking only pairs of joint inputs that
/// differ at a single party `k`, compared on `J \ {k}`.
pub fn is_no_signalling_fast(model: &EmpiricalModel, tol: f64) -> Result<NsVerdict> {
    check_tol(tol)?;
    let scenario = &model.scenario;
    let n_parties = scenario.num_parties();
    let n_inputs = scenario.num_inputs();
    let all = scenario.all_parties();
    let complements: Vec<PartySubset> = (0..n_parties).map(|k| all.without(k)).collect();
    // marginals[row][k] = e_x restricted to J \ {k}
    let marginals = model
        .table
        .iter()
        .map(|d| complements.iter().map(|u| d.marginalize(u)).collect())
        .collect::<Result<Vec<Vec<FiniteDist>>>>()?;
    let mut worst = WorstWitness::default();
    for (i, x) in scenario.joint_inputs().enumerate() {
        for k in 0..n_parties {
            for v in x[k] + 1..n_inputs {
                let mut y = x.clone();
                y[k] = v;
                let j = mixed_radix_index(&y, n_inputs);
                worst.offer(&x, &y, &complements[k], &marginals[i][k], &marginals[j][k]);
            }
        }
    }
    Ok(worst.verdict(tol))
}

/// A deterministic response function `J × I → O`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResponseFunction {
    num_inputs: usize,
    /// Row-major: `table[j * |I| + i]`.
    table: Vec<usize>,
}

impl ResponseFunction {
    pub fn new(scenario: &BellScenario, table: Vec<usize>) -> Result<Self> {
        if table.len() != scenario.num_parties() * scenario.num_inputs() {
            return Err(Error::Domain(format!(
                "response table has {} entries, expected |J|·|I| = {}",
                table.len(),
                scenario.num_parties() * scenario.num_inputs()
            )));
        }
        if table.iter().any(|&o| o >= scenario.num_outcomes()) {
            return Err(Error::Domain("response outside outcome alphabet".into()));
        }
        Ok(Self {
            num_inputs: scenario.num_inputs(),
            table,
        })
    }

    pub fn from_fn(scenario: &BellScenario, mut f: impl FnMut(usize, usize) -> usize) -> Result<Self> {
        let table = (0..scenario.num_parties())
            .flat_map(|j| (0..scenario.num_inputs()).map(move |i| (j, i)))
            .map(|(j, i)| f(j, i))
            .collect();
        Self::new(scenario, table)
    }

    /// The `index`-th response function in mixed-radix order over `J × I`.
    pub fn nth(scenario: &BellScenario, mut index: usize) -> Self {
        let cells = scenario.num_parties() * scenario.num_inputs();
        let radix = scenario.num_outcomes();
        let mut table = vec![0; cells];
        for cell in table.iter_mut().rev() {
            *cell = index % radix;
            index /= radix;
        }
        Self {
            num_inputs: scenario.num_inputs(),
            table,
        }
    }

    pub fn respond(&self, party: usize, input: usize) -> usize {
        self.table[party * self.num_inputs + input]
    }

    /// `(f̂(j, x_j))_j`.
    pub fn outcomes_for(&self, x: &[usize]) -> Vec<usize> {
        x.iter().enumerate().map(|(j, &i)| self.respond(j, i)).collect()
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    fn fits(&self, scenario: &BellScenario) -> bool {
        self.num_inputs == scenario.num_inputs()
            && self.table.len() == scenario.num_parties() * scenario.num_inputs()
            && self.table.iter().all(|&o| o < scenario.num_outcomes())
    }
}

/// A finitely supported measure on response functions.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenVariableMeasure {
    support: Vec<(ResponseFunction, f64)>,
}

impl HiddenVariableMeasure {
    pub fn new(
        scenario: &BellScenario,
        support: impl IntoIterator<Item = (ResponseFunction, f64)>,
    ) -> Result<Self> {
        let mut support: Vec<(ResponseFunction, f64)> = support.into_iter().collect();
        support.sort_by(|a, b| a.0.cmp(&b.0));
        if support.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Validation("response function listed twice".into()));
        }
        if support.iter().any(|(f, _)| !f.fits(scenario)) {
            return Err(Error::Domain("response function does not fit scenario".into()));
        }
        if support.iter().any(|&(_, w)| !w.is_finite() || w < 0.0) {
            return Err(Error::Validation("negative or non-finite weight".into()));
        }
        let total: f64 = support.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > crate::dist::PROB_TOL {
            return Err(Error::Validation(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { support })
    }

    pub fn dirac(f: ResponseFunction) -> Self {
        Self {
            support: vec![(f, 1.0)],
        }
    }

    pub fn support(&self) -> &[(ResponseFunction, f64)] {
        &self.support
    }
}

/// The model `e_μ` with `e_{μ,x} = μ|_x`.
pub fn local_model(mu: &HiddenVariableMeasure, scenario: &BellScenario) -> Result<EmpiricalModel> {
    if mu.support.iter().any(|(f, _)| !f.fits(scenario)) {
        return Err(Error::Domain("measure does not fit scenario".into()));
    }
    let all = scenario.all_parties();
    let n_outcomes = scenario.num_outcomes();
    EmpiricalModel::from_fn(scenario.clone(), |x| {
        let mut map = std::collections::BTreeMap::new();
        for (f, w) in &mu.support {
            *map.entry(f.outcomes_for(x)).or_insert(0.0) += w;
        }
        FiniteDist::new(all.clone(), n_outcomes, map)
    })
}

/// A deterministic map from joint inputs to joint outcomes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointFunction {
    scenario: BellScenario,
    outputs: Vec<Vec<usize>>,
}

impl JointFunction {
    pub fn from_fn(scenario: BellScenario, mut f: impl FnMut(&[usize]) -> Vec<usize>) -> Result<Self> {
        joint_input_count(&scenario)?;
        let outputs: Vec<Vec<usize>> = scenario.joint_inputs().map(|x| f(&x)).collect();
        for o in &outputs {
            scenario.joint_outcome(o.clone())?;
        }
        Ok(Self { scenario, outputs })
    }

    pub fn scenario(&self) -> &BellScenario {
        &self.scenario
    }

    pub fn apply(&self, x: &[usize]) -> &[usize] {
        &self.outputs[mixed_radix_index(x, self.scenario.num_inputs())]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FnsVerdict {
    Pass,
    /// `x_party = y_party` but `f_party(x) != f_party(y)`.
    Fail { party: usize, x: Vec<usize>, y: Vec<usize> },
}

impl FnsVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, FnsVerdict::Pass)
    }
}

/// Checks that `f_j(x)` depends on `x_j` only.
pub fn functional_ns_check(f: &JointFunction) -> FnsVerdict {
    let n_inputs = f.scenario.num_inputs();
    for party in 0..f.scenario.num_parties() {
        // first joint input seen with x_party = i, and its output at party
        let mut reference: Vec<Option<(Vec<usize>, usize)>> = vec![None; n_inputs];
        for (x, out) in f.scenario.joint_inputs().zip(&f.outputs) {
            let i = x[party];
            match &reference[i] {
                None => reference[i] = Some((x, out[party])),
                Some((x0, o0)) if *o0 != out[party] => {
                    return FnsVerdict::Fail {
                        party,
                        x: x0.clone(),
                        y: x,
                    }
                }
                Some(_) => {}
            }
        }
    }
    FnsVerdict::Pass
}

/// `f̂(j, i) = f_j(x)` for any `x` with `x_j = i`.
pub fn extract_hat_function(f: &JointFunction) -> Result<ResponseFunction> {
    if let FnsVerdict::Fail { party, x, y } = functional_ns_check(f) {
        return Err(Error::NotFunctionallyNoSignalling { party, x, y });
    }
    let s = &f.scenario;
    let n = s.num_parties();
    ResponseFunction::from_fn(s, |j, i| {
        let mut x = vec![0; n];
        x[j] = i;
        f.apply(&x)[j]
    })
}

/// `e(f)` with `e(f)_x = δ(f(x))`.
pub fn model_of(f: &JointFunction) -> EmpiricalModel {
    let all = f.scenario.all_parties();
    let table = f
        .outputs
        .iter()
        .map(|o| {
            FiniteDist::dirac(
                &JointAssignment::new(all.clone(), o.clone(), f.scenario.num_outcomes())
                    .expect("validated in from_fn"),
            )
        })
        .collect();
    EmpiricalModel {
        scenario: f.scenario.clone(),
        table,
    }
}

/// Largest `|O|^(|J|·|I|)` accepted by [`is_local`].
pub const MAX_RESPONSE_FUNCTIONS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub enum LocalVerdict {
    Local(HiddenVariableMeasure),
    /// Best reproduction found still misses the table by `deviation`.
    NonLocal { deviation: f64 },
}

impl LocalVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, LocalVerdict::Local(_))
    }
}

/// Decides whether `model` is a mixture of deterministic response functions.
///
/// Solves `A λ = b, λ ≥ 0` where column `k` of `A` is the indicator table of the
/// `k`-th response function and `b` is the model's table. The simplex returns a
/// vertex, so certificates have at most `|I|^|J|·|O|^|J|` support points. The
/// verdict is decided by replaying the certificate and comparing against `tol`.
pub fn is_local(model: &EmpiricalModel, tol: f64) -> Result<LocalVerdict> {
    check_tol(tol)?;
    let s = &model.scenario;
    let cells = s.num_parties() * s.num_inputs();
    let columns = checked_pow(s.num_outcomes(), cells)
        .filter(|&c| c <= MAX_RESPONSE_FUNCTIONS)
        .ok_or_else(|| {
            Error::Capacity(format!(
                "{}^({}·{}) response functions exceed the limit of {MAX_RESPONSE_FUNCTIONS}",
                s.num_outcomes(),
                s.num_parties(),
                s.num_inputs()
            ))
        })?;
    let per_input = s.num_joint_outcomes().expect("bounded by columns");
    let rows = model.table.len() * per_input;

    let mut lp = crate::simplex::Feasibility::new(rows, columns);
    for (r, d) in model.table.iter().enumerate() {
        for (o, p) in d.support() {
            lp.set_rhs(r * per_input + mixed_radix_index(o, s.num_outcomes()), *p);
        }
    }
    let functions: Vec<ResponseFunction> = (0..columns).map(|k| ResponseFunction::nth(s, k)).collect();
    for (k, f) in functions.iter().enumerate() {
        for (r, x) in s.joint_inputs().enumerate() {
            let o = f.outcomes_for(&x);
            lp.set(r * per_input + mixed_radix_index(&o, s.num_outcomes()), k, 1.0);
        }
    }
    let weights = lp.solve();

    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Ok(LocalVerdict::NonLocal { deviation: 1.0 });
    }
    let support: Vec<(ResponseFunction, f64)> = weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 1e-14)
        .map(|(k, &w)| (functions[k].clone(), w))
        .collect();
    let kept: f64 = support.iter().map(|(_, w)| w).sum();
    let certificate = HiddenVariableMeasure {
        support: support.into_iter().map(|(f, w)| (f, w / kept)).collect(),
    };
    let deviation = local_model(&certificate, s)?.max_table_deviation(model)?;
    Ok(if deviation <= tol {
        LocalVerdict::Local(certificate)
    } else {
        LocalVerdict::NonLocal { deviation }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;

    fn s222() -> BellScenario {
        BellScenario::with_sizes(2, 2, 2).unwrap()
    }

    /// Party 0 outputs party 1's input, party 1 outputs 0.
    fn signalling() -> EmpiricalModel {
        let s = s222();
        let f = JointFunction::from_fn(s, |x| vec![x[1], 0]).unwrap();
        model_of(&f)
    }

    #[test]
    fn agreement_set_examples() {
        let s = BellScenario::with_sizes(3, 2, 2).unwrap();
        let x = s.joint_input(vec![0, 1, 0]).unwrap();
        let y = s.joint_input(vec![0, 0, 0]).unwrap();
        assert_eq!(agreement_set(&x, &x).unwrap(), s.all_parties());
        assert_eq!(agreement_set(&x, &y).unwrap(), PartySubset::new([0, 2]));
        let s2 = s222();
        let a = s2.joint_input(vec![0, 1]).unwrap();
        let b = s2.joint_input(vec![1, 0]).unwrap();
        assert!(agreement_set(&a, &b).unwrap().is_empty());
        assert!(agreement_set(&a, &x).is_err());
    }

    #[test]
    fn single_party_models_never_signal() {
        let s = BellScenario::with_sizes(1, 3, 2).unwrap();
        let mut rng = generators::rng(7);
        let m = generators::random_model(&mut rng, &s).unwrap();
        assert!(is_no_signalling(&m, 1e-9).unwrap().passed());
        assert!(is_no_signalling_fast(&m, 1e-9).unwrap().passed());
    }

    #[test]
    fn pr_box_is_no_signalling() {
        let pr = generators::pr_box();
        assert!(is_no_signalling(&pr, 1e-9).unwrap().passed());
        assert!(is_no_signalling_fast(&pr, 1e-9).unwrap().passed());
        // brute force: every single-party marginal is uniform for every input
        for (_, d) in pr.rows() {
            for j in 0..2 {
                let m = d.marginalize(&PartySubset::new([j])).unwrap();
                assert_eq!(m.prob(&[0]), 0.5);
                assert_eq!(m.prob(&[1]), 0.5);
            }
        }
    }

    #[test]
    fn signalling_model_is_flagged_with_witness() {
        let m = signalling();
        for verdict in [
            is_no_signalling(&m, 1e-9).unwrap(),
            is_no_signalling_fast(&m, 1e-9).unwrap(),
        ] {
            let w = verdict.witness().expect("must fail");
            assert_eq!(w.x, vec![0, 0]);
            assert_eq!(w.y, vec![0, 1]);
            assert_eq!(w.subset, PartySubset::new([0]));
            assert_eq!(w.deviation, 1.0);
        }
    }

    #[test]
    fn nonpositive_tolerance_is_rejected() {
        assert!(is_no_signalling(&generators::pr_box(), 0.0).is_err());
    }

    #[test]
    fn local_model_examples() {
        let s = s222();
        let zero = ResponseFunction::from_fn(&s, |_, _| 0).unwrap();
        let one = ResponseFunction::from_fn(&s, |_, _| 1).unwrap();
        let m = local_model(&HiddenVariableMeasure::dirac(zero.clone()), &s).unwrap();
        for (_, d) in m.rows() {
            assert_eq!(d.support(), &[(vec![0, 0], 1.0)]);
        }

        let mu = HiddenVariableMeasure::new(&s, [(zero, 0.5), (one, 0.5)]).unwrap();
        for (_, d) in local_model(&mu, &s).unwrap().rows() {
            assert_eq!(d.support(), &[(vec![0, 0], 0.5), (vec![1, 1], 0.5)]);
        }

        let echo = ResponseFunction::from_fn(&s, |_, i| i).unwrap();
        for (x, d) in local_model(&HiddenVariableMeasure::dirac(echo), &s).unwrap().rows() {
            assert_eq!(d.support(), &[(x, 1.0)]);
        }
    }

    #[test]
    fn measure_validation() {
        let s = s222();
        let zero = ResponseFunction::from_fn(&s, |_, _| 0).unwrap();
        assert!(HiddenVariableMeasure::new(&s, [(zero.clone(), 0.5), (zero.clone(), 0.5)]).is_err());
        assert!(HiddenVariableMeasure::new(&s, [(zero, 0.9)]).is_err());
        assert!(ResponseFunction::new(&s, vec![0, 0, 0]).is_err());
        assert!(ResponseFunction::new(&s, vec![0, 0, 0, 2]).is_err());
    }

    #[test]
    fn functional_ns_examples() {
        let s = s222();
        let constant = JointFunction::from_fn(s.clone(), |_| vec![1, 0]).unwrap();
        assert!(functional_ns_check(&constant).passed());
        let hat = extract_hat_function(&constant).unwrap();
        assert_eq!(hat.table(), &[1, 1, 0, 0]);

        let echo = JointFunction::from_fn(s.clone(), |x| x.to_vec()).unwrap();
        assert!(functional_ns_check(&echo).passed());
        let hat = extract_hat_function(&echo).unwrap();
        for j in 0..2 {
            for i in 0..2 {
                assert_eq!(hat.respond(j, i), i);
            }
        }
        for (x, d) in model_of(&echo).rows() {
            assert_eq!(d.support(), &[(x, 1.0)]);
        }

        let bad = JointFunction::from_fn(s, |x| vec![x[1], 0]).unwrap();
        assert_eq!(
            functional_ns_check(&bad),
            FnsVerdict::Fail {
                party: 0,
                x: vec![0, 0],
                y: vec![0, 1]
            }
        );
        assert!(matches!(
            extract_hat_function(&bad),
            Err(Error::NotFunctionallyNoSignalling { party: 0, .. })
        ));
        assert!(!is_no_signalling(&model_of(&bad), 1e-9).unwrap().passed());
    }

    #[test]
    fn every_functional_ns_function_on_222_round_trips() {
        // exhaustive over all 4^4 joint functions on the 2-2-2 scenario
        let s = s222();
        let mut passing = 0;
        for code in 0..256usize {
            let f = JointFunction::from_fn(s.clone(), |x| {
                let k = s.joint_input_index(x);
                let o = (code >> (2 * k)) & 3;
                vec![o & 1, o >> 1]
            })
            .unwrap();
            if functional_ns_check(&f).passed() {
                passing += 1;
                let hat = extract_hat_function(&f).unwrap();
                let lhs = local_model(&HiddenVariableMeasure::dirac(hat), &s).unwrap();
                assert_eq!(lhs, model_of(&f));
                assert!(is_no_signalling(&model_of(&f), 1e-9).unwrap().passed());
            } else {
                assert!(!is_no_signalling(&model_of(&f), 1e-9).unwrap().passed());
            }
        }
        // each party independently picks one of 4 maps {0,1} -> {0,1}
        assert_eq!(passing, 16);
    }

    #[test]
    fn is_local_examples() {
        let s = s222();
        let mut rng = generators::rng(11);
        for _ in 0..20 {
            let mu = generators::random_measure(&mut rng, &s, 4).unwrap();
            let m = local_model(&mu, &s).unwrap();
            let LocalVerdict::Local(cert) = is_local(&m, 1e-9).unwrap() else {
                panic!("local model rejected");
            };
            assert!(local_model(&cert, &s).unwrap().max_table_deviation(&m).unwrap() <= 1e-9);
        }

        assert!(!is_local(&generators::pr_box(), 1e-9).unwrap().passed());

        let uniform = EmpiricalModel::from_fn(s.clone(), |_| {
            FiniteDist::uniform(s.all_parties(), 2)
        })
        .unwrap();
        assert!(is_local(&uniform, 1e-9).unwrap().passed());

        let big = BellScenario::with_sizes(3, 3, 3).unwrap();
        let m = EmpiricalModel::from_fn(big.clone(), |_| FiniteDist::uniform(big.all_parties(), 3))
            .unwrap();
        assert!(matches!(is_local(&m, 1e-9), Err(Error::Capacity(_))));
    }

    #[test]
    fn mixtures_of_models() {
        let s = s222();
        let pr = generators::pr_box();
        let echo = model_of(&JointFunction::from_fn(s, |x| x.to_vec()).unwrap());
        let mixed = EmpiricalModel::mix(&[(0.3, &pr), (0.7, &echo)]).unwrap();
        assert!(is_no_signalling(&mixed, 1e-9).unwrap().passed());
        let countable = EmpiricalModel::countable_mix(crate::dist::geometric_weights(), |j| {
            if j % 2 == 0 { pr.clone() } else { echo.clone() }
        })
        .unwrap();
        assert!(is_no_signalling(&countable, 1e-9).unwrap().passed());
        assert!(EmpiricalModel::mix(&[]).is_err());
    }
}
