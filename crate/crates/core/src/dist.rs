//! Finite Bell scenarios, joint assignments and finitely supported distributions.
//!
//! Parties and symbols are addressed by index into the scenario's ordered lists.
//! A [`FiniteDist`] lives over a [`PartySubset`] and an alphabet size; its support
//! is kept sorted by assignment (party order, then symbol order) so that equality
//! and serialization are deterministic.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Absolute tolerance for normalization and probability equality.
pub const PROB_TOL: f64 = 1e-9;

/// Countable mixtures stop once the cumulative weight reaches `1 - COUNTABLE_TAIL`.
pub const COUNTABLE_TAIL: f64 = 1e-12;

const MAX_COUNTABLE_TERMS: usize = 1 << 16;

/// A finite Bell scenario `(J, I, O)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BellScenario {
    parties: Vec<String>,
    inputs: Vec<String>,
    outcomes: Vec<String>,
}

impl BellScenario {
    pub fn new(parties: Vec<String>, inputs: Vec<String>, outcomes: Vec<String>) -> Result<Self> {
        if parties.is_empty() {
            return Err(Error::Validation("scenario needs at least one party".into()));
        }
        check_distinct("party", &parties)?;
        if inputs.is_empty() || outcomes.is_empty() {
            return Err(Error::Validation(
                "input and outcome alphabets must be nonempty".into(),
            ));
        }
        check_distinct("input symbol", &inputs)?;
        check_distinct("outcome symbol", &outcomes)?;
        Ok(Self {
            parties,
            inputs,
            outcomes,
        })
    }

    /// Scenario with parties `p0..` and symbols `"0".."k-1"`.
    pub fn with_sizes(parties: usize, inputs: usize, outcomes: usize) -> Result<Self> {
        Self::new(
            (0..parties).map(|j| format!("p{j}")).collect(),
            (0..inputs).map(|i| i.to_string()).collect(),
            (0..outcomes).map(|o| o.to_string()).collect(),
        )
    }

    pub fn parties(&self) -> &[String] {
        &self.parties
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn num_parties(&self) -> usize {
        self.parties.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    pub fn all_parties(&self) -> PartySubset {
        PartySubset::full(self.parties.len())
    }

    pub fn party_index(&self, name: &str) -> Option<usize> {
        self.parties.iter().position(|p| p == name)
    }

    pub fn input_index(&self, symbol: &str) -> Option<usize> {
        self.inputs.iter().position(|s| s == symbol)
    }

    pub fn outcome_index(&self, symbol: &str) -> Option<usize> {
        self.outcomes.iter().position(|s| s == symbol)
    }

    /// `|I|^|J|`, or `None` on overflow.
    pub fn num_joint_inputs(&self) -> Option<usize> {
        checked_pow(self.inputs.len(), self.parties.len())
    }

    /// `|O|^|J|`, or `None` on overflow.
    pub fn num_joint_outcomes(&self) -> Option<usize> {
        checked_pow(self.outcomes.len(), self.parties.len())
    }

    pub fn joint_input(&self, values: Vec<usize>) -> Result<JointAssignment> {
        JointAssignment::new(self.all_parties(), values, self.inputs.len())
    }

    pub fn joint_outcome(&self, values: Vec<usize>) -> Result<JointAssignment> {
        JointAssignment::new(self.all_parties(), values, self.outcomes.len())
    }

    /// Iterates `I^J` in lexicographic order, party 0 most significant.
    pub fn joint_inputs(&self) -> Odometer {
        Odometer::new(self.parties.len(), self.inputs.len())
    }

    /// Position of a joint input in [`BellScenario::joint_inputs`] order.
    pub fn joint_input_index(&self, values: &[usize]) -> usize {
        mixed_radix_index(values, self.inputs.len())
    }

    pub fn subset_by_names<S: AsRef<str>>(&self, names: &[S]) -> Result<PartySubset> {
        names
            .iter()
            .map(|n| {
                self.party_index(n.as_ref())
                    .ok_or_else(|| Error::Domain(format!("unknown party {:?}", n.as_ref())))
            })
            .collect::<Result<Vec<_>>>()
            .map(PartySubset::new)
    }
}

fn check_distinct(what: &str, names: &[String]) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(Error::Validation(format!("duplicate {what} {n:?}")));
        }
    }
    Ok(())
}

pub(crate) fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

pub(crate) fn mixed_radix_index(values: &[usize], radix: usize) -> usize {
    values.iter().fold(0, |acc, &v| acc * radix + v)
}

/// Lexicographic enumeration of `{0..radix}^len`.
#[derive(Debug, Clone)]
pub struct Odometer {
    current: Option<Vec<usize>>,
    radix: usize,
}

impl Odometer {
    pub fn new(len: usize, radix: usize) -> Self {
        let current = (radix > 0 || len == 0).then(|| vec![0; len]);
        Self { current, radix }
    }
}

impl Iterator for Odometer {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let cur = self.current.as_mut().expect("checked above");
        let mut k = cur.len();
        loop {
            if k == 0 {
                self.current = None;
                break;
            }
            k -= 1;
            cur[k] += 1;
            if cur[k] < self.radix {
                break;
            }
            cur[k] = 0;
        }
        Some(out)
    }
}

/// A subset of a scenario's parties, stored as sorted distinct indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
#[serde(transparent)]
pub struct PartySubset(Vec<usize>);

impl PartySubset {
    pub fn new(parties: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = parties.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn full(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, party: usize) -> bool {
        self.0.binary_search(&party).is_ok()
    }

    pub fn is_subset_of(&self, other: &PartySubset) -> bool {
        self.0.iter().all(|&p| other.contains(p))
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Position of `party` within this subset.
    pub fn position(&self, party: usize) -> Option<usize> {
        self.0.binary_search(&party).ok()
    }

    /// Positions of every party of `sub` inside `self`.
    fn positions_of(&self, sub: &PartySubset) -> Result<Vec<usize>> {
        sub.iter()
            .map(|p| {
                self.position(p).ok_or_else(|| {
                    Error::Domain(format!("party {p} is not in the domain {:?}", self.0))
                })
            })
            .collect()
    }

    pub fn without(&self, party: usize) -> Self {
        Self(self.0.iter().copied().filter(|&p| p != party).collect())
    }
}

impl fmt::Display for PartySubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, p) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "p{p}")?;
        }
        write!(f, "}}")
    }
}

/// A total map from a party subset to symbols of one alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct JointAssignment {
    parties: PartySubset,
    values: Vec<usize>,
    alphabet: usize,
}

impl JointAssignment {
    pub fn new(parties: PartySubset, values: Vec<usize>, alphabet: usize) -> Result<Self> {
        if parties.len() != values.len() {
            return Err(Error::Domain(format!(
                "assignment has {} values for {} parties",
                values.len(),
                parties.len()
            )));
        }
        if let Some(&bad) = values.iter().find(|&&v| v >= alphabet) {
            return Err(Error::Domain(format!(
                "symbol {bad} outside alphabet of size {alphabet}"
            )));
        }
        Ok(Self {
            parties,
            values,
            alphabet,
        })
    }

    pub fn parties(&self) -> &PartySubset {
        &self.parties
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn get(&self, party: usize) -> Option<usize> {
        self.parties.position(party).map(|k| self.values[k])
    }

    /// The restriction `a|_U`.
    pub fn restrict(&self, subset: &PartySubset) -> Result<JointAssignment> {
        let pos = self.parties.positions_of(subset)?;
        Ok(Self {
            parties: subset.clone(),
            values: pos.iter().map(|&k| self.values[k]).collect(),
            alphabet: self.alphabet,
        })
    }
}

/// A finitely supported probability distribution over assignments to a party subset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteDist {
    parties: PartySubset,
    alphabet: usize,
    support: Vec<(Vec<usize>, f64)>,
}

impl FiniteDist {
    /// Validates and canonicalizes a distribution. Zero-probability entries are dropped.
    pub fn new(
        parties: PartySubset,
        alphabet: usize,
        entries: impl IntoIterator<Item = (Vec<usize>, f64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (values, p) in entries {
            if values.len() != parties.len() {
                return Err(Error::Domain(format!(
                    "support point {values:?} does not match {} parties",
                    parties.len()
                )));
            }
            if values.iter().any(|&v| v >= alphabet) {
                return Err(Error::Domain(format!(
                    "support point {values:?} outside alphabet of size {alphabet}"
                )));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::Validation(format!(
                    "probability {p} of {values:?} is not a nonnegative real"
                )));
            }
            if map.insert(values.clone(), p).is_some() {
                return Err(Error::Validation(format!(
                    "support point {values:?} listed twice"
                )));
            }
        }
        let total: f64 = map.values().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::Validation(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self::from_map(parties, alphabet, map))
    }

    fn from_map(parties: PartySubset, alphabet: usize, map: BTreeMap<Vec<usize>, f64>) -> Self {
        Self {
            parties,
            alphabet,
            support: map.into_iter().filter(|&(_, p)| p != 0.0).collect(),
        }
    }

    /// Point mass on `a`.
    pub fn dirac(a: &JointAssignment) -> Self {
        Self {
            parties: a.parties.clone(),
            alphabet: a.alphabet,
            support: vec![(a.values.clone(), 1.0)],
        }
    }

    pub fn uniform(parties: PartySubset, alphabet: usize) -> Result<Self> {
        let size = checked_pow(alphabet, parties.len())
            .filter(|&s| s > 0)
            .ok_or_else(|| Error::Capacity("uniform support too large or empty".into()))?;
        let p = 1.0 / size as f64;
        let support = Odometer::new(parties.len(), alphabet)
            .map(|v| (v, p))
            .collect();
        Ok(Self {
            parties,
            alphabet,
            support,
        })
    }

    pub fn parties(&self) -> &PartySubset {
        &self.parties
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    /// Support points in canonical order.
    pub fn support(&self) -> &[(Vec<usize>, f64)] {
        &self.support
    }

    pub fn prob(&self, values: &[usize]) -> f64 {
        self.support
            .binary_search_by(|(v, _)| v.as_slice().cmp(values))
            .map(|k| self.support[k].1)
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.support.iter().map(|(_, p)| p).sum()
    }

    /// Push-forward along the restriction to `subset`.
    pub fn marginalize(&self, subset: &PartySubset) -> Result<FiniteDist> {
        let pos = self.parties.positions_of(subset)?;
        let mut map: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (values, p) in &self.support {
            let image: Vec<usize> = pos.iter().map(|&k| values[k]).collect();
            *map.entry(image).or_insert(0.0) += p;
        }
        Ok(Self::from_map(subset.clone(), self.alphabet, map))
    }

    fn check_same_domain(&self, other: &FiniteDist) -> Result<()> {
        if self.parties != other.parties || self.alphabet != other.alphabet {
            return Err(Error::Domain(format!(
                "distributions over different domains: {} / {} symbols vs {} / {} symbols",
                self.parties, self.alphabet, other.parties, other.alphabet
            )));
        }
        Ok(())
    }

    /// Finite mixture `Σ w_i · d_i`.
    pub fn convex_combination<'a>(
        terms: impl IntoIterator<Item = (f64, &'a FiniteDist)>,
    ) -> Result<FiniteDist> {
        let mut iter = terms.into_iter().peekable();
        let first = *iter
            .peek()
            .map(|(_, d)| d)
            .ok_or_else(|| Error::Validation("empty convex combination".into()))?;
        let mut total_weight = 0.0;
        let mut map: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (w, d) in iter {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Validation(format!("negative or non-finite weight {w}")));
            }
            first.check_same_domain(d)?;
            total_weight += w;
            for (values, p) in &d.support {
                *map.entry(values.clone()).or_insert(0.0) += w * p;
            }
        }
        if (total_weight - 1.0).abs() > PROB_TOL {
            return Err(Error::Validation(format!(
                "mixture weights sum to {total_weight}, not 1"
            )));
        }
        Ok(Self::from_map(first.parties.clone(), first.alphabet, map))
    }

    /// Countable mixture, truncated with [`truncate_weights`].
    pub fn countable_combination(
        weights: impl IntoIterator<Item = f64>,
        mut term: impl FnMut(usize) -> FiniteDist,
    ) -> Result<FiniteDist> {
        let weights = truncate_weights(weights)?;
        let terms: Vec<FiniteDist> = (0..weights.len()).map(&mut term).collect();
        Self::convex_combination(weights.iter().copied().zip(terms.iter()))
    }

    /// Largest pointwise absolute difference, with the point where it occurs.
    pub fn max_deviation(&self, other: &FiniteDist) -> Result<(f64, Vec<usize>)> {
        self.check_same_domain(other)?;
        let mut best = (0.0, Vec::new());
        let mut consider = |values: &Vec<usize>, dev: f64| {
            if dev > best.0 || best.1.is_empty() && dev >= best.0 {
                best = (dev, values.clone());
            }
        };
        for (values, p) in &self.support {
            consider(values, (p - other.prob(values)).abs());
        }
        for (values, q) in &other.support {
            consider(values, (self.prob(values) - q).abs());
        }
        Ok(best)
    }

    pub fn approx_eq(&self, other: &FiniteDist, tol: f64) -> bool {
        self.max_deviation(other).is_ok_and(|(d, _)| d <= tol)
    }
}

/// Cuts a (possibly infinite) weight sequence once its cumulative sum reaches
/// `1 - COUNTABLE_TAIL`, assigning the remainder to the last retained term.
pub fn truncate_weights(weights: impl IntoIterator<Item = f64>) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut total = 0.0;
    for w in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Validation(format!("negative or non-finite weight {w}")));
        }
        out.push(w);
        total += w;
        if total >= 1.0 - COUNTABLE_TAIL {
            break;
        }
        if out.len() >= MAX_COUNTABLE_TERMS {
            return Err(Error::Capacity(format!(
                "weights did not reach 1 within {MAX_COUNTABLE_TERMS} terms"
            )));
        }
    }
    if out.is_empty() || (total - 1.0).abs() > PROB_TOL && total < 1.0 - COUNTABLE_TAIL {
        return Err(Error::Validation(format!(
            "weight sequence sums to {total}, not 1"
        )));
    }
    if total > 1.0 + PROB_TOL {
        return Err(Error::Validation(format!("weights overshoot 1: {total}")));
    }
    let last = out.last_mut().expect("nonempty");
    *last += 1.0 - total;
    Ok(out)
}

/// Weights `2^-(j+1)` for `j = 0, 1, ...`.
pub fn geometric_weights() -> impl Iterator<Item = f64> {
    (0..).map(|j: i32| 0.5f64.powi(j + 1))
}
