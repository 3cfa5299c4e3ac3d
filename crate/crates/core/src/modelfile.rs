//! JSON documents for scenarios, empirical models, measures and verdicts.
//!
//! ```json
//! {"scenario": {"parties": ["A","B"], "inputs": [0,1], "outcomes": [0,1]},
//!  "table": [{"input": [0,0], "dist": [{"outcome": [0,0], "p": 0.5}, ...]}, ...]}
//! ```
//!
//! Symbols may be written as JSON strings or integers; they are compared by
//! their text.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dist::{BellScenario, FiniteDist};
use crate::error::{Error, Result};
use crate::nosignalling::{EmpiricalModel, HiddenVariableMeasure, NsWitness, ResponseFunction};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Symbol {
    Int(i64),
    Text(String),
}

impl Symbol {
    fn text(&self) -> String {
        match self {
            Symbol::Int(i) => i.to_string(),
            Symbol::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub parties: Vec<Symbol>,
    pub inputs: Vec<Symbol>,
    pub outcomes: Vec<Symbol>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointDoc {
    pub outcome: Vec<Symbol>,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowDoc {
    pub input: Vec<Symbol>,
    pub dist: Vec<PointDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub scenario: ScenarioDoc,
    pub table: Vec<RowDoc>,
}

fn texts(symbols: &[Symbol]) -> Vec<String> {
    symbols.iter().map(Symbol::text).collect()
}

fn find(symbol: &Symbol, names: &[String], what: &str) -> Result<usize> {
    let t = symbol.text();
    names
        .iter()
        .position(|n| *n == t)
        .ok_or_else(|| Error::Validation(format!("unknown {what} symbol {t:?}")))
}

fn lookup(symbols: &[Symbol], names: &[String], arity: usize, what: &str) -> Result<Vec<usize>> {
    if symbols.len() != arity {
        return Err(Error::Validation(format!(
            "{what} {:?} has {} entries, expected {arity}",
            texts(symbols),
            symbols.len(),
        )));
    }
    symbols.iter().map(|s| find(s, names, what)).collect()
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_model(&self) -> Result<EmpiricalModel> {
        let scenario = BellScenario::new(
            texts(&self.scenario.parties),
            texts(&self.scenario.inputs),
            texts(&self.scenario.outcomes),
        )?;
        let rows = scenario.num_joint_inputs().ok_or_else(|| {
            Error::Capacity("joint input space overflows".into())
        })?;
        let mut table: Vec<Option<FiniteDist>> = vec![None; rows.min(self.table.len() + 1)];
        if self.table.len() != rows {
            return Err(Error::Validation(format!(
                "table has {} rows, scenario has {rows} joint inputs",
                self.table.len()
            )));
        }
        for row in &self.table {
            let x = lookup(&row.input, scenario.inputs(), scenario.num_parties(), "input")?;
            let points = row
                .dist
                .iter()
                .map(|pt| Ok((lookup(&pt.outcome, scenario.outcomes(), scenario.num_parties(), "outcome")?, pt.p)))
                .collect::<Result<Vec<_>>>()?;
            let d = FiniteDist::new(scenario.all_parties(), scenario.num_outcomes(), points)
                .map_err(|e| Error::Validation(format!("row {:?}: {e}", texts(&row.input))))?;
            let slot = &mut table[scenario.joint_input_index(&x)];
            if slot.replace(d).is_some() {
                return Err(Error::Validation(format!(
                    "joint input {:?} listed twice",
                    texts(&row.input)
                )));
            }
        }
        let table = table.into_iter().map(|d| d.expect("all rows present")).collect();
        EmpiricalModel::new(scenario, table)
    }

    pub fn from_model(model: &EmpiricalModel) -> Self {
        let s = model.scenario();
        let sym = |names: &[String], idx: &[usize]| -> Vec<Symbol> {
            idx.iter().map(|&k| Symbol::Text(names[k].clone())).collect()
        };
        let all = |names: &[String]| names.iter().cloned().map(Symbol::Text).collect();
        ModelFile {
            scenario: ScenarioDoc {
                parties: all(s.parties()),
                inputs: all(s.inputs()),
                outcomes: all(s.outcomes()),
            },
            table: model
                .rows()
                .map(|(x, d)| RowDoc {
                    input: sym(s.inputs(), &x),
                    dist: d
                        .support()
                        .iter()
                        .map(|(o, p)| PointDoc {
                            outcome: sym(s.outcomes(), o),
                            p: *p,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Reads and validates a model document.
pub fn parse_model(text: &str) -> Result<EmpiricalModel> {
    ModelFile::parse(text)?.to_model()
}

pub fn model_to_json(model: &EmpiricalModel) -> String {
    serde_json::to_string_pretty(&ModelFile::from_model(model)).expect("serializable")
}

fn names(list: &[String], idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&k| list[k].clone()).collect()
}

/// Witness with party and symbol names.
pub fn witness_json(scenario: &BellScenario, w: &NsWitness) -> Value {
    json!({
        "x": names(scenario.inputs(), &w.x),
        "y": names(scenario.inputs(), &w.y),
        "subset": names(scenario.parties(), w.subset.as_slice()),
        "outcome": names(scenario.outcomes(), &w.outcome),
        "deviation": w.deviation,
    })
}

fn response_json(scenario: &BellScenario, f: &ResponseFunction) -> Value {
    let mut rows = Vec::new();
    for (j, party) in scenario.parties().iter().enumerate() {
        for (i, input) in scenario.inputs().iter().enumerate() {
            rows.push(json!([party, input, scenario.outcomes()[f.respond(j, i)]]));
        }
    }
    Value::Array(rows)
}

/// `{"support": [{"weight": w, "response": [[party, input, outcome], ...]}, ...]}`
pub fn measure_json(scenario: &BellScenario, mu: &HiddenVariableMeasure) -> Value {
    json!({
        "support": mu.support().iter().map(|(f, w)| json!({
            "weight": w,
            "response": response_json(scenario, f),
        })).collect::<Vec<_>>()
    })
}

#[derive(Deserialize)]
struct MeasureDoc {
    support: Vec<MeasureEntry>,
}

#[derive(Deserialize)]
struct MeasureEntry {
    weight: f64,
    response: Vec<(Symbol, Symbol, Symbol)>,
}

/// Inverse of [`measure_json`].
pub fn parse_measure(scenario: &BellScenario, value: &Value) -> Result<HiddenVariableMeasure> {
    let doc: MeasureDoc = serde_json::from_value(value.clone())?;
    let cells = scenario.num_parties() * scenario.num_inputs();
    let support = doc
        .support
        .into_iter()
        .map(|entry| {
            let mut table: BTreeMap<usize, usize> = BTreeMap::new();
            for (party, input, outcome) in &entry.response {
                let j = find(party, scenario.parties(), "party")?;
                let i = find(input, scenario.inputs(), "input")?;
                let o = find(outcome, scenario.outcomes(), "outcome")?;
                table.insert(j * scenario.num_inputs() + i, o);
            }
            if table.len() != cells {
                return Err(Error::Validation("response function is not total".into()));
            }
            Ok((ResponseFunction::new(scenario, table.into_values().collect())?, entry.weight))
        })
        .collect::<Result<Vec<_>>>()?;
    HiddenVariableMeasure::new(scenario, support)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::nosignalling::{is_local, local_model, LocalVerdict};

    const PR_BOX: &str = r#"{
      "scenario": {"parties": ["A", "B"], "inputs": [0, 1], "outcomes": [0, 1]},
      "table": [
        {"input": [0, 0], "dist": [{"outcome": [0, 0], "p": 0.5}, {"outcome": [1, 1], "p": 0.5}]},
        {"input": [0, 1], "dist": [{"outcome": [0, 0], "p": 0.5}, {"outcome": [1, 1], "p": 0.5}]},
        {"input": [1, 0], "dist": [{"outcome": [0, 0], "p": 0.5}, {"outcome": [1, 1], "p": 0.5}]},
        {"input": [1, 1], "dist": [{"outcome": [0, 1], "p": 0.5}, {"outcome": [1, 0], "p": 0.5}]}
      ]
    }"#;

    #[test]
    fn parses_pr_box() {
        let m = parse_model(PR_BOX).unwrap();
        let pr = generators::pr_box();
        for ((x, d), (y, e)) in m.rows().zip(pr.rows()) {
            assert_eq!(x, y);
            assert!(d.approx_eq(e, 0.0));
        }
        assert_eq!(m.scenario().parties(), &["A".to_string(), "B".to_string()]);
    }

    #[test]
    fn model_round_trips() {
        let m = parse_model(PR_BOX).unwrap();
        let again = parse_model(&model_to_json(&m)).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(matches!(parse_model("{"), Err(Error::Json(_))));
        let missing_row = PR_BOX.replacen(
            r#"{"input": [1, 1], "dist": [{"outcome": [0, 1], "p": 0.5}, {"outcome": [1, 0], "p": 0.5}]}"#,
            r#"{"input": [1, 0], "dist": [{"outcome": [0, 1], "p": 0.5}, {"outcome": [1, 0], "p": 0.5}]}"#,
            1,
        );
        assert!(matches!(parse_model(&missing_row), Err(Error::Validation(_))));
        let unnormalized = PR_BOX.replacen("0.5", "0.6", 1);
        assert!(matches!(parse_model(&unnormalized), Err(Error::Validation(_))));
        let unknown = PR_BOX.replacen("[0, 0], \"p\"", "[0, 7], \"p\"", 1);
        assert!(matches!(parse_model(&unknown), Err(Error::Validation(_))));
        let extra = PR_BOX.replacen("\"scenario\"", "\"bogus\": 1, \"scenario\"", 1);
        assert!(parse_model(&extra).is_err());
    }

    #[test]
    fn certificate_round_trips() {
        let s = BellScenario::with_sizes(2, 2, 2).unwrap();
        let mut rng = generators::rng(3);
        let mu = generators::random_measure(&mut rng, &s, 3).unwrap();
        let m = local_model(&mu, &s).unwrap();
        let LocalVerdict::Local(cert) = is_local(&m, 1e-9).unwrap() else {
            panic!("local model rejected")
        };
        let back = parse_measure(&s, &measure_json(&s, &cert)).unwrap();
        assert_eq!(local_model(&back, &s).unwrap(), local_model(&cert, &s).unwrap());
        assert_eq!(back.support().len(), cert.support().len());
    }
}
