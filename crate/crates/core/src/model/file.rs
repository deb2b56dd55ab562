//! System description files (TOML or JSON).

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::{Case, CostSpec, ModelError, SecondOrderSystem, System, ThirdOrderSystem};
use crate::domain::Domain;
use crate::expr::{parse, Expr, ExprError};

#[derive(Debug, Error)]
pub enum ProblemFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("TOML: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("key `{key}`: {source}")]
    Expr { key: String, source: ExprError },
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Toml,
    Json,
}

impl FileFormat {
    /// JSON if the first non-blank character opens an object, else TOML.
    pub fn sniff(text: &str) -> FileFormat {
        if text.trim_start().starts_with('{') {
            FileFormat::Json
        } else {
            FileFormat::Toml
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    name: Option<String>,
    source: Option<String>,
    order: u8,
    f1: Option<String>,
    f2: Option<String>,
    f: Option<String>,
    g: Option<String>,
    d: Option<f64>,
    b: f64,
    r: f64,
    q1: Option<f64>,
    q2: Option<f64>,
    q3: Option<f64>,
    cost: Option<RawCost>,
    domain: Option<BTreeMap<String, [f64; 2]>>,
    expected: Option<Expected>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCost {
    case: Option<String>,
    g: Option<String>,
    #[serde(rename = "Q2")]
    big_q2: Option<String>,
    k: Option<f64>,
    #[serde(rename = "Q1")]
    big_q1: Option<String>,
    q1: Option<f64>,
    q2: Option<f64>,
}

/// Reference closed forms attached to a registry entry. `L` is the state
/// part of the running cost (the `r u^2` term is implied).
#[derive(Debug, Clone, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    pub u: String,
    #[serde(rename = "V")]
    pub v: String,
    #[serde(rename = "L")]
    pub l: String,
    pub overall: Option<String>,
}

/// A parsed system file: dynamics, the cost parameters it supplies, and
/// optional metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub name: Option<String>,
    pub source: Option<String>,
    pub system: System,
    pub costs: Vec<CostSpec>,
    pub preferred: Option<Case>,
    pub domain: Option<Domain>,
    pub expected: Option<Expected>,
}

impl Problem {
    /// Cost parameters for `case`, if the file supplies them.
    pub fn cost_for(&self, case: Case) -> Option<&CostSpec> {
        self.costs.iter().find(|c| c.case() == case)
    }

    pub fn domain_or_default(&self) -> Domain {
        self.domain
            .clone()
            .unwrap_or_else(|| Domain::default_for(self.system.order()))
    }
}

pub fn load_problem(path: &Path) -> Result<Problem, ProblemFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ProblemFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => FileFormat::Json,
        Some("toml") => FileFormat::Toml,
        _ => FileFormat::sniff(&text),
    };
    parse_problem(&text, format)
}

pub fn parse_problem(text: &str, format: FileFormat) -> Result<Problem, ProblemFileError> {
    let raw: RawProblem = match format {
        FileFormat::Toml => toml::from_str(text)?,
        FileFormat::Json => serde_json::from_str(text)?,
    };
    build(raw)
}

fn expr(key: &str, text: Option<&String>) -> Result<Option<Expr>, ProblemFileError> {
    text.map(|t| {
        parse(t).map_err(|source| ProblemFileError::Expr {
            key: key.to_string(),
            source,
        })
    })
    .transpose()
}

fn required(key: &'static str, text: Option<&String>) -> Result<Expr, ProblemFileError> {
    expr(key, text)?.ok_or(ProblemFileError::Missing(key))
}

fn build(raw: RawProblem) -> Result<Problem, ProblemFileError> {
    let cost = raw.cost.unwrap_or_default();
    let preferred = cost
        .case
        .as_deref()
        .map(str::parse::<Case>)
        .transpose()
        .map_err(ProblemFileError::Invalid)?;
    let (system, costs) = match raw.order {
        2 => {
            let sys = SecondOrderSystem::new(
                required("f1", raw.f1.as_ref())?,
                required("f2", raw.f2.as_ref())?,
                raw.b,
                raw.r,
            )?;
            let mut costs = Vec::new();
            let g = expr("cost.g", cost.g.as_ref())?;
            let big_q2 = expr("cost.Q2", cost.big_q2.as_ref())?;
            if let (Some(g), Some(q2)) = (g, big_q2) {
                costs.push(CostSpec::CaseI { g, q2 });
            }
            if let Some(k) = cost.k {
                costs.push(CostSpec::CaseIb { k });
            }
            let big_q1 = expr("cost.Q1", cost.big_q1.as_ref())?;
            if let (Some(q1), Some(q2)) = (big_q1, cost.q2) {
                costs.push(CostSpec::CaseII { q1, q2 });
            }
            if let (Some(q1), Some(q2)) = (cost.q1, cost.q2) {
                costs.push(CostSpec::CaseIII { q1, q2 });
            }
            (System::Second(sys), costs)
        }
        3 => {
            let sys = ThirdOrderSystem::new(
                required("f", raw.f.as_ref())?,
                required("g", raw.g.as_ref())?,
                raw.d.unwrap_or(0.0),
                raw.b,
                raw.q1.ok_or(ProblemFileError::Missing("q1"))?,
                raw.q2.ok_or(ProblemFileError::Missing("q2"))?,
                raw.q3.ok_or(ProblemFileError::Missing("q3"))?,
                raw.r,
            )?;
            (System::Third(sys), vec![CostSpec::ThirdOrder])
        }
        n => {
            return Err(ProblemFileError::Invalid(format!(
                "order must be 2 or 3, got {n}"
            )))
        }
    };
    let domain = raw
        .domain
        .map(|m| domain_from_map(m, system.order()))
        .transpose()?;
    if let Some(e) = &raw.expected {
        for (key, text) in [("expected.u", &e.u), ("expected.V", &e.v), ("expected.L", &e.l)] {
            expr(key, Some(text))?;
        }
    }
    Ok(Problem {
        name: raw.name,
        source: raw.source,
        system,
        costs,
        preferred,
        domain,
        expected: raw.expected,
    })
}

fn domain_from_map(
    m: BTreeMap<String, [f64; 2]>,
    order: usize,
) -> Result<Domain, ProblemFileError> {
    let mut bounds = Vec::with_capacity(order);
    for i in 1..=order {
        let key = format!("x{i}");
        let [lo, hi] = *m
            .get(&key)
            .ok_or_else(|| ProblemFileError::Invalid(format!("domain lacks {key}")))?;
        bounds.push((lo, hi));
    }
    if m.len() != order {
        return Err(ProblemFileError::Invalid(
            "domain has keys beyond the system order".into(),
        ));
    }
    Domain::new(bounds).map_err(|e| ProblemFileError::Invalid(e.to_string()))
}
