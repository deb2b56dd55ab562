//! Built-in worked examples and comparison against their reference forms.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::domain::Domain;
use crate::expr::{parse, Expr};
use crate::model::{load_problem, parse_problem, FileFormat, Problem, ProblemFileError};
use crate::par::Exec;
use crate::synth::{SynthesisResult, ValueFunction};

/// Grid tolerance used when canonical forms differ.
pub const GRID_TOL: f64 = 1e-10;
/// Per-axis resolution of the comparison grid.
pub const COMPARE_RESOLUTION: usize = 41;

const BUILTIN: [(&str, &str); 10] = [
    ("case1_sqrt", include_str!("../systems/case1_sqrt.toml")),
    ("case1b_cubic", include_str!("../systems/case1b_cubic.toml")),
    ("mass_spring", include_str!("../systems/mass_spring.toml")),
    ("van_der_pol", include_str!("../systems/van_der_pol.toml")),
    ("strict_feedback", include_str!("../systems/strict_feedback.toml")),
    ("double_integrator", include_str!("../systems/double_integrator.toml")),
    ("linear_combination", include_str!("../systems/linear_combination.toml")),
    ("cubic_spring", include_str!("../systems/cubic_spring.toml")),
    ("unicycle", include_str!("../systems/unicycle.toml")),
    ("unicycle_3rd", include_str!("../systems/unicycle_3rd.toml")),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub source: String,
    pub problem: Problem,
}

/// Names of the built-in entries in registry order.
pub fn names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}

fn entry(fallback: &str, text: &str) -> Result<Entry, ProblemFileError> {
    let problem = parse_problem(text, FileFormat::sniff(text))?;
    let name = problem.name.clone().unwrap_or_else(|| fallback.to_string());
    let source = problem.source.clone().unwrap_or_default();
    Ok(Entry {
        name,
        source,
        problem,
    })
}

/// The built-in registry. The files are compiled in, so a parse failure is a
/// bug in the crate.
pub fn builtin() -> Vec<Entry> {
    BUILTIN
        .iter()
        .map(|(n, t)| entry(n, t).unwrap_or_else(|e| panic!("built-in entry {n}: {e}")))
        .collect()
}

pub fn get(name: &str) -> Option<Entry> {
    let (n, t) = BUILTIN.iter().find(|(n, _)| *n == name)?;
    entry(n, t).ok()
}

/// Every `*.toml` and `*.json` file in `dir`, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<Entry>, ProblemFileError> {
    let io = |source| ProblemFileError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut paths = Vec::new();
    for d in fs::read_dir(dir).map_err(io)? {
        let p = d.map_err(io)?.path();
        if matches!(p.extension().and_then(|e| e.to_str()), Some("toml" | "json")) {
            paths.push(p);
        }
    }
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let problem = load_problem(p)?;
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("entry");
            Ok(Entry {
                name: problem.name.clone().unwrap_or_else(|| stem.to_string()),
                source: problem.source.clone().unwrap_or_default(),
                problem,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "match", rename_all = "kebab-case")]
pub enum FieldMatch {
    /// Canonical forms are structurally equal.
    Canonical,
    /// Canonical forms differ but the values agree on the grid.
    Grid { max_diff: f64 },
    Mismatch {
        expected: String,
        actual: String,
        max_diff: f64,
        witness: Vec<f64>,
    },
}

impl FieldMatch {
    pub fn is_match(&self) -> bool {
        !matches!(self, FieldMatch::Mismatch { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub u: FieldMatch,
    #[serde(rename = "V")]
    pub v: FieldMatch,
    #[serde(rename = "L")]
    pub l: FieldMatch,
}

impl Comparison {
    pub fn is_match(&self) -> bool {
        self.u.is_match() && self.v.is_match() && self.l.is_match()
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, m) in [("u", &self.u), ("V", &self.v), ("L", &self.l)] {
            match m {
                FieldMatch::Canonical => writeln!(f, "  {name}: match (canonical)")?,
                FieldMatch::Grid { max_diff } => {
                    writeln!(f, "  {name}: match (grid, max diff {max_diff:.1e})")?
                }
                FieldMatch::Mismatch {
                    expected,
                    actual,
                    max_diff,
                    witness,
                } => {
                    writeln!(f, "  {name}: MISMATCH")?;
                    writeln!(f, "    - expected: {expected}")?;
                    writeln!(f, "    + actual:   {actual}")?;
                    writeln!(f, "    largest difference {max_diff:.3e} at {witness:?}")?;
                }
            }
        }
        Ok(())
    }
}

/// Largest `|a(x) - b(x)|` on the grid and where it occurs. Points where
/// either side is not finite count as infinite differences.
fn grid_diff(
    a: &(dyn Fn(&[f64]) -> f64 + Sync),
    b: &(dyn Fn(&[f64]) -> f64 + Sync),
    domain: &Domain,
) -> (f64, Vec<f64>) {
    let pts = domain.grid(COMPARE_RESOLUTION);
    let diffs = Exec::Parallel.map(&pts, |x| {
        let d = (a(x) - b(x)).abs();
        if d.is_nan() {
            f64::INFINITY
        } else {
            d
        }
    });
    let (i, d) = diffs
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
    (d, pts[i].clone())
}

fn compare_values(
    expected: &Expr,
    actual_text: String,
    actual_canon: Option<&Expr>,
    actual: &(dyn Fn(&[f64]) -> f64 + Sync),
    domain: &Domain,
) -> FieldMatch {
    if actual_canon == Some(expected) {
        return FieldMatch::Canonical;
    }
    let e = expected.compile();
    let (max_diff, witness) = grid_diff(&|x| e.eval(x), actual, domain);
    if max_diff <= GRID_TOL {
        FieldMatch::Grid { max_diff }
    } else {
        FieldMatch::Mismatch {
            expected: expected.to_string(),
            actual: actual_text,
            max_diff,
            witness,
        }
    }
}

fn compare_expr(expected: &Expr, actual: &Expr, domain: &Domain) -> FieldMatch {
    let c = actual.compile();
    compare_values(expected, actual.to_string(), Some(actual), &|x| c.eval(x), domain)
}

fn compare_value(expected: &Expr, actual: &ValueFunction, domain: &Domain) -> FieldMatch {
    let c = actual.compile();
    compare_values(
        expected,
        actual.to_string(),
        actual.as_expr(),
        &|x| c.eval(x).unwrap_or(f64::NAN),
        domain,
    )
}

/// Compares `result` with the reference forms of an entry on `domain`.
///
/// # Panics
/// If the entry has no `[expected]` block; [`crate::model::load_problem`]
/// has already validated that the strings parse.
pub fn compare(entry: &Entry, result: &SynthesisResult, domain: &Domain) -> Comparison {
    let exp = entry
        .problem
        .expected
        .as_ref()
        .unwrap_or_else(|| panic!("entry {} has no expected forms", entry.name));
    let p = |s: &str| parse(s).expect("validated when the entry was loaded");
    Comparison {
        u: compare_expr(&p(&exp.u), &result.u, domain),
        v: compare_value(&p(&exp.v), &result.value, domain),
        l: compare_expr(&p(&exp.l), &result.l_state, domain),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::synthesize_problem;

    #[test]
    fn builtin_entries_load() {
        let all = builtin();
        assert_eq!(all.len(), 10);
        for (e, n) in all.iter().zip(names()) {
            assert_eq!(e.name, n);
            assert!(e.problem.expected.is_some(), "{n}");
        }
    }

    #[test]
    fn tampered_expectation_is_reported() {
        let mut e = get("van_der_pol").unwrap();
        let res = synthesize_problem(&e.problem, None).unwrap();
        let d = e.problem.domain_or_default();
        assert!(compare(&e, &res, &d).is_match());
        e.problem.expected.as_mut().unwrap().u = "-2*x2".into();
        let c = compare(&e, &res, &d);
        assert!(!c.is_match());
        assert!(c.to_string().contains("- expected: -2*x2"), "{c}");
    }
}
