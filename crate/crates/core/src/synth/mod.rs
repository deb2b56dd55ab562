//! Controller, running cost and value function synthesis.

mod conditions;
mod hjb;
mod root;
mod second;
mod third;
mod value;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Domain;
use crate::expr::{Expr, ExprError};
use crate::model::{check_case, classify, Case, CaseTag, CostSpec, ModelError, Problem, System};
use crate::par::Exec;

pub use conditions::{
    evaluate as evaluate_predicate, sample_resolution, Condition, ConditionKind, Evaluation,
    Predicate, Region, Status, NONNEG_TOL, STRICT_MARGIN,
};
pub use hjb::{hjb_residual, HjbEvaluator};
pub use root::stabilizing_root;
pub use second::{synthesize_case1, synthesize_case1b, synthesize_case2, synthesize_case3};
pub use third::synthesize_third_order;
pub use value::{CompiledValue, IntegralTerm, ValueFunction, VALUE_QUAD_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub case: CaseTag,
    pub u: Expr,
    /// State part of the running cost; the full cost is `L_state + r u^2`.
    #[serde(rename = "L_state")]
    pub l_state: Expr,
    #[serde(rename = "V")]
    pub value: ValueFunction,
    pub gains: BTreeMap<String, f64>,
    pub conditions: Vec<Condition>,
    pub warnings: Vec<String>,
    /// Region on which local claims are made, when one is known explicitly.
    pub local_region: Option<Domain>,
}

impl SynthesisResult {
    /// Region used for local claims on `domain`.
    pub fn local_domain(&self, domain: &Domain) -> Domain {
        self.local_region
            .clone()
            .unwrap_or_else(|| domain.shrink(10.0))
    }

    pub fn condition(&self, id: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.id == id)
    }
}

/// Partially assembled result shared by the case implementations.
pub(crate) struct Draft {
    pub case: Case,
    pub u: Expr,
    pub l_state: Expr,
    pub value: ValueFunction,
    pub gains: BTreeMap<String, f64>,
    pub conditions: Vec<Condition>,
    pub warnings: Vec<String>,
    pub local_region: Option<Domain>,
}

impl Draft {
    pub fn new(case: Case, u: Expr, l_state: Expr, value: ValueFunction) -> Draft {
        Draft {
            case,
            u,
            l_state,
            value,
            gains: BTreeMap::new(),
            conditions: Vec::new(),
            warnings: Vec::new(),
            local_region: None,
        }
    }

    pub fn gain(&mut self, name: &str, v: f64) {
        self.gains.insert(name.to_string(), v);
    }

    pub fn cond(
        &mut self,
        id: &str,
        description: &str,
        kind: ConditionKind,
        region: Region,
        predicate: Predicate,
    ) {
        self.conditions
            .push(Condition::new(id, description, kind, region, predicate));
    }

    /// Adds the common conditions, checks the boundary values and evaluates
    /// every condition on `domain`.
    pub fn finish(mut self, domain: &Domain) -> Result<SynthesisResult, SynthError> {
        let n = domain.dim();
        let origin = vec![0.0; n];
        for (name, v) in [
            ("u", self.u.eval(&origin)?),
            ("L_state", self.l_state.eval(&origin)?),
            ("V", self.value.eval(&origin)?),
        ] {
            if v.abs() > 1e-12 {
                return Err(SynthError::Precondition(format!(
                    "{name}(0) = {v}, expected 0"
                )));
            }
        }
        self.cond(
            "running_cost_nonnegative",
            "state part of the running cost is non-negative",
            ConditionKind::Hypothesis,
            Region::Domain,
            Predicate::NonNegative(self.l_state.clone()),
        );
        self.cond(
            "value_positive_definite_local",
            "V is positive definite near the origin",
            ConditionKind::Claim,
            Region::Local,
            Predicate::PositiveDefinite(self.value.clone()),
        );
        let local = self
            .local_region
            .clone()
            .unwrap_or_else(|| domain.shrink(10.0));
        let conditions = self
            .conditions
            .into_iter()
            .map(|c| c.check(domain, &local, Exec::Parallel))
            .collect();
        Ok(SynthesisResult {
            case: self.case.tag(),
            u: self.u,
            l_state: self.l_state,
            value: self.value,
            gains: self.gains,
            conditions,
            warnings: self.warnings,
            local_region: self.local_region,
        })
    }
}

/// Picks the cost block to synthesize with. `choice` overrides the file's
/// preferred case; otherwise the most specific applicable case with
/// parameters present wins.
pub fn select_cost(problem: &Problem, choice: Option<Case>) -> Result<CostSpec, SynthError> {
    let sys = match &problem.system {
        System::Third(_) => {
            return match choice {
                None | Some(Case::Third) => Ok(CostSpec::ThirdOrder),
                Some(c) => Err(SynthError::Unsupported(format!(
                    "Case{c} applies to second-order systems only"
                ))),
            }
        }
        System::Second(s) => s,
    };
    if let Some(case) = choice.or(problem.preferred) {
        if case == Case::Third {
            return Err(SynthError::Unsupported(
                "third-order synthesis needs a third-order system".into(),
            ));
        }
        check_case(sys, case).map_err(SynthError::Unsupported)?;
        return problem.cost_for(case).cloned().ok_or_else(|| {
            SynthError::Precondition(format!("no cost parameters for Case{case}"))
        });
    }
    let tags = classify(sys);
    if let [CaseTag::Unsupported(reason)] = tags.as_slice() {
        return Err(SynthError::Unsupported(reason.clone()));
    }
    Case::PRIORITY
        .iter()
        .filter(|c| tags.contains(&c.tag()))
        .find_map(|&c| problem.cost_for(c).cloned())
        .ok_or_else(|| {
            let names: Vec<String> = tags.iter().map(ToString::to_string).collect();
            SynthError::Precondition(format!(
                "no cost parameters for any applicable case ({})",
                names.join(", ")
            ))
        })
}

/// Runs the synthesis selected by `cost`.
pub fn synthesize(
    system: &System,
    cost: &CostSpec,
    domain: &Domain,
) -> Result<SynthesisResult, SynthError> {
    domain
        .check_dim(system.order())
        .map_err(|e| SynthError::Precondition(e.to_string()))?;
    match (system, cost) {
        (System::Second(s), CostSpec::CaseI { g, q2 }) => synthesize_case1(s, g, q2, domain),
        (System::Second(s), CostSpec::CaseIb { k }) => synthesize_case1b(s, *k, domain),
        (System::Second(s), CostSpec::CaseII { q1, q2 }) => synthesize_case2(s, q1, *q2, domain),
        (System::Second(s), CostSpec::CaseIII { q1, q2 }) => synthesize_case3(s, *q1, *q2, domain),
        (System::Third(s), CostSpec::ThirdOrder) => synthesize_third_order(s, domain),
        (sys, cost) => Err(SynthError::Unsupported(format!(
            "Case{} does not apply to an order-{} system",
            cost.case(),
            sys.order()
        ))),
    }
}

/// Selects a cost and synthesizes on the problem's domain.
pub fn synthesize_problem(
    problem: &Problem,
    choice: Option<Case>,
) -> Result<SynthesisResult, SynthError> {
    let cost = select_cost(problem, choice)?;
    synthesize(&problem.system, &cost, &problem.domain_or_default())
}
