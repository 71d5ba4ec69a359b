//! Operator specifications and their validity oracles.
//!
//! Each operator carries a deterministic oracle that stands in for a deep
//! learning library's input-validation code: it returns `Valid` or the message
//! of the first failed check. Execution is simulated (validate, wait for the
//! configured latency, then evaluate the optional injected bug).

mod catalog;

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::value::{conforms, FieldIssue, InputTuple, ParamSpace};

pub use catalog::{builtin_operators, max_pool2d, BUILTIN_NAMES};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ValidationOutcome {
    Valid,
    Rejected(String),
}

impl ValidationOutcome {
    pub fn is_valid(&self) -> bool {
        matches!(self, ValidationOutcome::Valid)
    }

    pub fn message(&self) -> Option<&str> {
        match self {
            ValidationOutcome::Valid => None,
            ValidationOutcome::Rejected(m) => Some(m),
        }
    }
}

/// A tuple whose kinds do not match the operator signature. This is a caller
/// error, distinct from a rejected call.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("operator `{op}`: argument `{param}`: {issue}")]
pub struct SpecError {
    pub op: String,
    pub param: String,
    pub issue: String,
}

pub type Oracle = Arc<dyn Fn(&InputTuple) -> ValidationOutcome + Send + Sync>;
pub type Predicate = Arc<dyn Fn(&InputTuple) -> bool + Send + Sync>;

/// An injected defect: a condition on accepted inputs that a fuzzer should
/// still reach after filtering.
#[derive(Clone)]
pub struct BugPredicate {
    pub description: String,
    trigger: Predicate,
}

impl BugPredicate {
    pub fn new(
        description: impl Into<String>,
        trigger: impl Fn(&InputTuple) -> bool + Send + Sync + 'static,
    ) -> Self {
        BugPredicate {
            description: description.into(),
            trigger: Arc::new(trigger),
        }
    }

    pub fn triggers(&self, tuple: &InputTuple) -> bool {
        (self.trigger)(tuple)
    }
}

impl fmt::Debug for BugPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BugPredicate")
            .field("description", &self.description)
            .finish_non_exhaustive()
    }
}

/// The constraint subset a partially-correct generator enforces.
#[derive(Clone)]
pub struct PartialConstraints {
    pub description: String,
    check: Predicate,
}

impl PartialConstraints {
    pub fn new(
        description: impl Into<String>,
        check: impl Fn(&InputTuple) -> bool + Send + Sync + 'static,
    ) -> Self {
        PartialConstraints {
            description: description.into(),
            check: Arc::new(check),
        }
    }

    pub fn holds(&self, tuple: &InputTuple) -> bool {
        (self.check)(tuple)
    }
}

impl fmt::Debug for PartialConstraints {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PartialConstraints")
            .field("description", &self.description)
            .finish_non_exhaustive()
    }
}

/// Simulated per-call latency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ExecCost {
    pub valid_us: u64,
    pub rejected_us: u64,
}

impl ExecCost {
    pub const ZERO: ExecCost = ExecCost {
        valid_us: 0,
        rejected_us: 0,
    };
}

impl Default for ExecCost {
    fn default() -> Self {
        ExecCost {
            valid_us: 1_000,
            rejected_us: 100,
        }
    }
}

#[derive(Clone)]
pub struct OperatorSpec {
    pub name: String,
    pub space: ParamSpace,
    /// Human-readable constraint, as exported in the catalog.
    pub constraint: String,
    /// Rejection message templates in check order.
    pub messages: Vec<String>,
    pub exec_cost: ExecCost,
    oracle: Oracle,
    partial: Option<PartialConstraints>,
    bug: Option<BugPredicate>,
}

impl fmt::Debug for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorSpec")
            .field("name", &self.name)
            .field("space", &self.space)
            .field("constraint", &self.constraint)
            .field("exec_cost", &self.exec_cost)
            .field("partial", &self.partial)
            .field("bug", &self.bug)
            .finish_non_exhaustive()
    }
}

impl OperatorSpec {
    pub fn new(
        name: impl Into<String>,
        space: ParamSpace,
        oracle: impl Fn(&InputTuple) -> ValidationOutcome + Send + Sync + 'static,
    ) -> Self {
        OperatorSpec {
            name: name.into(),
            space,
            constraint: String::new(),
            messages: Vec::new(),
            exec_cost: ExecCost::default(),
            oracle: Arc::new(oracle),
            partial: None,
            bug: None,
        }
    }

    pub fn with_constraint(mut self, constraint: impl Into<String>) -> Self {
        self.constraint = constraint.into();
        self
    }

    pub fn with_messages(mut self, messages: &[&str]) -> Self {
        self.messages = messages.iter().map(|m| m.to_string()).collect();
        self
    }

    pub fn with_partial(mut self, partial: PartialConstraints) -> Self {
        self.partial = Some(partial);
        self
    }

    pub fn with_bug(mut self, bug: BugPredicate) -> Self {
        self.bug = Some(bug);
        self
    }

    pub fn without_bug(mut self) -> Self {
        self.bug = None;
        self
    }

    pub fn with_exec_cost(mut self, cost: ExecCost) -> Self {
        self.exec_cost = cost;
        self
    }

    pub fn partial(&self) -> Option<&PartialConstraints> {
        self.partial.as_ref()
    }

    pub fn bug(&self) -> Option<&BugPredicate> {
        self.bug.as_ref()
    }

    /// `name(a: tensor, k: int)`.
    pub fn signature(&self) -> String {
        let params: Vec<String> = self
            .space
            .params()
            .iter()
            .map(|p| format!("{}: {}", p.name, p.kind))
            .collect();
        format!("{}({})", self.name, params.join(", "))
    }

    pub fn validate(&self, tuple: &InputTuple) -> Result<ValidationOutcome, SpecError> {
        validate(self, tuple)
    }

    pub fn execute(&self, tuple: &InputTuple) -> Result<ExecutionResult, SpecError> {
        execute(self, tuple)
    }

    /// Oracle verdict without the kind check. Callers must have checked kinds.
    pub(crate) fn verdict_unchecked(&self, tuple: &InputTuple) -> ValidationOutcome {
        (self.oracle)(tuple)
    }
}

fn check_kinds(op: &OperatorSpec, tuple: &InputTuple) -> Result<(), SpecError> {
    let report = conforms(&op.space, tuple);
    if report.kinds_match() {
        return Ok(());
    }
    if report.extra_args > 0 {
        return Err(SpecError {
            op: op.name.clone(),
            param: "<extra>".into(),
            issue: format!("{} unexpected extra argument(s)", report.extra_args),
        });
    }
    let field = report
        .fields
        .iter()
        .find(|f| !f.kind_ok)
        .expect("a field failed the kind check");
    Err(SpecError {
        op: op.name.clone(),
        param: field.name.clone(),
        issue: field
            .issue
            .as_ref()
            .map(FieldIssue::to_string)
            .unwrap_or_default(),
    })
}

/// Runs the oracle after checking argument kinds.
pub fn validate(op: &OperatorSpec, tuple: &InputTuple) -> Result<ValidationOutcome, SpecError> {
    check_kinds(op, tuple)?;
    Ok(op.verdict_unchecked(tuple))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExecutionResult {
    pub outcome: ValidationOutcome,
    pub bug_triggered: bool,
    pub elapsed: Duration,
}

/// Simulated call: validate, spend the configured latency, then check the
/// injected bug on accepted inputs.
pub fn execute(op: &OperatorSpec, tuple: &InputTuple) -> Result<ExecutionResult, SpecError> {
    let start = Instant::now();
    let outcome = validate(op, tuple)?;
    let cost_us = if outcome.is_valid() {
        op.exec_cost.valid_us
    } else {
        op.exec_cost.rejected_us
    };
    if cost_us > 0 {
        std::thread::sleep(Duration::from_micros(cost_us));
    }
    let bug_triggered = outcome.is_valid() && op.bug.as_ref().is_some_and(|b| b.triggers(tuple));
    Ok(ExecutionResult {
        outcome,
        bug_triggered,
        elapsed: start.elapsed(),
    })
}

#[derive(Debug, Error, PartialEq)]
pub enum RegistryError {
    #[error("operator `{0}` is already registered")]
    Duplicate(String),
    #[error("unknown operator `{0}`")]
    Unknown(String),
}

/// Ordered operator collection: built-ins first, user registrations appended.
#[derive(Clone, Debug)]
pub struct Registry {
    ops: Vec<OperatorSpec>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Registry {
    pub fn builtin() -> Self {
        Registry {
            ops: builtin_operators(),
        }
    }

    pub fn empty() -> Self {
        Registry { ops: Vec::new() }
    }

    pub fn register(&mut self, op: OperatorSpec) -> Result<(), RegistryError> {
        if self.ops.iter().any(|o| o.name == op.name) {
            return Err(RegistryError::Duplicate(op.name));
        }
        self.ops.push(op);
        Ok(())
    }

    pub fn list_operators(&self) -> &[OperatorSpec] {
        &self.ops
    }

    pub fn get(&self, name: &str) -> Result<&OperatorSpec, RegistryError> {
        self.ops
            .iter()
            .find(|o| o.name == name)
            .ok_or_else(|| RegistryError::Unknown(name.to_string()))
    }

    /// Resolves `all` or a comma-separated list of names.
    pub fn select(&self, names: &str) -> Result<Vec<&OperatorSpec>, RegistryError> {
        if names.trim() == "all" {
            return Ok(self.ops.iter().collect());
        }
        names
            .split(',')
            .map(str::trim)
            .filter(|n| !n.is_empty())
            .map(|n| self.get(n))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &OperatorSpec> {
        self.ops.iter()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

/// Catalog entry as exported by `shapefuzz ops`.
#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub name: String,
    pub signature: String,
    pub params: ParamSpace,
    pub constraint: String,
    pub messages: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partial_constraints: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub injected_bug: Option<String>,
    pub exec_cost: ExecCost,
}

impl From<&OperatorSpec> for CatalogEntry {
    fn from(op: &OperatorSpec) -> Self {
        CatalogEntry {
            name: op.name.clone(),
            signature: op.signature(),
            params: op.space.clone(),
            constraint: op.constraint.clone(),
            messages: op.messages.clone(),
            partial_constraints: op.partial.as_ref().map(|p| p.description.clone()),
            injected_bug: op.bug.as_ref().map(|b| b.description.clone()),
            exec_cost: op.exec_cost,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{ParamSpec, Value};

    fn tuple(values: Vec<Value>) -> InputTuple {
        InputTuple::new(values)
    }

    #[test]
    fn bmm_worked_examples() {
        let reg = Registry::builtin();
        let bmm = reg.get("bmm").unwrap();
        let bad = tuple(vec![Value::tensor([10, 3, 4]), Value::tensor([10, 4])]);
        assert_eq!(
            bmm.validate(&bad).unwrap(),
            ValidationOutcome::Rejected("batch2 must be a 3D tensor".into())
        );
        let good = tuple(vec![Value::tensor([10, 3, 4]), Value::tensor([10, 4, 5])]);
        assert_eq!(bmm.validate(&good).unwrap(), ValidationOutcome::Valid);
    }

    #[test]
    fn top_k_and_split_examples() {
        let reg = Registry::builtin();
        let top_k = reg.get("top_k").unwrap();
        let out = top_k
            .validate(&tuple(vec![Value::tensor([5]), Value::int(7)]))
            .unwrap();
        assert!(!out.is_valid());
        let split = reg.get("split").unwrap();
        let out = split
            .validate(&tuple(vec![Value::tensor([6]), Value::int(3), Value::int(0)]))
            .unwrap();
        assert_eq!(out, ValidationOutcome::Valid);
    }

    #[test]
    fn kind_mismatch_is_a_spec_error() {
        let reg = Registry::builtin();
        let bmm = reg.get("bmm").unwrap();
        let err = bmm
            .validate(&tuple(vec![Value::tensor([1, 1, 1]), Value::int(3)]))
            .unwrap_err();
        assert_eq!(err.param, "mat2");
        assert!(bmm.validate(&tuple(vec![Value::tensor([1])])).is_err());
    }

    #[test]
    fn execute_reports_bugs_only_on_valid_inputs() {
        let reg = Registry::builtin();
        let bmm = reg.get("bmm").unwrap().clone().with_exec_cost(ExecCost::ZERO);
        let rejected = bmm
            .execute(&tuple(vec![Value::tensor([0, 3, 4]), Value::tensor([0, 4])]))
            .unwrap();
        assert!(!rejected.outcome.is_valid());
        assert!(!rejected.bug_triggered);

        // bmm's injected bug fires on an empty batch
        let trigger = tuple(vec![Value::tensor([0, 3, 4]), Value::tensor([0, 4, 5])]);
        let res = bmm.execute(&trigger).unwrap();
        assert!(res.outcome.is_valid());
        assert!(res.bug_triggered);

        let res = bmm
            .execute(&tuple(vec![Value::tensor([10, 3, 4]), Value::tensor([10, 4, 5])]))
            .unwrap();
        assert!(res.outcome.is_valid() && !res.bug_triggered);
        assert!(res.elapsed < Duration::from_millis(5));
    }

    #[test]
    fn execute_spends_configured_latency() {
        let reg = Registry::builtin();
        let bmm = reg.get("bmm").unwrap().clone().with_exec_cost(ExecCost {
            valid_us: 2_000,
            rejected_us: 0,
        });
        let res = bmm
            .execute(&tuple(vec![Value::tensor([1, 3, 4]), Value::tensor([1, 4, 5])]))
            .unwrap();
        assert!(res.elapsed >= Duration::from_millis(2));
    }

    #[test]
    fn registry_listing_and_registration() {
        let mut reg = Registry::builtin();
        assert_eq!(reg.len(), 12);
        let names: Vec<_> = reg.iter().map(|o| o.name.as_str()).collect();
        assert_eq!(names, BUILTIN_NAMES);

        let space = ParamSpace::new(vec![ParamSpec::tensor("x")]).unwrap();
        let custom = OperatorSpec::new("relu", space, |_| ValidationOutcome::Valid);
        reg.register(custom.clone()).unwrap();
        assert_eq!(reg.len(), 13);
        assert_eq!(reg.list_operators()[12].name, "relu");
        assert_eq!(
            reg.register(custom),
            Err(RegistryError::Duplicate("relu".into()))
        );
    }

    #[test]
    fn select_resolves_lists() {
        let reg = Registry::builtin();
        assert_eq!(reg.select("all").unwrap().len(), 12);
        let two = reg.select("dot, bmm").unwrap();
        assert_eq!(two[0].name, "dot");
        assert_eq!(two[1].name, "bmm");
        assert_eq!(
            reg.select("dot,nope").unwrap_err(),
            RegistryError::Unknown("nope".into())
        );
    }

    #[test]
    fn catalog_entries_serialize() {
        let reg = Registry::builtin();
        let entries: Vec<CatalogEntry> = reg.iter().map(CatalogEntry::from).collect();
        let text = serde_json::to_string(&entries).unwrap();
        assert!(text.contains("batch1 must be a 3D tensor"));
        assert!(entries.iter().all(|e| !e.constraint.is_empty()));
        assert!(entries.iter().all(|e| e.partial_constraints.is_some()));
    }
}
