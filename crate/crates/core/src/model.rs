//! Policy and request domain types, plus the matching and condition
//! primitives shared by the oracle and the reference evaluator.
//!
//! Evaluation errors (a missing attribute, `one-and-only` over a bag that
//! does not hold exactly one value, arithmetic overflow) never escape this
//! module: every predicate and condition is two-valued, and an error reads
//! as `false`.

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::function::{EvalError, ExprType, Function, Value};
use crate::value::{AttributeValue, DataType};

/// Request attribute categories, in XACML target order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Category {
    Subject,
    Resource,
    Action,
    Environment,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Subject,
        Category::Resource,
        Category::Action,
        Category::Environment,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Subject => "Subject",
            Category::Resource => "Resource",
            Category::Action => "Action",
            Category::Environment => "Environment",
        }
    }

    pub fn plural(self) -> &'static str {
        match self {
            Category::Subject => "Subjects",
            Category::Resource => "Resources",
            Category::Action => "Actions",
            Category::Environment => "Environments",
        }
    }

    pub fn lowercase(self) -> &'static str {
        match self {
            Category::Subject => "subject",
            Category::Resource => "resource",
            Category::Action => "action",
            Category::Environment => "environment",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct BagEntry {
    pub attribute_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub issuer: Option<String>,
    #[serde(flatten)]
    pub value: AttributeValue,
}

/// Multiset of attribute values for one category.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct AttributeBag {
    entries: Vec<BagEntry>,
}

impl AttributeBag {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, attribute_id: impl Into<String>, value: AttributeValue) {
        self.entries.push(BagEntry {
            attribute_id: attribute_id.into(),
            issuer: None,
            value,
        });
    }

    pub fn push_entry(&mut self, entry: BagEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[BagEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Values selected by a designator: same id, same datatype and, when
    /// the designator names an issuer, the same issuer.
    pub fn select<'a>(
        &'a self,
        designator: &'a AttributeDesignator,
    ) -> impl Iterator<Item = &'a AttributeValue> + 'a {
        self.entries
            .iter()
            .filter(move |e| {
                e.attribute_id == designator.attribute_id
                    && e.value.datatype() == designator.datatype
                    && match &designator.issuer {
                        Some(issuer) => e.issuer.as_deref() == Some(issuer.as_str()),
                        None => true,
                    }
            })
            .map(|e| &e.value)
    }
}

/// An access request: one attribute bag per category.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Request {
    bags: [AttributeBag; 4],
}

impl Request {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bag(&self, category: Category) -> &AttributeBag {
        &self.bags[category.index()]
    }

    pub fn bag_mut(&mut self, category: Category) -> &mut AttributeBag {
        &mut self.bags[category.index()]
    }

    /// Builder-style helper used heavily in tests.
    pub fn with(mut self, category: Category, attribute_id: &str, value: AttributeValue) -> Self {
        self.bag_mut(category).push(attribute_id, value);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.bags.iter().all(AttributeBag::is_empty)
    }
}

impl Serialize for Request {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(4))?;
        for category in Category::ALL {
            map.serialize_entry(category.lowercase(), self.bag(category))?;
        }
        map.end()
    }
}

/// Selects a bag of values out of one request category.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AttributeDesignator {
    pub category: Category,
    pub attribute_id: String,
    pub datatype: DataType,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub issuer: Option<String>,
}

impl AttributeDesignator {
    pub fn new(category: Category, attribute_id: impl Into<String>, datatype: DataType) -> Self {
        AttributeDesignator {
            category,
            attribute_id: attribute_id.into(),
            datatype,
            issuer: None,
        }
    }

    pub fn bag(&self, request: &Request) -> Vec<AttributeValue> {
        request.bag(self.category).select(self).cloned().collect()
    }
}

impl fmt::Display for AttributeDesignator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.category.lowercase(), self.attribute_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("{function} cannot be used as a match function")]
    NotAMatchFunction { function: String },
    #[error("{function} expects {expected} operands, got literal {literal} and designator {designator}")]
    MatchTypeMismatch {
        function: String,
        expected: DataType,
        literal: DataType,
        designator: DataType,
    },
    #[error("ill-typed condition: {0}")]
    IllTyped(String),
    #[error("condition must yield a boolean, found {0}")]
    NotBoolean(String),
    #[error("a {0} match list must not be empty")]
    EmptyConjunct(Category),
    #[error("policy {0:?} has no rules")]
    NoRules(String),
    #[error("duplicate rule id {0:?}")]
    DuplicateRuleId(String),
}

/// One `<SubjectMatch>`-style predicate: `function(literal, value)` for
/// some value selected by `designator`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchPredicate {
    function: Function,
    literal: AttributeValue,
    designator: AttributeDesignator,
}

impl MatchPredicate {
    pub fn new(
        function: Function,
        literal: AttributeValue,
        designator: AttributeDesignator,
    ) -> Result<Self, ModelError> {
        let expected = function
            .match_datatype()
            .ok_or_else(|| ModelError::NotAMatchFunction {
                function: function.name(),
            })?;
        if literal.datatype() != expected || designator.datatype != expected {
            return Err(ModelError::MatchTypeMismatch {
                function: function.name(),
                expected,
                literal: literal.datatype(),
                designator: designator.datatype,
            });
        }
        Ok(MatchPredicate {
            function,
            literal,
            designator,
        })
    }

    pub fn function(&self) -> Function {
        self.function
    }

    pub fn literal(&self) -> &AttributeValue {
        &self.literal
    }

    pub fn designator(&self) -> &AttributeDesignator {
        &self.designator
    }

    /// Satisfied iff some selected value makes the function true. An empty
    /// selection is the folded "missing attribute" case.
    pub fn is_satisfied(&self, request: &Request) -> bool {
        request
            .bag(self.designator.category)
            .select(&self.designator)
            .any(|v| self.function.apply_match(&self.literal, v))
    }
}

impl fmt::Display for MatchPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.function, self.literal, self.designator)
    }
}

/// A `<Subject>` (or `<Resource>`, ...) element: all predicates must hold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Conjunct {
    predicates: Vec<MatchPredicate>,
}

impl Conjunct {
    pub fn new(category: Category, predicates: Vec<MatchPredicate>) -> Result<Self, ModelError> {
        if predicates.is_empty() {
            return Err(ModelError::EmptyConjunct(category));
        }
        Ok(Conjunct { predicates })
    }

    pub fn predicates(&self) -> &[MatchPredicate] {
        &self.predicates
    }

    pub fn is_satisfied(&self, request: &Request) -> bool {
        self.predicates.iter().all(|p| p.is_satisfied(request))
    }
}

impl fmt::Display for Conjunct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.predicates.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(" and "))
    }
}

/// Per category, a disjunction of conjuncts. An empty list means "any".
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TargetSpec {
    alternatives: [Vec<Conjunct>; 4],
}

impl TargetSpec {
    /// The target that matches every request.
    pub fn any() -> Self {
        Self::default()
    }

    pub fn with_category(mut self, category: Category, alternatives: Vec<Conjunct>) -> Self {
        self.alternatives[category.index()] = alternatives;
        self
    }

    pub fn alternatives(&self, category: Category) -> &[Conjunct] {
        &self.alternatives[category.index()]
    }

    pub fn is_any(&self) -> bool {
        self.alternatives.iter().all(Vec::is_empty)
    }

    /// Categories that carry at least one alternative, in target order.
    pub fn constrained_categories(&self) -> impl Iterator<Item = Category> + '_ {
        Category::ALL
            .into_iter()
            .filter(|c| !self.alternatives(*c).is_empty())
    }

    pub fn category_matches(&self, category: Category, request: &Request) -> bool {
        let alternatives = self.alternatives(category);
        alternatives.is_empty() || alternatives.iter().any(|c| c.is_satisfied(request))
    }

    /// First constrained category that fails, in target order.
    pub fn first_failure(&self, request: &Request) -> Option<Category> {
        Category::ALL
            .into_iter()
            .find(|c| !self.category_matches(*c, request))
    }

    pub fn predicates(&self) -> impl Iterator<Item = &MatchPredicate> {
        self.alternatives
            .iter()
            .flatten()
            .flat_map(|c| c.predicates.iter())
    }
}

/// Condition expression tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Expr {
    Literal(AttributeValue),
    Designator(AttributeDesignator),
    Apply(Function, Vec<Expr>),
}

impl Expr {
    pub fn apply(function: Function, args: Vec<Expr>) -> Expr {
        Expr::Apply(function, args)
    }

    pub fn type_of(&self) -> Result<ExprType, ModelError> {
        match self {
            Expr::Literal(v) => Ok(ExprType::Single(v.datatype())),
            Expr::Designator(d) => Ok(ExprType::Bag(d.datatype)),
            Expr::Apply(function, args) => {
                let types = args
                    .iter()
                    .map(Expr::type_of)
                    .collect::<Result<Vec<_>, _>>()?;
                function.signature(&types).map_err(ModelError::IllTyped)
            }
        }
    }

    pub fn eval(&self, request: &Request) -> Result<Value, EvalError> {
        match self {
            Expr::Literal(v) => Ok(Value::Single(v.clone())),
            Expr::Designator(d) => Ok(Value::Bag(d.bag(request))),
            Expr::Apply(function @ (Function::And | Function::Or), args) => {
                // Arguments are evaluated in order and evaluation stops at the
                // first deciding value; an error met before that propagates.
                let stop_on = matches!(function, Function::Or);
                for arg in args {
                    let v = arg.eval(request)?;
                    let b = match v {
                        Value::Single(a) => a.as_boolean().ok_or(EvalError::TypeMismatch)?,
                        Value::Bag(_) => return Err(EvalError::TypeMismatch),
                    };
                    if b == stop_on {
                        return Ok(Value::Single(AttributeValue::boolean(stop_on)));
                    }
                }
                Ok(Value::Single(AttributeValue::boolean(!stop_on)))
            }
            Expr::Apply(function, args) => {
                let values = args
                    .iter()
                    .map(|a| a.eval(request))
                    .collect::<Result<Vec<_>, _>>()?;
                function.apply(&values)
            }
        }
    }

    /// Pre-order visit of every sub-expression.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Expr)) {
        visit(self);
        if let Expr::Apply(_, args) = self {
            for arg in args {
                arg.walk(visit);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Literal(v) => write!(f, "{v}"),
            Expr::Designator(d) => write!(f, "{d}"),
            Expr::Apply(function, args) => {
                let parts: Vec<String> = args.iter().map(ToString::to_string).collect();
                write!(f, "{function}({})", parts.join(", "))
            }
        }
    }
}

/// A well-typed boolean condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Condition {
    expr: Expr,
}

impl Condition {
    pub fn new(expr: Expr) -> Result<Self, ModelError> {
        match expr.type_of()? {
            ExprType::Single(DataType::Boolean) => Ok(Condition { expr }),
            other => Err(ModelError::NotBoolean(other.to_string())),
        }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn functions(&self) -> Vec<Function> {
        let mut out = Vec::new();
        self.expr.walk(&mut |e| {
            if let Expr::Apply(f, _) = e {
                out.push(*f);
            }
        });
        out
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Effect {
    Permit,
    Deny,
}

impl Effect {
    pub fn decision(self) -> Decision {
        match self {
            Effect::Permit => Decision::Permit,
            Effect::Deny => Decision::Deny,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Effect::Permit => "Permit",
            Effect::Deny => "Deny",
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Rule combining algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Algorithm {
    FirstApplicable,
    DenyOverrides,
    PermitOverrides,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::FirstApplicable,
        Algorithm::DenyOverrides,
        Algorithm::PermitOverrides,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::FirstApplicable => "FirstApplicable",
            Algorithm::DenyOverrides => "DenyOverrides",
            Algorithm::PermitOverrides => "PermitOverrides",
        }
    }

    /// Trailing segment of the XACML identifier.
    pub fn urn_suffix(self) -> &'static str {
        match self {
            Algorithm::FirstApplicable => "first-applicable",
            Algorithm::DenyOverrides => "deny-overrides",
            Algorithm::PermitOverrides => "permit-overrides",
        }
    }

    pub fn urn(self) -> String {
        format!(
            "urn:oasis:names:tc:xacml:1.0:rule-combining-algorithm:{}",
            self.urn_suffix()
        )
    }

    pub fn from_urn(urn: &str) -> Option<Algorithm> {
        let suffix = urn.trim().rsplit(':').next()?;
        Algorithm::ALL.into_iter().find(|a| a.urn_suffix() == suffix)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rule {
    pub id: String,
    pub effect: Effect,
    pub target: TargetSpec,
    pub condition: Option<Condition>,
}

impl Rule {
    pub fn new(id: impl Into<String>, effect: Effect) -> Self {
        Rule {
            id: id.into(),
            effect,
            target: TargetSpec::any(),
            condition: None,
        }
    }

    pub fn with_target(mut self, target: TargetSpec) -> Self {
        self.target = target;
        self
    }

    pub fn with_condition(mut self, condition: Condition) -> Self {
        self.condition = Some(condition);
        self
    }

    /// True when neither target nor condition can fail.
    pub fn is_unconditional(&self) -> bool {
        self.target.is_any() && self.condition.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Policy {
    id: String,
    algorithm: Algorithm,
    target: TargetSpec,
    rules: Vec<Rule>,
}

impl Policy {
    pub fn new(
        id: impl Into<String>,
        algorithm: Algorithm,
        target: TargetSpec,
        rules: Vec<Rule>,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        if rules.is_empty() {
            return Err(ModelError::NoRules(id));
        }
        let mut seen = HashSet::new();
        for rule in &rules {
            if !seen.insert(rule.id.as_str()) {
                return Err(ModelError::DuplicateRuleId(rule.id.clone()));
            }
        }
        Ok(Policy {
            id,
            algorithm,
            target,
            rules,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn target(&self) -> &TargetSpec {
        &self.target
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Every designator referenced by targets or conditions.
    pub fn designators(&self) -> Vec<&AttributeDesignator> {
        let mut out: Vec<&AttributeDesignator> =
            self.target.predicates().map(|p| p.designator()).collect();
        for rule in &self.rules {
            out.extend(rule.target.predicates().map(|p| p.designator()));
            if let Some(cond) = &rule.condition {
                cond.expr().walk(&mut |e| {
                    if let Expr::Designator(d) = e {
                        out.push(d);
                    }
                });
            }
        }
        out
    }
}

/// Folded access decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Decision {
    Permit,
    Deny,
    NotApplicable,
}

impl Decision {
    pub fn name(self) -> &'static str {
        match self {
            Decision::Permit => "Permit",
            Decision::Deny => "Deny",
            Decision::NotApplicable => "NotApplicable",
        }
    }

    pub fn from_name(name: &str) -> Option<Decision> {
        match name.trim() {
            "Permit" => Some(Decision::Permit),
            "Deny" => Some(Decision::Deny),
            "NotApplicable" => Some(Decision::NotApplicable),
            _ => None,
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of evaluating a single rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RuleResult {
    SatPermit,
    SatDeny,
    Unsat,
}

impl RuleResult {
    pub fn satisfied(effect: Effect) -> Self {
        match effect {
            Effect::Permit => RuleResult::SatPermit,
            Effect::Deny => RuleResult::SatDeny,
        }
    }
}

pub fn match_target(target: &TargetSpec, request: &Request) -> bool {
    Category::ALL
        .into_iter()
        .all(|c| target.category_matches(c, request))
}

/// Absent conditions are vacuously true; evaluation errors fold to `false`.
pub fn eval_condition(condition: Option<&Condition>, request: &Request) -> bool {
    match condition {
        None => true,
        Some(cond) => matches!(
            cond.expr().eval(request),
            Ok(Value::Single(v)) if v.as_boolean() == Some(true)
        ),
    }
}

pub fn eval_rule(rule: &Rule, request: &Request) -> RuleResult {
    if match_target(&rule.target, request) && eval_condition(rule.condition.as_ref(), request) {
        RuleResult::satisfied(rule.effect)
    } else {
        RuleResult::Unsat
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SUBJECT_ID: &str = "urn:oasis:names:tc:xacml:1.0:subject:subject-id";
    const RESOURCE_ID: &str = "urn:oasis:names:tc:xacml:1.0:resource:resource-id";
    const ACTION_ID: &str = "urn:oasis:names:tc:xacml:1.0:action:action-id";

    fn string_match(category: Category, id: &str, literal: &str) -> Conjunct {
        Conjunct::new(
            category,
            vec![MatchPredicate::new(
                Function::Equal(DataType::String),
                AttributeValue::string(literal),
                AttributeDesignator::new(category, id, DataType::String),
            )
            .unwrap()],
        )
        .unwrap()
    }

    fn rule_b() -> Rule {
        Rule::new("ruleB", Effect::Permit).with_target(
            TargetSpec::any()
                .with_category(Category::Subject, vec![string_match(Category::Subject, SUBJECT_ID, "Julius")])
                .with_category(Category::Resource, vec![string_match(Category::Resource, RESOURCE_ID, "journals")])
                .with_category(Category::Action, vec![string_match(Category::Action, ACTION_ID, "read")]),
        )
    }

    fn request(subject: &str, resource: &str, action: &str) -> Request {
        Request::new()
            .with(Category::Subject, SUBJECT_ID, AttributeValue::string(subject))
            .with(Category::Resource, RESOURCE_ID, AttributeValue::string(resource))
            .with(Category::Action, ACTION_ID, AttributeValue::string(action))
    }

    #[test]
    fn empty_target_matches_everything() {
        assert!(match_target(&TargetSpec::any(), &Request::new()));
        assert!(match_target(&TargetSpec::any(), &request("a", "b", "c")));
    }

    #[test]
    fn rule_b_requires_read() {
        let rule = rule_b();
        assert!(!match_target(&rule.target, &request("Julius", "journals", "write")));
        assert_eq!(eval_rule(&rule, &request("Julius", "journals", "read")), RuleResult::SatPermit);
        assert_eq!(eval_rule(&rule, &Request::new()), RuleResult::Unsat);
    }

    #[test]
    fn designator_datatype_and_issuer_filter_the_bag() {
        let mut req = Request::new();
        req.bag_mut(Category::Subject).push_entry(BagEntry {
            attribute_id: "age".into(),
            issuer: Some("hr".into()),
            value: AttributeValue::integer(30),
        });
        req.bag_mut(Category::Subject).push("age", AttributeValue::string("30"));
        let mut d = AttributeDesignator::new(Category::Subject, "age", DataType::Integer);
        assert_eq!(d.bag(&req), vec![AttributeValue::integer(30)]);
        d.issuer = Some("other".into());
        assert!(d.bag(&req).is_empty());
    }

    #[test]
    fn one_and_only_over_empty_bag_folds_to_false() {
        let cond = Condition::new(Expr::apply(
            Function::Equal(DataType::String),
            vec![
                Expr::apply(
                    Function::OneAndOnly(DataType::String),
                    vec![Expr::Designator(AttributeDesignator::new(
                        Category::Subject,
                        SUBJECT_ID,
                        DataType::String,
                    ))],
                ),
                Expr::Literal(AttributeValue::string("x")),
            ],
        ))
        .unwrap();
        assert!(!eval_condition(Some(&cond), &Request::new()));
        assert!(eval_condition(None, &Request::new()));
        // The error is not masked by an enclosing `not`.
        let negated = Condition::new(Expr::apply(Function::Not, vec![cond.expr().clone()])).unwrap();
        assert!(!eval_condition(Some(&negated), &Request::new()));
    }

    #[test]
    fn ill_typed_conditions_are_rejected() {
        let err = Condition::new(Expr::Literal(AttributeValue::integer(1))).unwrap_err();
        assert!(matches!(err, ModelError::NotBoolean(_)));
        let err = Condition::new(Expr::apply(
            Function::StringIsIn,
            vec![
                Expr::Literal(AttributeValue::string("a")),
                Expr::Literal(AttributeValue::string("b")),
            ],
        ))
        .unwrap_err();
        assert!(matches!(err, ModelError::IllTyped(_)));
    }

    #[test]
    fn match_predicate_type_checks() {
        let err = MatchPredicate::new(
            Function::IntegerGreaterThan,
            AttributeValue::string("1"),
            AttributeDesignator::new(Category::Subject, "x", DataType::Integer),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::MatchTypeMismatch { .. }));
        assert!(MatchPredicate::new(
            Function::Not,
            AttributeValue::boolean(true),
            AttributeDesignator::new(Category::Subject, "x", DataType::Boolean),
        )
        .is_err());
    }

    #[test]
    fn policy_invariants() {
        assert!(matches!(
            Policy::new("p", Algorithm::DenyOverrides, TargetSpec::any(), vec![]),
            Err(ModelError::NoRules(_))
        ));
        let dup = vec![Rule::new("r", Effect::Deny), Rule::new("r", Effect::Permit)];
        assert!(matches!(
            Policy::new("p", Algorithm::DenyOverrides, TargetSpec::any(), dup),
            Err(ModelError::DuplicateRuleId(_))
        ));
    }

    #[test]
    fn algorithm_urns() {
        for alg in Algorithm::ALL {
            assert_eq!(Algorithm::from_urn(&alg.urn()), Some(alg));
        }
        assert_eq!(
            Algorithm::from_urn("urn:oasis:names:tc:xacml:1.1:rule-combining-algorithm:ordered-deny-overrides"),
            None
        );
    }
}
