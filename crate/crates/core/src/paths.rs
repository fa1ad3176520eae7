//! Evaluation paths: walks through the XAC-Graph from `Policy_1` to a
//! Return node, each summarizing the rule outcomes it assumes.
//!
//! Successors after a rule exit follow the combining algorithm:
//!
//! * first-applicable: an Effect returns its own decision, NotApplicable
//!   moves on to the next rule (or returns NotApplicable after the last);
//! * deny-overrides: Effect(Deny) returns Deny, anything else moves on; after
//!   the last rule the path returns Permit if it passed through an Effect
//!   node and NotApplicable otherwise;
//! * permit-overrides: the mirror image.
//!
//! One extra path covers the policy target failing. The emitted profiles
//! partition the space of observable outcomes, so every request is
//! consistent with exactly one path.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{GraphError, XacGraph};
use crate::model::{Algorithm, Category, Decision, Effect, Policy, TargetSpec};
use crate::tree::{NodeId, NodeType, Payload, XacTree};

pub const DEFAULT_PATH_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("policy has more than {cap} evaluation paths; raise the path cap")]
    TooManyPaths { cap: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// How finely an unsatisfied target or rule is split into paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// One Unsatisfied outcome per rule.
    #[default]
    Rule,
    /// One Unsatisfied outcome per element that can fail first.
    Element,
}

impl Granularity {
    pub fn name(self) -> &'static str {
        match self {
            Granularity::Rule => "rule",
            Granularity::Element => "element",
        }
    }
}

/// First element of a rule (or policy) that fails during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FailurePoint {
    Category(Category),
    Condition,
}

impl fmt::Display for FailurePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailurePoint::Category(c) => f.write_str(c.plural()),
            FailurePoint::Condition => f.write_str("Condition"),
        }
    }
}

/// Variant order is the profile sort order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RuleOutcome {
    Satisfied,
    /// The failure point is `None` at rule granularity.
    Unsatisfied(Option<FailurePoint>),
    NotEvaluated,
}

impl fmt::Display for RuleOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleOutcome::Satisfied => f.write_str("Sat"),
            RuleOutcome::Unsatisfied(None) => f.write_str("Unsat"),
            RuleOutcome::Unsatisfied(Some(p)) => write!(f, "Unsat@{p}"),
            RuleOutcome::NotEvaluated => f.write_str("-"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum TargetOutcome {
    Satisfied,
    /// The failing category is `None` at rule granularity.
    Unsatisfied(Option<Category>),
}

impl fmt::Display for TargetOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetOutcome::Satisfied => f.write_str("Sat"),
            TargetOutcome::Unsatisfied(None) => f.write_str("Unsat"),
            TargetOutcome::Unsatisfied(Some(c)) => write!(f, "Unsat@{}", c.plural()),
        }
    }
}

/// Outcomes a path assumes. If the policy target is unsatisfied every rule
/// is NotEvaluated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct OutcomeProfile {
    pub policy_target: TargetOutcome,
    pub rules: Vec<RuleOutcome>,
}

impl OutcomeProfile {
    /// Whether fully observed outcomes agree with this profile.
    pub fn is_consistent_with(&self, observed: &OutcomeProfile) -> bool {
        self.policy_target == observed.policy_target
            && self.rules.len() == observed.rules.len()
            && self
                .rules
                .iter()
                .zip(&observed.rules)
                .all(|(p, o)| *p == RuleOutcome::NotEvaluated || p == o)
    }
}

impl fmt::Display for OutcomeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "target={}", self.policy_target)?;
        for (i, r) in self.rules.iter().enumerate() {
            write!(f, " r{}={r}", i + 1)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvaluationPath {
    /// 1-based position after ordering; 0 before.
    pub rank: usize,
    pub walk: Vec<NodeId>,
    pub profile: OutcomeProfile,
    pub verdict: Decision,
    /// Number of nodes in the walk.
    pub length: usize,
    /// False when the profile is trivially contradictory, such as failing a
    /// target that matches everything.
    pub feasible: bool,
}

impl EvaluationPath {
    /// Index of the satisfied rule that decided a first-applicable path.
    pub fn deciding_rule(&self) -> Option<usize> {
        self.profile
            .rules
            .iter()
            .rposition(|r| *r == RuleOutcome::Satisfied)
    }

    pub fn walk_labels(&self, graph: &XacGraph) -> Vec<String> {
        self.walk.iter().map(|n| graph.node(*n).label()).collect()
    }
}

/// Walk prefix through a target, optionally cut after the group that fails.
fn target_walk(tree: &XacTree, target: NodeId, fail_at: Option<Category>) -> Vec<NodeId> {
    let mut walk = tree.preorder(target);
    if let Some(category) = fail_at {
        let group = tree
            .children(target)
            .iter()
            .copied()
            .find(|g| matches!(tree.node(*g).payload, Payload::Group(_, c) if c == category))
            .expect("failure category is constrained");
        let last = tree.rightmost_leaf(group);
        let end = walk.iter().position(|n| *n == last).unwrap();
        walk.truncate(end + 1);
    }
    walk
}

struct Unfolder<'a> {
    graph: &'a XacGraph,
    policy: &'a Policy,
    granularity: Granularity,
    cap: usize,
    rule_nodes: Vec<NodeId>,
    out: Vec<EvaluationPath>,
}

impl Unfolder<'_> {
    /// Possible outcomes of rule `index` with the walk segment each takes,
    /// from the Rule node to the RuleAlgorithm hub.
    fn rule_options(&self, index: usize) -> Vec<(RuleOutcome, Vec<NodeId>, bool)> {
        let tree = self.graph.tree();
        let rule = &self.policy.rules()[index];
        let rule_node = self.rule_nodes[index];
        let target = tree.children(rule_node)[0];
        let full = tree.preorder(rule_node);
        let hub = self.graph.rule_algorithm();
        let with_exit = |mut w: Vec<NodeId>, exit: NodeId| {
            w.push(exit);
            w.push(hub);
            w
        };
        let effect = self.graph.effect_node(index);
        let na = self.graph.not_applicable_node(index);
        let mut options = vec![(RuleOutcome::Satisfied, with_exit(full.clone(), effect), true)];
        let failure_points: Vec<FailurePoint> = rule
            .target
            .constrained_categories()
            .map(FailurePoint::Category)
            .chain(rule.condition.as_ref().map(|_| FailurePoint::Condition))
            .collect();
        match self.granularity {
            Granularity::Rule => options.push((
                RuleOutcome::Unsatisfied(None),
                with_exit(full, na),
                !rule.is_unconditional(),
            )),
            Granularity::Element if failure_points.is_empty() => {
                options.push((RuleOutcome::Unsatisfied(None), with_exit(full, na), false))
            }
            Granularity::Element => {
                for point in failure_points {
                    let walk = match point {
                        FailurePoint::Category(c) => {
                            let mut w = vec![rule_node];
                            w.extend(target_walk(tree, target, Some(c)));
                            w
                        }
                        FailurePoint::Condition => full.clone(),
                    };
                    options.push((RuleOutcome::Unsatisfied(Some(point)), with_exit(walk, na), true));
                }
            }
        }
        options
    }

    fn emit(&mut self, walk: Vec<NodeId>, profile: OutcomeProfile, feasible: bool) -> Result<(), PathError> {
        if self.out.len() == self.cap {
            return Err(PathError::TooManyPaths { cap: self.cap });
        }
        let last = *walk.last().unwrap();
        let verdict = match self.graph.node(last).node_type {
            NodeType::ReturnPermit => Decision::Permit,
            NodeType::ReturnDeny => Decision::Deny,
            _ => Decision::NotApplicable,
        };
        self.out.push(EvaluationPath {
            rank: 0,
            length: walk.len(),
            walk,
            profile,
            verdict,
            feasible,
        });
        Ok(())
    }

    fn visit(
        &mut self,
        index: usize,
        walk: &mut Vec<NodeId>,
        outcomes: &mut Vec<RuleOutcome>,
        saw_effect: bool,
        feasible: bool,
    ) -> Result<(), PathError> {
        let n = self.rule_nodes.len();
        let algorithm = self.policy.algorithm();
        for (outcome, segment, option_feasible) in self.rule_options(index) {
            let mark = walk.len();
            walk.extend(&segment);
            outcomes.push(outcome);
            let feasible = feasible && option_feasible;
            let satisfied = outcome == RuleOutcome::Satisfied;
            let effect = self.policy.rules()[index].effect;
            let terminal = match (algorithm, satisfied) {
                (Algorithm::FirstApplicable, true) => Some(effect.decision()),
                (Algorithm::DenyOverrides, true) if effect == Effect::Deny => Some(Decision::Deny),
                (Algorithm::PermitOverrides, true) if effect == Effect::Permit => Some(Decision::Permit),
                _ if index + 1 < n => None,
                (Algorithm::FirstApplicable, false) => Some(Decision::NotApplicable),
                (Algorithm::DenyOverrides, _) if saw_effect || satisfied => Some(Decision::Permit),
                (Algorithm::PermitOverrides, _) if saw_effect || satisfied => Some(Decision::Deny),
                _ => Some(Decision::NotApplicable),
            };
            match terminal {
                Some(decision) => {
                    let sink = self.graph.return_node(decision).expect("return node exists for reachable decisions");
                    let mut full = walk.clone();
                    full.push(sink);
                    let mut rules = outcomes.clone();
                    rules.resize(n, RuleOutcome::NotEvaluated);
                    let profile = OutcomeProfile {
                        policy_target: TargetOutcome::Satisfied,
                        rules,
                    };
                    self.emit(full, profile, feasible)?;
                }
                None => self.visit(index + 1, walk, outcomes, saw_effect || satisfied, feasible)?,
            }
            outcomes.pop();
            walk.truncate(mark);
        }
        Ok(())
    }
}

/// Enumerates every evaluation path, unordered (all ranks 0).
pub fn unfold(graph: &XacGraph, granularity: Granularity, cap: usize) -> Result<Vec<EvaluationPath>, PathError> {
    let tree = graph.tree();
    let policy = tree.policy();
    let mut u = Unfolder {
        graph,
        policy,
        granularity,
        cap,
        rule_nodes: tree.rule_nodes(),
        out: Vec::new(),
    };
    let root = tree.root();
    let policy_target = tree.children(root)[0];
    let n = policy.rules().len();
    let skipped = |outcome| OutcomeProfile {
        policy_target: outcome,
        rules: vec![RuleOutcome::NotEvaluated; n],
    };
    let na = graph.return_node(Decision::NotApplicable).unwrap();

    let failures: Vec<Option<Category>> = match granularity {
        Granularity::Element if !policy.target().is_any() => {
            policy.target().constrained_categories().map(Some).collect()
        }
        _ => vec![None],
    };
    for fail_at in failures {
        let mut walk = vec![root];
        walk.extend(target_walk(tree, policy_target, fail_at));
        walk.push(na);
        u.emit(walk, skipped(TargetOutcome::Unsatisfied(fail_at)), !policy.target().is_any())?;
    }

    let mut walk = vec![root];
    walk.extend(tree.preorder(policy_target));
    u.visit(0, &mut walk, &mut Vec::new(), false, true)?;
    Ok(u.out)
}

fn verdict_priority(algorithm: Algorithm, path: &EvaluationPath, rules: usize) -> usize {
    match (algorithm, path.verdict) {
        (_, Decision::NotApplicable) => rules + 2,
        (Algorithm::DenyOverrides, Decision::Deny) | (Algorithm::PermitOverrides, Decision::Permit) => 0,
        (Algorithm::DenyOverrides, _) | (Algorithm::PermitOverrides, _) => 1,
        (Algorithm::FirstApplicable, _) => path.deciding_rule().unwrap_or(rules + 1),
    }
}

/// Sorts by verdict priority, then walk length, then profile, then walk,
/// and assigns ranks 1..=n.
pub fn order_paths(mut paths: Vec<EvaluationPath>, algorithm: Algorithm) -> Vec<EvaluationPath> {
    let rules = paths.first().map_or(0, |p| p.profile.rules.len());
    paths.sort_by(|a, b| {
        verdict_priority(algorithm, a, rules)
            .cmp(&verdict_priority(algorithm, b, rules))
            .then(a.length.cmp(&b.length))
            .then_with(|| a.profile.cmp(&b.profile))
            .then_with(|| a.walk.cmp(&b.walk))
    });
    for (i, p) in paths.iter_mut().enumerate() {
        p.rank = i + 1;
    }
    paths
}

/// A policy's graph together with its ordered paths.
#[derive(Debug, Clone)]
pub struct PathSet {
    graph: XacGraph,
    granularity: Granularity,
    paths: Vec<EvaluationPath>,
}

impl PathSet {
    pub fn build(policy: &Policy, granularity: Granularity, cap: usize) -> Result<PathSet, PathError> {
        let graph = XacGraph::from_policy(policy)?;
        Self::from_graph(graph, granularity, cap)
    }

    pub fn from_graph(graph: XacGraph, granularity: Granularity, cap: usize) -> Result<PathSet, PathError> {
        let paths = order_paths(unfold(&graph, granularity, cap)?, graph.algorithm());
        Ok(PathSet {
            graph,
            granularity,
            paths,
        })
    }

    pub fn policy(&self) -> &Policy {
        self.graph.tree().policy()
    }

    pub fn graph(&self) -> &XacGraph {
        &self.graph
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn paths(&self) -> &[EvaluationPath] {
        &self.paths
    }

    pub fn by_rank(&self, rank: usize) -> Option<&EvaluationPath> {
        rank.checked_sub(1).and_then(|i| self.paths.get(i))
    }
}

/// One line of a path's constraint listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Constraint {
    /// `policy target`, or a rule id optionally followed by the element.
    pub element: String,
    pub holds: bool,
    pub expr: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathConstraints {
    pub feasible: bool,
    pub constraints: Vec<Constraint>,
}

impl fmt::Display for PathConstraints {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.feasible {
            writeln!(f, "unsatisfiable")?;
        }
        for c in &self.constraints {
            if c.holds {
                writeln!(f, "{}: {}", c.element, c.expr)?;
            } else {
                writeln!(f, "{}: not ({})", c.element, c.expr)?;
            }
        }
        Ok(())
    }
}

fn category_text(target: &TargetSpec, category: Category) -> String {
    let alts = target.alternatives(category);
    let parts: Vec<String> = alts.iter().map(ToString::to_string).collect();
    if parts.len() == 1 {
        parts.into_iter().next().unwrap()
    } else {
        format!("({})", parts.join(") or ("))
    }
}

fn target_text(target: &TargetSpec) -> String {
    let parts: Vec<String> = target
        .constrained_categories()
        .map(|c| category_text(target, c))
        .collect();
    match parts.len() {
        0 => "true".into(),
        1 => parts.into_iter().next().unwrap(),
        _ => format!("({})", parts.join(") and (")),
    }
}

fn positive_target(out: &mut Vec<Constraint>, owner: &str, target: &TargetSpec, upto: Option<Category>) {
    for c in target.constrained_categories() {
        if Some(c) == upto {
            out.push(Constraint {
                element: format!("{owner} {}", c.lowercase()),
                holds: false,
                expr: category_text(target, c),
            });
            return;
        }
        out.push(Constraint {
            element: format!("{owner} {}", c.lowercase()),
            holds: true,
            expr: category_text(target, c),
        });
    }
}

/// Constraints a request must meet to follow `path`: positive for
/// satisfied elements, negated for the element (or rule) that fails.
pub fn path_constraints(policy: &Policy, path: &EvaluationPath) -> PathConstraints {
    let mut out = Vec::new();
    match path.profile.policy_target {
        TargetOutcome::Satisfied => positive_target(&mut out, "policy", policy.target(), None),
        TargetOutcome::Unsatisfied(Some(c)) => positive_target(&mut out, "policy", policy.target(), Some(c)),
        TargetOutcome::Unsatisfied(None) => out.push(Constraint {
            element: "policy target".into(),
            holds: false,
            expr: target_text(policy.target()),
        }),
    }
    for (rule, outcome) in policy.rules().iter().zip(&path.profile.rules) {
        let id = rule.id.as_str();
        match outcome {
            RuleOutcome::NotEvaluated => {}
            RuleOutcome::Satisfied => {
                positive_target(&mut out, id, &rule.target, None);
                if let Some(cond) = &rule.condition {
                    out.push(Constraint {
                        element: format!("{id} condition"),
                        holds: true,
                        expr: cond.to_string(),
                    });
                }
            }
            RuleOutcome::Unsatisfied(Some(FailurePoint::Category(c))) => {
                positive_target(&mut out, id, &rule.target, Some(*c))
            }
            RuleOutcome::Unsatisfied(Some(FailurePoint::Condition)) => {
                positive_target(&mut out, id, &rule.target, None);
                out.push(Constraint {
                    element: format!("{id} condition"),
                    holds: false,
                    expr: rule.condition.as_ref().map_or("true".into(), ToString::to_string),
                });
            }
            RuleOutcome::Unsatisfied(None) => {
                let mut expr = target_text(&rule.target);
                if let Some(cond) = &rule.condition {
                    expr = if rule.target.is_any() {
                        cond.to_string()
                    } else {
                        format!("{expr} and {cond}")
                    };
                }
                out.push(Constraint {
                    element: id.to_string(),
                    holds: false,
                    expr,
                });
            }
        }
    }
    PathConstraints {
        feasible: path.feasible,
        constraints: out,
    }
}
