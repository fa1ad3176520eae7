use std::collections::BTreeSet;

use proptest::prelude::*;
use xacmet::corpus::generate_policy;
use xacmet::graph::{export_graph_dot, XacGraph};
use xacmet::harness::sample_requests;
use xacmet::model::{eval_rule, Algorithm, Decision, Effect, Policy, Request, Rule, RuleResult};
use xacmet::oracle::{evaluate, observe};
use xacmet::paths::{Granularity, PathSet, RuleOutcome, TargetOutcome, DEFAULT_PATH_CAP};
use xacmet::reference::{combine, evaluate_direct};
use xacmet::tree::{build_tree, export_tree_dot, NodeId, NodeType};
use xacmet::xml::{parse_policy, parse_request, write_policy, write_request};

fn policy_strategy() -> impl Strategy<Value = Policy> {
    (any::<u64>(), 0usize..69).prop_map(|(seed, index)| generate_policy(seed, index))
}

fn granularity_strategy() -> impl Strategy<Value = Granularity> {
    prop_oneof![Just(Granularity::Rule), Just(Granularity::Element)]
}

fn rule_result_strategy() -> impl Strategy<Value = RuleResult> {
    prop_oneof![
        Just(RuleResult::SatPermit),
        Just(RuleResult::SatDeny),
        Just(RuleResult::Unsat)
    ]
}

/// Same policy with every effect flipped and the overriding algorithms
/// swapped.
fn mirrored(policy: &Policy) -> Policy {
    let algorithm = match policy.algorithm() {
        Algorithm::DenyOverrides => Algorithm::PermitOverrides,
        Algorithm::PermitOverrides => Algorithm::DenyOverrides,
        a => a,
    };
    let rules = policy
        .rules()
        .iter()
        .map(|r| {
            let mut flipped = r.clone();
            flipped.effect = match r.effect {
                Effect::Permit => Effect::Deny,
                Effect::Deny => Effect::Permit,
            };
            flipped
        })
        .collect();
    Policy::new(policy.id(), algorithm, policy.target().clone(), rules).unwrap()
}

fn swap(d: Decision) -> Decision {
    match d {
        Decision::Permit => Decision::Deny,
        Decision::Deny => Decision::Permit,
        Decision::NotApplicable => Decision::NotApplicable,
    }
}

/// Request with every bag's entries reversed.
fn reversed(request: &Request) -> Request {
    let mut out = Request::new();
    for category in xacmet::model::Category::ALL {
        for entry in request.bag(category).entries().iter().rev() {
            out.bag_mut(category).push_entry(entry.clone());
        }
    }
    out
}

/// Line-level check of the DOT subset the exporters emit.
fn is_simple_dot(text: &str, name: &str) -> bool {
    let mut lines = text.lines();
    if lines.next() != Some(&format!("digraph {name} {{")) || lines.next() != Some("  node [shape=box];") {
        return false;
    }
    let body: Vec<&str> = lines.collect();
    let Some((last, body)) = body.split_last() else { return false };
    let quoted = |s: &str| {
        s.starts_with('"') && s.ends_with('"') && s.len() >= 2 && {
            let inner = &s[1..s.len() - 1];
            let mut escaped = false;
            inner.chars().all(|c| {
                let ok = escaped || c != '"';
                escaped = !escaped && c == '\\';
                ok
            })
        }
    };
    let id = |s: &str| s.len() > 1 && s.starts_with('n') && s[1..].chars().all(|c| c.is_ascii_digit());
    let attrs = |s: &str| {
        s.split(", ").all(|kv| match kv.split_once('=') {
            Some(("label", v)) => quoted(v),
            Some(("color", v)) | Some(("style", v)) => v.chars().all(|c| c.is_ascii_alphabetic()),
            _ => false,
        })
    };
    *last == "}"
        && body.iter().all(|line| {
            let Some(stmt) = line.strip_prefix("  ").and_then(|l| l.strip_suffix(';')) else {
                return false;
            };
            let (head, attr) = match stmt.split_once(" [") {
                Some((h, rest)) => match rest.strip_suffix(']') {
                    Some(a) => (h, Some(a)),
                    None => return false,
                },
                None => (stmt, None),
            };
            let head_ok = match head.split_once(" -> ") {
                Some((a, b)) => id(a) && id(b),
                None => id(head) && attr.is_some(),
            };
            head_ok && attr.is_none_or(attrs)
        })
}

fn reachable(graph: &XacGraph) -> Vec<bool> {
    let mut seen = vec![false; graph.nodes().len()];
    let mut stack = vec![graph.entry()];
    while let Some(n) = stack.pop() {
        if seen[n.0] {
            continue;
        }
        seen[n.0] = true;
        stack.extend(graph.out_edges(n).map(|e| e.to));
    }
    seen
}

fn has_cycle_avoiding(graph: &XacGraph, avoid: NodeId) -> bool {
    // 0 unvisited, 1 on stack, 2 done
    let mut state = vec![0u8; graph.nodes().len()];
    fn dfs(g: &XacGraph, n: NodeId, avoid: NodeId, state: &mut [u8]) -> bool {
        state[n.0] = 1;
        for e in g.out_edges(n) {
            if e.to == avoid {
                continue;
            }
            let seen = state[e.to.0];
            if seen == 1 || (seen == 0 && dfs(g, e.to, avoid, state)) {
                return true;
            }
        }
        state[n.0] = 2;
        false
    }
    (0..graph.nodes().len())
        .map(NodeId)
        .filter(|n| *n != avoid)
        .any(|n| state[n.0] == 0 && dfs(graph, n, avoid, &mut state))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn exactly_one_path_is_consistent(policy in policy_strategy(), granularity in granularity_strategy(), seed in any::<u64>()) {
        let set = PathSet::build(&policy, granularity, DEFAULT_PATH_CAP).unwrap();
        for request in sample_requests(&policy, 24, seed) {
            let observed = observe(&policy, &request, granularity);
            let consistent = set.paths().iter().filter(|p| p.profile.is_consistent_with(&observed)).count();
            prop_assert_eq!(consistent, 1, "{}", observed);
        }
    }

    #[test]
    fn oracle_verdict_matches_reference(policy in policy_strategy(), granularity in granularity_strategy(), seed in any::<u64>()) {
        let set = PathSet::build(&policy, granularity, DEFAULT_PATH_CAP).unwrap();
        for request in sample_requests(&policy, 24, seed) {
            let result = evaluate(&set, &request);
            prop_assert_eq!(result.verdict, evaluate_direct(&policy, &request));
            let covered = set.by_rank(result.covered_path_rank).unwrap();
            prop_assert!(covered.feasible);
            prop_assert!(covered.profile.is_consistent_with(&result.rule_outcomes));
        }
    }

    #[test]
    fn walks_are_legal_and_end_at_their_verdict(policy in policy_strategy(), granularity in granularity_strategy()) {
        let set = PathSet::build(&policy, granularity, DEFAULT_PATH_CAP).unwrap();
        let g = set.graph();
        for path in set.paths() {
            prop_assert_eq!(path.walk[0], g.entry());
            prop_assert_eq!(path.length, path.walk.len());
            for pair in path.walk.windows(2) {
                prop_assert!(g.has_edge(pair[0], pair[1]), "{} -> {}", g.node(pair[0]).label(), g.node(pair[1]).label());
            }
            let last = g.node(*path.walk.last().unwrap()).node_type;
            let expected = match path.verdict {
                Decision::Permit => NodeType::ReturnPermit,
                Decision::Deny => NodeType::ReturnDeny,
                Decision::NotApplicable => NodeType::ReturnNotApplicable,
            };
            prop_assert_eq!(last, expected);
            // Every evaluated rule leaves through its own exit node.
            for (i, outcome) in path.profile.rules.iter().enumerate() {
                let effect = path.walk.contains(&g.effect_node(i));
                let na = path.walk.contains(&g.not_applicable_node(i));
                match outcome {
                    RuleOutcome::Satisfied => prop_assert!(effect && !na),
                    RuleOutcome::Unsatisfied(_) => prop_assert!(na && !effect),
                    RuleOutcome::NotEvaluated => prop_assert!(!na && !effect),
                }
            }
        }
    }

    #[test]
    fn profiles_respect_their_invariants(policy in policy_strategy()) {
        let set = PathSet::build(&policy, Granularity::Rule, DEFAULT_PATH_CAP).unwrap();
        let profiles: BTreeSet<_> = set.paths().iter().map(|p| p.profile.clone()).collect();
        prop_assert_eq!(profiles.len(), set.paths().len());
        for p in set.paths() {
            if p.profile.policy_target != TargetOutcome::Satisfied {
                prop_assert!(p.profile.rules.iter().all(|r| *r == RuleOutcome::NotEvaluated));
            }
            if policy.algorithm() == Algorithm::FirstApplicable {
                let sat = p.profile.rules.iter().filter(|r| **r == RuleOutcome::Satisfied).count();
                prop_assert!(sat <= 1);
                if let Some(i) = p.deciding_rule() {
                    prop_assert!(p.profile.rules[i + 1..].iter().all(|r| *r == RuleOutcome::NotEvaluated));
                }
            }
        }
        let ranks: Vec<usize> = set.paths().iter().map(|p| p.rank).collect();
        prop_assert_eq!(ranks, (1..=set.paths().len()).collect::<Vec<_>>());
    }

    #[test]
    fn overriding_verdicts_are_ordered(policy in policy_strategy()) {
        let set = PathSet::build(&policy, Granularity::Rule, DEFAULT_PATH_CAP).unwrap();
        let priority = |d: Decision| match (policy.algorithm(), d) {
            (_, Decision::NotApplicable) => 2,
            (Algorithm::PermitOverrides, Decision::Permit) | (Algorithm::DenyOverrides, Decision::Deny) => 0,
            _ => 1,
        };
        for pair in set.paths().windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if policy.algorithm() != Algorithm::FirstApplicable {
                prop_assert!(priority(a.verdict) <= priority(b.verdict));
            }
            if a.verdict == b.verdict && priority(a.verdict) == priority(b.verdict) && policy.algorithm() != Algorithm::FirstApplicable {
                prop_assert!(a.length <= b.length);
            }
        }
    }

    #[test]
    fn graph_shape(policy in policy_strategy()) {
        let g = XacGraph::from_policy(&policy).unwrap();
        prop_assert!(reachable(&g).iter().all(|r| *r));
        prop_assert!(!has_cycle_avoiding(&g, g.rule_algorithm()));
        for node in g.nodes().iter().filter(|n| n.node_type.is_match()) {
            prop_assert_eq!(g.out_edges(node.id).count(), 2);
        }
        let again = XacGraph::from_policy(&policy).unwrap();
        prop_assert_eq!(g.edges(), again.edges());
        prop_assert_eq!(g.nodes(), again.nodes());
        prop_assert!(build_tree(&policy).validate().is_ok());
    }

    #[test]
    fn dot_output_is_well_formed(policy in policy_strategy()) {
        let tree = export_tree_dot(&build_tree(&policy));
        prop_assert!(is_simple_dot(&tree, "xac_tree"), "{}", tree);
        let graph = export_graph_dot(&XacGraph::from_policy(&policy).unwrap());
        prop_assert!(is_simple_dot(&graph, "xac_graph"), "{}", graph);
    }

    #[test]
    fn policy_xml_round_trips(policy in policy_strategy()) {
        let text = write_policy(&policy);
        let parsed = parse_policy(&text).unwrap();
        prop_assert_eq!(&parsed, &policy);
        prop_assert_eq!(write_policy(&parsed), text);
    }

    #[test]
    fn request_xml_round_trips(policy in policy_strategy(), seed in any::<u64>()) {
        for request in sample_requests(&policy, 8, seed) {
            let parsed = parse_request(&write_request(&request)).unwrap();
            for category in xacmet::model::Category::ALL {
                let mut a = request.bag(category).entries().to_vec();
                let mut b = parsed.bag(category).entries().to_vec();
                a.sort();
                b.sort();
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn bag_order_does_not_matter(policy in policy_strategy(), seed in any::<u64>()) {
        let set = PathSet::build(&policy, Granularity::Rule, DEFAULT_PATH_CAP).unwrap();
        for request in sample_requests(&policy, 16, seed) {
            let flipped = reversed(&request);
            prop_assert_eq!(evaluate_direct(&policy, &request), evaluate_direct(&policy, &flipped));
            prop_assert_eq!(evaluate(&set, &request), evaluate(&set, &flipped));
        }
    }

    #[test]
    fn flipping_effects_mirrors_decisions(policy in policy_strategy(), seed in any::<u64>()) {
        let mirror = mirrored(&policy);
        let set = PathSet::build(&mirror, Granularity::Rule, DEFAULT_PATH_CAP).unwrap();
        for request in sample_requests(&policy, 16, seed) {
            let original = evaluate_direct(&policy, &request);
            prop_assert_eq!(evaluate_direct(&mirror, &request), swap(original));
            prop_assert_eq!(evaluate(&set, &request).verdict, swap(original));
        }
    }

    #[test]
    fn overriding_combination_ignores_order(outcomes in prop::collection::vec(rule_result_strategy(), 0..6)) {
        let mut reversed = outcomes.clone();
        reversed.reverse();
        for algorithm in [Algorithm::DenyOverrides, Algorithm::PermitOverrides] {
            prop_assert_eq!(combine(algorithm, &outcomes), combine(algorithm, &reversed));
        }
        for algorithm in Algorithm::ALL {
            let d = combine(algorithm, &outcomes);
            let witness = match d {
                Decision::Permit => outcomes.contains(&RuleResult::SatPermit),
                Decision::Deny => outcomes.contains(&RuleResult::SatDeny),
                Decision::NotApplicable => true,
            };
            prop_assert!(witness);
        }
    }
}

#[test]
fn two_permit_rules_under_deny_overrides() {
    let policy = Policy::new(
        "p",
        Algorithm::DenyOverrides,
        Default::default(),
        vec![Rule::new("a", Effect::Permit), Rule::new("b", Effect::Permit)],
    )
    .unwrap();
    let set = PathSet::build(&policy, Granularity::Rule, DEFAULT_PATH_CAP).unwrap();
    use RuleOutcome::Satisfied as S;
    let u = RuleOutcome::Unsatisfied(None);
    let rule_paths: BTreeSet<(Vec<RuleOutcome>, Decision)> = set
        .paths()
        .iter()
        .filter(|p| p.profile.policy_target == TargetOutcome::Satisfied)
        .map(|p| (p.profile.rules.clone(), p.verdict))
        .collect();
    let expected: BTreeSet<(Vec<RuleOutcome>, Decision)> = [
        (vec![S, S], Decision::Permit),
        (vec![S, u], Decision::Permit),
        (vec![u, S], Decision::Permit),
        (vec![u, u], Decision::NotApplicable),
    ]
    .into_iter()
    .collect();
    assert_eq!(rule_paths, expected);
    // Brute force over rule results agrees with each path's verdict.
    for (rules, verdict) in &expected {
        let results: Vec<RuleResult> = rules
            .iter()
            .map(|r| if *r == S { RuleResult::SatPermit } else { RuleResult::Unsat })
            .collect();
        assert_eq!(combine(Algorithm::DenyOverrides, &results), *verdict);
    }
}

#[test]
fn eval_rule_folds_errors_to_unsat() {
    let policy = parse_policy(&std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/condition_only.xml")).unwrap()).unwrap();
    assert_eq!(eval_rule(&policy.rules()[0], &Request::new()), RuleResult::Unsat);
}
