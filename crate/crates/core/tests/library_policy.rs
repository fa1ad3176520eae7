use std::path::PathBuf;

use xacmet::graph::{export_graph_dot, forward_nodes, EdgeColor, EdgeOrigin, XacGraph};
use xacmet::harness::{differential_check, enumerate_requests};
use xacmet::model::{Decision, Policy, Request};
use xacmet::oracle::{batch_evaluate, coverage, evaluate};
use xacmet::paths::{path_constraints, Granularity, OutcomeProfile, PathSet, RuleOutcome, TargetOutcome, DEFAULT_PATH_CAP};
use xacmet::reference::evaluate_direct;
use xacmet::tree::{build_tree, XacNode};
use xacmet::xml::{parse_policy, parse_request};

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn policy() -> Policy {
    parse_policy(&fixture("library.xml")).unwrap()
}

fn canonical_requests() -> Vec<Request> {
    ["rule_a_only", "both_rules", "rule_b_only", "neither"]
        .iter()
        .map(|n| parse_request(&fixture(&format!("requests/{n}.xml"))).unwrap())
        .collect()
}

fn paths() -> PathSet {
    PathSet::build(&policy(), Granularity::Rule, DEFAULT_PATH_CAP).unwrap()
}

#[test]
fn tree_numbering() {
    let tree = build_tree(&policy());
    let labels: Vec<String> = tree.nodes().iter().map(XacNode::label).collect();
    assert_eq!(
        labels,
        [
            "Policy_1", "Target_2", "Rule_3", "Target_4", "Resources_5", "Resource_6", "Resource_7", "Resource_8",
            "Actions_9", "Action_10", "Condition_11", "Rule_12", "Target_13", "Subjects_14", "Subject_15",
            "Resources_16", "Resource_17", "Actions_18", "Action_19",
        ]
    );
    assert_eq!(tree.node(xacmet::tree::NodeId(2)).display_label(), "Rule_3 [Deny]");
}

#[test]
fn nine_listed_edges_with_their_conditions() {
    let g = XacGraph::from_policy(&policy()).unwrap();
    let expected = [
        ("Target_2", "Rule_3", 1),
        ("Resource_7", "Actions_9", 2),
        ("Policy_1", "Target_2", 3),
        ("Condition_11", "NotApplicable_3", 4),
        ("Condition_11", "Effect_3", 4),
        ("Effect_3", "RuleAlgorithm", 5),
        ("RuleAlgorithm", "ReturnPermit", 6),
        ("RuleAlgorithm", "ReturnDeny", 7),
        ("RuleAlgorithm", "Rule_12", 8),
    ];
    for (from, to, condition) in expected {
        let (a, b) = (g.find(from).unwrap(), g.find(to).unwrap());
        let edge = g.edge(a, b).unwrap_or_else(|| panic!("missing {from} -> {to}"));
        assert_eq!(edge.origin, EdgeOrigin::GraphParent(condition), "{from} -> {to}");
    }
    let algorithm = g.node(g.rule_algorithm()).display_label();
    assert_eq!(algorithm, "RuleAlgorithm [DenyOverrides]");
}

#[test]
fn match_nodes_have_one_red_and_one_blue_successor() {
    let g = XacGraph::from_policy(&policy()).unwrap();
    let matches: Vec<&XacNode> = g.nodes().iter().filter(|n| n.node_type.is_match()).collect();
    assert_eq!(matches.len(), 7);
    for node in matches {
        assert_eq!(forward_nodes(&g, node.id).len(), 2, "{}", node.label());
        let colors: Vec<EdgeColor> = g.out_edges(node.id).map(|e| e.color).collect();
        assert!(colors.contains(&EdgeColor::Red) && colors.contains(&EdgeColor::Blue), "{}", node.label());
    }
    let dot = export_graph_dot(&g);
    assert!(dot.contains("style=dashed") && dot.contains("style=dotted"));
    assert!(dot.contains("[DenyOverrides]"));
}

#[test]
fn four_paths_in_deny_first_order() {
    let set = paths();
    let summary: Vec<(usize, Decision, OutcomeProfile, bool)> = set
        .paths()
        .iter()
        .map(|p| (p.rank, p.verdict, p.profile.clone(), p.feasible))
        .collect();
    let profile = |target, rules: [RuleOutcome; 2]| OutcomeProfile {
        policy_target: target,
        rules: rules.to_vec(),
    };
    use RuleOutcome::{NotEvaluated as N, Satisfied as S};
    let u = RuleOutcome::Unsatisfied(None);
    assert_eq!(
        summary,
        [
            (1, Decision::Deny, profile(TargetOutcome::Satisfied, [S, N]), true),
            (2, Decision::Permit, profile(TargetOutcome::Satisfied, [u, S]), true),
            (3, Decision::NotApplicable, profile(TargetOutcome::Unsatisfied(None), [N, N]), false),
            (4, Decision::NotApplicable, profile(TargetOutcome::Satisfied, [u, u]), true),
        ]
    );
    let deny = set.by_rank(1).unwrap().walk_labels(set.graph());
    assert_eq!(
        deny,
        [
            "Policy_1", "Target_2", "Rule_3", "Target_4", "Resources_5", "Resource_6", "Resource_7", "Resource_8",
            "Actions_9", "Action_10", "Condition_11", "Effect_3", "RuleAlgorithm", "ReturnDeny",
        ]
    );
}

#[test]
fn deny_path_constraints_name_rule_a_elements() {
    let set = paths();
    let text = path_constraints(set.policy(), set.by_rank(1).unwrap()).to_string();
    for needle in ["write", "book", "document", "documententry", "string-is-in"] {
        assert!(text.contains(needle), "{needle} missing from\n{text}");
    }
    let permit = path_constraints(set.policy(), set.by_rank(2).unwrap());
    assert!(permit.constraints.iter().any(|c| c.element == "ruleA" && !c.holds));
    assert!(permit.constraints.iter().any(|c| c.element.starts_with("ruleB") && c.expr.contains("Julius")));
}

#[test]
fn canonical_requests_get_their_verdicts() {
    let set = paths();
    let requests = canonical_requests();
    let started = std::time::Instant::now();
    let verdicts: Vec<Decision> = batch_evaluate(&set, &requests).iter().map(|r| r.verdict).collect();
    assert!(started.elapsed().as_secs_f64() < 1.0);
    assert_eq!(
        verdicts,
        [Decision::Deny, Decision::Deny, Decision::Permit, Decision::NotApplicable]
    );
    for r in &requests {
        assert_eq!(evaluate(&set, r).verdict, evaluate_direct(set.policy(), r));
    }
    let report = coverage(&set, &requests);
    assert_eq!(report.covered_paths, 3);
    assert!(report.uncovered_feasible().is_empty());
    assert_eq!(report.hits.iter().map(|h| h.hits).sum::<usize>(), 4);
}

#[test]
fn exhaustive_enumeration_agrees_and_covers_every_feasible_path() {
    let policy = policy();
    let requests = enumerate_requests(&policy, None).unwrap();
    assert!(requests[0].is_empty());
    let report = differential_check(&policy, &requests).unwrap();
    assert!(report.all_agree(), "{:?}", report.disagreements.first());
    assert_eq!(report.agreements, requests.len());
    let cov = coverage(&paths(), &requests);
    assert!(cov.uncovered_feasible().is_empty(), "{:?}", cov.uncovered_feasible());
}

#[test]
fn element_paths_need_multi_valued_bags() {
    // Failing ruleA at its condition while ruleB holds needs two resource-id
    // values and two action-id values, which single-valued enumeration never
    // produces.
    let policy = policy();
    let set = PathSet::build(&policy, Granularity::Element, DEFAULT_PATH_CAP).unwrap();
    let single = coverage(&set, &enumerate_requests(&policy, None).unwrap());
    assert!(!single.uncovered_feasible().is_empty());
    let mut requests = enumerate_requests(&policy, None).unwrap();
    requests.extend(xacmet::harness::sample_requests(&policy, 5000, 11));
    requests.extend(canonical_requests());
    let cov = coverage(&set, &requests);
    assert!(cov.uncovered_feasible().is_empty(), "{:?}", cov.uncovered_feasible());
}

#[test]
fn resource_domain_includes_every_listed_value() {
    use xacmet::model::Category;
    let domains = xacmet::xml::mine_attribute_values(&policy());
    let resources: Vec<&str> = domains[&(Category::Resource, "urn:oasis:names:tc:xacml:1.0:resource:resource-id".to_string())]
        .iter()
        .map(|v| v.literal())
        .collect();
    assert_eq!(
        resources,
        ["___XACMET_NOMATCH___", "book", "document", "documententry", "journals"]
    );
}
