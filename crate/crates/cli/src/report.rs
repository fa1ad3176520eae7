//! Text and JSON renderings of the library's results. Every JSON document
//! carries `format_version: 1`.

use std::fmt::Write as _;

use serde_json::{json, Value};
use xacmet::graph::{export_graph_text, XacGraph};
use xacmet::harness::DiffReport;
use xacmet::oracle::{CoverageReport, OracleResult};
use xacmet::paths::{path_constraints, EvaluationPath, OutcomeProfile, PathSet};
use xacmet::tree::{XacNode, XacTree};

pub const FORMAT_VERSION: u32 = 1;

pub fn to_json(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    text
}

fn node_json(node: &XacNode) -> Value {
    json!({
        "id": node.id.0,
        "label": node.label(),
        "type": node.node_type.name(),
        "parameter": node.parameter,
        "attribute": node.attr.map(|a| a.value()),
    })
}

fn profile_json(profile: &OutcomeProfile) -> Value {
    json!({
        "policy_target": profile.policy_target.to_string(),
        "rules": profile.rules.iter().map(ToString::to_string).collect::<Vec<_>>(),
    })
}

pub fn tree_text(tree: &XacTree) -> String {
    let mut out = String::new();
    fn walk(tree: &XacTree, id: xacmet::tree::NodeId, depth: usize, out: &mut String) {
        let _ = writeln!(out, "{}{}", "  ".repeat(depth), tree.node(id).display_label());
        for c in tree.children(id) {
            walk(tree, *c, depth + 1, out);
        }
    }
    walk(tree, tree.root(), 0, &mut out);
    out
}

pub fn tree_json(tree: &XacTree) -> Value {
    json!({
        "format_version": FORMAT_VERSION,
        "policy_id": tree.policy().id(),
        "nodes": tree.nodes().iter().map(node_json).collect::<Vec<_>>(),
        "edges": tree.edges().iter().map(|(p, c)| json!([p.0, c.0])).collect::<Vec<_>>(),
    })
}

pub fn graph_text(graph: &XacGraph) -> String {
    export_graph_text(graph)
}

pub fn graph_json(graph: &XacGraph) -> Value {
    let edges: Vec<Value> = graph
        .edges()
        .iter()
        .map(|e| {
            json!({
                "from": e.from.0,
                "to": e.to.0,
                "from_label": graph.node(e.from).label(),
                "to_label": graph.node(e.to).label(),
                "origin": e.origin.label(),
                "condition": e.origin.condition_number(),
                "color": format!("{:?}", e.color).to_lowercase(),
            })
        })
        .collect();
    json!({
        "format_version": FORMAT_VERSION,
        "policy_id": graph.tree().policy().id(),
        "algorithm": graph.algorithm().name(),
        "nodes": graph.nodes().iter().map(node_json).collect::<Vec<_>>(),
        "edges": edges,
    })
}

fn path_json(set: &PathSet, path: &EvaluationPath) -> Value {
    let constraints = path_constraints(set.policy(), path);
    json!({
        "rank": path.rank,
        "verdict": path.verdict.name(),
        "feasible": path.feasible,
        "length": path.length,
        "profile": profile_json(&path.profile),
        "walk": path.walk_labels(set.graph()),
        "constraints": constraints.constraints.iter().map(|c| json!({
            "element": c.element,
            "holds": c.holds,
            "expr": c.expr,
        })).collect::<Vec<_>>(),
    })
}

fn path_text(set: &PathSet, path: &EvaluationPath, out: &mut String) {
    let flag = if path.feasible { "" } else { " (unfeasible)" };
    let _ = writeln!(out, "#{} {}{flag}  {}", path.rank, path.verdict, path.profile);
    let _ = writeln!(out, "  walk: {}", path.walk_labels(set.graph()).join(" -> "));
    let constraints = path_constraints(set.policy(), path).to_string();
    for line in constraints.lines() {
        let _ = writeln!(out, "  | {line}");
    }
}

pub fn paths_text(set: &PathSet) -> String {
    let mut out = format!(
        "policy {} ({}, {} paths, {} granularity)\n",
        set.policy().id(),
        set.policy().algorithm(),
        set.paths().len(),
        set.granularity().name()
    );
    for path in set.paths() {
        path_text(set, path, &mut out);
    }
    out
}

pub fn paths_json(set: &PathSet) -> Value {
    json!({
        "format_version": FORMAT_VERSION,
        "policy_id": set.policy().id(),
        "algorithm": set.policy().algorithm().name(),
        "granularity": set.granularity().name(),
        "paths": set.paths().iter().map(|p| path_json(set, p)).collect::<Vec<_>>(),
    })
}

pub fn eval_text(set: &PathSet, result: &OracleResult, explain: bool) -> String {
    let path = set.by_rank(result.covered_path_rank).expect("rank comes from this path set");
    let mut out = format!("{}\n", result.verdict);
    let _ = writeln!(out, "covered path: #{}  {}", path.rank, path.profile);
    if explain {
        let _ = writeln!(out, "observed: {}", result.rule_outcomes);
        path_text(set, path, &mut out);
    }
    out
}

pub fn eval_json(set: &PathSet, result: &OracleResult, explain: bool) -> Value {
    let path = set.by_rank(result.covered_path_rank).expect("rank comes from this path set");
    let mut value = json!({
        "format_version": FORMAT_VERSION,
        "policy_id": set.policy().id(),
        "verdict": result.verdict.name(),
        "covered_path_rank": result.covered_path_rank,
        "rule_outcomes": profile_json(&result.rule_outcomes),
    });
    if explain {
        value["covered_path"] = path_json(set, path);
    }
    value
}

pub fn coverage_text(policy_id: &str, report: &CoverageReport) -> String {
    let mut out = format!(
        "policy {policy_id}: {} requests, {}/{} paths covered ({} feasible)\n",
        report.requests, report.covered_paths, report.total_paths, report.feasible_paths
    );
    for h in &report.hits {
        let flag = if h.feasible { "" } else { " (unfeasible)" };
        let _ = writeln!(out, "  #{}: {} hits{flag}", h.rank, h.hits);
    }
    let uncovered = report.uncovered_feasible();
    if !uncovered.is_empty() {
        let ranks: Vec<String> = uncovered.iter().map(|r| format!("#{r}")).collect();
        let _ = writeln!(out, "uncovered feasible paths: {}", ranks.join(", "));
    }
    out
}

pub fn coverage_json(policy_id: &str, report: &CoverageReport) -> Value {
    let mut value = serde_json::to_value(report).expect("report serializes");
    value["format_version"] = json!(FORMAT_VERSION);
    value["policy_id"] = json!(policy_id);
    value
}

pub fn diff_text(reports: &[DiffReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let _ = writeln!(
            out,
            "policy {}: {}/{} agree with {}",
            r.policy_id, r.agreements, r.requests, r.reference
        );
        for d in &r.disagreements {
            let request = serde_json::to_string(&d.request).expect("request serializes");
            let _ = writeln!(
                out,
                "  request {}: oracle {} (path #{}), {} {}: {request}",
                d.index, d.oracle, d.covered_path_rank, r.reference, d.reference
            );
        }
    }
    let total: usize = reports.iter().map(|r| r.requests).sum();
    let bad: usize = reports.iter().map(|r| r.disagreements.len()).sum();
    let _ = writeln!(out, "total: {} policies, {total} requests, {bad} disagreements", reports.len());
    out
}

pub fn diff_json(reports: &[DiffReport]) -> Value {
    json!({
        "format_version": FORMAT_VERSION,
        "policies": reports.len(),
        "requests": reports.iter().map(|r| r.requests).sum::<usize>(),
        "disagreements": reports.iter().map(|r| r.disagreements.len()).sum::<usize>(),
        "reports": serde_json::to_value(reports).expect("reports serialize"),
    })
}
