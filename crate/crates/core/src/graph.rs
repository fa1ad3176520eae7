//! The XAC-Graph: tree nodes plus Effect/NotApplicable exits per rule, one
//! RuleAlgorithm hub and the Return sinks, connected by the eight
//! graph-parent conditions.
//!
//! The eight conditions alone leave some nodes without a way forward (the
//! last leaf of a `<Target>` whose group has no right sibling, the failure
//! of a last match alternative). Those gaps are closed by extension edges,
//! each tagged with its own [`EdgeOrigin`] so the literal edges stay
//! identifiable.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Algorithm, Effect};
use crate::tree::{dot_node, NodeAttr, NodeId, NodeType, Payload, Scope, XacNode, XacTree};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("malformed tree: {0}")]
    MalformedTree(String),
}

/// Why an edge exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EdgeOrigin {
    /// One of the eight graph-parent conditions (1..=8).
    GraphParent(u8),
    /// Match succeeded: continue after the enclosing group, possibly
    /// climbing several levels (or into the first rule, or to the Effect).
    AncestorHop,
    /// Last alternative of a rule-target group failed: go to the rule's
    /// NotApplicable exit.
    MatchFailure,
    /// The policy target failed: the policy is skipped.
    PolicySkip,
    /// An empty rule target that is the rule's only leaf.
    EmptyRuleTarget,
    /// RuleAlgorithm to ReturnNotApplicable.
    NotApplicableReturn,
}

impl EdgeOrigin {
    pub fn condition_number(self) -> Option<u8> {
        match self {
            EdgeOrigin::GraphParent(n) => Some(n),
            _ => None,
        }
    }

    pub fn label(self) -> String {
        match self {
            EdgeOrigin::GraphParent(n) => format!("c{n}"),
            EdgeOrigin::AncestorHop => "hop".into(),
            EdgeOrigin::MatchFailure => "fail".into(),
            EdgeOrigin::PolicySkip => "skip".into(),
            EdgeOrigin::EmptyRuleTarget => "exit".into(),
            EdgeOrigin::NotApplicableReturn => "na".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EdgeColor {
    /// Dashed.
    Red,
    /// Dotted.
    Blue,
    Plain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub origin: EdgeOrigin,
    pub color: EdgeColor,
}

#[derive(Debug, Clone)]
pub struct XacGraph {
    tree: XacTree,
    nodes: Vec<XacNode>,
    edges: Vec<Edge>,
    out: Vec<Vec<usize>>,
    effects: Vec<NodeId>,
    not_applicables: Vec<NodeId>,
    rule_algorithm: NodeId,
    return_permit: Option<NodeId>,
    return_deny: Option<NodeId>,
    return_not_applicable: NodeId,
}

impl XacGraph {
    /// Tree, graph and coloring in one step.
    pub fn from_policy(policy: &crate::model::Policy) -> Result<XacGraph, GraphError> {
        let tree = crate::tree::build_tree(policy);
        Ok(color_edges(build_graph(&tree)?))
    }

    pub fn tree(&self) -> &XacTree {
        &self.tree
    }

    pub fn entry(&self) -> NodeId {
        self.tree.root()
    }

    pub fn nodes(&self) -> &[XacNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &XacNode {
        &self.nodes[id.0]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn out_edges(&self, id: NodeId) -> impl Iterator<Item = &Edge> {
        self.out[id.0].iter().map(|e| &self.edges[*e])
    }

    pub fn edge(&self, from: NodeId, to: NodeId) -> Option<&Edge> {
        self.out_edges(from).find(|e| e.to == to)
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.edge(from, to).is_some()
    }

    pub fn rule_algorithm(&self) -> NodeId {
        self.rule_algorithm
    }

    pub fn algorithm(&self) -> Algorithm {
        match self.node(self.rule_algorithm).attr {
            Some(NodeAttr::Algorithm(a)) => a,
            _ => unreachable!("RuleAlgorithm always carries its algorithm"),
        }
    }

    pub fn effect_node(&self, rule: usize) -> NodeId {
        self.effects[rule]
    }

    pub fn not_applicable_node(&self, rule: usize) -> NodeId {
        self.not_applicables[rule]
    }

    pub fn return_node(&self, decision: crate::model::Decision) -> Option<NodeId> {
        use crate::model::Decision;
        match decision {
            Decision::Permit => self.return_permit,
            Decision::Deny => self.return_deny,
            Decision::NotApplicable => Some(self.return_not_applicable),
        }
    }

    /// Node with the given `Type_Parameter` (or bare type) label.
    pub fn find(&self, label: &str) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.label() == label).map(|n| n.id)
    }

    fn add_node(&mut self, node_type: NodeType, parameter: Option<u32>, attr: Option<NodeAttr>, payload: Payload) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(XacNode {
            id,
            node_type,
            parameter,
            attr,
            payload,
        });
        self.out.push(Vec::new());
        id
    }

    /// Adds an edge unless the pair is already connected.
    fn add_edge(&mut self, from: NodeId, to: NodeId, origin: EdgeOrigin) {
        if self.has_edge(from, to) {
            return;
        }
        self.out[from.0].push(self.edges.len());
        self.edges.push(Edge {
            from,
            to,
            origin,
            color: EdgeColor::Plain,
        });
    }
}

/// Out-neighbourhood of `node`, in edge insertion order.
pub fn forward_nodes(graph: &XacGraph, node: NodeId) -> Vec<NodeId> {
    graph.out_edges(node).map(|e| e.to).collect()
}

fn rule_index(tree: &XacTree, id: NodeId) -> Option<usize> {
    let mut n = id;
    loop {
        if let Payload::Rule(i) = tree.node(n).payload {
            return Some(i);
        }
        n = tree.parent(n)?;
    }
}

/// Builds the uncolored graph.
pub fn build_graph(tree: &XacTree) -> Result<XacGraph, GraphError> {
    tree.validate().map_err(GraphError::MalformedTree)?;
    let policy = tree.policy();
    let mut g = XacGraph {
        tree: tree.clone(),
        nodes: tree.nodes().to_vec(),
        edges: Vec::new(),
        out: vec![Vec::new(); tree.len()],
        effects: Vec::new(),
        not_applicables: Vec::new(),
        rule_algorithm: NodeId(0),
        return_permit: None,
        return_deny: None,
        return_not_applicable: NodeId(0),
    };

    let rule_nodes = tree.rule_nodes();
    for (index, rule_node) in rule_nodes.iter().enumerate() {
        let parameter = tree.node(*rule_node).parameter;
        let effect = policy.rules()[index].effect;
        let e = g.add_node(NodeType::Effect, parameter, Some(NodeAttr::EffectValue(effect)), Payload::RuleExit(index));
        let na = g.add_node(NodeType::NotApplicable, parameter, None, Payload::RuleExit(index));
        g.effects.push(e);
        g.not_applicables.push(na);
    }
    g.rule_algorithm = g.add_node(
        NodeType::RuleAlgorithm,
        None,
        Some(NodeAttr::Algorithm(policy.algorithm())),
        Payload::None,
    );
    let has_effect = |e: Effect| policy.rules().iter().any(|r| r.effect == e);
    if has_effect(Effect::Permit) {
        g.return_permit = Some(g.add_node(NodeType::ReturnPermit, None, None, Payload::None));
    }
    if has_effect(Effect::Deny) {
        g.return_deny = Some(g.add_node(NodeType::ReturnDeny, None, None, Payload::None));
    }
    g.return_not_applicable = g.add_node(NodeType::ReturnNotApplicable, None, None, Payload::None);

    // The eight graph-parent conditions over tree nodes.
    for node in tree.nodes() {
        let i = node.id;
        let leaf = tree.is_leaf(i);
        // 3: parent to its first child.
        if let Some(first) = tree.children(i).first() {
            g.add_edge(i, *first, EdgeOrigin::GraphParent(3));
        }
        // 1: childless node to its right sibling. The policy target reaches
        // the first rule this way, so Rule is not excluded as a successor.
        if leaf {
            if let Some(j) = tree.right_sibling(i) {
                g.add_edge(i, j, EdgeOrigin::GraphParent(1));
            }
        }
        // 2: leaf to the right sibling of its parent, never into a Rule.
        if leaf {
            if let Some(j) = tree.parent(i).and_then(|k| tree.right_sibling(k)) {
                if tree.node(j).node_type != NodeType::Rule {
                    g.add_edge(i, j, EdgeOrigin::GraphParent(2));
                }
            }
        }
        // 4: rightmost leaf of a rule subtree to the rule's exits.
        if leaf && node.node_type != NodeType::Target {
            if let Some(r) = rule_index(tree, i) {
                if tree.rightmost_leaf(rule_nodes[r]) == i {
                    g.add_edge(i, g.effects[r], EdgeOrigin::GraphParent(4));
                    g.add_edge(i, g.not_applicables[r], EdgeOrigin::GraphParent(4));
                }
            }
        }
    }
    let hub = g.rule_algorithm;
    for r in 0..rule_nodes.len() {
        g.add_edge(g.effects[r], hub, EdgeOrigin::GraphParent(5));
        g.add_edge(g.not_applicables[r], hub, EdgeOrigin::GraphParent(5));
    }
    if let Some(p) = g.return_permit {
        g.add_edge(hub, p, EdgeOrigin::GraphParent(6));
    }
    if let Some(d) = g.return_deny {
        g.add_edge(hub, d, EdgeOrigin::GraphParent(7));
    }
    for rule_node in &rule_nodes {
        let after_target = tree
            .left_sibling(*rule_node)
            .is_some_and(|k| tree.node(k).node_type == NodeType::Target);
        if !after_target {
            g.add_edge(hub, *rule_node, EdgeOrigin::GraphParent(8));
        }
    }

    // Extensions.
    g.add_edge(hub, g.return_not_applicable, EdgeOrigin::NotApplicableReturn);
    for node in tree.nodes() {
        let i = node.id;
        match (node.node_type, node.payload) {
            (t, Payload::Match(scope, _, _)) if t.is_match() => {
                let mut up = tree.parent(i).expect("match nodes sit under a group");
                let next = loop {
                    if let Some(s) = tree.right_sibling(up) {
                        break s;
                    }
                    up = tree.parent(up).expect("groups sit under a target");
                    if let Payload::Rule(r) = tree.node(up).payload {
                        break g.effects[r];
                    }
                };
                g.add_edge(i, next, EdgeOrigin::AncestorHop);
                if tree.right_sibling(i).is_none() {
                    match scope {
                        Scope::Rule(r) => g.add_edge(i, g.not_applicables[r], EdgeOrigin::MatchFailure),
                        Scope::Policy => g.add_edge(i, g.return_not_applicable, EdgeOrigin::PolicySkip),
                    }
                }
            }
            (NodeType::Target, Payload::Target(Scope::Policy)) if tree.is_leaf(i) => {
                g.add_edge(i, g.return_not_applicable, EdgeOrigin::PolicySkip);
            }
            (NodeType::Target, Payload::Target(Scope::Rule(r)))
                if tree.is_leaf(i) && tree.right_sibling(i).is_none() =>
            {
                g.add_edge(i, g.effects[r], EdgeOrigin::EmptyRuleTarget);
                g.add_edge(i, g.not_applicables[r], EdgeOrigin::EmptyRuleTarget);
            }
            _ => {}
        }
    }
    Ok(g)
}

/// Colors the out-edges of every Subject/Resource/Action/Environment node
/// with exactly two successors: red when the successor has the same type or
/// is a NotApplicable exit, blue otherwise. All other edges stay plain.
pub fn color_edges(mut graph: XacGraph) -> XacGraph {
    for b in 0..graph.nodes.len() {
        let tb = graph.nodes[b].node_type;
        if !tb.is_match() || graph.out[b].len() != 2 {
            continue;
        }
        for e in graph.out[b].clone() {
            let tc = graph.nodes[graph.edges[e].to.0].node_type;
            graph.edges[e].color = if tc == tb || tc == NodeType::NotApplicable {
                EdgeColor::Red
            } else {
                EdgeColor::Blue
            };
        }
    }
    graph
}

/// Graphviz rendering: red edges dashed, blue edges dotted, each edge
/// labeled with its origin.
pub fn export_graph_dot(graph: &XacGraph) -> String {
    let mut out = String::from("digraph xac_graph {\n  node [shape=box];\n");
    for node in graph.nodes() {
        dot_node(&mut out, node);
    }
    for e in graph.edges() {
        let style = match e.color {
            EdgeColor::Red => ", color=red, style=dashed",
            EdgeColor::Blue => ", color=blue, style=dotted",
            EdgeColor::Plain => "",
        };
        let _ = writeln!(
            out,
            "  n{} -> n{} [label=\"{}\"{style}];",
            e.from.0,
            e.to.0,
            e.origin.label()
        );
    }
    out.push_str("}\n");
    out
}

/// One line per edge: `from -> to (origin, color)`.
pub fn export_graph_text(graph: &XacGraph) -> String {
    let mut out = String::new();
    for e in graph.edges() {
        let _ = writeln!(
            out,
            "{} -> {} ({}, {:?})",
            graph.node(e.from).display_label(),
            graph.node(e.to).display_label(),
            e.origin.label(),
            e.color
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Algorithm, Effect, Policy, Rule, TargetSpec};
    use crate::tree::build_tree;

    #[test]
    fn unconditional_rules_still_reach_their_exits() {
        let policy = Policy::new(
            "p",
            Algorithm::DenyOverrides,
            TargetSpec::any(),
            vec![Rule::new("a", Effect::Permit), Rule::new("b", Effect::Permit)],
        )
        .unwrap();
        let g = color_edges(build_graph(&build_tree(&policy)).unwrap());
        let t4 = g.find("Target_4").unwrap();
        assert_eq!(forward_nodes(&g, t4), [g.effect_node(0), g.not_applicable_node(0)]);
        assert!(g.return_node(crate::model::Decision::Deny).is_none());
        assert!(g.edges().iter().all(|e| e.color == EdgeColor::Plain));
        let hub = g.rule_algorithm();
        assert!(g.has_edge(hub, g.find("Rule_5").unwrap()));
        assert!(!g.has_edge(hub, g.find("Rule_3").unwrap()));
    }
}
