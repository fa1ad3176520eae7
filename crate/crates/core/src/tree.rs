//! The XAC-Tree: a typed, labeled tree mirroring the policy's XML structure.
//!
//! Nodes are numbered in pre-order starting at 1 (`Policy_1`, `Target_2`,
//! ...). `<SubjectMatch>`-level elements are not materialized: each
//! `<Subject>` node carries its match list as payload. Rules always get a
//! `Target` child, even when the document omits the element.

use std::fmt::Write as _;

use serde::Serialize;

use crate::model::{Algorithm, Category, Condition, Conjunct, Effect, Policy, Rule, TargetSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum NodeType {
    Policy,
    Target,
    Rule,
    Subjects,
    Subject,
    Resources,
    Resource,
    Actions,
    Action,
    Environments,
    Environment,
    Condition,
    RuleAlgorithm,
    Effect,
    NotApplicable,
    ReturnPermit,
    ReturnDeny,
    ReturnNotApplicable,
}

impl NodeType {
    pub fn name(self) -> &'static str {
        match self {
            NodeType::Policy => "Policy",
            NodeType::Target => "Target",
            NodeType::Rule => "Rule",
            NodeType::Subjects => "Subjects",
            NodeType::Subject => "Subject",
            NodeType::Resources => "Resources",
            NodeType::Resource => "Resource",
            NodeType::Actions => "Actions",
            NodeType::Action => "Action",
            NodeType::Environments => "Environments",
            NodeType::Environment => "Environment",
            NodeType::Condition => "Condition",
            NodeType::RuleAlgorithm => "RuleAlgorithm",
            NodeType::Effect => "Effect",
            NodeType::NotApplicable => "NotApplicable",
            NodeType::ReturnPermit => "ReturnPermit",
            NodeType::ReturnDeny => "ReturnDeny",
            NodeType::ReturnNotApplicable => "ReturnNotApplicable",
        }
    }

    pub fn group(category: Category) -> NodeType {
        match category {
            Category::Subject => NodeType::Subjects,
            Category::Resource => NodeType::Resources,
            Category::Action => NodeType::Actions,
            Category::Environment => NodeType::Environments,
        }
    }

    pub fn alternative(category: Category) -> NodeType {
        match category {
            Category::Subject => NodeType::Subject,
            Category::Resource => NodeType::Resource,
            Category::Action => NodeType::Action,
            Category::Environment => NodeType::Environment,
        }
    }

    /// Subject, Resource, Action or Environment.
    pub fn is_match(self) -> bool {
        matches!(
            self,
            NodeType::Subject | NodeType::Resource | NodeType::Action | NodeType::Environment
        )
    }

    pub fn is_return(self) -> bool {
        matches!(
            self,
            NodeType::ReturnPermit | NodeType::ReturnDeny | NodeType::ReturnNotApplicable
        )
    }

    /// Types allowed in the tree itself.
    pub fn is_tree_type(self) -> bool {
        !matches!(
            self,
            NodeType::RuleAlgorithm
                | NodeType::Effect
                | NodeType::NotApplicable
                | NodeType::ReturnPermit
                | NodeType::ReturnDeny
                | NodeType::ReturnNotApplicable
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum NodeAttr {
    RuleCombAlg(Algorithm),
    EffectRule(Effect),
    EffectValue(Effect),
    Algorithm(Algorithm),
}

impl NodeAttr {
    pub fn value(self) -> &'static str {
        match self {
            NodeAttr::RuleCombAlg(a) | NodeAttr::Algorithm(a) => a.name(),
            NodeAttr::EffectRule(e) | NodeAttr::EffectValue(e) => e.name(),
        }
    }
}

/// Where a target-related node lives: the policy target or a rule's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Scope {
    Policy,
    Rule(usize),
}

/// Link from a node back to the policy element it models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Payload {
    None,
    Rule(usize),
    Target(Scope),
    Group(Scope, Category),
    Match(Scope, Category, usize),
    Condition(usize),
    RuleExit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct XacNode {
    pub id: NodeId,
    pub node_type: NodeType,
    pub parameter: Option<u32>,
    pub attr: Option<NodeAttr>,
    pub payload: Payload,
}

impl XacNode {
    /// `Type_Parameter`, or just the type for unparameterized nodes.
    pub fn label(&self) -> String {
        match self.parameter {
            Some(p) => format!("{}_{}", self.node_type.name(), p),
            None => self.node_type.name().to_string(),
        }
    }

    /// Label followed by the attribute value in square brackets.
    pub fn display_label(&self) -> String {
        match self.attr {
            Some(a) => format!("{} [{}]", self.label(), a.value()),
            None => self.label(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct XacTree {
    policy: Policy,
    nodes: Vec<XacNode>,
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
}

struct Builder {
    nodes: Vec<XacNode>,
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
}

impl Builder {
    fn add(
        &mut self,
        parent: Option<NodeId>,
        node_type: NodeType,
        attr: Option<NodeAttr>,
        payload: Payload,
    ) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(XacNode {
            id,
            node_type,
            parameter: Some(id.0 as u32 + 1),
            attr,
            payload,
        });
        self.parent.push(parent);
        self.children.push(Vec::new());
        if let Some(p) = parent {
            self.children[p.0].push(id);
        }
        id
    }

    fn target(&mut self, parent: NodeId, scope: Scope, target: &TargetSpec) {
        let t = self.add(Some(parent), NodeType::Target, None, Payload::Target(scope));
        for category in target.constrained_categories() {
            let g = self.add(
                Some(t),
                NodeType::group(category),
                None,
                Payload::Group(scope, category),
            );
            for index in 0..target.alternatives(category).len() {
                self.add(
                    Some(g),
                    NodeType::alternative(category),
                    None,
                    Payload::Match(scope, category, index),
                );
            }
        }
    }

    fn rule(&mut self, parent: NodeId, index: usize, rule: &Rule) {
        let r = self.add(
            Some(parent),
            NodeType::Rule,
            Some(NodeAttr::EffectRule(rule.effect)),
            Payload::Rule(index),
        );
        self.target(r, Scope::Rule(index), &rule.target);
        if rule.condition.is_some() {
            self.add(Some(r), NodeType::Condition, None, Payload::Condition(index));
        }
    }
}

/// Builds the tree; node ids and parameters follow document pre-order.
pub fn build_tree(policy: &Policy) -> XacTree {
    let mut b = Builder {
        nodes: Vec::new(),
        parent: Vec::new(),
        children: Vec::new(),
    };
    let root = b.add(
        None,
        NodeType::Policy,
        Some(NodeAttr::RuleCombAlg(policy.algorithm())),
        Payload::None,
    );
    b.target(root, Scope::Policy, policy.target());
    for (index, rule) in policy.rules().iter().enumerate() {
        b.rule(root, index, rule);
    }
    XacTree {
        policy: policy.clone(),
        nodes: b.nodes,
        parent: b.parent,
        children: b.children,
    }
}

impl XacTree {
    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn nodes(&self) -> &[XacNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &XacNode {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.parent[id.0]
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id.0]
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.children[id.0].is_empty()
    }

    /// Parent-child pairs in pre-order of the child.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        (1..self.nodes.len())
            .filter_map(|i| self.parent[i].map(|p| (p, NodeId(i))))
            .collect()
    }

    fn sibling(&self, id: NodeId, offset: isize) -> Option<NodeId> {
        let parent = self.parent(id)?;
        let siblings = self.children(parent);
        let pos = siblings.iter().position(|s| *s == id)? as isize + offset;
        (pos >= 0).then(|| siblings.get(pos as usize).copied()).flatten()
    }

    pub fn left_sibling(&self, id: NodeId) -> Option<NodeId> {
        self.sibling(id, -1)
    }

    pub fn right_sibling(&self, id: NodeId) -> Option<NodeId> {
        self.sibling(id, 1)
    }

    /// The node and all its descendants, in pre-order.
    pub fn preorder(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.children(n).iter().rev());
        }
        out
    }

    pub fn rightmost_leaf(&self, id: NodeId) -> NodeId {
        let mut n = id;
        while let Some(last) = self.children(n).last() {
            n = *last;
        }
        n
    }

    /// Rule nodes in document order.
    pub fn rule_nodes(&self) -> Vec<NodeId> {
        self.children(self.root())
            .iter()
            .copied()
            .filter(|c| self.node(*c).node_type == NodeType::Rule)
            .collect()
    }

    pub fn target_of(&self, scope: Scope) -> &TargetSpec {
        match scope {
            Scope::Policy => self.policy.target(),
            Scope::Rule(i) => &self.policy.rules()[i].target,
        }
    }

    /// The match list a Subject/Resource/Action/Environment node stands for.
    pub fn conjunct(&self, id: NodeId) -> Option<&Conjunct> {
        match self.node(id).payload {
            Payload::Match(scope, category, index) => {
                self.target_of(scope).alternatives(category).get(index)
            }
            _ => None,
        }
    }

    pub fn condition(&self, id: NodeId) -> Option<&Condition> {
        match self.node(id).payload {
            Payload::Condition(rule) => self.policy.rules()[rule].condition.as_ref(),
            _ => None,
        }
    }

    /// Checks the structural invariants of a well-formed tree.
    pub fn validate(&self) -> Result<(), String> {
        let root = self.node(self.root());
        if root.node_type != NodeType::Policy {
            return Err(format!("root is {}, not Policy", root.label()));
        }
        if !matches!(root.attr, Some(NodeAttr::RuleCombAlg(_))) {
            return Err("root lacks RuleCombAlg".into());
        }
        if self.parent[0].is_some() {
            return Err("root has a parent".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != NodeId(i) || node.parameter != Some(i as u32 + 1) {
                return Err(format!("node {i} has inconsistent numbering"));
            }
            if !node.node_type.is_tree_type() {
                return Err(format!("{} is not a tree type", node.label()));
            }
            let attr_ok = match node.node_type {
                NodeType::Policy => matches!(node.attr, Some(NodeAttr::RuleCombAlg(_))),
                NodeType::Rule => matches!(node.attr, Some(NodeAttr::EffectRule(_))),
                _ => node.attr.is_none(),
            };
            if !attr_ok {
                return Err(format!("{} carries the wrong attribute", node.label()));
            }
            if i > 0 {
                let Some(p) = self.parent[i] else {
                    return Err(format!("{} has no parent", node.label()));
                };
                if p.0 >= i {
                    return Err(format!("{} precedes its parent", node.label()));
                }
            }
        }
        Ok(())
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub(crate) fn dot_node(out: &mut String, node: &XacNode) {
    let _ = writeln!(
        out,
        "  n{} [label=\"{}\"];",
        node.id.0,
        dot_escape(&node.display_label())
    );
}

/// Graphviz rendering; labels are `Type_Parameter [attribute]`.
pub fn export_tree_dot(tree: &XacTree) -> String {
    let mut out = String::from("digraph xac_tree {\n  node [shape=box];\n");
    for node in tree.nodes() {
        dot_node(&mut out, node);
    }
    for (p, c) in tree.edges() {
        let _ = writeln!(out, "  n{} -> n{};", p.0, c.0);
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Algorithm, Effect, Rule};

    #[test]
    fn single_rule_shape() {
        let policy = Policy::new(
            "p",
            Algorithm::FirstApplicable,
            TargetSpec::any(),
            vec![Rule::new("r", Effect::Permit)],
        )
        .unwrap();
        let tree = build_tree(&policy);
        let labels: Vec<String> = tree.nodes().iter().map(XacNode::label).collect();
        assert_eq!(labels, ["Policy_1", "Target_2", "Rule_3", "Target_4"]);
        assert!(tree.validate().is_ok());
        assert_eq!(tree.right_sibling(NodeId(1)), Some(NodeId(2)));
        assert_eq!(tree.left_sibling(NodeId(1)), None);
        assert_eq!(tree.rightmost_leaf(NodeId(0)), NodeId(3));
    }
}
