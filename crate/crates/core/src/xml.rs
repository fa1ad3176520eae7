//! XACML 2.0 policy, request and response documents.
//!
//! Elements are matched by local name, so both the policy and context
//! namespaces (or none) are accepted. Anything outside the supported subset
//! is rejected with the construct's name and its line/column, never
//! skipped: a silently dropped element would change the expected decision.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use roxmltree::{Document, Node};
use serde::Serialize;
use thiserror::Error;

use crate::function::Function;
use crate::model::{
    Algorithm, AttributeDesignator, BagEntry, Category, Condition, Conjunct, Decision, Effect,
    Expr, MatchPredicate, ModelError, Policy, Request, Rule, TargetSpec,
};
use crate::value::{AttributeValue, DataType};

pub const POLICY_NS: &str = "urn:oasis:names:tc:xacml:2.0:policy:schema:os";
pub const CONTEXT_NS: &str = "urn:oasis:names:tc:xacml:2.0:context:schema:os";
pub const STATUS_OK: &str = "urn:oasis:names:tc:xacml:1.0:status:ok";
pub const ACCESS_SUBJECT: &str = "urn:oasis:names:tc:xacml:1.0:subject-category:access-subject";
const XSI_NS: &str = "http://www.w3.org/2001/XMLSchema-instance";

/// String off-domain value used to build non-matching requests.
pub const OFF_DOMAIN_STRING: &str = "___XACMET_NOMATCH___";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum XacmlError {
    #[error("malformed XML: {message} at {location}")]
    MalformedXml { message: String, location: String },
    #[error("unsupported element <{element}> at {location}")]
    UnsupportedElement { element: String, location: String },
    #[error("unsupported attribute {attribute}={value:?} on <{element}> at {location}")]
    UnsupportedAttribute {
        element: String,
        attribute: String,
        value: String,
        location: String,
    },
    #[error("unsupported rule combining algorithm {urn:?} at {location}")]
    UnsupportedAlgorithm { urn: String, location: String },
    #[error("unsupported function {urn:?} at {location}")]
    UnsupportedFunction { urn: String, location: String },
    #[error("unsupported datatype {urn:?} at {location}")]
    UnsupportedDatatype { urn: String, location: String },
    #[error("unsupported decision {value:?}")]
    UnsupportedDecision { value: String },
    #[error("invalid value at {location}: {message}")]
    InvalidValue { message: String, location: String },
    #[error("invalid policy at {location}: {source}")]
    InvalidPolicy {
        #[source]
        source: ModelError,
        location: String,
    },
}

/// Parsed `<Response>` document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResponseDoc {
    pub decision: Decision,
    pub status: String,
}

fn location(node: Node) -> String {
    let pos = node.document().text_pos_at(node.range().start);
    format!("line {}, column {}", pos.row, pos.col)
}

fn malformed(node: Node, message: impl Into<String>) -> XacmlError {
    XacmlError::MalformedXml {
        message: message.into(),
        location: location(node),
    }
}

fn unsupported(node: Node) -> XacmlError {
    XacmlError::UnsupportedElement {
        element: node.tag_name().name().to_string(),
        location: location(node),
    }
}

fn parse_document(text: &str) -> Result<Document<'_>, XacmlError> {
    Document::parse(text).map_err(|e| XacmlError::MalformedXml {
        message: e.to_string(),
        location: format!("line {}, column {}", e.pos().row, e.pos().col),
    })
}

/// Child elements; stray non-whitespace text is an error.
fn elements<'a, 'i>(node: Node<'a, 'i>) -> Result<Vec<Node<'a, 'i>>, XacmlError> {
    let mut out = Vec::new();
    for child in node.children() {
        if child.is_element() {
            out.push(child);
        } else if child.is_text() && !child.text().unwrap_or("").trim().is_empty() {
            return Err(malformed(
                node,
                format!("unexpected text inside <{}>", node.tag_name().name()),
            ));
        }
    }
    Ok(out)
}

fn name<'a>(node: Node<'a, '_>) -> &'a str {
    node.tag_name().name()
}

/// Rejects attributes outside `allowed` (schema-instance attributes pass).
fn check_attributes(node: Node, allowed: &[&str]) -> Result<(), XacmlError> {
    for attr in node.attributes() {
        if attr.namespace() == Some(XSI_NS) {
            continue;
        }
        if !allowed.contains(&attr.name()) {
            return Err(XacmlError::UnsupportedAttribute {
                element: name(node).to_string(),
                attribute: attr.name().to_string(),
                value: attr.value().to_string(),
                location: location(node),
            });
        }
    }
    Ok(())
}

fn required<'a>(node: Node<'a, '_>, attr: &str) -> Result<&'a str, XacmlError> {
    node.attribute(attr)
        .ok_or_else(|| malformed(node, format!("<{}> lacks required attribute {attr}", name(node))))
}

fn datatype_of(node: Node) -> Result<DataType, XacmlError> {
    let urn = required(node, "DataType")?;
    DataType::from_uri(urn).ok_or_else(|| XacmlError::UnsupportedDatatype {
        urn: urn.to_string(),
        location: location(node),
    })
}

fn attribute_value(node: Node) -> Result<AttributeValue, XacmlError> {
    check_attributes(node, &["DataType"])?;
    let datatype = datatype_of(node)?;
    if node.children().any(|c| c.is_element()) {
        return Err(unsupported(
            node.children().find(|c| c.is_element()).unwrap(),
        ));
    }
    let text: String = node
        .children()
        .filter(|c| c.is_text())
        .filter_map(|c| c.text())
        .collect();
    AttributeValue::new(datatype, &text).map_err(|e| XacmlError::InvalidValue {
        message: e.to_string(),
        location: location(node),
    })
}

fn model_error(node: Node, source: ModelError) -> XacmlError {
    XacmlError::InvalidPolicy {
        source,
        location: location(node),
    }
}

fn designator_category(element: &str) -> Option<Category> {
    match element {
        "SubjectAttributeDesignator" => Some(Category::Subject),
        "ResourceAttributeDesignator" => Some(Category::Resource),
        "ActionAttributeDesignator" => Some(Category::Action),
        "EnvironmentAttributeDesignator" => Some(Category::Environment),
        _ => None,
    }
}

fn designator(node: Node, category: Category) -> Result<AttributeDesignator, XacmlError> {
    let mut allowed = vec!["AttributeId", "DataType", "Issuer", "MustBePresent"];
    if category == Category::Subject {
        allowed.push("SubjectCategory");
        if let Some(sc) = node.attribute("SubjectCategory") {
            if sc.trim() != ACCESS_SUBJECT {
                return Err(XacmlError::UnsupportedAttribute {
                    element: name(node).to_string(),
                    attribute: "SubjectCategory".into(),
                    value: sc.to_string(),
                    location: location(node),
                });
            }
        }
    }
    check_attributes(node, &allowed)?;
    if let Some(child) = elements(node)?.first() {
        return Err(unsupported(*child));
    }
    let mut d = AttributeDesignator::new(
        category,
        required(node, "AttributeId")?.trim(),
        datatype_of(node)?,
    );
    d.issuer = node.attribute("Issuer").map(|s| s.to_string());
    Ok(d)
}

fn function_of(node: Node, attr: &str) -> Result<Function, XacmlError> {
    let urn = required(node, attr)?;
    Function::from_uri(urn).ok_or_else(|| XacmlError::UnsupportedFunction {
        urn: urn.to_string(),
        location: location(node),
    })
}

fn parse_match(node: Node, category: Category) -> Result<MatchPredicate, XacmlError> {
    check_attributes(node, &["MatchId"])?;
    let function = function_of(node, "MatchId")?;
    if !function.is_match_function() {
        return Err(XacmlError::UnsupportedFunction {
            urn: function.uri(),
            location: location(node),
        });
    }
    let children = elements(node)?;
    let [value, selector] = children.as_slice() else {
        return Err(malformed(
            node,
            format!("<{}> needs an AttributeValue and a designator", name(node)),
        ));
    };
    if name(*value) != "AttributeValue" {
        return Err(unsupported(*value));
    }
    if designator_category(name(*selector)) != Some(category) {
        return Err(unsupported(*selector));
    }
    let literal = attribute_value(*value)?;
    let designator = designator(*selector, category)?;
    MatchPredicate::new(function, literal, designator).map_err(|e| model_error(node, e))
}

fn parse_target(node: Node) -> Result<TargetSpec, XacmlError> {
    check_attributes(node, &[])?;
    let mut target = TargetSpec::any();
    let mut last: Option<Category> = None;
    for group in elements(node)? {
        let category = Category::ALL
            .into_iter()
            .find(|c| c.plural() == name(group))
            .ok_or_else(|| unsupported(group))?;
        if last.is_some_and(|l| l >= category) {
            return Err(malformed(
                group,
                format!("<{}> is duplicated or out of order", name(group)),
            ));
        }
        last = Some(category);
        check_attributes(group, &[])?;
        let mut alternatives = Vec::new();
        for alt in elements(group)? {
            if name(alt) != category.name() {
                return Err(unsupported(alt));
            }
            check_attributes(alt, &[])?;
            let match_name = format!("{}Match", category.name());
            let mut predicates = Vec::new();
            for m in elements(alt)? {
                if name(m) != match_name {
                    return Err(unsupported(m));
                }
                predicates.push(parse_match(m, category)?);
            }
            alternatives.push(Conjunct::new(category, predicates).map_err(|e| model_error(alt, e))?);
        }
        if alternatives.is_empty() {
            return Err(malformed(
                group,
                format!("<{}> must contain at least one <{}>", name(group), category.name()),
            ));
        }
        target = target.with_category(category, alternatives);
    }
    Ok(target)
}

fn parse_expr(node: Node) -> Result<Expr, XacmlError> {
    let element = name(node);
    if let Some(category) = designator_category(element) {
        return Ok(Expr::Designator(designator(node, category)?));
    }
    match element {
        "AttributeValue" => Ok(Expr::Literal(attribute_value(node)?)),
        "Apply" => {
            check_attributes(node, &["FunctionId"])?;
            let function = function_of(node, "FunctionId")?;
            let args = elements(node)?
                .into_iter()
                .map(parse_expr)
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Expr::Apply(function, args))
        }
        _ => Err(unsupported(node)),
    }
}

fn parse_condition(node: Node) -> Result<Condition, XacmlError> {
    check_attributes(node, &[])?;
    let children = elements(node)?;
    let [expr] = children.as_slice() else {
        return Err(malformed(node, "<Condition> must hold exactly one expression"));
    };
    Condition::new(parse_expr(*expr)?).map_err(|e| model_error(node, e))
}

fn parse_rule(node: Node) -> Result<Rule, XacmlError> {
    check_attributes(node, &["RuleId", "Effect"])?;
    let id = required(node, "RuleId")?.trim().to_string();
    let effect = match required(node, "Effect")?.trim() {
        "Permit" => Effect::Permit,
        "Deny" => Effect::Deny,
        other => {
            return Err(XacmlError::InvalidValue {
                message: format!("rule effect must be Permit or Deny, got {other:?}"),
                location: location(node),
            })
        }
    };
    let mut rule = Rule::new(id, effect);
    let mut stage = 0;
    for child in elements(node)? {
        let next = match name(child) {
            "Description" => 1,
            "Target" => 2,
            "Condition" => 3,
            _ => return Err(unsupported(child)),
        };
        if next <= stage {
            return Err(malformed(child, format!("<{}> is duplicated or out of order", name(child))));
        }
        stage = next;
        match next {
            2 => rule.target = parse_target(child)?,
            3 => rule.condition = Some(parse_condition(child)?),
            _ => {}
        }
    }
    Ok(rule)
}

/// Parses a `<Policy>` document.
pub fn parse_policy(text: &str) -> Result<Policy, XacmlError> {
    let doc = parse_document(text)?;
    let root = doc.root_element();
    if name(root) != "Policy" {
        return Err(unsupported(root));
    }
    check_attributes(root, &["PolicyId", "RuleCombiningAlgId", "Version"])?;
    let id = required(root, "PolicyId")?.trim().to_string();
    let urn = required(root, "RuleCombiningAlgId")?;
    let algorithm = Algorithm::from_urn(urn).ok_or_else(|| XacmlError::UnsupportedAlgorithm {
        urn: urn.to_string(),
        location: location(root),
    })?;
    let mut target = None;
    let mut rules = Vec::new();
    for child in elements(root)? {
        match name(child) {
            "Description" if target.is_none() && rules.is_empty() => {}
            "Target" if target.is_none() && rules.is_empty() => target = Some(parse_target(child)?),
            "Rule" => rules.push(parse_rule(child)?),
            "Description" | "Target" => {
                return Err(malformed(child, format!("<{}> is duplicated or out of order", name(child))))
            }
            _ => return Err(unsupported(child)),
        }
    }
    Policy::new(id, algorithm, target.unwrap_or_default(), rules).map_err(|e| model_error(root, e))
}

/// Parses a `<Request>` context document.
pub fn parse_request(text: &str) -> Result<Request, XacmlError> {
    let doc = parse_document(text)?;
    let root = doc.root_element();
    if name(root) != "Request" {
        return Err(unsupported(root));
    }
    check_attributes(root, &["ReturnPolicyIdList", "CombinedDecision"])?;
    let mut request = Request::new();
    for section in elements(root)? {
        let category = Category::ALL
            .into_iter()
            .find(|c| c.name() == name(section))
            .ok_or_else(|| unsupported(section))?;
        if category == Category::Subject {
            check_attributes(section, &["SubjectCategory"])?;
            if let Some(sc) = section.attribute("SubjectCategory") {
                if sc.trim() != ACCESS_SUBJECT {
                    return Err(XacmlError::UnsupportedAttribute {
                        element: "Subject".into(),
                        attribute: "SubjectCategory".into(),
                        value: sc.to_string(),
                        location: location(section),
                    });
                }
            }
        } else {
            check_attributes(section, &[])?;
        }
        for attr in elements(section)? {
            if name(attr) != "Attribute" {
                return Err(unsupported(attr));
            }
            check_attributes(attr, &["AttributeId", "DataType", "Issuer", "IssueInstant"])?;
            let attribute_id = required(attr, "AttributeId")?.trim().to_string();
            let datatype = datatype_of(attr)?;
            let issuer = attr.attribute("Issuer").map(|s| s.to_string());
            let values = elements(attr)?;
            if values.is_empty() {
                return Err(malformed(attr, "<Attribute> needs at least one <AttributeValue>"));
            }
            for value in values {
                if name(value) != "AttributeValue" {
                    return Err(unsupported(value));
                }
                check_attributes(value, &["DataType"])?;
                if value.children().any(|c| c.is_element()) {
                    return Err(unsupported(value.children().find(|c| c.is_element()).unwrap()));
                }
                let text: String = value.children().filter_map(|c| c.text()).collect();
                let value = AttributeValue::new(datatype, &text).map_err(|e| {
                    XacmlError::InvalidValue {
                        message: e.to_string(),
                        location: location(value),
                    }
                })?;
                request.bag_mut(category).push_entry(BagEntry {
                    attribute_id: attribute_id.clone(),
                    issuer: issuer.clone(),
                    value,
                });
            }
        }
    }
    Ok(request)
}

/// Parses a `<Response>` and returns its first result's decision.
/// Obligations and resource ids in the response are tolerated.
pub fn parse_response(text: &str) -> Result<ResponseDoc, XacmlError> {
    let doc = parse_document(text)?;
    let root = doc.root_element();
    if name(root) != "Response" {
        return Err(unsupported(root));
    }
    let result = root
        .children()
        .find(|c| c.is_element() && name(*c) == "Result")
        .ok_or_else(|| malformed(root, "<Response> has no <Result>"))?;
    let decision_node = result
        .children()
        .find(|c| c.is_element() && name(*c) == "Decision")
        .ok_or_else(|| malformed(result, "<Result> has no <Decision>"))?;
    let value = decision_node.text().unwrap_or("").trim().to_string();
    let decision =
        Decision::from_name(&value).ok_or(XacmlError::UnsupportedDecision { value })?;
    let status = result
        .descendants()
        .find(|c| c.is_element() && name(*c) == "StatusCode")
        .and_then(|c| c.attribute("Value"))
        .map(|v| v.rsplit(':').next().unwrap_or(v).to_string())
        .unwrap_or_else(|| "ok".to_string());
    Ok(ResponseDoc { decision, status })
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn write_response(decision: Decision) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <Response xmlns=\"{CONTEXT_NS}\">\n  \
         <Result>\n    \
         <Decision>{decision}</Decision>\n    \
         <Status>\n      \
         <StatusCode Value=\"{STATUS_OK}\"/>\n    \
         </Status>\n  \
         </Result>\n\
         </Response>\n"
    )
}

fn write_designator(out: &mut String, indent: usize, d: &AttributeDesignator) {
    let pad = " ".repeat(indent);
    let issuer = d
        .issuer
        .as_ref()
        .map(|i| format!(" Issuer=\"{}\"", escape(i)))
        .unwrap_or_default();
    let _ = writeln!(
        out,
        "{pad}<{}AttributeDesignator AttributeId=\"{}\" DataType=\"{}\"{issuer}/>",
        d.category.name(),
        escape(&d.attribute_id),
        d.datatype.uri()
    );
}

fn write_value(out: &mut String, indent: usize, v: &AttributeValue) {
    let _ = writeln!(
        out,
        "{}<AttributeValue DataType=\"{}\">{}</AttributeValue>",
        " ".repeat(indent),
        v.datatype().uri(),
        escape(v.literal())
    );
}

fn write_target(out: &mut String, indent: usize, target: &TargetSpec) {
    let pad = " ".repeat(indent);
    if target.is_any() {
        let _ = writeln!(out, "{pad}<Target/>");
        return;
    }
    let _ = writeln!(out, "{pad}<Target>");
    for category in target.constrained_categories() {
        let _ = writeln!(out, "{pad}  <{}>", category.plural());
        for conjunct in target.alternatives(category) {
            let _ = writeln!(out, "{pad}    <{}>", category.name());
            for p in conjunct.predicates() {
                let _ = writeln!(
                    out,
                    "{pad}      <{}Match MatchId=\"{}\">",
                    category.name(),
                    p.function().uri()
                );
                write_value(out, indent + 8, p.literal());
                write_designator(out, indent + 8, p.designator());
                let _ = writeln!(out, "{pad}      </{}Match>", category.name());
            }
            let _ = writeln!(out, "{pad}    </{}>", category.name());
        }
        let _ = writeln!(out, "{pad}  </{}>", category.plural());
    }
    let _ = writeln!(out, "{pad}</Target>");
}

fn write_expr(out: &mut String, indent: usize, expr: &Expr) {
    match expr {
        Expr::Literal(v) => write_value(out, indent, v),
        Expr::Designator(d) => write_designator(out, indent, d),
        Expr::Apply(function, args) => {
            let pad = " ".repeat(indent);
            if args.is_empty() {
                let _ = writeln!(out, "{pad}<Apply FunctionId=\"{}\"/>", function.uri());
                return;
            }
            let _ = writeln!(out, "{pad}<Apply FunctionId=\"{}\">", function.uri());
            for arg in args {
                write_expr(out, indent + 2, arg);
            }
            let _ = writeln!(out, "{pad}</Apply>");
        }
    }
}

/// Serializes a policy in the normalized form `parse_policy` reads back.
pub fn write_policy(policy: &Policy) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<Policy xmlns=\"{POLICY_NS}\" PolicyId=\"{}\" RuleCombiningAlgId=\"{}\">",
        escape(policy.id()),
        policy.algorithm().urn()
    );
    write_target(&mut out, 2, policy.target());
    for rule in policy.rules() {
        let _ = writeln!(
            out,
            "  <Rule RuleId=\"{}\" Effect=\"{}\">",
            escape(&rule.id),
            rule.effect
        );
        write_target(&mut out, 4, &rule.target);
        if let Some(cond) = &rule.condition {
            out.push_str("    <Condition>\n");
            write_expr(&mut out, 6, cond.expr());
            out.push_str("    </Condition>\n");
        }
        out.push_str("  </Rule>\n");
    }
    out.push_str("</Policy>\n");
    out
}

/// Attribute id, datatype and issuer: one `<Attribute>` element per key.
type GroupKey<'a> = (&'a str, DataType, Option<&'a str>);

/// Serializes a request context; attributes with the same id, datatype and
/// issuer are grouped into one multi-valued `<Attribute>`.
pub fn write_request(request: &Request) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(out, "<Request xmlns=\"{CONTEXT_NS}\">");
    for category in Category::ALL {
        let bag = request.bag(category);
        // Environment is the only optional section of the 2.0 context schema.
        if bag.is_empty() && category == Category::Environment {
            continue;
        }
        let mut groups: Vec<(GroupKey, Vec<&AttributeValue>)> = Vec::new();
        for entry in bag.entries() {
            let key = (
                entry.attribute_id.as_str(),
                entry.value.datatype(),
                entry.issuer.as_deref(),
            );
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, values)) => values.push(&entry.value),
                None => groups.push((key, vec![&entry.value])),
            }
        }
        if groups.is_empty() {
            let _ = writeln!(out, "  <{}/>", category.name());
            continue;
        }
        let _ = writeln!(out, "  <{}>", category.name());
        for ((id, datatype, issuer), values) in groups {
            let issuer = issuer
                .map(|i| format!(" Issuer=\"{}\"", escape(i)))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "    <Attribute AttributeId=\"{}\" DataType=\"{}\"{issuer}>",
                escape(id),
                datatype.uri()
            );
            for v in values {
                let _ = writeln!(out, "      <AttributeValue>{}</AttributeValue>", escape(v.literal()));
            }
            out.push_str("    </Attribute>\n");
        }
        let _ = writeln!(out, "  </{}>", category.name());
    }
    out.push_str("</Request>\n");
    out
}

/// Key of a mined attribute domain.
pub type AttributeKey = (Category, String);

/// Literal values of a policy, grouped by the attribute they are compared
/// against, each set extended with one off-domain value per datatype.
///
/// Condition literals go to every designator of the same datatype in the
/// same condition, and designators compared within one condition share
/// their domains so that attribute-to-attribute comparisons can succeed.
pub fn mine_attribute_values(policy: &Policy) -> BTreeMap<AttributeKey, BTreeSet<AttributeValue>> {
    let mut domains: BTreeMap<AttributeKey, BTreeSet<AttributeValue>> = BTreeMap::new();
    let mut key_types: BTreeMap<AttributeKey, BTreeSet<DataType>> = BTreeMap::new();
    let mut policy_literals: BTreeSet<AttributeValue> = BTreeSet::new();

    let key = |d: &AttributeDesignator| (d.category, d.attribute_id.clone());
    let targets = std::iter::once(policy.target()).chain(policy.rules().iter().map(|r| &r.target));
    for target in targets {
        for p in target.predicates() {
            domains.entry(key(p.designator())).or_default().insert(p.literal().clone());
            key_types.entry(key(p.designator())).or_default().insert(p.designator().datatype);
            policy_literals.insert(p.literal().clone());
        }
    }

    let mut shared: Vec<(Vec<AttributeKey>, BTreeSet<AttributeValue>)> = Vec::new();
    for rule in policy.rules() {
        let Some(cond) = &rule.condition else { continue };
        let mut designators: BTreeMap<DataType, BTreeSet<AttributeKey>> = BTreeMap::new();
        let mut literals: BTreeMap<DataType, BTreeSet<AttributeValue>> = BTreeMap::new();
        cond.expr().walk(&mut |e| match e {
            Expr::Designator(d) => {
                designators.entry(d.datatype).or_default().insert(key(d));
            }
            Expr::Literal(v) => {
                literals.entry(v.datatype()).or_default().insert(v.clone());
            }
            Expr::Apply(..) => {}
        });
        for (dt, keys) in designators {
            let lits = literals.remove(&dt).unwrap_or_default();
            policy_literals.extend(lits.iter().cloned());
            for k in &keys {
                key_types.entry(k.clone()).or_default().insert(dt);
                domains.entry(k.clone()).or_default();
            }
            shared.push((keys.into_iter().collect(), lits));
        }
        for lits in literals.into_values() {
            policy_literals.extend(lits);
        }
    }
    for (keys, lits) in shared {
        let mut pool = lits;
        for k in &keys {
            pool.extend(domains[k].iter().cloned());
        }
        for k in keys {
            domains.get_mut(&k).unwrap().extend(pool.iter().cloned());
        }
    }

    for (k, types) in key_types {
        let set = domains.get_mut(&k).unwrap();
        for dt in types {
            if let Some(v) = off_domain_value(dt, &policy_literals) {
                set.insert(v);
            }
        }
    }
    domains
}

/// A value of `datatype` that is not among `used`, when one exists.
pub fn off_domain_value(datatype: DataType, used: &BTreeSet<AttributeValue>) -> Option<AttributeValue> {
    let of_type = || used.iter().filter(move |v| v.datatype() == datatype);
    let candidate = match datatype {
        DataType::String => AttributeValue::string(OFF_DOMAIN_STRING),
        DataType::AnyUri => AttributeValue::new(DataType::AnyUri, "urn:xacmet:nomatch").ok()?,
        DataType::Integer => {
            let max = of_type().filter_map(AttributeValue::as_integer).max();
            AttributeValue::integer(max.map_or(0, |m| m.saturating_add(1)))
        }
        DataType::Double => {
            let max = of_type()
                .filter_map(AttributeValue::as_double)
                .filter(|v| v.is_finite())
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
            AttributeValue::double(max.map_or(0.0, |m| m + 1.0))
        }
        DataType::Boolean => {
            return [false, true]
                .into_iter()
                .map(AttributeValue::boolean)
                .find(|v| !used.contains(v))
        }
        DataType::Date => {
            let max = of_type()
                .filter_map(|v| chrono::NaiveDate::parse_from_str(&v.literal()[..10], "%Y-%m-%d").ok())
                .max();
            let next = max
                .and_then(|d| d.succ_opt())
                .unwrap_or_else(|| chrono::NaiveDate::from_ymd_opt(1970, 1, 1).unwrap());
            AttributeValue::new(DataType::Date, &next.format("%Y-%m-%d").to_string()).ok()?
        }
        DataType::Time => {
            // Probe whole seconds from midnight until one is unused.
            return (0..86_400)
                .map(|s| format!("{:02}:{:02}:{:02}", s / 3600, (s / 60) % 60, s % 60))
                .filter_map(|t| AttributeValue::new(DataType::Time, &t).ok())
                .find(|v| !used.contains(v));
        }
    };
    (!used.contains(&candidate)).then_some(candidate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy_with(body: &str) -> String {
        format!(
            "<Policy xmlns=\"{POLICY_NS}\" PolicyId=\"p\" \
             RuleCombiningAlgId=\"urn:oasis:names:tc:xacml:1.0:rule-combining-algorithm:first-applicable\">\
             <Target/>{body}</Policy>"
        )
    }

    #[test]
    fn single_rule_with_empty_target() {
        let p = parse_policy(&policy_with(r#"<Rule RuleId="r" Effect="Permit"><Target/></Rule>"#)).unwrap();
        assert_eq!(p.algorithm(), Algorithm::FirstApplicable);
        assert!(p.target().is_any());
        assert!(p.rules()[0].target.is_any());
        assert!(p.rules()[0].condition.is_none());
    }

    #[test]
    fn policy_set_is_rejected_by_name() {
        let err = parse_policy(
            r#"<PolicySet PolicySetId="s" PolicyCombiningAlgId="x"><Target/></PolicySet>"#,
        )
        .unwrap_err();
        assert!(
            matches!(&err, XacmlError::UnsupportedElement { element, .. } if element == "PolicySet"),
            "{err}"
        );
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn obligations_and_unknown_attributes_are_rejected() {
        let err = parse_policy(&policy_with(
            r#"<Rule RuleId="r" Effect="Permit"/><Obligations/>"#,
        ))
        .unwrap_err();
        assert!(matches!(err, XacmlError::UnsupportedElement { ref element, .. } if element == "Obligations"));
        let err = parse_policy(&policy_with(r#"<Rule RuleId="r" Effect="Permit" Priority="1"/>"#)).unwrap_err();
        assert!(matches!(err, XacmlError::UnsupportedAttribute { ref attribute, .. } if attribute == "Priority"));
    }

    #[test]
    fn unsupported_algorithm_and_function() {
        let text = r#"<Policy PolicyId="p" RuleCombiningAlgId="urn:oasis:names:tc:xacml:1.1:rule-combining-algorithm:ordered-permit-overrides"><Target/><Rule RuleId="r" Effect="Deny"/></Policy>"#;
        assert!(matches!(parse_policy(text), Err(XacmlError::UnsupportedAlgorithm { .. })));
        let err = parse_policy(&policy_with(
            r#"<Rule RuleId="r" Effect="Deny"><Condition><Apply FunctionId="urn:oasis:names:tc:xacml:1.0:function:string-regexp-match"/></Condition></Rule>"#,
        ))
        .unwrap_err();
        assert!(matches!(err, XacmlError::UnsupportedFunction { ref urn, .. } if urn.ends_with("string-regexp-match")));
    }

    #[test]
    fn malformed_xml_reports_position() {
        let err = parse_policy("<Policy><Target></Policy>").unwrap_err();
        assert!(matches!(err, XacmlError::MalformedXml { .. }));
    }

    #[test]
    fn request_without_attributes() {
        let req = parse_request(&format!(
            "<Request xmlns=\"{CONTEXT_NS}\"><Subject/><Resource/><Action/><Environment/></Request>"
        ))
        .unwrap();
        assert!(req.is_empty());
    }

    #[test]
    fn repeated_attributes_accumulate() {
        let req = parse_request(&format!(
            r#"<Request xmlns="{CONTEXT_NS}">
              <Subject>
                <Attribute AttributeId="sid" DataType="http://www.w3.org/2001/XMLSchema#string"><AttributeValue>Julius</AttributeValue></Attribute>
                <Attribute AttributeId="sid" DataType="http://www.w3.org/2001/XMLSchema#string"><AttributeValue>documententry</AttributeValue></Attribute>
              </Subject>
              <Resource/><Action/>
            </Request>"#
        ))
        .unwrap();
        assert_eq!(req.bag(Category::Subject).len(), 2);
    }

    #[test]
    fn request_with_unknown_datatype() {
        let err = parse_request(
            r#"<Request><Subject><Attribute AttributeId="a" DataType="http://www.w3.org/2001/XMLSchema#hexBinary"><AttributeValue>00</AttributeValue></Attribute></Subject></Request>"#,
        )
        .unwrap_err();
        assert!(matches!(err, XacmlError::UnsupportedDatatype { .. }));
    }

    #[test]
    fn responses_round_trip() {
        for d in [Decision::Permit, Decision::Deny, Decision::NotApplicable] {
            let text = write_response(d);
            assert!(text.contains(&format!("<Decision>{d}</Decision>")));
            let doc = parse_response(&text).unwrap();
            assert_eq!(doc.decision, d);
            assert_eq!(doc.status, "ok");
        }
        let indeterminate = write_response(Decision::Deny).replace(">Deny<", ">Indeterminate<");
        assert!(matches!(
            parse_response(&indeterminate),
            Err(XacmlError::UnsupportedDecision { .. })
        ));
    }

    #[test]
    fn request_writer_round_trips() {
        let req = Request::new()
            .with(Category::Subject, "sid", AttributeValue::string("a & b"))
            .with(Category::Subject, "sid", AttributeValue::string("c"))
            .with(Category::Environment, "n", AttributeValue::integer(3));
        assert_eq!(parse_request(&write_request(&req)).unwrap(), req);
    }

    #[test]
    fn off_domain_values_avoid_policy_literals() {
        let used: BTreeSet<_> = [AttributeValue::integer(4), AttributeValue::integer(9)].into();
        assert_eq!(off_domain_value(DataType::Integer, &used), Some(AttributeValue::integer(10)));
        let both: BTreeSet<_> = [AttributeValue::boolean(true), AttributeValue::boolean(false)].into();
        assert_eq!(off_domain_value(DataType::Boolean, &both), None);
        let t: BTreeSet<_> = [AttributeValue::new(DataType::Time, "00:00:00").unwrap()].into();
        assert_eq!(off_domain_value(DataType::Time, &t).unwrap().literal(), "00:00:01");
    }
}
