//! Direct-semantics evaluator. It uses nothing but the policy-model
//! primitives (no tree, graph or paths), so it can check the oracle.

use crate::model::{eval_rule, match_target, Algorithm, Decision, Policy, Request, RuleResult};

/// A decision engine that can be compared against the oracle.
pub trait Pdp: Sync {
    fn name(&self) -> &str;
    fn decide(&self, policy: &Policy, request: &Request) -> Decision;
}

/// The in-process reference engine.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferencePdp;

impl Pdp for ReferencePdp {
    fn name(&self) -> &str {
        "reference"
    }

    fn decide(&self, policy: &Policy, request: &Request) -> Decision {
        evaluate_direct(policy, request)
    }
}

/// NotApplicable when the policy target fails, otherwise the combined
/// result of every rule.
pub fn evaluate_direct(policy: &Policy, request: &Request) -> Decision {
    if !match_target(policy.target(), request) {
        return Decision::NotApplicable;
    }
    let outcomes: Vec<RuleResult> = policy.rules().iter().map(|r| eval_rule(r, request)).collect();
    combine(policy.algorithm(), &outcomes)
}

/// Combines rule results given in document order.
pub fn combine(algorithm: Algorithm, outcomes: &[RuleResult]) -> Decision {
    let any = |wanted: RuleResult| outcomes.contains(&wanted);
    match algorithm {
        Algorithm::FirstApplicable => outcomes
            .iter()
            .find_map(|o| match o {
                RuleResult::SatPermit => Some(Decision::Permit),
                RuleResult::SatDeny => Some(Decision::Deny),
                RuleResult::Unsat => None,
            })
            .unwrap_or(Decision::NotApplicable),
        Algorithm::DenyOverrides if any(RuleResult::SatDeny) => Decision::Deny,
        Algorithm::DenyOverrides if any(RuleResult::SatPermit) => Decision::Permit,
        Algorithm::PermitOverrides if any(RuleResult::SatPermit) => Decision::Permit,
        Algorithm::PermitOverrides if any(RuleResult::SatDeny) => Decision::Deny,
        _ => Decision::NotApplicable,
    }
}
