//! The test oracle: a request's verdict is the verdict of the first
//! ordered path whose profile agrees with the request's observed outcomes.

use rayon::prelude::*;
use serde::Serialize;

use crate::model::{eval_condition, Decision, Policy, Request};
use crate::paths::{FailurePoint, Granularity, OutcomeProfile, PathSet, RuleOutcome, TargetOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleResult {
    pub verdict: Decision,
    pub covered_path_rank: usize,
    /// Every rule evaluated, even those the covered path skips.
    pub rule_outcomes: OutcomeProfile,
}

/// Outcomes of the policy target and of every rule for `request`, with
/// failure points recorded at element granularity.
pub fn observe(policy: &Policy, request: &Request, granularity: Granularity) -> OutcomeProfile {
    let element = granularity == Granularity::Element;
    let policy_target = match policy.target().first_failure(request) {
        None => TargetOutcome::Satisfied,
        Some(c) => TargetOutcome::Unsatisfied(element.then_some(c)),
    };
    let rules = policy
        .rules()
        .iter()
        .map(|rule| {
            let failure = match rule.target.first_failure(request) {
                Some(c) => Some(FailurePoint::Category(c)),
                None if !eval_condition(rule.condition.as_ref(), request) => Some(FailurePoint::Condition),
                None => None,
            };
            match failure {
                None => RuleOutcome::Satisfied,
                Some(point) => RuleOutcome::Unsatisfied(element.then_some(point)),
            }
        })
        .collect();
    OutcomeProfile { policy_target, rules }
}

/// Verdict and covered path for one request.
///
/// Panics if no path is consistent with the observed outcomes, which the
/// partition property of [`PathSet`] rules out.
pub fn evaluate(paths: &PathSet, request: &Request) -> OracleResult {
    let observed = observe(paths.policy(), request, paths.granularity());
    let path = paths
        .paths()
        .iter()
        .find(|p| p.profile.is_consistent_with(&observed))
        .unwrap_or_else(|| panic!("no evaluation path is consistent with {observed}"));
    OracleResult {
        verdict: path.verdict,
        covered_path_rank: path.rank,
        rule_outcomes: observed,
    }
}

/// Element-wise [`evaluate`], in input order.
pub fn batch_evaluate(paths: &PathSet, requests: &[Request]) -> Vec<OracleResult> {
    requests.par_iter().map(|r| evaluate(paths, r)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathHits {
    pub rank: usize,
    pub hits: usize,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    pub requests: usize,
    pub total_paths: usize,
    pub covered_paths: usize,
    pub feasible_paths: usize,
    /// One entry per path, by rank.
    pub hits: Vec<PathHits>,
    pub uncovered_ranks: Vec<usize>,
}

impl CoverageReport {
    /// Ranks of feasible paths nobody covered.
    pub fn uncovered_feasible(&self) -> Vec<usize> {
        self.hits
            .iter()
            .filter(|h| h.feasible && h.hits == 0)
            .map(|h| h.rank)
            .collect()
    }
}

pub fn coverage(paths: &PathSet, requests: &[Request]) -> CoverageReport {
    coverage_of(paths, &batch_evaluate(paths, requests))
}

/// Coverage from results already computed against `paths`.
pub fn coverage_of(paths: &PathSet, results: &[OracleResult]) -> CoverageReport {
    let mut hits: Vec<PathHits> = paths
        .paths()
        .iter()
        .map(|p| PathHits {
            rank: p.rank,
            hits: 0,
            feasible: p.feasible,
        })
        .collect();
    for r in results {
        hits[r.covered_path_rank - 1].hits += 1;
    }
    CoverageReport {
        requests: results.len(),
        total_paths: hits.len(),
        covered_paths: hits.iter().filter(|h| h.hits > 0).count(),
        feasible_paths: hits.iter().filter(|h| h.feasible).count(),
        uncovered_ranks: hits.iter().filter(|h| h.hits == 0).map(|h| h.rank).collect(),
        hits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Algorithm, Effect, Rule, TargetSpec};
    use crate::paths::DEFAULT_PATH_CAP;

    #[test]
    fn empty_inputs() {
        let policy = Policy::new(
            "p",
            Algorithm::FirstApplicable,
            TargetSpec::any(),
            vec![Rule::new("r", Effect::Deny)],
        )
        .unwrap();
        let set = PathSet::build(&policy, Granularity::Rule, DEFAULT_PATH_CAP).unwrap();
        assert!(batch_evaluate(&set, &[]).is_empty());
        let report = coverage(&set, &[]);
        assert_eq!((report.covered_paths, report.total_paths), (0, 3));
        let result = evaluate(&set, &Request::new());
        assert_eq!((result.verdict, result.covered_path_rank), (Decision::Deny, 1));
    }
}
