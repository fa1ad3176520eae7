//! Request enumeration and the oracle-versus-reference differential check.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{Category, Decision, Policy, Request};
use crate::oracle;
use crate::paths::{Granularity, PathError, PathSet, DEFAULT_PATH_CAP};
use crate::reference::{Pdp, ReferencePdp};
use crate::value::AttributeValue;
use crate::xml::mine_attribute_values;

/// Largest request set enumerated without an explicit limit.
pub const DEFAULT_ENUMERATION_BOUND: u128 = 200_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("request domain has {size} combinations, more than the bound of {bound}; pass a limit")]
    DomainTooLarge { size: u128, bound: u128 },
    #[error(transparent)]
    Path(#[from] PathError),
}

type Domains = BTreeMap<(Category, String), BTreeSet<AttributeValue>>;

/// Number of requests a full enumeration of `policy` would produce.
pub fn domain_size(policy: &Policy) -> u128 {
    size_of(&mine_attribute_values(policy))
}

fn size_of(domains: &Domains) -> u128 {
    domains
        .values()
        .fold(1u128, |acc, d| acc.saturating_mul(d.len() as u128 + 1))
}

/// Cross product over the mined domains, each attribute absent or holding
/// one value. The first request is the empty one and the last key varies
/// fastest. Truncated after `limit` requests; without a limit, domains
/// larger than [`DEFAULT_ENUMERATION_BOUND`] are refused.
pub fn enumerate_requests(policy: &Policy, limit: Option<usize>) -> Result<Vec<Request>, HarnessError> {
    enumerate_requests_bounded(policy, limit, DEFAULT_ENUMERATION_BOUND)
}

pub fn enumerate_requests_bounded(
    policy: &Policy,
    limit: Option<usize>,
    bound: u128,
) -> Result<Vec<Request>, HarnessError> {
    let domains = mine_attribute_values(policy);
    let size = size_of(&domains);
    if limit.is_none() && size > bound {
        return Err(HarnessError::DomainTooLarge { size, bound });
    }
    let count = limit.map_or(size, |l| size.min(l as u128)) as usize;
    let keys: Vec<(&(Category, String), Vec<&AttributeValue>)> =
        domains.iter().map(|(k, v)| (k, v.iter().collect())).collect();
    let mut digits = vec![0usize; keys.len()];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut request = Request::new();
        for ((key, values), d) in keys.iter().zip(&digits) {
            if *d > 0 {
                request = request.with(key.0, &key.1, values[d - 1].clone());
            }
        }
        out.push(request);
        for (pos, (_, values)) in keys.iter().enumerate().rev() {
            digits[pos] += 1;
            if digits[pos] <= values.len() {
                break;
            }
            digits[pos] = 0;
        }
    }
    Ok(out)
}

/// Seeded random requests over the mined domains; each attribute gets a
/// bag of zero to two distinct values.
pub fn sample_requests(policy: &Policy, count: usize, seed: u64) -> Vec<Request> {
    let domains = mine_attribute_values(policy);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut request = Request::new();
            for ((category, id), values) in &domains {
                let values: Vec<&AttributeValue> = values.iter().collect();
                let n = rng.gen_range(0..=2usize.min(values.len()));
                for v in values.choose_multiple(&mut rng, n) {
                    request = request.with(*category, id, (*v).clone());
                }
            }
            request
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Disagreement {
    /// Position in the input request list.
    pub index: usize,
    pub request: Request,
    pub oracle: Decision,
    pub reference: Decision,
    pub covered_path_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiffReport {
    pub policy_id: String,
    pub reference: String,
    pub requests: usize,
    pub agreements: usize,
    pub disagreements: Vec<Disagreement>,
}

impl DiffReport {
    pub fn all_agree(&self) -> bool {
        self.disagreements.is_empty()
    }
}

/// Oracle (rule granularity, default path cap) against [`ReferencePdp`].
pub fn differential_check(policy: &Policy, requests: &[Request]) -> Result<DiffReport, PathError> {
    let paths = PathSet::build(policy, Granularity::Rule, DEFAULT_PATH_CAP)?;
    Ok(differential_check_with(&paths, requests, &ReferencePdp))
}

pub fn differential_check_with(paths: &PathSet, requests: &[Request], pdp: &dyn Pdp) -> DiffReport {
    let policy = paths.policy();
    let disagreements: Vec<Disagreement> = requests
        .par_iter()
        .enumerate()
        .filter_map(|(index, request)| {
            let result = oracle::evaluate(paths, request);
            let reference = pdp.decide(policy, request);
            (result.verdict != reference).then(|| Disagreement {
                index,
                request: request.clone(),
                oracle: result.verdict,
                reference,
                covered_path_rank: result.covered_path_rank,
            })
        })
        .collect();
    DiffReport {
        policy_id: policy.id().to_string(),
        reference: pdp.name().to_string(),
        requests: requests.len(),
        agreements: requests.len() - disagreements.len(),
        disagreements,
    }
}
