//! Seeded generator of synthetic policies over the supported subset.
//!
//! Policy `i` uses combining algorithm `i % 3` and puts function
//! `whitelist[i % 23]` in the condition of its first rule, so any corpus of
//! 23 or more policies exercises every whitelisted function. Each policy
//! draws four or five attributes from a fixed vocabulary and two literals
//! per attribute, which keeps exhaustive request enumeration small.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::function::Function;
use crate::model::{
    Algorithm, AttributeDesignator, Category, Condition, Conjunct, Effect, Expr, MatchPredicate, Policy, Rule,
    TargetSpec,
};
use crate::value::{AttributeValue, DataType};

struct Attribute {
    category: Category,
    id: &'static str,
    datatype: DataType,
    candidates: &'static [&'static str],
}

const VOCABULARY: [Attribute; 9] = [
    Attribute {
        category: Category::Subject,
        id: "urn:oasis:names:tc:xacml:1.0:subject:subject-id",
        datatype: DataType::String,
        candidates: &["alice", "bob", "carol", "Julius"],
    },
    Attribute {
        category: Category::Subject,
        id: "urn:xacmet:subject:age",
        datatype: DataType::Integer,
        candidates: &["17", "30", "45", "70"],
    },
    Attribute {
        category: Category::Subject,
        id: "urn:xacmet:subject:is-admin",
        datatype: DataType::Boolean,
        candidates: &["true", "false"],
    },
    Attribute {
        category: Category::Resource,
        id: "urn:oasis:names:tc:xacml:1.0:resource:resource-id",
        datatype: DataType::String,
        candidates: &["book", "journals", "document", "record"],
    },
    Attribute {
        category: Category::Resource,
        id: "urn:xacmet:resource:price",
        datatype: DataType::Double,
        candidates: &["9.5", "20", "42.25", "100"],
    },
    Attribute {
        category: Category::Resource,
        id: "urn:xacmet:resource:location",
        datatype: DataType::AnyUri,
        candidates: &[
            "http://example.com/a",
            "http://example.com/b",
            "urn:example:archive",
            "urn:example:vault",
        ],
    },
    Attribute {
        category: Category::Action,
        id: "urn:oasis:names:tc:xacml:1.0:action:action-id",
        datatype: DataType::String,
        candidates: &["read", "write", "delete", "approve"],
    },
    Attribute {
        category: Category::Environment,
        id: "urn:oasis:names:tc:xacml:1.0:environment:current-date",
        datatype: DataType::Date,
        candidates: &["2024-01-01", "2024-06-30", "2025-02-28", "2025-12-31"],
    },
    Attribute {
        category: Category::Environment,
        id: "urn:oasis:names:tc:xacml:1.0:environment:current-time",
        datatype: DataType::Time,
        candidates: &["08:00:00", "12:30:00", "17:45:00", "23:59:59"],
    },
];

/// A chosen attribute with its literal pool.
struct Key {
    designator: AttributeDesignator,
    pool: Vec<AttributeValue>,
}

struct Generator {
    rng: ChaCha8Rng,
    keys: Vec<Key>,
}

impl Generator {
    fn literal(&mut self, key: usize) -> AttributeValue {
        self.keys[key].pool.choose(&mut self.rng).unwrap().clone()
    }

    fn key_of(&mut self, datatype: DataType) -> usize {
        let matching: Vec<usize> = (0..self.keys.len())
            .filter(|k| self.keys[*k].designator.datatype == datatype)
            .collect();
        *matching.choose(&mut self.rng).expect("required datatype was picked")
    }

    fn designator(&self, key: usize) -> Expr {
        Expr::Designator(self.keys[key].designator.clone())
    }

    fn one(&self, key: usize) -> Expr {
        Expr::apply(Function::OneAndOnly(self.keys[key].designator.datatype), vec![self.designator(key)])
    }

    fn atom(&mut self) -> Expr {
        let key = self.rng.gen_range(0..self.keys.len());
        let datatype = self.keys[key].designator.datatype;
        let lit = Expr::Literal(self.literal(key));
        match datatype {
            DataType::Integer => {
                let f = *[
                    Function::IntegerGreaterThan,
                    Function::IntegerLessThan,
                    Function::Equal(DataType::Integer),
                ]
                .choose(&mut self.rng)
                .unwrap();
                Expr::apply(f, vec![self.one(key), lit])
            }
            DataType::String if self.rng.gen_bool(0.5) => {
                Expr::apply(Function::StringIsIn, vec![lit, self.designator(key)])
            }
            dt => Expr::apply(Function::Equal(dt), vec![self.one(key), lit]),
        }
    }

    fn boolean(&mut self, depth: u32) -> Expr {
        if depth == 0 || self.rng.gen_bool(0.5) {
            return self.atom();
        }
        match self.rng.gen_range(0..3) {
            0 => Expr::apply(Function::Not, vec![self.boolean(depth - 1)]),
            1 => Expr::apply(Function::And, vec![self.boolean(depth - 1), self.boolean(depth - 1)]),
            _ => Expr::apply(Function::Or, vec![self.boolean(depth - 1), self.boolean(depth - 1)]),
        }
    }

    /// A boolean expression that applies `function` somewhere.
    fn using(&mut self, function: Function) -> Expr {
        match function {
            Function::Equal(dt) | Function::OneAndOnly(dt) => {
                let key = self.key_of(dt);
                let lit = Expr::Literal(self.literal(key));
                Expr::apply(Function::Equal(dt), vec![self.one(key), lit])
            }
            Function::IntegerAdd | Function::IntegerSubtract | Function::IntegerMultiply => {
                let key = self.key_of(DataType::Integer);
                let operand = Expr::Literal(AttributeValue::integer(self.rng.gen_range(1..=3)));
                let bound = Expr::Literal(self.literal(key));
                let compare = *[Function::IntegerGreaterThan, Function::IntegerLessThan]
                    .choose(&mut self.rng)
                    .unwrap();
                Expr::apply(compare, vec![Expr::apply(function, vec![self.one(key), operand]), bound])
            }
            Function::IntegerGreaterThan | Function::IntegerLessThan => {
                let key = self.key_of(DataType::Integer);
                let lit = Expr::Literal(self.literal(key));
                Expr::apply(function, vec![self.one(key), lit])
            }
            Function::And | Function::Or => Expr::apply(function, vec![self.atom(), self.atom()]),
            Function::Not => Expr::apply(Function::Not, vec![self.atom()]),
            Function::StringIsIn => {
                let key = self.key_of(DataType::String);
                let lit = Expr::Literal(self.literal(key));
                Expr::apply(Function::StringIsIn, vec![lit, self.designator(key)])
            }
        }
    }

    fn predicate(&mut self, key: usize) -> MatchPredicate {
        let datatype = self.keys[key].designator.datatype;
        let function = match datatype {
            DataType::Integer => *[
                Function::Equal(DataType::Integer),
                Function::IntegerGreaterThan,
                Function::IntegerLessThan,
            ]
            .choose(&mut self.rng)
            .unwrap(),
            dt => Function::Equal(dt),
        };
        let literal = self.literal(key);
        MatchPredicate::new(function, literal, self.keys[key].designator.clone()).expect("well-typed by construction")
    }

    fn category_alternatives(&mut self, category: Category) -> Vec<Conjunct> {
        let in_category: Vec<usize> = (0..self.keys.len())
            .filter(|k| self.keys[*k].designator.category == category)
            .collect();
        let count = self.rng.gen_range(1..=2);
        (0..count)
            .map(|_| {
                let size = self.rng.gen_range(1..=in_category.len().min(2));
                let chosen: Vec<usize> = in_category.choose_multiple(&mut self.rng, size).copied().collect();
                let predicates = chosen.into_iter().map(|k| self.predicate(k)).collect();
                Conjunct::new(category, predicates).unwrap()
            })
            .collect()
    }

    /// Each category present among the keys is constrained with
    /// probability `p`.
    fn target(&mut self, p: f64) -> TargetSpec {
        let mut target = TargetSpec::any();
        for category in Category::ALL {
            let present = self.keys.iter().any(|k| k.designator.category == category);
            if present && self.rng.gen_bool(p) {
                let alternatives = self.category_alternatives(category);
                target = target.with_category(category, alternatives);
            }
        }
        target
    }
}

fn required_datatype(function: Function) -> Option<DataType> {
    match function {
        Function::Equal(dt) | Function::OneAndOnly(dt) => Some(dt),
        Function::IntegerAdd
        | Function::IntegerSubtract
        | Function::IntegerMultiply
        | Function::IntegerGreaterThan
        | Function::IntegerLessThan => Some(DataType::Integer),
        Function::StringIsIn => Some(DataType::String),
        Function::And | Function::Or | Function::Not => None,
    }
}

/// Policy number `index` of the corpus seeded with `seed`.
pub fn generate_policy(seed: u64, index: usize) -> Policy {
    let mixed = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(mixed);
    let algorithm = Algorithm::ALL[index % Algorithm::ALL.len()];
    let whitelist = Function::whitelist();
    let required = whitelist[index % whitelist.len()];

    let mut order: Vec<usize> = (0..VOCABULARY.len()).collect();
    order.shuffle(&mut rng);
    let count = rng.gen_range(4..=5);
    let mut picked: Vec<usize> = order[..count].to_vec();
    if let Some(dt) = required_datatype(required) {
        if !picked.iter().any(|i| VOCABULARY[*i].datatype == dt) {
            picked[count - 1] = VOCABULARY.iter().position(|a| a.datatype == dt).unwrap();
        }
    }
    picked.sort_unstable();

    let keys = picked
        .into_iter()
        .map(|i| {
            let attr = &VOCABULARY[i];
            let mut pool: Vec<AttributeValue> = attr
                .candidates
                .choose_multiple(&mut rng, 2)
                .map(|s| AttributeValue::new(attr.datatype, s).unwrap())
                .collect();
            pool.sort();
            Key {
                designator: AttributeDesignator::new(attr.category, attr.id, attr.datatype),
                pool,
            }
        })
        .collect();
    let mut g = Generator { rng, keys };

    let policy_target = if g.rng.gen_bool(0.25) { g.target(0.3) } else { TargetSpec::any() };
    let rule_count = g.rng.gen_range(1..=4);
    let rules = (0..rule_count)
        .map(|j| {
            let effect = if g.rng.gen_bool(0.5) { Effect::Permit } else { Effect::Deny };
            let target = g.target(0.4);
            let mut rule = Rule::new(format!("rule{}", j + 1), effect).with_target(target);
            let expr = if j == 0 {
                Some(g.using(required))
            } else if g.rng.gen_bool(0.4) {
                Some(g.boolean(2))
            } else {
                None
            };
            if let Some(expr) = expr {
                rule = rule.with_condition(Condition::new(expr).expect("well-typed by construction"));
            }
            rule
        })
        .collect();
    Policy::new(format!("corpus-{index}"), algorithm, policy_target, rules).unwrap()
}

pub fn generate_corpus(seed: u64, count: usize) -> Vec<Policy> {
    (0..count).map(|i| generate_policy(seed, i)).collect()
}

/// Every function a policy uses, in target matches and conditions.
pub fn functions_used(policy: &Policy) -> Vec<Function> {
    let targets = std::iter::once(policy.target()).chain(policy.rules().iter().map(|r| &r.target));
    let mut out: Vec<Function> = targets.flat_map(|t| t.predicates().map(|p| p.function())).collect();
    for rule in policy.rules() {
        if let Some(c) = &rule.condition {
            out.extend(c.functions());
        }
    }
    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate_corpus(7, 5), generate_corpus(7, 5));
        assert_ne!(generate_policy(7, 0), generate_policy(8, 0));
    }

    #[test]
    fn first_rule_uses_the_rotating_function() {
        for (i, f) in Function::whitelist().into_iter().enumerate() {
            let policy = generate_policy(1, i);
            let cond = policy.rules()[0].condition.as_ref().unwrap();
            assert!(cond.functions().contains(&f), "{f} missing from {cond}");
        }
    }
}
