//! Model-based test oracle for XACML 2.0 policies.
//!
//! A policy is turned into a typed tree mirroring its XML structure, the
//! tree into an evaluation graph, and the graph is unfolded into an ordered
//! list of evaluation paths. Each path carries the rule outcomes it assumes
//! and the decision it ends in, so the expected decision for any request is
//! the verdict of the first path the request is consistent with.

pub mod corpus;
pub mod function;
pub mod graph;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod paths;
pub mod reference;
pub mod tree;
pub mod value;
pub mod xml;
