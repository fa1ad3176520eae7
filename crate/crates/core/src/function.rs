//! The supported function whitelist and its evaluation.

use std::fmt;

use serde::Serialize;

use crate::value::{AttributeValue, DataType};

const FUNCTION_PREFIX: &str = "urn:oasis:names:tc:xacml:1.0:function:";

/// A whitelisted XACML function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Function {
    Equal(DataType),
    IntegerAdd,
    IntegerSubtract,
    IntegerMultiply,
    IntegerGreaterThan,
    IntegerLessThan,
    And,
    Or,
    Not,
    StringIsIn,
    OneAndOnly(DataType),
}

/// Static type of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExprType {
    Single(DataType),
    Bag(DataType),
}

impl fmt::Display for ExprType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprType::Single(dt) => write!(f, "{dt}"),
            ExprType::Bag(dt) => write!(f, "bag<{dt}>"),
        }
    }
}

/// Runtime value of an expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Single(AttributeValue),
    Bag(Vec<AttributeValue>),
}

/// Runtime failure; the caller folds it into `false`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    NotOneValue(usize),
    Overflow,
    TypeMismatch,
}

impl Function {
    /// Every whitelisted function, in a fixed order.
    pub fn whitelist() -> Vec<Function> {
        let mut all: Vec<Function> = DataType::ALL.into_iter().map(Function::Equal).collect();
        all.extend([
            Function::IntegerAdd,
            Function::IntegerSubtract,
            Function::IntegerMultiply,
            Function::IntegerGreaterThan,
            Function::IntegerLessThan,
            Function::And,
            Function::Or,
            Function::Not,
            Function::StringIsIn,
        ]);
        all.extend(DataType::ALL.into_iter().map(Function::OneAndOnly));
        all
    }

    pub fn name(self) -> String {
        match self {
            Function::Equal(dt) => format!("{}-equal", dt.name()),
            Function::IntegerAdd => "integer-add".into(),
            Function::IntegerSubtract => "integer-subtract".into(),
            Function::IntegerMultiply => "integer-multiply".into(),
            Function::IntegerGreaterThan => "integer-greater-than".into(),
            Function::IntegerLessThan => "integer-less-than".into(),
            Function::And => "and".into(),
            Function::Or => "or".into(),
            Function::Not => "not".into(),
            Function::StringIsIn => "string-is-in".into(),
            Function::OneAndOnly(dt) => format!("{}-one-and-only", dt.name()),
        }
    }

    pub fn uri(self) -> String {
        format!("{FUNCTION_PREFIX}{}", self.name())
    }

    pub fn from_uri(uri: &str) -> Option<Function> {
        let name = uri.trim().strip_prefix(FUNCTION_PREFIX)?;
        Function::whitelist().into_iter().find(|f| f.name() == name)
    }

    /// Functions allowed as the `MatchId` of a target match element.
    pub fn is_match_function(self) -> bool {
        matches!(
            self,
            Function::Equal(_) | Function::IntegerGreaterThan | Function::IntegerLessThan
        )
    }

    /// The `(literal, attribute)` datatype a match function expects.
    pub fn match_datatype(self) -> Option<DataType> {
        match self {
            Function::Equal(dt) => Some(dt),
            Function::IntegerGreaterThan | Function::IntegerLessThan => Some(DataType::Integer),
            _ => None,
        }
    }

    /// Checks argument types and returns the result type.
    pub fn signature(self, args: &[ExprType]) -> Result<ExprType, String> {
        use ExprType::{Bag, Single};
        let want = |expected: &[ExprType]| -> Result<(), String> {
            if args == expected {
                Ok(())
            } else {
                Err(format!(
                    "{} expects ({}), got ({})",
                    self.name(),
                    join(expected),
                    join(args)
                ))
            }
        };
        let all_of = |dt: DataType, min: usize| -> Result<(), String> {
            if args.len() >= min && args.iter().all(|a| *a == Single(dt)) {
                Ok(())
            } else {
                Err(format!(
                    "{} expects at least {min} {dt} arguments, got ({})",
                    self.name(),
                    join(args)
                ))
            }
        };
        match self {
            Function::Equal(dt) => want(&[Single(dt), Single(dt)]).map(|_| Single(DataType::Boolean)),
            Function::IntegerAdd | Function::IntegerMultiply => {
                all_of(DataType::Integer, 2).map(|_| Single(DataType::Integer))
            }
            Function::IntegerSubtract => want(&[Single(DataType::Integer), Single(DataType::Integer)])
                .map(|_| Single(DataType::Integer)),
            Function::IntegerGreaterThan | Function::IntegerLessThan => {
                want(&[Single(DataType::Integer), Single(DataType::Integer)])
                    .map(|_| Single(DataType::Boolean))
            }
            Function::And | Function::Or => {
                all_of(DataType::Boolean, 0).map(|_| Single(DataType::Boolean))
            }
            Function::Not => want(&[Single(DataType::Boolean)]).map(|_| Single(DataType::Boolean)),
            Function::StringIsIn => want(&[Single(DataType::String), Bag(DataType::String)])
                .map(|_| Single(DataType::Boolean)),
            Function::OneAndOnly(dt) => want(&[Bag(dt)]).map(|_| Single(dt)),
        }
    }

    /// Applies a match function as `function(literal, attribute_value)`.
    pub fn apply_match(self, literal: &AttributeValue, value: &AttributeValue) -> bool {
        match self {
            Function::Equal(dt) => literal.datatype() == dt && value.datatype() == dt && literal == value,
            Function::IntegerGreaterThan => match (literal.as_integer(), value.as_integer()) {
                (Some(l), Some(v)) => l > v,
                _ => false,
            },
            Function::IntegerLessThan => match (literal.as_integer(), value.as_integer()) {
                (Some(l), Some(v)) => l < v,
                _ => false,
            },
            _ => false,
        }
    }

    /// Applies a non-logical function to already-evaluated arguments.
    /// `and`/`or` are handled by the caller because they short-circuit.
    pub fn apply(self, args: &[Value]) -> Result<Value, EvalError> {
        let single = |v: &Value| match v {
            Value::Single(a) => Ok(a.clone()),
            Value::Bag(_) => Err(EvalError::TypeMismatch),
        };
        let int = |v: &Value| single(v)?.as_integer().ok_or(EvalError::TypeMismatch);
        let boolean = |v: &Value| single(v)?.as_boolean().ok_or(EvalError::TypeMismatch);
        match self {
            Function::Equal(dt) => {
                let (a, b) = (single(&args[0])?, single(&args[1])?);
                if a.datatype() != dt || b.datatype() != dt {
                    return Err(EvalError::TypeMismatch);
                }
                let equal = match dt {
                    // IEEE equality, so NaN never equals itself.
                    DataType::Double => a.as_double() == b.as_double(),
                    _ => a == b,
                };
                Ok(Value::Single(AttributeValue::boolean(equal)))
            }
            Function::IntegerAdd | Function::IntegerMultiply => {
                let mut acc = int(&args[0])?;
                for arg in &args[1..] {
                    let v = int(arg)?;
                    acc = match self {
                        Function::IntegerAdd => acc.checked_add(v),
                        _ => acc.checked_mul(v),
                    }
                    .ok_or(EvalError::Overflow)?;
                }
                Ok(Value::Single(AttributeValue::integer(acc)))
            }
            Function::IntegerSubtract => {
                let v = int(&args[0])?
                    .checked_sub(int(&args[1])?)
                    .ok_or(EvalError::Overflow)?;
                Ok(Value::Single(AttributeValue::integer(v)))
            }
            Function::IntegerGreaterThan => Ok(Value::Single(AttributeValue::boolean(
                int(&args[0])? > int(&args[1])?,
            ))),
            Function::IntegerLessThan => Ok(Value::Single(AttributeValue::boolean(
                int(&args[0])? < int(&args[1])?,
            ))),
            Function::Not => Ok(Value::Single(AttributeValue::boolean(!boolean(&args[0])?))),
            Function::StringIsIn => {
                let needle = single(&args[0])?;
                match &args[1] {
                    Value::Bag(values) => Ok(Value::Single(AttributeValue::boolean(
                        values.contains(&needle),
                    ))),
                    Value::Single(_) => Err(EvalError::TypeMismatch),
                }
            }
            Function::OneAndOnly(dt) => match &args[0] {
                Value::Bag(values) if values.len() == 1 && values[0].datatype() == dt => {
                    Ok(Value::Single(values[0].clone()))
                }
                Value::Bag(values) => Err(EvalError::NotOneValue(values.len())),
                Value::Single(_) => Err(EvalError::TypeMismatch),
            },
            Function::And | Function::Or => {
                let mut result = matches!(self, Function::And);
                for arg in args {
                    let b = boolean(arg)?;
                    if b != result {
                        result = b;
                        break;
                    }
                }
                Ok(Value::Single(AttributeValue::boolean(result)))
            }
        }
    }
}

fn join(types: &[ExprType]) -> String {
    types
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitelist_round_trips_through_uris() {
        let all = Function::whitelist();
        assert_eq!(all.len(), 23);
        for f in all {
            assert_eq!(Function::from_uri(&f.uri()), Some(f), "{f}");
        }
        assert_eq!(
            Function::from_uri("urn:oasis:names:tc:xacml:1.0:function:string-regexp-match"),
            None
        );
    }

    #[test]
    fn match_functions_take_literal_first() {
        let five = AttributeValue::integer(5);
        let three = AttributeValue::integer(3);
        assert!(Function::IntegerGreaterThan.apply_match(&five, &three));
        assert!(!Function::IntegerLessThan.apply_match(&five, &three));
        assert!(!Function::Equal(DataType::String).apply_match(&five, &five));
    }

    #[test]
    fn arithmetic_overflow_is_an_error() {
        let args = [
            Value::Single(AttributeValue::integer(i64::MAX)),
            Value::Single(AttributeValue::integer(1)),
        ];
        assert_eq!(Function::IntegerAdd.apply(&args), Err(EvalError::Overflow));
    }

    #[test]
    fn one_and_only_requires_exactly_one() {
        assert_eq!(
            Function::OneAndOnly(DataType::String).apply(&[Value::Bag(vec![])]),
            Err(EvalError::NotOneValue(0))
        );
    }

    #[test]
    fn signatures_reject_bad_arity() {
        use ExprType::*;
        assert!(Function::Not.signature(&[]).is_err());
        assert!(Function::IntegerAdd.signature(&[Single(DataType::Integer)]).is_err());
        assert_eq!(Function::And.signature(&[]), Ok(Single(DataType::Boolean)));
        assert_eq!(
            Function::StringIsIn.signature(&[Single(DataType::String), Bag(DataType::String)]),
            Ok(Single(DataType::Boolean))
        );
    }
}
