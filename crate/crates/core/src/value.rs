//! Typed attribute values with canonical lexical forms.
//!
//! Two values are equal when their datatypes agree and their canonical
//! literals agree, so `integer "007"` and `integer "7"` compare equal.

use std::fmt;

use chrono::{NaiveDate, NaiveTime};
use serde::Serialize;
use thiserror::Error;

const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

/// The primitive datatypes understood by the evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum DataType {
    #[serde(rename = "string")]
    String,
    #[serde(rename = "integer")]
    Integer,
    #[serde(rename = "boolean")]
    Boolean,
    #[serde(rename = "double")]
    Double,
    #[serde(rename = "anyURI")]
    AnyUri,
    #[serde(rename = "date")]
    Date,
    #[serde(rename = "time")]
    Time,
}

impl DataType {
    pub const ALL: [DataType; 7] = [
        DataType::String,
        DataType::Integer,
        DataType::Boolean,
        DataType::Double,
        DataType::AnyUri,
        DataType::Date,
        DataType::Time,
    ];

    /// XML Schema local name, as used in XACML function identifiers.
    pub fn name(self) -> &'static str {
        match self {
            DataType::String => "string",
            DataType::Integer => "integer",
            DataType::Boolean => "boolean",
            DataType::Double => "double",
            DataType::AnyUri => "anyURI",
            DataType::Date => "date",
            DataType::Time => "time",
        }
    }

    pub fn uri(self) -> String {
        format!("{XSD}{}", self.name())
    }

    pub fn from_uri(uri: &str) -> Option<DataType> {
        let name = uri.trim().strip_prefix(XSD)?;
        Self::from_name(name)
    }

    pub fn from_name(name: &str) -> Option<DataType> {
        DataType::ALL.into_iter().find(|dt| dt.name() == name)
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid {datatype} literal {literal:?}")]
pub struct ValueError {
    pub datatype: DataType,
    pub literal: String,
}

/// A datatype-tagged value stored in canonical lexical form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AttributeValue {
    datatype: DataType,
    #[serde(rename = "value")]
    literal: String,
}

fn xml_trim(s: &str) -> &str {
    s.trim_matches(|c| matches!(c, ' ' | '\t' | '\n' | '\r'))
}

/// Splits an XML Schema timezone suffix (`Z`, `+hh:mm`, `-hh:mm`).
fn split_timezone(s: &str) -> (&str, Option<&str>) {
    if let Some(head) = s.strip_suffix('Z') {
        return (head, Some("Z"));
    }
    let bytes = s.as_bytes();
    let n = bytes.len();
    if n > 6 && matches!(bytes[n - 6], b'+' | b'-') && bytes[n - 3] == b':' {
        return (&s[..n - 6], Some(&s[n - 6..]));
    }
    (s, None)
}

fn canonical_timezone(tz: Option<&str>) -> Option<String> {
    let tz = tz?;
    if tz == "Z" || tz == "+00:00" || tz == "-00:00" {
        return Some("Z".to_string());
    }
    let hours: u32 = tz[1..3].parse().ok()?;
    let minutes: u32 = tz[4..6].parse().ok()?;
    if hours > 14 || minutes > 59 {
        return None;
    }
    Some(tz.to_string())
}

fn canonical_double(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "INF" } else { "-INF" }.to_string()
    } else if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

fn canonicalize(datatype: DataType, raw: &str) -> Option<String> {
    let s = xml_trim(raw);
    match datatype {
        DataType::String => Some(s.to_string()),
        DataType::AnyUri => {
            if s.chars().any(char::is_whitespace) {
                None
            } else {
                Some(s.to_string())
            }
        }
        DataType::Integer => {
            let digits = s.strip_prefix('+').unwrap_or(s);
            digits.parse::<i64>().ok().map(|v| v.to_string())
        }
        DataType::Boolean => match s {
            "true" | "1" => Some("true".to_string()),
            "false" | "0" => Some("false".to_string()),
            _ => None,
        },
        DataType::Double => {
            let v = match s {
                "INF" | "+INF" => f64::INFINITY,
                "-INF" => f64::NEG_INFINITY,
                "NaN" => f64::NAN,
                other => {
                    // Rust accepts "inf"/"infinity" spellings that XML Schema does not.
                    if other.chars().any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E') {
                        return None;
                    }
                    other.parse::<f64>().ok()?
                }
            };
            Some(canonical_double(v))
        }
        DataType::Date => {
            let (head, tz) = split_timezone(s);
            let date = NaiveDate::parse_from_str(head, "%Y-%m-%d").ok()?;
            let tz = match tz {
                Some(_) => Some(canonical_timezone(tz)?),
                None => None,
            };
            Some(format!("{}{}", date.format("%Y-%m-%d"), tz.unwrap_or_default()))
        }
        DataType::Time => {
            let (head, tz) = split_timezone(s);
            let time = NaiveTime::parse_from_str(head, "%H:%M:%S%.f").ok()?;
            let tz = match tz {
                Some(_) => Some(canonical_timezone(tz)?),
                None => None,
            };
            Some(format!("{}{}", time.format("%H:%M:%S%.f"), tz.unwrap_or_default()))
        }
    }
}

impl AttributeValue {
    /// Parses `lexical` under `datatype` and stores its canonical form.
    pub fn new(datatype: DataType, lexical: &str) -> Result<Self, ValueError> {
        match canonicalize(datatype, lexical) {
            Some(literal) => Ok(AttributeValue { datatype, literal }),
            None => Err(ValueError {
                datatype,
                literal: lexical.to_string(),
            }),
        }
    }

    pub fn string(s: impl AsRef<str>) -> Self {
        AttributeValue {
            datatype: DataType::String,
            literal: xml_trim(s.as_ref()).to_string(),
        }
    }

    pub fn integer(v: i64) -> Self {
        AttributeValue {
            datatype: DataType::Integer,
            literal: v.to_string(),
        }
    }

    pub fn boolean(v: bool) -> Self {
        AttributeValue {
            datatype: DataType::Boolean,
            literal: v.to_string(),
        }
    }

    pub fn double(v: f64) -> Self {
        AttributeValue {
            datatype: DataType::Double,
            literal: canonical_double(v),
        }
    }

    pub fn datatype(&self) -> DataType {
        self.datatype
    }

    pub fn literal(&self) -> &str {
        &self.literal
    }

    pub fn as_integer(&self) -> Option<i64> {
        match self.datatype {
            DataType::Integer => self.literal.parse().ok(),
            _ => None,
        }
    }

    pub fn as_boolean(&self) -> Option<bool> {
        match self.datatype {
            DataType::Boolean => Some(self.literal == "true"),
            _ => None,
        }
    }

    pub fn as_double(&self) -> Option<f64> {
        match self.datatype {
            DataType::Double => match self.literal.as_str() {
                "INF" => Some(f64::INFINITY),
                "-INF" => Some(f64::NEG_INFINITY),
                "NaN" => Some(f64::NAN),
                s => s.parse().ok(),
            },
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self.datatype {
            DataType::String => Some(&self.literal),
            _ => None,
        }
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.datatype {
            DataType::String | DataType::AnyUri => write!(f, "{:?}", self.literal),
            _ => write!(f, "{}:{}", self.datatype, self.literal),
        }
    }
}
