//! Canonical JSON encoding and small helpers for hand-written decoders.
//!
//! Canonical form: object keys sorted by byte order, numbers in serde_json's
//! shortest round-trip notation, no insignificant whitespace in the compact
//! form. The pretty form indents by two spaces, keeps arrays of scalars on one
//! line and ends with a newline.

use std::collections::BTreeSet;

use serde_json::{Map, Value};

use crate::geometry::Pose6D;

/// Location of a syntax error in a JSON document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

pub fn parse(bytes: &[u8]) -> Result<Value, SyntaxError> {
    serde_json::from_slice(bytes).map_err(|e| SyntaxError {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn to_compact(value: &Value) -> String {
    let mut out = String::new();
    write_compact(value, &mut out);
    out
}

pub fn to_pretty(value: &Value) -> String {
    let mut out = String::new();
    write_pretty(value, 0, &mut out);
    out.push('\n');
    out
}

fn scalar(value: &Value) -> String {
    serde_json::to_string(value).expect("scalar JSON values always serialize")
}

fn sorted(map: &Map<String, Value>) -> Vec<(&String, &Value)> {
    let mut entries: Vec<_> = map.iter().collect();
    entries.sort_by(|a, b| a.0.cmp(b.0));
    entries
}

fn write_compact(value: &Value, out: &mut String) {
    match value {
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_compact(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, v)) in sorted(map).into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&scalar(&Value::String(k.clone())));
                out.push(':');
                write_compact(v, out);
            }
            out.push('}');
        }
        other => out.push_str(&scalar(other)),
    }
}

fn is_scalar(value: &Value) -> bool {
    !matches!(value, Value::Array(_) | Value::Object(_))
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_pretty(value: &Value, depth: usize, out: &mut String) {
    match value {
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) if items.iter().all(is_scalar) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&scalar(item));
            }
            out.push(']');
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                indent(depth + 1, out);
                write_pretty(item, depth + 1, out);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(depth, out);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            let entries = sorted(map);
            let n = entries.len();
            for (i, (k, v)) in entries.into_iter().enumerate() {
                indent(depth + 1, out);
                out.push_str(&scalar(&Value::String(k.clone())));
                out.push_str(": ");
                write_pretty(v, depth + 1, out);
                if i + 1 < n {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(depth, out);
            out.push('}');
        }
        other => out.push_str(&scalar(other)),
    }
}

/// A problem with one named field while decoding an object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Reads fields out of a JSON object, remembering which keys were consumed so
/// that leftovers can be reported as unknown.
pub struct Fields<'a> {
    map: &'a Map<String, Value>,
    seen: BTreeSet<&'a str>,
}

impl<'a> Fields<'a> {
    pub fn new(value: &'a Value, what: &str) -> Result<Self, FieldError> {
        match value {
            Value::Object(map) => Ok(Self {
                map,
                seen: BTreeSet::new(),
            }),
            _ => Err(FieldError::new(what, "expected an object")),
        }
    }

    pub fn optional(&mut self, field: &'a str) -> Option<&'a Value> {
        let v = self.map.get(field)?;
        self.seen.insert(field);
        Some(v)
    }

    pub fn required(&mut self, field: &'a str) -> Result<&'a Value, FieldError> {
        self.optional(field)
            .ok_or_else(|| FieldError::new(field, "missing required field"))
    }

    pub fn string(&mut self, field: &'a str) -> Result<&'a str, FieldError> {
        self.required(field)?
            .as_str()
            .ok_or_else(|| FieldError::new(field, "expected a string"))
    }

    pub fn non_empty_string(&mut self, field: &'a str) -> Result<&'a str, FieldError> {
        let s = self.string(field)?;
        if s.trim().is_empty() {
            return Err(FieldError::new(field, "must not be empty"));
        }
        Ok(s)
    }

    pub fn number(&mut self, field: &'a str) -> Result<f64, FieldError> {
        as_number(self.required(field)?, field)
    }

    pub fn positive(&mut self, field: &'a str) -> Result<f64, FieldError> {
        let v = self.number(field)?;
        if v <= 0.0 {
            return Err(FieldError::new(field, format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    pub fn optional_number(&mut self, field: &'a str) -> Result<Option<f64>, FieldError> {
        self.optional(field).map(|v| as_number(v, field)).transpose()
    }

    pub fn pose(&mut self, field: &'a str) -> Result<Pose6D, FieldError> {
        decode_pose(self.required(field)?, field)
    }

    pub fn array(&mut self, field: &'a str) -> Result<&'a Vec<Value>, FieldError> {
        self.required(field)?
            .as_array()
            .ok_or_else(|| FieldError::new(field, "expected an array"))
    }

    /// Fails on the first key that was never read.
    pub fn finish(self) -> Result<(), FieldError> {
        match self.map.keys().find(|k| !self.seen.contains(k.as_str())) {
            Some(k) => Err(FieldError::new(k.clone(), "unknown field")),
            None => Ok(()),
        }
    }
}

pub fn as_number(value: &Value, field: &str) -> Result<f64, FieldError> {
    value
        .as_f64()
        .filter(|v| v.is_finite())
        .ok_or_else(|| FieldError::new(field, "expected a number"))
}

pub fn number_array<const N: usize>(value: &Value, field: &str) -> Result<[f64; N], FieldError> {
    let items = value
        .as_array()
        .filter(|a| a.len() == N)
        .ok_or_else(|| FieldError::new(field, format!("expected an array of {N} numbers")))?;
    let mut out = [0.0; N];
    for (slot, item) in out.iter_mut().zip(items) {
        *slot = as_number(item, field)?;
    }
    Ok(out)
}

pub fn decode_pose(value: &Value, field: &str) -> Result<Pose6D, FieldError> {
    let map = value
        .as_object()
        .ok_or_else(|| FieldError::new(field, "expected a pose object"))?;
    if let Some(k) = map.keys().find(|k| *k != "position" && *k != "orientation") {
        return Err(FieldError::new(field, format!("unknown pose field `{k}`")));
    }
    let position = map
        .get("position")
        .ok_or_else(|| FieldError::new(field, "pose is missing `position`"))?;
    let orientation = map
        .get("orientation")
        .ok_or_else(|| FieldError::new(field, "pose is missing `orientation`"))?;
    let p = number_array::<3>(position, field)?;
    let q = number_array::<4>(orientation, field)?;
    Pose6D::from_arrays(p, q)
        .ok_or_else(|| FieldError::new(field, "orientation must be a non-zero quaternion"))
}

pub fn encode_pose(pose: &Pose6D) -> Value {
    serde_json::to_value(pose).expect("poses always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_are_sorted_in_both_forms() {
        let v = json!({"b": 1, "a": {"d": [1.5, 2], "c": "x"}});
        assert_eq!(to_compact(&v), r#"{"a":{"c":"x","d":[1.5,2]},"b":1}"#);
        assert_eq!(
            to_pretty(&v),
            "{\n  \"a\": {\n    \"c\": \"x\",\n    \"d\": [1.5, 2]\n  },\n  \"b\": 1\n}\n"
        );
    }

    #[test]
    fn pretty_output_reparses_to_same_value() {
        let v = json!({"list": [{"z": null}, [1, 2], []], "e": {}, "s": "quote \" and \u{e9}"});
        assert_eq!(parse(to_pretty(&v).as_bytes()).unwrap(), v);
        assert_eq!(parse(to_compact(&v).as_bytes()).unwrap(), v);
    }

    #[test]
    fn syntax_errors_are_located() {
        let err = parse(b"{\n  \"a\": 1,\n  oops\n}").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.column > 0);
    }

    #[test]
    fn unknown_fields_are_reported() {
        let v = json!({"a": 1, "b": 2});
        let mut f = Fields::new(&v, "root").unwrap();
        f.number("a").unwrap();
        assert_eq!(f.finish().unwrap_err().field, "b");
    }
}
