use behavior_forge::json;
use serde_json::{Map, Value};
use thiserror::Error;

/// One protocol message. Every envelope travels as a single WebSocket text
/// frame holding canonical compact JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub kind: String,
    pub seq: u64,
    /// Simulation time at which the message was produced, seconds.
    pub timestamp: f64,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("protocol error ({reason}): {message}")]
pub struct ProtocolError {
    /// Short machine-readable reason: `parse`, `envelope`, `seq_regression`.
    pub reason: &'static str,
    pub message: String,
    /// Sequence number of the offending message, when it could be read.
    pub seq: Option<u64>,
}

impl ProtocolError {
    fn new(reason: &'static str, message: impl Into<String>, seq: Option<u64>) -> Self {
        Self {
            reason,
            message: message.into(),
            seq,
        }
    }
}

impl Envelope {
    pub fn new(kind: impl Into<String>, seq: u64, timestamp: f64, payload: Value) -> Self {
        Self {
            kind: kind.into(),
            seq,
            timestamp,
            payload,
        }
    }

    pub fn to_value(&self) -> Value {
        let mut map = Map::new();
        map.insert("type".into(), Value::String(self.kind.clone()));
        map.insert("seq".into(), Value::from(self.seq));
        map.insert("timestamp".into(), Value::from(self.timestamp));
        map.insert("payload".into(), self.payload.clone());
        Value::Object(map)
    }

    /// Canonical wire text.
    pub fn frame(&self) -> String {
        json::to_compact(&self.to_value())
    }

    /// Parses one text frame. Never panics on arbitrary input.
    pub fn parse(text: &str) -> Result<Envelope, ProtocolError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| ProtocolError::new("parse", e.to_string(), None))?;
        let Value::Object(map) = value else {
            return Err(ProtocolError::new("envelope", "message must be a JSON object", None));
        };
        let seq = map.get("seq").and_then(Value::as_u64);
        let bad = |m: &str| ProtocolError::new("envelope", m, seq);
        let seq_value = seq.ok_or_else(|| bad("`seq` must be a non-negative integer"))?;
        let kind = map
            .get("type")
            .and_then(Value::as_str)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| bad("`type` must be a non-empty string"))?;
        let timestamp = match map.get("timestamp") {
            None => 0.0,
            Some(v) => v.as_f64().ok_or_else(|| bad("`timestamp` must be a number"))?,
        };
        let payload = match map.get("payload") {
            None => Value::Object(Map::new()),
            Some(v @ Value::Object(_)) => v.clone(),
            Some(_) => return Err(bad("`payload` must be an object")),
        };
        if let Some(extra) = map
            .keys()
            .find(|k| !["type", "seq", "timestamp", "payload"].contains(&k.as_str()))
        {
            return Err(bad(&format!("unknown envelope field `{extra}`")));
        }
        Ok(Envelope::new(kind, seq_value, timestamp, payload))
    }
}
