//! JSON codec for wire frames: one JSON object per WebSocket text frame,
//! tagged by `t`, with a mandatory `seq`. Unknown fields are ignored.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use super::messages::{ClientCommand, ServerEvent};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("malformed json: {0}")]
    MalformedJson(String),
    #[error("unknown tag `{0}`")]
    UnknownTag(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("field type mismatch: {0}")]
    FieldTypeMismatch(String),
}

impl CodecError {
    pub fn code(&self) -> &'static str {
        match self {
            CodecError::MalformedJson(_) => "MalformedJson",
            CodecError::UnknownTag(_) => "UnknownTag",
            CodecError::MissingField(_) => "MissingField",
            CodecError::FieldTypeMismatch(_) => "FieldTypeMismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientFrame {
    pub seq: u64,
    pub command: ClientCommand,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerFrame {
    pub seq: u64,
    pub event: ServerEvent,
}

/// Implemented by both frame kinds.
pub trait Frame: Sized {
    fn encode(&self) -> String;
    fn decode(bytes: &[u8]) -> Result<Self, CodecError>;
}

impl Frame for ClientFrame {
    fn encode(&self) -> String {
        encode_tagged(self.seq, &self.command)
    }

    fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let (seq, command) = decode_tagged(bytes, &ClientCommand::TAGS)?;
        Ok(ClientFrame { seq, command })
    }
}

impl Frame for ServerFrame {
    fn encode(&self) -> String {
        encode_tagged(self.seq, &self.event)
    }

    fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let (seq, event) = decode_tagged(bytes, &ServerEvent::TAGS)?;
        Ok(ServerFrame { seq, event })
    }
}

fn encode_tagged<T: Serialize>(seq: u64, message: &T) -> String {
    let mut value = serde_json::to_value(message).expect("messages always serialize");
    value
        .as_object_mut()
        .expect("messages are tagged objects")
        .insert("seq".into(), Value::from(seq));
    value.to_string()
}

fn decode_tagged<T: DeserializeOwned>(bytes: &[u8], tags: &[&str]) -> Result<(u64, T), CodecError> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| CodecError::MalformedJson(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(CodecError::MalformedJson("frame is not a JSON object".into()));
    };
    let tag = match obj.get("t") {
        None => return Err(CodecError::MissingField("t".into())),
        Some(Value::String(t)) => t.clone(),
        Some(_) => return Err(CodecError::FieldTypeMismatch("t must be a string".into())),
    };
    if !tags.contains(&tag.as_str()) {
        return Err(CodecError::UnknownTag(tag));
    }
    let seq = match obj.get("seq") {
        None => return Err(CodecError::MissingField("seq".into())),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| CodecError::FieldTypeMismatch("seq must be a non-negative integer".into()))?,
    };
    let message = serde_json::from_value(Value::Object(strip_seq(obj))).map_err(classify)?;
    Ok((seq, message))
}

fn strip_seq(mut obj: Map<String, Value>) -> Map<String, Value> {
    obj.remove("seq");
    obj
}

fn classify(err: serde_json::Error) -> CodecError {
    let msg = err.to_string();
    if let Some(rest) = msg.strip_prefix("missing field `") {
        let field = rest.split('`').next().unwrap_or_default();
        CodecError::MissingField(field.to_string())
    } else {
        CodecError::FieldTypeMismatch(msg)
    }
}
