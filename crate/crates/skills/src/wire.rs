//! Skill wire protocol: newline-delimited UTF-8 JSON over a stream socket.
//!
//! Every message is one line, a JSON object with exactly the fields
//! `{id, op, skill, args, payload}` in that order. Requests (`start`,
//! `stop`, `status`) each receive exactly one response (`ack`, `result`,
//! `status`, or `error`) carrying the same id.
//!
//! Payloads: `result` carries `success` or `failure`; a `status` response
//! carries one of `idle`, `running`, `success`, `failure`. Response `args`
//! may carry skill outputs (for example a detected pose).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Start,
    Stop,
    Status,
    Result,
    Ack,
    Error,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Op::Start => "start",
            Op::Stop => "stop",
            Op::Status => "status",
            Op::Result => "result",
            Op::Ack => "ack",
            Op::Error => "error",
        };
        f.write_str(name)
    }
}

/// One protocol message. Args use a sorted map so encoding is deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillMessage {
    pub id: u64,
    pub op: Op,
    pub skill: String,
    pub args: BTreeMap<String, String>,
    pub payload: String,
}

impl SkillMessage {
    pub fn request(id: u64, op: Op, skill: &str, args: BTreeMap<String, String>) -> SkillMessage {
        SkillMessage {
            id,
            op,
            skill: skill.to_string(),
            args,
            payload: String::new(),
        }
    }

    pub fn response(&self, op: Op, payload: impl Into<String>) -> SkillMessage {
        SkillMessage {
            id: self.id,
            op,
            skill: self.skill.clone(),
            args: BTreeMap::new(),
            payload: payload.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    /// The line was not a valid message; the offending input is retained.
    #[error("cannot decode {line:?}: {message}")]
    Decode { line: String, message: String },
    #[error("connection: {0}")]
    Io(#[from] std::io::Error),
    #[error("response id {got} does not match request id {want}")]
    Correlation { want: u64, got: u64 },
    #[error("no response within {0:?}")]
    Timeout(std::time::Duration),
    #[error("connection closed")]
    Closed,
}

/// Renders a message as one wire line (newline included).
pub fn encode(msg: &SkillMessage) -> String {
    let mut line = serde_json::to_string(msg).expect("message serializes");
    line.push('\n');
    line
}

/// Parses one wire line (with or without the trailing newline).
pub fn decode(line: &str) -> Result<SkillMessage, WireError> {
    let trimmed = line.trim_end_matches('\n');
    serde_json::from_str(trimmed).map_err(|e| WireError::Decode {
        line: trimmed.to_string(),
        message: e.to_string(),
    })
}
