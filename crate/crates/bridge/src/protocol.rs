//! Newline-delimited JSON frames exchanged between the dispatcher and a robot.

use aas_core::lifecycle::{CommandId, Details, Outcome};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::io::{AsyncBufRead, AsyncBufReadExt, AsyncReadExt, AsyncWrite, AsyncWriteExt};

/// Frames longer than this are rejected instead of buffered.
pub const MAX_FRAME_BYTES: usize = 1 << 20;

pub const MESSAGE_TYPES: [&str; 4] = ["EXECUTE", "STARTED", "PROGRESS", "DONE"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum BridgeMessage {
    #[serde(rename_all = "camelCase")]
    Execute {
        command_id: CommandId,
        skill: String,
        params: Details,
    },
    #[serde(rename_all = "camelCase")]
    Started { command_id: CommandId },
    #[serde(rename_all = "camelCase")]
    Progress {
        command_id: CommandId,
        distance_delta_meters: f64,
    },
    #[serde(rename_all = "camelCase")]
    Done {
        command_id: CommandId,
        outcome: Outcome,
        details: Details,
    },
}

impl BridgeMessage {
    pub fn command_id(&self) -> CommandId {
        match self {
            BridgeMessage::Execute { command_id, .. }
            | BridgeMessage::Started { command_id }
            | BridgeMessage::Progress { command_id, .. }
            | BridgeMessage::Done { command_id, .. } => *command_id,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            BridgeMessage::Execute { .. } => "EXECUTE",
            BridgeMessage::Started { .. } => "STARTED",
            BridgeMessage::Progress { .. } => "PROGRESS",
            BridgeMessage::Done { .. } => "DONE",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error("malformed frame at byte {position}: {message}")]
    MalformedFrame { position: usize, message: String },
    #[error("unknown message type '{0}'")]
    UnknownMessageType(String),
    #[error("frame exceeds {MAX_FRAME_BYTES} bytes")]
    FrameTooLong,
    #[error("connection closed")]
    Disconnected,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Serializes one message as a single line terminated by `\n`.
pub fn encode(msg: &BridgeMessage) -> Vec<u8> {
    let mut out = serde_json::to_vec(msg).expect("bridge messages serialize");
    out.push(b'\n');
    out
}

fn malformed(position: usize, message: impl Into<String>) -> BridgeError {
    BridgeError::MalformedFrame {
        position,
        message: message.into(),
    }
}

/// Parses one frame. A single trailing line terminator is tolerated.
pub fn decode(frame: &[u8]) -> Result<BridgeMessage, BridgeError> {
    let frame = frame.strip_suffix(b"\n").unwrap_or(frame);
    let frame = frame.strip_suffix(b"\r").unwrap_or(frame);
    if frame.is_empty() {
        return Err(malformed(0, "empty frame"));
    }
    let value: Value = serde_json::from_slice(frame).map_err(|e| {
        // a frame is a single line, so the column is the byte offset
        malformed(e.column().saturating_sub(1), e.to_string())
    })?;
    let tag = match value.get("type") {
        Some(Value::String(tag)) => tag.clone(),
        Some(_) => return Err(malformed(0, "field 'type' must be a string")),
        None if value.is_object() => return Err(malformed(0, "missing field 'type'")),
        None => return Err(malformed(0, "frame is not a JSON object")),
    };
    if !MESSAGE_TYPES.contains(&tag.as_str()) {
        return Err(BridgeError::UnknownMessageType(tag));
    }
    serde_json::from_value(value).map_err(|e| malformed(0, e.to_string()))
}

pub async fn write_message<W: AsyncWrite + Unpin>(writer: &mut W, msg: &BridgeMessage) -> Result<(), BridgeError> {
    writer.write_all(&encode(msg)).await?;
    writer.flush().await?;
    Ok(())
}

/// Reads the next frame; `Ok(None)` on a clean end of stream.
pub async fn read_message<R: AsyncBufRead + Unpin>(reader: &mut R) -> Result<Option<BridgeMessage>, BridgeError> {
    let mut line = Vec::new();
    let n = reader
        .take(MAX_FRAME_BYTES as u64 + 1)
        .read_until(b'\n', &mut line)
        .await?;
    if n == 0 {
        return Ok(None);
    }
    if line.len() > MAX_FRAME_BYTES {
        return Err(BridgeError::FrameTooLong);
    }
    decode(&line).map(Some)
}
