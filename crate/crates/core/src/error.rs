use thiserror::Error;

use crate::kernel::SimTime;
use crate::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("event scheduled at {at} but the clock is already at {now}")]
    ScheduleInPast { at: SimTime, now: SimTime },
    #[error("cannot run until {target}: the clock is already at {now}")]
    RunBackwards { target: SimTime, now: SimTime },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} has been removed")]
    RemovedNode(NodeId),
    #[error("channel offset {offset} out of range for a hopping sequence of {len} channels")]
    ChannelOffset { offset: u16, len: usize },
    #[error("radio record for node {node} at {at} precedes its last record at {last}")]
    OutOfOrderRecord {
        node: NodeId,
        at: SimTime,
        last: SimTime,
    },
    #[error("measurement window has zero length")]
    EmptyWindow,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl ConfigError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        ConfigError::Invalid(msg.into())
    }
}
