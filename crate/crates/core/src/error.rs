use thiserror::Error;

use crate::protocol::SensorId;

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("grid must be at least 2x2, got {0}x{1}")]
    GridTooSmall(usize, usize),
    #[error("invalid edge ({0}, {1})")]
    InvalidEdge(usize, usize),
    #[error("vertex {0} has a neighborhood that is neither a cycle nor a path")]
    NotWhitney(usize),
    #[error("expected {expected} sensor values, got {got}")]
    MissingValues { expected: usize, got: usize },
}

/// Fatal conditions raised while running the protocol.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("cycle message of sensor {0} did not close its neighbor ring")]
    CycleNotClosed(SensorId),
    #[error("protocol-derived neighbor order of sensor {0} disagrees with the triangulation")]
    OrderMismatch(SensorId),
    #[error("message bound of {0} exceeded in interval {1} (livelock?)")]
    MessageBound(u64, u64),
    #[error("interval {interval}: sensor {node} ended with non-integral counts {counts}")]
    NonIntegral {
        interval: u64,
        node: SensorId,
        counts: String,
    },
    #[error("scenario provides {got} values for {expected} sensors")]
    FieldSize { expected: usize, got: usize },
}

/// Scenario text parse failure, reported with its 1-based line number.
#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {kind}")]
pub struct ScenarioError {
    pub line: usize,
    pub kind: ScenarioErrorKind,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioErrorKind {
    #[error("malformed line `{0}`")]
    Malformed(String),
    #[error("unknown sensor {0}")]
    UnknownSensor(u32),
    #[error("duplicate assignment for sensor {sensor} in interval {interval}")]
    Duplicate { interval: u32, sensor: u32 },
    #[error("assignment before `grid` header")]
    MissingGrid,
    #[error("interval {0} is out of order")]
    IntervalOrder(u32),
    #[error("invalid grid: {0}")]
    Grid(String),
}
