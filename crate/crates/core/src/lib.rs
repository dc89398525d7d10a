//! Deterministic sensor-network simulator for distributed detection of
//! topological events in thresholded scalar fields.
//!
//! Sensors sit on the vertices of a planar triangulation. Each interval they
//! sample a field, and sensors whose thresholded value flips classify the
//! local change by querying their neighbor ring. They then spread update
//! messages that keep per-region vertex, edge and face counts current, so
//! every active sensor knows the Betti numbers of its region.

pub mod complex;
pub mod engine;
pub mod error;
pub mod node;
pub mod protocol;
pub mod scenario;
pub mod sweep;
pub mod verify;

pub use complex::{build_hex_grid, BettiPair, ComponentInfo, SubComplex, Triangulation};
pub use error::{EngineError, ScenarioError, ScenarioErrorKind, TopologyError};
pub use protocol::{ComponentId, Counts, EventId, Message, MessageKind, SensorId};
