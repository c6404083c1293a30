//! Microscopic dynamics.

mod law;
mod sim;

pub use law::{DensityShape, InitialLaw, Marginal};
pub use sim::{
    snapshot_moments, total_event_rate, Configuration, EventKind, EventRecord, Process, SnapshotMoments,
    OVERFLOW_LIMIT, UNDERFLOW_LIMIT,
};
