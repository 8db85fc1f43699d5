//! Discrete-event engine and its plumbing.

pub mod engine;
pub mod event;
pub mod metrics;
pub mod placement;
pub mod rng;

pub use engine::{rtt_for, run, CellGeometry, RunError};
pub use event::{EventQueue, SimTime};
pub use metrics::{write_csv, FlowReport, MetricsReport, CSV_COLUMNS};
pub use placement::place_ues;
pub use rng::rng_stream;
