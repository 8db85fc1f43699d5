//! Discrete-event simulator for 5G NR links over LEO, MEO and GEO satellites.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calc;
pub mod channel;
pub mod config;
pub mod geometry;
pub mod harq;
pub mod phy;
pub mod presets;
pub mod sim;
pub mod sweep;
pub mod transport;

pub use channel::{Band, BandName, LinkBudgetConfig, RateTable};
pub use config::{parse_config, ConfigError, ScenarioConfig};
pub use geometry::{GroundPosition, Orbit, SatelliteState};
pub use harq::HarqEntity;
pub use phy::{Direction, Duplex, Numerology, TddPattern};
pub use transport::{Flow, FlowKind, TcpConfig, TcpSender};
pub use sim::{run, MetricsReport, RunError};
pub use presets::{reproduce_figure, FigureId};
pub use sweep::{run_sweep, SweepSpec};
