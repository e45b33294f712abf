//! Deterministic simulator for distributed state-of-charge balancing and
//! power tracking in a networked battery energy storage system.
//!
//! Battery units coordinate over an undirected communication graph: each unit
//! runs a dynamic-average-consensus estimator for the network-average unit
//! state and a leader-follower estimator for the average desired power, and
//! allocates its own power from those local estimates. Two schemes are
//! implemented end to end:
//!
//! * **plain** — estimates are exchanged as-is;
//! * **privacy** — the state estimator runs on decomposed sub-states (only
//!   the alpha half is ever transmitted) and both estimators converge to
//!   scaled versions of the true averages, so an eavesdropper never sees the
//!   real quantities.
//!
//! An eavesdropper observer fed only by transmitted signals quantifies how
//! much either scheme actually leaks.
//!
//! Entry points: [`engine::run`] integrates a [`scenario::Scenario`] and
//! returns a [`engine::Trace`]; [`config`] parses scenario files and embeds
//! the replication presets.

pub mod adversary;
pub mod allocator;
pub mod config;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod plant;
pub mod scenario;
pub mod topology;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use plant::{BatteryParams, BatteryState, OperatingMode, TimeUnit};
pub use scenario::{PowerProfile, Scenario, Scheme};
pub use topology::Topology;
