//! Data cube materialization engines over a deterministic, message-metered
//! MapReduce simulator.
//!
//! Three engines compute the same cube:
//!
//! * [`broadcast`]: each row sends its count to every segment it belongs to.
//! * [`layered`]: one round per star level, aggregating from primary children.
//! * [`batched`]: one phase per column group, with all aggregation inside a
//!   group done by a single reducer using local messages.
//!
//! [`sim`] counts remote and local copy-add messages, outputs per key and
//! per-machine load for every phase.

pub mod batched;
pub mod broadcast;
pub mod datagen;
pub mod error;
pub mod io;
pub mod layered;
pub mod model;
pub mod sim;

pub use batched::{batched_materialize, plan_phases, Grouping, PhasePlan};
pub use broadcast::broadcast_materialize;
pub use error::{Error, Result};
pub use layered::layered_materialize;
pub use model::{Cell, Cube, Dimension, Row, Schema, SegmentKey, ValueDictionary};
pub use sim::{render_stats, RunStats, SimConfig};
