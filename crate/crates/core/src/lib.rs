//! No-wait schedule synthesis for periodic streams on a daisy chain of
//! switches.
//!
//! Each direction of the chain is scheduled independently. A stream from
//! switch `a` to switch `b` occupies the egress ports of links `a..b`, one
//! forwarding slot per hop, so a schedule is an assignment of *layers* to
//! stream replications such that overlapping streams never share a layer.
//! [`feasibility::decide`] tests existence in linear time and
//! [`coloring::find`] builds one by recursive halving of the hyperperiod.

pub mod bench;
pub mod coloring;
pub mod error;
pub mod feasibility;
pub mod gen;
pub mod model;
pub mod oracle;
pub mod partition;
pub mod schedule;
pub mod validator;

pub use coloring::{find, find_with, FindOptions, GoodColoring};
pub use error::{Error, Result};
pub use feasibility::{decide, load_profile, Feasibility};
pub use model::{Direction, Instance, InstanceFile, Normalized, PeriodPolicy, Stream, Topology};
pub use schedule::{synthesize, Schedule, ScheduleDocument};
pub use validator::{validate, ValidationReport};
