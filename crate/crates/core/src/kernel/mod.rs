//! Deterministic execution engine for timed hierarchical coloured Petri nets.
//!
//! Places hold multisets of timed tokens, transitions bind tokens through
//! host-level guards and firing functions, and a global integer clock jumps
//! to the earliest time at which some transition becomes enabled.
//! Simultaneously enabled transitions fire in (priority, declaration) order,
//! and within a transition tokens are bound in (timestamp, insertion) order,
//! so a run is a pure function of the net construction.

mod error;
mod monitor;
mod net;
mod time;
mod value;

pub use error::KernelError;
pub use monitor::{EventLog, Monitor, PlaceMonitor, PlaceSample};
pub use net::{
    Action, Advance, ArcMode, Binding, Emit, FireEvent, Firing, Guard, Net, NetBuilder, PlaceId,
    RunReport, Scope, TransitionId, TransitionSpec,
};
pub use time::ModelTime;
pub use value::{ColorKind, ColorSet, Token, Value};
