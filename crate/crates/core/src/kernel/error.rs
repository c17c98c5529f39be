use thiserror::Error;

use super::time::ModelTime;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("unknown place {0}")]
    UnknownPlace(String),
    #[error("unknown transition {0}")]
    UnknownTransition(String),
    #[error("duplicate place id {0}")]
    DuplicatePlace(String),
    #[error("duplicate transition id {0}")]
    DuplicateTransition(String),
    #[error("transition {0} has no firing function")]
    MissingAction(String),
    #[error("colour mismatch on place {place}: expected {expected}, got {found}")]
    ColorMismatch {
        place: String,
        expected: String,
        found: &'static str,
    },
    #[error("port {port} declared as {expected} but socket is {socket}")]
    PortColor {
        port: String,
        expected: String,
        socket: String,
    },
    #[error("transition {transition} produced to undeclared place {place}")]
    UndeclaredOutput { transition: String, place: String },
    #[error("transition {transition} produced to {place} at {at}, before the clock {now}")]
    PastTimestamp {
        transition: String,
        place: String,
        at: ModelTime,
        now: ModelTime,
    },
    #[error("binding of transition {transition} is not enabled")]
    NotEnabled { transition: String },
    #[error("clock advance requested at {clock} while {transition} is enabled")]
    AdvanceWhileEnabled {
        transition: String,
        clock: ModelTime,
    },
    #[error("transition {transition} failed at {clock}: {message}")]
    Firing {
        transition: String,
        clock: ModelTime,
        message: String,
    },
    #[error("transitions {first} and {second} compete for the same token at {clock}")]
    Conflict {
        first: String,
        second: String,
        clock: ModelTime,
    },
    #[error("deadlock at {clock}; marking:\n{marking}")]
    Deadlock { clock: ModelTime, marking: String },
    #[error("horizon {until} lies before the clock {clock}")]
    InvalidHorizon { until: ModelTime, clock: ModelTime },
}
