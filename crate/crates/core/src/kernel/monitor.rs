use super::net::{FireEvent, Net, PlaceId, TransitionId};
use super::time::ModelTime;
use super::value::Token;

/// Observer notified after every transition occurrence during [`Net::run`].
pub trait Monitor {
    fn on_fire(&mut self, net: &Net, event: &FireEvent);
}

/// Records the (transition, clock) sequence of a run.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct EventLog {
    pub events: Vec<(TransitionId, ModelTime)>,
}

impl Monitor for EventLog {
    fn on_fire(&mut self, _net: &Net, event: &FireEvent) {
        self.events.push((event.transition, event.clock));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaceSample {
    pub clock: ModelTime,
    pub place: PlaceId,
    pub tokens: Vec<Token>,
}

/// Samples the marking of the watched places after each occurrence that touched them.
#[derive(Debug, Clone)]
pub struct PlaceMonitor {
    watched: Vec<PlaceId>,
    pub samples: Vec<PlaceSample>,
}

impl PlaceMonitor {
    pub fn new(watched: Vec<PlaceId>) -> Self {
        PlaceMonitor {
            watched,
            samples: Vec::new(),
        }
    }
}

impl Monitor for PlaceMonitor {
    fn on_fire(&mut self, net: &Net, event: &FireEvent) {
        for &p in &self.watched {
            let touched = event
                .consumed
                .iter()
                .chain(&event.produced)
                .any(|(q, _)| *q == p);
            if touched {
                self.samples.push(PlaceSample {
                    clock: event.clock,
                    place: p,
                    tokens: net.tokens(p).to_vec(),
                });
            }
        }
    }
}
