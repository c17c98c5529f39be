use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use super::error::KernelError;
use super::monitor::Monitor;
use super::time::ModelTime;
use super::value::{ColorSet, Token, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlaceId(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransitionId(pub(crate) usize);

impl PlaceId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl TransitionId {
    pub fn index(self) -> usize {
        self.0
    }
}

pub type Guard = Box<dyn Fn(&[&Value]) -> bool + Send>;
pub type Action = Box<dyn Fn(&Firing<'_>) -> Result<Vec<Emit>, String> + Send>;

/// What a firing function sees: the bound input values in arc order and the clock.
pub struct Firing<'a> {
    pub values: &'a [&'a Value],
    pub now: ModelTime,
}

impl Firing<'_> {
    fn get(&self, i: usize) -> Result<&Value, String> {
        self.values
            .get(i)
            .copied()
            .ok_or_else(|| format!("no bound value at position {i}"))
    }

    pub fn int(&self, i: usize) -> Result<i64, String> {
        let v = self.get(i)?;
        v.as_int()
            .ok_or_else(|| format!("value {i} is {}, expected int", v.kind_name()))
    }

    pub fn real(&self, i: usize) -> Result<f64, String> {
        let v = self.get(i)?;
        v.as_real()
            .ok_or_else(|| format!("value {i} is {}, expected real", v.kind_name()))
    }

    pub fn pair(&self, i: usize) -> Result<(f64, f64), String> {
        let v = self.get(i)?;
        v.as_pair()
            .ok_or_else(|| format!("value {i} is {}, expected real*real", v.kind_name()))
    }

    pub fn record(&self, i: usize) -> Result<&[f64], String> {
        let v = self.get(i)?;
        v.as_record()
            .ok_or_else(|| format!("value {i} is {}, expected record", v.kind_name()))
    }
}

/// A token produced by a firing function.
#[derive(Debug, Clone, PartialEq)]
pub struct Emit {
    pub place: PlaceId,
    pub value: Value,
    pub at: ModelTime,
}

impl Emit {
    pub fn new(place: PlaceId, value: Value, at: ModelTime) -> Self {
        Emit { place, value, at }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcMode {
    Consume,
    /// Double arc: the token must be present but stays in place.
    Read,
}

#[derive(Debug, Clone, Copy)]
struct InputArc {
    place: PlaceId,
    arity: usize,
    mode: ArcMode,
}

/// Declarative description of a transition, handed to [`NetBuilder::add_transition`].
pub struct TransitionSpec {
    name: String,
    inputs: Vec<InputArc>,
    outputs: Vec<PlaceId>,
    guard: Option<Guard>,
    action: Option<Action>,
    priority: i32,
}

impl TransitionSpec {
    pub fn new(name: impl Into<String>) -> Self {
        TransitionSpec {
            name: name.into(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            guard: None,
            action: None,
            priority: 0,
        }
    }

    pub fn consume(self, place: PlaceId) -> Self {
        self.consume_n(place, 1)
    }

    pub fn consume_n(mut self, place: PlaceId, arity: usize) -> Self {
        self.inputs.push(InputArc {
            place,
            arity,
            mode: ArcMode::Consume,
        });
        self
    }

    pub fn read(mut self, place: PlaceId) -> Self {
        self.inputs.push(InputArc {
            place,
            arity: 1,
            mode: ArcMode::Read,
        });
        self
    }

    pub fn output(mut self, place: PlaceId) -> Self {
        self.outputs.push(place);
        self
    }

    /// Lower values fire first among simultaneously enabled transitions.
    pub fn priority(mut self, priority: i32) -> Self {
        self.priority = priority;
        self
    }

    pub fn guard(mut self, guard: impl Fn(&[&Value]) -> bool + Send + 'static) -> Self {
        self.guard = Some(Box::new(guard));
        self
    }

    pub fn action(
        mut self,
        action: impl Fn(&Firing<'_>) -> Result<Vec<Emit>, String> + Send + 'static,
    ) -> Self {
        self.action = Some(Box::new(action));
        self
    }
}

struct Transition {
    name: String,
    inputs: Vec<InputArc>,
    outputs: Vec<PlaceId>,
    guard: Option<Guard>,
    action: Action,
    priority: i32,
}

#[derive(Debug, Clone)]
struct Place {
    name: String,
    color: ColorSet,
    /// Kept sorted by (timestamp, seq).
    tokens: Vec<Token>,
}

impl Place {
    fn insert(&mut self, token: Token) {
        let key = (token.timestamp, token.seq);
        let pos = self.tokens.partition_point(|t| (t.timestamp, t.seq) < key);
        self.tokens.insert(pos, token);
    }

    fn available(&self, at: ModelTime) -> usize {
        self.tokens.partition_point(|t| t.timestamp <= at)
    }

    fn position(&self, seq: u64) -> Option<usize> {
        self.tokens.iter().position(|t| t.seq == seq)
    }
}

fn check_color(place: &Place, value: &Value) -> Result<(), KernelError> {
    if place.color.admits(value) {
        Ok(())
    } else {
        Err(KernelError::ColorMismatch {
            place: place.name.clone(),
            expected: place.color.to_string(),
            found: value.kind_name(),
        })
    }
}

/// The tokens chosen for one enabling of a transition, in arc order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub picks: Vec<(PlaceId, u64)>,
}

/// Everything that changed in one transition occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct FireEvent {
    pub transition: TransitionId,
    pub clock: ModelTime,
    pub consumed: Vec<(PlaceId, Token)>,
    pub produced: Vec<(PlaceId, Token)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Advance {
    To(ModelTime),
    Deadlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunReport {
    pub fires: u64,
    pub clock: ModelTime,
}

/// Incremental construction of a [`Net`], including port/socket fusion.
#[derive(Default)]
pub struct NetBuilder {
    places: Vec<Place>,
    names: HashMap<String, PlaceId>,
    transitions: Vec<Transition>,
    transition_names: HashSet<String>,
    next_seq: u64,
    conflict_check: bool,
}

impl NetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_place(&mut self, name: &str, color: ColorSet) -> Result<PlaceId, KernelError> {
        if self.names.contains_key(name) {
            return Err(KernelError::DuplicatePlace(name.to_string()));
        }
        let id = PlaceId(self.places.len());
        self.places.push(Place {
            name: name.to_string(),
            color,
            tokens: Vec::new(),
        });
        self.names.insert(name.to_string(), id);
        Ok(id)
    }

    /// Makes `port` another name for `socket`; both names resolve to one place.
    pub fn fuse(&mut self, port: &str, socket: PlaceId) -> Result<PlaceId, KernelError> {
        if self.names.contains_key(port) {
            return Err(KernelError::DuplicatePlace(port.to_string()));
        }
        if socket.0 >= self.places.len() {
            return Err(KernelError::UnknownPlace(format!("#{}", socket.0)));
        }
        self.names.insert(port.to_string(), socket);
        Ok(socket)
    }

    pub fn place_id(&self, name: &str) -> Result<PlaceId, KernelError> {
        self.names
            .get(name)
            .copied()
            .ok_or_else(|| KernelError::UnknownPlace(name.to_string()))
    }

    pub fn color(&self, place: PlaceId) -> ColorSet {
        self.places[place.0].color
    }

    pub fn initial_token(
        &mut self,
        place: PlaceId,
        value: Value,
        timestamp: ModelTime,
    ) -> Result<(), KernelError> {
        let p = self
            .places
            .get_mut(place.0)
            .ok_or_else(|| KernelError::UnknownPlace(format!("#{}", place.0)))?;
        check_color(p, &value)?;
        let timestamp = if p.color.timed { timestamp } else { ModelTime::ZERO };
        p.insert(Token {
            value,
            timestamp,
            seq: self.next_seq,
        });
        self.next_seq += 1;
        Ok(())
    }

    pub fn add_transition(&mut self, spec: TransitionSpec) -> Result<TransitionId, KernelError> {
        if !self.transition_names.insert(spec.name.clone()) {
            return Err(KernelError::DuplicateTransition(spec.name));
        }
        let action = spec
            .action
            .ok_or_else(|| KernelError::MissingAction(spec.name.clone()))?;
        let n = self.places.len();
        let arcs = spec.inputs.iter().map(|a| a.place).chain(spec.outputs.iter().copied());
        for p in arcs {
            if p.0 >= n {
                return Err(KernelError::UnknownPlace(format!("#{} (in {})", p.0, spec.name)));
            }
        }
        let id = TransitionId(self.transitions.len());
        self.transitions.push(Transition {
            name: spec.name,
            inputs: spec.inputs,
            outputs: spec.outputs,
            guard: spec.guard,
            action,
            priority: spec.priority,
        });
        Ok(id)
    }

    /// Report overlapping consumption between simultaneously enabled bindings as an error.
    pub fn check_conflicts(&mut self, on: bool) {
        self.conflict_check = on;
    }

    pub fn scope(&mut self, prefix: &str) -> Scope<'_> {
        Scope {
            builder: self,
            prefix: prefix.to_string(),
        }
    }

    pub fn build(self) -> Net {
        let mut order: Vec<usize> = (0..self.transitions.len()).collect();
        order.sort_by_key(|&i| (self.transitions[i].priority, i));
        Net {
            places: self.places,
            names: self.names,
            transitions: self.transitions,
            order,
            clock: ModelTime::ZERO,
            next_seq: self.next_seq,
            conflict_check: self.conflict_check,
        }
    }
}

/// A named sub-module view of a builder: every place and transition name is
/// prefixed with `<prefix>.`.
pub struct Scope<'a> {
    builder: &'a mut NetBuilder,
    prefix: String,
}

impl Scope<'_> {
    pub fn qualify(&self, name: &str) -> String {
        format!("{}.{}", self.prefix, name)
    }

    pub fn add_place(&mut self, name: &str, color: ColorSet) -> Result<PlaceId, KernelError> {
        let q = self.qualify(name);
        self.builder.add_place(&q, color)
    }

    /// Declares a port place of this module and fuses it with a socket of the parent.
    pub fn port(
        &mut self,
        name: &str,
        color: ColorSet,
        socket: PlaceId,
    ) -> Result<PlaceId, KernelError> {
        let q = self.qualify(name);
        let found = self.builder.color(socket);
        if found != color {
            return Err(KernelError::PortColor {
                port: q,
                expected: color.to_string(),
                socket: found.to_string(),
            });
        }
        self.builder.fuse(&q, socket)
    }

    pub fn initial_token(
        &mut self,
        place: PlaceId,
        value: Value,
        timestamp: ModelTime,
    ) -> Result<(), KernelError> {
        self.builder.initial_token(place, value, timestamp)
    }

    pub fn add_transition(&mut self, mut spec: TransitionSpec) -> Result<TransitionId, KernelError> {
        spec.name = self.qualify(&spec.name);
        self.builder.add_transition(spec)
    }

    pub fn scope(&mut self, prefix: &str) -> Scope<'_> {
        let prefix = self.qualify(prefix);
        Scope {
            builder: &mut *self.builder,
            prefix,
        }
    }
}

/// A timed, hierarchical coloured Petri net with a deterministic scheduler.
pub struct Net {
    places: Vec<Place>,
    names: HashMap<String, PlaceId>,
    transitions: Vec<Transition>,
    /// Transition indices sorted by (priority, declaration order).
    order: Vec<usize>,
    clock: ModelTime,
    next_seq: u64,
    conflict_check: bool,
}

impl Net {
    pub fn clock(&self) -> ModelTime {
        self.clock
    }

    pub fn place_id(&self, name: &str) -> Result<PlaceId, KernelError> {
        self.names
            .get(name)
            .copied()
            .ok_or_else(|| KernelError::UnknownPlace(name.to_string()))
    }

    pub fn transition_id(&self, name: &str) -> Option<TransitionId> {
        self.transitions
            .iter()
            .position(|t| t.name == name)
            .map(TransitionId)
    }

    pub fn place_name(&self, id: PlaceId) -> &str {
        &self.places[id.0].name
    }

    pub fn transition_name(&self, id: TransitionId) -> &str {
        &self.transitions[id.0].name
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn tokens(&self, place: PlaceId) -> &[Token] {
        &self.places[place.0].tokens
    }

    pub fn marking(&self, name: &str) -> Result<&[Token], KernelError> {
        Ok(self.tokens(self.place_id(name)?))
    }

    pub fn token_count(&self) -> usize {
        self.places.iter().map(|p| p.tokens.len()).sum()
    }

    pub fn add_token(
        &mut self,
        place: &str,
        value: Value,
        timestamp: ModelTime,
    ) -> Result<(), KernelError> {
        let id = self.place_id(place)?;
        self.insert(id, value, timestamp).map(|_| ())
    }

    fn insert(
        &mut self,
        id: PlaceId,
        value: Value,
        timestamp: ModelTime,
    ) -> Result<Token, KernelError> {
        let place = &mut self.places[id.0];
        check_color(place, &value)?;
        let timestamp = if place.color.timed { timestamp } else { ModelTime::ZERO };
        let token = Token {
            value,
            timestamp,
            seq: self.next_seq,
        };
        self.next_seq += 1;
        place.insert(token.clone());
        Ok(token)
    }

    /// First enabled binding of transition `t` at time `at`, in (timestamp, seq) order.
    fn find_binding(&self, t: usize, at: ModelTime) -> Option<Binding> {
        let tr = &self.transitions[t];
        // Flatten arcs into one slot per required token.
        let mut slots: Vec<(PlaceId, bool)> = Vec::new();
        for arc in &tr.inputs {
            if self.places[arc.place.0].available(at) < arc.arity {
                return None;
            }
            for j in 0..arc.arity {
                slots.push((arc.place, j > 0));
            }
        }
        let mut chosen: Vec<usize> = Vec::with_capacity(slots.len());
        if self.search(tr, at, &slots, &mut chosen) {
            Some(Binding {
                picks: slots
                    .iter()
                    .zip(&chosen)
                    .map(|(&(p, _), &i)| (p, self.places[p.0].tokens[i].seq))
                    .collect(),
            })
        } else {
            None
        }
    }

    fn search(
        &self,
        tr: &Transition,
        at: ModelTime,
        slots: &[(PlaceId, bool)],
        chosen: &mut Vec<usize>,
    ) -> bool {
        let depth = chosen.len();
        if depth == slots.len() {
            return match &tr.guard {
                None => true,
                Some(g) => {
                    let values: Vec<&Value> = slots
                        .iter()
                        .zip(chosen.iter())
                        .map(|(&(p, _), &i)| &self.places[p.0].tokens[i].value)
                        .collect();
                    g(&values)
                }
            };
        }
        let (place, continues_arc) = slots[depth];
        let start = if continues_arc { chosen[depth - 1] + 1 } else { 0 };
        let end = self.places[place.0].available(at);
        for i in start..end {
            let taken = slots[..depth]
                .iter()
                .zip(chosen.iter())
                .any(|(&(p, _), &c)| p == place && c == i);
            if taken {
                continue;
            }
            chosen.push(i);
            if self.search(tr, at, slots, chosen) {
                return true;
            }
            chosen.pop();
        }
        false
    }

    /// Every transition with an enabled binding at the current clock, in scheduling order.
    pub fn enabled_transitions(&self) -> Vec<(TransitionId, Binding)> {
        self.order
            .iter()
            .filter_map(|&t| self.find_binding(t, self.clock).map(|b| (TransitionId(t), b)))
            .collect()
    }

    fn any_enabled_at(&self, at: ModelTime) -> Option<usize> {
        self.order
            .iter()
            .copied()
            .find(|&t| self.find_binding(t, at).is_some())
    }

    fn consumed_keys(&self, t: TransitionId, b: &Binding) -> Vec<(PlaceId, u64)> {
        let tr = &self.transitions[t.0];
        let mut keys = Vec::new();
        let mut k = 0;
        for arc in &tr.inputs {
            for _ in 0..arc.arity {
                if arc.mode == ArcMode::Consume {
                    keys.push(b.picks[k]);
                }
                k += 1;
            }
        }
        keys
    }

    /// The binding the scheduler would fire next at the current clock.
    pub fn next_firing(&self) -> Result<Option<(TransitionId, Binding)>, KernelError> {
        if !self.conflict_check {
            return Ok(self.order.iter().find_map(|&t| {
                self.find_binding(t, self.clock)
                    .map(|b| (TransitionId(t), b))
            }));
        }
        let enabled = self.enabled_transitions();
        for (i, (ta, ba)) in enabled.iter().enumerate() {
            let ka = self.consumed_keys(*ta, ba);
            for (tb, bb) in &enabled[i + 1..] {
                let kb = self.consumed_keys(*tb, bb);
                if ka.iter().any(|k| kb.contains(k)) {
                    return Err(KernelError::Conflict {
                        first: self.transition_name(*ta).to_string(),
                        second: self.transition_name(*tb).to_string(),
                        clock: self.clock,
                    });
                }
            }
        }
        Ok(enabled.into_iter().next())
    }

    /// Fires `binding` of transition `t`. The clock does not move.
    pub fn fire(&mut self, t: TransitionId, binding: &Binding) -> Result<FireEvent, KernelError> {
        let name = || self.transitions[t.0].name.clone();
        let tr = self
            .transitions
            .get(t.0)
            .ok_or_else(|| KernelError::UnknownTransition(format!("#{}", t.0)))?;
        let expected: usize = tr.inputs.iter().map(|a| a.arity).sum();
        if binding.picks.len() != expected {
            return Err(KernelError::NotEnabled { transition: name() });
        }

        // Resolve picks to token positions, checking arc places and availability.
        let mut positions = Vec::with_capacity(expected);
        let mut k = 0;
        for arc in &tr.inputs {
            for _ in 0..arc.arity {
                let (p, seq) = binding.picks[k];
                k += 1;
                let place = &self.places[p.0];
                let pos = match place.position(seq) {
                    Some(pos) if p == arc.place => pos,
                    _ => return Err(KernelError::NotEnabled { transition: name() }),
                };
                if place.tokens[pos].timestamp > self.clock || positions.contains(&(p, pos)) {
                    return Err(KernelError::NotEnabled { transition: name() });
                }
                positions.push((p, pos));
            }
        }
        let values: Vec<&Value> = positions
            .iter()
            .map(|&(p, pos)| &self.places[p.0].tokens[pos].value)
            .collect();
        if let Some(g) = &tr.guard {
            if !g(&values) {
                return Err(KernelError::NotEnabled { transition: name() });
            }
        }

        let emits = (tr.action)(&Firing {
            values: &values,
            now: self.clock,
        })
        .map_err(|message| KernelError::Firing {
            transition: name(),
            clock: self.clock,
            message,
        })?;
        for e in &emits {
            if !tr.outputs.contains(&e.place) {
                return Err(KernelError::UndeclaredOutput {
                    transition: name(),
                    place: self.places[e.place.0].name.clone(),
                });
            }
            check_color(&self.places[e.place.0], &e.value)?;
            if self.places[e.place.0].color.timed && e.at < self.clock {
                return Err(KernelError::PastTimestamp {
                    transition: name(),
                    place: self.places[e.place.0].name.clone(),
                    at: e.at,
                    now: self.clock,
                });
            }
        }

        // Commit: remove consumed tokens, then add outputs.
        let consumed_keys = self.consumed_keys(t, binding);
        let mut consumed = Vec::with_capacity(consumed_keys.len());
        for (p, seq) in consumed_keys {
            let place = &mut self.places[p.0];
            let pos = place.position(seq).expect("binding validated above");
            consumed.push((p, place.tokens.remove(pos)));
        }
        let mut produced = Vec::with_capacity(emits.len());
        for e in emits {
            let token = self.insert(e.place, e.value, e.at)?;
            produced.push((e.place, token));
        }
        Ok(FireEvent {
            transition: t,
            clock: self.clock,
            consumed,
            produced,
        })
    }

    /// Moves the clock to the earliest future time at which some transition is enabled.
    pub fn advance_clock(&mut self) -> Result<Advance, KernelError> {
        if let Some(t) = self.any_enabled_at(self.clock) {
            return Err(KernelError::AdvanceWhileEnabled {
                transition: self.transitions[t].name.clone(),
                clock: self.clock,
            });
        }
        let future: BTreeSet<ModelTime> = self
            .places
            .iter()
            .flat_map(|p| p.tokens.iter().map(|t| t.timestamp))
            .filter(|&ts| ts > self.clock)
            .collect();
        for at in future {
            if self.any_enabled_at(at).is_some() {
                self.clock = at;
                return Ok(Advance::To(at));
            }
        }
        Ok(Advance::Deadlock)
    }

    /// Fires and advances until the clock passes `until`, notifying monitors after every
    /// occurrence. A dead marking reached before `until` is an error.
    pub fn run(
        &mut self,
        until: ModelTime,
        monitors: &mut [&mut dyn Monitor],
    ) -> Result<RunReport, KernelError> {
        if until < self.clock {
            return Err(KernelError::InvalidHorizon {
                until,
                clock: self.clock,
            });
        }
        let mut fires = 0u64;
        loop {
            match self.next_firing()? {
                Some((t, binding)) => {
                    let event = self.fire(t, &binding)?;
                    fires += 1;
                    for m in monitors.iter_mut() {
                        m.on_fire(self, &event);
                    }
                }
                None => {
                    if self.clock >= until {
                        break;
                    }
                    match self.advance_clock()? {
                        Advance::To(at) if at > until => break,
                        Advance::To(_) => {}
                        Advance::Deadlock => {
                            return Err(KernelError::Deadlock {
                                clock: self.clock,
                                marking: self.marking_summary(),
                            })
                        }
                    }
                }
            }
        }
        Ok(RunReport {
            fires,
            clock: self.clock,
        })
    }

    /// One line per non-empty place: `name: v@t, ...`.
    pub fn marking_summary(&self) -> String {
        let mut out = String::new();
        for p in &self.places {
            if p.tokens.is_empty() {
                continue;
            }
            let _ = write!(out, "{}:", p.name);
            for t in &p.tokens {
                let _ = write!(out, " {}{}", t.value, t.timestamp);
            }
            out.push('\n');
        }
        if out.is_empty() {
            out.push_str("(empty)\n");
        }
        out
    }
}
