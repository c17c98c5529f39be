//! Top-level composition: controller and converter joined through the
//! `Gate`, `Buck-loop` and `iL-vo` sockets.

use crate::buck::{instantiate_buck, CircuitParams};
use crate::controller::{instantiate_controller, ControlConfig};
use crate::error::ModelError;
use crate::kernel::{
    ColorKind, ColorSet, Emit, FireEvent, ModelTime, Monitor, Net, NetBuilder, PlaceId,
    TransitionSpec, Value,
};
use crate::trace::TraceRecord;

/// Socket places shared by the converter and the controller.
#[derive(Debug, Clone, Copy)]
pub struct Interface {
    pub gate: PlaceId,
    pub buck_loop: PlaceId,
    pub il_vo: PlaceId,
}

impl Interface {
    pub const GATE: &'static str = "Gate";
    pub const BUCK_LOOP: &'static str = "Buck-loop";
    pub const IL_VO: &'static str = "iL-vo";

    pub const GATE_COLOR: ColorSet = ColorSet::timed(ColorKind::Int);
    /// Carries the index of the next converter iteration.
    pub const BUCK_LOOP_COLOR: ColorSet = ColorSet::timed(ColorKind::Int);
    pub const IL_VO_COLOR: ColorSet = ColorSet::timed(ColorKind::Pair);

    pub fn declare(b: &mut NetBuilder) -> Result<Self, ModelError> {
        Ok(Interface {
            gate: b.add_place(Self::GATE, Self::GATE_COLOR)?,
            buck_loop: b.add_place(Self::BUCK_LOOP, Self::BUCK_LOOP_COLOR)?,
            il_vo: b.add_place(Self::IL_VO, Self::IL_VO_COLOR)?,
        })
    }

    pub fn lookup(net: &Net) -> Result<Self, ModelError> {
        Ok(Interface {
            gate: net.place_id(Self::GATE)?,
            buck_loop: net.place_id(Self::BUCK_LOOP)?,
            il_vo: net.place_id(Self::IL_VO)?,
        })
    }
}

/// Builds the closed system: controller, converter and the initial
/// `Buck-loop` token that starts iteration 0.
pub fn build_system(params: &CircuitParams, cfg: &ControlConfig) -> Result<Net, ModelError> {
    let mut b = NetBuilder::new();
    let iface = Interface::declare(&mut b)?;
    instantiate_controller(&mut b.scope("ctrl"), &iface, cfg)?;
    instantiate_buck(&mut b.scope("buck"), &iface, params, cfg.ts())?;
    b.initial_token(iface.buck_loop, Value::Int(0), ModelTime::ZERO)?;
    b.check_conflicts(true);
    Ok(b.build())
}

/// Builds the converter driven by a fixed gate sequence instead of the
/// controller: `gates[n]` is applied at tick `n`. Published samples are
/// drained by a sink so the marking stays bounded.
pub fn build_driven_converter(
    params: &CircuitParams,
    ts: f64,
    gates: Vec<u8>,
) -> Result<Net, ModelError> {
    let mut b = NetBuilder::new();
    let iface = Interface::declare(&mut b)?;
    instantiate_buck(&mut b.scope("buck"), &iface, params, ts)?;
    attach_gate_sequence(&mut b, &iface, gates)?;
    b.initial_token(iface.buck_loop, Value::Int(0), ModelTime::ZERO)?;
    b.check_conflicts(true);
    Ok(b.build())
}

/// Adds a stimulus that answers each `Buck-loop` token `n` with `gates[n]` on
/// `Gate` at tick `n`, and a sink for `iL-vo`.
pub fn attach_gate_sequence(
    b: &mut NetBuilder,
    iface: &Interface,
    gates: Vec<u8>,
) -> Result<(), ModelError> {
    let gate = iface.gate;
    let len = gates.len() as i64;
    let mut m = b.scope("stimulus");
    m.add_transition(
        TransitionSpec::new("emit")
            .consume(iface.buck_loop)
            .output(gate)
            .priority(1)
            .guard(move |v| v[0].as_int().is_some_and(|n| (0..len).contains(&n)))
            .action(move |f| {
                let n = f.int(0)?;
                let u = gates[n as usize];
                Ok(vec![Emit::new(gate, Value::Int(i64::from(u)), ModelTime(n as u64))])
            }),
    )?;
    m.add_transition(
        TransitionSpec::new("sink")
            .consume(iface.il_vo)
            .priority(-1)
            .action(|_| Ok(vec![])),
    )?;
    Ok(())
}

/// Turns gate consumption and `iL-vo` publication into trace records.
#[derive(Debug, Clone)]
pub struct ConverterProbe {
    gate: PlaceId,
    il_vo: PlaceId,
    ts: f64,
    pending_gate: Option<u8>,
    pub records: Vec<TraceRecord>,
}

impl ConverterProbe {
    pub fn new(iface: &Interface, ts: f64) -> Self {
        ConverterProbe {
            gate: iface.gate,
            il_vo: iface.il_vo,
            ts,
            pending_gate: None,
            records: Vec::new(),
        }
    }
}

impl Monitor for ConverterProbe {
    fn on_fire(&mut self, _net: &Net, event: &FireEvent) {
        for (p, tok) in &event.consumed {
            if *p == self.gate {
                self.pending_gate = tok.value.as_int().map(|u| u as u8);
            }
        }
        for (p, tok) in &event.produced {
            if *p == self.il_vo {
                let (il, vo) = tok.value.as_pair().unwrap_or((f64::NAN, f64::NAN));
                let k = event.clock.ticks();
                self.records.push(TraceRecord {
                    k,
                    t: k as f64 * self.ts,
                    inductor_current: il,
                    output_voltage: vo,
                    gate: self.pending_gate.take().unwrap_or(0),
                });
            }
        }
    }
}

/// Runs a converter net for `horizon` ticks (iterations 0..horizon) and
/// returns one record per iteration.
pub fn run_converter_net(
    net: &mut Net,
    horizon: u64,
    ts: f64,
    extra: &mut [&mut dyn Monitor],
) -> Result<Vec<TraceRecord>, ModelError> {
    if horizon == 0 {
        return Ok(Vec::new());
    }
    let iface = Interface::lookup(net)?;
    let mut probe = ConverterProbe::new(&iface, ts);
    let mut monitors: Vec<&mut dyn Monitor> = Vec::with_capacity(extra.len() + 1);
    monitors.push(&mut probe);
    for m in extra.iter_mut() {
        monitors.push(&mut **m);
    }
    net.run(ModelTime(horizon - 1), &mut monitors)?;
    Ok(probe.records)
}

/// Builds and runs the full controller/converter system.
pub fn simulate_net(
    params: &CircuitParams,
    cfg: &ControlConfig,
    horizon: u64,
) -> Result<Vec<TraceRecord>, ModelError> {
    let mut net = build_system(params, cfg)?;
    run_converter_net(&mut net, horizon, cfg.ts(), &mut [])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::buck::{
        capacitor_charge, inductor_current_update, inductor_drive, output_voltage_update,
    };
    use crate::kernel::EventLog;

    const TS: f64 = 5e-8;

    /// Sequential composition of the four step functions, outside any net.
    fn compose(gates: &[u8]) -> Vec<(f64, f64)> {
        let p = CircuitParams::REFERENCE;
        let (mut il, mut vo) = (0.0, 0.0);
        gates
            .iter()
            .map(|&u| {
                let (d, l, ts) = inductor_drive(p.input_voltage, p.inductance, u, TS);
                let next_il = inductor_current_update(d, l, vo, il, ts);
                let (q, c, r, ts) = capacitor_charge(p.capacitance, p.resistance, il, TS);
                vo = output_voltage_update(q, c, r, vo, ts);
                il = next_il;
                (il, vo)
            })
            .collect()
    }

    #[test]
    fn driven_converter_matches_composition() {
        let gates = vec![1u8; 100];
        let mut net = build_driven_converter(&CircuitParams::REFERENCE, TS, gates.clone()).unwrap();
        let trace = run_converter_net(&mut net, 100, TS, &mut []).unwrap();
        assert_eq!(trace.len(), 100);
        let expected = compose(&gates);
        for (rec, (il, vo)) in trace.iter().zip(&expected) {
            assert_eq!(rec.inductor_current.to_bits(), il.to_bits(), "k={}", rec.k);
            assert_eq!(rec.output_voltage.to_bits(), vo.to_bits(), "k={}", rec.k);
            assert_eq!(rec.gate, 1);
        }
        assert_eq!(trace.iter().map(|r| r.k).collect::<Vec<_>>(), (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn zero_gate_is_a_fixed_point() {
        let mut net = build_driven_converter(&CircuitParams::REFERENCE, TS, vec![0; 500]).unwrap();
        let trace = run_converter_net(&mut net, 500, TS, &mut []).unwrap();
        assert!(trace
            .iter()
            .all(|r| r.inductor_current == 0.0 && r.output_voltage == 0.0 && r.gate == 0));
    }

    #[test]
    fn system_runs_in_lock_step() {
        let cfg = ControlConfig::duty_ratio(200e3, 100, 0.5);
        let mut net = build_system(&CircuitParams::REFERENCE, &cfg).unwrap();
        let mut log = EventLog::default();
        let trace = run_converter_net(&mut net, 100, cfg.ts(), &mut [&mut log]).unwrap();
        assert_eq!(trace.len(), 100);
        let mux_gate = net.transition_id(crate::buck::MUX_GATE).unwrap();
        let decide = net.transition_id(crate::controller::DECIDE).unwrap();
        let cycles: Vec<u64> = log
            .events
            .iter()
            .filter(|(t, _)| *t == mux_gate)
            .map(|(_, c)| c.ticks())
            .collect();
        assert_eq!(cycles, (0..100).collect::<Vec<_>>());
        let decisions = log.events.iter().filter(|(t, _)| *t == decide).count();
        // One decision per iteration, plus the one for the next tick already taken.
        assert_eq!(decisions, 101);
    }

    #[test]
    fn zero_horizon_is_empty() {
        let cfg = ControlConfig::duty_ratio(200e3, 100, 0.5);
        assert!(simulate_net(&CircuitParams::REFERENCE, &cfg, 0).unwrap().is_empty());
    }

    #[test]
    fn exhausted_stimulus_deadlocks() {
        let mut net = build_driven_converter(&CircuitParams::REFERENCE, TS, vec![1; 5]).unwrap();
        let err = run_converter_net(&mut net, 10, TS, &mut []).unwrap_err();
        assert!(err.to_string().contains("deadlock"), "{err}");
    }
}
