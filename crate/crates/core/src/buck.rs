//! Buck converter as two coupled kernel submodules.
//!
//! The inductor-current submodule (`IL`) and the output-voltage submodule
//! (`Vo`) each split their discretised update into a drive term and a
//! state update, evaluated by the four step functions below. One converter
//! iteration consumes one gate token, acknowledges it on `Buck-loop` and
//! publishes the updated `(iL, vo)` pair on `iL-vo`.

use log::warn;

use crate::error::{invalid, ModelError};
use crate::kernel::{
    ColorKind, ColorSet, Emit, ModelTime, Net, NetBuilder, PlaceId, Scope, TransitionSpec, Value,
};
use crate::system::Interface;

/// Electrical constants of the converter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParams {
    /// Source voltage, volts.
    pub input_voltage: f64,
    /// Henries.
    pub inductance: f64,
    /// Farads.
    pub capacitance: f64,
    /// Load resistance, ohms.
    pub resistance: f64,
}

impl CircuitParams {
    /// The hardware circuit used for all reported experiments.
    pub const REFERENCE: CircuitParams = CircuitParams {
        input_voltage: 12.0,
        inductance: 9.5e-3,
        capacitance: 20e-6,
        resistance: 2.4,
    };

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("Vi", self.input_voltage),
            ("L", self.inductance),
            ("C", self.capacitance),
            ("R", self.resistance),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Conditions under which forward Euler at step `ts` is likely unstable.
    pub fn stability_warnings(&self, ts: f64) -> Vec<String> {
        let rc = self.resistance * self.capacitance;
        let l_over_r = self.inductance / self.resistance;
        let mut out = Vec::new();
        if ts >= rc {
            out.push(format!("Ts = {ts:e} s is not below R·C = {rc:e} s"));
        }
        if ts >= l_over_r {
            out.push(format!("Ts = {ts:e} s is not below L/R = {l_over_r:e} s"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConverterState {
    /// Amperes.
    pub inductor_current: f64,
    /// Volts.
    pub output_voltage: f64,
}

impl ConverterState {
    pub const ZERO: ConverterState = ConverterState {
        inductor_current: 0.0,
        output_voltage: 0.0,
    };

    pub fn new(inductor_current: f64, output_voltage: f64) -> Self {
        ConverterState {
            inductor_current,
            output_voltage,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.inductor_current.is_finite() && self.output_voltage.is_finite()
    }
}

/// A transistor command: `on` for conduction, applied at tick `at`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateSignal {
    pub on: bool,
    pub at: ModelTime,
}

impl GateSignal {
    /// Decodes a gate token; only 0 and 1 are valid.
    pub fn from_token(value: i64, at: ModelTime) -> Result<Self, String> {
        match value {
            0 => Ok(GateSignal { on: false, at }),
            1 => Ok(GateSignal { on: true, at }),
            other => Err(format!("gate value {other} is not 0 or 1")),
        }
    }

    pub fn level(&self) -> u8 {
        u8::from(self.on)
    }
}

/// Source-driven part of the inductor current increment, `(Vi/L)·Ts` when the
/// switch conducts. `L` and `Ts` are passed through for the next stage.
#[doc(alias = "fiL_k1")]
pub fn inductor_drive(vi: f64, l: f64, u: u8, ts: f64) -> (f64, f64, f64) {
    (if u == 1 { (vi / l) * ts } else { 0.0 }, l, ts)
}

/// Next inductor current from the drive term and the output voltage back-EMF.
#[doc(alias = "fiL_k2")]
pub fn inductor_current_update(drive: f64, l: f64, vo: f64, il: f64, ts: f64) -> f64 {
    il + (drive - (vo / l) * ts)
}

/// Capacitor charging increment `(iL/C)·Ts`; `C`, `R` and `Ts` pass through.
#[doc(alias = "fvo_k1")]
pub fn capacitor_charge(c: f64, r: f64, il: f64, ts: f64) -> (f64, f64, f64, f64) {
    ((il / c) * ts, c, r, ts)
}

/// Next output voltage from the charge increment and the load discharge.
#[doc(alias = "fvo_k2")]
pub fn output_voltage_update(charge: f64, c: f64, r: f64, vo: f64, ts: f64) -> f64 {
    vo + (charge - (ts * vo / (r * c)))
}

pub(crate) const PARAMS_COLOR: ColorSet = ColorSet::untimed(ColorKind::Record(5));
const REAL: ColorSet = ColorSet::untimed(ColorKind::Real);
const UNIT: ColorSet = ColorSet::untimed(ColorKind::Unit);

pub const MUX_GATE: &str = "buck.IL.mux gate";
pub const MUX_VO: &str = "buck.Vo.mux vo";

/// Adds the converter module under `scope`, fused to the interface sockets.
pub fn instantiate_buck(
    scope: &mut Scope<'_>,
    iface: &Interface,
    params: &CircuitParams,
    ts: f64,
) -> Result<(), ModelError> {
    params.validate()?;
    if !(ts.is_finite() && ts > 0.0) {
        return Err(invalid("Ts", format!("must be finite and > 0, got {ts}")));
    }
    for w in params.stability_warnings(ts) {
        warn!("forward Euler may be unstable: {w}");
    }

    let gate = scope.port("Gate", Interface::GATE_COLOR, iface.gate)?;
    let buck_loop = scope.port("Buck-loop", Interface::BUCK_LOOP_COLOR, iface.buck_loop)?;
    let il_vo = scope.port("iL-vo", Interface::IL_VO_COLOR, iface.il_vo)?;

    let parameters = scope.add_place("Parameters", PARAMS_COLOR)?;
    scope.initial_token(
        parameters,
        Value::Record(vec![
            params.input_voltage,
            params.inductance,
            params.capacitance,
            params.resistance,
            ts,
        ]),
        ModelTime::ZERO,
    )?;
    // Sockets shared by the IL and Vo submodules.
    let il = scope.add_place("iL", REAL)?;
    let vo = scope.add_place("vo", REAL)?;
    let il_to_vo = scope.add_place("iL to Vo", REAL)?;
    scope.initial_token(il, Value::Real(0.0), ModelTime::ZERO)?;
    scope.initial_token(vo, Value::Real(0.0), ModelTime::ZERO)?;

    let il_places = add_inductor_module(&mut scope.scope("IL"), gate, buck_loop, parameters, il, vo, il_to_vo)?;
    add_voltage_module(
        &mut scope.scope("Vo"),
        parameters,
        il,
        vo,
        il_to_vo,
        il_vo,
        il_places,
    )?;
    Ok(())
}

struct InductorPlaces {
    vo_loop: PlaceId,
    il_next: PlaceId,
    next_tick: PlaceId,
}

fn add_inductor_module(
    m: &mut Scope<'_>,
    gate: PlaceId,
    buck_loop: PlaceId,
    parameters: PlaceId,
    il: PlaceId,
    vo: PlaceId,
    il_to_vo: PlaceId,
) -> Result<InductorPlaces, ModelError> {
    let il_k1 = m.add_place("iL_k1", ColorSet::untimed(ColorKind::Record(3)))?;
    let il_sum = m.add_place("iL sum", ColorSet::untimed(ColorKind::Record(4)))?;
    let il_next = m.add_place("iL next", REAL)?;
    let vo_loop = m.add_place("vo loop", REAL)?;
    // One converter iteration per tick, whatever the driver offers on Gate.
    let next_tick = m.add_place("next tick", ColorSet::timed(ColorKind::Unit))?;
    m.initial_token(next_tick, Value::Unit, ModelTime::ZERO)?;

    m.add_transition(
        TransitionSpec::new("mux gate")
            .consume(gate)
            .consume(next_tick)
            .read(parameters)
            .output(il_k1)
            .output(buck_loop)
            .action(move |f| {
                let u = GateSignal::from_token(f.int(0)?, f.now)?;
                let p = f.record(2)?;
                let (drive, l, ts) = inductor_drive(p[0], p[1], u.level(), p[4]);
                let next = f.now.ticks() as i64 + 1;
                Ok(vec![
                    Emit::new(il_k1, Value::Record(vec![drive, l, ts]), f.now),
                    Emit::new(buck_loop, Value::Int(next), f.now),
                ])
            }),
    )?;
    m.add_transition(
        TransitionSpec::new("sum iL")
            .consume(il_k1)
            .consume(il)
            .output(il_sum)
            .output(il_to_vo)
            .action(move |f| {
                let k1 = f.record(0)?;
                let current = f.real(1)?;
                Ok(vec![
                    Emit::new(il_sum, Value::Record(vec![k1[0], k1[1], k1[2], current]), f.now),
                    Emit::new(il_to_vo, Value::Real(current), f.now),
                ])
            }),
    )?;
    m.add_transition(
        TransitionSpec::new("mux Il,vo")
            .consume(il_sum)
            .consume(vo)
            .output(il_next)
            .output(vo_loop)
            .action(move |f| {
                let s = f.record(0)?;
                let voltage = f.real(1)?;
                let next = inductor_current_update(s[0], s[1], voltage, s[3], s[2]);
                if !next.is_finite() {
                    return Err(format!("non-finite inductor current at step {}", f.now.ticks()));
                }
                Ok(vec![
                    Emit::new(il_next, Value::Real(next), f.now),
                    Emit::new(vo_loop, Value::Real(voltage), f.now),
                ])
            }),
    )?;
    Ok(InductorPlaces {
        vo_loop,
        il_next,
        next_tick,
    })
}

fn add_voltage_module(
    m: &mut Scope<'_>,
    parameters: PlaceId,
    il: PlaceId,
    vo: PlaceId,
    il_to_vo: PlaceId,
    il_vo: PlaceId,
    inductor: InductorPlaces,
) -> Result<(), ModelError> {
    let ready = m.add_place("Vo ready", UNIT)?;
    m.initial_token(ready, Value::Unit, ModelTime::ZERO)?;
    let vo_k1 = m.add_place("vo_k1", ColorSet::untimed(ColorKind::Record(4)))?;
    let InductorPlaces {
        vo_loop,
        il_next,
        next_tick,
    } = inductor;

    m.add_transition(
        TransitionSpec::new("mux iL")
            .consume(ready)
            .consume(il_to_vo)
            .read(parameters)
            .output(vo_k1)
            .action(move |f| {
                let current = f.real(1)?;
                let p = f.record(2)?;
                let (charge, c, r, ts) = capacitor_charge(p[2], p[3], current, p[4]);
                Ok(vec![Emit::new(vo_k1, Value::Record(vec![charge, c, r, ts]), f.now)])
            }),
    )?;
    m.add_transition(
        TransitionSpec::new("mux vo")
            .consume(vo_k1)
            .consume(vo_loop)
            .consume(il_next)
            .output(vo)
            .output(il)
            .output(il_vo)
            .output(ready)
            .output(next_tick)
            .action(move |f| {
                let k1 = f.record(0)?;
                let voltage = f.real(1)?;
                let current = f.real(2)?;
                let next = output_voltage_update(k1[0], k1[1], k1[2], voltage, k1[3]);
                if !next.is_finite() {
                    return Err(format!("non-finite output voltage at step {}", f.now.ticks()));
                }
                Ok(vec![
                    Emit::new(vo, Value::Real(next), f.now),
                    Emit::new(il, Value::Real(current), f.now),
                    Emit::new(il_vo, Value::Pair(current, next), f.now),
                    Emit::new(ready, Value::Unit, f.now),
                    Emit::new(next_tick, Value::Unit, f.now + 1),
                ])
            }),
    )?;
    Ok(())
}

/// A standalone converter net with top-level sockets `Gate`, `Buck-loop` and `iL-vo`.
pub fn build_buck_net(params: &CircuitParams, ts: f64) -> Result<Net, ModelError> {
    let mut b = NetBuilder::new();
    let iface = Interface::declare(&mut b)?;
    instantiate_buck(&mut b.scope("buck"), &iface, params, ts)?;
    b.check_conflicts(true);
    Ok(b.build())
}
