//! Embedded controller: a sensing pipeline with per-register CPU delays and
//! the gate decision logic (duty-ratio PWM, voltage reference, current limit).

use crate::buck::ConverterState;
use crate::error::{invalid, ModelError};
use crate::kernel::{
    ColorKind, ColorSet, Emit, ModelTime, Net, NetBuilder, Scope, TransitionSpec, Value,
};
use crate::system::Interface;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMode {
    /// Fixed-duty PWM; only the current limit can block the gate.
    DutyRatio,
    /// Gate on while the sensed output voltage is below the reference.
    VoltageReference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlConfig {
    /// Hz.
    pub switching_frequency: f64,
    /// Simulation ticks per switching period.
    pub ticks_per_period: u32,
    pub duty: f64,
    pub mode: ControlMode,
    /// Volts.
    pub voltage_reference: f64,
    /// Amperes; `f64::INFINITY` disables the protection.
    pub current_limit: f64,
    pub pipeline_stages: u32,
    pub cpu_clk_ticks: u32,
}

impl ControlConfig {
    pub const DEFAULT_PIPELINE_STAGES: u32 = 2;
    pub const DEFAULT_CPU_CLK_TICKS: u32 = 1;

    pub fn duty_ratio(switching_frequency: f64, ticks_per_period: u32, duty: f64) -> Self {
        ControlConfig {
            switching_frequency,
            ticks_per_period,
            duty,
            mode: ControlMode::DutyRatio,
            voltage_reference: 0.0,
            current_limit: f64::INFINITY,
            pipeline_stages: Self::DEFAULT_PIPELINE_STAGES,
            cpu_clk_ticks: Self::DEFAULT_CPU_CLK_TICKS,
        }
    }

    pub fn voltage_reference(
        switching_frequency: f64,
        ticks_per_period: u32,
        voltage_reference: f64,
        current_limit: f64,
    ) -> Self {
        ControlConfig {
            mode: ControlMode::VoltageReference,
            voltage_reference,
            current_limit,
            ..Self::duty_ratio(switching_frequency, ticks_per_period, 1.0)
        }
    }

    /// Tick length in seconds: one switching period divided into `ticks_per_period` steps.
    pub fn ts(&self) -> f64 {
        1.0 / (self.switching_frequency * f64::from(self.ticks_per_period))
    }

    /// Ticks from a converter sample to its availability in the control registers.
    pub fn sensing_latency(&self) -> u64 {
        (u64::from(self.pipeline_stages) + 1) * u64::from(self.cpu_clk_ticks)
    }

    /// Number of conducting slots per switching period in duty-ratio mode.
    pub fn on_slots(&self) -> u64 {
        match self.mode {
            ControlMode::DutyRatio => (self.duty * f64::from(self.ticks_per_period)).round() as u64,
            ControlMode::VoltageReference => u64::from(self.ticks_per_period),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.switching_frequency.is_finite() && self.switching_frequency > 0.0) {
            return Err(invalid("fsw", "must be finite and > 0"));
        }
        if self.ticks_per_period < 2 {
            return Err(invalid("Tsf", "Tsf ≥ 2 required"));
        }
        if !(0.0..=1.0).contains(&self.duty) {
            return Err(invalid("duty", "duty out of [0,1]"));
        }
        if !self.voltage_reference.is_finite() {
            return Err(invalid("VREF", "must be finite"));
        }
        if self.current_limit.is_nan() {
            return Err(invalid("ILIM", "must be a number"));
        }
        if self.cpu_clk_ticks == 0 {
            return Err(invalid("cpu_clk_ticks", "must be ≥ 1"));
        }
        Ok(())
    }

    fn to_record(self) -> Value {
        let mode = match self.mode {
            ControlMode::DutyRatio => 0.0,
            ControlMode::VoltageReference => 1.0,
        };
        Value::Record(vec![
            self.switching_frequency,
            f64::from(self.ticks_per_period),
            self.duty,
            mode,
            self.voltage_reference,
            self.current_limit,
        ])
    }

    fn from_record(r: &[f64], template: &ControlConfig) -> ControlConfig {
        ControlConfig {
            switching_frequency: r[0],
            ticks_per_period: r[1] as u32,
            duty: r[2],
            mode: if r[3] == 0.0 {
                ControlMode::DutyRatio
            } else {
                ControlMode::VoltageReference
            },
            voltage_reference: r[4],
            current_limit: r[5],
            ..*template
        }
    }
}

/// A converter sample as seen by the control logic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensedPair {
    pub inductor_current: f64,
    pub output_voltage: f64,
    pub available_at: ModelTime,
}

/// Ideal conditioning: values pass unchanged, delayed by the register
/// transfers and the control logic's pull request.
pub fn xadc_pipeline(
    sample: ConverterState,
    sampled_at: ModelTime,
    cfg: &ControlConfig,
) -> SensedPair {
    SensedPair {
        inductor_current: sample.inductor_current,
        output_voltage: sample.output_voltage,
        available_at: sampled_at + cfg.sensing_latency(),
    }
}

/// Whether the control logic lets the gate conduct. Comparisons are strict, so
/// reaching a threshold blocks the gate. The current limit applies in every mode.
pub fn gate_enable(sensed: &SensedPair, cfg: &ControlConfig) -> bool {
    let below_limit = sensed.inductor_current < cfg.current_limit;
    match cfg.mode {
        ControlMode::DutyRatio => below_limit,
        ControlMode::VoltageReference => sensed.output_voltage < cfg.voltage_reference && below_limit,
    }
}

/// PWM output for tick `now`: the first `on_slots` ticks of each switching
/// period conduct, provided `gate` allows it.
pub fn modulation(cfg: &ControlConfig, gate: bool, now: ModelTime) -> u8 {
    let slot = now.ticks() % u64::from(cfg.ticks_per_period);
    u8::from(gate && slot < cfg.on_slots())
}

const REAL: ColorSet = ColorSet::untimed(ColorKind::Real);
const SAMPLE: ColorSet = ColorSet::timed(ColorKind::Pair);

pub const DECIDE: &str = "ctrl.Logic.decide";

/// Adds the controller module under `scope`, fused to the interface sockets.
///
/// Sensing transitions run at priority -1 so a sample that becomes available
/// at tick `n` is latched before the decision taken at `n`.
pub fn instantiate_controller(
    scope: &mut Scope<'_>,
    iface: &Interface,
    cfg: &ControlConfig,
) -> Result<(), ModelError> {
    cfg.validate()?;
    let il_vo = scope.port("iL-vo", Interface::IL_VO_COLOR, iface.il_vo)?;
    let buck_loop = scope.port("Buck-loop", Interface::BUCK_LOOP_COLOR, iface.buck_loop)?;
    let gate = scope.port("Gate", Interface::GATE_COLOR, iface.gate)?;

    let parameters = scope.add_place("Parameters", ColorSet::untimed(ColorKind::Record(6)))?;
    scope.initial_token(parameters, cfg.to_record(), ModelTime::ZERO)?;
    let control_il = scope.add_place("Control iL", REAL)?;
    let control_vo = scope.add_place("Control Vo", REAL)?;
    scope.initial_token(control_il, Value::Real(0.0), ModelTime::ZERO)?;
    scope.initial_token(control_vo, Value::Real(0.0), ModelTime::ZERO)?;

    {
        let mut x = scope.scope("XADC");
        let cpu = u64::from(cfg.cpu_clk_ticks);
        let register_in = x.add_place("Register in", SAMPLE)?;
        x.add_transition(
            TransitionSpec::new("Input read")
                .consume(il_vo)
                .output(register_in)
                .priority(-1)
                .action(move |f| Ok(vec![Emit::new(register_in, f.values[0].clone(), f.now)])),
        )?;
        let mut previous = register_in;
        for stage in 1..=cfg.pipeline_stages {
            let next = x.add_place(&format!("Stage {stage}"), SAMPLE)?;
            x.add_transition(
                TransitionSpec::new(format!("Transfer {stage}"))
                    .consume(previous)
                    .output(next)
                    .priority(-1)
                    .action(move |f| Ok(vec![Emit::new(next, f.values[0].clone(), f.now + cpu)])),
            )?;
            previous = next;
        }
        let bulk = x.add_place("Bulk", SAMPLE)?;
        x.add_transition(
            TransitionSpec::new("Pull request")
                .consume(previous)
                .output(bulk)
                .priority(-1)
                .action(move |f| Ok(vec![Emit::new(bulk, f.values[0].clone(), f.now + cpu)])),
        )?;
        x.add_transition(
            TransitionSpec::new("Latch")
                .consume(bulk)
                .consume(control_il)
                .consume(control_vo)
                .output(control_il)
                .output(control_vo)
                .priority(-1)
                .action(move |f| {
                    let (il, vo) = f.pair(0)?;
                    Ok(vec![
                        Emit::new(control_il, Value::Real(il), f.now),
                        Emit::new(control_vo, Value::Real(vo), f.now),
                    ])
                }),
        )?;
    }

    let template = *cfg;
    scope.scope("Logic").add_transition(
        TransitionSpec::new("decide")
            .consume(buck_loop)
            .read(control_il)
            .read(control_vo)
            .read(parameters)
            .output(gate)
            .priority(1)
            .action(move |f| {
                let next = f.int(0)?;
                let target = u64::try_from(next)
                    .map_err(|_| format!("negative iteration index {next} on Buck-loop"))?;
                let cfg = ControlConfig::from_record(f.record(3)?, &template);
                let sensed = SensedPair {
                    inductor_current: f.real(1)?,
                    output_voltage: f.real(2)?,
                    available_at: f.now,
                };
                let u = modulation(&cfg, gate_enable(&sensed, &cfg), ModelTime(target));
                Ok(vec![Emit::new(gate, Value::Int(i64::from(u)), ModelTime(target))])
            }),
    )?;
    Ok(())
}

/// A standalone controller net with top-level sockets `iL-vo`, `Buck-loop` and `Gate`.
pub fn build_controller_net(cfg: &ControlConfig) -> Result<Net, ModelError> {
    let mut b = NetBuilder::new();
    let iface = Interface::declare(&mut b)?;
    instantiate_controller(&mut b.scope("ctrl"), &iface, cfg)?;
    b.check_conflicts(true);
    Ok(b.build())
}
