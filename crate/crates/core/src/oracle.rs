//! Plain-loop forward-Euler reference for the converter and its control rules.
//!
//! No tokens, no scheduler: the same arithmetic as the net's step functions,
//! written out inline, with zero-latency control. Agreement between the two
//! is evidence against wiring mistakes in the net.

use thiserror::Error;

use crate::buck::{CircuitParams, ConverterState};
use crate::controller::{gate_enable, modulation, ControlConfig, ControlMode, SensedPair};
use crate::error::ModelError;
use crate::kernel::ModelTime;
use crate::trace::TraceRecord;

/// States with a component beyond this magnitude abort the run.
pub const DIVERGENCE_BOUND: f64 = 1e9;

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub params: CircuitParams,
    pub control: ControlConfig,
    pub steps: u64,
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Config(#[from] ModelError),
    #[error("{0:?} mode requested but the configuration uses {1:?}")]
    WrongMode(ControlMode, ControlMode),
    #[error("non-finite state at step {step}")]
    NonFinite { step: u64 },
    #[error("state exceeds {DIVERGENCE_BOUND:e} at step {step}")]
    Unstable { step: u64 },
}

/// One forward-Euler step with gate `u`.
pub fn euler_step(state: ConverterState, u: u8, p: &CircuitParams, ts: f64) -> ConverterState {
    let ConverterState {
        inductor_current: il,
        output_voltage: vo,
    } = state;
    let source = if u == 1 { (p.input_voltage / p.inductance) * ts } else { 0.0 };
    ConverterState {
        inductor_current: il + (source - (vo / p.inductance) * ts),
        output_voltage: vo
            + ((il / p.capacitance) * ts - ts * vo / (p.resistance * p.capacitance)),
    }
}

/// Energy stored in the inductor and capacitor, joules.
pub fn stored_energy(state: &ConverterState, p: &CircuitParams) -> f64 {
    0.5 * p.inductance * state.inductor_current.powi(2)
        + 0.5 * p.capacitance * state.output_voltage.powi(2)
}

fn simulate(cfg: &OracleConfig) -> Result<Vec<TraceRecord>, OracleError> {
    cfg.params.validate()?;
    cfg.control.validate()?;
    let ts = cfg.control.ts();
    let mut state = ConverterState::ZERO;
    let mut out = Vec::with_capacity(cfg.steps as usize);
    for k in 0..cfg.steps {
        let now = ModelTime(k);
        let sensed = SensedPair {
            inductor_current: state.inductor_current,
            output_voltage: state.output_voltage,
            available_at: now,
        };
        let u = modulation(&cfg.control, gate_enable(&sensed, &cfg.control), now);
        state = euler_step(state, u, &cfg.params, ts);
        if !state.is_finite() {
            return Err(OracleError::NonFinite { step: k });
        }
        if state.inductor_current.abs() > DIVERGENCE_BOUND
            || state.output_voltage.abs() > DIVERGENCE_BOUND
        {
            return Err(OracleError::Unstable { step: k });
        }
        out.push(TraceRecord {
            k,
            t: k as f64 * ts,
            inductor_current: state.inductor_current,
            output_voltage: state.output_voltage,
            gate: u,
        });
    }
    Ok(out)
}

/// Fixed-duty PWM from the zero state; only the current limit gates the switch.
pub fn simulate_open_loop(cfg: &OracleConfig) -> Result<Vec<TraceRecord>, OracleError> {
    if cfg.control.mode != ControlMode::DutyRatio {
        return Err(OracleError::WrongMode(ControlMode::DutyRatio, cfg.control.mode));
    }
    simulate(cfg)
}

/// Ideal comparator control: gate on iff `vo < VREF` and `iL < ILIM`, sensed without delay.
pub fn simulate_closed_loop(cfg: &OracleConfig) -> Result<Vec<TraceRecord>, OracleError> {
    if cfg.control.mode != ControlMode::VoltageReference {
        return Err(OracleError::WrongMode(
            ControlMode::VoltageReference,
            cfg.control.mode,
        ));
    }
    simulate(cfg)
}

/// Dispatches on the configured control mode.
pub fn simulate_oracle(cfg: &OracleConfig) -> Result<Vec<TraceRecord>, OracleError> {
    match cfg.control.mode {
        ControlMode::DutyRatio => simulate_open_loop(cfg),
        ControlMode::VoltageReference => simulate_closed_loop(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::relative_error;
    use proptest::prelude::*;

    const P: CircuitParams = CircuitParams::REFERENCE;
    const TS: f64 = 5e-8;

    fn open(duty: f64, steps: u64) -> OracleConfig {
        OracleConfig {
            params: P,
            control: ControlConfig::duty_ratio(200e3, 100, duty),
            steps,
        }
    }

    #[test]
    fn single_steps() {
        let s = euler_step(ConverterState::ZERO, 1, &P, TS);
        assert!(relative_error(s.inductor_current, 6.31578947368421e-05) <= 1e-12);
        assert_eq!(s.output_voltage, 0.0);
        assert_eq!(euler_step(ConverterState::ZERO, 0, &P, TS), ConverterState::ZERO);
        let s = euler_step(ConverterState::new(1.0, 6.0), 0, &P, TS);
        assert!(relative_error(s.inductor_current, 0.9999684210526316) <= 1e-12);
        assert!(relative_error(s.output_voltage, 5.99625) <= 1e-12);
    }

    #[test]
    fn step_map_matches_euler_matrix() {
        let step = |il, vo| euler_step(ConverterState::new(il, vo), 0, &P, TS);
        let base = step(0.0, 0.0);
        let e1 = step(1.0, 0.0);
        let e2 = step(0.0, 1.0);
        let m = [
            [e1.inductor_current - base.inductor_current, e2.inductor_current - base.inductor_current],
            [e1.output_voltage - base.output_voltage, e2.output_voltage - base.output_voltage],
        ];
        let (l, c, r) = (P.inductance, P.capacitance, P.resistance);
        let analytic = [[1.0, -TS / l], [TS / c, 1.0 - TS / (r * c)]];
        for i in 0..2 {
            for j in 0..2 {
                assert!(relative_error(m[i][j], analytic[i][j]) <= 1e-12, "{i}{j}");
            }
        }
        // Affine in the state for u = 1 as well: the offset is the drive term.
        let on = euler_step(ConverterState::new(0.3, 0.7), 1, &P, TS);
        let off = euler_step(ConverterState::new(0.3, 0.7), 0, &P, TS);
        let drive = (P.input_voltage / P.inductance) * TS;
        assert!(relative_error(on.inductor_current - off.inductor_current, drive) <= 1e-9);
        assert_eq!(on.output_voltage, off.output_voltage);
    }

    #[test]
    fn empty_and_zero_duty() {
        assert!(simulate_open_loop(&open(0.5, 0)).unwrap().is_empty());
        let trace = simulate_open_loop(&open(0.0, 2000)).unwrap();
        assert!(trace
            .iter()
            .all(|r| r.inductor_current == 0.0 && r.output_voltage == 0.0 && r.gate == 0));
    }

    #[test]
    fn mode_is_checked() {
        let mut cfg = open(0.5, 10);
        cfg.control.mode = ControlMode::VoltageReference;
        assert!(matches!(simulate_open_loop(&cfg), Err(OracleError::WrongMode(..))));
        assert!(simulate_closed_loop(&cfg).is_ok());
    }

    #[test]
    fn zero_reference_keeps_zero_state() {
        let cfg = OracleConfig {
            params: P,
            control: ControlConfig::voltage_reference(200e3, 100, 0.0, 0.7),
            steps: 1000,
        };
        let trace = simulate_closed_loop(&cfg).unwrap();
        assert!(trace.iter().all(|r| r.gate == 0 && r.output_voltage == 0.0));
    }

    #[test]
    fn divergence_is_reported() {
        // Ts far above R·C: Euler blows up.
        let cfg = OracleConfig {
            params: CircuitParams {
                capacitance: 1e-12,
                ..P
            },
            control: ControlConfig::duty_ratio(200e3, 100, 0.5),
            steps: 10_000,
        };
        assert!(matches!(simulate_open_loop(&cfg), Err(OracleError::Unstable { .. })));
    }

    #[test]
    fn long_run_recovers_duty_relation() {
        // Slow pole of the reference circuit is ~254 rad/s; 30 ms is ~7.6 time constants.
        let trace = simulate_open_loop(&open(0.5, 600_000)).unwrap();
        let last = &trace[trace.len() - 100..];
        let mean = last.iter().map(|r| r.output_voltage).sum::<f64>() / 100.0;
        assert!((mean - 6.0).abs() <= 0.05 * 6.0, "mean {mean}");
    }

    #[test]
    fn current_limit_overshoot_is_one_step() {
        let cfg = OracleConfig {
            params: P,
            control: ControlConfig::voltage_reference(200e3, 100, 1.2, 0.3),
            steps: 100_000,
        };
        let trace = simulate_closed_loop(&cfg).unwrap();
        let bound = 0.3 + (P.input_voltage / P.inductance) * TS;
        let peak = trace.iter().map(|r| r.inductor_current).fold(f64::MIN, f64::max);
        assert!(peak > 0.3, "limit never reached: {peak}");
        assert!(peak <= bound, "peak {peak} > {bound}");
    }

    /// Growth factor bound on stored energy for one unforced Euler step:
    /// ΔE = -Ts·vo²/R + ½Ts²[vo²/L + (iL - vo/R)²/C] ≤ Ts²·κ·E.
    fn energy_growth_bound(p: &CircuitParams, ts: f64) -> f64 {
        let lc = p.inductance * p.capacitance;
        let rc = p.resistance * p.capacitance;
        ts * ts * (3.0 / lc + 2.0 / (rc * rc))
    }

    proptest! {
        #[test]
        fn unforced_energy_bound(il in -5.0f64..5.0, vo in -20.0f64..20.0) {
            let ts = TS;
            prop_assume!(ts < P.resistance * P.capacitance);
            let s0 = ConverterState::new(il, vo);
            let s1 = euler_step(s0, 0, &P, ts);
            let e0 = stored_energy(&s0, &P);
            let e1 = stored_energy(&s1, &P);
            prop_assert!(e1 <= e0 * (1.0 + energy_growth_bound(&P, ts)) + 1e-18);
        }

        #[test]
        fn unforced_energy_decays(il in -5.0f64..5.0, vo in -20.0f64..20.0) {
            prop_assume!(il.abs() + vo.abs() > 1e-3);
            let mut s = ConverterState::new(il, vo);
            let e0 = stored_energy(&s, &P);
            for _ in 0..20_000 {
                s = euler_step(s, 0, &P, TS);
            }
            prop_assert!(stored_energy(&s, &P) < e0);
        }
    }
}
