//! Acceptance criteria, one line per criterion. Runs as a plain binary so the
//! report is always printed; exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::collection::vec;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use buckcpn::buck::{
    build_buck_net, capacitor_charge, inductor_current_update, inductor_drive,
    output_voltage_update,
};
use buckcpn::controller::instantiate_controller;
use buckcpn::kernel::{
    Emit, EventLog, FireEvent, ModelTime, Monitor, Net, NetBuilder, TransitionSpec, Value,
};
use buckcpn::oracle::{simulate_closed_loop, simulate_open_loop, OracleConfig};
use buckcpn::system::{build_driven_converter, run_converter_net, simulate_net, Interface};
use buckcpn::trace::{compare_records, relative_error, write_csv};
use buckcpn::{CircuitParams, ControlConfig, TraceRecord};

const FSW: f64 = 200e3;
const TSF: u32 = 100;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// 1. Net vs oracle on the reference open-loop scenario, 100 000 ticks.
fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut cfg = ControlConfig::duty_ratio(FSW, TSF, 0.5);
    cfg.pipeline_stages = 0;
    cfg.cpu_clk_ticks = 1;
    let steps = 100_000;
    let net = match simulate_net(&CircuitParams::REFERENCE, &cfg, steps) {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("net failed: {e}")),
    };
    let oracle = match simulate_open_loop(&OracleConfig {
        params: CircuitParams::REFERENCE,
        control: cfg,
        steps,
    }) {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("oracle failed: {e}")),
    };
    let elapsed = start.elapsed();
    match compare_records(&net, &oracle, 1e-9) {
        Ok(c) => outcome(
            c.pass && elapsed < Duration::from_secs(10),
            format!(
                "rows={} max_rel_iL={:e} max_rel_vo={:e} u_mismatch={} runtime={:.2?}",
                c.rows, c.max_rel_il, c.max_rel_vo, c.gate_mismatches, elapsed
            ),
        ),
        Err(e) => outcome(false, format!("structural: {e}")),
    }
}

/// Per-period means of `vo`.
fn cycle_means(trace: &[TraceRecord], tsf: usize) -> Vec<f64> {
    trace
        .chunks_exact(tsf)
        .map(|c| c.iter().map(|r| r.output_voltage).sum::<f64>() / tsf as f64)
        .collect()
}

/// First period index after which 10 consecutive period-to-period changes stay below 0.1 %.
fn settled_at(means: &[f64]) -> Option<usize> {
    let mut run = 0;
    for i in 1..means.len() {
        let change = relative_error(means[i], means[i - 1]);
        if change < 1e-3 {
            run += 1;
            if run == 10 {
                return Some(i);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// 2. Cycle-mean vo/Vi recovers the duty ratio on a fast-settling circuit.
fn duty_relation() -> Outcome {
    let circuit = CircuitParams {
        input_voltage: 12.0,
        inductance: 100e-6,
        capacitance: 10e-6,
        resistance: 2.4,
    };
    let mut details = Vec::new();
    let mut pass = true;
    for duty in [0.25, 0.5, 0.75] {
        let start = Instant::now();
        let cfg = ControlConfig::duty_ratio(FSW, TSF, duty);
        let trace = match simulate_net(&circuit, &cfg, 100_000) {
            Ok(t) => t,
            Err(e) => return outcome(false, format!("d={duty}: {e}")),
        };
        let means = cycle_means(&trace, TSF as usize);
        let Some(p) = settled_at(&means) else {
            return outcome(false, format!("d={duty}: never settled"));
        };
        let ratio = means[p] / circuit.input_voltage;
        let ok = (ratio - duty).abs() <= 0.05 * duty && start.elapsed() < Duration::from_secs(5);
        pass &= ok;
        details.push(format!("d={duty}: vo/Vi={ratio:.4} (settled period {p})"));
    }
    outcome(pass, details.join("; "))
}

/// 3. Closed-loop VRef regulation with current protection (zero-latency comparator).
fn closed_loop_regulation() -> Outcome {
    let p = CircuitParams::REFERENCE;
    let cfg = ControlConfig::voltage_reference(FSW, TSF, 1.2, 0.7);
    let steps = 200_000usize;
    let trace = match simulate_closed_loop(&OracleConfig {
        params: p,
        control: cfg,
        steps: steps as u64,
    }) {
        Ok(t) => t,
        Err(e) => return outcome(false, e.to_string()),
    };
    let tail_start = steps * 3 / 4;
    let tail = &trace[tail_start..];
    let hi = tail.iter().map(|r| r.output_voltage).fold(f64::MIN, f64::max);
    let lo = tail.iter().map(|r| r.output_voltage).fold(f64::MAX, f64::min);
    let delta = hi - lo;
    let vref = cfg.voltage_reference;
    let entry = trace
        .iter()
        .rposition(|r| (r.output_voltage - vref).abs() > delta)
        .map_or(0, |i| i + 1);
    let il_bound = cfg.current_limit + (p.input_voltage / p.inductance) * cfg.ts();
    let il_peak = trace.iter().map(|r| r.inductor_current).fold(f64::MIN, f64::max);
    let pass = delta > 0.0 && entry > 0 && entry < tail_start && il_peak <= il_bound;
    outcome(
        pass,
        format!(
            "delta={delta:.3e} V entry_tick={entry} iL_peak={il_peak:.6} bound={il_bound:.6}"
        ),
    )
}

/// 4. On-slot count per period is exactly round(duty·Tsf).
fn pwm_exactness() -> Outcome {
    let mut checked = 0;
    for tsf in [10u32, 100, 128] {
        for i in 0..=10 {
            let duty = f64::from(i) * 0.1;
            let cfg = ControlConfig::duty_ratio(FSW, tsf, duty);
            let periods = 20;
            let trace = match simulate_net(&CircuitParams::REFERENCE, &cfg, u64::from(tsf) * periods) {
                Ok(t) => t,
                Err(e) => return outcome(false, format!("Tsf={tsf} d={duty}: {e}")),
            };
            let expected = (duty * f64::from(tsf)).round() as usize;
            for (n, period) in trace.chunks_exact(tsf as usize).enumerate() {
                let on = period.iter().filter(|r| r.gate == 1).count();
                if on != expected {
                    return outcome(
                        false,
                        format!("Tsf={tsf} d={duty} period {n}: {on} on-ticks, expected {expected}"),
                    );
                }
            }
            checked += 1;
        }
    }
    outcome(true, format!("{checked} (duty, Tsf) pairs x 20 periods"))
}

/// Collects the invariants checked for every occurrence.
#[derive(Default)]
struct KernelInvariants {
    last_clock: ModelTime,
    violations: Vec<String>,
    gates_consumed: u64,
    acks_produced: u64,
    acks_consumed: u64,
    gate_id: Option<buckcpn::kernel::PlaceId>,
    ack_id: Option<buckcpn::kernel::PlaceId>,
}

impl Monitor for KernelInvariants {
    fn on_fire(&mut self, net: &Net, ev: &FireEvent) {
        let gate = *self.gate_id.get_or_insert_with(|| net.place_id("Gate").unwrap());
        let ack = *self.ack_id.get_or_insert_with(|| net.place_id("Buck-loop").unwrap());
        if ev.clock < self.last_clock {
            self.violations.push(format!("clock went back to {}", ev.clock));
        }
        self.last_clock = ev.clock;
        for (p, tok) in &ev.consumed {
            if tok.timestamp > ev.clock {
                self.violations
                    .push(format!("token {} consumed early at {}", tok.timestamp, ev.clock));
            }
            self.gates_consumed += u64::from(*p == gate);
            self.acks_consumed += u64::from(*p == ack);
        }
        self.acks_produced += ev.produced.iter().filter(|(p, _)| *p == ack).count() as u64;
        if self.gates_consumed != self.acks_produced {
            self.violations.push(format!(
                "{} gate tokens consumed but {} acknowledgments emitted",
                self.gates_consumed, self.acks_produced
            ));
        }
        // Initial token plus one per iteration; at most one in flight.
        let in_flight = 1 + self.acks_produced - self.acks_consumed;
        if in_flight > 1 {
            self.violations.push(format!("{in_flight} acknowledgments in flight"));
        }
    }
}

fn run_once(gates: &[u8]) -> Result<(Vec<u8>, EventLog, KernelInvariants), String> {
    let ts = 5e-8;
    let mut net = build_driven_converter(&CircuitParams::REFERENCE, ts, gates.to_vec())
        .map_err(|e| e.to_string())?;
    let mut log = EventLog::default();
    let mut inv = KernelInvariants::default();
    let trace = run_converter_net(&mut net, gates.len() as u64, ts, &mut [&mut log, &mut inv])
        .map_err(|e| e.to_string())?;
    if trace.len() != gates.len() {
        return Err(format!("{} records for {} gates", trace.len(), gates.len()));
    }
    if trace.iter().zip(gates).any(|(r, &u)| r.gate != u) {
        return Err("recorded gate differs from stimulus".into());
    }
    let mut csv = Vec::new();
    write_csv(&mut csv, "prop", "0", &trace).map_err(|e| e.to_string())?;
    Ok((csv, log, inv))
}

/// 5. Determinism, clock monotonicity, no premature consumption, handshake conservation.
fn kernel_properties() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 100,
        failure_persistence: None,
        ..Config::default()
    });
    let cases = std::cell::Cell::new(0u32);
    let result = runner.run(&vec(0u8..=1, 10_000), |gates| {
        cases.set(cases.get() + 1);
        let (csv_a, log_a, inv) = run_once(&gates).map_err(TestCaseError::fail)?;
        let (csv_b, log_b, _) = run_once(&gates).map_err(TestCaseError::fail)?;
        if csv_a != csv_b || log_a != log_b {
            return Err(TestCaseError::fail("two runs differ"));
        }
        if let Some(v) = inv.violations.first() {
            return Err(TestCaseError::fail(v.clone()));
        }
        if inv.gates_consumed != gates.len() as u64 {
            return Err(TestCaseError::fail("not every gate token was consumed"));
        }
        Ok(())
    });
    match result {
        Ok(()) => outcome(true, format!("{} random gate sequences of 10000 ticks", cases.get())),
        Err(e) => outcome(false, e.to_string()),
    }
}

/// Controller in closed loop against a scripted plant whose sensed vo steps
/// from 0 V to 2 V in the sample published at tick `step_at`.
fn latency_run(step_at: u64, horizon: u64) -> Result<Vec<u8>, String> {
    let mut cfg = ControlConfig::voltage_reference(FSW, TSF, 1.2, f64::INFINITY);
    cfg.pipeline_stages = 2;
    cfg.cpu_clk_ticks = 1;
    let mut b = NetBuilder::new();
    let iface = Interface::declare(&mut b).map_err(|e| e.to_string())?;
    instantiate_controller(&mut b.scope("ctrl"), &iface, &cfg).map_err(|e| e.to_string())?;
    let (ack, il_vo) = (iface.buck_loop, iface.il_vo);
    b.scope("plant")
        .add_transition(
            TransitionSpec::new("apply")
                .consume(iface.gate)
                .output(ack)
                .output(il_vo)
                .action(move |f| {
                    let k = f.now.ticks();
                    let vo = if k >= step_at { 2.0 } else { 0.0 };
                    Ok(vec![
                        Emit::new(ack, Value::Int(k as i64 + 1), f.now),
                        Emit::new(il_vo, Value::Pair(0.0, vo), f.now),
                    ])
                }),
        )
        .map_err(|e| e.to_string())?;
    b.initial_token(iface.buck_loop, Value::Int(0), ModelTime::ZERO)
        .map_err(|e| e.to_string())?;
    let mut net = b.build();

    struct Gates(Vec<u8>, buckcpn::kernel::PlaceId);
    impl Monitor for Gates {
        fn on_fire(&mut self, _: &Net, ev: &FireEvent) {
            for (p, t) in &ev.consumed {
                if *p == self.1 {
                    self.0.push(t.value.as_int().unwrap() as u8);
                }
            }
        }
    }
    let mut gates = Gates(Vec::new(), iface.gate);
    net.run(ModelTime(horizon - 1), &mut [&mut gates])
        .map_err(|e| e.to_string())?;
    Ok(gates.0)
}

/// 6. A vo step sensed at tick k first changes u at k+4 or k+5.
fn latency() -> Outcome {
    let k = 50;
    let u = match latency_run(k, 100) {
        Ok(u) => u,
        Err(e) => return outcome(false, e),
    };
    let first = u.iter().position(|&g| g == 0).map(|i| i as u64);
    let steady_before = u[..k as usize].iter().all(|&g| g == 1);
    let stays_off = first.is_some_and(|f| u[f as usize..].iter().all(|&g| g == 0));
    let pass = steady_before && stays_off && first.is_some_and(|f| (k + 4..=k + 5).contains(&f));
    outcome(pass, format!("step at k={k}, first affected u at {first:?}"))
}

/// 7. Step functions against exact rational evaluations.
fn unit_values() -> Outcome {
    let ts = 5e-8;
    let checks = [
        ("fiL_k1", inductor_drive(12.0, 9.5e-3, 1, ts).0, 6.31578947368421e-05),
        ("fiL_k1 off", inductor_drive(12.0, 9.5e-3, 0, ts).0, 0.0),
        (
            "fiL_k2 first",
            inductor_current_update(6.31578947368421e-05, 9.5e-3, 0.0, 0.0, ts),
            6.31578947368421e-05,
        ),
        ("fiL_k2", inductor_current_update(0.0, 9.5e-3, 6.0, 1.0, ts), 0.9999684210526316),
        ("fvo_k1", capacitor_charge(20e-6, 2.4, 1.0, ts).0, 0.0025),
        ("fvo_k2", output_voltage_update(2.5e-3, 20e-6, 2.4, 6.0, ts), 5.99625),
        ("fvo_k2 rc", output_voltage_update(0.0, 20e-6, 2.4, 1.0, ts), 0.9989583333333333),
    ];
    let worst = checks
        .iter()
        .map(|&(name, got, want)| (name, relative_error(got, want)))
        .fold(("", 0.0f64), |a, b| if b.1 > a.1 { b } else { a });
    // The standalone converter net must agree with the functions too.
    let net_ok = (|| {
        let mut net = build_buck_net(&CircuitParams::REFERENCE, ts).ok()?;
        net.add_token("Gate", Value::Int(1), ModelTime(0)).ok()?;
        net.run(ModelTime(0), &mut []).ok()?;
        let (il, _) = net.marking("iL-vo").ok()?.first()?.value.as_pair()?;
        Some(relative_error(il, 6.31578947368421e-05) <= 1e-12)
    })()
    .unwrap_or(false);
    outcome(
        worst.1 <= 1e-12 && net_ok,
        format!("{} checks, worst {} rel={:e}", checks.len(), worst.0, worst.1),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("AC1 oracle equivalence", oracle_equivalence),
        ("AC2 duty-ratio steady state", duty_relation),
        ("AC3 closed-loop regulation", closed_loop_regulation),
        ("AC4 PWM exactness", pwm_exactness),
        ("AC5 kernel properties", kernel_properties),
        ("AC6 sensing latency", latency),
        ("AC7 step-function values", unit_values),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
