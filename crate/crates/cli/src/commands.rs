use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use buckcpn::oracle::{simulate_oracle, OracleConfig, OracleError};
use buckcpn::system::simulate_net;
use buckcpn::trace::{compare_traces, read_csv, write_csv, Comparison, Trace, TraceError};
use buckcpn::{KernelError, ModelError, TraceRecord};

use crate::plot::render_svg;
use crate::scenario::{Engine, Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{path}: {source}")]
    Trace { path: PathBuf, source: TraceError },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("invalid tolerance {0}: must be finite and ≥ 0")]
    Tolerance(f64),
    #[error("simulation failed: {0}")]
    Net(ModelError),
    #[error("oracle failed: {0}")]
    Oracle(OracleError),
    #[error("comparison failed")]
    ComparisonFailed,
    #[error("structural mismatch: {0}")]
    Structural(String),
}

impl CliError {
    /// 1 comparison failure, 2 usage or configuration, 3 runtime fault.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ComparisonFailed | CliError::Structural(_) => 1,
            CliError::Scenario(_)
            | CliError::Trace { .. }
            | CliError::Write { .. }
            | CliError::Tolerance(_) => 2,
            CliError::Net(ModelError::InvalidParameter { .. })
            | CliError::Oracle(OracleError::Config(_) | OracleError::WrongMode(..)) => 2,
            CliError::Net(ModelError::Kernel(_)) | CliError::Oracle(_) => 3,
        }
    }
}

/// Runs a scenario on the requested engine.
pub fn run_scenario(s: &Scenario, engine: Engine) -> Result<Vec<TraceRecord>, CliError> {
    for w in s.circuit.stability_warnings(s.control.ts()) {
        log::warn!("{w}");
    }
    match engine {
        Engine::Net => simulate_net(&s.circuit, &s.control, s.horizon_ticks).map_err(|e| {
            if let ModelError::Kernel(KernelError::Deadlock { .. }) = &e {
                log::error!("net deadlocked before tick {}", s.horizon_ticks);
            }
            CliError::Net(e)
        }),
        Engine::Oracle => simulate_oracle(&OracleConfig {
            params: s.circuit,
            control: s.control,
            steps: s.horizon_ticks,
        })
        .map_err(CliError::Oracle),
    }
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), CliError> {
    let wrap = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(wrap)?);
    body(&mut out).and_then(|()| out.flush()).map_err(wrap)
}

/// Loads, runs and writes the trace CSV. `engine` overrides the scenario's own.
pub fn simulate_to_csv(scenario: &Path, out: &Path, engine: Option<Engine>) -> Result<usize, CliError> {
    let s = Scenario::load(scenario)?;
    let engine = engine.unwrap_or(s.engine);
    log::info!("running {} on {engine:?} for {} ticks", s.name, s.horizon_ticks);
    let records = run_scenario(&s, engine)?;
    write_file(out, |w| write_csv(w, &s.name, &s.digest(), &records))?;
    Ok(records.len())
}

pub fn load_trace(path: &Path) -> Result<Trace, CliError> {
    let wrap = |source| CliError::Trace {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(|e| wrap(TraceError::Io(e)))?;
    read_csv(BufReader::new(file)).map_err(wrap)
}

#[derive(Debug, Serialize)]
struct ColumnReport {
    max_rel: f64,
    rmse: f64,
}

#[derive(Debug, Serialize)]
struct GateReport {
    mismatches: usize,
}

#[derive(Debug, Serialize)]
pub struct CompareReport {
    pass: bool,
    rows: usize,
    tolerance: f64,
    #[serde(rename = "iL")]
    il: ColumnReport,
    vo: ColumnReport,
    u: GateReport,
}

impl From<&Comparison> for CompareReport {
    fn from(c: &Comparison) -> Self {
        CompareReport {
            pass: c.pass,
            rows: c.rows,
            tolerance: c.tolerance,
            il: ColumnReport {
                max_rel: c.max_rel_il,
                rmse: c.rmse_il,
            },
            vo: ColumnReport {
                max_rel: c.max_rel_vo,
                rmse: c.rmse_vo,
            },
            u: GateReport {
                mismatches: c.gate_mismatches,
            },
        }
    }
}

#[derive(Debug, Serialize)]
struct StructuralReport<'a> {
    pass: bool,
    structural: &'a str,
}

/// Compares two trace files and writes a one-line JSON summary to `out`.
pub fn compare<W: Write>(a: &Path, b: &Path, tolerance: f64, mut out: W) -> Result<(), CliError> {
    if !(tolerance.is_finite() && tolerance >= 0.0) {
        return Err(CliError::Tolerance(tolerance));
    }
    let ta = load_trace(a)?;
    let tb = load_trace(b)?;
    let stdout_err = |source| CliError::Write {
        path: PathBuf::from("<stdout>"),
        source,
    };
    match compare_traces(&ta, &tb, tolerance) {
        Ok(c) => {
            let line = serde_json::to_string(&CompareReport::from(&c)).expect("finite report");
            writeln!(out, "{line}").map_err(stdout_err)?;
            if c.pass {
                Ok(())
            } else {
                Err(CliError::ComparisonFailed)
            }
        }
        Err(m) => {
            let reason = m.to_string();
            let line = serde_json::to_string(&StructuralReport {
                pass: false,
                structural: &reason,
            })
            .expect("string report");
            writeln!(out, "{line}").map_err(stdout_err)?;
            Err(CliError::Structural(reason))
        }
    }
}

pub fn plot(csv: &Path, out: &Path) -> Result<(), CliError> {
    let trace = load_trace(csv)?;
    let svg = render_svg(&trace);
    write_file(out, |w| w.write_all(svg.as_bytes()))
}
