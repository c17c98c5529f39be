//! Scenario files: TOML with top-level run settings and `[circuit]` /
//! `[control]` sections.
//!
//! ```toml
//! name = "reference-open-loop"
//! horizon_ticks = 100000
//! engine = "net"
//! monitors = ["iL", "vo", "gate"]
//!
//! [circuit]
//! Vi = 12.0
//! L = 9.5e-3
//! C = 20e-6
//! R = 2.4
//!
//! [control]
//! fsw = 200e3
//! Tsf = 100
//! duty = 0.5
//! mode = "DutyRatio"
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use buckcpn::{CircuitParams, ControlConfig, ControlMode, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Net,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum MonitorKind {
    #[serde(rename = "iL")]
    InductorCurrent,
    #[serde(rename = "vo")]
    OutputVoltage,
    #[serde(rename = "gate")]
    Gate,
}

impl MonitorKind {
    fn name(self) -> &'static str {
        match self {
            MonitorKind::InductorCurrent => "iL",
            MonitorKind::OutputVoltage => "vo",
            MonitorKind::Gate => "gate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub circuit: CircuitParams,
    pub control: ControlConfig,
    pub horizon_ticks: u64,
    pub engine: Engine,
    pub monitors: Vec<MonitorKind>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    horizon_ticks: u64,
    engine: Engine,
    monitors: Vec<MonitorKind>,
    circuit: RawCircuit,
    control: RawControl,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawCircuit {
    Vi: f64,
    L: f64,
    C: f64,
    R: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawControl {
    fsw: f64,
    Tsf: u32,
    duty: Option<f64>,
    mode: RawMode,
    VREF: Option<f64>,
    ILIM: Option<f64>,
    pipeline_stages: Option<u32>,
    cpu_clk_ticks: Option<u32>,
}

#[derive(Deserialize)]
enum RawMode {
    DutyRatio,
    VRef,
}

impl Scenario {
    /// Parses and validates scenario text. `origin` only labels parse errors.
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ScenarioError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| ScenarioError::Parse {
            path: origin.to_path_buf(),
            source: Box::new(e),
        })?;
        let circuit = CircuitParams {
            input_voltage: raw.circuit.Vi,
            inductance: raw.circuit.L,
            capacitance: raw.circuit.C,
            resistance: raw.circuit.R,
        };
        let c = raw.control;
        let mut control = match c.mode {
            RawMode::DutyRatio => {
                let duty = c.duty.ok_or_else(|| invalid("control.duty", "required in DutyRatio mode"))?;
                ControlConfig::duty_ratio(c.fsw, c.Tsf, duty)
            }
            RawMode::VRef => {
                let vref = c.VREF.ok_or_else(|| invalid("control.VREF", "required in VRef mode"))?;
                let mut cfg = ControlConfig::voltage_reference(c.fsw, c.Tsf, vref, f64::INFINITY);
                if let Some(duty) = c.duty {
                    cfg.duty = duty;
                }
                cfg
            }
        };
        if let Some(vref) = c.VREF {
            control.voltage_reference = vref;
        }
        control.current_limit = c.ILIM.unwrap_or(f64::INFINITY);
        if let Some(n) = c.pipeline_stages {
            control.pipeline_stages = n;
        }
        if let Some(n) = c.cpu_clk_ticks {
            control.cpu_clk_ticks = n;
        }
        let s = Scenario {
            name: raw.name,
            circuit,
            control,
            horizon_ticks: raw.horizon_ticks,
            engine: raw.engine,
            monitors: raw.monitors,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.is_empty() || self.name.contains(['\n', '\r']) {
            return Err(invalid("name", "must be a non-empty single line"));
        }
        if self.horizon_ticks == 0 {
            return Err(invalid("horizon_ticks", "must be ≥ 1"));
        }
        if self.monitors.is_empty() {
            return Err(invalid("monitors", "must list at least one of iL, vo, gate"));
        }
        let section = |prefix: &str, e: ModelError| match e {
            ModelError::InvalidParameter { field, reason } => invalid(format!("{prefix}.{field}"), reason),
            other => invalid(prefix, other.to_string()),
        };
        self.circuit.validate().map_err(|e| section("circuit", e))?;
        self.control.validate().map_err(|e| section("control", e))?;
        Ok(())
    }

    /// SHA-256 over a canonical text form of everything except `engine`, so
    /// net and oracle traces of one scenario carry the same digest.
    pub fn digest(&self) -> String {
        let p = &self.circuit;
        let c = &self.control;
        let mode = match c.mode {
            ControlMode::DutyRatio => "DutyRatio",
            ControlMode::VoltageReference => "VRef",
        };
        let mut canon = String::new();
        let _ = writeln!(canon, "name={}", self.name);
        let _ = writeln!(canon, "horizon_ticks={}", self.horizon_ticks);
        let monitors: Vec<&str> = self.monitors.iter().map(|m| m.name()).collect();
        let _ = writeln!(canon, "monitors={}", monitors.join(","));
        let _ = writeln!(
            canon,
            "circuit=Vi:{:e},L:{:e},C:{:e},R:{:e}",
            p.input_voltage, p.inductance, p.capacitance, p.resistance
        );
        let _ = writeln!(
            canon,
            "control=fsw:{:e},Tsf:{},duty:{:e},mode:{mode},VREF:{:e},ILIM:{:e},stages:{},cpu:{}",
            c.switching_frequency,
            c.ticks_per_period,
            c.duty,
            c.voltage_reference,
            c.current_limit,
            c.pipeline_stages,
            c.cpu_clk_ticks
        );
        hex::encode(Sha256::digest(canon.as_bytes()))
    }
}
