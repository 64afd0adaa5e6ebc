//! Run configuration: technology calibration, typical capacities, program
//! parameters, trace sources and online-evaluation settings, read from one
//! JSON file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::ess::{Capacities, EssTechnology};
use crate::online::PolicyKind;
use crate::programs::{CrSpec, PsParams, PsSpec, RsrParams, RsrSpec};
use crate::traces::{downsample, gen_power_trace, gen_rsr_signal, load_csv, PowerTraceParams, RsrSignalParams, Trace, TraceKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramsConfig {
    pub rsr: RsrParams,
    pub cr: CrSpec,
    pub ps: PsParams,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorsConfig {
    pub rsr_signal: RsrSignalParams,
    /// Block-mean factor applied to the generated signal.
    #[serde(default = "one")]
    pub rsr_downsample: usize,
    pub power_trace: PowerTraceParams,
}

/// Optional CSV files that replace the generated traces.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TracePaths {
    #[serde(default)]
    pub rsr: Option<PathBuf>,
    #[serde(default)]
    pub power: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub window_hours: usize,
    pub rho2: f64,
    pub lambda_battery: f64,
    pub lambda_ucfw: f64,
    #[serde(default)]
    pub seed: u64,
}

impl OnlineConfig {
    pub fn lambda(&self, policy: PolicyKind) -> f64 {
        match policy {
            PolicyKind::Battery => self.lambda_battery,
            PolicyKind::Ucfw => self.lambda_ucfw,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub technologies: BTreeMap<String, EssTechnology>,
    /// Typical installed capacities per technology.
    #[serde(default)]
    pub typical_caps: BTreeMap<String, Capacities>,
    pub programs: ProgramsConfig,
    pub generators: GeneratorsConfig,
    #[serde(default)]
    pub traces: TracePaths,
    pub online: OnlineConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Directory relative trace paths resolve against; set by [`RunConfig::load`].
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// Calibration shipped with the crate.
pub const DEFAULTS_JSON: &str = include_str!("../../../defaults.json");

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn shipped() -> Self {
        Self::from_json(DEFAULTS_JSON).expect("shipped calibration is valid")
    }

    pub fn validate(&self) -> Result<()> {
        for (name, tech) in &self.technologies {
            tech.validate()?;
            if &tech.name != name {
                return Err(contract(format!("technology key `{name}` holds `{}`", tech.name)));
            }
        }
        for name in self.typical_caps.keys() {
            if !self.technologies.contains_key(name) {
                return Err(contract(format!("capacities given for unknown technology `{name}`")));
            }
        }
        self.programs.rsr.validate()?;
        self.programs.cr.validate()?;
        if self.generators.rsr_downsample == 0 {
            return Err(contract("rsr_downsample must be >= 1"));
        }
        let o = &self.online;
        if o.window_hours == 0 || !(o.rho2 > 0.0 && o.rho2 <= 1.0) {
            return Err(contract("online window_hours must be > 0 and rho2 in (0, 1]"));
        }
        Ok(())
    }

    pub fn tech(&self, name: &str) -> Result<&EssTechnology> {
        self.technologies.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.technologies.keys().map(String::as_str).collect();
            contract(format!("unknown technology `{name}` (known: {})", known.join(", ")))
        })
    }

    pub fn caps(&self, name: &str) -> Result<Capacities> {
        self.typical_caps
            .get(name)
            .copied()
            .ok_or_else(|| contract(format!("no typical capacities for `{name}`")))
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    /// The configured signal file, or the generated signal after downsampling.
    pub fn rsr_signal(&self) -> Result<Trace> {
        let trace = match &self.traces.rsr {
            Some(p) => load_csv(&self.resolve(p))?,
            None => {
                let raw = gen_rsr_signal(&self.generators.rsr_signal)?;
                downsample(&raw, self.generators.rsr_downsample)?.0
            }
        };
        expect_kind(trace, TraceKind::RsrSignal)
    }

    pub fn power_trace(&self) -> Result<Trace> {
        let trace = match &self.traces.power {
            Some(p) => load_csv(&self.resolve(p))?,
            None => gen_power_trace(&self.generators.power_trace)?,
        };
        expect_kind(trace, TraceKind::PowerKw)
    }

    pub fn rsr_spec(&self, signal: Trace) -> RsrSpec {
        RsrSpec {
            params: self.programs.rsr.clone(),
            signal,
        }
    }

    pub fn ps_spec(&self, power_trace: Trace) -> PsSpec {
        PsSpec {
            params: self.programs.ps.clone(),
            power_trace,
        }
    }

    pub fn cr_spec(&self) -> CrSpec {
        self.programs.cr.clone()
    }
}

fn expect_kind(trace: Trace, kind: TraceKind) -> Result<Trace> {
    if trace.kind != kind {
        return Err(contract(format!("expected a {kind:?} trace, got {:?}", trace.kind)));
    }
    Ok(trace)
}
