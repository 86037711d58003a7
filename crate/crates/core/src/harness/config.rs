use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::combine::PerfectCsiKind;
use crate::scenario::{InterfererSpec, PositionSpec, PowerSpec, ScenarioConfig};
use crate::shrinkfit::{FitOptions, GenieObjective};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NoReg,
    RegData,
    RegDataIter,
    RegExh,
    PerfectCsi,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::NoReg,
        Method::RegData,
        Method::RegDataIter,
        Method::RegExh,
        Method::PerfectCsi,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::NoReg => "no_reg",
            Method::RegData => "reg_data",
            Method::RegDataIter => "reg_data_iter",
            Method::RegExh => "reg_exh",
            Method::PerfectCsi => "perfect_csi",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::NoReg => "No reg.",
            Method::RegData => "Reg. data",
            Method::RegDataIter => "Reg. data iter.",
            Method::RegExh => "Reg. exh.",
            Method::PerfectCsi => "Perfect CSI",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    UePowerDbm,
    PilotLen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub values: Vec<f64>,
}

/// Per-method knobs shared by every trial of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialOptions {
    pub methods: Vec<Method>,
    pub fit: FitOptions,
    pub exhaustive_step: f64,
    pub exhaustive_objective: GenieObjective,
    pub perfect_csi: PerfectCsiKind,
    /// Keep the iterative fit trajectory in each outcome.
    #[serde(skip)]
    pub keep_trace: bool,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            fit: FitOptions::default(),
            exhaustive_step: 0.01,
            exhaustive_objective: GenieObjective::Mse,
            perfect_csi: PerfectCsiKind::Mmse,
            keep_trace: false,
        }
    }
}

/// Scenario plus sweep, trial count and method options. Scenario keys sit
/// at the top level of the JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub scenario: ScenarioConfig,
    pub sweep: SweepSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub options: TrialOptions,
}

fn default_trials() -> usize {
    2000
}

fn one_interferer() -> Vec<InterfererSpec> {
    vec![InterfererSpec {
        position: PositionSpec::Random,
        power_offset_db: -5.0,
    }]
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// SER versus UE power without interference.
    pub fn fig2() -> Self {
        Self {
            scenario: ScenarioConfig::reference(2.0),
            sweep: SweepSpec {
                kind: SweepKind::UePowerDbm,
                values: vec![2.0, 6.0, 10.0, 14.0, 18.0, 22.0],
            },
            trials: default_trials(),
            options: TrialOptions::default(),
        }
    }

    /// As [`Self::fig2`] with one interferer 5 dB below the UEs.
    pub fn fig3() -> Self {
        let mut cfg = Self::fig2();
        cfg.scenario.interferers = one_interferer();
        cfg
    }

    /// SER versus pilot length at 15 dBm with the interferer on.
    pub fn fig4() -> Self {
        let mut scenario = ScenarioConfig::reference(15.0);
        scenario.interferers = one_interferer();
        Self {
            scenario,
            sweep: SweepSpec {
                kind: SweepKind::PilotLen,
                values: vec![8.0, 12.0, 16.0, 20.0, 24.0],
            },
            trials: default_trials(),
            options: TrialOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::Config("sweep has no values".into()));
        }
        if self.options.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        let step = self.options.exhaustive_step;
        if !(step > 0.0 && step <= 1.0) {
            return Err(Error::Config(format!("exhaustive_step {step} outside (0, 1]")));
        }
        let mut errs = Vec::new();
        for &v in &self.sweep.values {
            if let Err(e) = self.point_scenario(v).and_then(|s| s.validate()) {
                errs.push(format!("sweep value {v}: {e}"));
            }
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs.join("; ")));
        }
        Ok(())
    }

    /// Scenario at one sweep point.
    pub fn point_scenario(&self, value: f64) -> Result<ScenarioConfig> {
        let mut s = self.scenario.clone();
        match self.sweep.kind {
            SweepKind::UePowerDbm => s.ue_tx_power_dbm = PowerSpec::Shared(value),
            SweepKind::PilotLen => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::Config(format!("pilot length {value} is not a positive integer")));
                }
                s.pilot_len = value as usize;
            }
        }
        Ok(s)
    }
}
