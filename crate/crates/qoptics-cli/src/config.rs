//! Scenario configuration: TOML schema, validation, and unit normalization.

use serde::{ Deserialize, Serialize };
use std::collections::BTreeMap;

use crate::error::{ CliError, CliResult };

/// Maximum total number of sweep grid points.
pub const MAX_SWEEP_POINTS: usize = 10_000;

/// Scenario kinds exposed by the runner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Tls,
    Lambda,
    DimerFreeSpace,
    DimerCavity,
    DickeCavity,
    CascadedSensors,
    TwoModeCapture,
}

/// Output kinds a scenario can request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    SteadyState,
    Dynamics,
    Spectrum,
    G2Map,
    Concurrence,
    NegativityMap,
    Fisher,
    Ringdown,
    MechanismReport,
}

impl OutputKind {
    pub fn name(&self) -> &'static str {
        match self {
            OutputKind::SteadyState => "steady_state",
            OutputKind::Dynamics => "dynamics",
            OutputKind::Spectrum => "spectrum",
            OutputKind::G2Map => "g2_map",
            OutputKind::Concurrence => "concurrence",
            OutputKind::NegativityMap => "negativity_map",
            OutputKind::Fisher => "fisher",
            OutputKind::Ringdown => "ringdown",
            OutputKind::MechanismReport => "mechanism_report",
        }
    }
}

/// Optional physical-unit declaration: all rate-like parameters are given in
/// `frequency` units and divided by `gamma` (the value of γ in those units).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitBlock {
    /// Name of the declared frequency unit (informational, e.g. "MHz").
    pub frequency: String,
    /// Value of γ expressed in the declared unit.
    pub gamma: f64,
}

/// One sweep axis: a linear or logarithmic grid over a named parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: String,
    pub start: f64,
    pub stop: f64,
    pub n: usize,
    #[serde(default = "default_scale")]
    pub scale: String,
}

fn default_scale() -> String {
    "linear".to_string()
}

impl SweepAxis {
    /// Materialize the grid values.
    pub fn values(&self) -> CliResult<Vec<f64>> {
        if self.n == 0 {
            return Err(CliError::validation("sweep axis needs n >= 1"));
        }
        if self.n == 1 {
            return Ok(vec![self.start]);
        }
        match self.scale.as_str() {
            "linear" => {
                let step = (self.stop - self.start) / (self.n - 1) as f64;
                Ok((0..self.n).map(|k| self.start + step * k as f64).collect())
            }
            "log" => {
                if self.start <= 0.0 || self.stop <= 0.0 {
                    return Err(CliError::validation("log sweep axis requires positive bounds"));
                }
                let (a, b) = (self.start.ln(), self.stop.ln());
                let step = (b - a) / (self.n - 1) as f64;
                Ok((0..self.n).map(|k| (a + step * k as f64).exp()).collect())
            }
            other => Err(CliError::validation(format!("unknown sweep scale '{other}'"))),
        }
    }
}

/// Sweep block: up to two axes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepBlock {
    #[serde(default)]
    pub axes: Vec<SweepAxis>,
}

/// Integrator tolerance overrides.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12 }
    }
}

/// Full scenario configuration (the TOML file schema).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub seed: u64,
    pub outputs: Vec<OutputKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<UnitBlock>,
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    /// Parameter name the Fisher-information output differentiates against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fisher_param: Option<String>,
}

/// Parameter keys that are counts or flags, never frequencies; excluded from
/// unit normalization.
const DIMENSIONLESS_KEYS: &[&str] = &[
    "n_trunc",
    "n_emitters",
    "n_omega",
    "n_samples",
    "n_w",
    "fock_hint",
    "splitting_physical",
    "log_time",
    "fisher_site",
    "n",
];

/// Time-like keys (units of 1/γ): multiplied by the γ value on normalization.
const TIME_KEYS: &[&str] = &["t_max", "capture_t0", "capture_duration", "capture_delay"];

impl ScenarioConfig {
    /// Parse from TOML text.
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| CliError::validation(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serialize back to TOML (round-trip identity with `from_toml`).
    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string_pretty(self)
            .map_err(|e| CliError::validation(format!("config serialize: {e}")))
    }

    /// Structural validation (independent of the scenario physics).
    pub fn validate(&self) -> CliResult<()> {
        if self.outputs.is_empty() {
            return Err(CliError::validation("at least one output must be requested"));
        }
        if let Some(units) = &self.units {
            if units.gamma <= 0.0 {
                return Err(CliError::validation("units.gamma must be positive"));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.axes.len() > 2 {
                return Err(CliError::validation("at most two sweep axes are supported"));
            }
            let mut total = 1usize;
            for axis in &sweep.axes {
                if !self.params.contains_key(&axis.param) {
                    return Err(CliError::validation(format!(
                        "swept parameter '{}' does not exist in the parameter block",
                        axis.param
                    )));
                }
                axis.values()?;
                total = total.saturating_mul(axis.n.max(1));
            }
            if total > MAX_SWEEP_POINTS {
                return Err(CliError::validation(format!(
                    "sweep grid has {total} points, exceeding the limit of {MAX_SWEEP_POINTS}"
                )));
            }
        }
        Ok(())
    }

    /// Normalize all rate-like parameters to γ units. Returns the normalized
    /// parameter map and a description line for the provenance header.
    pub fn normalized_params(&self) -> (BTreeMap<String, f64>, String) {
        match &self.units {
            None => (self.params.clone(), "gamma units".to_string()),
            Some(units) => {
                let g = units.gamma;
                let map = self
                    .params
                    .iter()
                    .map(|(k, v)| {
                        let v = if DIMENSIONLESS_KEYS.contains(&k.as_str()) {
                            *v
                        } else if TIME_KEYS.contains(&k.as_str()) {
                            *v * g
                        } else {
                            *v / g
                        };
                        (k.clone(), v)
                    })
                    .collect();
                (map, format!("normalized from {} with gamma = {}", units.frequency, g))
            }
        }
    }

    /// Effective tolerances after an optional CLI override.
    pub fn effective_tolerances(&self, cli_override: Option<Tolerances>) -> Tolerances {
        cli_override.or(self.tolerances).unwrap_or_default()
    }

    /// Stable hexadecimal hash of the canonical serialized config.
    pub fn hash(&self) -> String {
        use sha2::{ Digest, Sha256 };
        let canonical = self.to_toml().unwrap_or_default();
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Parse a `--tol-override` value of the form `rtol=1e-8,atol=1e-11`.
pub fn parse_tol_override(text: &str) -> CliResult<Tolerances> {
    let mut tol = Tolerances::default();
    for part in text.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| CliError::validation("tol-override expects key=value pairs"))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::validation(format!("bad tolerance value '{value}'")))?;
        match key.trim() {
            "rtol" => tol.rtol = value,
            "atol" => tol.atol = value,
            other => {
                return Err(CliError::validation(format!("unknown tolerance key '{other}'")))
            }
        }
    }
    Ok(tol)
}
