//! Run configuration for the CLI: one JSON document validated up front,
//! with unknown keys rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spin::HamiltonianParams;
use crate::thermal::{DPolyParams, LatticeTable, MottSeitzParams, PhononShiftParams};

/// The bundled default configuration (see `defaults.json` next to the
/// crate manifest); its `notes` field records where each value comes from.
pub const DEFAULTS_JSON: &str = include_str!("../defaults.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub hamiltonian: HamiltonianParams,
    pub sweep: SweepConfig,
    pub thermal: ThermalConfig,
    pub io: IoConfig,
    pub tolerances: ToleranceConfig,
    /// Free-form provenance notes carried with the config.
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub direction: [f64; 3],
    pub b_min_t: f64,
    pub b_max_t: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalConfig {
    pub d_poly: DPolyParams,
    pub phonon: PhononShiftParams,
    pub mott_seitz: MottSeitzParams,
    /// (temperature K, lattice length Angstrom) rows, strictly increasing.
    pub lattice: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoConfig {
    /// Search window for the emission maximum, nm.
    pub peak_window_nm: [f64; 2],
    /// Optional exclusion window for known artifacts, nm.
    #[serde(default)]
    pub exclude_window_nm: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    pub degeneracy_hz: f64,
    pub fit_gtol: f64,
    pub fit_xtol: f64,
    pub fit_max_iterations: usize,
    pub dip_prominence: f64,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RunConfig {
    /// The repo's paper-anchored defaults.
    pub fn defaults() -> Self {
        serde_json::from_str(DEFAULTS_JSON).expect("bundled defaults.json is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Check every invariant before any computation; returns soft warnings.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        let warnings = self
            .hamiltonian
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.sweep.steps < 2 {
            return Err(ConfigError::Invalid(format!(
                "sweep.steps must be >= 2, got {}",
                self.sweep.steps
            )));
        }
        if !(self.sweep.b_min_t <= self.sweep.b_max_t) {
            return Err(ConfigError::Invalid(format!(
                "sweep range inverted: {} > {}",
                self.sweep.b_min_t, self.sweep.b_max_t
            )));
        }
        let dir_norm = self
            .sweep
            .direction
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        if !dir_norm.is_finite() || dir_norm == 0.0 {
            return Err(ConfigError::Invalid("sweep.direction must be nonzero".into()));
        }
        self.thermal
            .d_poly
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.thermal
            .phonon
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.thermal
            .mott_seitz
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.lattice_table()?;
        if !(self.io.peak_window_nm[0] < self.io.peak_window_nm[1]) {
            return Err(ConfigError::Invalid(format!(
                "peak window inverted: {:?}",
                self.io.peak_window_nm
            )));
        }
        if !(self.tolerances.degeneracy_hz > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "degeneracy tolerance must be positive, got {}",
                self.tolerances.degeneracy_hz
            )));
        }
        if !(self.tolerances.fit_gtol > 0.0)
            || !(self.tolerances.fit_xtol > 0.0)
            || self.tolerances.fit_max_iterations == 0
            || !(self.tolerances.dip_prominence > 0.0)
        {
            return Err(ConfigError::Invalid("solver tolerances must be positive".into()));
        }
        Ok(warnings)
    }

    pub fn lattice_table(&self) -> Result<LatticeTable, ConfigError> {
        LatticeTable::new(self.thermal.lattice.clone())
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_defaults_parse_and_validate() {
        let config = RunConfig::defaults();
        assert!(config.validate().unwrap().is_empty());
        assert_eq!(config.hamiltonian.d_hz, 2.88e9);
        assert_eq!(config.hamiltonian.e_nv_hz, 10.0e6);
        assert_eq!(config.io.peak_window_nm, [650.0, 850.0]);
    }

    #[test]
    fn defaults_round_trip() {
        let config = RunConfig::defaults();
        let echoed = RunConfig::from_json(&config.to_json()).unwrap();
        assert_eq!(echoed, config);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut value: serde_json::Value = serde_json::from_str(DEFAULTS_JSON).unwrap();
        value["surprise"] = serde_json::json!(1);
        assert!(RunConfig::from_json(&value.to_string()).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let mut config = RunConfig::defaults();
        config.sweep.steps = 1;
        assert!(config.validate().is_err());

        let mut config = RunConfig::defaults();
        config.hamiltonian.d_hz = -1.0;
        assert!(config.validate().is_err());

        let mut config = RunConfig::defaults();
        config.thermal.lattice = vec![(300.0, 3.5)];
        assert!(config.validate().is_err());
    }
}
