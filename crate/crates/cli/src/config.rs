use std::fs;
use std::path::Path;

use kljn_core::lifetime::LifetimeParams;
use kljn_core::protocol::ExchangeConfig;
use kljn_core::vanet::{LinkParams, ScenarioSettings, TopologySpec, TrafficModel};
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackPlan {
    /// Intermediate-level periods collected per orientation.
    pub per_orientation: u64,
    /// Injection amplitudes relative to the RMS wire current.
    pub relative_amplitudes: Vec<f64>,
    pub injection_periods: u64,
}

impl Default for AttackPlan {
    fn default() -> Self {
        Self {
            per_orientation: 5_000,
            relative_amplitudes: vec![1e-12, 1e-10, 1e-9, 1e-8, 1e-6, 1e-3],
            injection_periods: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BerPlan {
    pub gammas: Vec<f64>,
    pub runs: u64,
}

impl Default for BerPlan {
    fn default() -> Self {
        Self {
            gammas: vec![10.0, 30.0, 100.0],
            runs: 1_000,
        }
    }
}

/// Everything a run can be configured with; every section is optional.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub exchange: ExchangeConfig,
    /// Secure bits to collect per key exchange.
    pub key_bits: usize,
    pub lifetime: LifetimeParams,
    pub topology: TopologySpec,
    pub link: LinkParams,
    pub traffic: TrafficModel,
    pub scenario: ScenarioSettings,
    pub attack: AttackPlan,
    pub ber: BerPlan,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            exchange: ExchangeConfig::default(),
            key_bits: 100,
            lifetime: LifetimeParams::default(),
            topology: TopologySpec::single_lane(),
            link: LinkParams::default(),
            traffic: TrafficModel::default(),
            scenario: ScenarioSettings::default(),
            attack: AttackPlan::default(),
            ber: BerPlan::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|msg| CliError::Config(format!("{}: {msg}", path.display())))
    }

    /// Parse JSON, naming the offending field on failure.
    pub fn parse(text: &str) -> Result<Self, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                e.inner().to_string()
            } else {
                format!("{path}: {}", e.inner())
            }
        })
    }

    /// `--seed` beats the config file, which beats the built-in default.
    pub fn resolve_seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(DEFAULT_SEED)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_all_defaults() {
        assert_eq!(RunConfig::parse("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn errors_name_the_field() {
        let err = RunConfig::parse(r#"{"exchange": {"line": {"r_low": "ten"}}}"#).unwrap_err();
        assert!(err.starts_with("exchange.line.r_low"), "{err}");
        let err = RunConfig::parse(r#"{"traffic": {"fleet": 3}}"#).unwrap_err();
        assert!(err.contains("traffic") && err.contains("fleet"), "{err}");
    }

    #[test]
    fn seed_precedence() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.resolve_seed(None), DEFAULT_SEED);
        cfg.seed = Some(4);
        assert_eq!(cfg.resolve_seed(None), 4);
        assert_eq!(cfg.resolve_seed(Some(9)), 9);
    }
}
