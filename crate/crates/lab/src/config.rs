//! Resolved run configurations.
//!
//! Precedence is flags > config file > defaults: a command starts from
//! `Default`, overlays the JSON config file (any subset of fields), then
//! overlays every flag that was given. The resolved value is what gets
//! embedded in the output.

use std::path::Path;

use qetlab_core::chain::SolverConfig;
use qetlab_core::cooling::OperationFamily;
use qetlab_core::{Boundary, ChainModel, PartyConfig, UnitVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

/// Overrides the largest accepted chain.
pub const CAPACITY_ENV: &str = "QETLAB_MAX_SITES";
/// Hard ceiling for the override; a 2^26 state vector is already 1 GiB.
pub const CAPACITY_CEILING: usize = 26;

pub fn capacity() -> LabResult<usize> {
    match std::env::var(CAPACITY_ENV) {
        Err(_) => Ok(qetlab_core::DEFAULT_MAX_SITES),
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(n) if (1..=CAPACITY_CEILING).contains(&n) => Ok(n),
            _ => Err(LabError::Config(format!(
                "{CAPACITY_ENV}={raw:?} must be an integer in 1..={CAPACITY_CEILING}"
            ))),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub sites: usize,
    pub h: f64,
    /// `J/h`.
    pub lambda: f64,
    pub boundary: Boundary,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            sites: 14,
            h: 1.0,
            lambda: 1.0,
            boundary: Boundary::Periodic,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> LabResult<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(LabError::Config(format!("h = {} must be positive", self.h)));
        }
        check_lambda(self.lambda)
    }

    pub fn build(&self) -> LabResult<ChainModel> {
        self.validate()?;
        let cfg = SolverConfig {
            max_sites: capacity()?,
            ..SolverConfig::default()
        };
        Ok(ChainModel::build_with(
            self.sites,
            self.h,
            self.lambda * self.h,
            self.boundary,
            &cfg,
        )?)
    }
}

pub fn check_lambda(lambda: f64) -> LabResult<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(LabError::Config(format!(
            "lambda = {lambda} outside the allowed range 0 <= lambda <= 1"
        )))
    }
}

/// Axis given as `x`, `y`, `z` or three comma-separated components.
pub fn parse_axis(s: &str) -> Result<UnitVector, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "x" => Ok(UnitVector::X),
        "y" => Ok(UnitVector::Y),
        "z" => Ok(UnitVector::Z),
        other => {
            let v: Vec<f64> = other
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| format!("axis {s:?}: {e}"))?;
            let arr: [f64; 3] = v
                .try_into()
                .map_err(|_| format!("axis {s:?} needs x, y, z or three components"))?;
            UnitVector::normalized(arr).map_err(|e| e.to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticConfig {
    pub h: f64,
    pub lambda: f64,
    pub nmax: usize,
    pub distances: Vec<usize>,
    pub spacing: usize,
}

impl Default for AnalyticConfig {
    fn default() -> Self {
        AnalyticConfig {
            h: 1.0,
            lambda: 1.0,
            nmax: 30,
            distances: (1..=30).collect(),
            spacing: qetlab_core::analytic::DEFAULT_SPACING,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub model: ModelConfig,
    pub supplier_site: i64,
    pub supplier_axis: UnitVector,
    /// Consumer sites as signed offsets from the supplier.
    pub consumers: Vec<i64>,
    pub consumer_axis: UnitVector,
    /// Adversary offset from the supplier, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adversary: Option<i64>,
    pub adversary_axis: UnitVector,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_d: Option<f64>,
    pub min_separation: usize,
    pub exactness_floor: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        let rules = qetlab_core::PlacementRules::default();
        ProtocolConfig {
            model: ModelConfig::default(),
            supplier_site: 0,
            supplier_axis: UnitVector::Y,
            consumers: vec![5],
            consumer_axis: UnitVector::X,
            adversary: None,
            adversary_axis: UnitVector::X,
            theta_d: None,
            min_separation: rules.min_separation,
            exactness_floor: rules.exactness_floor,
        }
    }
}

impl ProtocolConfig {
    pub fn rules(&self) -> qetlab_core::PlacementRules {
        qetlab_core::PlacementRules {
            min_separation: self.min_separation,
            exactness_floor: self.exactness_floor,
        }
    }

    pub fn supplier(&self) -> PartyConfig {
        PartyConfig::supplier(self.supplier_site, self.supplier_axis)
    }

    pub fn consumer_parties(&self) -> Vec<PartyConfig> {
        self.consumers
            .iter()
            .map(|d| PartyConfig::consumer(self.supplier_site + d, self.consumer_axis))
            .collect()
    }

    pub fn adversary_party(&self) -> Option<PartyConfig> {
        self.adversary
            .map(|d| PartyConfig::adversary(self.supplier_site + d, self.adversary_axis))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoolingRunConfig {
    pub model: ModelConfig,
    pub supplier_site: i64,
    pub supplier_axis: UnitVector,
    pub family: OperationFamily,
    pub grid: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Consumer spacing for the distributed-energy reference.
    pub spacing: usize,
}

impl Default for CoolingRunConfig {
    fn default() -> Self {
        let c = qetlab_core::cooling::CoolingConfig::default();
        CoolingRunConfig {
            model: ModelConfig::default(),
            supplier_site: 0,
            supplier_axis: UnitVector::Y,
            family: c.family,
            grid: c.grid,
            tolerance: c.tolerance,
            max_iterations: c.max_iterations,
            spacing: qetlab_core::analytic::DEFAULT_SPACING,
        }
    }
}

/// Scenario document for `netsim`. Unknown keys are ignored: serde cannot
/// reject them through a flattened field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(flatten)]
    pub session: qetlab_core::netsim::SessionConfig,
    #[serde(default = "default_separation")]
    pub min_separation: usize,
    #[serde(default = "default_floor")]
    pub exactness_floor: usize,
}

fn default_separation() -> usize {
    qetlab_core::PlacementRules::default().min_separation
}

fn default_floor() -> usize {
    qetlab_core::PlacementRules::default().exactness_floor
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateStage {
    Ground,
    Measured,
    Qed,
    Cooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DumpConfig {
    pub protocol: ProtocolConfig,
    pub stage: StateStage,
}

impl Default for DumpConfig {
    fn default() -> Self {
        DumpConfig {
            protocol: ProtocolConfig {
                model: ModelConfig {
                    sites: 8,
                    ..ModelConfig::default()
                },
                consumers: vec![],
                ..ProtocolConfig::default()
            },
            stage: StateStage::Ground,
        }
    }
}

/// Defaults overlaid with the config file, if one is given.
pub fn load_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> LabResult<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => read_json(p),
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> LabResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn configs_round_trip() {
        let p = ProtocolConfig {
            adversary: Some(11),
            theta_d: Some(0.25),
            consumers: vec![-5, 5],
            ..ProtocolConfig::default()
        };
        let back: ProtocolConfig = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        let c = CoolingRunConfig::default();
        let back: CoolingRunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let a = AnalyticConfig::default();
        let back: AnalyticConfig = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let p: ProtocolConfig = serde_json::from_str(r#"{"model": {"sites": 10}}"#).unwrap();
        assert_eq!(p.model.sites, 10);
        assert_eq!(p.model.lambda, 1.0);
        assert_eq!(p.consumers, vec![5]);
        assert!(serde_json::from_str::<ProtocolConfig>(r#"{"sitez": 1}"#).is_err());
    }

    #[test]
    fn axes_parse() {
        assert_eq!(parse_axis("Y").unwrap(), UnitVector::Y);
        let a = parse_axis("1,1,0").unwrap().components();
        assert!((a[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(parse_axis("1,0").is_err());
        assert!(parse_axis("w").is_err());
    }

    #[test]
    fn lambda_range_message() {
        let e = check_lambda(1.5).unwrap_err().to_string();
        assert!(e.contains("0 <= lambda <= 1"));
    }
}
