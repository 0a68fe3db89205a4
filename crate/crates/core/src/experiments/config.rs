//! Experiment configuration: JSON with explicit defaults, unknown keys
//! rejected, and dotted-path overrides for command-line use.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::homotopy::DriverParams;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// Output directory; overridable by `--out`.
    pub out_dir: String,
    pub seed: u64,
    pub driver: DriverParams,
    pub pendulum: PendulumConfig,
    pub flow: FlowConfig,
    pub euler: EulerConfig,
    pub scalar: ScalarConfig,
    pub qp: QpConfig,
    pub elliptic: EllipticRunConfig,
    pub table1: Table1Config,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: String::new(),
            out_dir: "out".into(),
            seed: 12345,
            driver: DriverParams::default(),
            pendulum: PendulumConfig::default(),
            flow: FlowConfig::default(),
            euler: EulerConfig::default(),
            scalar: ScalarConfig::default(),
            qp: QpConfig::default(),
            elliptic: EllipticRunConfig::default(),
            table1: Table1Config::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PendulumConfig {
    pub z0: Vec<f64>,
    pub n_perturbations: usize,
    pub perturbation_radius: f64,
}

impl Default for PendulumConfig {
    fn default() -> Self {
        Self { z0: vec![0.01, 1.0, -0.5], n_perturbations: 100, perturbation_radius: 1e-2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub rho_list: Vec<f64>,
    pub h: f64,
    pub t_final: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub record_every: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { rho_list: vec![1.0, 10.0], h: 1e-3, t_final: 50.0, gamma1: 0.5, gamma2: 0.5, record_every: 10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EulerConfig {
    pub dt_list: Vec<f64>,
    pub n_steps: usize,
    pub rho: f64,
}

impl Default for EulerConfig {
    fn default() -> Self {
        Self { dt_list: vec![1.0, 10.0, 100.0, 1000.0], n_steps: 8, rho: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalarConfig {
    pub rho_spectrum: Vec<f64>,
    pub rho_flow: Vec<f64>,
    pub t_final: f64,
    pub h: f64,
}

impl Default for ScalarConfig {
    fn default() -> Self {
        Self { rho_spectrum: vec![0.0, 1.0, 3.0, 10.0], rho_flow: vec![0.5, 2.0], t_final: 20.0, h: 1e-3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QpConfig {
    pub n_instances: usize,
    pub max_primal_dim: usize,
    pub max_dual_dim: usize,
}

impl Default for QpConfig {
    fn default() -> Self {
        Self { n_instances: 100, max_primal_dim: 20, max_dual_dim: 10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EllipticRunConfig {
    pub n: usize,
    /// Conditioning exponent: `a = 10^-p`, `b = 10^p`.
    pub p: i32,
    pub gamma: f64,
}

impl Default for EllipticRunConfig {
    fn default() -> Self {
        Self { n: 32, p: 0, gamma: 1e-2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Table1Config {
    pub p_list: Vec<i32>,
    pub n_list: Vec<usize>,
    pub gamma_list: Vec<f64>,
    pub threads: usize,
}

impl Default for Table1Config {
    fn default() -> Self {
        Self { p_list: vec![0, 1, 2], n_list: vec![16, 32, 64], gamma_list: vec![1e-3], threads: 2 }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| SolverError::Config(format!("invalid configuration: {e}")))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies a `key.path=value` override. Values parse as JSON first and
    /// fall back to strings, so `--set driver.rho=0.1` and
    /// `--set experiment=elliptic` both work.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (path, raw) = spec
            .split_once('=')
            .ok_or_else(|| SolverError::Config(format!("override `{spec}` is not key=value")))?;
        let value: serde_json::Value =
            serde_json::from_str(raw).unwrap_or(serde_json::Value::String(raw.to_string()));
        let mut tree = serde_json::to_value(&*self)
            .map_err(|e| SolverError::Config(format!("config serialization failed: {e}")))?;
        let mut node = &mut tree;
        let segments: Vec<&str> = path.split('.').collect();
        for (i, segment) in segments.iter().enumerate() {
            let object = node.as_object_mut().ok_or_else(|| {
                SolverError::Config(format!("override path `{path}` does not address a field"))
            })?;
            if i + 1 == segments.len() {
                if !object.contains_key(*segment) {
                    return Err(SolverError::Config(format!(
                        "unknown configuration key `{segment}` in `{path}`"
                    )));
                }
                object.insert(segment.to_string(), value);
                break;
            }
            node = object.get_mut(*segment).ok_or_else(|| {
                SolverError::Config(format!("unknown configuration key `{segment}` in `{path}`"))
            })?;
        }
        *self = serde_json::from_value(tree)
            .map_err(|e| SolverError::Config(format!("override `{spec}` rejected: {e}")))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let err = ExperimentConfig::from_json(r#"{"experiment":"x","no_such_key":1}"#);
        assert!(err.is_err());
    }

    #[test]
    fn roundtrip_and_override() {
        let mut c = ExperimentConfig::default();
        c.apply_override("driver.rho=0.25").unwrap();
        assert_eq!(c.driver.rho, 0.25);
        c.apply_override("experiment=elliptic").unwrap();
        assert_eq!(c.experiment, "elliptic");
        c.apply_override("table1.n_list=[8,16]").unwrap();
        assert_eq!(c.table1.n_list, vec![8, 16]);
        assert!(c.apply_override("driver.bogus=1").is_err());
        assert!(c.apply_override("nonsense").is_err());
        let text = c.to_json_pretty();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back.driver.rho, 0.25);
    }
}
