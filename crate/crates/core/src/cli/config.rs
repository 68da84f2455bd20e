//! Experiment configuration files.
//!
//! A config is a JSON object with a mandatory `scenario` section and
//! optional `detector`, `sweep`, `allocation` and `validate` sections.
//! Unknown keys are rejected everywhere. Overrides use dot paths into the
//! fully defaulted document (`--set scenario.mu_db=2`), so only keys that
//! exist can be overridden.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::detectors::DetectorKind;
use crate::powalloc::TauSearch;
use crate::randmat::ScenarioConfig;

use super::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub allocation: AllocationSection,
    #[serde(default)]
    pub validate: ValidateSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    /// Detector used by `roc` and the power sweeps.
    pub kind: DetectorKind,
    /// Detectors compared by `pe-vs-mu`.
    pub kinds: Vec<DetectorKind>,
    pub target_pf: f64,
    /// Noise-only trials used to calibrate each threshold.
    pub trials: usize,
}

impl Default for DetectorSection {
    fn default() -> Self {
        DetectorSection {
            kind: DetectorKind::Scn,
            kinds: DetectorKind::ALL.to_vec(),
            target_pf: 0.05,
            trials: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub mu_db: Vec<f64>,
    pub p_dbm: Vec<f64>,
    /// Thresholds for `roc` and `pe-vs-tau`.
    pub tau: Vec<f64>,
    /// Rate targets for `allocate`; empty means `allocation.r_min` only.
    pub r_min: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            mu_db: vec![0.0, 2.0, 4.0],
            p_dbm: (0..=20).map(|i| 0.5 * i as f64).collect(),
            tau: vec![
                1.1, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0, 7.0, 8.0, 10.0, 12.0, 15.0, 20.0,
            ],
            r_min: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AllocationSection {
    pub r_min: f64,
    pub tau_lo: f64,
    pub tau_hi: f64,
    pub tau_tol: f64,
}

impl Default for AllocationSection {
    fn default() -> Self {
        let s = TauSearch::default();
        AllocationSection {
            r_min: 0.0,
            tau_lo: s.lo,
            tau_hi: s.hi,
            tau_tol: s.tolerance,
        }
    }
}

impl AllocationSection {
    pub fn tau_search(&self) -> TauSearch {
        TauSearch {
            lo: self.tau_lo,
            hi: self.tau_hi,
            tolerance: self.tau_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    pub l: Vec<usize>,
    pub tau: Vec<f64>,
    pub gamma_e: Vec<f64>,
    /// Monte Carlo trials per (L, gamma_e) cell.
    pub trials: usize,
    pub rate_n_u: Vec<u32>,
    pub rate_rho: Vec<f64>,
    pub rate_draws: usize,
}

impl Default for ValidateSection {
    fn default() -> Self {
        ValidateSection {
            l: vec![2, 4, 8, 16],
            tau: vec![1.5, 2.0, 3.0, 5.0, 8.0],
            gamma_e: vec![0.5, 1.0, 2.0, 4.0],
            trials: 100_000,
            rate_n_u: vec![1, 2, 4],
            rate_rho: vec![0.1, 1.0, 10.0, 100.0],
            rate_draws: 1_000_000,
        }
    }
}

impl ExperimentConfig {
    /// Checks every section, naming the first violated invariant.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(format!("validation error: {m}")));
        if let Err(e) = self.scenario.validate() {
            return bad(format!("scenario: {e}"));
        }
        let d = &self.detector;
        if !(d.target_pf > 0.0 && d.target_pf < 1.0) {
            return bad("detector.target_pf must lie in (0, 1)".into());
        }
        if (d.trials as f64) * d.target_pf < 20.0 {
            return bad("detector.trials * detector.target_pf must be >= 20".into());
        }
        if d.kinds.is_empty() {
            return bad("detector.kinds must not be empty".into());
        }
        let s = &self.sweep;
        if s.mu_db.iter().any(|&m| !(m >= 0.0)) {
            return bad("sweep.mu_db entries must be >= 0".into());
        }
        if s.p_dbm.iter().any(|p| !p.is_finite()) {
            return bad("sweep.p_dbm entries must be finite".into());
        }
        if s.tau.is_empty() || s.tau.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("sweep.tau must be non-empty and strictly increasing".into());
        }
        if s.r_min.iter().any(|&r| !(r >= 0.0)) {
            return bad("sweep.r_min entries must be >= 0".into());
        }
        if !(self.allocation.r_min >= 0.0) {
            return bad("allocation.r_min must be >= 0".into());
        }
        if let Err(e) = self.allocation.tau_search().validate() {
            return bad(format!("allocation: {e}"));
        }
        let v = &self.validate;
        if v.l.iter().any(|&l| l < 2 || l < self.scenario.n_r) {
            return bad("validate.l entries must be >= max(2, n_r)".into());
        }
        if v.tau.iter().any(|&t| !(t > 1.0)) {
            return bad("validate.tau entries must be > 1".into());
        }
        if v.gamma_e.iter().any(|&g| !(g > 0.0)) {
            return bad("validate.gamma_e entries must be > 0".into());
        }
        if v.trials == 0 || v.rate_draws == 0 {
            return bad("validate trial counts must be positive".into());
        }
        if v.rate_n_u.contains(&0) || v.rate_rho.iter().any(|&r| !(r > 0.0)) {
            return bad("validate.rate_n_u must be >= 1 and rate_rho > 0".into());
        }
        Ok(())
    }
}

/// Parses `text` (the contents of a config file) and applies overrides.
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<ExperimentConfig, CliError> {
    let raw: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("parse error: {e}")))?;
    if raw.pointer("/scenario/seed").is_none_or(Value::is_null) {
        return Err(CliError::Config(
            "validation error: scenario.seed is required (seeds are mandatory for reproducibility)".into(),
        ));
    }
    let base: ExperimentConfig =
        serde_json::from_value(raw).map_err(|e| CliError::Config(format!("parse error: {e}")))?;
    let config = if overrides.is_empty() {
        base
    } else {
        let mut doc = serde_json::to_value(&base).map_err(|e| CliError::Config(e.to_string()))?;
        for (key, value) in overrides {
            apply_override(&mut doc, key, value)?;
        }
        serde_json::from_value(doc)
            .map_err(|e| CliError::Config(format!("override produced an invalid config: {e}")))?
    };
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path, overrides: &[(String, String)]) -> Result<ExperimentConfig, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, overrides)
}

/// Splits `key=value`.
pub fn parse_override(arg: &str) -> Result<(String, String), CliError> {
    match arg.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(CliError::Config(format!(
            "override '{arg}' is not of the form key=value"
        ))),
    }
}

fn apply_override(doc: &mut Value, key: &str, value: &str) -> Result<(), CliError> {
    let mut node = doc;
    for part in key.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(part),
            _ => None,
        }
        .ok_or_else(|| CliError::Config(format!("override key '{key}' does not exist")))?;
    }
    // JSON literal if it parses, bare string otherwise.
    *node = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    Ok(())
}
