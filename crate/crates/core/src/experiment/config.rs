//! Experiment configuration (TOML).
//!
//! Every field has a default reproducing the reference settings, so an
//! empty file is a valid config. Command-line flags override file values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg2::Mat2;
use crate::model::ModelParams;
use crate::plan::TreatmentPlan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the pool pick one per core.
    pub threads: usize,
    pub out: PathBuf,
    pub model: ModelConfig,
    pub plans: PlansConfig,
    pub bias_table: BiasTableConfig,
    pub simulate: SimulateConfig,
    pub zeta: ZetaConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub beta: [[f64; 2]; 2],
    pub sigma: [[f64; 2]; 2],
    pub init_mean: [f64; 2],
    pub init_cov: [[f64; 2]; 2],
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlansConfig {
    pub star: TreatmentPlan,
    pub base: TreatmentPlan,
}

/// Sweep for the analytic bias table. Unswept model entries come from
/// `[model]`; the plan is `plans.star`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasTableConfig {
    pub beta11: Vec<f64>,
    pub beta21: Vec<f64>,
    pub beta12: Vec<f64>,
    pub j: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub j: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZetaConfig {
    pub beta12: Vec<f64>,
    pub j: Vec<usize>,
    pub n: usize,
    pub bootstrap: usize,
    pub alpha: f64,
    pub replicates: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 20230601,
            threads: 0,
            out: PathBuf::from("out"),
            model: ModelConfig::default(),
            plans: PlansConfig::default(),
            bias_table: BiasTableConfig::default(),
            simulate: SimulateConfig::default(),
            zeta: ZetaConfig::default(),
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::from_params(&ModelParams::reference(-5.0))
    }
}

impl Default for PlansConfig {
    fn default() -> Self {
        PlansConfig { star: TreatmentPlan::constant(1.0), base: TreatmentPlan::constant(0.0) }
    }
}

impl Default for BiasTableConfig {
    fn default() -> Self {
        BiasTableConfig {
            beta11: vec![-0.5, 0.2, 1.0],
            beta21: vec![-3.0, 0.0, 3.0],
            beta12: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            j: (0..=14).map(|e| 1usize << e).collect(),
        }
    }
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { j: 100, n: 10 }
    }
}

impl Default for ZetaConfig {
    fn default() -> Self {
        ZetaConfig {
            beta12: (3..=10).rev().map(|b| -(b as f64)).collect(),
            j: (1..=10).map(|k| 4 * k).collect(),
            n: 200,
            bootstrap: 500,
            alpha: 0.05,
            replicates: 20,
        }
    }
}

impl ModelConfig {
    pub fn from_params(p: &ModelParams) -> Self {
        ModelConfig {
            beta: p.beta.rows(),
            sigma: p.sigma.rows(),
            init_mean: p.init_mean,
            init_cov: p.init_cov.rows(),
            horizon: p.horizon,
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(
            Mat2::from_rows(self.beta),
            Mat2::from_rows(self.sigma),
            self.init_mean,
            Mat2::from_rows(self.init_cov),
            self.horizon,
        )
    }

    /// Parameters with selected drift entries replaced.
    pub fn params_with(
        &self,
        beta11: Option<f64>,
        beta12: Option<f64>,
        beta21: Option<f64>,
    ) -> Result<ModelParams> {
        let mut p = self.params()?;
        if let Some(v) = beta11 {
            p.beta.a11 = v;
        }
        if let Some(v) = beta12 {
            p.beta.a12 = v;
        }
        if let Some(v) = beta21 {
            p.beta.a21 = v;
        }
        p.validate()?;
        Ok(p)
    }
}

impl ExperimentConfig {
    /// Parses and validates. `source` is used to attach line numbers to
    /// validation failures.
    pub fn from_toml_str(source: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(source).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate_with_source(Some(source))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&source).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_source(None)
    }

    fn validate_with_source(&self, source: Option<&str>) -> Result<()> {
        let fail = |path: &str, msg: String| {
            let line = source.and_then(|s| locate_key(s, path));
            Err(Error::Config(match line {
                Some(l) => format!("line {l} ({path}): {msg}"),
                None => format!("{path}: {msg}"),
            }))
        };

        let params = match self.model.params() {
            Ok(p) => p,
            Err(e) => return fail("model", e.to_string()),
        };
        for (name, plan) in [("plans.star", &self.plans.star), ("plans.base", &self.plans.base)] {
            if let Err(e) = plan.validate(params.horizon) {
                return fail(name, e.to_string());
            }
        }

        let bt = &self.bias_table;
        for (name, list) in [
            ("bias_table.beta11", &bt.beta11),
            ("bias_table.beta21", &bt.beta21),
            ("bias_table.beta12", &bt.beta12),
        ] {
            if list.is_empty() {
                return fail(name, "sweep must not be empty".into());
            }
            if list.iter().any(|v| !v.is_finite()) {
                return fail(name, "sweep values must be finite".into());
            }
        }
        if bt.j.is_empty() {
            return fail("bias_table.j", "sweep must not be empty".into());
        }
        if let Some(j) = bt.j.iter().find(|&&j| j < 1) {
            return fail("bias_table.j", format!("J values must be >= 1, got {j}"));
        }

        if self.simulate.j < 1 {
            return fail("simulate.j", "J must be >= 1".into());
        }
        if self.simulate.n < 1 {
            return fail("simulate.n", "n must be >= 1".into());
        }

        let z = &self.zeta;
        if z.beta12.is_empty() {
            return fail("zeta.beta12", "sweep must not be empty".into());
        }
        if z.beta12.iter().any(|v| !v.is_finite()) {
            return fail("zeta.beta12", "sweep values must be finite".into());
        }
        if z.j.is_empty() {
            return fail("zeta.j", "sweep must not be empty".into());
        }
        if let Some(j) = z.j.iter().find(|&&j| j < 2 || j % 2 != 0) {
            return fail("zeta.j", format!("J values for zeta runs must be even and >= 2, got {j}"));
        }
        if z.n < 2 {
            return fail("zeta.n", format!("n must be >= 2, got {}", z.n));
        }
        if z.bootstrap < 2 {
            return fail(
                "zeta.bootstrap",
                format!("need at least 2 bootstrap replicates, got {}", z.bootstrap),
            );
        }
        if !(z.alpha > 0.0 && z.alpha < 1.0) {
            return fail("zeta.alpha", format!("alpha must lie in (0, 1), got {}", z.alpha));
        }
        if z.replicates < 1 {
            return fail("zeta.replicates", "need at least 1 replicate".into());
        }
        Ok(())
    }
}

/// 1-based line of a dotted key path such as `zeta.j`, found either as
/// `key = ...` inside `[section]` or as a sub-table header.
pub fn locate_key(source: &str, path: &str) -> Option<usize> {
    let parts: Vec<&str> = path.split('.').collect();
    for split in (0..parts.len()).rev() {
        let section = parts[..split].join(".");
        let key = parts[split];
        let mut current = String::new();
        for (i, raw) in source.lines().enumerate() {
            let line = raw.trim();
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.trim_start_matches('[').split(']').next().unwrap_or("").trim();
                if name == path {
                    return Some(i + 1);
                }
                current = name.to_string();
                continue;
            }
            if current == section {
                if let Some(rest) = line.strip_prefix(key) {
                    if rest.trim_start().starts_with('=') {
                        return Some(i + 1);
                    }
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn round_trip_default() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn odd_zeta_j_reports_line() {
        let src = "seed = 1\n\n[zeta]\nn = 50\nj = [4, 5]\n";
        let err = ExperimentConfig::from_toml_str(src).unwrap_err().to_string();
        assert!(err.contains("line 5"), "{err}");
        assert!(err.contains("even"), "{err}");
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = ExperimentConfig::from_toml_str("seed = 1\n[model\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(ExperimentConfig::from_toml_str("[zeta]\nbootstrapp = 3\n").is_err());
    }

    #[test]
    fn bad_plan_reports_section() {
        let src =
            "[plans.star]\nkind = \"piecewise-constant\"\nbreakpoints = [0.0, 5.0]\nvalues = [1.0, 2.0]\n";
        let err = ExperimentConfig::from_toml_str(src).unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
    }

    #[test]
    fn locate_inline_and_nested() {
        let src = "[model]\nhorizon = 2.0\n[plans]\nstar = { kind = \"constant\", value = 1.0 }\n";
        assert_eq!(locate_key(src, "model.horizon"), Some(2));
        assert_eq!(locate_key(src, "plans.star"), Some(4));
        assert_eq!(locate_key(src, "zeta.j"), None);
    }
}
