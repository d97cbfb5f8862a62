use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use lclt_lab::model::{GibbsModel, ModelSpec};
use lclt_lab::montecarlo::ChainSpec;

/// Check names whose tolerance may be overridden.
pub const CHECK_NAMES: &[&str] = &[
    "condifina",
    "connected_graph_count",
    "spanning_tree_count",
    "identity",
    "lemma_a",
    "lemma_b",
    "prop1",
    "integrals",
    "integral_i2_bound",
    "integral_i3_bound",
    "g_series",
    "g1_bound",
    "g2_bound",
    "g3_bound",
    "lclt_gap",
    "lclt_trend",
    "variance_density",
    "mc_mean",
    "mc_variance",
];

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelSpec>,
    /// The one seed behind every random choice of a run.
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub tolerance_overrides: BTreeMap<String, f64>,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub params: CommandParams,
}

/// Chain layout; the seed comes from the run seed.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub burn_in: Option<usize>,
    pub samples: Option<usize>,
    pub thinning: Option<usize>,
    pub chains: Option<usize>,
}

impl McSection {
    pub fn chain_spec(&self, seed: u64) -> ChainSpec {
        let d = ChainSpec::default();
        ChainSpec {
            seed,
            burn_in: self.burn_in.unwrap_or(d.burn_in),
            samples: self.samples.unwrap_or(d.samples),
            thinning: self.thinning.unwrap_or(d.thinning),
            chains: self.chains.unwrap_or(d.chains),
        }
    }
}

/// Per-subcommand parameters; each command reads the ones it needs.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandParams {
    /// Grid size for the `t` sweeps.
    pub t_points: Option<usize>,
    /// Random exterior configurations per check.
    pub omega_samples: Option<usize>,
    /// Largest decimation step tried by `min-r0`.
    pub r0_max: Option<i64>,
    /// Largest vertex count of `graph-tables`.
    pub kmax: Option<usize>,
    /// Random systems of `identity-check`.
    pub models: Option<usize>,
    /// Cutoff `A` of `integrals`; defaults to `δ√D/2`.
    pub a: Option<f64>,
    /// Box radii of `lclt-scan`.
    pub radii: Option<Vec<i64>>,
    /// Last power kept by `g-audit`.
    pub order: Option<usize>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("malformed config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        for (name, &tol) in &self.tolerance_overrides {
            if !CHECK_NAMES.contains(&name.as_str()) {
                return Err(ConfigError(format!("unknown check `{name}` in tolerance_overrides")));
            }
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(ConfigError(format!(
                    "tolerance for `{name}` must be finite and ≥ 0, got {tol}"
                )));
            }
        }
        if let Some(m) = &self.model {
            m.build().map_err(|e| ConfigError(format!("invalid model: {e}")))?;
        }
        Ok(())
    }

    /// The model, required by every model-based command.
    pub fn model(&self) -> Result<GibbsModel, ConfigError> {
        let spec = self
            .model
            .as_ref()
            .ok_or_else(|| ConfigError("this command needs a \"model\" in the config".into()))?;
        spec.build().map_err(|e| ConfigError(format!("invalid model: {e}")))
    }
}
