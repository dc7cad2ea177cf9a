//! Run configuration, read from TOML.
//!
//! Every section is optional and falls back to the library defaults. A
//! top-level `seed` overrides the seeds of all sections.
//!
//! ```toml
//! seed = 3
//! dataset = "ratings.tsv"   # synthetic data is generated when absent
//!
//! [synthetic]
//! n_users = 500
//!
//! [simulation]
//! n_iterations = 20
//! runs = ["tree_hybrid", "helf", { strategy = "tree_hybrid", scale = "semi_binary" }]
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use coldtree_core::synthetic::SyntheticConfig;
use coldtree_core::{
    ItemType, MfHyperparams, Scale, SimConfig, SplitConfig, Strategy, StrategyParams,
    TreeConfig,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: Option<u64>,
    /// TSV ratings file; relative paths are taken from the config file's
    /// directory.
    pub dataset: Option<PathBuf>,
    pub synthetic: SyntheticConfig,
    pub filter: FilterConfig,
    pub split: SplitConfig,
    pub mf: MfHyperparams,
    pub strategy: StrategyParams,
    pub simulation: SimulationConfig,
    pub inspect: TreeViewConfig,
    pub interactive: TreeViewConfig,
}

/// Density thresholds applied before splitting; zero disables a check.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub min_user_ratings: usize,
    pub min_ratings_per_type: BTreeMap<ItemType, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub n_iterations: usize,
    pub binarize_threshold: f64,
    pub tree_backtracking: bool,
    /// Seed of strategy-side randomness.
    pub seed: u64,
    /// Write each run's final model next to the results.
    pub dump_models: bool,
    pub runs: Vec<RunSpec>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_iterations: 20,
            binarize_threshold: 50.0,
            tree_backtracking: true,
            seed: 0,
            dump_models: false,
            runs: vec![RunSpec::Name("tree_hybrid".into()), RunSpec::Name("helf".into())],
        }
    }
}

/// A strategy name, or a table that also fixes the scale or the label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RunSpec {
    Name(String),
    Detailed(RunDetail),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDetail {
    pub strategy: String,
    pub scale: Option<Scale>,
    pub label: Option<String>,
}

impl RunSpec {
    pub fn detail(&self) -> RunDetail {
        match self {
            RunSpec::Name(s) => RunDetail {
                strategy: s.clone(),
                scale: None,
                label: None,
            },
            RunSpec::Detailed(d) => d.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeViewConfig {
    /// A tree strategy name.
    pub strategy: String,
    /// Number of tree levels shown or walked; unlimited when absent.
    pub depth: Option<usize>,
}

impl Default for TreeViewConfig {
    fn default() -> Self {
        TreeViewConfig {
            strategy: "tree_hybrid".into(),
            depth: None,
        }
    }
}

pub fn scale_name(scale: Scale) -> &'static str {
    match scale {
        Scale::Raw => "raw",
        Scale::SemiBinary => "semi_binary",
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Reads a config file and anchors its dataset path at the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg =
            Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(d) = &cfg.dataset {
            if d.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.dataset = Some(base.join(d));
            }
        }
        Ok(cfg)
    }

    /// Copy with the top-level seed pushed into every section.
    pub fn resolved(&self) -> Config {
        let mut cfg = self.clone();
        if let Some(s) = cfg.seed {
            cfg.synthetic.seed = s;
            cfg.split.seed = s;
            cfg.mf.seed = s;
            cfg.simulation.seed = s;
        }
        cfg
    }

    /// One simulation config per configured run, all sharing one split.
    pub fn sim_configs(&self) -> Result<Vec<SimConfig>> {
        let cfg = self.resolved();
        let sim = &cfg.simulation;
        if sim.runs.is_empty() {
            bail!("simulation.runs is empty");
        }
        let mut labels = BTreeSet::new();
        let mut out = Vec::new();
        for spec in &sim.runs {
            let d = spec.detail();
            let strategy = Strategy::from_name(&d.strategy, &cfg.strategy)?;
            let mut c = SimConfig::new(d.strategy.clone(), strategy);
            if let Some(scale) = d.scale {
                if scale != c.scale {
                    c.name = format!("{}_{}", d.strategy, scale_name(scale));
                }
                c.scale = scale;
            }
            if let Some(label) = d.label {
                c.name = label;
            }
            if !labels.insert(c.name.clone()) {
                bail!("run label `{}` appears twice", c.name);
            }
            c.n_iterations = sim.n_iterations;
            c.binarize_threshold = sim.binarize_threshold;
            c.tree_backtracking = sim.tree_backtracking;
            c.seed = sim.seed;
            c.mf = cfg.mf.clone();
            c.split = cfg.split.clone();
            c.validate()
                .with_context(|| format!("run `{}`", c.name))?;
            out.push(c);
        }
        Ok(out)
    }

    /// Tree settings and scale of a named tree strategy.
    pub fn tree_strategy(&self, name: &str) -> Result<(TreeConfig, Scale)> {
        let strategy = Strategy::from_name(name, &self.strategy)?;
        let scale = SimConfig::new(name, strategy.clone()).scale;
        match strategy {
            Strategy::Tree(t) => {
                t.validate()?;
                Ok((t, scale))
            }
            _ => bail!("`{name}` is not a tree strategy"),
        }
    }
}
