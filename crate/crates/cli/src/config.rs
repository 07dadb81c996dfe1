//! The TOML run configuration.

use std::path::{Path, PathBuf};

use levytopic::corpus::{ChunkingSpec, CleanOptions};
use levytopic::flow::PipelineConfig;
use levytopic::inference::{GridSpec, SimBudget, StartLaw};
use levytopic::levy::LambdaGrid;
use levytopic::topics::LdaConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    Text,
    ThreadJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub id: String,
    pub path: PathBuf,
    pub kind: SourceKind,
    /// Label used to group threads in the depth regression.
    #[serde(default)]
    pub group: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanConfig {
    pub strip_accents: bool,
    pub metadata_patterns: Vec<String>,
    pub n_top_words: usize,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            strip_accents: false,
            metadata_patterns: Vec::new(),
            n_top_words: 15,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkConfig {
    pub k_list: Vec<usize>,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        ChunkConfig {
            k_list: ChunkingSpec::default_sweep(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaGridConfig {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
    pub sims_per_cell: usize,
}

impl Default for LambdaGridConfig {
    fn default() -> Self {
        LambdaGridConfig {
            lo: 1e-4,
            hi: 1e4,
            cells: 96,
            sims_per_cell: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    Stationary,
    Conditional,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LikelihoodConfig {
    pub start: StartKind,
    pub sims_per_step: usize,
}

impl Default for LikelihoodConfig {
    fn default() -> Self {
        LikelihoodConfig {
            start: StartKind::Conditional,
            sims_per_step: 200,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub null: bool,
    pub error_weighted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryConfig {
    pub n_topics: usize,
    pub alpha: f64,
    pub points: usize,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            n_topics: 20,
            alpha: 0.1,
            points: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub n_topics: usize,
    pub alpha: f64,
    pub points: usize,
    pub mu: f64,
    pub sigma: f64,
    pub density_lambdas: Vec<f64>,
    pub resolution: usize,
    pub v_prev: Vec<f64>,
    pub recovery: RecoveryConfig,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            n_topics: 3,
            alpha: 0.3,
            points: 25,
            mu: 1.0,
            sigma: 1.0,
            density_lambdas: vec![0.0, 10.0],
            resolution: 60,
            v_prev: vec![0.38, 1e-5, 0.62 - 1e-5],
            recovery: RecoveryConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreesConfig {
    pub min_depth: usize,
    /// Chunk size whose fitted mu is regressed on average depth; defaults to
    /// the largest k in `chunk.k_list`.
    pub regress_k: Option<usize>,
}

impl Default for TreesConfig {
    fn default() -> Self {
        TreesConfig {
            min_depth: 2,
            regress_k: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub svg: bool,
    pub posterior_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            svg: true,
            posterior_csv: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub sources: Vec<SourceConfig>,
    #[serde(default)]
    pub clean: CleanConfig,
    #[serde(default)]
    pub chunk: ChunkConfig,
    #[serde(default)]
    pub lda: LdaConfig,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub lambda_grid: LambdaGridConfig,
    #[serde(default)]
    pub likelihood: LikelihoodConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub trees: TreesConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("levytopic-out")
}

impl RunConfig {
    /// Reads a config file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Some(c) = self.cache_dir.as_mut() {
            fix(c);
        }
        for s in &mut self.sources {
            fix(&mut s.path);
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir
            .clone()
            .unwrap_or_else(|| self.output_dir.join("cache"))
    }

    /// Checks the invariants that hold for every command.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut ids = std::collections::BTreeSet::new();
        for s in &self.sources {
            if s.id.is_empty() || s.id.contains(['/', '\\']) || s.id.starts_with('.') {
                return Err(CliError::Config(format!("invalid source id {:?}", s.id)));
            }
            if !ids.insert(&s.id) {
                return Err(CliError::Config(format!("duplicate source id {:?}", s.id)));
            }
            if !s.path.is_file() {
                return Err(CliError::Config(format!(
                    "source {}: {} does not exist",
                    s.id,
                    s.path.display()
                )));
            }
        }
        if self.chunk.k_list.is_empty() || self.chunk.k_list.contains(&0) {
            return Err(CliError::Config(
                "chunk.k_list must hold positive sizes".into(),
            ));
        }
        self.grid
            .validate()
            .map_err(|e| CliError::Config(format!("grid: {e}")))?;
        let g = &self.lambda_grid;
        if !(g.lo > 0.0 && g.hi > g.lo && g.cells >= 2) {
            return Err(CliError::Config(
                "lambda_grid needs 0 < lo < hi and cells >= 2".into(),
            ));
        }
        if g.sims_per_cell < levytopic::levy::MIN_JUMP_SAMPLES {
            return Err(CliError::Config(format!(
                "lambda_grid.sims_per_cell must be at least {}",
                levytopic::levy::MIN_JUMP_SAMPLES
            )));
        }
        if self.likelihood.start == StartKind::Conditional && self.likelihood.sims_per_step < 2 {
            return Err(CliError::Config(
                "likelihood.sims_per_step must be at least 2".into(),
            ));
        }
        Ok(())
    }

    /// The master seed: the flag wins over the config; one is required.
    pub fn master_seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        flag.or(self.seed).ok_or_else(|| {
            CliError::Config("a seed is required: pass --seed or set `seed` in the config".into())
        })
    }

    pub fn clean_options(&self) -> CleanOptions {
        CleanOptions {
            strip_accents: self.clean.strip_accents,
            metadata_patterns: self.clean.metadata_patterns.clone(),
        }
    }

    pub fn budget(&self) -> SimBudget {
        let g = &self.lambda_grid;
        SimBudget {
            lambda_grid: LambdaGrid::log_spaced(g.lo, g.hi, g.cells, g.sims_per_cell),
            start: match self.likelihood.start {
                StartKind::Stationary => StartLaw::Stationary,
                StartKind::Conditional => StartLaw::Conditional {
                    sims_per_step: self.likelihood.sims_per_step,
                },
            },
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            n_top_words: self.clean.n_top_words,
            lda: self.lda.clone(),
            grid: self.grid.clone(),
            budget: self.budget(),
        }
    }

    pub fn k_list(&self) -> Vec<usize> {
        let mut ks = self.chunk.k_list.clone();
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}
