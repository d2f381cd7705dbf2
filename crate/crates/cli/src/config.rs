//! TOML-backed configuration for the run, forge, and eval commands. Every
//! section has full defaults; paths are required only when the command that
//! needs them actually runs.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use requery_core::advantage::{Algorithm, AdvantageConfig};
use requery_core::episode::EpisodeConfig;
use requery_core::policy::ScriptedKind;
use requery_core::reward::RewardConfig;
use requery_core::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Scripted,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicySection {
    pub kind: PolicyKind,
    /// Which built-in behavior to use when `kind` is scripted.
    pub scripted: ScriptedKind,
    /// Base URL of the generation service when `kind` is remote.
    pub endpoint: Option<String>,
    pub return_logprobs: bool,
    pub max_retries: u32,
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection {
            kind: PolicyKind::Scripted,
            scripted: ScriptedKind::Oracle,
            endpoint: None,
            return_logprobs: false,
            max_retries: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Lexical,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerSection {
    pub kind: ScorerKind,
    /// Base URL of the reranking service when `kind` is remote.
    pub endpoint: Option<String>,
    pub threshold: Scalar,
    pub max_retries: u32,
}

impl Default for ScorerSection {
    fn default() -> Self {
        ScorerSection {
            kind: ScorerKind::Lexical,
            endpoint: None,
            threshold: 0.7,
            max_retries: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdvantageSection {
    pub algorithm: Algorithm,
    #[serde(flatten)]
    pub config: AdvantageConfig,
}

impl Default for AdvantageSection {
    fn default() -> Self {
        AdvantageSection {
            algorithm: Algorithm::Grpo,
            config: AdvantageConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Episodes per sample.
    pub group_size: usize,
    pub base_seed: u64,
    /// Label used in reports; the dataset file stem when absent.
    pub dataset_name: Option<String>,
    pub policy: PolicySection,
    pub scorer: ScorerSection,
    pub episode: EpisodeConfig,
    pub reward: RewardConfig,
    pub advantage: AdvantageSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            dataset: None,
            out_dir: None,
            group_size: 4,
            base_seed: 17,
            dataset_name: None,
            policy: PolicySection::default(),
            scorer: ScorerSection::default(),
            episode: EpisodeConfig::default(),
            reward: RewardConfig::default(),
            advantage: AdvantageSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewriterKind {
    Template,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewriterSection {
    pub kind: RewriterKind,
    /// Base URL of the rewriting service when `kind` is remote.
    pub endpoint: Option<String>,
    /// Documents injected per fictional sample (template rewriter).
    pub support_docs: usize,
    pub max_retries: u32,
}

impl Default for RewriterSection {
    fn default() -> Self {
        RewriterSection {
            kind: RewriterKind::Template,
            endpoint: None,
            support_docs: 1,
            max_retries: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForgeConfig {
    /// Seed samples to rewrite, one JSON object per line.
    pub seeds: Option<PathBuf>,
    /// Base corpus the fictional material must not leak into.
    pub corpus: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Fraction of seed samples to fictionalize.
    pub fraction: f64,
    pub seed: u64,
    pub rewriter: RewriterSection,
}

impl Default for ForgeConfig {
    fn default() -> Self {
        ForgeConfig {
            seeds: None,
            corpus: None,
            out_dir: None,
            fraction: 0.5,
            seed: 17,
            rewriter: RewriterSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Existing trace file to score; drives trace mode.
    pub traces: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    /// Corpus for sweep mode, which reruns episodes.
    pub corpus: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub dataset_name: Option<String>,
    /// Non-empty budgets switch to sweep mode: one episode per sample per
    /// budget, strictly ascending.
    pub budgets: Vec<usize>,
    pub base_seed: u64,
    pub policy: PolicySection,
    pub episode: EpisodeConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            traces: None,
            dataset: None,
            corpus: None,
            out_dir: None,
            dataset_name: None,
            budgets: Vec::new(),
            base_seed: 17,
            policy: PolicySection::default(),
            episode: EpisodeConfig::default(),
        }
    }
}

pub fn load_toml<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Unwraps a path that a command cannot run without.
pub fn require(path: &Option<PathBuf>, name: &str) -> anyhow::Result<PathBuf> {
    path.clone()
        .with_context(|| format!("`{name}` is required (set it in the config or pass --{name})"))
}

/// Report label: explicit name, else the dataset file stem.
pub fn dataset_label(name: &Option<String>, dataset: &Path) -> String {
    name.clone().unwrap_or_else(|| {
        dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string())
    })
}
