//! `search.toml`: data paths, budget, seed and model settings for a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::toy::{ToyConfig, ToyTarget};
use super::FinalizeProtocol;
use crate::controller::ControllerConfig;
use crate::corpus::{read_corpus, Example, LexiconPaths, Lexicons};
use crate::ops::OperationType;
use crate::reward::ActivityEntityLexicon;
use crate::util::read_to_string;
use crate::{Error, Result};

/// Environment fallback for `--lexicon-dir`.
pub const LEXICON_DIR_ENV: &str = "AUGSEARCH_LEXICON_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
    #[serde(default)]
    pub lexicon_dir: Option<PathBuf>,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_pretrain_epochs")]
    pub pretrain_epochs: usize,
    #[serde(default = "default_protocol")]
    pub finalize: FinalizeProtocol,
    #[serde(default = "default_all_ops_changes")]
    pub all_ops_changes: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Operation mnemonic; when set, episodes are scored by
    /// [`super::RiggedEvaluator`] instead of the target model.
    #[serde(default)]
    pub rigged_first_op: Option<String>,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub target: ToyConfig,
}

fn default_episodes() -> usize {
    50
}
fn default_pretrain_epochs() -> usize {
    20
}
fn default_protocol() -> FinalizeProtocol {
    FinalizeProtocol::Resume
}
fn default_all_ops_changes() -> usize {
    4
}
fn default_top_k() -> usize {
    3
}

impl SearchConfig {
    /// Parses TOML; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut config: SearchConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("search config: {e}")))?;
        for path in [&mut config.train, &mut config.valid, &mut config.test] {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let Some(dir) = &mut config.lexicon_dir {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be at least 1".into()));
        }
        if self.pretrain_epochs == 0 {
            return Err(Error::Config("pretrain_epochs must be at least 1".into()));
        }
        if !(1..=crate::policy::MAX_CHANGES).contains(&self.all_ops_changes) {
            return Err(Error::Config("all_ops_changes must be in 1..=4".into()));
        }
        self.rigged_op()?;
        self.controller.validate()
    }

    pub fn rigged_op(&self) -> Result<Option<OperationType>> {
        self.rigged_first_op
            .as_deref()
            .map(|m| {
                OperationType::from_mnemonic(m)
                    .ok_or_else(|| Error::Config(format!("unknown operation `{m}` in rigged_first_op")))
            })
            .transpose()
    }
}

/// Picks the lexicon directory: explicit flag, then the environment, then
/// the config file. `None` means the bundled lexicons.
pub fn resolve_lexicon_dir(flag: Option<&Path>, config: Option<&Path>) -> Option<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(LEXICON_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| config.map(Path::to_path_buf))
}

/// Loads lexicons from `dir`, or the bundled set.
pub fn load_lexicons(dir: Option<&Path>) -> Result<(Lexicons, ActivityEntityLexicon)> {
    match dir {
        None => Ok((Lexicons::bundled(), ActivityEntityLexicon::bundled())),
        Some(dir) => {
            let lex = Lexicons::load(&LexiconPaths::in_dir(dir))?;
            let activities = dir.join("activities.txt");
            let entities = dir.join("entities.txt");
            let terms = if activities.exists() || entities.exists() {
                ActivityEntityLexicon::load(&activities, &entities)?
            } else {
                ActivityEntityLexicon::bundled()
            };
            Ok((lex, terms))
        }
    }
}

/// A config with its corpora and lexicons loaded.
#[derive(Debug, Clone)]
pub struct SearchSetup {
    pub lexicons: Lexicons,
    pub terms: ActivityEntityLexicon,
    pub train: Vec<Example>,
    pub valid: Vec<Example>,
    pub test: Vec<Example>,
    pub controller: ControllerConfig,
    pub target: ToyConfig,
    pub episodes: usize,
    pub seed: u64,
    pub pretrain_epochs: usize,
    pub protocol: FinalizeProtocol,
    pub all_ops_changes: usize,
    pub top_k: usize,
    pub rigged_first_op: Option<OperationType>,
}

impl SearchSetup {
    pub fn from_config(config: &SearchConfig, lexicon_dir: Option<&Path>) -> Result<Self> {
        let (lexicons, terms) = load_lexicons(lexicon_dir)?;
        let read = |path: &Path| -> Result<Vec<Example>> {
            let corpus = read_corpus(path, &lexicons)?;
            if corpus.is_empty() {
                return Err(Error::Config(format!("{} holds no examples", path.display())));
            }
            if corpus.iter().any(|e| e.target.is_none()) {
                return Err(Error::Config(format!("{} has examples without a response", path.display())));
            }
            Ok(corpus)
        };
        Ok(SearchSetup {
            train: read(&config.train)?,
            valid: read(&config.valid)?,
            test: read(&config.test)?,
            lexicons,
            terms,
            controller: config.controller.clone(),
            target: config.target.clone(),
            episodes: config.episodes,
            seed: config.seed,
            pretrain_epochs: config.pretrain_epochs,
            protocol: config.finalize,
            all_ops_changes: config.all_ops_changes,
            top_k: config.top_k,
            rigged_first_op: config.rigged_op()?,
        })
    }

    pub fn toy_target(&self) -> Result<ToyTarget> {
        ToyTarget::new(self.target.clone(), self.terms.clone())
    }
}
