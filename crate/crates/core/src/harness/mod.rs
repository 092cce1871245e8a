//! The search loop: sample a policy, augment the training corpus, fine-tune
//! the target model from a shared converged checkpoint for one epoch, score
//! it on validation data, and feed the weighted F1 back to the controller.

mod config;
mod log;
pub mod toy;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use config::{load_lexicons, resolve_lexicon_dir, SearchConfig, SearchSetup, LEXICON_DIR_ENV};
pub use log::{EpisodeRecord, EpisodeStatus, SearchLog};

use crate::controller::{Controller, ControllerConfig, ControllerMode, SampledPolicyRecord};
use crate::corpus::{Context, Example, Lexicons};
use crate::ops::{apply_coarse, CoarseOperation, OperationType};
use crate::policy::{augment_corpus, augment_corpus_with, Policy};
use crate::reward::RewardReport;
use crate::util::{stream_rng, write_atomic};
use crate::{Error, Result};

/// Opaque, versioned target-model state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetCheckpoint {
    pub kind: String,
    pub version: u32,
    pub payload: Vec<u8>,
}

const TARGET_MAGIC: &[u8; 8] = b"AUGSTGT\0";

impl TargetCheckpoint {
    pub fn expect_kind(&self, kind: &str, version: u32) -> Result<()> {
        if self.kind != kind || self.version != version {
            return Err(Error::Checkpoint(format!(
                "expected {kind} v{version} checkpoint, found {} v{}",
                self.kind, self.version
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.kind.len() + self.payload.len());
        out.extend_from_slice(TARGET_MAGIC);
        out.extend_from_slice(&(self.kind.len() as u32).to_le_bytes());
        out.extend_from_slice(self.kind.as_bytes());
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = || Error::Checkpoint("malformed target checkpoint".into());
        let rest = bytes.strip_prefix(TARGET_MAGIC.as_slice()).ok_or_else(bad)?;
        let (len, rest) = rest.split_at_checked(4).ok_or_else(bad)?;
        let len = u32::from_le_bytes(len.try_into().expect("4 bytes")) as usize;
        let (kind, rest) = rest.split_at_checked(len).ok_or_else(bad)?;
        let kind = String::from_utf8(kind.to_vec()).map_err(|_| bad())?;
        let (version, rest) = rest.split_at_checked(4).ok_or_else(bad)?;
        let version = u32::from_le_bytes(version.try_into().expect("4 bytes"));
        let (len, payload) = rest.split_at_checked(8).ok_or_else(bad)?;
        let len = u64::from_le_bytes(len.try_into().expect("8 bytes")) as usize;
        if payload.len() != len {
            return Err(bad());
        }
        Ok(TargetCheckpoint {
            kind,
            version,
            payload: payload.to_vec(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::Checkpoint(format!("missing checkpoint {}", path.display()))
            } else {
                Error::io(path, e)
            }
        })?;
        Self::from_bytes(&bytes)
    }
}

/// The task model whose validation score rewards the controller.
pub trait TargetModel {
    /// Restores a saved state.
    fn resume(&mut self, checkpoint: &TargetCheckpoint) -> Result<()>;
    /// Returns to freshly initialised weights.
    fn reset(&mut self);
    /// One pass over `corpus`, each example exactly once.
    fn train_one_epoch(&mut self, corpus: &[Example]) -> Result<()>;
    /// Deterministic given the model state and `corpus`.
    fn evaluate(&self, corpus: &[Example]) -> Result<RewardReport>;
    fn save(&self) -> TargetCheckpoint;
}

/// Which policy augments which training example.
#[derive(Debug, Clone, Copy)]
pub enum PolicyAssignment<'a> {
    Shared(&'a Policy),
    PerExample(&'a [Policy]),
}

/// Turns a policy assignment into a validation reward.
pub trait EpisodeEvaluator {
    fn evaluate_episode(&mut self, policies: PolicyAssignment<'_>, seed: u64) -> Result<RewardReport>;
}

/// The standard episode: resume from the converged checkpoint, train one
/// epoch on the augmented corpus, evaluate on validation.
pub struct TargetEpisodes<'a, T> {
    pub target: T,
    pub checkpoint: &'a TargetCheckpoint,
    pub lexicons: &'a Lexicons,
    pub train: &'a [Example],
    pub valid: &'a [Example],
}

impl<T: TargetModel> EpisodeEvaluator for TargetEpisodes<'_, T> {
    fn evaluate_episode(&mut self, policies: PolicyAssignment<'_>, seed: u64) -> Result<RewardReport> {
        let augmented = match policies {
            PolicyAssignment::Shared(policy) => augment_corpus(self.train, policy, self.lexicons, seed),
            PolicyAssignment::PerExample(list) => {
                if list.len() != self.train.len() {
                    return Err(Error::InvalidArgument(format!(
                        "{} policies for {} training examples",
                        list.len(),
                        self.train.len()
                    )));
                }
                augment_corpus_with(self.train, |i| &list[i], self.lexicons, seed)
            }
        };
        self.target.resume(self.checkpoint)?;
        self.target.train_one_epoch(&augmented.examples)?;
        self.target.evaluate(self.valid)
    }
}

/// Scores a policy 1 when its first operation has the wanted type, else 0.
/// Exercises the controller without training anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RiggedEvaluator {
    pub wanted: OperationType,
}

impl EpisodeEvaluator for RiggedEvaluator {
    fn evaluate_episode(&mut self, policies: PolicyAssignment<'_>, _seed: u64) -> Result<RewardReport> {
        let first = match policies {
            PolicyAssignment::Shared(policy) => policy,
            PolicyAssignment::PerExample(list) => list
                .first()
                .ok_or_else(|| Error::InvalidArgument("no policies to score".into()))?,
        };
        let hit = first.sub_policies[0].ops[0].op_type == self.wanted;
        Ok(RewardReport::new(if hit { 1.0 } else { 0.0 }, 0.0, 1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub controller: ControllerConfig,
    pub episodes: usize,
    pub seed: u64,
    /// Controller checkpoint rewritten after every episode.
    pub checkpoint_path: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: Policy,
    pub best_episode: usize,
    pub log: SearchLog,
    pub controller: Controller,
}

const CONTROLLER_INIT_STREAM: u64 = 1;
const CONTROLLER_SAMPLE_STREAM: u64 = 2;
const AUGMENT_SEED_STREAM: u64 = 3;

/// Runs the controller / target loop for `options.episodes` episodes.
///
/// Input-agnostic controllers sample one policy per episode. Input-aware
/// controllers sample one policy per training source (`sources`), and the
/// episode reward is credited to every one of them.
pub fn search(
    evaluator: &mut dyn EpisodeEvaluator,
    sources: &[Context],
    options: &SearchOptions,
) -> Result<SearchOutcome> {
    if options.episodes == 0 {
        return Err(Error::InvalidArgument("the episode budget must be at least 1".into()));
    }
    let aware = options.controller.mode == ControllerMode::Aware;
    if aware && sources.is_empty() {
        return Err(Error::InvalidArgument("input-aware search needs training sources".into()));
    }
    let mut init_rng = stream_rng(options.seed, CONTROLLER_INIT_STREAM);
    let mut controller = Controller::new(options.controller.clone(), &mut init_rng)?;
    let mut sample_rng = stream_rng(options.seed, CONTROLLER_SAMPLE_STREAM);
    let mut seed_rng = stream_rng(options.seed, AUGMENT_SEED_STREAM);
    let mut log = SearchLog::default();

    for episode in 0..options.episodes {
        let started = Instant::now();
        let records: Vec<SampledPolicyRecord> = if aware {
            sources
                .iter()
                .map(|s| controller.sample_policy(Some(s), &mut sample_rng))
                .collect::<Result<_>>()?
        } else {
            vec![controller.sample_policy(None, &mut sample_rng)?]
        };
        let augment_seed: u64 = seed_rng.random();
        let policies: Vec<Policy> = records.iter().map(|r| r.policy).collect();
        let assignment = if aware {
            PolicyAssignment::PerExample(&policies)
        } else {
            PolicyAssignment::Shared(&policies[0])
        };
        let record = match evaluator.evaluate_episode(assignment, augment_seed) {
            Ok(report) => {
                let rewards = vec![report.weighted; records.len()];
                let stats = controller.reinforce_update(&records, &rewards)?;
                EpisodeRecord::succeeded(
                    episode,
                    &policies[0],
                    records.len(),
                    &report,
                    stats.baseline,
                    started.elapsed(),
                )
            }
            Err(e) => EpisodeRecord::failed(episode, &policies[0], records.len(), e.to_string(), started.elapsed()),
        };
        log.push(record);
        if let Some(path) = &options.checkpoint_path {
            controller.save(path)?;
        }
    }

    let best = log
        .best()
        .ok_or_else(|| Error::Target("every episode failed".into()))?;
    Ok(SearchOutcome {
        best: best.policy()?,
        best_episode: best.episode,
        log,
        controller,
    })
}

/// How the final model is trained with the best policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalizeProtocol {
    /// Resume from the converged checkpoint and train one epoch.
    Resume,
    /// Start from fresh weights and train the pre-training number of epochs.
    Scratch,
}

/// Trains `target` under `protocol` with optional augmentation and scores it
/// on `test`. Every epoch redraws the augmentation.
#[allow(clippy::too_many_arguments)]
pub fn train_and_test<T: TargetModel>(
    target: &mut T,
    checkpoint: Option<&TargetCheckpoint>,
    protocol: FinalizeProtocol,
    scratch_epochs: usize,
    policy: Option<&Policy>,
    lexicons: &Lexicons,
    train: &[Example],
    test: &[Example],
    seed: u64,
) -> Result<RewardReport> {
    let epochs = match protocol {
        FinalizeProtocol::Resume => {
            let checkpoint = checkpoint
                .ok_or_else(|| Error::Checkpoint("resuming needs a converged checkpoint".into()))?;
            target.resume(checkpoint)?;
            1
        }
        FinalizeProtocol::Scratch => {
            target.reset();
            scratch_epochs.max(1)
        }
    };
    for epoch in 0..epochs {
        match policy {
            Some(policy) => {
                let epoch_seed = stream_rng(seed, epoch as u64).random();
                let augmented = augment_corpus(train, policy, lexicons, epoch_seed);
                target.train_one_epoch(&augmented.examples)?;
            }
            None => target.train_one_epoch(train)?,
        }
    }
    target.evaluate(test)
}

/// The hand-designed comparator: one epoch per coarse operation, in order,
/// each applied to every example with probability 1 and `changes` changes.
/// Returns the test report and the number of epochs trained.
pub fn all_operations_baseline<T: TargetModel>(
    target: &mut T,
    checkpoint: &TargetCheckpoint,
    lexicons: &Lexicons,
    train: &[Example],
    test: &[Example],
    changes: usize,
    seed: u64,
) -> Result<(RewardReport, usize)> {
    if !(1..=crate::policy::MAX_CHANGES).contains(&changes) {
        return Err(Error::InvalidArgument(format!("number of changes {changes} outside 1..=4")));
    }
    target.resume(checkpoint)?;
    let mut epochs = 0;
    for (k, op) in CoarseOperation::ALL.iter().enumerate() {
        let epoch_seed: u64 = stream_rng(seed, k as u64).random();
        let augmented: Vec<Example> = train
            .iter()
            .enumerate()
            .map(|(i, example)| {
                let mut rng = stream_rng(epoch_seed, i as u64);
                Example {
                    source: apply_coarse(&example.source, *op, changes, lexicons, &mut rng).context,
                    target: example.target.clone(),
                }
            })
            .collect();
        target.train_one_epoch(&augmented)?;
        epochs += 1;
    }
    Ok((target.evaluate(test)?, epochs))
}

/// Test-set results of a finished search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalReport {
    pub protocol: FinalizeProtocol,
    pub best_policy: String,
    pub best_episode: usize,
    pub best_validation_reward: f64,
    pub augmented: RewardReport,
    pub unaugmented: RewardReport,
    pub all_operations: RewardReport,
}

impl FinalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Everything `search` produces end to end with the toy target.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub outcome: SearchOutcome,
    pub checkpoint: TargetCheckpoint,
    pub validation_baseline: RewardReport,
    pub report: FinalReport,
}

/// Converges the toy target, searches, and finalizes the best policy. A
/// rigged setup replaces the episode reward with [`RiggedEvaluator`].
pub fn run_pipeline(setup: &SearchSetup, controller_checkpoint: Option<PathBuf>) -> Result<PipelineOutput> {
    let mut target = setup.toy_target()?;
    let checkpoint = target.converge(&setup.train, setup.pretrain_epochs)?;
    let validation_baseline = {
        target.resume(&checkpoint)?;
        target.train_one_epoch(&setup.train)?;
        target.evaluate(&setup.valid)?
    };
    let sources: Vec<Context> = setup.train.iter().map(|e| e.source.clone()).collect();
    let mut episodes = TargetEpisodes {
        target: setup.toy_target()?,
        checkpoint: &checkpoint,
        lexicons: &setup.lexicons,
        train: &setup.train,
        valid: &setup.valid,
    };
    let mut rigged = setup.rigged_first_op.map(|wanted| RiggedEvaluator { wanted });
    let evaluator: &mut dyn EpisodeEvaluator = match rigged.as_mut() {
        Some(r) => r,
        None => &mut episodes,
    };
    let options = SearchOptions {
        controller: setup.controller.clone(),
        episodes: setup.episodes,
        seed: setup.seed,
        checkpoint_path: controller_checkpoint,
    };
    let outcome = search(evaluator, &sources, &options)?;
    let report = finalize(setup, &outcome, Some(&checkpoint))?;
    Ok(PipelineOutput {
        outcome,
        checkpoint,
        validation_baseline,
        report,
    })
}

/// Trains the final model with the best policy and reports test F1 next to
/// the unaugmented and all-operations comparators.
pub fn finalize(
    setup: &SearchSetup,
    outcome: &SearchOutcome,
    checkpoint: Option<&TargetCheckpoint>,
) -> Result<FinalReport> {
    let final_seed: u64 = stream_rng(setup.seed, 4).random();
    let run = |policy: Option<&Policy>| -> Result<RewardReport> {
        let mut target = setup.toy_target()?;
        train_and_test(
            &mut target,
            checkpoint,
            setup.protocol,
            setup.pretrain_epochs,
            policy,
            &setup.lexicons,
            &setup.train,
            &setup.test,
            final_seed,
        )
    };
    let augmented = run(Some(&outcome.best))?;
    let unaugmented = run(None)?;
    let checkpoint = checkpoint.ok_or_else(|| Error::Checkpoint("missing converged checkpoint".into()))?;
    let (all_operations, _) = all_operations_baseline(
        &mut setup.toy_target()?,
        checkpoint,
        &setup.lexicons,
        &setup.train,
        &setup.test,
        setup.all_ops_changes,
        final_seed,
    )?;
    let best_validation_reward = outcome
        .log
        .records
        .get(outcome.best_episode)
        .and_then(|r| r.reward)
        .unwrap_or(f64::NAN);
    Ok(FinalReport {
        protocol: setup.protocol,
        best_policy: outcome.best.to_compact(),
        best_episode: outcome.best_episode,
        best_validation_reward,
        augmented,
        unaugmented,
        all_operations,
    })
}
