//! Policy-sampling controllers trained with REINFORCE.
//!
//! A controller is a single-layer recurrent decoder that emits one token per
//! step, cycling through per-slot output heads (operation type, number of
//! changes, probability). The input-aware variant adds a recurrent encoder
//! over the source context and additive attention from the decoder.
//!
//! Training maximises `sum_t log p(token_t) * (R - b)` where `b` is an
//! exponential moving average of past rewards.

mod checkpoint;
mod network;

use std::path::Path;

use rand::distr::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use network::{Layout, Network};

use crate::corpus::Context;
use crate::policy::{Policy, Slot, POLICY_TOKENS};
use crate::{util, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerMode {
    /// Decoder only; policies do not depend on the data.
    Agnostic,
    /// Encoder-decoder; one policy per source context.
    Aware,
}

impl std::str::FromStr for ControllerMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "agnostic" => Ok(ControllerMode::Agnostic),
            "aware" => Ok(ControllerMode::Aware),
            other => Err(format!("unknown controller mode `{other}` (agnostic|aware)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub mode: ControllerMode,
    pub hidden: usize,
    pub embed: usize,
    /// Hash buckets for source tokens (input-aware mode).
    pub source_buckets: usize,
    /// Only the last this-many source items are encoded.
    pub max_source_tokens: usize,
    /// Weights start uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    /// Start the output heads at zero, which makes every slot uniform.
    pub zero_init_heads: bool,
    pub step_size: f64,
    pub clip_norm: f64,
    pub ema_decay: f64,
    /// Vocabulary size of each slot head; step `t` uses slot `t mod len`.
    pub slot_vocab: Vec<usize>,
    pub steps: usize,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            mode: ControllerMode::Agnostic,
            hidden: 64,
            embed: 32,
            source_buckets: 1024,
            max_source_tokens: 48,
            init_scale: 0.1,
            zero_init_heads: true,
            step_size: 0.05,
            clip_norm: 5.0,
            ema_decay: 0.95,
            slot_vocab: Slot::ALL.iter().map(|s| s.vocab_size()).collect(),
            steps: POLICY_TOKENS,
        }
    }
}

impl ControllerConfig {
    pub fn with_mode(mode: ControllerMode) -> Self {
        ControllerConfig {
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.hidden == 0 || self.embed == 0 {
            return fail("hidden and embedding sizes must be positive");
        }
        if self.slot_vocab.is_empty() || self.slot_vocab.contains(&0) {
            return fail("every slot needs a non-empty vocabulary");
        }
        if self.steps == 0 {
            return fail("at least one decoding step is required");
        }
        if self.mode == ControllerMode::Aware && (self.source_buckets == 0 || self.max_source_tokens == 0) {
            return fail("input-aware mode needs source buckets and a positive source length");
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return fail("init_scale must be finite and non-negative");
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return fail("step_size must be positive");
        }
        if !(self.clip_norm.is_finite() && self.clip_norm > 0.0) {
            return fail("clip_norm must be positive");
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return fail("ema_decay must be in [0, 1)");
        }
        Ok(())
    }

    /// Whether sampled sequences decode to policies.
    pub fn emits_policies(&self) -> bool {
        self.steps == POLICY_TOKENS
            && self.slot_vocab.len() == 3
            && self
                .slot_vocab
                .iter()
                .zip(Slot::ALL)
                .all(|(&v, slot)| v == slot.vocab_size())
    }
}

/// One unrolled decoder pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub tokens: Vec<usize>,
    pub log_probs: Vec<f64>,
    /// The context the encoder consumed (input-aware mode).
    pub source: Option<Context>,
}

impl Sample {
    pub fn log_prob(&self) -> f64 {
        self.log_probs.iter().sum()
    }
}

impl AsRef<Sample> for Sample {
    fn as_ref(&self) -> &Sample {
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledPolicyRecord {
    pub policy: Policy,
    pub sample: Sample,
}

impl AsRef<Sample> for SampledPolicyRecord {
    fn as_ref(&self) -> &Sample {
        &self.sample
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    /// Baseline subtracted from the rewards of this update.
    pub baseline: f64,
    pub mean_reward: f64,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Controller {
    config: ControllerConfig,
    layout: Layout,
    params: Vec<f64>,
    baseline: Option<f64>,
    step_count: u64,
}

impl Controller {
    pub fn new<R: Rng + ?Sized>(config: ControllerConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let params = if config.init_scale > 0.0 {
            let dist = Uniform::new_inclusive(-config.init_scale, config.init_scale)
                .map_err(|e| Error::Config(e.to_string()))?;
            (0..layout.total).map(|_| dist.sample(rng)).collect()
        } else {
            vec![0.0; layout.total]
        };
        let mut controller = Controller {
            config,
            layout,
            params,
            baseline: None,
            step_count: 0,
        };
        if controller.config.zero_init_heads {
            for block in controller.layout.heads().collect::<Vec<_>>() {
                controller.params[block.offset..block.offset + block.size()].fill(0.0);
            }
        }
        Ok(controller)
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn parameter_count(&self) -> usize {
        self.layout.total
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn set_parameters(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.layout.total {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.layout.total,
                params.len()
            )));
        }
        self.params = params;
        Ok(())
    }

    /// EMA of past mean rewards; `None` before the first update.
    pub fn baseline(&self) -> Option<f64> {
        self.baseline
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    fn network(&self) -> Network<'_> {
        Network {
            config: &self.config,
            layout: &self.layout,
            params: &self.params,
        }
    }

    fn source_for<'a>(&self, source: Option<&'a Context>) -> Option<&'a Context> {
        match self.config.mode {
            ControllerMode::Aware => source,
            ControllerMode::Agnostic => None,
        }
    }

    /// One hidden vector per encoded source item (the sentinel alone for an
    /// empty source).
    pub fn encode_source(&self, source: &Context) -> Result<Vec<Vec<f64>>> {
        if self.config.mode != ControllerMode::Aware {
            return Err(Error::InvalidArgument(
                "only input-aware controllers have an encoder".into(),
            ));
        }
        Ok(self.network().encode(Some(source)).states)
    }

    /// Samples a token sequence. Agnostic controllers ignore `source`.
    pub fn sample<R: Rng + ?Sized>(&self, source: Option<&Context>, rng: &mut R) -> Sample {
        let source = self.source_for(source);
        let trace = self.network().run(source, |_, probs| sample_index(probs, rng));
        Sample {
            tokens: trace.tokens(),
            log_probs: trace.log_probs(),
            source: source.cloned(),
        }
    }

    /// Samples a policy.
    pub fn sample_policy<R: Rng + ?Sized>(
        &self,
        source: Option<&Context>,
        rng: &mut R,
    ) -> Result<SampledPolicyRecord> {
        if !self.config.emits_policies() {
            return Err(Error::Config(
                "controller vocabulary does not match the policy grammar".into(),
            ));
        }
        let sample = self.sample(source, rng);
        let policy = Policy::from_indices(&sample.tokens)?;
        Ok(SampledPolicyRecord { policy, sample })
    }

    fn forced(&self, tokens: &[usize], source: Option<&Context>) -> Result<network::Trace> {
        if tokens.len() != self.config.steps {
            return Err(Error::InvalidArgument(format!(
                "expected {} tokens, got {}",
                self.config.steps,
                tokens.len()
            )));
        }
        let slots = self.config.slot_vocab.len();
        for (t, &tok) in tokens.iter().enumerate() {
            if tok >= self.config.slot_vocab[t % slots] {
                return Err(Error::InvalidArgument(format!("token {tok} at step {t} is out of range")));
            }
        }
        Ok(self.network().run(self.source_for(source), |t, _| tokens[t]))
    }

    /// `log p(tokens | source)`.
    pub fn log_prob(&self, tokens: &[usize], source: Option<&Context>) -> Result<f64> {
        Ok(self.forced(tokens, source)?.log_probs().iter().sum())
    }

    /// Per-step output distributions when decoding `tokens`.
    pub fn step_distributions(&self, tokens: &[usize], source: Option<&Context>) -> Result<Vec<Vec<f64>>> {
        Ok(self.forced(tokens, source)?.distributions())
    }

    /// Per-step attention weights over encoder states (empty for agnostic
    /// controllers).
    pub fn attention_weights(&self, tokens: &[usize], source: Option<&Context>) -> Result<Vec<Vec<f64>>> {
        Ok(self.forced(tokens, source)?.attention_weights())
    }

    /// `log p(tokens | source)` and its gradient with respect to
    /// [`Controller::parameters`].
    pub fn log_prob_gradient(&self, tokens: &[usize], source: Option<&Context>) -> Result<(f64, Vec<f64>)> {
        let trace = self.forced(tokens, source)?;
        let grad = self.network().backward(&trace);
        Ok((trace.log_probs().iter().sum(), grad))
    }

    /// One REINFORCE step over a batch of samples and their rewards.
    ///
    /// The gradient is the batch mean of `(R - b) * grad log p(sample)`,
    /// clipped to `clip_norm`; the baseline is then moved toward the batch
    /// mean reward. Before the first update the baseline counts as zero and
    /// is initialised to the first batch mean.
    pub fn reinforce_update<S: AsRef<Sample>>(&mut self, samples: &[S], rewards: &[f64]) -> Result<UpdateStats> {
        if samples.len() != rewards.len() {
            return Err(Error::InvalidArgument(format!(
                "{} samples but {} rewards",
                samples.len(),
                rewards.len()
            )));
        }
        if samples.is_empty() {
            return Err(Error::InvalidArgument("no samples to learn from".into()));
        }
        if let Some(bad) = rewards.iter().find(|r| !r.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite reward {bad}")));
        }
        let baseline = self.baseline.unwrap_or(0.0);
        let scale = 1.0 / samples.len() as f64;
        let mut grad = vec![0.0; self.layout.total];
        for (sample, &reward) in samples.iter().zip(rewards) {
            let advantage = reward - baseline;
            if advantage == 0.0 {
                continue;
            }
            let sample = sample.as_ref();
            let (_, g) = self.log_prob_gradient(&sample.tokens, sample.source.as_ref())?;
            for (acc, gi) in grad.iter_mut().zip(&g) {
                *acc += scale * advantage * gi;
            }
        }
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let clip = if grad_norm > self.config.clip_norm {
            self.config.clip_norm / grad_norm
        } else {
            1.0
        };
        if grad_norm > 0.0 {
            let step = self.config.step_size * clip;
            for (p, g) in self.params.iter_mut().zip(&grad) {
                *p += step * g;
            }
        }
        if let Some(bad) = self.params.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument(format!("update produced non-finite parameter {bad}")));
        }
        let mean_reward = rewards.iter().sum::<f64>() * scale;
        let decay = self.config.ema_decay;
        self.baseline = Some(match self.baseline {
            None => mean_reward,
            Some(b) => decay * b + (1.0 - decay) * mean_reward,
        });
        self.step_count += 1;
        Ok(UpdateStats {
            baseline,
            mean_reward,
            grad_norm,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        checkpoint::encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        checkpoint::decode(bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        util::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}
