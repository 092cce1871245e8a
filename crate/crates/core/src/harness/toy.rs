//! Desk-scale stand-in for a dialogue model, and the bundled mini-corpus.
//!
//! [`ToyTarget`] is a bag-of-words multi-label logistic model: hashed source
//! words in, one sigmoid per activity/entity term out. Its "response" is the
//! list of terms scoring above the threshold, which the reward module scores
//! against the gold response like any generated reply.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{TargetCheckpoint, TargetModel};
use crate::corpus::{Example, Item};
use crate::reward::{corpus_f1, ActivityEntityLexicon, RewardReport};
use crate::util::{fnv1a, stream_rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub buckets: usize,
    pub learning_rate: f64,
    pub threshold: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            buckets: 4096,
            learning_rate: 0.3,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyTarget {
    config: ToyConfig,
    lexicon: ActivityEntityLexicon,
    outputs: Vec<String>,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

const CHECKPOINT_KIND: &str = "toy-bag-of-words";
const CHECKPOINT_VERSION: u32 = 1;

impl ToyTarget {
    pub fn new(config: ToyConfig, lexicon: ActivityEntityLexicon) -> Result<Self> {
        if config.buckets == 0 {
            return Err(Error::Config("toy target needs at least one bucket".into()));
        }
        if !(config.learning_rate.is_finite() && config.learning_rate > 0.0) {
            return Err(Error::Config("toy learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&config.threshold) {
            return Err(Error::Config("toy threshold must be in [0, 1)".into()));
        }
        let outputs: Vec<String> = lexicon
            .activities()
            .chain(lexicon.entities())
            .map(str::to_string)
            .collect();
        let weights = vec![0.0; outputs.len() * config.buckets];
        let bias = vec![0.0; outputs.len()];
        Ok(ToyTarget {
            config,
            lexicon,
            outputs,
            weights,
            bias,
        })
    }

    fn features(&self, example: &Example) -> Vec<usize> {
        let mut buckets: Vec<usize> = example
            .source
            .items()
            .iter()
            .filter_map(Item::as_word)
            .map(|t| (fnv1a(&t.folded()) % self.config.buckets as u64) as usize)
            .collect();
        buckets.sort_unstable();
        buckets.dedup();
        buckets
    }

    fn scores(&self, features: &[usize]) -> Vec<f64> {
        let b = self.config.buckets;
        (0..self.outputs.len())
            .map(|k| {
                let z = self.bias[k] + features.iter().map(|&j| self.weights[k * b + j]).sum::<f64>();
                1.0 / (1.0 + (-z).exp())
            })
            .collect()
    }

    /// Terms scoring above the threshold, space-separated.
    pub fn respond(&self, example: &Example) -> String {
        let scores = self.scores(&self.features(example));
        self.outputs
            .iter()
            .zip(scores)
            .filter(|(_, s)| *s > self.config.threshold)
            .map(|(o, _)| o.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Fresh weights followed by `epochs` clean epochs.
    pub fn converge(&mut self, corpus: &[Example], epochs: usize) -> Result<TargetCheckpoint> {
        self.reset();
        for _ in 0..epochs {
            self.train_one_epoch(corpus)?;
        }
        Ok(self.save())
    }
}

impl TargetModel for ToyTarget {
    fn reset(&mut self) {
        self.weights.fill(0.0);
        self.bias.fill(0.0);
    }

    fn resume(&mut self, checkpoint: &TargetCheckpoint) -> Result<()> {
        checkpoint.expect_kind(CHECKPOINT_KIND, CHECKPOINT_VERSION)?;
        let values: Vec<f64> = checkpoint
            .payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        if checkpoint.payload.len() % 8 != 0 || values.len() != self.weights.len() + self.bias.len() {
            return Err(Error::Checkpoint("toy checkpoint does not match the model size".into()));
        }
        let (w, b) = values.split_at(self.weights.len());
        self.weights.copy_from_slice(w);
        self.bias.copy_from_slice(b);
        Ok(())
    }

    fn train_one_epoch(&mut self, corpus: &[Example]) -> Result<()> {
        let b = self.config.buckets;
        let lr = self.config.learning_rate;
        for example in corpus {
            let features = self.features(example);
            let (gold_a, gold_e) = self.lexicon.extract(example.target_text());
            let scores = self.scores(&features);
            for (k, output) in self.outputs.iter().enumerate() {
                let label = if gold_a.contains(output) || gold_e.contains(output) { 1.0 } else { 0.0 };
                let step = lr * (scores[k] - label);
                if step == 0.0 {
                    continue;
                }
                self.bias[k] -= step;
                for &j in &features {
                    self.weights[k * b + j] -= step;
                }
            }
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Target("toy weights diverged".into()));
        }
        Ok(())
    }

    fn evaluate(&self, corpus: &[Example]) -> Result<RewardReport> {
        let responses: Vec<String> = corpus.iter().map(|e| self.respond(e)).collect();
        let golds: Vec<&str> = corpus.iter().map(Example::target_text).collect();
        corpus_f1(&responses, &golds, &self.lexicon)
    }

    fn save(&self) -> TargetCheckpoint {
        let mut payload = Vec::with_capacity(8 * (self.weights.len() + self.bias.len()));
        for v in self.weights.iter().chain(&self.bias) {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        TargetCheckpoint {
            kind: CHECKPOINT_KIND.to_string(),
            version: CHECKPOINT_VERSION,
            payload,
        }
    }
}

/// The three splits of the generated mini-corpus, as corpus-file text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniCorpus {
    pub train: String,
    pub valid: String,
    pub test: String,
}

pub const MINI_CORPUS_SEED: u64 = 20190811;

const ENTITIES: [&str; 8] = ["disk", "kernel", "driver", "package", "network", "wifi", "usb", "screen"];

/// Activity, its content cue, and the stopword frame that accompanies it in
/// training sources.
const ACTIVITIES: [(&str, &str, &str); 10] = [
    ("boot", "startup", "with them about"),
    ("install", "setup", "for us into"),
    ("delete", "erase", "of mine from"),
    ("mount", "attach", "on ours at"),
    ("reboot", "cycle", "by him over"),
    ("update", "outdated", "to her through"),
    ("remove", "unwanted", "off theirs under"),
    ("download", "fetch", "about yours below"),
    ("configure", "settings", "between myself against"),
    ("restart", "frozen", "during herself after"),
];

const OPENERS: [&str; 5] = ["hi all", "hello", "ok so", "hey", "good day"];
const COMPLAINTS: [&str; 4] = ["is broken", "is not working", "has a problem", "seems bad"];
const REPLIES: [&str; 3] = ["you should {a} the {e} first", "try to {a} the {e}", "{a} the {e} and see"];

fn render(split: &[(String, String)]) -> String {
    split.iter().map(|(s, t)| format!("{s}\t{t}\n")).collect()
}

/// Generates the mini-corpus.
///
/// Training sources always carry the activity's stopword frame (pronouns
/// and adpositions) and carry its content cue only half of the time.
/// Validation and test sources always carry the cue and never the frame, so a
/// model that leans on the frame fails there; training on sources with those
/// stopwords dropped moves weight onto the cue.
pub fn mini_corpus(seed: u64, train: usize, valid: usize, test: usize) -> MiniCorpus {
    let make = |stream: u64, count: usize, heldout: bool| {
        let mut rng = stream_rng(seed, stream);
        (0..count)
            .map(|_| {
                let (activity, cue, frame) = *ACTIVITIES.choose(&mut rng).expect("non-empty");
                let entity = *ENTITIES.choose(&mut rng).expect("non-empty");
                let opener = *OPENERS.choose(&mut rng).expect("non-empty");
                let complaint = *COMPLAINTS.choose(&mut rng).expect("non-empty");
                let mut words: Vec<&str> = vec!["my", entity, complaint];
                if heldout || rng.random_bool(0.5) {
                    words.push(cue);
                }
                if !heldout {
                    words.push(frame);
                }
                words.push("?");
                let source = format!("{opener} __eou__ {}", words.join(" "));
                let reply = REPLIES
                    .choose(&mut rng)
                    .expect("non-empty")
                    .replace("{a}", activity)
                    .replace("{e}", entity);
                (source, reply)
            })
            .collect::<Vec<_>>()
    };
    MiniCorpus {
        train: render(&make(1, train, false)),
        valid: render(&make(2, valid, true)),
        test: render(&make(3, test, true)),
    }
}

/// The corpus shipped under `data/mini/`.
pub fn bundled_mini_corpus() -> MiniCorpus {
    mini_corpus(MINI_CORPUS_SEED, 800, 200, 200)
}
