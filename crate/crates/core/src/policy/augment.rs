use std::fmt::Write as _;

use rand::Rng;

use super::{Operation, Policy, SubPolicy, OPS_PER_SUB_POLICY};
use crate::corpus::{Context, Example, Lexicons};
use crate::ops::{apply_operation, OperationType};
use crate::util::stream_rng;

/// Gate and change counters for one operation type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpStats {
    /// Times the gate was drawn.
    pub drawn: usize,
    /// Times the gate fired.
    pub fired: usize,
    /// Spans perturbed in total.
    pub changes: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AugmentStats {
    pub examples: usize,
    per_type: [OpStats; OperationType::COUNT],
}

impl AugmentStats {
    pub fn get(&self, op_type: OperationType) -> OpStats {
        self.per_type[op_type.index()]
    }

    fn record(&mut self, op: &Operation, fired: bool, changes: usize) {
        let entry = &mut self.per_type[op.op_type.index()];
        entry.drawn += 1;
        entry.fired += usize::from(fired);
        entry.changes += changes;
    }

    /// One line per operation type that was drawn at least once.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for op_type in OperationType::ALL {
            let s = self.get(op_type);
            if s.drawn > 0 {
                let _ = writeln!(
                    out,
                    "{:<6} drawn={} applied={} changes={}",
                    op_type.mnemonic(),
                    s.drawn,
                    s.fired,
                    s.changes
                );
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Augmented {
    pub examples: Vec<Example>,
    pub stats: AugmentStats,
}

/// Result of running one sub-policy on one context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubPolicyOutcome {
    pub context: Context,
    pub fired: [bool; OPS_PER_SUB_POLICY],
    pub changes: [usize; OPS_PER_SUB_POLICY],
}

/// Applies both operations of `sub` in order, each behind its own gate.
pub fn apply_subpolicy<R: Rng + ?Sized>(
    ctx: &Context,
    sub: &SubPolicy,
    lex: &Lexicons,
    rng: &mut R,
) -> SubPolicyOutcome {
    let mut context = ctx.clone();
    let mut fired = [false; OPS_PER_SUB_POLICY];
    let mut changes = [0; OPS_PER_SUB_POLICY];
    for (i, op) in sub.ops.iter().enumerate() {
        let applied = apply_operation(&context, op, lex, rng);
        context = applied.context;
        fired[i] = applied.fired;
        changes[i] = applied.changes;
    }
    SubPolicyOutcome {
        context,
        fired,
        changes,
    }
}

/// Augments the source side of every example with one uniformly chosen
/// sub-policy of `policy`. Example `i` draws from its own random stream
/// derived from `(seed, i)`.
pub fn augment_corpus(corpus: &[Example], policy: &Policy, lex: &Lexicons, seed: u64) -> Augmented {
    augment_corpus_with(corpus, |_| policy, lex, seed)
}

/// Like [`augment_corpus`] with a policy per example.
pub fn augment_corpus_with<'p>(
    corpus: &[Example],
    policy_for: impl Fn(usize) -> &'p Policy,
    lex: &Lexicons,
    seed: u64,
) -> Augmented {
    let mut stats = AugmentStats::default();
    let examples = corpus
        .iter()
        .enumerate()
        .map(|(i, example)| {
            let mut rng = stream_rng(seed, i as u64);
            let sub = policy_for(i).pick_subpolicy(&mut rng);
            let outcome = apply_subpolicy(&example.source, sub, lex, &mut rng);
            for (j, op) in sub.ops.iter().enumerate() {
                stats.record(op, outcome.fired[j], outcome.changes[j]);
            }
            Example {
                source: outcome.context,
                target: example.target.clone(),
            }
        })
        .collect();
    stats.examples = corpus.len();
    Augmented { examples, stats }
}
