//! Policies: four sub-policies of two gated operations each.
//!
//! A policy is what the controller emits and what the target model is
//! rewarded for. It flattens to 24 controller tokens (4 sub-policies × 2
//! operations × 3 slots: type, number of changes, probability).

mod augment;
mod format;

use std::fmt;

use rand::Rng;

pub use augment::{
    apply_subpolicy, augment_corpus, augment_corpus_with, AugmentStats, Augmented, OpStats,
    SubPolicyOutcome,
};
pub use format::{
    parse_operation, parse_policy, parse_policy_file, parse_subpolicy, render_table, PolicyDocument,
};

use crate::ops::OperationType;
use crate::{Error, Result};

pub const SUB_POLICIES: usize = 4;
pub const OPS_PER_SUB_POLICY: usize = 2;
pub const MAX_CHANGES: usize = 4;
pub const PROBABILITY_LEVELS: usize = 10;
/// 4 sub-policies × 2 operations × 3 slots.
pub const POLICY_TOKENS: usize = SUB_POLICIES * OPS_PER_SUB_POLICY * 3;

/// Gate probability restricted to the grid {0.1, 0.2, ..., 1.0}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Probability(u8);

impl Probability {
    pub const ONE: Probability = Probability(9);

    /// Grid index 0..=9 maps to 0.1..=1.0.
    pub fn from_index(index: usize) -> Option<Self> {
        (index < PROBABILITY_LEVELS).then_some(Probability(index as u8))
    }

    /// Accepts only values on the grid (within float noise).
    pub fn from_value(value: f64) -> Option<Self> {
        if !value.is_finite() {
            return None;
        }
        let scaled = value * 10.0;
        let rounded = scaled.round();
        if (scaled - rounded).abs() > 1e-9 || !(1.0..=10.0).contains(&rounded) {
            return None;
        }
        Some(Probability(rounded as u8 - 1))
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    pub fn value(self) -> f64 {
        f64::from(self.0 + 1) / 10.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}", self.value())
    }
}

/// A gated, bounded perturbation: operation type, maximum number of changes
/// (1..=4) and gate probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Operation {
    pub op_type: OperationType,
    n_changes: u8,
    pub probability: Probability,
}

impl Operation {
    pub fn new(op_type: OperationType, n_changes: usize, probability: f64) -> Result<Self> {
        let probability = Probability::from_value(probability).ok_or_else(|| {
            Error::InvalidArgument(format!("probability {probability} is not on the 0.1 grid"))
        })?;
        Self::with_probability(op_type, n_changes, probability)
    }

    pub fn with_probability(
        op_type: OperationType,
        n_changes: usize,
        probability: Probability,
    ) -> Result<Self> {
        if !(1..=MAX_CHANGES).contains(&n_changes) {
            return Err(Error::InvalidArgument(format!(
                "number of changes {n_changes} outside 1..={MAX_CHANGES}"
            )));
        }
        Ok(Operation {
            op_type,
            n_changes: n_changes as u8,
            probability,
        })
    }

    pub fn n_changes(&self) -> usize {
        usize::from(self.n_changes)
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {})",
            self.op_type.mnemonic(),
            self.n_changes,
            self.probability
        )
    }
}

/// Two operations applied in order; the second sees the first's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubPolicy {
    pub ops: [Operation; OPS_PER_SUB_POLICY],
}

impl SubPolicy {
    pub fn new(first: Operation, second: Operation) -> Self {
        SubPolicy {
            ops: [first, second],
        }
    }
}

impl fmt::Display for SubPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.ops[0], self.ops[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Policy {
    pub sub_policies: [SubPolicy; SUB_POLICIES],
}

impl Policy {
    pub fn new(sub_policies: [SubPolicy; SUB_POLICIES]) -> Self {
        Policy { sub_policies }
    }

    /// A policy whose four sub-policies are all `sub`.
    pub fn repeated(sub: SubPolicy) -> Self {
        Policy {
            sub_policies: [sub; SUB_POLICIES],
        }
    }

    pub fn operations(&self) -> impl Iterator<Item = &Operation> {
        self.sub_policies.iter().flat_map(|s| s.ops.iter())
    }

    /// Flattens to 24 tokens: sub-policy major, operation minor, slots in
    /// (type, count, probability) order.
    pub fn encode(&self) -> Vec<PolicyToken> {
        self.operations()
            .flat_map(|op| {
                [
                    PolicyToken::new(Slot::Type, op.op_type.index()),
                    PolicyToken::new(Slot::Count, op.n_changes() - 1),
                    PolicyToken::new(Slot::Probability, op.probability.index()),
                ]
            })
            .collect()
    }

    /// Per-slot vocabulary indices of [`Policy::encode`].
    pub fn to_indices(&self) -> Vec<usize> {
        self.encode().iter().map(|t| t.index).collect()
    }

    pub fn decode(tokens: &[PolicyToken]) -> Result<Self> {
        if tokens.len() != POLICY_TOKENS {
            return Err(Error::InvalidArgument(format!(
                "a policy has {POLICY_TOKENS} tokens, got {}",
                tokens.len()
            )));
        }
        for (pos, token) in tokens.iter().enumerate() {
            let expected = Slot::at(pos);
            if token.slot != expected || token.index >= expected.vocab_size() {
                return Err(Error::InvalidArgument(format!(
                    "token {pos} ({:?} {}) is not a valid {expected:?} token",
                    token.slot, token.index
                )));
            }
        }
        let ops: Vec<Operation> = tokens
            .chunks(3)
            .map(|t| Operation {
                op_type: OperationType::from_index(t[0].index).expect("checked above"),
                n_changes: (t[1].index + 1) as u8,
                probability: Probability(t[2].index as u8),
            })
            .collect();
        let subs: Vec<SubPolicy> = ops.chunks(2).map(|o| SubPolicy::new(o[0], o[1])).collect();
        Ok(Policy::new(subs.try_into().expect("24 tokens make 4 sub-policies")))
    }

    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        let tokens: Vec<PolicyToken> = indices
            .iter()
            .enumerate()
            .map(|(pos, &index)| PolicyToken::new(Slot::at(pos), index))
            .collect();
        Self::decode(&tokens)
    }

    /// Uniform choice of one sub-policy.
    pub fn pick_subpolicy<R: Rng + ?Sized>(&self, rng: &mut R) -> &SubPolicy {
        &self.sub_policies[rng.random_range(0..SUB_POLICIES)]
    }

    pub fn to_compact(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, sub) in self.sub_policies.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{sub}")?;
        }
        Ok(())
    }
}

/// Which of the three per-operation slots a token fills.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Type,
    Count,
    Probability,
}

impl Slot {
    pub const ALL: [Slot; 3] = [Slot::Type, Slot::Count, Slot::Probability];

    pub fn at(position: usize) -> Slot {
        Self::ALL[position % 3]
    }

    pub fn vocab_size(self) -> usize {
        match self {
            Slot::Type => OperationType::COUNT,
            Slot::Count => MAX_CHANGES,
            Slot::Probability => PROBABILITY_LEVELS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolicyToken {
    pub slot: Slot,
    pub index: usize,
}

impl PolicyToken {
    pub fn new(slot: Slot, index: usize) -> Self {
        PolicyToken { slot, index }
    }
}

/// Number of distinct policies: (12 · 4 · 10)^(2 · 4).
pub fn search_space_size() -> u128 {
    let per_operation = (OperationType::COUNT * MAX_CHANGES * PROBABILITY_LEVELS) as u128;
    per_operation
        .checked_pow((SUB_POLICIES * OPS_PER_SUB_POLICY) as u32)
        .expect("fits in u128")
}

#[cfg(test)]
mod tests;
