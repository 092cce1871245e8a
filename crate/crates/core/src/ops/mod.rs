//! The twelve perturbation operations.
//!
//! Each typed operation takes a context, a number of changes `n` and a random
//! source. It perturbs `min(n, capacity)` disjoint spans drawn uniformly from
//! its eligibility set, where `capacity` is the largest number of disjoint
//! eligible spans. Boundary markers are never eligible, so no operation can
//! move, drop or duplicate them.

mod select;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use select::{max_disjoint, sample_disjoint, Span};

use crate::corpus::{match_case, Context, DropoutCategory, Item, Lexicons, MorphClass};
use crate::policy::Operation;

/// One of the twelve searchable operation types. The declaration order is
/// the controller's vocabulary encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperationType {
    RandomSwap,
    StopwordDropout(DropoutCategory),
    Paraphrase,
    GrammarError(MorphClass),
    Stammer,
}

impl OperationType {
    pub const COUNT: usize = 12;

    pub const ALL: [OperationType; 12] = [
        OperationType::RandomSwap,
        OperationType::StopwordDropout(DropoutCategory::Noun),
        OperationType::StopwordDropout(DropoutCategory::Adposition),
        OperationType::StopwordDropout(DropoutCategory::Pronoun),
        OperationType::StopwordDropout(DropoutCategory::Adverb),
        OperationType::StopwordDropout(DropoutCategory::Verb),
        OperationType::StopwordDropout(DropoutCategory::Determiner),
        OperationType::StopwordDropout(DropoutCategory::Other),
        OperationType::Paraphrase,
        OperationType::GrammarError(MorphClass::Noun),
        OperationType::GrammarError(MorphClass::Verb),
        OperationType::Stammer,
    ];

    pub fn index(self) -> usize {
        Self::ALL
            .iter()
            .position(|&t| t == self)
            .expect("every operation type is listed")
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Compact log mnemonic: `R`, `D_n`, `D_adp`, `D_p`, `D_adv`, `D_v`,
    /// `D_det`, `D_o`, `P`, `G_n`, `G_v`, `S`.
    pub fn mnemonic(self) -> &'static str {
        match self {
            OperationType::RandomSwap => "R",
            OperationType::StopwordDropout(c) => match c {
                DropoutCategory::Noun => "D_n",
                DropoutCategory::Adposition => "D_adp",
                DropoutCategory::Pronoun => "D_p",
                DropoutCategory::Adverb => "D_adv",
                DropoutCategory::Verb => "D_v",
                DropoutCategory::Determiner => "D_det",
                DropoutCategory::Other => "D_o",
            },
            OperationType::Paraphrase => "P",
            OperationType::GrammarError(MorphClass::Noun) => "G_n",
            OperationType::GrammarError(MorphClass::Verb) => "G_v",
            OperationType::Stammer => "S",
        }
    }

    pub fn from_mnemonic(text: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|t| t.mnemonic() == text)
    }

    pub fn name(self) -> &'static str {
        match self {
            OperationType::RandomSwap => "Random Swap",
            OperationType::StopwordDropout(c) => match c {
                DropoutCategory::Noun => "Noun Stopword Dropout",
                DropoutCategory::Adposition => "Adposition Stopword Dropout",
                DropoutCategory::Pronoun => "Pronoun Stopword Dropout",
                DropoutCategory::Adverb => "Adverb Stopword Dropout",
                DropoutCategory::Verb => "Verb Stopword Dropout",
                DropoutCategory::Determiner => "Determiner Stopword Dropout",
                DropoutCategory::Other => "Other Stopword Dropout",
            },
            OperationType::Paraphrase => "Paraphrase",
            OperationType::GrammarError(MorphClass::Noun) => "Noun Grammar Error",
            OperationType::GrammarError(MorphClass::Verb) => "Verb Grammar Error",
            OperationType::Stammer => "Stammer",
        }
    }
}

impl fmt::Display for OperationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// Operations of the hand-designed all-operations baseline, where dropout
/// and grammar errors are not split by category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoarseOperation {
    RandomSwap,
    StopwordDropout,
    Paraphrase,
    GrammarError,
    Stammer,
}

impl CoarseOperation {
    pub const ALL: [CoarseOperation; 5] = [
        CoarseOperation::RandomSwap,
        CoarseOperation::StopwordDropout,
        CoarseOperation::Paraphrase,
        CoarseOperation::GrammarError,
        CoarseOperation::Stammer,
    ];
}

/// Spans of a context where an operation may act.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EligibilitySet {
    spans: Vec<Span>,
}

impl EligibilitySet {
    pub fn spans(&self) -> &[Span] {
        &self.spans
    }

    /// Start position of every eligible span.
    pub fn positions(&self) -> Vec<usize> {
        let mut positions: Vec<usize> = self.spans.iter().map(|s| s.start).collect();
        positions.dedup();
        positions
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Largest number of changes that can be applied at once.
    pub fn capacity(&self, limit: usize) -> usize {
        max_disjoint(&self.spans, limit)
    }
}

/// Result of a typed operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub context: Context,
    /// Number of spans perturbed.
    pub changes: usize,
}

/// Result of a gated operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Applied {
    pub context: Context,
    pub fired: bool,
    pub changes: usize,
}

fn single_words(ctx: &Context, mut keep: impl FnMut(&crate::corpus::Token) -> bool) -> EligibilitySet {
    let spans = ctx
        .items()
        .iter()
        .enumerate()
        .filter(|(_, item)| item.as_word().is_some_and(&mut keep))
        .map(|(start, _)| Span { start, len: 1 })
        .collect();
    EligibilitySet { spans }
}

fn swap_pairs(ctx: &Context) -> EligibilitySet {
    let items = ctx.items();
    let spans = (0..items.len().saturating_sub(1))
        .filter(|&i| items[i].is_word() && items[i + 1].is_word())
        .map(|start| Span { start, len: 2 })
        .collect();
    EligibilitySet { spans }
}

fn folded_phrase(items: &[Item]) -> Option<Vec<String>> {
    items.iter().map(|it| it.as_word().map(|t| t.folded())).collect()
}

fn paraphrase_spans(ctx: &Context, lex: &Lexicons) -> EligibilitySet {
    let items = ctx.items();
    let max_len = lex.paraphrases.max_source_len();
    let mut spans = Vec::new();
    for start in 0..items.len() {
        for len in 1..=max_len.min(items.len() - start) {
            let Some(phrase) = folded_phrase(&items[start..start + len]) else {
                break;
            };
            if lex.paraphrases.best(&phrase).is_some() {
                spans.push(Span { start, len });
            }
        }
    }
    EligibilitySet { spans }
}

/// Positions where `op` can act on `ctx`.
pub fn eligible_positions(ctx: &Context, op: OperationType, lex: &Lexicons) -> EligibilitySet {
    match op {
        OperationType::RandomSwap => swap_pairs(ctx),
        OperationType::StopwordDropout(category) => single_words(ctx, |t| {
            lex.stopwords.category(t.surface()) == Some(category)
        }),
        OperationType::Paraphrase => paraphrase_spans(ctx, lex),
        OperationType::GrammarError(class) => {
            single_words(ctx, |t| lex.flip_form(class, t.surface()).is_some())
        }
        OperationType::Stammer => single_words(ctx, |_| true),
    }
}

/// Positions where a coarse (all-operations baseline) operation can act.
/// Coarse dropout covers the union of the seven categories; coarse grammar
/// errors cover the union of the noun and verb tables.
pub fn eligible_coarse(ctx: &Context, op: CoarseOperation, lex: &Lexicons) -> EligibilitySet {
    match op {
        CoarseOperation::RandomSwap => swap_pairs(ctx),
        CoarseOperation::StopwordDropout => single_words(ctx, |t| t.is_stopword),
        CoarseOperation::Paraphrase => paraphrase_spans(ctx, lex),
        CoarseOperation::GrammarError => single_words(ctx, |t| {
            lex.flip_form(MorphClass::Noun, t.surface()).is_some()
                || lex.flip_form(MorphClass::Verb, t.surface()).is_some()
        }),
        CoarseOperation::Stammer => single_words(ctx, |_| true),
    }
}

/// Copies `ctx`, replacing each chosen span with `rewrite(span items)`.
fn rewrite_spans(
    ctx: &Context,
    chosen: &[Span],
    mut rewrite: impl FnMut(&[Item]) -> Vec<Item>,
) -> Context {
    let items = ctx.items();
    let mut out = Vec::with_capacity(items.len() + chosen.len());
    let mut cursor = 0;
    for span in chosen {
        out.extend_from_slice(&items[cursor..span.start]);
        out.extend(rewrite(&items[span.start..span.end()]));
        cursor = span.end();
    }
    out.extend_from_slice(&items[cursor..]);
    Context::from_items(out)
}

fn perturb<R: Rng + ?Sized>(
    ctx: &Context,
    eligible: &EligibilitySet,
    n: usize,
    rng: &mut R,
    rewrite: impl FnMut(&[Item]) -> Vec<Item>,
) -> Outcome {
    let chosen = sample_disjoint(eligible.spans(), n, rng);
    Outcome {
        context: rewrite_spans(ctx, &chosen, rewrite),
        changes: chosen.len(),
    }
}

/// Exchanges up to `n` disjoint pairs of adjacent words.
pub fn random_swap<R: Rng + ?Sized>(ctx: &Context, n: usize, rng: &mut R) -> Outcome {
    perturb(ctx, &swap_pairs(ctx), n, rng, |pair| {
        vec![pair[1].clone(), pair[0].clone()]
    })
}

/// Deletes up to `n` stopwords of one category.
pub fn stopword_dropout<R: Rng + ?Sized>(
    ctx: &Context,
    category: DropoutCategory,
    n: usize,
    lex: &Lexicons,
    rng: &mut R,
) -> Outcome {
    let eligible = eligible_positions(ctx, OperationType::StopwordDropout(category), lex);
    perturb(ctx, &eligible, n, rng, |_| Vec::new())
}

fn paraphrase_items(span: &[Item], lex: &Lexicons) -> Vec<Item> {
    let phrase = folded_phrase(span).expect("eligible spans hold words only");
    let target = lex
        .paraphrases
        .best(&phrase)
        .expect("eligible spans have a lexicon entry");
    let first_surface = span[0].as_word().map(|t| t.surface()).unwrap_or("");
    target
        .iter()
        .enumerate()
        .map(|(i, word)| {
            let surface = if i == 0 {
                match_case(first_surface, word)
            } else {
                word.clone()
            };
            Item::Word(lex.make_token(&surface))
        })
        .collect()
}

/// Replaces up to `n` disjoint lexicon-covered phrases with their
/// highest-scoring paraphrase.
pub fn paraphrase<R: Rng + ?Sized>(ctx: &Context, n: usize, lex: &Lexicons, rng: &mut R) -> Outcome {
    let eligible = paraphrase_spans(ctx, lex);
    perturb(ctx, &eligible, n, rng, |span| paraphrase_items(span, lex))
}

fn flip_item(item: &Item, classes: &[MorphClass], lex: &Lexicons) -> Vec<Item> {
    let token = item.as_word().expect("eligible spans hold words only");
    let flipped = classes
        .iter()
        .find_map(|&class| lex.flip_form(class, token.surface()))
        .expect("eligible words have a paired form");
    vec![Item::Word(lex.make_token(&flipped))]
}

/// Flips up to `n` words to their other number (nouns) or inflection
/// (verbs).
pub fn grammar_error<R: Rng + ?Sized>(
    ctx: &Context,
    class: MorphClass,
    n: usize,
    lex: &Lexicons,
    rng: &mut R,
) -> Outcome {
    let eligible = eligible_positions(ctx, OperationType::GrammarError(class), lex);
    perturb(ctx, &eligible, n, rng, |span| flip_item(&span[0], &[class], lex))
}

/// Repeats up to `n` words in place.
pub fn stammer<R: Rng + ?Sized>(ctx: &Context, n: usize, rng: &mut R) -> Outcome {
    let eligible = single_words(ctx, |_| true);
    perturb(ctx, &eligible, n, rng, |span| vec![span[0].clone(), span[0].clone()])
}

/// Runs a typed operation without the probability gate.
pub fn apply_typed<R: Rng + ?Sized>(
    ctx: &Context,
    op: OperationType,
    n: usize,
    lex: &Lexicons,
    rng: &mut R,
) -> Outcome {
    match op {
        OperationType::RandomSwap => random_swap(ctx, n, rng),
        OperationType::StopwordDropout(category) => stopword_dropout(ctx, category, n, lex, rng),
        OperationType::Paraphrase => paraphrase(ctx, n, lex, rng),
        OperationType::GrammarError(class) => grammar_error(ctx, class, n, lex, rng),
        OperationType::Stammer => stammer(ctx, n, rng),
    }
}

/// Draws the operation's probability gate once; on success runs the typed
/// operation with the operation's number of changes.
pub fn apply_operation<R: Rng + ?Sized>(
    ctx: &Context,
    op: &Operation,
    lex: &Lexicons,
    rng: &mut R,
) -> Applied {
    if !rng.random_bool(op.probability.value()) {
        return Applied {
            context: ctx.clone(),
            fired: false,
            changes: 0,
        };
    }
    let outcome = apply_typed(ctx, op.op_type, op.n_changes(), lex, rng);
    Applied {
        context: outcome.context,
        fired: true,
        changes: outcome.changes,
    }
}

/// Runs a coarse operation (always applied).
pub fn apply_coarse<R: Rng + ?Sized>(
    ctx: &Context,
    op: CoarseOperation,
    n: usize,
    lex: &Lexicons,
    rng: &mut R,
) -> Outcome {
    let eligible = eligible_coarse(ctx, op, lex);
    match op {
        CoarseOperation::RandomSwap => random_swap(ctx, n, rng),
        CoarseOperation::StopwordDropout => perturb(ctx, &eligible, n, rng, |_| Vec::new()),
        CoarseOperation::Paraphrase => paraphrase(ctx, n, lex, rng),
        CoarseOperation::GrammarError => perturb(ctx, &eligible, n, rng, |span| {
            flip_item(&span[0], &[MorphClass::Noun, MorphClass::Verb], lex)
        }),
        CoarseOperation::Stammer => stammer(ctx, n, rng),
    }
}

#[cfg(test)]
mod tests;
