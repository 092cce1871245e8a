use std::collections::BTreeSet;
use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::{tokenize, Boundary, ACPI_CONTEXT};
use crate::policy::{apply_subpolicy, parse_operation, parse_subpolicy};

fn lex() -> &'static Lexicons {
    static LEX: OnceLock<Lexicons> = OnceLock::new();
    LEX.get_or_init(Lexicons::bundled)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ctx(text: &str) -> Context {
    tokenize(text, lex())
}

fn surfaces(ctx: &Context) -> Vec<String> {
    ctx.items().iter().map(|i| i.text().to_string()).collect()
}

const VERB: OperationType = OperationType::StopwordDropout(DropoutCategory::Verb);

#[test]
fn acpi_verb_stopwords_are_dont_and_be() {
    let table = ctx(ACPI_CONTEXT);
    let eligible = eligible_positions(&table, VERB, lex());
    let words: Vec<&str> = eligible.positions().iter().map(|&p| table.items()[p].text()).collect();
    assert_eq!(words, ["don't", "be"]);
}

#[test]
fn empty_context_has_nothing_eligible() {
    let empty = ctx("");
    for op in OperationType::ALL {
        assert!(eligible_positions(&empty, op, lex()).is_empty(), "{op:?}");
        assert_eq!(apply_typed(&empty, op, 4, lex(), &mut rng(0)).context, empty);
    }
}

#[test]
fn repeated_determiners_are_all_eligible() {
    let the = ctx("the the the");
    let op = OperationType::StopwordDropout(DropoutCategory::Determiner);
    assert_eq!(eligible_positions(&the, op, lex()).positions(), [0, 1, 2]);
}

#[test]
fn markers_are_never_eligible() {
    let table = ctx(ACPI_CONTEXT);
    for op in OperationType::ALL {
        for span in eligible_positions(&table, op, lex()).spans() {
            assert!(table.items()[span.start..span.end()].iter().all(Item::is_word), "{op:?}");
        }
    }
}

#[test]
fn acpi_all_operations_swap() {
    let op = parse_operation("(R, 4, 1.0)").unwrap();
    let out = apply_operation(&ctx(ACPI_CONTEXT), &op, lex(), &mut rng(18801));
    assert_eq!(out.changes, 4);
    assert_eq!(
        out.context.detokenize(),
        "fresh install crack of of the day : gdm login → \" can't ACPI access bla bla bla \" __eou__ \
         you don't want be to me ... __eou__ ah , it happened you to too ?"
    );
}

#[test]
fn acpi_input_agnostic_subpolicy() {
    let sub = parse_subpolicy("(D_v, 3, 0.2)(R, 1, 0.5)").unwrap();
    let out = apply_subpolicy(&ctx(ACPI_CONTEXT), &sub, lex(), &mut rng(268));
    assert_eq!(out.fired, [true, true]);
    // Three drops were asked for; only two verb stopwords exist.
    assert_eq!(out.changes, [2, 1]);
    assert_eq!(
        out.context.detokenize(),
        "fresh install of crack of the day : login gdm → \" can't access ACPI bla bla bla \" __eou__ \
         you want to me ... __eou__ ah , it happened to you too ?"
    );
}

#[test]
fn acpi_input_aware_subpolicy() {
    let sub = parse_subpolicy("(S, 1, 0.8)(D_v, 2, 0.5)").unwrap();
    let out = apply_subpolicy(&ctx(ACPI_CONTEXT), &sub, lex(), &mut rng(72));
    assert_eq!(out.fired, [true, false]);
    assert_eq!(
        out.context.detokenize(),
        "fresh install of crack of the day : gdm login → \" can't access ACPI bla bla bla bla \" __eou__ \
         you don't want to be me ... __eou__ ah , it happened to you too ?"
    );
}

#[test]
fn verb_dropout_falls_back_to_the_eligible_count() {
    let table = ctx(ACPI_CONTEXT);
    for seed in 0..20 {
        let out = stopword_dropout(&table, DropoutCategory::Verb, 3, lex(), &mut rng(seed));
        assert_eq!(out.changes, 2);
        assert_eq!(out.context.len(), table.len() - 2);
        assert!(!surfaces(&out.context).iter().any(|s| s == "don't" || s == "be"));
    }
}

#[test]
fn determiner_dropout_on_the_offer() {
    let out = stopword_dropout(&ctx("what is the offer ?"), DropoutCategory::Determiner, 1, lex(), &mut rng(0));
    assert_eq!(out.context.detokenize(), "what is offer ?");
}

#[test]
fn dropout_without_stopwords_is_identity() {
    let plain = ctx("grub kernel panic");
    for category in DropoutCategory::ALL {
        let out = stopword_dropout(&plain, category, 4, lex(), &mut rng(1));
        assert_eq!((out.context, out.changes), (plain.clone(), 0));
    }
}

#[test]
fn swap_examples() {
    assert_eq!(random_swap(&ctx("ok"), 1, &mut rng(0)).context.detokenize(), "ok");
    assert_eq!(random_swap(&ctx("a b"), 1, &mut rng(0)).context.detokenize(), "b a");
    // Pairs never straddle a marker.
    assert_eq!(random_swap(&ctx("a __eou__ b"), 4, &mut rng(0)).changes, 0);
}

#[test]
fn paraphrase_examples() {
    let out = paraphrase(&ctx("i can help you"), 1, lex(), &mut rng(0));
    assert_eq!(out.context.detokenize(), "i can assist you");
    let out = paraphrase(&ctx("grub help"), 2, lex(), &mut rng(0));
    assert_eq!(out.changes, 1);
    let out = paraphrase(&ctx("Hello there"), 1, lex(), &mut rng(0));
    assert_eq!(out.context.detokenize(), "Hi there");
    let out = paraphrase(&ctx("grub grub"), 4, lex(), &mut rng(0));
    assert_eq!(out.changes, 0);
}

#[test]
fn multi_word_paraphrase_changes_length() {
    let source = ctx("i need a lot of help");
    let eligible = eligible_positions(&source, OperationType::Paraphrase, lex());
    assert!(eligible.spans().iter().any(|s| s.len == 3));
    let mut seen = BTreeSet::new();
    for seed in 0..40 {
        seen.insert(paraphrase(&source, 1, lex(), &mut rng(seed)).context.detokenize());
    }
    assert!(seen.contains("i need many help"), "{seen:?}");
}

#[test]
fn grammar_examples() {
    let noun = OperationType::GrammarError(MorphClass::Noun);
    let verb = OperationType::GrammarError(MorphClass::Verb);
    let out = apply_typed(&ctx("it happens"), verb, 1, lex(), &mut rng(0));
    assert_eq!(out.context.detokenize(), "it happen");
    let back = apply_typed(&out.context, verb, 1, lex(), &mut rng(0));
    assert_eq!(back.context.detokenize(), "it happens");
    let disks = ctx("the disks are full");
    let out = apply_typed(&disks, noun, 1, lex(), &mut rng(0));
    assert_eq!(out.context.detokenize(), "the disk are full");
    // "are" belongs to the verb table only.
    assert_eq!(eligible_positions(&disks, verb, lex()).positions(), [2]);
}

#[test]
fn stammer_examples() {
    assert_eq!(stammer(&ctx("ok"), 1, &mut rng(0)).context.detokenize(), "ok ok");
    let out = stammer(&ctx("a b"), 4, &mut rng(0));
    assert_eq!((out.context.detokenize().as_str(), out.changes), ("a a b b", 2));
    assert_eq!(stammer(&ctx(""), 1, &mut rng(0)).changes, 0);
}

#[test]
fn certain_gate_always_fires() {
    let op = parse_operation("(S, 1, 1.0)").unwrap();
    for seed in 0..100 {
        assert!(apply_operation(&ctx("a b"), &op, lex(), &mut rng(seed)).fired);
    }
}

#[test]
fn gate_frequency_tracks_probability() {
    let source = ctx("a b c");
    let mut r = rng(77);
    for p in 1..=10 {
        let p = p as f64 / 10.0;
        let op = Operation::new(OperationType::Stammer, 1, p).unwrap();
        let fired = (0..10_000).filter(|_| apply_operation(&source, &op, lex(), &mut r).fired).count();
        assert!((fired as f64 / 10_000.0 - p).abs() <= 0.015, "p={p}: {fired}");
    }
}

/// With positions fixed, the two gates give four outcome classes.
#[test]
fn hello_subpolicy_has_four_outcomes() {
    let source = ctx("Hello , how are you doing today ?");
    let sub = parse_subpolicy("(P, 2, 0.7)(G_v, 1, 0.4)").unwrap();
    let mut outcomes = BTreeSet::new();
    for first in [false, true] {
        for second in [false, true] {
            let mut positions = rng(5);
            let mut out = source.clone();
            for (op, on) in sub.ops.iter().zip([first, second]) {
                if on {
                    out = apply_typed(&out, op.op_type, op.n_changes(), lex(), &mut positions).context;
                }
            }
            outcomes.insert(out.detokenize());
        }
    }
    assert_eq!(outcomes.len(), 4, "{outcomes:?}");
    assert!(outcomes.contains("Hello , how are you doing today ?"));
    let both = paraphrase(&source, 2, lex(), &mut rng(5));
    assert_eq!(both.changes, 2);
}

#[test]
fn coarse_dropout_is_the_union_of_categories() {
    let table = ctx(ACPI_CONTEXT);
    let union: BTreeSet<usize> = DropoutCategory::ALL
        .iter()
        .flat_map(|&c| eligible_positions(&table, OperationType::StopwordDropout(c), lex()).positions())
        .collect();
    let coarse: BTreeSet<usize> = eligible_coarse(&table, CoarseOperation::StopwordDropout, lex())
        .positions()
        .into_iter()
        .collect();
    assert_eq!(coarse, union);
}

#[test]
fn operation_codes_are_stable() {
    let mnemonics: Vec<&str> = OperationType::ALL.iter().map(|o| o.mnemonic()).collect();
    assert_eq!(
        mnemonics,
        ["R", "D_n", "D_adp", "D_p", "D_adv", "D_v", "D_det", "D_o", "P", "G_n", "G_v", "S"]
    );
    for (i, op) in OperationType::ALL.iter().enumerate() {
        assert_eq!(op.index(), i);
        assert_eq!(OperationType::from_index(i), Some(*op));
        assert_eq!(OperationType::from_mnemonic(op.mnemonic()), Some(*op));
    }
    assert_eq!(OperationType::from_index(12), None);
}

// Property suite.

const VOCAB: &[&str] = &[
    "the", "a", "my", "you", "it", "what", "of", "on", "in", "up", "very", "not", "is", "are", "be", "don't",
    "and", "to", "one", "disk", "disks", "happens", "happen", "help", "hello", "today", "login", "grub", "install",
    "?", ",", "bla", "__eou__", "__eot__",
];

fn arb_context() -> impl Strategy<Value = Context> {
    proptest::collection::vec(proptest::sample::select(VOCAB), 0..24).prop_map(|words| ctx(&words.join(" ")))
}

fn arb_op() -> impl Strategy<Value = OperationType> {
    (0..OperationType::COUNT).prop_map(|i| OperationType::from_index(i).unwrap())
}

fn multiset(ctx: &Context) -> Vec<String> {
    let mut s = surfaces(ctx);
    s.sort();
    s
}

/// Items of `before` missing from `after`, if `after` is a subsequence.
fn deleted(before: &Context, after: &Context) -> Option<Vec<Item>> {
    let mut rest = after.items().iter().peekable();
    let mut gone = Vec::new();
    for item in before.items() {
        if rest.peek() == Some(&item) {
            rest.next();
        } else {
            gone.push(item.clone());
        }
    }
    rest.next().is_none().then_some(gone)
}

fn markers(ctx: &Context) -> Vec<Boundary> {
    ctx.marker_sequence()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn swap_preserves_the_multiset(c in arb_context(), n in 1usize..=4, seed: u64) {
        let out = random_swap(&c, n, &mut rng(seed));
        prop_assert_eq!(out.context.len(), c.len());
        prop_assert_eq!(multiset(&out.context), multiset(&c));
        prop_assert_eq!(out.changes, eligible_positions(&c, OperationType::RandomSwap, lex()).capacity(n));
        prop_assert_eq!(markers(&out.context), markers(&c));
        prop_assert_eq!(c.utterance_boundaries(), out.context.utterance_boundaries());
    }

    #[test]
    fn dropout_deletes_only_its_category(c in arb_context(), cat in 0usize..7, n in 1usize..=4, seed: u64) {
        let category = DropoutCategory::ALL[cat];
        let lex = lex();
        let out = stopword_dropout(&c, category, n, lex, &mut rng(seed));
        let eligible = eligible_positions(&c, OperationType::StopwordDropout(category), lex);
        prop_assert_eq!(out.changes, n.min(eligible.len()));
        prop_assert_eq!(out.context.len(), c.len() - out.changes);
        let gone = deleted(&c, &out.context);
        prop_assert!(gone.is_some());
        let gone = gone.unwrap();
        prop_assert_eq!(gone.len(), out.changes);
        for item in gone {
            let token = item.as_word().expect("markers survive");
            prop_assert!(token.is_stopword);
            prop_assert_eq!(lex.stopwords.category(token.surface()), Some(category));
        }
    }

    #[test]
    fn stammer_grows_by_the_count(c in arb_context(), n in 1usize..=4, seed: u64) {
        let out = stammer(&c, n, &mut rng(seed));
        prop_assert_eq!(out.changes, n.min(c.word_count()));
        prop_assert_eq!(out.context.len(), c.len() + out.changes);
        prop_assert_eq!(markers(&out.context), markers(&c));
        let shrunk = deleted(&out.context, &c);
        prop_assert!(shrunk.is_some_and(|g| g.iter().all(Item::is_word)));
    }

    #[test]
    fn grammar_flips_preserve_lemmas(c in arb_context(), verb: bool, n in 1usize..=4, seed: u64) {
        let class = if verb { MorphClass::Verb } else { MorphClass::Noun };
        let lex = lex();
        let out = grammar_error(&c, class, n, lex, &mut rng(seed));
        let eligible = eligible_positions(&c, OperationType::GrammarError(class), lex);
        prop_assert_eq!(out.changes, n.min(eligible.len()));
        prop_assert_eq!(out.context.len(), c.len());
        let mut changed = 0;
        for (before, after) in c.items().iter().zip(out.context.items()) {
            if before != after {
                changed += 1;
                let (b, a) = (before.as_word().unwrap(), after.as_word().unwrap());
                prop_assert_eq!(lex.flip_form(class, b.surface()), Some(a.surface().to_string()));
                prop_assert_eq!(lex.flip_form(class, a.surface()), Some(b.surface().to_string()));
            }
        }
        prop_assert_eq!(changed, out.changes);
    }

    #[test]
    fn paraphrase_respects_eligibility(c in arb_context(), n in 1usize..=4, seed: u64) {
        let lex = lex();
        let out = paraphrase(&c, n, lex, &mut rng(seed));
        let eligible = eligible_positions(&c, OperationType::Paraphrase, lex);
        prop_assert_eq!(out.changes, eligible.capacity(n));
        prop_assert_eq!(markers(&out.context), markers(&c));
        prop_assert!(out.context.items().iter().all(|i| !i.is_word() || !i.text().is_empty()));
    }

    #[test]
    fn operations_are_deterministic_and_keep_markers(c in arb_context(), op in arb_op(), n in 1usize..=4, seed: u64) {
        let lex = lex();
        let a = apply_typed(&c, op, n, lex, &mut rng(seed));
        let b = apply_typed(&c, op, n, lex, &mut rng(seed));
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(markers(&a.context), markers(&c));
        let eligible = eligible_positions(&c, op, lex);
        prop_assert_eq!(a.changes, eligible.capacity(n));
        prop_assert!(eligible.positions().iter().all(|&p| c.items()[p].is_word()));
    }
}
