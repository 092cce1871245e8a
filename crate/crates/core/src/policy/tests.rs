use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::{parse_corpus, render_corpus, DropoutCategory, Example, Lexicons};
use crate::ops::OperationType;
use crate::Error;

fn lex() -> &'static Lexicons {
    static LEX: OnceLock<Lexicons> = OnceLock::new();
    LEX.get_or_init(Lexicons::bundled)
}

const SAMPLE_POLICIES: [&str; 3] = [
    "(P, 1, 0.5)(D_adv, 4, 0.4) | (D_v, 3, 0.2)(R, 1, 0.5) | (R, 3, 0.9)(D_adp, 1, 0.5) | (D_p, 2, 0.3)(D_adp, 2, 0.1)",
    "(D_n, 1, 0.8)(G_v, 1, 0.9) | (D_o, 3, 1.0)(D_o, 3, 0.1) | (P, 4, 0.4)(S, 3, 0.4) | (G_n, 3, 0.3)(R, 1, 0.2)",
    "(D_v, 2, 0.5)(R, 2, 0.2) | (D_v, 2, 0.7)(G_v, 1, 0.9) | (S, 3, 0.5)(D_o, 1, 0.5) | (P, 1, 1.0)(G_n, 2, 0.6)",
];

fn arb_policy() -> impl Strategy<Value = Policy> {
    proptest::collection::vec((0usize..12, 0usize..4, 0usize..10), 8).prop_map(|ops| {
        let indices: Vec<usize> = ops.into_iter().flat_map(|(t, n, p)| [t, n, p]).collect();
        Policy::from_indices(&indices).unwrap()
    })
}

#[test]
fn search_space_is_480_to_the_8th() {
    assert_eq!(search_space_size(), 480u128.pow(8));
    assert_eq!(search_space_size(), 2_817_928_042_905_600_000_000);
    assert_eq!(format!("{:.2e}", search_space_size() as f64), "2.82e21");
    assert_eq!(12 * MAX_CHANGES * PROBABILITY_LEVELS, 480);
}

#[test]
fn sample_policies_first_operation_encodes_first() {
    let policy = parse_policy(SAMPLE_POLICIES[0]).unwrap();
    let tokens = policy.encode();
    assert_eq!(tokens.len(), POLICY_TOKENS);
    assert_eq!(
        &tokens[..3],
        &[
            PolicyToken::new(Slot::Type, OperationType::Paraphrase.index()),
            PolicyToken::new(Slot::Count, 0),
            PolicyToken::new(Slot::Probability, 4),
        ]
    );
    for (i, token) in tokens.iter().enumerate() {
        assert_eq!(token.slot, Slot::at(i));
    }
}

#[test]
fn sample_policies_renders_as_a_table() {
    let policies: Vec<Policy> = SAMPLE_POLICIES.iter().map(|p| parse_policy(p).unwrap()).collect();
    let table = render_table(&policies);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 1 + 3 * 3);
    assert!(lines[0].starts_with("Sub-policy1"));
    assert!(lines[2].starts_with("P, 1, 0.5"));
    assert!(lines[3].starts_with("D_adv, 4, 0.4"));
    assert!(lines[9].ends_with("G_n, 2, 0.6"));
}

#[test]
fn compact_form_round_trips() {
    for text in SAMPLE_POLICIES {
        let policy = parse_policy(text).unwrap();
        assert_eq!(policy.to_compact(), text);
        assert_eq!(policy.to_string(), text);
    }
}

#[test]
fn single_subpolicy_files_repeat() {
    let policy = parse_policy_file("(D_v,3,0.2)(R,1,0.5)").unwrap();
    let sub = parse_subpolicy("(D_v, 3, 0.2) (R, 1, 0.5)").unwrap();
    assert_eq!(policy, Policy::repeated(sub));
    assert_eq!(sub.ops[0], Operation::new(OperationType::StopwordDropout(DropoutCategory::Verb), 3, 0.2).unwrap());
    assert!(parse_policy_file("(R,1,0.5)(R,1,0.5)(S,1,0.5)(S,1,0.5)").is_err());
}

#[test]
fn single_operation_parses() {
    let op = parse_operation("(R, 4, 1.0)").unwrap();
    assert_eq!(op, Operation::new(OperationType::RandomSwap, 4, 1.0).unwrap());
    assert_eq!(op.probability, Probability::ONE);
    assert_eq!(op.to_string(), "(R, 4, 1.0)");
}

#[test]
fn syntax_errors_carry_columns() {
    let column = |text: &str| match parse_operation(text) {
        Err(Error::PolicySyntax { column, .. }) => column,
        other => panic!("{text}: {other:?}"),
    };
    assert_eq!(column("(Q, 1, 0.5)"), 2);
    assert_eq!(column("(R, 5, 0.5)"), 5);
    assert_eq!(column("(R, 1, 0.55)"), 8);
    assert_eq!(column("(R, 1, 0.0)"), 8);
    assert_eq!(column("(R, 1, 0.5"), 11);
    assert_eq!(column("(R, 1, 0.5) x"), 13);
    assert!(parse_policy("(R,1,0.5)(S,1,0.5)").is_err());
}

#[test]
fn json_document_round_trips() {
    let policy = parse_policy(SAMPLE_POLICIES[1]).unwrap();
    let doc = PolicyDocument::from_policy(&policy);
    let json = doc.to_json();
    assert!(json.contains("\"type\": \"D_n\""));
    assert_eq!(parse_policy_file(&json).unwrap(), policy);
    let mut bad = doc.clone();
    bad.sub_policies[0].ops[0].p = 0.35;
    assert!(bad.to_policy().is_err());
    bad = doc.clone();
    bad.sub_policies.pop();
    assert!(bad.to_policy().is_err());
    bad = doc;
    bad.version = 2;
    assert!(bad.to_policy().is_err());
}

#[test]
fn grid_is_enforced() {
    assert!(Operation::new(OperationType::Stammer, 0, 0.5).is_err());
    assert!(Operation::new(OperationType::Stammer, 5, 0.5).is_err());
    for bad in [0.0, 0.05, 1.1, f64::NAN, -0.1] {
        assert!(Probability::from_value(bad).is_none(), "{bad}");
    }
    for i in 0..10 {
        let p = Probability::from_index(i).unwrap();
        assert_eq!(Probability::from_value(p.value()), Some(p));
    }
    assert_eq!(Probability::from_value(0.7000000001), None);
    assert_eq!(Probability::from_value(0.1 + 0.2), Probability::from_index(2));
}

#[test]
fn decoding_rejects_bad_sequences() {
    assert!(Policy::from_indices(&[0; 23]).is_err());
    let mut indices = vec![0; 24];
    indices[0] = 12;
    assert!(Policy::from_indices(&indices).is_err());
    let mut tokens = Policy::from_indices(&[0; 24]).unwrap().encode();
    tokens.swap(0, 1);
    assert!(Policy::decode(&tokens).is_err());
}

#[test]
fn subpolicy_choice_is_uniform() {
    let policy = parse_policy(SAMPLE_POLICIES[2]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut counts = [0usize; 4];
    for _ in 0..40_000 {
        let picked = policy.pick_subpolicy(&mut rng);
        let i = policy.sub_policies.iter().position(|s| std::ptr::eq(s, picked)).unwrap();
        counts[i] += 1;
    }
    for c in counts {
        assert!((c as f64 / 40_000.0 - 0.25).abs() <= 0.01, "{counts:?}");
    }
}

#[test]
fn repeated_subpolicy_is_always_picked() {
    let sub = parse_subpolicy("(S,1,0.5)(R,2,0.5)").unwrap();
    let policy = Policy::repeated(sub);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!((0..100).all(|_| *policy.pick_subpolicy(&mut rng) == sub));
}

fn corpus() -> Vec<Example> {
    parse_corpus(
        "hello , my disk is full __eou__ help\tdelete the files\n\
         what is the offer ?\tinstall the package\n\
         it happens to you too\tboot the kernel\n\
         \t\n",
        lex(),
    )
}

#[test]
fn augmentation_keeps_targets_and_order() {
    let corpus = corpus();
    let policy = parse_policy(SAMPLE_POLICIES[0]).unwrap();
    let out = augment_corpus(&corpus, &policy, lex(), 3);
    assert_eq!(out.examples.len(), corpus.len());
    for (a, b) in out.examples.iter().zip(&corpus) {
        assert_eq!(a.target, b.target);
    }
    assert_eq!(out.stats.examples, corpus.len());
    let again = augment_corpus(&corpus, &policy, lex(), 3);
    assert_eq!(render_corpus(&again.examples), render_corpus(&out.examples));
}

#[test]
fn shared_policy_matches_per_example_lookup() {
    let corpus = corpus();
    let policy = parse_policy(SAMPLE_POLICIES[1]).unwrap();
    let full = augment_corpus(&corpus, &policy, lex(), 9);
    let each = augment_corpus_with(&corpus, |_| &policy, lex(), 9);
    assert_eq!(each.examples, full.examples);
}

#[test]
fn inapplicable_policy_is_identity() {
    let noop = Operation::new(OperationType::StopwordDropout(DropoutCategory::Other), 4, 1.0).unwrap();
    let corpus = parse_corpus("grub kernel panic\tboot\nwifi driver __eou__ usb\tmount\n", lex());
    let out = augment_corpus(&corpus, &Policy::repeated(SubPolicy::new(noop, noop)), lex(), 1);
    assert_eq!(out.examples, corpus);
    let stats = out.stats.get(noop.op_type);
    assert_eq!((stats.drawn, stats.fired, stats.changes), (4, 4, 0));
}

#[test]
fn subpolicy_order_is_respected() {
    // Stammer then dropout can delete the copy; dropout first cannot.
    let first = parse_subpolicy("(D_det, 1, 1.0)(S, 4, 1.0)").unwrap();
    let source = crate::corpus::tokenize("the disk", lex());
    let out = apply_subpolicy(&source, &first, lex(), &mut ChaCha8Rng::seed_from_u64(0));
    assert_eq!(out.context.detokenize(), "disk disk");
    assert_eq!(out.changes, [1, 1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn encode_decode_round_trip(policy in arb_policy()) {
        let tokens = policy.encode();
        prop_assert_eq!(tokens.len(), 24);
        prop_assert_eq!(Policy::decode(&tokens).unwrap(), policy);
        prop_assert_eq!(Policy::from_indices(&policy.to_indices()).unwrap(), policy);
        prop_assert_eq!(parse_policy(&policy.to_compact()).unwrap(), policy);
        prop_assert_eq!(PolicyDocument::from_policy(&policy).to_policy().unwrap(), policy);
    }
}
