//! Activity / entity F1 and the weighted scalar reward.
//!
//! Responses are mapped to the set of technical verbs (activities) and
//! technical nouns (entities) they mention; F1 is computed per example
//! between predicted and gold sets and macro-averaged over the corpus.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::read_lines;
use crate::{util, Error, Result};

/// Activity F1 of the reference attention baseline.
pub const BASELINE_ACTIVITY_F1: f64 = 5.94;
/// Entity F1 of the reference attention baseline.
pub const BASELINE_ENTITY_F1: f64 = 3.52;

/// Weight on entity F1, chosen so both F1s contribute equally at the
/// baseline.
pub fn entity_weight() -> f64 {
    BASELINE_ACTIVITY_F1 / BASELINE_ENTITY_F1
}

/// `activity + (5.94 / 3.52) * entity`.
pub fn weighted_reward(activity_f1: f64, entity_f1: f64) -> f64 {
    activity_f1 + BASELINE_ACTIVITY_F1 / BASELINE_ENTITY_F1 * entity_f1
}

#[derive(Debug, Clone, Default)]
pub struct ActivityEntityLexicon {
    activities: BTreeSet<String>,
    entities: BTreeSet<String>,
}

impl ActivityEntityLexicon {
    pub fn new<A, E>(activities: A, entities: E) -> Result<Self>
    where
        A: IntoIterator,
        A::Item: AsRef<str>,
        E: IntoIterator,
        E::Item: AsRef<str>,
    {
        let fold = |s: &str| s.trim().to_lowercase();
        let activities: BTreeSet<String> = activities
            .into_iter()
            .map(|s| fold(s.as_ref()))
            .filter(|s| !s.is_empty())
            .collect();
        let entities: BTreeSet<String> = entities
            .into_iter()
            .map(|s| fold(s.as_ref()))
            .filter(|s| !s.is_empty())
            .collect();
        if activities.is_empty() || entities.is_empty() {
            return Err(Error::Config("activity and entity lexicons must be non-empty".into()));
        }
        if let Some(shared) = activities.intersection(&entities).next() {
            return Err(Error::Config(format!(
                "`{shared}` is listed as both an activity and an entity"
            )));
        }
        Ok(ActivityEntityLexicon {
            activities,
            entities,
        })
    }

    pub fn load(activities: &Path, entities: &Path) -> Result<Self> {
        Self::new(read_lines(activities)?, read_lines(entities)?)
    }

    pub fn bundled() -> Self {
        Self::new(
            include_str!("../data/lexicon/activities.txt").lines(),
            include_str!("../data/lexicon/entities.txt").lines(),
        )
        .expect("bundled activity/entity lexicon is well-formed")
    }

    pub fn activities(&self) -> impl Iterator<Item = &str> {
        self.activities.iter().map(String::as_str)
    }

    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.entities.iter().map(String::as_str)
    }

    pub fn is_activity(&self, word: &str) -> bool {
        self.activities.contains(&word.to_lowercase())
    }

    pub fn is_entity(&self, word: &str) -> bool {
        self.entities.contains(&word.to_lowercase())
    }

    /// Activity and entity sets mentioned by a whitespace-tokenized
    /// response.
    pub fn extract(&self, response: &str) -> (BTreeSet<String>, BTreeSet<String>) {
        self.extract_words(response.split_whitespace())
    }

    pub fn extract_words<'a>(
        &self,
        words: impl IntoIterator<Item = &'a str>,
    ) -> (BTreeSet<String>, BTreeSet<String>) {
        let mut activities = BTreeSet::new();
        let mut entities = BTreeSet::new();
        for word in words {
            let folded = word.to_lowercase();
            if self.activities.contains(&folded) {
                activities.insert(folded);
            } else if self.entities.contains(&folded) {
                entities.insert(folded);
            }
        }
        (activities, entities)
    }
}

/// F1 between two sets. Both empty scores 1; exactly one empty scores 0.
pub fn f1<T: Ord>(pred: &BTreeSet<T>, gold: &BTreeSet<T>) -> f64 {
    match (pred.is_empty(), gold.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let hits = pred.intersection(gold).count() as f64;
    if hits == 0.0 {
        return 0.0;
    }
    let precision = hits / pred.len() as f64;
    let recall = hits / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Activity and entity F1 of a corpus, with the weighted reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardReport {
    pub activity_f1: f64,
    pub entity_f1: f64,
    pub weighted: f64,
    pub examples: usize,
}

impl RewardReport {
    pub fn new(activity_f1: f64, entity_f1: f64, examples: usize) -> Self {
        RewardReport {
            activity_f1,
            entity_f1,
            weighted: weighted_reward(activity_f1, entity_f1),
            examples,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Macro-averaged activity and entity F1 over aligned responses and gold
/// responses.
pub fn corpus_f1<S: AsRef<str>, G: AsRef<str>>(
    responses: &[S],
    golds: &[G],
    lex: &ActivityEntityLexicon,
) -> Result<RewardReport> {
    if responses.len() != golds.len() {
        return Err(Error::InvalidArgument(format!(
            "{} responses but {} gold responses",
            responses.len(),
            golds.len()
        )));
    }
    if responses.is_empty() {
        return Err(Error::InvalidArgument("cannot score an empty corpus".into()));
    }
    let (mut activity, mut entity) = (0.0, 0.0);
    for (response, gold) in responses.iter().zip(golds) {
        let (pa, pe) = lex.extract(response.as_ref());
        let (ga, ge) = lex.extract(gold.as_ref());
        activity += f1(&pa, &ga);
        entity += f1(&pe, &ge);
    }
    let n = responses.len() as f64;
    Ok(RewardReport::new(activity / n, entity / n, responses.len()))
}

/// Scores two aligned line files.
pub fn evaluate_files(
    responses: &Path,
    golds: &Path,
    lex: &ActivityEntityLexicon,
) -> Result<RewardReport> {
    let responses = util::read_to_string(responses)?;
    let golds = util::read_to_string(golds)?;
    let responses: Vec<&str> = responses.lines().collect();
    let golds: Vec<&str> = golds.lines().collect();
    corpus_f1(&responses, &golds, lex)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn set(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn lex() -> ActivityEntityLexicon {
        ActivityEntityLexicon::new(["boot", "rm", "install"], ["disk", "root"]).unwrap()
    }

    #[test]
    fn extract_matches() {
        let (a, e) = lex().extract("please boot from the disk");
        assert_eq!(a, set(&["boot"]));
        assert_eq!(e, set(&["disk"]));
        let (a, e) = lex().extract("hello there");
        assert!(a.is_empty() && e.is_empty());
        let (a, _) = lex().extract("Boot boot BOOT");
        assert_eq!(a, set(&["boot"]));
    }

    #[test]
    fn f1_values() {
        // P = 1/2, R = 1 -> 2 * 0.5 / 1.5
        assert!((f1(&set(&["boot", "rm"]), &set(&["boot"])) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(f1(&set(&["boot"]), &set(&["boot"])), 1.0);
        assert_eq!(f1(&set(&[]), &set(&[])), 1.0);
        assert_eq!(f1(&set(&[]), &set(&["boot"])), 0.0);
        assert_eq!(f1(&set(&["boot"]), &set(&[])), 0.0);
        assert_eq!(f1(&set(&["rm"]), &set(&["boot"])), 0.0);
    }

    #[test]
    fn corpus_macro_average() {
        let report = corpus_f1(&["boot", "rm"], &["boot", "install"], &lex()).unwrap();
        assert!((report.activity_f1 - 0.5).abs() < 1e-12);
        // no entities anywhere: empty/empty scores 1
        assert_eq!(report.entity_f1, 1.0);
        let single = corpus_f1(&["boot rm"], &["boot"], &lex()).unwrap();
        assert!((single.activity_f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn corpus_errors() {
        assert!(corpus_f1::<&str, &str>(&[], &[], &lex()).is_err());
        assert!(corpus_f1(&["a"], &["a", "b"], &lex()).is_err());
    }

    #[test]
    fn weighted_values() {
        assert!((weighted_reward(5.94, 3.52) - 11.88).abs() < 1e-9);
        assert_eq!(weighted_reward(0.7, 0.0), 0.7);
        assert!((weighted_reward(0.0, 3.52) - 5.94).abs() < 1e-12);
    }

    #[test]
    fn overlapping_lexicons_rejected() {
        assert!(ActivityEntityLexicon::new(["boot"], ["boot"]).is_err());
        assert!(ActivityEntityLexicon::new(Vec::<String>::new(), ["disk"]).is_err());
    }

    #[test]
    fn bundled_lexicon_loads() {
        let lex = ActivityEntityLexicon::bundled();
        assert!(lex.is_activity("boot") && lex.is_entity("disk"));
    }

    fn word_set() -> impl Strategy<Value = BTreeSet<String>> {
        proptest::collection::btree_set("[a-e]", 0..5)
    }

    proptest! {
        #[test]
        fn f1_symmetric_and_bounded(a in word_set(), b in word_set()) {
            let ab = f1(&a, &b);
            prop_assert_eq!(ab, f1(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab == 1.0, a == b);
        }

        #[test]
        fn weighted_linear_monotone(a in 0.0f64..1.0, e in 0.0f64..1.0, d in 0.0f64..1.0) {
            prop_assert!(weighted_reward(a + d, e) >= weighted_reward(a, e));
            prop_assert!(weighted_reward(a, e + d) >= weighted_reward(a, e));
            let lhs = weighted_reward(a + d, e + d);
            let rhs = weighted_reward(a, e) + weighted_reward(d, d);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
