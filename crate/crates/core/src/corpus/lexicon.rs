//! Lexical resources shared by the perturbation operations.
//!
//! All files are UTF-8 and line-delimited; `#` starts a comment line.
//!
//! | file              | line format                      |
//! |-------------------|----------------------------------|
//! | `pos.tsv`         | `surface<TAB>TAG1,TAG2,...`      |
//! | `stopwords.tsv`   | `surface<TAB>TAG`                |
//! | `paraphrase.tsv`  | `source<TAB>target<TAB>score`    |
//! | `morphology.tsv`  | `base<TAB>inflected<TAB>N\|V`    |
//!
//! Morphology lines whose two forms both start with `*` are suffix rules
//! (`*y<TAB>*ies<TAB>N`). A rule only fires when the word and the rewritten
//! form are both listed in the POS lexicon with the rule's class tag.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Tag, Token};
use crate::{util, Error, Result};

const BUNDLED_POS: &str = include_str!("../../data/lexicon/pos.tsv");
const BUNDLED_STOPWORDS: &str = include_str!("../../data/lexicon/stopwords.tsv");
const BUNDLED_PARAPHRASE: &str = include_str!("../../data/lexicon/paraphrase.tsv");
const BUNDLED_MORPHOLOGY: &str = include_str!("../../data/lexicon/morphology.tsv");

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.trim_end_matches('\r')))
        .filter(|(_, line)| !line.trim().is_empty() && !line.trim_start().starts_with('#'))
}

#[derive(Debug, Clone, Default)]
pub struct PosLexicon {
    entries: HashMap<String, Vec<Tag>>,
}

impl PosLexicon {
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        for (line_no, line) in content_lines(text) {
            let (surface, tags) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(file, line_no, "expected `surface<TAB>TAGS`"))?;
            let tags = tags
                .split(',')
                .map(|t| t.trim().parse::<Tag>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|m| Error::parse(file, line_no, m))?;
            if surface.is_empty() || tags.is_empty() {
                return Err(Error::parse(file, line_no, "empty surface or tag list"));
            }
            entries.insert(surface.to_lowercase(), tags);
        }
        Ok(PosLexicon { entries })
    }

    /// Most frequent tag for the case-folded surface; unknown words are
    /// [`Tag::Other`].
    pub fn tag(&self, surface: &str) -> Tag {
        self.tags(surface).first().copied().unwrap_or(Tag::Other)
    }

    pub fn tags(&self, surface: &str) -> &[Tag] {
        self.entries
            .get(&surface.to_lowercase())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn has_tag(&self, surface: &str, tag: Tag) -> bool {
        self.tags(surface).contains(&tag)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The seven stopword-dropout categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DropoutCategory {
    Noun,
    Adposition,
    Pronoun,
    Adverb,
    Verb,
    Determiner,
    Other,
}

impl DropoutCategory {
    pub const ALL: [DropoutCategory; 7] = [
        DropoutCategory::Noun,
        DropoutCategory::Adposition,
        DropoutCategory::Pronoun,
        DropoutCategory::Adverb,
        DropoutCategory::Verb,
        DropoutCategory::Determiner,
        DropoutCategory::Other,
    ];

    /// Six named closed-class tags map to their own category; everything
    /// else is `Other`.
    pub fn from_tag(tag: Tag) -> Self {
        match tag {
            Tag::Noun => DropoutCategory::Noun,
            Tag::Adp => DropoutCategory::Adposition,
            Tag::Pron => DropoutCategory::Pronoun,
            Tag::Adv => DropoutCategory::Adverb,
            Tag::Verb => DropoutCategory::Verb,
            Tag::Det => DropoutCategory::Determiner,
            _ => DropoutCategory::Other,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct StopwordLexicon {
    entries: HashMap<String, Tag>,
}

impl StopwordLexicon {
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        for (line_no, line) in content_lines(text) {
            let (surface, tag) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(file, line_no, "expected `surface<TAB>TAG`"))?;
            let tag: Tag = tag.trim().parse().map_err(|m| Error::parse(file, line_no, m))?;
            let key = surface.to_lowercase();
            if let Some(previous) = entries.insert(key, tag) {
                if previous != tag {
                    return Err(Error::parse(
                        file,
                        line_no,
                        format!("stopword `{surface}` listed with two tags"),
                    ));
                }
            }
        }
        Ok(StopwordLexicon { entries })
    }

    pub fn tag(&self, surface: &str) -> Option<Tag> {
        self.entries.get(&surface.to_lowercase()).copied()
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.tag(surface).is_some()
    }

    pub fn category(&self, surface: &str) -> Option<DropoutCategory> {
        self.tag(surface).map(DropoutCategory::from_tag)
    }

    /// Stopwords of one category, sorted.
    pub fn words_in(&self, category: DropoutCategory) -> Vec<&str> {
        let mut words: Vec<&str> = self
            .entries
            .iter()
            .filter(|(_, tag)| DropoutCategory::from_tag(**tag) == category)
            .map(|(w, _)| w.as_str())
            .collect();
        words.sort_unstable();
        words
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Phrase table: source phrases of one to three words mapped to scored
/// targets, best first.
#[derive(Debug, Clone, Default)]
pub struct ParaphraseLexicon {
    entries: HashMap<Vec<String>, Vec<(Vec<String>, f64)>>,
    max_source_len: usize,
}

impl ParaphraseLexicon {
    pub const MAX_PHRASE_LEN: usize = 3;

    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut lex = ParaphraseLexicon::default();
        for (line_no, line) in content_lines(text) {
            let fields: Vec<&str> = line.split('\t').collect();
            let [source, target, score] = fields[..] else {
                return Err(Error::parse(
                    file,
                    line_no,
                    "expected `source<TAB>target<TAB>score`",
                ));
            };
            let score: f64 = score
                .trim()
                .parse()
                .map_err(|_| Error::parse(file, line_no, format!("bad score `{score}`")))?;
            if !score.is_finite() {
                return Err(Error::parse(file, line_no, "score must be finite"));
            }
            lex.insert(source, target, score)
                .map_err(|m| Error::parse(file, line_no, m))?;
        }
        Ok(lex)
    }

    pub fn insert(&mut self, source: &str, target: &str, score: f64) -> Result<(), String> {
        let source = phrase_words(source);
        let target = phrase_words(target);
        if source.is_empty() || source.len() > Self::MAX_PHRASE_LEN {
            return Err(format!(
                "source phrase must have 1..={} words",
                Self::MAX_PHRASE_LEN
            ));
        }
        if target.is_empty() {
            return Err("empty target phrase".into());
        }
        if source == target {
            return Err("phrase maps to itself".into());
        }
        self.max_source_len = self.max_source_len.max(source.len());
        let targets = self.entries.entry(source).or_default();
        targets.push((target, score));
        // stable: equal scores keep file order
        targets.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(())
    }

    /// Highest-scoring target for a case-folded source phrase.
    pub fn best(&self, phrase: &[String]) -> Option<&[String]> {
        self.entries
            .get(phrase)
            .and_then(|targets| targets.first())
            .map(|(t, _)| t.as_slice())
    }

    pub fn targets(&self, phrase: &[String]) -> &[(Vec<String>, f64)] {
        self.entries.get(phrase).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn max_source_len(&self) -> usize {
        self.max_source_len
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn phrase_words(phrase: &str) -> Vec<String> {
    phrase.split_whitespace().map(str::to_lowercase).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MorphClass {
    Noun,
    Verb,
}

impl MorphClass {
    pub fn tag(self) -> Tag {
        match self {
            MorphClass::Noun => Tag::Noun,
            MorphClass::Verb => Tag::Verb,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct SuffixRule {
    base: String,
    inflected: String,
}

#[derive(Debug, Clone, Default)]
struct FormTable {
    /// Both directions of every listed pair.
    pairs: HashMap<String, String>,
    rules: Vec<SuffixRule>,
}

impl FormTable {
    fn insert_pair(&mut self, base: &str, inflected: &str) -> Result<(), String> {
        for (a, b) in [(base, inflected), (inflected, base)] {
            match self.pairs.get(a) {
                Some(existing) if existing != b => {
                    return Err(format!("`{a}` already paired with `{existing}`"));
                }
                _ => {}
            }
        }
        self.pairs.insert(base.to_string(), inflected.to_string());
        self.pairs.insert(inflected.to_string(), base.to_string());
        Ok(())
    }

    fn flip(&self, word: &str, class: MorphClass, pos: &PosLexicon) -> Option<String> {
        if let Some(other) = self.pairs.get(word) {
            return Some(other.clone());
        }
        if !pos.has_tag(word, class.tag()) {
            return None;
        }
        let accept = |candidate: &str| {
            candidate != word
                && !self.pairs.contains_key(candidate)
                && pos.has_tag(candidate, class.tag())
        };
        for rule in &self.rules {
            if let Some(stem) = word.strip_suffix(rule.inflected.as_str()) {
                let candidate = format!("{stem}{}", rule.base);
                if !stem.is_empty() && accept(&candidate) {
                    return Some(candidate);
                }
            }
            if let Some(stem) = word.strip_suffix(rule.base.as_str()) {
                let candidate = format!("{stem}{}", rule.inflected);
                if !stem.is_empty() && accept(&candidate) {
                    return Some(candidate);
                }
            }
        }
        None
    }
}

/// Singular/plural and base/inflected form pairs, with irregular pairs
/// listed explicitly and regular ones covered by suffix rules.
#[derive(Debug, Clone, Default)]
pub struct MorphologyTable {
    noun: FormTable,
    verb: FormTable,
}

impl MorphologyTable {
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut table = MorphologyTable::default();
        for (line_no, line) in content_lines(text) {
            let fields: Vec<&str> = line.split('\t').collect();
            let [base, inflected, class] = fields[..] else {
                return Err(Error::parse(
                    file,
                    line_no,
                    "expected `base<TAB>inflected<TAB>N|V`",
                ));
            };
            let forms = match class.trim() {
                "N" => &mut table.noun,
                "V" => &mut table.verb,
                other => {
                    return Err(Error::parse(
                        file,
                        line_no,
                        format!("class must be N or V, got `{other}`"),
                    ))
                }
            };
            let base = base.trim().to_lowercase();
            let inflected = inflected.trim().to_lowercase();
            match (base.strip_prefix('*'), inflected.strip_prefix('*')) {
                (Some(b), Some(i)) => {
                    if b == i {
                        return Err(Error::parse(file, line_no, "rule suffixes are identical"));
                    }
                    forms.rules.push(SuffixRule {
                        base: b.to_string(),
                        inflected: i.to_string(),
                    });
                }
                (None, None) => {
                    if base.is_empty() || inflected.is_empty() || base == inflected {
                        return Err(Error::parse(file, line_no, "forms must differ"));
                    }
                    forms
                        .insert_pair(&base, &inflected)
                        .map_err(|m| Error::parse(file, line_no, m))?;
                }
                _ => {
                    return Err(Error::parse(
                        file,
                        line_no,
                        "a rule needs `*` on both forms",
                    ))
                }
            }
        }
        Ok(table)
    }

    pub fn insert_pair(&mut self, class: MorphClass, base: &str, inflected: &str) -> Result<(), String> {
        self.forms_mut(class)
            .insert_pair(&base.to_lowercase(), &inflected.to_lowercase())
    }

    /// Other form of a case-folded word, if any.
    pub fn flip(&self, class: MorphClass, word: &str, pos: &PosLexicon) -> Option<String> {
        self.forms(class).flip(&word.to_lowercase(), class, pos)
    }

    /// Listed (non-rule) pairs of a class as `(form, other form)`, both
    /// directions.
    pub fn listed_pairs(&self, class: MorphClass) -> impl Iterator<Item = (&str, &str)> {
        self.forms(class)
            .pairs
            .iter()
            .map(|(a, b)| (a.as_str(), b.as_str()))
    }

    fn forms(&self, class: MorphClass) -> &FormTable {
        match class {
            MorphClass::Noun => &self.noun,
            MorphClass::Verb => &self.verb,
        }
    }

    fn forms_mut(&mut self, class: MorphClass) -> &mut FormTable {
        match class {
            MorphClass::Noun => &mut self.noun,
            MorphClass::Verb => &mut self.verb,
        }
    }
}

/// Where to find each lexicon file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconPaths {
    pub pos: PathBuf,
    pub stopwords: PathBuf,
    pub paraphrase: PathBuf,
    pub morphology: PathBuf,
}

impl LexiconPaths {
    pub fn in_dir(dir: &Path) -> Self {
        LexiconPaths {
            pos: dir.join("pos.tsv"),
            stopwords: dir.join("stopwords.tsv"),
            paraphrase: dir.join("paraphrase.tsv"),
            morphology: dir.join("morphology.tsv"),
        }
    }
}

/// Every lexical resource the operations need. Immutable once loaded.
#[derive(Debug, Clone, Default)]
pub struct Lexicons {
    pub pos: PosLexicon,
    pub stopwords: StopwordLexicon,
    pub paraphrases: ParaphraseLexicon,
    pub morphology: MorphologyTable,
}

impl Lexicons {
    /// The lexicons shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_texts(
            BUNDLED_POS,
            BUNDLED_STOPWORDS,
            BUNDLED_PARAPHRASE,
            BUNDLED_MORPHOLOGY,
        )
        .expect("bundled lexicons are well-formed")
    }

    pub fn from_texts(pos: &str, stopwords: &str, paraphrase: &str, morphology: &str) -> Result<Self> {
        Ok(Lexicons {
            pos: PosLexicon::parse(pos, "pos.tsv")?,
            stopwords: StopwordLexicon::parse(stopwords, "stopwords.tsv")?,
            paraphrases: ParaphraseLexicon::parse(paraphrase, "paraphrase.tsv")?,
            morphology: MorphologyTable::parse(morphology, "morphology.tsv")?,
        })
    }

    pub fn load(paths: &LexiconPaths) -> Result<Self> {
        let read = |p: &Path| util::read_to_string(p).map(|text| (text, p.display().to_string()));
        let (pos, pos_name) = read(&paths.pos)?;
        let (stop, stop_name) = read(&paths.stopwords)?;
        let (para, para_name) = read(&paths.paraphrase)?;
        let (morph, morph_name) = read(&paths.morphology)?;
        Ok(Lexicons {
            pos: PosLexicon::parse(&pos, &pos_name)?,
            stopwords: StopwordLexicon::parse(&stop, &stop_name)?,
            paraphrases: ParaphraseLexicon::parse(&para, &para_name)?,
            morphology: MorphologyTable::parse(&morph, &morph_name)?,
        })
    }

    /// Tag for a surface. Stopwords take their stopword-list tag so that the
    /// dropout category and the token tag always agree.
    pub fn tag(&self, surface: &str) -> Tag {
        self.stopwords
            .tag(surface)
            .unwrap_or_else(|| self.pos.tag(surface))
    }

    /// Builds a tagged token. `surface` must be a single non-empty word.
    pub fn make_token(&self, surface: &str) -> Token {
        Token::new(surface, self.tag(surface), self.stopwords.contains(surface))
            .expect("surface is a single whitespace-free word")
    }

    /// Other grammatical form of `surface`, with its casing carried over.
    pub fn flip_form(&self, class: MorphClass, surface: &str) -> Option<String> {
        self.morphology
            .flip(class, surface, &self.pos)
            .map(|form| match_case(surface, &form))
    }
}

/// Carries the casing pattern of `original` over to `replacement`: all-caps
/// stays all-caps, a leading capital stays a leading capital.
pub fn match_case(original: &str, replacement: &str) -> String {
    let mut chars = original.chars();
    let first_upper = chars.next().is_some_and(char::is_uppercase);
    let all_upper = original.chars().filter(|c| c.is_alphabetic()).count() > 1
        && original
            .chars()
            .filter(|c| c.is_alphabetic())
            .all(char::is_uppercase);
    if all_upper {
        replacement.to_uppercase()
    } else if first_upper {
        let mut out = String::with_capacity(replacement.len());
        let mut rest = replacement.chars();
        if let Some(c) = rest.next() {
            out.extend(c.to_uppercase());
        }
        out.extend(rest);
        out
    } else {
        replacement.to_string()
    }
}
