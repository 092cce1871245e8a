//! Corpus ingestion: whitespace tokenization of Ubuntu-style dialogue lines,
//! lexicon-based tagging, and the line-oriented corpus file format.

mod lexicon;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use lexicon::{
    match_case, DropoutCategory, LexiconPaths, Lexicons, MorphClass, MorphologyTable, ParaphraseLexicon,
    PosLexicon, StopwordLexicon,
};

use crate::{util, Result};

pub const UTTERANCE_MARKER: &str = "__eou__";
pub const TURN_MARKER: &str = "__eot__";

/// Universal part-of-speech tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    Noun,
    Verb,
    Adp,
    Pron,
    Adv,
    Det,
    Conj,
    Prt,
    Num,
    X,
    Punct,
    Other,
}

impl Tag {
    pub const ALL: [Tag; 12] = [
        Tag::Noun,
        Tag::Verb,
        Tag::Adp,
        Tag::Pron,
        Tag::Adv,
        Tag::Det,
        Tag::Conj,
        Tag::Prt,
        Tag::Num,
        Tag::X,
        Tag::Punct,
        Tag::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Noun => "NOUN",
            Tag::Verb => "VERB",
            Tag::Adp => "ADP",
            Tag::Pron => "PRON",
            Tag::Adv => "ADV",
            Tag::Det => "DET",
            Tag::Conj => "CONJ",
            Tag::Prt => "PRT",
            Tag::Num => "NUM",
            Tag::X => "X",
            Tag::Punct => "PUNCT",
            Tag::Other => "OTHER",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let tag = match s {
            "NOUN" => Tag::Noun,
            "VERB" => Tag::Verb,
            "ADP" => Tag::Adp,
            "PRON" => Tag::Pron,
            "ADV" => Tag::Adv,
            "DET" => Tag::Det,
            "CONJ" => Tag::Conj,
            "PRT" => Tag::Prt,
            "NUM" => Tag::Num,
            "X" => Tag::X,
            "PUNCT" | "." => Tag::Punct,
            "OTHER" => Tag::Other,
            other => return Err(format!("unknown POS tag `{other}`")),
        };
        Ok(tag)
    }
}

/// A word of a source context.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    surface: String,
    pub tag: Tag,
    pub is_stopword: bool,
}

impl Token {
    /// Builds a token. Returns `None` if `surface` is empty or contains
    /// whitespace.
    pub fn new(surface: impl Into<String>, tag: Tag, is_stopword: bool) -> Option<Self> {
        let surface = surface.into();
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            return None;
        }
        Some(Token {
            surface,
            tag,
            is_stopword,
        })
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn folded(&self) -> String {
        self.surface.to_lowercase()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    Utterance,
    Turn,
}

impl Boundary {
    pub fn marker(self) -> &'static str {
        match self {
            Boundary::Utterance => UTTERANCE_MARKER,
            Boundary::Turn => TURN_MARKER,
        }
    }
}

/// One element of a context: a word or a boundary marker. Markers keep their
/// place in the sequence so that every operation sees where utterances end.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Item {
    Word(Token),
    Marker(Boundary),
}

impl Item {
    pub fn as_word(&self) -> Option<&Token> {
        match self {
            Item::Word(t) => Some(t),
            Item::Marker(_) => None,
        }
    }

    pub fn is_word(&self) -> bool {
        matches!(self, Item::Word(_))
    }

    pub fn text(&self) -> &str {
        match self {
            Item::Word(t) => t.surface(),
            Item::Marker(b) => b.marker(),
        }
    }
}

/// A tokenized source side: words interleaved with `__eou__` / `__eot__`
/// markers. Positions used throughout the crate index into [`Context::items`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Context {
    items: Vec<Item>,
}

impl Context {
    pub fn from_items(items: Vec<Item>) -> Self {
        Context { items }
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn into_items(self) -> Vec<Item> {
        self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn word(&self, pos: usize) -> Option<&Token> {
        self.items.get(pos).and_then(Item::as_word)
    }

    pub fn words(&self) -> impl Iterator<Item = &Token> {
        self.items.iter().filter_map(Item::as_word)
    }

    pub fn word_count(&self) -> usize {
        self.words().count()
    }

    /// Positions of `__eou__` markers.
    pub fn utterance_boundaries(&self) -> Vec<usize> {
        self.marker_positions(Boundary::Utterance)
    }

    /// Positions of `__eot__` markers.
    pub fn turn_boundaries(&self) -> Vec<usize> {
        self.marker_positions(Boundary::Turn)
    }

    fn marker_positions(&self, kind: Boundary) -> Vec<usize> {
        self.items
            .iter()
            .enumerate()
            .filter(|(_, item)| **item == Item::Marker(kind))
            .map(|(i, _)| i)
            .collect()
    }

    /// Sequence of markers in order, ignoring words.
    pub fn marker_sequence(&self) -> Vec<Boundary> {
        self.items
            .iter()
            .filter_map(|item| match item {
                Item::Marker(b) => Some(*b),
                Item::Word(_) => None,
            })
            .collect()
    }

    /// Joins items with single spaces.
    pub fn detokenize(&self) -> String {
        let mut out = String::new();
        for (i, item) in self.items.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(item.text());
        }
        out
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.detokenize())
    }
}

/// Splits a pre-tokenized line on whitespace and tags every word from the
/// lexicons. Marker pieces become [`Item::Marker`].
pub fn tokenize(line: &str, lex: &Lexicons) -> Context {
    let items = line
        .split_whitespace()
        .map(|piece| match piece {
            UTTERANCE_MARKER => Item::Marker(Boundary::Utterance),
            TURN_MARKER => Item::Marker(Boundary::Turn),
            word => Item::Word(lex.make_token(word)),
        })
        .collect();
    Context { items }
}

/// Normalizes whitespace the way [`tokenize`] followed by
/// [`Context::detokenize`] does.
pub fn normalize_line(line: &str) -> String {
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// One training pair. The target side is carried verbatim and never
/// perturbed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub source: Context,
    pub target: Option<String>,
}

impl Example {
    pub fn to_line(&self) -> String {
        match &self.target {
            Some(target) => format!("{}\t{}", self.source.detokenize(), target),
            None => self.source.detokenize(),
        }
    }

    pub fn target_text(&self) -> &str {
        self.target.as_deref().unwrap_or("")
    }
}

/// Parses corpus text: one example per line, `source<TAB>target`. A line
/// without a tab is a source-only example. Blank lines are skipped.
pub fn parse_corpus(text: &str, lex: &Lexicons) -> Vec<Example> {
    text.lines()
        .filter(|line| !line.trim().is_empty())
        .map(|line| {
            let (source, target) = match line.split_once('\t') {
                Some((s, t)) => (s, Some(t.to_string())),
                None => (line, None),
            };
            Example {
                source: tokenize(source, lex),
                target,
            }
        })
        .collect()
}

pub fn read_corpus(path: &Path, lex: &Lexicons) -> Result<Vec<Example>> {
    let text = util::read_to_string(path)?;
    Ok(parse_corpus(&text, lex))
}

pub fn render_corpus(examples: &[Example]) -> String {
    let mut out = String::new();
    for example in examples {
        out.push_str(&example.to_line());
        out.push('\n');
    }
    out
}

pub fn write_corpus(path: &Path, examples: &[Example]) -> Result<()> {
    util::write_atomic(path, render_corpus(examples).as_bytes())
}

/// Reads a plain line file (one item per line), keeping empty lines.
pub(crate) fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = util::read_to_string(path)?;
    Ok(text.lines().map(str::to_string).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const ACPI_CONTEXT: &str = "fresh install of crack of the day : gdm login → \" can't access ACPI bla bla bla \" __eou__ you don't want to be me ... __eou__ ah , it happened to you too ?";

    fn lex() -> Lexicons {
        Lexicons::bundled()
    }

    #[test]
    fn whitespace_split() {
        let ctx = tokenize("fresh install of crack", &lex());
        assert_eq!(ctx.word_count(), 4);
        assert!(ctx.utterance_boundaries().is_empty());
        assert!(ctx.turn_boundaries().is_empty());
    }

    #[test]
    fn marker_recognition() {
        let ctx = tokenize("hi __eou__ hello", &lex());
        assert_eq!(ctx.word_count(), 2);
        assert_eq!(ctx.utterance_boundaries(), vec![1]);
    }

    #[test]
    fn acpi_context_counts() {
        // fresh install of crack of the day : gdm login → " can't access ACPI
        // bla bla bla "  = 19, you don't want to be me ... = 7,
        // ah , it happened to you too ? = 8
        let ctx = tokenize(ACPI_CONTEXT, &lex());
        assert_eq!(ctx.word_count(), 34);
        assert_eq!(ctx.utterance_boundaries(), vec![19, 27]);
    }

    #[test]
    fn empty_line_is_empty_context() {
        let ctx = tokenize("   ", &lex());
        assert!(ctx.is_empty());
        assert_eq!(ctx.detokenize(), "");
    }

    #[test]
    fn turn_markers() {
        let ctx = tokenize("a __eou__ b __eot__ c", &lex());
        assert_eq!(ctx.utterance_boundaries(), vec![1]);
        assert_eq!(ctx.turn_boundaries(), vec![3]);
        assert_eq!(
            ctx.marker_sequence(),
            vec![Boundary::Utterance, Boundary::Turn]
        );
    }

    #[test]
    fn casing_preserved_tag_folded() {
        let ctx = tokenize("The ACPI", &lex());
        let the = ctx.word(0).unwrap();
        assert_eq!(the.surface(), "The");
        assert_eq!(the.tag, Tag::Det);
        assert!(the.is_stopword);
        assert_eq!(ctx.word(1).unwrap().tag, Tag::Noun);
    }

    #[test]
    fn corpus_lines() {
        let corpus = parse_corpus("a b __eou__ c\tx y\n\nsolo line\n", &lex());
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus[0].target.as_deref(), Some("x y"));
        assert_eq!(corpus[0].to_line(), "a b __eou__ c\tx y");
        assert_eq!(corpus[1].target, None);
    }

    #[test]
    fn token_rejects_whitespace() {
        assert!(Token::new("a b", Tag::X, false).is_none());
        assert!(Token::new("", Tag::X, false).is_none());
    }
}

#[cfg(test)]
pub(crate) use tests::ACPI_CONTEXT;

#[cfg(test)]
mod properties {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #[test]
        fn detokenize_round_trips(pieces in proptest::collection::vec(
            prop_oneof![
                Just("__eou__".to_string()),
                Just("__eot__".to_string()),
                "[a-zA-Z',.?]{1,8}",
            ], 0..30),
            seps in proptest::collection::vec("[ \t]{1,3}", 30)
        ) {
            let lex = Lexicons::bundled();
            let mut line = String::new();
            for (piece, sep) in pieces.iter().zip(&seps) {
                line.push_str(piece);
                line.push_str(sep);
            }
            let ctx = tokenize(&line, &lex);
            prop_assert_eq!(ctx.detokenize(), normalize_line(&line));
            prop_assert_eq!(tokenize(&line, &lex), ctx);
        }
    }
}
