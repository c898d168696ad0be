//! Compound sentiment scoring of chat messages.
//!
//! The default scorer sums term valences from a small lexicon, scales a term
//! by an immediately preceding intensifier, flips it when a negation occurs in
//! the three preceding tokens, and squashes the sum with `x / sqrt(x² + 15)`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_LEXICON: &str = include_str!("../data/mini_lexicon.tsv");

const NEGATION_WINDOW: usize = 3;
const NORMALIZATION_ALPHA: f64 = 15.0;

/// Compound polarity in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SentimentScore(f64);

impl SentimentScore {
    pub const NEUTRAL: SentimentScore = SentimentScore(0.0);

    pub fn new(compound: f64) -> Self {
        Self(compound.clamp(-1.0, 1.0))
    }

    pub fn compound(self) -> f64 {
        self.0
    }
}

pub trait SentimentScorer: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, text: &str) -> SentimentScore;
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("reading lexicon: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Valence,
    Intensifiers,
    Negations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentimentLexicon {
    pub version: String,
    valence: BTreeMap<String, f64>,
    intensifiers: BTreeMap<String, f64>,
    negations: BTreeSet<String>,
}

impl SentimentLexicon {
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("builtin lexicon parses")
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses the line-oriented `term<TAB>value` format with `[valence]`,
    /// `[intensifiers]` and `[negations]` section headers.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut lex = SentimentLexicon {
            version: "unversioned".into(),
            valence: BTreeMap::new(),
            intensifiers: BTreeMap::new(),
            negations: BTreeSet::new(),
        };
        let mut section = Section::Valence;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |message: String| LexiconError::Parse { line: idx + 1, message };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(v) = line.strip_prefix("@version") {
                lex.version = v.trim().to_owned();
                continue;
            }
            if line.starts_with('[') {
                section = match line {
                    "[valence]" => Section::Valence,
                    "[intensifiers]" => Section::Intensifiers,
                    "[negations]" => Section::Negations,
                    other => return Err(err(format!("unknown section {other}"))),
                };
                continue;
            }
            let mut fields = line.split('\t');
            let term = fields.next().unwrap_or_default().trim().to_lowercase();
            if section == Section::Negations {
                lex.negations.insert(term);
                continue;
            }
            let value: f64 = fields
                .next()
                .ok_or_else(|| err(format!("missing value for {term}")))?
                .trim()
                .parse()
                .map_err(|e| err(format!("bad value for {term}: {e}")))?;
            match section {
                Section::Valence => lex.valence.insert(term, value),
                Section::Intensifiers => lex.intensifiers.insert(term, value),
                Section::Negations => unreachable!(),
            };
        }
        Ok(lex)
    }

    pub fn valence(&self, term: &str) -> Option<f64> {
        self.valence.get(term).copied()
    }

    pub fn is_negation(&self, term: &str) -> bool {
        self.negations.contains(term)
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone)]
pub struct LexiconScorer {
    lexicon: SentimentLexicon,
}

impl LexiconScorer {
    pub fn new(lexicon: SentimentLexicon) -> Self {
        Self { lexicon }
    }

    pub fn lexicon(&self) -> &SentimentLexicon {
        &self.lexicon
    }

    /// Unnormalized valence sum.
    pub fn raw_sum(&self, text: &str) -> f64 {
        let tokens = tokenize(text);
        let mut sum = 0.0;
        for (i, tok) in tokens.iter().enumerate() {
            let Some(mut v) = self.lexicon.valence(tok) else {
                continue;
            };
            if let Some(m) = i.checked_sub(1).and_then(|p| self.lexicon.intensifiers.get(&tokens[p])) {
                v *= m;
            }
            let start = i.saturating_sub(NEGATION_WINDOW);
            if tokens[start..i].iter().any(|t| self.lexicon.is_negation(t)) {
                v = -v;
            }
            sum += v;
        }
        sum
    }
}

impl Default for LexiconScorer {
    fn default() -> Self {
        Self::new(SentimentLexicon::builtin())
    }
}

impl SentimentScorer for LexiconScorer {
    fn name(&self) -> &str {
        "lexicon"
    }

    fn score(&self, text: &str) -> SentimentScore {
        let x = self.raw_sum(text);
        if x == 0.0 {
            return SentimentScore::NEUTRAL;
        }
        SentimentScore::new(x / (x * x + NORMALIZATION_ALPHA).sqrt())
    }
}

/// Scores every message as neutral.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeutralScorer;

impl SentimentScorer for NeutralScorer {
    fn name(&self) -> &str {
        "neutral"
    }

    fn score(&self, _text: &str) -> SentimentScore {
        SentimentScore::NEUTRAL
    }
}
