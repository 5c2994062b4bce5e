//! Tweet cleaning: tokenize, drop stop words, lemmatize, drop short tweets.
//!
//! The four steps always run in that order. [`preprocess_corpus`] is exactly
//! their per-tweet composition.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{iso8601, Corpus};
use crate::exec::{map_ordered, Execution};

pub const DEFAULT_MIN_TOKENS: usize = 7;

#[derive(Debug, Error)]
pub enum TextprepError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("lemma table line {line}: {reason}")]
    LemmaTable { line: usize, reason: String },
}

/// Cleaned tokens of one tweet, with the labels downstream stages group by.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tweet_id: String,
    pub party: String,
    #[serde(with = "iso8601")]
    pub timestamp: DateTime<Utc>,
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl AsRef<[String]> for TokenSequence {
    fn as_ref(&self) -> &[String] {
        &self.tokens
    }
}

fn url_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:https?://|www\.)\S+").unwrap())
}

fn token_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // mentions and hashtags keep their prefix and may contain '_'
    RE.get_or_init(|| Regex::new(r"[#@][\p{L}\p{N}_]+|[\p{L}\p{N}][\p{L}\p{N}\p{M}]*").unwrap())
}

/// Splits raw text into lowercase word tokens.
///
/// URLs are removed first. Tokens are maximal runs of letters and digits;
/// a leading `#` or `@` stays attached. Punctuation and emoji are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    let without_urls = url_pattern().replace_all(text, " ");
    token_pattern()
        .find_iter(&without_urls)
        .map(|m| m.as_str().to_lowercase())
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopwordList {
    words: HashSet<String>,
}

impl StopwordList {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        StopwordList {
            words: words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    /// One token per line; blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Self {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: &Path) -> Result<Self, TextprepError> {
        read(path).map(|s| Self::parse(&s))
    }

    /// Small Spanish + English function-word list.
    pub fn builtin() -> Self {
        Self::parse(include_str!("../data/stopwords.txt"))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Surface form to lemma lookup. Every lemma is a fixed point, so
/// lemmatizing twice equals lemmatizing once.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LemmaTable {
    mapping: HashMap<String, String>,
}

impl LemmaTable {
    pub fn new<I, S, L>(pairs: I) -> Result<Self, TextprepError>
    where
        I: IntoIterator<Item = (S, L)>,
        S: AsRef<str>,
        L: AsRef<str>,
    {
        let lines = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (s, l))| (i + 1, s.as_ref().to_lowercase(), l.as_ref().to_lowercase()));
        Self::build(lines)
    }

    fn build(lines: impl Iterator<Item = (usize, String, String)>) -> Result<Self, TextprepError> {
        let mut mapping = HashMap::new();
        let mut origin = HashMap::new();
        for (line, surface, lemma) in lines {
            if surface.is_empty() || lemma.is_empty() {
                return Err(TextprepError::LemmaTable {
                    line,
                    reason: "empty column".into(),
                });
            }
            origin.insert(surface.clone(), line);
            if surface != lemma {
                mapping.insert(surface, lemma);
            }
        }
        for (surface, lemma) in &mapping {
            if let Some(next) = mapping.get(lemma) {
                return Err(TextprepError::LemmaTable {
                    line: origin[lemma],
                    reason: format!(
                        "lemma '{lemma}' of '{surface}' is itself mapped to '{next}'"
                    ),
                });
            }
        }
        Ok(LemmaTable { mapping })
    }

    /// Two tab-separated columns `surface<TAB>lemma`; blank lines and
    /// `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, TextprepError> {
        let mut rows = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next()) {
                (Some(s), Some(l)) => {
                    rows.push((i + 1, s.trim().to_lowercase(), l.trim().to_lowercase()))
                }
                _ => {
                    return Err(TextprepError::LemmaTable {
                        line: i + 1,
                        reason: "expected two tab-separated columns".into(),
                    })
                }
            }
        }
        Self::build(rows.into_iter())
    }

    pub fn load(path: &Path) -> Result<Self, TextprepError> {
        Self::parse(&read(path)?)
    }

    pub fn builtin() -> Self {
        Self::parse(include_str!("../data/lemmas.tsv")).expect("builtin lemma table is valid")
    }

    pub fn lookup<'a>(&'a self, token: &'a str) -> &'a str {
        self.mapping.get(token).map(String::as_str).unwrap_or(token)
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }
}

fn read(path: &Path) -> Result<String, TextprepError> {
    std::fs::read_to_string(path).map_err(|source| TextprepError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn remove_stopwords(tokens: Vec<String>, stopwords: &StopwordList) -> Vec<String> {
    tokens.into_iter().filter(|t| !stopwords.contains(t)).collect()
}

pub fn lemmatize(tokens: Vec<String>, table: &LemmaTable) -> Vec<String> {
    tokens
        .into_iter()
        .map(|t| match table.mapping.get(&t) {
            Some(lemma) => lemma.clone(),
            None => t,
        })
        .collect()
}

/// Keeps sequences with at least `min_tokens` tokens.
pub fn length_filter(sequences: Vec<TokenSequence>, min_tokens: usize) -> Vec<TokenSequence> {
    sequences
        .into_iter()
        .filter(|s| s.tokens.len() >= min_tokens)
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct Preprocessor {
    pub stopwords: StopwordList,
    pub lemmas: LemmaTable,
    pub min_tokens: usize,
}

impl Preprocessor {
    pub fn new(stopwords: StopwordList, lemmas: LemmaTable, min_tokens: usize) -> Self {
        Preprocessor {
            stopwords,
            lemmas,
            min_tokens,
        }
    }

    /// Tokens of one text after stop-word removal and lemmatization.
    pub fn clean(&self, text: &str) -> Vec<String> {
        lemmatize(remove_stopwords(tokenize(text), &self.stopwords), &self.lemmas)
    }
}

pub fn preprocess_corpus(corpus: &Corpus, prep: &Preprocessor) -> Vec<TokenSequence> {
    preprocess_corpus_with(corpus, prep, Execution::default())
}

pub fn preprocess_corpus_with(
    corpus: &Corpus,
    prep: &Preprocessor,
    exec: Execution,
) -> Vec<TokenSequence> {
    let cleaned = map_ordered(corpus.tweets(), exec, |tweet| TokenSequence {
        tweet_id: tweet.id.clone(),
        party: tweet.party.clone(),
        timestamp: tweet.timestamp,
        tokens: prep.clean(&tweet.text),
    });
    let kept = length_filter(cleaned, prep.min_tokens);
    log::info!(
        "preprocessing kept {} of {} tweets ({} dropped below {} tokens)",
        kept.len(),
        corpus.len(),
        corpus.len() - kept.len(),
        prep.min_tokens
    );
    kept
}
