//! Word lists the sentiment scorer reads.
//!
//! The English defaults are the published VADER resources (MIT licensed, see
//! `data/VADER_LICENSE.txt`). Any language can be plugged in by loading
//! files in the same layouts.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub const MIN_VALENCE: f64 = -4.0;
pub const MAX_VALENCE: f64 = 4.0;

/// Token to mean valence on the -4..+4 dictionary scale.
///
/// Keys are lowercase. The scorer lowercases tokens before lookup, so an
/// entry whose file key contains uppercase letters could never be reached
/// and is skipped on load.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValenceLexicon {
    entries: HashMap<String, f64>,
}

impl ValenceLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, token: &str, valence: f64) -> Result<(), LexiconError> {
        check_valence(valence, 0)?;
        self.entries.insert(token.to_lowercase(), valence);
        Ok(())
    }

    /// Parses `token<TAB>mean_valence[<TAB>...]` lines. Extra columns are
    /// ignored; later duplicates override earlier ones.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut entries = HashMap::new();
        let mut skipped = 0usize;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            let (token, value) = match (cols.next(), cols.next()) {
                (Some(t), Some(v)) => (t, v),
                _ => {
                    return Err(LexiconError::Parse {
                        line: i + 1,
                        reason: "expected token<TAB>valence".into(),
                    })
                }
            };
            let valence: f64 = value.trim().parse().map_err(|_| LexiconError::Parse {
                line: i + 1,
                reason: format!("invalid valence '{value}'"),
            })?;
            check_valence(valence, i + 1)?;
            if token.to_lowercase() != token {
                skipped += 1;
                continue;
            }
            entries.insert(token.to_string(), valence);
        }
        if skipped > 0 {
            log::debug!("lexicon: skipped {skipped} mixed-case entries");
        }
        Ok(ValenceLexicon { entries })
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        Self::parse(&read(path)?)
    }

    pub fn english() -> Self {
        Self::parse(include_str!("../../data/vader_lexicon.txt")).expect("bundled lexicon parses")
    }

    pub fn get(&self, token: &str) -> Option<f64> {
        self.entries.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn check_valence(valence: f64, line: usize) -> Result<(), LexiconError> {
    if !(MIN_VALENCE..=MAX_VALENCE).contains(&valence) {
        return Err(LexiconError::Parse {
            line,
            reason: format!("valence {valence} outside [{MIN_VALENCE}, {MAX_VALENCE}]"),
        });
    }
    Ok(())
}

/// Single-codepoint emoji to a textual description that is scored in place
/// of the emoji.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmojiTable {
    descriptions: HashMap<char, String>,
}

impl EmojiTable {
    /// Parses `emoji<TAB>description` lines. Multi-codepoint sequences
    /// (flags, skin tones, ZWJ joins) are skipped: replacement walks the
    /// text one codepoint at a time, so they could never match.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut descriptions = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            let (emoji, desc) = match (cols.next(), cols.next()) {
                (Some(e), Some(d)) => (e, d),
                _ => {
                    return Err(LexiconError::Parse {
                        line: i + 1,
                        reason: "expected emoji<TAB>description".into(),
                    })
                }
            };
            let mut chars = emoji.chars();
            if let (Some(c), None) = (chars.next(), chars.next()) {
                descriptions.insert(c, desc.to_string());
            }
        }
        Ok(EmojiTable { descriptions })
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        Self::parse(&read(path)?)
    }

    pub fn english() -> Self {
        Self::parse(include_str!("../../data/emoji_utf8_lexicon.txt"))
            .expect("bundled emoji table parses")
    }

    pub fn describe(&self, c: char) -> Option<&str> {
        self.descriptions.get(&c).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.descriptions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptions.is_empty()
    }
}

/// Whether a degree word raises or lowers the intensity of what follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degree {
    Boost,
    Dampen,
}

/// Everything the scorer consults besides the numeric constants.
#[derive(Debug, Clone, Default)]
pub struct SentimentResources {
    pub lexicon: ValenceLexicon,
    pub emoji: EmojiTable,
    pub negations: HashSet<String>,
    /// Single words and multi-word phrases ("kind of").
    pub degree_words: HashMap<String, Degree>,
    /// Phrases whose valence overrides the lexicon word they contain.
    pub idioms: HashMap<String, f64>,
}

impl SentimentResources {
    /// Bundled English resources.
    pub fn english() -> Self {
        let mut degree_words = HashMap::new();
        for w in word_list(include_str!("../../data/boosters.txt")) {
            degree_words.insert(w, Degree::Boost);
        }
        for w in word_list(include_str!("../../data/dampeners.txt")) {
            degree_words.insert(w, Degree::Dampen);
        }
        SentimentResources {
            lexicon: ValenceLexicon::english(),
            emoji: EmojiTable::english(),
            negations: word_list(include_str!("../../data/negations.txt")).collect(),
            degree_words,
            idioms: parse_idioms(include_str!("../../data/idioms.tsv"))
                .expect("bundled idioms parse"),
        }
    }

    /// English rules and lists around a different valence lexicon.
    pub fn with_lexicon(lexicon: ValenceLexicon) -> Self {
        SentimentResources {
            lexicon,
            ..Self::english()
        }
    }

    pub fn load_negations(&mut self, path: &Path) -> Result<(), LexiconError> {
        self.negations = word_list(&read(path)?).collect();
        Ok(())
    }

    /// Replaces the degree words with the contents of two one-per-line files.
    pub fn load_degree_words(&mut self, boosters: &Path, dampeners: &Path) -> Result<(), LexiconError> {
        let mut degree_words = HashMap::new();
        for w in word_list(&read(boosters)?) {
            degree_words.insert(w, Degree::Boost);
        }
        for w in word_list(&read(dampeners)?) {
            degree_words.insert(w, Degree::Dampen);
        }
        self.degree_words = degree_words;
        Ok(())
    }

    pub fn is_negation(&self, lower: &str) -> bool {
        self.negations.contains(lower) || lower.contains("n't")
    }
}

/// One lowercase entry per line; `#` starts a comment line.
pub fn word_list(text: &str) -> impl Iterator<Item = String> + '_ {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
}

pub fn parse_idioms(text: &str) -> Result<HashMap<String, f64>, LexiconError> {
    let mut idioms = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (phrase, value) = line.split_once('\t').ok_or_else(|| LexiconError::Parse {
            line: i + 1,
            reason: "expected phrase<TAB>valence".into(),
        })?;
        let valence: f64 = value.trim().parse().map_err(|_| LexiconError::Parse {
            line: i + 1,
            reason: format!("invalid valence '{value}'"),
        })?;
        idioms.insert(phrase.to_lowercase(), valence);
    }
    Ok(idioms)
}

fn read(path: &Path) -> Result<String, LexiconError> {
    std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_resources_load() {
        let res = SentimentResources::english();
        assert!(res.lexicon.len() > 7000);
        assert_eq!(res.lexicon.get("good"), Some(1.9));
        assert_eq!(res.lexicon.get("horrible"), Some(-2.5));
        assert!(res.emoji.describe('😁').is_some());
        assert!(res.is_negation("not") && res.is_negation("shouldn't") && res.is_negation("isn't"));
        assert_eq!(res.degree_words.get("very"), Some(&Degree::Boost));
        assert_eq!(res.degree_words.get("kind of"), Some(&Degree::Dampen));
        assert_eq!(res.idioms.get("the bomb"), Some(&3.0));
    }

    #[test]
    fn lexicon_rejects_out_of_range() {
        assert!(ValenceLexicon::parse("bien\t4.5\n").is_err());
        assert!(ValenceLexicon::parse("bien\tx\n").is_err());
        assert!(ValenceLexicon::parse("bien\n").is_err());
        let lex = ValenceLexicon::parse("bien\t2.1\t0.5\t[2, 2]\nMal\t-2\nmal\t-1.5\n").unwrap();
        assert_eq!(lex.get("bien"), Some(2.1));
        assert_eq!(lex.get("mal"), Some(-1.5));
        assert_eq!(lex.len(), 2);
    }

    #[test]
    fn emoji_table_keeps_single_codepoints() {
        let table = EmojiTable::parse("😀\tgrinning face\n🇪🇸\tflag: Spain\n").unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table.describe('😀'), Some("grinning face"));
    }
}
