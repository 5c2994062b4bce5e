//! Lexicon-and-rules sentiment scoring of raw tweet text.
//!
//! The scorer follows the VADER heuristics: per-token valence lookup, ALL-CAPS
//! emphasis, degree words, negation, "but" reweighting and punctuation
//! emphasis, with the summed valence squashed into [-1, 1]. It reads raw text
//! because capitalization, punctuation and emoji all carry signal.

mod lexicon;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use lexicon::{
    parse_idioms, word_list, Degree, EmojiTable, LexiconError, SentimentResources,
    ValenceLexicon, MAX_VALENCE, MIN_VALENCE,
};

use crate::corpus::{iso8601, Corpus};
use crate::exec::{map_ordered, Execution};

/// Multiplier when "never" precedes "so"/"this" before a sentiment word.
const NEVER_SO_SCALAR: f64 = 1.25;
/// Distance decay for degree words two and three tokens back.
const DEGREE_DECAY: [f64; 3] = [1.0, 0.95, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ButWeights {
    pub pre: f64,
    pub post: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerConfig {
    /// Normalization constant of the compound squash.
    pub alpha: f64,
    pub booster_increment: f64,
    pub negation_scalar: f64,
    pub caps_increment: f64,
    pub exclamation_increment: f64,
    pub exclamation_cap: usize,
    /// Per-'?' emphasis when two or three question marks appear.
    pub question_increment: f64,
    pub question_cap: usize,
    /// Flat emphasis once the question-mark count exceeds `question_cap`.
    pub question_max_amplifier: f64,
    pub but_weights: ButWeights,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            alpha: 15.0,
            booster_increment: 0.293,
            negation_scalar: -0.74,
            caps_increment: 0.733,
            exclamation_increment: 0.292,
            exclamation_cap: 4,
            question_increment: 0.18,
            question_cap: 3,
            question_max_amplifier: 0.96,
            but_weights: ButWeights {
                pre: 0.5,
                post: 1.5,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub compound: f64,
    pub pos: f64,
    pub neu: f64,
    pub neg: f64,
}

impl SentimentScore {
    pub const NEUTRAL: SentimentScore = SentimentScore {
        compound: 0.0,
        pos: 0.0,
        neu: 1.0,
        neg: 0.0,
    };
}

/// Maps an unbounded valence sum into [-1, 1] via `x / sqrt(x^2 + alpha)`.
pub fn normalize_valence(raw_sum: f64, alpha: f64) -> f64 {
    debug_assert!(alpha > 0.0);
    let norm = raw_sum / (raw_sum * raw_sum + alpha).sqrt();
    norm.clamp(-1.0, 1.0)
}

/// Python `str.isspace` semantics, which include the ASCII separators
/// U+001C..U+001F on top of Unicode White_Space.
fn is_space(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

/// True when the word has cased letters and all of them are uppercase.
fn is_all_caps(word: &str) -> bool {
    let mut cased = false;
    for c in word.chars() {
        if c.is_lowercase() {
            return false;
        }
        if c.is_uppercase() {
            cased = true;
        }
    }
    cased
}

/// Strips leading/trailing ASCII punctuation unless that leaves two or fewer
/// characters, in which case the token is probably an emoticon like ":)".
fn strip_punctuation(token: &str) -> &str {
    let stripped = token.trim_matches(|c: char| c.is_ascii_punctuation());
    if stripped.chars().count() <= 2 {
        token
    } else {
        stripped
    }
}

fn replace_emoji(text: &str, emoji: &EmojiTable) -> String {
    let mut out = String::with_capacity(text.len());
    let mut prev_space = true;
    for c in text.chars() {
        match emoji.describe(c) {
            Some(desc) => {
                if !prev_space {
                    out.push(' ');
                }
                out.push_str(desc);
                prev_space = false;
            }
            None => {
                out.push(c);
                prev_space = c == ' ';
            }
        }
    }
    out.trim_matches(is_space).to_string()
}

struct Tokens<'a> {
    words: Vec<&'a str>,
    lower: Vec<String>,
    /// Some but not all words are ALL CAPS.
    cap_differential: bool,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let words: Vec<&str> = text
            .split(is_space)
            .filter(|w| !w.is_empty())
            .map(strip_punctuation)
            .collect();
        let lower = words.iter().map(|w| w.to_lowercase()).collect();
        let caps = words.iter().filter(|w| is_all_caps(w)).count();
        let cap_differential = caps > 0 && caps < words.len();
        Tokens {
            words,
            lower,
            cap_differential,
        }
    }

    fn len(&self) -> usize {
        self.words.len()
    }

    fn is(&self, i: usize, word: &str) -> bool {
        self.lower[i] == word
    }
}

/// Scores raw text. Holds borrowed resources so it is cheap to share.
#[derive(Debug, Clone, Copy)]
pub struct Scorer<'r> {
    resources: &'r SentimentResources,
    config: &'r ScorerConfig,
}

impl<'r> Scorer<'r> {
    pub fn new(resources: &'r SentimentResources, config: &'r ScorerConfig) -> Self {
        Scorer { resources, config }
    }

    pub fn score(&self, text: &str) -> SentimentScore {
        let text = replace_emoji(text, &self.resources.emoji);
        let tokens = Tokens::new(&text);
        let mut sentiments = Vec::with_capacity(tokens.len());
        for i in 0..tokens.len() {
            let is_degree_word = self.resources.degree_words.contains_key(&tokens.lower[i]);
            let kind_of = i + 1 < tokens.len() && tokens.is(i, "kind") && tokens.is(i + 1, "of");
            if is_degree_word || kind_of {
                sentiments.push(0.0);
            } else {
                sentiments.push(self.token_valence(&tokens, i));
            }
        }
        self.but_reweight(&tokens, &mut sentiments);
        self.aggregate(&sentiments, &text)
    }

    fn in_lexicon(&self, tokens: &Tokens, i: usize) -> bool {
        self.resources.lexicon.contains(&tokens.lower[i])
    }

    fn token_valence(&self, tokens: &Tokens, i: usize) -> f64 {
        let cfg = self.config;
        let Some(base) = self.resources.lexicon.get(&tokens.lower[i]) else {
            return 0.0;
        };
        let mut valence = base;

        // "no" directly before a sentiment word negates it instead of
        // contributing its own valence
        if tokens.is(i, "no") && i + 1 < tokens.len() && self.in_lexicon(tokens, i + 1) {
            valence = 0.0;
        }
        if (i > 0 && tokens.is(i - 1, "no"))
            || (i > 1 && tokens.is(i - 2, "no"))
            || (i > 2
                && tokens.is(i - 3, "no")
                && (tokens.is(i - 1, "or") || tokens.is(i - 1, "nor")))
        {
            valence = base * cfg.negation_scalar;
        }

        if is_all_caps(tokens.words[i]) && tokens.cap_differential {
            if valence > 0.0 {
                valence += cfg.caps_increment;
            } else {
                valence -= cfg.caps_increment;
            }
        }

        for back in 0..3 {
            if i > back && !self.in_lexicon(tokens, i - back - 1) {
                let mut scalar = self.degree_scalar(tokens, i - back - 1, valence);
                if scalar != 0.0 {
                    scalar *= DEGREE_DECAY[back];
                }
                valence += scalar;
                valence = self.negation(valence, tokens, back, i);
                if back == 2 {
                    valence = self.idioms(valence, tokens, i);
                }
            }
        }
        self.least(valence, tokens, i)
    }

    fn degree_scalar(&self, tokens: &Tokens, j: usize, valence: f64) -> f64 {
        let cfg = self.config;
        let Some(degree) = self.resources.degree_words.get(&tokens.lower[j]) else {
            return 0.0;
        };
        let mut scalar = match degree {
            Degree::Boost => cfg.booster_increment,
            Degree::Dampen => -cfg.booster_increment,
        };
        if valence < 0.0 {
            scalar = -scalar;
        }
        if is_all_caps(tokens.words[j]) && tokens.cap_differential {
            if valence > 0.0 {
                scalar += cfg.caps_increment;
            } else {
                scalar -= cfg.caps_increment;
            }
        }
        scalar
    }

    fn negation(&self, valence: f64, tokens: &Tokens, back: usize, i: usize) -> f64 {
        let n = self.config.negation_scalar;
        let negated = |j: usize| self.resources.is_negation(&tokens.lower[j]);
        let so_or_this = |j: usize| tokens.is(j, "so") || tokens.is(j, "this");
        match back {
            0 if negated(i - 1) => valence * n,
            1 => {
                if tokens.is(i - 2, "never") && so_or_this(i - 1) {
                    valence * NEVER_SO_SCALAR
                } else if tokens.is(i - 2, "without") && tokens.is(i - 1, "doubt") {
                    valence
                } else if negated(i - 2) {
                    valence * n
                } else {
                    valence
                }
            }
            2 => {
                if (tokens.is(i - 3, "never") && so_or_this(i - 2)) || so_or_this(i - 1) {
                    valence * NEVER_SO_SCALAR
                } else if tokens.is(i - 3, "without")
                    && (tokens.is(i - 2, "doubt") || tokens.is(i - 1, "doubt"))
                {
                    valence
                } else if negated(i - 3) {
                    valence * n
                } else {
                    valence
                }
            }
            _ => valence,
        }
    }

    /// Idiom overrides and multi-word degree phrases around position `i`
    /// (only reached with `i >= 3`).
    fn idioms(&self, mut valence: f64, tokens: &Tokens, i: usize) -> f64 {
        let w = &tokens.lower;
        let idioms = &self.resources.idioms;
        let one_zero = format!("{} {}", w[i - 1], w[i]);
        let two_one_zero = format!("{} {} {}", w[i - 2], w[i - 1], w[i]);
        let two_one = format!("{} {}", w[i - 2], w[i - 1]);
        let three_two_one = format!("{} {} {}", w[i - 3], w[i - 2], w[i - 1]);
        let three_two = format!("{} {}", w[i - 3], w[i - 2]);

        for phrase in [&one_zero, &two_one_zero, &two_one, &three_two_one, &three_two] {
            if let Some(&v) = idioms.get(phrase) {
                valence = v;
                break;
            }
        }
        if w.len() - 1 > i {
            if let Some(&v) = idioms.get(&format!("{} {}", w[i], w[i + 1])) {
                valence = v;
            }
        }
        if w.len() - 1 > i + 1 {
            if let Some(&v) = idioms.get(&format!("{} {} {}", w[i], w[i + 1], w[i + 2])) {
                valence = v;
            }
        }
        for phrase in [&three_two_one, &three_two, &two_one] {
            if let Some(degree) = self.resources.degree_words.get(phrase) {
                valence += match degree {
                    Degree::Boost => self.config.booster_increment,
                    Degree::Dampen => -self.config.booster_increment,
                };
            }
        }
        valence
    }

    /// "least" before a sentiment word negates it, except in "at least"
    /// and "very least".
    fn least(&self, valence: f64, tokens: &Tokens, i: usize) -> f64 {
        let n = self.config.negation_scalar;
        if i > 0 && !self.in_lexicon(tokens, i - 1) && tokens.is(i - 1, "least") {
            if i > 1 {
                if !tokens.is(i - 2, "at") && !tokens.is(i - 2, "very") {
                    return valence * n;
                }
                return valence;
            }
            return valence * n;
        }
        valence
    }

    /// Down-weights valences before the first "but" and up-weights those
    /// after it.
    ///
    /// Positions are located by first equal value, exactly as the reference
    /// implementation does, so repeated valences may be reweighted at the
    /// earlier position.
    fn but_reweight(&self, tokens: &Tokens, sentiments: &mut [f64]) {
        let Some(but) = tokens.lower.iter().position(|w| w == "but") else {
            return;
        };
        let ButWeights { pre, post } = self.config.but_weights;
        for k in 0..sentiments.len() {
            let value = sentiments[k];
            let at = sentiments
                .iter()
                .position(|&s| s == value)
                .expect("value taken from the slice");
            if at < but {
                sentiments[at] = value * pre;
            } else if at > but {
                sentiments[at] = value * post;
            }
        }
    }

    fn punctuation_emphasis(&self, text: &str) -> f64 {
        let cfg = self.config;
        let exclamations = text.matches('!').count().min(cfg.exclamation_cap);
        let questions = text.matches('?').count();
        let question_emphasis = if questions <= 1 {
            0.0
        } else if questions <= cfg.question_cap {
            questions as f64 * cfg.question_increment
        } else {
            cfg.question_max_amplifier
        };
        exclamations as f64 * cfg.exclamation_increment + question_emphasis
    }

    fn aggregate(&self, sentiments: &[f64], text: &str) -> SentimentScore {
        if sentiments.is_empty() {
            return SentimentScore::NEUTRAL;
        }
        let emphasis = self.punctuation_emphasis(text);
        let mut sum: f64 = sentiments.iter().sum();
        if sum > 0.0 {
            sum += emphasis;
        } else if sum < 0.0 {
            sum -= emphasis;
        }
        let compound = normalize_valence(sum, self.config.alpha);

        // each token counts at least 1 toward its share
        let mut pos_sum = 0.0;
        let mut neg_sum = 0.0;
        let mut neutral = 0usize;
        for &s in sentiments {
            if s > 0.0 {
                pos_sum += s + 1.0;
            } else if s < 0.0 {
                neg_sum += s - 1.0;
            } else {
                neutral += 1;
            }
        }
        if pos_sum > neg_sum.abs() {
            pos_sum += emphasis;
        } else if pos_sum < neg_sum.abs() {
            neg_sum -= emphasis;
        }
        let total = pos_sum + neg_sum.abs() + neutral as f64;
        SentimentScore {
            compound,
            pos: (pos_sum / total).abs(),
            neu: (neutral as f64 / total).abs(),
            neg: (neg_sum / total).abs(),
        }
    }
}

pub fn score_text(text: &str, resources: &SentimentResources, config: &ScorerConfig) -> SentimentScore {
    Scorer::new(resources, config).score(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub tweet_id: String,
    #[serde(with = "iso8601")]
    pub timestamp: DateTime<Utc>,
    pub party: String,
    pub score: SentimentScore,
}

pub fn score_corpus(
    corpus: &Corpus,
    resources: &SentimentResources,
    config: &ScorerConfig,
) -> Vec<ScoredRecord> {
    score_corpus_with(corpus, resources, config, Execution::default())
}

pub fn score_corpus_with(
    corpus: &Corpus,
    resources: &SentimentResources,
    config: &ScorerConfig,
    exec: Execution,
) -> Vec<ScoredRecord> {
    let scorer = Scorer::new(resources, config);
    map_ordered(corpus.tweets(), exec, |tweet| ScoredRecord {
        tweet_id: tweet.id.clone(),
        timestamp: tweet.timestamp,
        party: tweet.party.clone(),
        score: scorer.score(&tweet.text),
    })
}
