//! Labeled tweet collections: party label sets, JSONL ingestion, slicing.
//!
//! A [`Corpus`] is immutable once built. Every downstream stage borrows it,
//! so it can be shared read-only across worker threads.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("unknown party '{party}' at line {line}")]
    UnknownParty { party: String, line: usize },
    #[error("duplicate tweet id '{id}' at line {line}")]
    DuplicateId { id: String, line: usize },
    #[error("invalid label set: {0}")]
    InvalidLabels(String),
    #[error("window start {start} is after end {end}")]
    InvalidWindow {
        start: DateTime<Utc>,
        end: DateTime<Utc>,
    },
}

/// Position of a party on the binary left/right axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Leaning {
    Left,
    Right,
}

impl fmt::Display for Leaning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Leaning::Left => "left",
            Leaning::Right => "right",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyLabel {
    pub id: String,
    pub display_name: String,
    pub leaning: Leaning,
    /// 0-based position on the left-to-right axis.
    pub ordinal: usize,
}

/// An ordered, validated set of party labels.
///
/// Parties are kept sorted by ordinal, so `parties()[i]` is also class index
/// `i` for the classifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    parties: Vec<PartyLabel>,
}

impl LabelSet {
    pub fn new(mut parties: Vec<PartyLabel>) -> Result<Self, CorpusError> {
        parties.sort_by_key(|p| p.ordinal);
        let mut ids = HashSet::new();
        for (expected, party) in parties.iter().enumerate() {
            if party.id.is_empty() || !party.id.is_ascii() || party.id.contains(char::is_whitespace)
            {
                return Err(CorpusError::InvalidLabels(format!(
                    "party id '{}' must be a non-empty ASCII token",
                    party.id
                )));
            }
            if !ids.insert(party.id.as_str()) {
                return Err(CorpusError::InvalidLabels(format!(
                    "duplicate party id '{}'",
                    party.id
                )));
            }
            if party.ordinal != expected {
                return Err(CorpusError::InvalidLabels(format!(
                    "ordinals must be unique and contiguous from 0; found {} where {} was expected",
                    party.ordinal, expected
                )));
            }
        }
        Ok(LabelSet { parties })
    }

    /// The five Spanish national parties, far left to far right.
    pub fn spanish_default() -> Self {
        let spec = [
            ("podemos", "Podemos", Leaning::Left),
            ("psoe", "PSOE", Leaning::Left),
            ("ciudadanos", "Ciudadanos", Leaning::Right),
            ("pp", "PP", Leaning::Right),
            ("vox", "Vox", Leaning::Right),
        ];
        let parties = spec
            .iter()
            .enumerate()
            .map(|(ordinal, (id, name, leaning))| PartyLabel {
                id: id.to_string(),
                display_name: name.to_string(),
                leaning: *leaning,
                ordinal,
            })
            .collect();
        LabelSet { parties }
    }

    /// Parses a JSON array of `{id, display_name, leaning, ordinal}` objects.
    pub fn from_json(json: &str) -> Result<Self, CorpusError> {
        let parties: Vec<PartyLabel> =
            serde_json::from_str(json).map_err(|e| CorpusError::InvalidLabels(e.to_string()))?;
        Self::new(parties)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let json = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&json)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.parties).expect("label set serializes")
    }

    pub fn parties(&self) -> &[PartyLabel] {
        &self.parties
    }

    pub fn len(&self) -> usize {
        self.parties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parties.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.parties.iter().position(|p| p.id == id)
    }

    pub fn get(&self, id: &str) -> Option<&PartyLabel> {
        self.parties.iter().find(|p| p.id == id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.parties.iter().map(|p| p.id.clone()).collect()
    }

    pub fn leanings(&self) -> Vec<Leaning> {
        self.parties.iter().map(|p| p.leaning).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub author: String,
    pub party: String,
    #[serde(with = "iso8601")]
    pub timestamp: DateTime<Utc>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    label_set: LabelSet,
    tweets: Vec<Tweet>,
    provenance: String,
}

impl Corpus {
    /// Builds a corpus from in-memory tweets, applying the same checks as
    /// [`load_jsonl`]. Line numbers in errors are 1-based tweet positions.
    pub fn from_tweets(label_set: LabelSet, tweets: Vec<Tweet>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for (i, tweet) in tweets.iter().enumerate() {
            validate_tweet(tweet, &label_set, i + 1)?;
            if !seen.insert(tweet.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    id: tweet.id.clone(),
                    line: i + 1,
                });
            }
        }
        let provenance = digest_tweets(&tweets);
        Ok(Corpus {
            label_set,
            tweets,
            provenance,
        })
    }

    pub fn empty(label_set: LabelSet) -> Self {
        Corpus {
            label_set,
            tweets: Vec::new(),
            provenance: hex_digest(b""),
        }
    }

    pub fn label_set(&self) -> &LabelSet {
        &self.label_set
    }

    pub fn tweets(&self) -> &[Tweet] {
        &self.tweets
    }

    /// SHA-256 of the source bytes, lowercase hex.
    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    fn derive(&self, tweets: Vec<Tweet>) -> Corpus {
        Corpus {
            label_set: self.label_set.clone(),
            tweets,
            provenance: self.provenance.clone(),
        }
    }

    /// Writes the corpus back out in the ingestion JSONL schema.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for tweet in &self.tweets {
            serde_json::to_writer(&mut out, tweet)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawTweet {
    id: String,
    author: String,
    party: String,
    timestamp: String,
    text: String,
}

fn validate_tweet(tweet: &Tweet, labels: &LabelSet, line: usize) -> Result<(), CorpusError> {
    if tweet.text.trim().is_empty() {
        return Err(CorpusError::Malformed {
            line,
            reason: "text is empty".into(),
        });
    }
    if tweet.id.is_empty() {
        return Err(CorpusError::Malformed {
            line,
            reason: "id is empty".into(),
        });
    }
    if labels.index_of(&tweet.party).is_none() {
        return Err(CorpusError::UnknownParty {
            party: tweet.party.clone(),
            line,
        });
    }
    Ok(())
}

/// Parses an ISO-8601 instant. Offsets are normalized to UTC; a missing
/// offset is read as UTC. Sub-second precision is dropped.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc).trunc_subsecs(0));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(naive.and_utc().trunc_subsecs(0));
        }
    }
    if let Ok(date) = chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(date.and_hms_opt(0, 0, 0)?.and_utc());
    }
    None
}

/// Parses JSONL bytes into a corpus. Blank lines are skipped.
pub fn parse_jsonl(bytes: &[u8], labels: &LabelSet) -> Result<Corpus, CorpusError> {
    let mut tweets = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, raw_line) in bytes.split(|&b| b == b'\n').enumerate() {
        let line_no = idx + 1;
        let line = std::str::from_utf8(raw_line).map_err(|_| CorpusError::Malformed {
            line: line_no,
            reason: "invalid UTF-8".into(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawTweet = serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            reason: e.to_string(),
        })?;
        let timestamp = parse_timestamp(&raw.timestamp).ok_or_else(|| CorpusError::Malformed {
            line: line_no,
            reason: format!("invalid timestamp '{}'", raw.timestamp),
        })?;
        let tweet = Tweet {
            id: raw.id,
            author: raw.author,
            party: raw.party,
            timestamp,
            text: raw.text,
        };
        validate_tweet(&tweet, labels, line_no)?;
        if seen.insert(tweet.id.clone(), line_no).is_some() {
            return Err(CorpusError::DuplicateId {
                id: tweet.id,
                line: line_no,
            });
        }
        tweets.push(tweet);
    }
    log::debug!("parsed {} tweets", tweets.len());
    Ok(Corpus {
        label_set: labels.clone(),
        tweets,
        provenance: hex_digest(bytes),
    })
}

/// Loads a JSONL tweet file, one `{id, author, party, timestamp, text}`
/// object per line.
pub fn load_jsonl(path: &Path, labels: &LabelSet) -> Result<Corpus, CorpusError> {
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_jsonl(&bytes, labels)
}

/// Keeps tweets with `start <= timestamp < end`, preserving order.
pub fn filter_by_window(
    corpus: &Corpus,
    start: DateTime<Utc>,
    end: DateTime<Utc>,
) -> Result<Corpus, CorpusError> {
    if start > end {
        return Err(CorpusError::InvalidWindow { start, end });
    }
    let tweets = corpus
        .tweets
        .iter()
        .filter(|t| t.timestamp >= start && t.timestamp < end)
        .cloned()
        .collect();
    Ok(corpus.derive(tweets))
}

/// Splits a corpus by party. Every party of the label set gets an entry,
/// empty when it has no tweets.
pub fn partition_by_party(corpus: &Corpus) -> BTreeMap<String, Corpus> {
    let mut buckets: BTreeMap<String, Vec<Tweet>> = corpus
        .label_set
        .parties()
        .iter()
        .map(|p| (p.id.clone(), Vec::new()))
        .collect();
    for tweet in &corpus.tweets {
        buckets
            .get_mut(&tweet.party)
            .expect("corpus invariant: party in label set")
            .push(tweet.clone());
    }
    buckets
        .into_iter()
        .map(|(id, tweets)| (id, corpus.derive(tweets)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyCount {
    pub party: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    #[serde(with = "iso8601")]
    pub first: DateTime<Utc>,
    #[serde(with = "iso8601")]
    pub last: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    /// In label-set ordinal order, including parties with zero tweets.
    pub per_party: Vec<PartyCount>,
    pub date_range: Option<DateRange>,
    pub distinct_authors: usize,
    pub per_author: BTreeMap<String, usize>,
    pub provenance: String,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut per_party: Vec<PartyCount> = corpus
        .label_set
        .parties()
        .iter()
        .map(|p| PartyCount {
            party: p.id.clone(),
            count: 0,
        })
        .collect();
    let mut per_author = BTreeMap::new();
    for tweet in &corpus.tweets {
        let idx = corpus
            .label_set
            .index_of(&tweet.party)
            .expect("corpus invariant: party in label set");
        per_party[idx].count += 1;
        *per_author.entry(tweet.author.clone()).or_insert(0) += 1;
    }
    let date_range = corpus
        .tweets
        .iter()
        .map(|t| t.timestamp)
        .min()
        .zip(corpus.tweets.iter().map(|t| t.timestamp).max())
        .map(|(first, last)| DateRange { first, last });
    CorpusStats {
        total: corpus.tweets.len(),
        per_party,
        date_range,
        distinct_authors: per_author.len(),
        per_author,
        provenance: corpus.provenance.clone(),
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn digest_tweets(tweets: &[Tweet]) -> String {
    let mut buf = Vec::new();
    for tweet in tweets {
        serde_json::to_writer(&mut buf, tweet).expect("tweet serializes");
        buf.push(b'\n');
    }
    hex_digest(&buf)
}

/// Serde adapter writing instants as `YYYY-MM-DDTHH:MM:SSZ`.
pub mod iso8601 {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(dt: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&dt.format("%Y-%m-%dT%H:%M:%SZ").to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_timestamp(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid timestamp '{s}'")))
    }
}
