//! Bag-of-words count vectors and balanced, stratified datasets.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::rank_counts;
use crate::corpus::LabelSet;
use crate::exec::{map_ordered, Execution};
use crate::textprep::TokenSequence;

pub const DEFAULT_MIN_COUNT: u64 = 2;
pub const DEFAULT_MAX_SIZE: usize = 20_000;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

const SNAPSHOT_MAGIC: &str = "pulse-dataset v1";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("class '{0}' has no examples")]
    EmptyClass(String),
    #[error("labels and items differ in length ({items} items, {labels} labels)")]
    LengthMismatch { items: usize, labels: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("unknown party '{0}'")]
    UnknownParty(String),
    #[error("dataset snapshot line {line}: {reason}")]
    Snapshot { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense token indices `0..V`, most frequent token first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    pub min_count: u64,
    pub max_size: usize,
}

impl Vocabulary {
    /// Rebuilds a vocabulary from its token listing (index = position).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, FeatureError> {
        if tokens.is_empty() {
            return Err(FeatureError::EmptyVocabulary);
        }
        let index: HashMap<String, usize> =
            tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        if index.len() != tokens.len() {
            return Err(FeatureError::InvalidArgument("duplicate vocabulary token".into()));
        }
        let max_size = tokens.len();
        Ok(Vocabulary {
            tokens,
            index,
            min_count: 1,
            max_size,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }
}

/// Builds the vocabulary from training sequences only.
///
/// Keeps tokens seen at least `min_count` times, ranks them by frequency
/// (ties lexicographic) and truncates to `max_size`.
pub fn build_vocabulary<S: AsRef<[String]>>(
    train: &[S],
    min_count: u64,
    max_size: usize,
) -> Result<Vocabulary, FeatureError> {
    if min_count < 1 || max_size < 1 {
        return Err(FeatureError::InvalidArgument(
            "min_count and max_size must be at least 1".into(),
        ));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    for seq in train {
        for token in seq.as_ref() {
            *counts.entry(token.clone()).or_insert(0) += 1;
        }
    }
    counts.retain(|_, c| *c >= min_count);
    let tokens: Vec<String> = rank_counts(counts)
        .into_iter()
        .take(max_size)
        .map(|(t, _)| t)
        .collect();
    let mut vocab = Vocabulary::from_tokens(tokens)?;
    vocab.min_count = min_count;
    vocab.max_size = max_size;
    Ok(vocab)
}

/// Sparse term counts of one tweet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentVector {
    pub tweet_id: String,
    pub counts: BTreeMap<usize, u32>,
}

impl DocumentVector {
    pub fn dense(&self, dim: usize) -> Vec<u32> {
        let mut out = vec![0; dim];
        for (&i, &c) in &self.counts {
            out[i] = c;
        }
        out
    }

    /// Number of in-vocabulary tokens counted.
    pub fn mass(&self) -> u64 {
        self.counts.values().map(|&c| c as u64).sum()
    }
}

/// Counts in-vocabulary tokens; out-of-vocabulary tokens are ignored.
pub fn vectorize(tweet_id: &str, tokens: &[String], vocab: &Vocabulary) -> DocumentVector {
    let mut counts = BTreeMap::new();
    for token in tokens {
        if let Some(i) = vocab.index_of(token) {
            *counts.entry(i).or_insert(0) += 1;
        }
    }
    DocumentVector {
        tweet_id: tweet_id.to_string(),
        counts,
    }
}

/// Anything that carries a tweet id.
pub trait Identified {
    fn id(&self) -> &str;
}

impl Identified for TokenSequence {
    fn id(&self) -> &str {
        &self.tweet_id
    }
}

impl Identified for DocumentVector {
    fn id(&self) -> &str {
        &self.tweet_id
    }
}

/// Items with class indices into an ordered list of class names.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeled<T> {
    items: Vec<T>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl<T: Clone> Labeled<T> {
    pub fn new(items: Vec<T>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self, FeatureError> {
        if items.len() != labels.len() {
            return Err(FeatureError::LengthMismatch {
                items: items.len(),
                labels: labels.len(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(FeatureError::LabelOutOfRange {
                label,
                classes: class_names.len(),
            });
        }
        Ok(Labeled {
            items,
            labels,
            class_names,
        })
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Keeps the given positions, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Labeled {
            items: indices.iter().map(|&i| self.items[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, usize)> {
        self.items.iter().zip(self.labels.iter().copied())
    }
}

/// Count vectors with class labels, ready for the classifier.
pub type LabeledDataset = Labeled<DocumentVector>;

/// Attaches class indices (label-set ordinals) to token sequences.
pub fn label_sequences(
    sequences: &[TokenSequence],
    labels: &LabelSet,
) -> Result<Labeled<TokenSequence>, FeatureError> {
    let classes = sequences
        .iter()
        .map(|s| labels.index_of(&s.party).ok_or_else(|| FeatureError::UnknownParty(s.party.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Labeled::new(sequences.to_vec(), classes, labels.ids())
}

pub fn vectorize_dataset(sequences: &Labeled<TokenSequence>, vocab: &Vocabulary) -> LabeledDataset {
    vectorize_dataset_with(sequences, vocab, Execution::default())
}

pub fn vectorize_dataset_with(
    sequences: &Labeled<TokenSequence>,
    vocab: &Vocabulary,
    exec: Execution,
) -> LabeledDataset {
    let vectors = map_ordered(sequences.items(), exec, |s| vectorize(&s.tweet_id, &s.tokens, vocab));
    Labeled {
        items: vectors,
        labels: sequences.labels.clone(),
        class_names: sequences.class_names.clone(),
    }
}

fn class_positions(labels: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut positions = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        positions[l].push(i);
    }
    positions
}

/// Reduces every class to the size of the smallest one by seeded sampling
/// without replacement. Surviving items keep their original order.
pub fn undersample<T: Clone>(ds: &Labeled<T>, seed: u64) -> Result<Labeled<T>, FeatureError> {
    let positions = class_positions(&ds.labels, ds.n_classes());
    if let Some(c) = positions.iter().position(Vec::is_empty) {
        return Err(FeatureError::EmptyClass(ds.class_names[c].clone()));
    }
    let keep = positions.iter().map(Vec::len).min().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = Vec::with_capacity(keep * positions.len());
    for mut members in positions {
        members.shuffle(&mut rng);
        selected.extend_from_slice(&members[..keep]);
    }
    selected.sort_unstable();
    Ok(ds.select(&selected))
}

/// Stratified split: each class is shuffled and cut at
/// `round(train_fraction * n_class)`.
pub fn split_train_test<T: Clone>(
    ds: &Labeled<T>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Labeled<T>, Labeled<T>), FeatureError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(FeatureError::InvalidArgument(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut members) in class_positions(&ds.labels, ds.n_classes()).into_iter().enumerate() {
        members.shuffle(&mut rng);
        let cut = (train_fraction * members.len() as f64).round() as usize;
        if !members.is_empty() && (cut == 0 || cut == members.len()) {
            log::warn!(
                "class '{}' with {} examples cannot appear in both splits",
                ds.class_names[class],
                members.len()
            );
        }
        train.extend_from_slice(&members[..cut]);
        test.extend_from_slice(&members[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.select(&train), ds.select(&test)))
}

/// Writes the dataset snapshot: a header with `V C`, the class names, the
/// vocabulary listing, then one `label idx:count ...` row per example.
pub fn write_snapshot<W: Write>(
    ds: &LabeledDataset,
    vocab: &Vocabulary,
    mut out: W,
) -> Result<(), FeatureError> {
    writeln!(out, "{SNAPSHOT_MAGIC}")?;
    writeln!(out, "{} {}", vocab.len(), ds.n_classes())?;
    writeln!(out, "{}", ds.class_names.join(" "))?;
    for token in vocab.tokens() {
        writeln!(out, "{token}")?;
    }
    for (vector, label) in ds.iter() {
        let mut line = label.to_string();
        for (i, c) in &vector.counts {
            line.push_str(&format!(" {i}:{c}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads a snapshot back. Tweet ids are not stored; rows are named
/// `row<N>` by position.
pub fn read_snapshot<R: BufRead>(input: R) -> Result<(LabeledDataset, Vocabulary), FeatureError> {
    let bad = |line: usize, reason: &str| FeatureError::Snapshot {
        line,
        reason: reason.to_string(),
    };
    let mut lines = input.lines();
    let mut next = |n: usize| -> Result<String, FeatureError> {
        lines.next().ok_or_else(|| bad(n, "unexpected end of file"))?.map_err(FeatureError::Io)
    };
    if next(1)? != SNAPSHOT_MAGIC {
        return Err(bad(1, "missing magic header"));
    }
    let dims = next(2)?;
    let (v, c) = dims
        .split_once(' ')
        .and_then(|(v, c)| Some((v.parse::<usize>().ok()?, c.parse::<usize>().ok()?)))
        .ok_or_else(|| bad(2, "expected 'V C'"))?;
    let class_names: Vec<String> = next(3)?.split_whitespace().map(str::to_string).collect();
    if class_names.len() != c {
        return Err(bad(3, "class name count does not match C"));
    }
    let mut tokens = Vec::with_capacity(v);
    for k in 0..v {
        tokens.push(next(4 + k)?);
    }
    let vocab = Vocabulary::from_tokens(tokens).map_err(|e| bad(4, &e.to_string()))?;
    let mut items = Vec::new();
    let mut labels = Vec::new();
    let mut line_no = 4 + v;
    for line in lines {
        let line = line?;
        if line.is_empty() {
            line_no += 1;
            continue;
        }
        let mut parts = line.split(' ');
        let label: usize = parts
            .next()
            .and_then(|l| l.parse().ok())
            .ok_or_else(|| bad(line_no, "invalid label"))?;
        let mut counts = BTreeMap::new();
        for pair in parts {
            let (i, n) = pair
                .split_once(':')
                .and_then(|(i, n)| Some((i.parse::<usize>().ok()?, n.parse::<u32>().ok()?)))
                .ok_or_else(|| bad(line_no, "invalid idx:count pair"))?;
            if i >= v || n == 0 {
                return Err(bad(line_no, "index out of range or zero count"));
            }
            counts.insert(i, n);
        }
        items.push(DocumentVector {
            tweet_id: format!("row{}", items.len()),
            counts,
        });
        labels.push(label);
        line_no += 1;
    }
    let ds = Labeled::new(items, labels, class_names).map_err(|e| bad(line_no, &e.to_string()))?;
    Ok((ds, vocab))
}
