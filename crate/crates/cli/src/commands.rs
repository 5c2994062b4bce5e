//! One function per subcommand. Commands talk to each other only through
//! files under the output directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chrono::Datelike;
use serde::Serialize;

use pulse_core::analytics::{
    export_analytics, sentiment_histogram, timeline, word_frequencies_with, Artifact, ExportFormat, Scope,
    SentimentHistogram, Timeline,
};
use pulse_core::corpus::{corpus_stats, filter_by_window, load_jsonl, CorpusStats};
use pulse_core::evaluation::{self, collapse_to_leaning, confusion, leaning_mapping, ReportFormat};
use pulse_core::features::{
    build_vocabulary, label_sequences, read_snapshot, split_train_test, undersample, vectorize_dataset_with,
    write_snapshot, LabeledDataset,
};
use pulse_core::neuralnet::{self, load_params_for, predict_dataset, save_params};
use pulse_core::sentiment::{score_corpus_with, SentimentResources, ValenceLexicon};
use pulse_core::textprep::{preprocess_corpus_with, LemmaTable, StopwordList, TokenSequence};
use pulse_core::{Corpus, Execution, LabelSet, Leaning, NetworkConfig, Preprocessor, Vocabulary};

use crate::config::RunConfig;

pub const CORPUS_CACHE: &str = "corpus.jsonl";
pub const CORPUS_SUMMARY: &str = "corpus_summary.json";
pub const TOKENS: &str = "tokens.jsonl";

/// Independent seeds for each random stage, derived from the run seed.
#[derive(Debug, Clone, Copy)]
pub enum Stage {
    Undersample = 1,
    Split = 2,
    Validation = 3,
    Network = 4,
}

/// SplitMix64 step over `seed + stage`.
pub fn stage_seed(seed: u64, stage: Stage) -> u64 {
    let mut z = seed.wrapping_add((stage as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub struct RunContext {
    pub config: RunConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub exec: Execution,
}

impl RunContext {
    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn dir(&self, rel: &str) -> Result<PathBuf> {
        let dir = self.out.join(rel);
        fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(dir)
    }

    fn labels(&self) -> Result<LabelSet> {
        match &self.config.paths.labels {
            Some(path) => Ok(LabelSet::load(path)?),
            None => Ok(LabelSet::spanish_default()),
        }
    }

    fn cached_corpus(&self) -> Result<Corpus> {
        let path = self.path(CORPUS_CACHE);
        if !path.is_file() {
            bail!("{} not found; run `pulse ingest` first", path.display());
        }
        Ok(load_jsonl(&path, &self.labels()?)?)
    }

    fn cached_tokens(&self) -> Result<Vec<TokenSequence>> {
        let path = self.path(TOKENS);
        let file = File::open(&path).with_context(|| format!("{} not found; run `pulse preprocess` first", path.display()))?;
        BufReader::new(file)
            .lines()
            .enumerate()
            .map(|(i, line)| {
                let line: String = line?;
                serde_json::from_str(&line).with_context(|| format!("{}:{}: invalid token record", path.display(), i + 1))
            })
            .collect()
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn summary_text(stats: &CorpusStats) -> String {
    let mut out = String::new();
    writeln!(out, "tweets  {}", stats.total).unwrap();
    writeln!(out, "authors {}", stats.distinct_authors).unwrap();
    match &stats.date_range {
        Some(r) => writeln!(out, "range   {} .. {}", r.first.format("%Y-%m-%d"), r.last.format("%Y-%m-%d")).unwrap(),
        None => writeln!(out, "range   -").unwrap(),
    }
    for pc in &stats.per_party {
        writeln!(out, "  {:<12} {}", pc.party, pc.count).unwrap();
    }
    out
}

pub fn ingest(ctx: &RunContext) -> Result<()> {
    let source = ctx
        .config
        .paths
        .corpus
        .as_ref()
        .ok_or_else(|| anyhow!("no corpus path: set paths.corpus or pass --corpus"))?;
    let mut corpus = load_jsonl(source, &ctx.labels()?)?;
    if let Some((start, end)) = ctx.config.window_bounds()? {
        corpus = filter_by_window(&corpus, start, end)?;
    }
    fs::create_dir_all(&ctx.out).with_context(|| format!("cannot create {}", ctx.out.display()))?;
    let cache = ctx.path(CORPUS_CACHE);
    let file = File::create(&cache).with_context(|| format!("cannot write {}", cache.display()))?;
    let mut w = BufWriter::new(file);
    corpus.write_jsonl(&mut w)?;
    w.flush()?;

    let stats = corpus_stats(&corpus);
    write_json(&ctx.path(CORPUS_SUMMARY), &stats)?;
    print!("{}", summary_text(&stats));
    Ok(())
}

fn preprocessor(config: &RunConfig) -> Result<Preprocessor> {
    let stopwords = match &config.paths.stopwords {
        Some(p) => StopwordList::load(p)?,
        None => StopwordList::builtin(),
    };
    let lemmas = match &config.paths.lemmas {
        Some(p) => LemmaTable::load(p)?,
        None => LemmaTable::builtin(),
    };
    Ok(Preprocessor::new(stopwords, lemmas, config.preprocess.min_tokens))
}

pub fn preprocess(ctx: &RunContext) -> Result<()> {
    let corpus = ctx.cached_corpus()?;
    let sequences = preprocess_corpus_with(&corpus, &preprocessor(&ctx.config)?, ctx.exec);
    write_jsonl(&ctx.path(TOKENS), &sequences)?;
    println!(
        "kept {} of {} tweets with at least {} tokens",
        sequences.len(),
        corpus.len(),
        ctx.config.preprocess.min_tokens
    );
    Ok(())
}

fn years<'a>(items: impl Iterator<Item = (&'a str, i32)>) -> BTreeMap<String, BTreeSet<i32>> {
    let mut out: BTreeMap<String, BTreeSet<i32>> = BTreeMap::new();
    for (party, year) in items {
        out.entry(party.to_string()).or_default().insert(year);
    }
    out
}

pub fn sentiment(ctx: &RunContext) -> Result<()> {
    let corpus = ctx.cached_corpus()?;
    let resources = match &ctx.config.paths.lexicon {
        Some(p) => SentimentResources::with_lexicon(ValenceLexicon::load(p)?),
        None => SentimentResources::english(),
    };
    let records = score_corpus_with(&corpus, &resources, &ctx.config.sentiment, ctx.exec);
    let dir = ctx.dir("sentiment")?;
    write_jsonl(&dir.join("scores.jsonl"), &records)?;

    let labels = corpus.label_set();
    let n_bins = ctx.config.analytics.n_bins;
    let mut hists: Vec<SentimentHistogram> = vec![sentiment_histogram(&records, &Scope::default(), n_bins)?];
    for id in labels.ids() {
        hists.push(sentiment_histogram(&records, &Scope::party(&id), n_bins)?);
    }
    if ctx.config.analytics.by_year {
        let by_party = years(records.iter().map(|r| (r.party.as_str(), r.timestamp.year())));
        for id in labels.ids() {
            for &year in by_party.get(&id).into_iter().flatten() {
                hists.push(sentiment_histogram(&records, &Scope::party_year(&id, year), n_bins)?);
            }
        }
    }
    let mut lines: Vec<Timeline> = vec![timeline(&records, None)];
    lines.extend(labels.ids().iter().map(|id| timeline(&records, Some(id))));

    export_analytics(Artifact::Histograms(&hists), &dir.join("histograms.json"), ExportFormat::Json)?;
    export_analytics(Artifact::Histograms(&hists), &dir.join("histograms.csv"), ExportFormat::Csv)?;
    export_analytics(Artifact::Timelines(&lines), &dir.join("timeline.json"), ExportFormat::Json)?;
    export_analytics(Artifact::Timelines(&lines), &dir.join("timeline.csv"), ExportFormat::Csv)?;
    println!("scored {} tweets; {} monthly points overall", records.len(), lines[0].points.len());
    Ok(())
}

pub fn cloud(ctx: &RunContext) -> Result<()> {
    let sequences = ctx.cached_tokens()?;
    let labels = ctx.labels()?;
    let top_n = ctx.config.analytics.top_n;
    let dir = ctx.dir("clouds")?;
    let mut written = 0;
    let mut emit = |scope: Scope, name: String| -> Result<()> {
        let table = word_frequencies_with(&sequences, &scope, top_n, ctx.exec)?;
        export_analytics(Artifact::Frequencies(&table), &dir.join(format!("{name}.json")), ExportFormat::Json)?;
        written += 1;
        Ok(())
    };
    for id in labels.ids() {
        emit(Scope::party(&id), id.clone())?;
    }
    if ctx.config.analytics.by_year {
        let by_party = years(sequences.iter().map(|s| (s.party.as_str(), s.timestamp.year())));
        for id in labels.ids() {
            for &year in by_party.get(&id).into_iter().flatten() {
                emit(Scope::party_year(&id, year), format!("{id}_{year}"))?;
            }
        }
    }
    println!("wrote {written} word clouds");
    Ok(())
}

#[derive(Serialize)]
struct DatasetSummary {
    vocab_size: usize,
    class_names: Vec<String>,
    train: Vec<usize>,
    validation: Vec<usize>,
    test: Vec<usize>,
}

fn write_dataset(path: &Path, ds: &LabeledDataset, vocab: &Vocabulary) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut out = BufWriter::new(file);
    write_snapshot(ds, vocab, &mut out)?;
    out.flush()?;
    Ok(())
}

fn read_dataset(path: &Path) -> Result<(LabeledDataset, Vocabulary)> {
    let file = File::open(path).with_context(|| format!("{} not found; run `pulse vectorize` first", path.display()))?;
    read_snapshot(BufReader::new(file)).with_context(|| format!("cannot read {}", path.display()))
}

pub fn vectorize(ctx: &RunContext) -> Result<()> {
    let sequences = ctx.cached_tokens()?;
    let labels = ctx.labels()?;
    let f = &ctx.config.features;
    let mut labeled = label_sequences(&sequences, &labels)?;
    if f.undersample {
        labeled = undersample(&labeled, stage_seed(ctx.seed, Stage::Undersample))?;
    }
    let (train_full, test) = split_train_test(&labeled, f.train_fraction, stage_seed(ctx.seed, Stage::Split))?;
    let (train, val) = split_train_test(
        &train_full,
        1.0 - f.validation_fraction,
        stage_seed(ctx.seed, Stage::Validation),
    )?;
    let vocab = build_vocabulary(train.items(), f.min_count, f.max_size)?;

    let dir = ctx.dir("dataset")?;
    let mut counts = Vec::new();
    for (name, part) in [("train", &train), ("val", &val), ("test", &test)] {
        let ds = vectorize_dataset_with(part, &vocab, ctx.exec);
        write_dataset(&dir.join(format!("{name}.txt")), &ds, &vocab)?;
        counts.push(ds.class_counts());
    }
    let summary = DatasetSummary {
        vocab_size: vocab.len(),
        class_names: labels.ids(),
        test: counts.pop().unwrap(),
        validation: counts.pop().unwrap(),
        train: counts.pop().unwrap(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    println!(
        "vocabulary {}; train {}, validation {}, test {}",
        vocab.len(),
        train.len(),
        val.len(),
        test.len()
    );
    Ok(())
}

fn network_config(ctx: &RunContext, vocab: &Vocabulary, n_classes: usize) -> NetworkConfig {
    NetworkConfig {
        input_dim: vocab.len(),
        output_dim: n_classes,
        seed: stage_seed(ctx.seed, Stage::Network),
        ..ctx.config.network.clone()
    }
}

pub fn train(ctx: &RunContext) -> Result<()> {
    let (train, vocab) = read_dataset(&ctx.path("dataset/train.txt"))?;
    let (val, _) = read_dataset(&ctx.path("dataset/val.txt"))?;
    let config = network_config(ctx, &vocab, train.n_classes());
    if config.max_epochs == 0 {
        log::warn!("max_epochs is 0; saving the initial parameters");
    }
    let (params, report) = neuralnet::train(&config, &train, &val)?;
    let dir = ctx.dir("model")?;
    save_params(&params, &dir.join("params.bin"))?;
    write_json(&dir.join("report.json"), &report)?;
    match report.best_val_accuracy {
        Some(acc) => println!(
            "best validation accuracy {:.4} at epoch {}; stopped at epoch {}",
            acc, report.best_epoch, report.stopped_epoch
        ),
        None => println!("no training epochs run"),
    }
    Ok(())
}

fn leaning_map(ctx: &RunContext, labels: &LabelSet, class_names: &[String]) -> Result<Vec<Option<Leaning>>> {
    match &ctx.config.paths.leaning_map {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let map: BTreeMap<String, Leaning> =
                serde_json::from_str(&text).with_context(|| format!("invalid leaning map {}", path.display()))?;
            Ok(class_names.iter().map(|c| map.get(c).copied()).collect())
        }
        None => Ok(leaning_mapping(class_names, labels)),
    }
}

#[derive(Serialize)]
struct EvalSummary {
    split: String,
    n: u64,
    accuracy: f64,
    leaning_accuracy: f64,
}

pub fn eval(ctx: &RunContext, params_path: Option<&Path>, split: &str) -> Result<()> {
    let (ds, vocab) = read_dataset(&ctx.path(&format!("dataset/{split}.txt")))?;
    let config = network_config(ctx, &vocab, ds.n_classes());
    let params_path = params_path.map(Path::to_path_buf).unwrap_or_else(|| ctx.path("model/params.bin"));
    let params = load_params_for(&params_path, &config)?;
    let preds = predict_dataset(&params, &ds, ctx.exec)?;
    let cm = confusion(&preds, ds.labels(), ds.class_names())?;
    let labels = ctx.labels()?;
    let lr = collapse_to_leaning(&cm, &leaning_map(ctx, &labels, ds.class_names())?)?;

    let dir = ctx.dir("eval")?;
    for (name, m) in [("confusion", &cm), ("leaning", &lr)] {
        evaluation::report(m, &dir.join(format!("{name}.json")), ReportFormat::Json)?;
        evaluation::report(m, &dir.join(format!("{name}.csv")), ReportFormat::Csv)?;
        evaluation::report(m, &dir.join(format!("{name}.txt")), ReportFormat::Text)?;
    }
    let summary = EvalSummary {
        split: split.to_string(),
        n: cm.total(),
        accuracy: evaluation::accuracy(&cm)?,
        leaning_accuracy: evaluation::accuracy(&lr)?,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    print!("{}", evaluation::render(&cm, ReportFormat::Text));
    println!();
    print!("{}", evaluation::render(&lr, ReportFormat::Text));
    Ok(())
}

fn read_optional(path: &Path) -> Result<Option<String>> {
    if path.is_file() {
        Ok(Some(fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?))
    } else {
        Ok(None)
    }
}

/// Collects whichever artifacts exist into one plain-text report.
pub fn report(ctx: &RunContext) -> Result<()> {
    let mut out = String::new();
    if let Some(text) = read_optional(&ctx.path(CORPUS_SUMMARY))? {
        let stats: CorpusStats = serde_json::from_str(&text)?;
        out.push_str("== corpus\n");
        out.push_str(&summary_text(&stats));
        out.push('\n');
    }
    if let Some(text) = read_optional(&ctx.path("sentiment/timeline.json"))? {
        let lines = pulse_core::analytics::parse_timelines_json(&text)?;
        out.push_str("== monthly median compound\n");
        for t in &lines {
            writeln!(out, "{}", t.party.as_deref().unwrap_or("all")).unwrap();
            for p in &t.points {
                writeln!(out, "  {}-{:02}  {:>9.4}  n={}", p.year, p.month, p.median_compound, p.n).unwrap();
            }
        }
        out.push('\n');
    }
    let labels = ctx.labels()?;
    let mut clouds = String::new();
    for id in labels.ids() {
        if let Some(text) = read_optional(&ctx.path(&format!("clouds/{id}.json")))? {
            let entries = pulse_core::analytics::parse_cloud_json(&text)?;
            let top: Vec<String> = entries.iter().take(10).map(|e| format!("{} ({})", e.token, e.count)).collect();
            writeln!(clouds, "  {:<12} {}", id, top.join(", ")).unwrap();
        }
    }
    if !clouds.is_empty() {
        out.push_str("== top words\n");
        out.push_str(&clouds);
        out.push('\n');
    }
    for name in ["confusion", "leaning"] {
        if let Some(text) = read_optional(&ctx.path(&format!("eval/{name}.txt")))? {
            writeln!(out, "== {name} matrix").unwrap();
            out.push_str(&text);
            out.push('\n');
        }
    }
    if out.is_empty() {
        bail!("no artifacts found under {}", ctx.out.display());
    }
    fs::create_dir_all(&ctx.out)?;
    write_text(&ctx.path("report.txt"), &out)?;
    print!("{out}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_seeds_differ() {
        let seeds: BTreeSet<u64> = [Stage::Undersample, Stage::Split, Stage::Validation, Stage::Network]
            .into_iter()
            .map(|s| stage_seed(42, s))
            .collect();
        assert_eq!(seeds.len(), 4);
        assert_eq!(stage_seed(42, Stage::Split), stage_seed(42, Stage::Split));
        assert_ne!(stage_seed(42, Stage::Split), stage_seed(43, Stage::Split));
    }
}
