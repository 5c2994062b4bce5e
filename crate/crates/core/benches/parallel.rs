//! Sequential vs rayon execution of the per-item batch stages.

use std::fmt::Write as _;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pulse_core::corpus::parse_jsonl;
use pulse_core::neuralnet::{init_params, predict_batch, SparseInput};
use pulse_core::sentiment::{score_corpus_with, ScorerConfig, SentimentResources};
use pulse_core::textprep::{preprocess_corpus_with, LemmaTable, Preprocessor, StopwordList};
use pulse_core::{Corpus, Execution, LabelSet, NetworkConfig};

const WORDS: [&str; 16] = [
    "gobierno", "futuro", "empleo", "sanidad", "vivienda", "good", "bad", "love", "terrible", "great",
    "propuestas", "votamos", "ciudades", "happy", "VERY", "not",
];
const PARTIES: [&str; 5] = ["podemos", "psoe", "ciudadanos", "pp", "vox"];

fn corpus(n: usize) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut out = String::new();
    for i in 0..n {
        let text: Vec<&str> = (0..20).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
        writeln!(
            out,
            r#"{{"id":"t{i}","author":"u{}","party":"{}","timestamp":"2020-03-{:02}T10:00:00Z","text":"{}!"}}"#,
            i % 40,
            PARTIES[i % 5],
            1 + i % 28,
            text.join(" ")
        )
        .unwrap();
    }
    parse_jsonl(out.as_bytes(), &LabelSet::spanish_default()).unwrap()
}

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sentiment(c: &mut Criterion) {
    let corpus = corpus(5_000);
    let res = SentimentResources::english();
    let config = ScorerConfig::default();
    let mut group = c.benchmark_group("score_corpus");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(score_corpus_with(&corpus, &res, &config, exec)))
        });
    }
    group.finish();
}

fn preprocess(c: &mut Criterion) {
    let corpus = corpus(5_000);
    let prep = Preprocessor::new(StopwordList::builtin(), LemmaTable::builtin(), 7);
    let mut group = c.benchmark_group("preprocess_corpus");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(preprocess_corpus_with(&corpus, &prep, exec)))
        });
    }
    group.finish();
}

fn predict(c: &mut Criterion) {
    let vocab = 20_000;
    let params = init_params(&NetworkConfig::new(vocab, 5, 3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let inputs: Vec<SparseInput> = (0..10_000)
        .map(|_| {
            let mut counts = vec![0.0; vocab];
            for _ in 0..15 {
                counts[rng.gen_range(0..vocab)] += 1.0;
            }
            SparseInput::from_dense(&counts)
        })
        .collect();
    let mut group = c.benchmark_group("predict_batch");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(predict_batch(&params, &inputs, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, sentiment, preprocess, predict);
criterion_main!(benches);
