//! Synthetic corpora and helpers shared by the CLI tests and the acceptance
//! suite.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PARTIES: [&str; 5] = ["podemos", "psoe", "ciudadanos", "pp", "vox"];

const FILLER: [&str; 40] = [
    "proyecto", "futuro", "gobierno", "ciudad", "trabajo", "empleo", "sanidad", "escuela", "pueblo", "derecho",
    "vivienda", "familia", "economia", "impuesto", "reforma", "campaña", "debate", "congreso", "votar", "programa",
    "energia", "cambio", "mercado", "region", "salario", "pension", "juventud", "cultura", "agua", "campo",
    "industria", "ciencia", "empresa", "hospital", "transporte", "seguridad", "justicia", "europa", "acuerdo", "propuesta",
];

const MOOD: [&str; 8] = ["good", "great", "happy", "love", "bad", "sad", "terrible", "angry"];

pub fn marker(class: usize, k: usize) -> String {
    format!("marca{}x{}", class, k)
}

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub per_class: usize,
    pub markers_per_class: usize,
    pub markers_per_tweet: usize,
    pub filler_per_tweet: usize,
    /// Probability that a marker of class 0 or 1 is drawn from the other
    /// class's markers instead.
    pub left_overlap: f64,
    pub months: u32,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            per_class: 200,
            markers_per_class: 12,
            markers_per_tweet: 3,
            filler_per_tweet: 6,
            left_overlap: 0.0,
            months: 24,
            seed: 1,
        }
    }
}

/// JSONL lines of a synthetic five-party corpus, classes interleaved.
pub fn synthetic_jsonl(spec: &SyntheticSpec) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = String::new();
    let mut id = 0usize;
    for i in 0..spec.per_class {
        for (class, party) in PARTIES.iter().enumerate() {
            let mut words: Vec<String> = Vec::new();
            for _ in 0..spec.markers_per_tweet {
                let mut source = class;
                if class < 2 && rng.gen::<f64>() < spec.left_overlap {
                    source = 1 - class;
                }
                words.push(marker(source, rng.gen_range(0..spec.markers_per_class)));
            }
            for _ in 0..spec.filler_per_tweet {
                words.push(FILLER.choose(&mut rng).unwrap().to_string());
            }
            words.push(MOOD.choose(&mut rng).unwrap().to_string());
            words.shuffle(&mut rng);
            let month = (i as u32 + class as u32) % spec.months;
            let ts = format!(
                "{}-{:02}-{:02}T{:02}:{:02}:00Z",
                2019 + month / 12,
                month % 12 + 1,
                1 + rng.gen_range(0..28),
                rng.gen_range(0..24),
                rng.gen_range(0..60)
            );
            let text = words.join(" ") + if rng.gen_bool(0.2) { "!" } else { "" };
            writeln!(
                out,
                r#"{{"id":"t{id}","author":"u{}","party":"{party}","timestamp":"{ts}","text":"{text}"}}"#,
                rng.gen_range(0..50)
            )
            .unwrap();
            id += 1;
        }
    }
    out
}

pub fn pulse() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pulse"))
}

/// Writes `corpus` and a config next to it; returns the config path.
pub fn write_config(dir: &Path, corpus: &str, extra: &str) -> PathBuf {
    std::fs::write(dir.join("tweets.jsonl"), corpus).unwrap();
    let config = format!(
        r#"{{"seed": 7, "paths": {{"corpus": "tweets.jsonl", "out_dir": "out"}}{extra}}}"#
    );
    let path = dir.join("run.json");
    std::fs::write(&path, config).unwrap();
    path
}

pub fn run(config: &Path, args: &[&str]) -> Output {
    pulse()
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("pulse binary runs")
}

pub fn run_ok(config: &Path, args: &[&str]) -> Output {
    let out = run(config, args);
    assert!(
        out.status.success(),
        "pulse {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub const PIPELINE: [&str; 8] = ["ingest", "preprocess", "sentiment", "cloud", "vectorize", "train", "eval", "report"];

/// Every file under `root`, relative path to bytes, sorted by path.
pub fn snapshot_tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}
