//! Accuracy and confusion matrices, including the left/right collapse.
//!
//! Orientation: rows are predicted classes, columns are true classes, and
//! percentages are normalized per true-class column.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{LabelSet, Leaning};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {preds} predictions vs {truths} truths")]
    LengthMismatch { preds: usize, truths: usize },
    #[error("class index {index} out of range for {n_classes} classes")]
    ClassOutOfRange { index: usize, n_classes: usize },
    #[error("empty confusion matrix")]
    Empty,
    #[error("class '{0}' has no leaning mapping")]
    Unmapped(String),
    #[error("malformed confusion matrix: {0}")]
    Malformed(String),
    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    class_names: Vec<String>,
    /// `counts[predicted][true]`.
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    /// Builds from a square count table, validating its shape.
    pub fn from_counts(class_names: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self, EvalError> {
        let c = class_names.len();
        if counts.len() != c || counts.iter().any(|row| row.len() != c) {
            return Err(EvalError::Malformed(format!("counts must be {c}x{c}")));
        }
        Ok(ConfusionMatrix { class_names, counts })
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn count(&self, predicted: usize, truth: usize) -> u64 {
        self.counts[predicted][truth]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Number of examples whose true class is `truth`.
    pub fn column_total(&self, truth: usize) -> u64 {
        self.counts.iter().map(|row| row[truth]).sum()
    }

    /// Percentage of true class `truth` predicted as `predicted`; `None` when
    /// the true class has no examples.
    pub fn percent(&self, predicted: usize, truth: usize) -> Option<f64> {
        let col = self.column_total(truth);
        (col > 0).then(|| 100.0 * self.counts[predicted][truth] as f64 / col as f64)
    }

    /// `percent[predicted][true]`.
    pub fn percent_table(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.n_classes())
            .map(|p| (0..self.n_classes()).map(|t| self.percent(p, t)).collect())
            .collect()
    }
}

pub fn confusion(preds: &[usize], truths: &[usize], class_names: &[String]) -> Result<ConfusionMatrix, EvalError> {
    if preds.len() != truths.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            truths: truths.len(),
        });
    }
    let c = class_names.len();
    let mut counts = vec![vec![0u64; c]; c];
    for (&p, &t) in preds.iter().zip(truths) {
        for index in [p, t] {
            if index >= c {
                return Err(EvalError::ClassOutOfRange { index, n_classes: c });
            }
        }
        counts[p][t] += 1;
    }
    Ok(ConfusionMatrix {
        class_names: class_names.to_vec(),
        counts,
    })
}

/// Fraction of examples on the diagonal.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let trace: u64 = (0..cm.n_classes()).map(|i| cm.counts[i][i]).sum();
    Ok(trace as f64 / total as f64)
}

/// Sums counts by leaning. `mapping[i]` is the leaning of class `i`; the
/// result has classes `left`, `right`.
pub fn collapse_to_leaning(cm: &ConfusionMatrix, mapping: &[Option<Leaning>]) -> Result<ConfusionMatrix, EvalError> {
    let groups: Vec<usize> = cm
        .class_names
        .iter()
        .enumerate()
        .map(|(i, name)| match mapping.get(i).copied().flatten() {
            Some(Leaning::Left) => Ok(0),
            Some(Leaning::Right) => Ok(1),
            None => Err(EvalError::Unmapped(name.clone())),
        })
        .collect::<Result<_, _>>()?;
    let mut counts = vec![vec![0u64; 2]; 2];
    for (p, row) in cm.counts.iter().enumerate() {
        for (t, &n) in row.iter().enumerate() {
            counts[groups[p]][groups[t]] += n;
        }
    }
    Ok(ConfusionMatrix {
        class_names: vec![Leaning::Left.to_string(), Leaning::Right.to_string()],
        counts,
    })
}

/// Leaning per class, looked up by class name in `labels`.
pub fn leaning_mapping(class_names: &[String], labels: &LabelSet) -> Vec<Option<Leaning>> {
    class_names
        .iter()
        .map(|name| labels.get(name).map(|p| p.leaning))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Text,
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

fn fmt_percent(p: Option<f64>) -> String {
    match p {
        Some(v) => format!("{:.1}", v),
        None => "n/a".to_string(),
    }
}

#[derive(Serialize, Deserialize)]
struct ConfusionJson {
    class_names: Vec<String>,
    counts: Vec<Vec<u64>>,
    /// `null` marks an empty true class.
    percent: Vec<Vec<Option<f64>>>,
}

pub fn render(cm: &ConfusionMatrix, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let doc = ConfusionJson {
                class_names: cm.class_names.clone(),
                counts: cm.counts.clone(),
                percent: cm
                    .percent_table()
                    .into_iter()
                    .map(|row| row.into_iter().map(|p| p.map(round1)).collect())
                    .collect(),
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("confusion matrix serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => render_csv(cm),
        ReportFormat::Text => render_text(cm),
    }
}

fn render_csv(cm: &ConfusionMatrix) -> String {
    let mut out = String::from("predicted");
    for name in &cm.class_names {
        write!(out, ",{name}_count").unwrap();
    }
    for name in &cm.class_names {
        write!(out, ",{name}_percent").unwrap();
    }
    out.push('\n');
    for (p, name) in cm.class_names.iter().enumerate() {
        out.push_str(name);
        for t in 0..cm.n_classes() {
            write!(out, ",{}", cm.counts[p][t]).unwrap();
        }
        for t in 0..cm.n_classes() {
            write!(out, ",{}", fmt_percent(cm.percent(p, t))).unwrap();
        }
        out.push('\n');
    }
    out
}

fn table(cm: &ConfusionMatrix, cell: impl Fn(usize, usize) -> String) -> String {
    let corner = "pred \\ true";
    let mut rows: Vec<Vec<String>> = vec![std::iter::once(corner.to_string())
        .chain(cm.class_names.iter().cloned())
        .collect()];
    for (p, name) in cm.class_names.iter().enumerate() {
        let mut row = vec![name.clone()];
        row.extend((0..cm.n_classes()).map(|t| cell(p, t)));
        rows.push(row);
    }
    let n_cols = cm.n_classes() + 1;
    let widths: Vec<usize> = (0..n_cols)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let mut line = format!("{:<w$}", row[0], w = widths[0]);
        for (c, cell) in row.iter().enumerate().skip(1) {
            write!(line, "  {:>w$}", cell, w = widths[c]).unwrap();
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn render_text(cm: &ConfusionMatrix) -> String {
    let mut out = String::from("counts\n");
    out.push_str(&table(cm, |p, t| cm.counts[p][t].to_string()));
    out.push_str("\npercent of true class\n");
    out.push_str(&table(cm, |p, t| fmt_percent(cm.percent(p, t))));
    match accuracy(cm) {
        Ok(a) => writeln!(out, "\naccuracy {:.1}%", 100.0 * a).unwrap(),
        Err(_) => out.push_str("\naccuracy n/a\n"),
    }
    out
}

pub fn report(cm: &ConfusionMatrix, path: &Path, format: ReportFormat) -> Result<(), EvalError> {
    std::fs::write(path, render(cm, format)).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads the JSON rendering back; percentages are recomputed from counts.
pub fn parse_json(text: &str) -> Result<ConfusionMatrix, EvalError> {
    let doc: ConfusionJson = serde_json::from_str(text).map_err(|e| EvalError::Malformed(e.to_string()))?;
    ConfusionMatrix::from_counts(doc.class_names, doc.counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(n: usize) -> Vec<String> {
        ["podemos", "psoe", "ciudadanos", "pp", "vox"][..n].iter().map(|s| s.to_string()).collect()
    }

    fn default_mapping() -> Vec<Option<Leaning>> {
        leaning_mapping(&names(5), &LabelSet::spanish_default())
    }

    #[test]
    fn identity_and_single_miss() {
        let truths = [0, 1, 2, 3, 4, 0];
        let cm = confusion(&truths, &truths, &names(5)).unwrap();
        for i in 0..5 {
            assert_eq!(cm.percent(i, i), Some(100.0));
        }
        assert_eq!(accuracy(&cm).unwrap(), 1.0);

        let cm = confusion(&[2], &[0], &names(3)).unwrap();
        assert_eq!(cm.percent(2, 0), Some(100.0));
        assert_eq!(cm.percent(0, 1), None);
        assert_eq!(accuracy(&cm).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(confusion(&[0], &[0, 1], &names(2)), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(confusion(&[2], &[0], &names(2)), Err(EvalError::ClassOutOfRange { .. })));
        let empty = confusion(&[], &[], &names(2)).unwrap();
        assert!(matches!(accuracy(&empty), Err(EvalError::Empty)));
        let cm = confusion(&[0], &[0], &names(2)).unwrap();
        assert!(matches!(collapse_to_leaning(&cm, &[Some(Leaning::Left)]), Err(EvalError::Unmapped(n)) if n == "psoe"));
    }

    #[test]
    fn random_fixture_matches_pair_count_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(200);
        let preds: Vec<usize> = (0..200).map(|_| rng.gen_range(0..5)).collect();
        let truths: Vec<usize> = (0..200).map(|_| rng.gen_range(0..5)).collect();
        let cm = confusion(&preds, &truths, &names(5)).unwrap();
        for p in 0..5 {
            for t in 0..5 {
                let oracle = (0..200).filter(|&i| preds[i] == p && truths[i] == t).count() as u64;
                assert_eq!(cm.count(p, t), oracle);
            }
        }
        assert_eq!(cm.total(), 200);
    }

    #[test]
    fn constructed_accuracy_fixture() {
        let truths: Vec<usize> = (0..200).map(|i| i % 5).collect();
        let preds: Vec<usize> = truths.iter().enumerate().map(|(i, &t)| if i < 150 { t } else { (t + 1) % 5 }).collect();
        let cm = confusion(&preds, &truths, &names(5)).unwrap();
        assert_eq!(accuracy(&cm).unwrap(), 0.75);
    }

    #[test]
    fn collapse_examples() {
        let truths = [0, 1, 2, 3, 4];
        let cm = confusion(&truths, &truths, &names(5)).unwrap();
        let lr = collapse_to_leaning(&cm, &default_mapping()).unwrap();
        assert_eq!(lr.class_names(), ["left", "right"]);
        assert_eq!(lr.counts(), [vec![2, 0], vec![0, 3]]);
        assert_eq!(lr.percent(0, 0), Some(100.0));

        let podemos_as_psoe = confusion(&[1, 1, 1], &[0, 0, 0], &names(5)).unwrap();
        assert_eq!(accuracy(&collapse_to_leaning(&podemos_as_psoe, &default_mapping()).unwrap()).unwrap(), 1.0);

        // hand-summed groups: left = {0,1}, right = {2,3,4}
        let counts = vec![
            vec![5, 2, 0, 1, 0],
            vec![3, 7, 1, 0, 0],
            vec![0, 1, 6, 2, 1],
            vec![1, 0, 2, 8, 0],
            vec![0, 0, 1, 0, 9],
        ];
        let cm = ConfusionMatrix::from_counts(names(5), counts).unwrap();
        let lr = collapse_to_leaning(&cm, &default_mapping()).unwrap();
        assert_eq!(lr.counts(), [vec![17, 2], vec![2, 29]]);
    }

    #[test]
    fn golden_text_table() {
        let truths = [0, 1, 2, 3, 4];
        let cm = confusion(&truths, &truths, &names(5)).unwrap();
        let expected = include_str!("../tests/fixtures/confusion_identity.txt");
        assert_eq!(render(&cm, ReportFormat::Text), expected);
    }

    #[test]
    fn empty_column_renders_na() {
        let cm = confusion(&[0, 1], &[0, 0], &names(3)).unwrap();
        let text = render(&cm, ReportFormat::Text);
        assert!(text.contains("n/a"));
        assert!(!text.contains("NaN"));
        let csv = render(&cm, ReportFormat::Csv);
        assert_eq!(csv.lines().next().unwrap(), "predicted,podemos_count,psoe_count,ciudadanos_count,podemos_percent,psoe_percent,ciudadanos_percent");
        assert_eq!(csv.lines().nth(1).unwrap(), "podemos,1,0,0,50.0,n/a,n/a");
        assert!(render(&cm, ReportFormat::Json).contains("null"));
    }

    #[test]
    fn json_round_trip_and_file_output() {
        let cm = confusion(&[0, 1, 1, 2], &[0, 1, 2, 2], &names(3)).unwrap();
        let json = render(&cm, ReportFormat::Json);
        assert_eq!(parse_json(&json).unwrap(), cm);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cm.csv");
        report(&cm, &path, ReportFormat::Csv).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), render(&cm, ReportFormat::Csv));
        assert!(report(&cm, &dir.path().join("no/such/dir.csv"), ReportFormat::Csv).is_err());
    }

    proptest! {
        #[test]
        fn collapse_commutes_with_counting(pairs in prop::collection::vec((0usize..5, 0usize..5), 0..300)) {
            let (preds, truths): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let mapping = default_mapping();
            let cm = confusion(&preds, &truths, &names(5)).unwrap();
            let collapsed = collapse_to_leaning(&cm, &mapping).unwrap();
            let group = |i: usize| usize::from(mapping[i] == Some(Leaning::Right));
            let mp: Vec<usize> = preds.iter().map(|&p| group(p)).collect();
            let mt: Vec<usize> = truths.iter().map(|&t| group(t)).collect();
            let direct = confusion(&mp, &mt, &["left".to_string(), "right".to_string()]).unwrap();
            prop_assert_eq!(&collapsed, &direct);
            if cm.total() > 0 {
                prop_assert!(accuracy(&collapsed).unwrap() >= accuracy(&cm).unwrap());
            }
            for t in 0..5 {
                if cm.column_total(t) > 0 {
                    let sum: f64 = (0..5).map(|p| cm.percent(p, t).unwrap()).sum();
                    prop_assert!((sum - 100.0).abs() <= 0.1);
                } else {
                    prop_assert!((0..5).all(|p| cm.percent(p, t).is_none()));
                }
            }
        }
    }
}
