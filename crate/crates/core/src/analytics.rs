//! Descriptive aggregates: word-frequency tables, sentiment histograms and
//! monthly median sentiment, plus their JSON/CSV export.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::Datelike;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::exec::{fold_reduce, Execution};
use crate::sentiment::ScoredRecord;
use crate::textprep::TokenSequence;

pub const DEFAULT_BINS: usize = 40;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {what}: {reason}")]
    Parse { what: String, reason: String },
}

/// Which tweets an aggregate covers. `None` fields match everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scope {
    pub party: Option<String>,
    pub year: Option<i32>,
}

impl Scope {
    pub fn party(party: &str) -> Self {
        Scope {
            party: Some(party.to_string()),
            year: None,
        }
    }

    pub fn party_year(party: &str, year: i32) -> Self {
        Scope {
            party: Some(party.to_string()),
            year: Some(year),
        }
    }

    fn matches(&self, party: &str, year: i32) -> bool {
        self.party.as_deref().map_or(true, |p| p == party) && self.year.map_or(true, |y| y == year)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub token: String,
    pub count: u64,
}

/// Token counts sorted by count descending, ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub scope: Scope,
    pub rows: Vec<FrequencyRow>,
}

impl FrequencyTable {
    /// Rows with `count / max_count` attached, for word-cloud sizing.
    pub fn weighted(&self) -> Vec<(String, u64, f64)> {
        let max = self.rows.first().map_or(1, |r| r.count) as f64;
        self.rows
            .iter()
            .map(|r| (r.token.clone(), r.count, r.count as f64 / max))
            .collect()
    }
}

/// Sorts `(token, count)` pairs by count descending, then token ascending.
pub fn rank_counts(counts: HashMap<String, u64>) -> Vec<(String, u64)> {
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}

pub fn word_frequencies(
    sequences: &[TokenSequence],
    scope: &Scope,
    top_n: usize,
) -> Result<FrequencyTable, AnalyticsError> {
    word_frequencies_with(sequences, scope, top_n, Execution::default())
}

pub fn word_frequencies_with(
    sequences: &[TokenSequence],
    scope: &Scope,
    top_n: usize,
    exec: Execution,
) -> Result<FrequencyTable, AnalyticsError> {
    if top_n == 0 {
        return Err(AnalyticsError::InvalidArgument("top_n must be at least 1".into()));
    }
    let counts = fold_reduce(
        sequences,
        exec,
        HashMap::<String, u64>::new,
        |mut acc, seq| {
            if scope.matches(&seq.party, seq.timestamp.year()) {
                for token in &seq.tokens {
                    *acc.entry(token.clone()).or_insert(0) += 1;
                }
            }
            acc
        },
        |mut a, b| {
            for (token, n) in b {
                *a.entry(token).or_insert(0) += n;
            }
            a
        },
    );
    let rows = rank_counts(counts)
        .into_iter()
        .take(top_n)
        .map(|(token, count)| FrequencyRow { token, count })
        .collect();
    Ok(FrequencyTable {
        scope: scope.clone(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentHistogram {
    pub scope: Scope,
    /// `n_bins + 1` increasing edges from -1 to 1.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl SentimentHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn uniform_edges(n_bins: usize) -> Vec<f64> {
    let mut edges: Vec<f64> = (0..=n_bins)
        .map(|i| -1.0 + 2.0 * i as f64 / n_bins as f64)
        .collect();
    edges[n_bins] = 1.0;
    edges
}

/// Bin index with `edges[k] <= x < edges[k + 1]`; the last bin also takes
/// its right edge. Values outside [-1, 1] clamp to the end bins.
fn bin_index(x: f64, edges: &[f64]) -> usize {
    let n = edges.len() - 1;
    let guess = (((x + 1.0) / 2.0) * n as f64).floor();
    let mut k = if guess.is_nan() {
        0
    } else {
        guess.clamp(0.0, (n - 1) as f64) as usize
    };
    while k > 0 && x < edges[k] {
        k -= 1;
    }
    while k + 1 < n && x >= edges[k + 1] {
        k += 1;
    }
    k
}

pub fn sentiment_histogram(
    records: &[ScoredRecord],
    scope: &Scope,
    n_bins: usize,
) -> Result<SentimentHistogram, AnalyticsError> {
    if n_bins < 2 {
        return Err(AnalyticsError::InvalidArgument("n_bins must be at least 2".into()));
    }
    let bin_edges = uniform_edges(n_bins);
    let mut counts = vec![0u64; n_bins];
    for rec in records {
        if scope.matches(&rec.party, rec.timestamp.year()) {
            counts[bin_index(rec.score.compound, &bin_edges)] += 1;
        }
    }
    Ok(SentimentHistogram {
        scope: scope.clone(),
        bin_edges,
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonthlyPoint {
    pub year: i32,
    pub month: u32,
    pub median_compound: f64,
    pub n: usize,
}

/// Monthly series for one party (`None` = every party).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub party: Option<String>,
    pub points: Vec<MonthlyPoint>,
}

/// Median of a non-empty slice; sorts it in place.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// One point per UTC calendar month that has at least one scored tweet,
/// in chronological order. Empty months are omitted.
pub fn monthly_median_series(records: &[ScoredRecord], party: Option<&str>) -> Vec<MonthlyPoint> {
    let mut months: BTreeMap<(i32, u32), Vec<f64>> = BTreeMap::new();
    for rec in records {
        if party.map_or(true, |p| p == rec.party) {
            months
                .entry((rec.timestamp.year(), rec.timestamp.month()))
                .or_default()
                .push(rec.score.compound);
        }
    }
    months
        .into_iter()
        .map(|((year, month), mut values)| MonthlyPoint {
            year,
            month,
            n: values.len(),
            median_compound: median(&mut values),
        })
        .collect()
}

pub fn timeline(records: &[ScoredRecord], party: Option<&str>) -> Timeline {
    Timeline {
        party: party.map(str::to_string),
        points: monthly_median_series(records, party),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy)]
pub enum Artifact<'a> {
    Frequencies(&'a FrequencyTable),
    Histograms(&'a [SentimentHistogram]),
    Timelines(&'a [Timeline]),
}

/// Serializes a float with exactly six decimals.
fn fixed6<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    let raw = serde_json::value::RawValue::from_string(format_fixed6(*x))
        .map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

fn fixed6_vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&Fixed6(*x))?;
    }
    seq.end()
}

#[derive(Deserialize)]
#[serde(transparent)]
struct Fixed6(f64);

impl Serialize for Fixed6 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        fixed6(&self.0, s)
    }
}

pub fn format_fixed6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudEntry {
    pub token: String,
    pub count: u64,
    #[serde(serialize_with = "fixed6")]
    pub relative_weight: f64,
}

#[derive(Serialize, Deserialize)]
struct HistogramDoc {
    party: Option<String>,
    year: Option<i32>,
    #[serde(serialize_with = "fixed6_vec")]
    bin_edges: Vec<f64>,
    counts: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct PointDoc {
    year: i32,
    month: u32,
    #[serde(serialize_with = "fixed6")]
    median_compound: f64,
    n: usize,
}

#[derive(Serialize, Deserialize)]
struct TimelineDoc {
    party: Option<String>,
    points: Vec<PointDoc>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Renders an artifact to its deterministic text form.
pub fn render(artifact: Artifact<'_>, format: ExportFormat) -> String {
    let json = |v: serde_json::Result<String>| v.expect("artifact serializes") + "\n";
    match (artifact, format) {
        (Artifact::Frequencies(table), ExportFormat::Json) => {
            let entries: Vec<CloudEntry> = table
                .weighted()
                .into_iter()
                .map(|(token, count, relative_weight)| CloudEntry {
                    token,
                    count,
                    relative_weight,
                })
                .collect();
            json(serde_json::to_string_pretty(&entries))
        }
        (Artifact::Frequencies(table), ExportFormat::Csv) => {
            let mut out = String::from("token,count,relative_weight\n");
            for (token, count, weight) in table.weighted() {
                let _ = writeln!(out, "{},{},{}", csv_field(&token), count, format_fixed6(weight));
            }
            out
        }
        (Artifact::Histograms(hists), ExportFormat::Json) => {
            let docs: Vec<HistogramDoc> = hists
                .iter()
                .map(|h| HistogramDoc {
                    party: h.scope.party.clone(),
                    year: h.scope.year,
                    bin_edges: h.bin_edges.clone(),
                    counts: h.counts.clone(),
                })
                .collect();
            json(serde_json::to_string_pretty(&docs))
        }
        (Artifact::Histograms(hists), ExportFormat::Csv) => {
            let mut out = String::from("party,year,bin_start,bin_end,count\n");
            for h in hists {
                let party = h.scope.party.as_deref().unwrap_or("all");
                let year = h.scope.year.map(|y| y.to_string()).unwrap_or_default();
                for (k, count) in h.counts.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        csv_field(party),
                        year,
                        format_fixed6(h.bin_edges[k]),
                        format_fixed6(h.bin_edges[k + 1]),
                        count
                    );
                }
            }
            out
        }
        (Artifact::Timelines(lines), ExportFormat::Json) => {
            let docs: Vec<TimelineDoc> = lines
                .iter()
                .map(|t| TimelineDoc {
                    party: t.party.clone(),
                    points: t
                        .points
                        .iter()
                        .map(|p| PointDoc {
                            year: p.year,
                            month: p.month,
                            median_compound: p.median_compound,
                            n: p.n,
                        })
                        .collect(),
                })
                .collect();
            json(serde_json::to_string_pretty(&docs))
        }
        (Artifact::Timelines(lines), ExportFormat::Csv) => {
            let mut out = String::from("party,year,month,median_compound,n\n");
            for t in lines {
                let party = t.party.as_deref().unwrap_or("all");
                for p in &t.points {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        csv_field(party),
                        p.year,
                        p.month,
                        format_fixed6(p.median_compound),
                        p.n
                    );
                }
            }
            out
        }
    }
}

pub fn export_analytics(
    artifact: Artifact<'_>,
    path: &Path,
    format: ExportFormat,
) -> Result<(), AnalyticsError> {
    std::fs::write(path, render(artifact, format)).map_err(|source| AnalyticsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_err(what: &str, reason: impl ToString) -> AnalyticsError {
    AnalyticsError::Parse {
        what: what.to_string(),
        reason: reason.to_string(),
    }
}

/// Reads back a word-cloud JSON document.
pub fn parse_cloud_json(text: &str) -> Result<Vec<CloudEntry>, AnalyticsError> {
    serde_json::from_str(text).map_err(|e| parse_err("cloud json", e))
}

pub fn parse_histograms_json(text: &str) -> Result<Vec<SentimentHistogram>, AnalyticsError> {
    let docs: Vec<HistogramDoc> =
        serde_json::from_str(text).map_err(|e| parse_err("histogram json", e))?;
    Ok(docs
        .into_iter()
        .map(|d| SentimentHistogram {
            scope: Scope {
                party: d.party,
                year: d.year,
            },
            bin_edges: d.bin_edges,
            counts: d.counts,
        })
        .collect())
}

pub fn parse_timelines_json(text: &str) -> Result<Vec<Timeline>, AnalyticsError> {
    let docs: Vec<TimelineDoc> =
        serde_json::from_str(text).map_err(|e| parse_err("timeline json", e))?;
    Ok(docs
        .into_iter()
        .map(|d| Timeline {
            party: d.party,
            points: d
                .points
                .into_iter()
                .map(|p| MonthlyPoint {
                    year: p.year,
                    month: p.month,
                    median_compound: p.median_compound,
                    n: p.n,
                })
                .collect(),
        })
        .collect())
}

/// Reads back the timeline CSV. The party column value `all` maps to `None`.
pub fn parse_timelines_csv(text: &str) -> Result<Vec<Timeline>, AnalyticsError> {
    let mut lines = text.lines();
    if lines.next() != Some("party,year,month,median_compound,n") {
        return Err(parse_err("timeline csv", "unexpected header"));
    }
    let mut out: Vec<Timeline> = Vec::new();
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(parse_err("timeline csv", format!("row {} has {} columns", i + 2, cols.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| parse_err("timeline csv", e));
        let party = (cols[0] != "all").then(|| cols[0].to_string());
        let point = MonthlyPoint {
            year: num(cols[1])? as i32,
            month: num(cols[2])? as u32,
            median_compound: num(cols[3])?,
            n: num(cols[4])? as usize,
        };
        match out.last_mut() {
            Some(t) if t.party == party => t.points.push(point),
            _ => out.push(Timeline {
                party,
                points: vec![point],
            }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sentiment::SentimentScore;
    use chrono::{DateTime, TimeZone, Utc};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(party: &str, year: i32, tokens: &[&str]) -> TokenSequence {
        TokenSequence {
            tweet_id: format!("{party}-{year}-{}", tokens.join("")),
            party: party.into(),
            timestamp: Utc.with_ymd_and_hms(year, 6, 1, 0, 0, 0).unwrap(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn record(party: &str, ts: DateTime<Utc>, compound: f64) -> ScoredRecord {
        ScoredRecord {
            tweet_id: format!("{party}{ts}{compound}"),
            timestamp: ts,
            party: party.into(),
            score: SentimentScore {
                compound,
                pos: 0.0,
                neu: 1.0,
                neg: 0.0,
            },
        }
    }

    #[test]
    fn frequency_examples() {
        let empty = word_frequencies(&[], &Scope::default(), 5).unwrap();
        assert!(empty.rows.is_empty());
        let t = word_frequencies(&[seq("pp", 2019, &["a", "b", "a"])], &Scope::default(), 2).unwrap();
        assert_eq!(
            t.rows,
            vec![
                FrequencyRow { token: "a".into(), count: 2 },
                FrequencyRow { token: "b".into(), count: 1 }
            ]
        );
        assert!(word_frequencies(&[], &Scope::default(), 0).is_err());
    }

    #[test]
    fn frequency_scope_and_ties() {
        let seqs = vec![
            seq("pp", 2019, &["madrid", "sanchez", "psoe"]),
            seq("pp", 2018, &["rajoy", "rajoy"]),
            seq("vox", 2019, &["españa", "españa", "españa"]),
        ];
        let t = word_frequencies(&seqs, &Scope::party_year("pp", 2019), 10).unwrap();
        let tokens: Vec<_> = t.rows.iter().map(|r| r.token.as_str()).collect();
        assert_eq!(tokens, ["madrid", "psoe", "sanchez"]);
        let all_pp = word_frequencies(&seqs, &Scope::party("pp"), 1).unwrap();
        assert_eq!(all_pp.rows[0], FrequencyRow { token: "rajoy".into(), count: 2 });
    }

    #[test]
    fn frequency_matches_brute_force_on_100_tweets() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vocab: Vec<String> = (0..30).map(|i| format!("w{i}")).collect();
        let seqs: Vec<TokenSequence> = (0..100)
            .map(|i| {
                let n = rng.gen_range(0..15);
                let toks: Vec<&str> = (0..n).map(|_| vocab[rng.gen_range(0..30)].as_str()).collect();
                let party = if i % 3 == 0 { "pp" } else { "psoe" };
                let mut s = seq(party, 2019, &toks);
                s.tweet_id = i.to_string();
                s
            })
            .collect();
        // oracle: count by scanning every token against every vocabulary word
        let mut oracle: Vec<(String, u64)> = vocab
            .iter()
            .map(|w| {
                let c = seqs
                    .iter()
                    .filter(|s| s.party == "psoe")
                    .flat_map(|s| s.tokens.iter())
                    .filter(|t| *t == w)
                    .count() as u64;
                (w.clone(), c)
            })
            .filter(|(_, c)| *c > 0)
            .collect();
        oracle.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        for exec in [Execution::Sequential, Execution::Parallel] {
            let t = word_frequencies_with(&seqs, &Scope::party("psoe"), 1000, exec).unwrap();
            let got: Vec<(String, u64)> = t.rows.into_iter().map(|r| (r.token, r.count)).collect();
            assert_eq!(got, oracle);
        }
    }

    #[test]
    fn histogram_examples() {
        let h = sentiment_histogram(&[], &Scope::default(), 40).unwrap();
        assert_eq!(h.counts, vec![0; 40]);
        assert_eq!(h.bin_edges.len(), 41);
        assert_eq!(h.bin_edges[0], -1.0);
        assert_eq!(h.bin_edges[40], 1.0);
        let ts = Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap();
        let h = sentiment_histogram(&[record("pp", ts, 0.0)], &Scope::default(), 40).unwrap();
        assert_eq!(h.total(), 1);
        assert_eq!(h.counts[20], 1);
        let h = sentiment_histogram(&[record("pp", ts, 1.0), record("pp", ts, -1.0)], &Scope::default(), 4)
            .unwrap();
        assert_eq!(h.counts, vec![1, 0, 0, 1]);
        assert!(sentiment_histogram(&[], &Scope::default(), 1).is_err());
    }

    #[test]
    fn histogram_matches_scan_and_bin_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ts = Utc.with_ymd_and_hms(2019, 3, 1, 0, 0, 0).unwrap();
        let mut records: Vec<ScoredRecord> = (0..1000)
            .map(|_| record("vox", ts, rng.gen_range(-1.0..=1.0)))
            .collect();
        // exact edge values are the interesting cases
        for k in 0..=40 {
            records.push(record("vox", ts, -1.0 + k as f64 * 0.05));
        }
        for n_bins in [2, 7, 40] {
            let h = sentiment_histogram(&records, &Scope::default(), n_bins).unwrap();
            let mut oracle = vec![0u64; n_bins];
            for r in &records {
                let c = r.score.compound;
                let k = (0..n_bins)
                    .find(|&k| {
                        h.bin_edges[k] <= c
                            && (c < h.bin_edges[k + 1] || (k == n_bins - 1 && c <= h.bin_edges[k + 1]))
                    })
                    .unwrap();
                oracle[k] += 1;
            }
            assert_eq!(h.counts, oracle, "n_bins = {n_bins}");
            assert_eq!(h.total(), records.len() as u64);
        }
    }

    #[test]
    fn median_examples() {
        let jan = Utc.with_ymd_and_hms(2019, 1, 15, 0, 0, 0).unwrap();
        let feb = Utc.with_ymd_and_hms(2019, 2, 15, 0, 0, 0).unwrap();
        let one = monthly_median_series(&[record("pp", jan, 0.3)], None);
        assert_eq!(one, vec![MonthlyPoint { year: 2019, month: 1, median_compound: 0.3, n: 1 }]);
        let odd = [record("pp", jan, 0.5), record("pp", jan, -0.2), record("pp", jan, 0.1)];
        assert_eq!(monthly_median_series(&odd, Some("pp"))[0].median_compound, 0.1);
        let even = [record("pp", feb, 0.0), record("pp", feb, 0.4), record("vox", jan, -1.0)];
        let s = monthly_median_series(&even, Some("pp"));
        assert_eq!(s.len(), 1);
        assert!((s[0].median_compound - 0.2).abs() < 1e-15);
        let both = monthly_median_series(&even, None);
        assert_eq!(both.iter().map(|p| p.month).collect::<Vec<_>>(), [1, 2]);
    }

    fn table(rows: &[(&str, u64)]) -> FrequencyTable {
        FrequencyTable {
            scope: Scope::party("psoe"),
            rows: rows
                .iter()
                .map(|(t, c)| FrequencyRow { token: t.to_string(), count: *c })
                .collect(),
        }
    }

    #[test]
    fn empty_table_exports_empty_array() {
        let out = render(Artifact::Frequencies(&table(&[])), ExportFormat::Json);
        assert_eq!(out.trim(), "[]");
        assert!(parse_cloud_json(&out).unwrap().is_empty());
    }

    #[test]
    fn three_row_table_golden_bytes() {
        let t = table(&[("futuro", 4), ("proyecto", 3), ("derecha", 1)]);
        let golden = include_str!("../tests/fixtures/cloud_golden.json");
        assert_eq!(render(Artifact::Frequencies(&t), ExportFormat::Json), golden);
        assert_eq!(
            render(Artifact::Frequencies(&t), ExportFormat::Csv),
            "token,count,relative_weight\nfuturo,4,1.000000\nproyecto,3,0.750000\nderecha,1,0.250000\n"
        );
        let back = parse_cloud_json(golden).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[1].relative_weight, 0.75);
    }

    #[test]
    fn export_writes_file_and_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.json");
        export_analytics(Artifact::Frequencies(&table(&[("a", 1)])), &path, ExportFormat::Json).unwrap();
        assert!(path.exists());
        let bad = dir.path().join("missing").join("x.json");
        let err = export_analytics(Artifact::Frequencies(&table(&[])), &bad, ExportFormat::Json).unwrap_err();
        assert!(err.to_string().contains("missing"));
    }

    proptest! {
        #[test]
        fn median_is_permutation_invariant(
            values in prop::collection::vec((-1.0f64..=1.0, 0u32..6), 1..60),
            seed in any::<u64>(),
        ) {
            let records: Vec<ScoredRecord> = values
                .iter()
                .map(|(c, m)| record("pp", Utc.with_ymd_and_hms(2020, m + 1, 3, 0, 0, 0).unwrap(), *c))
                .collect();
            let mut shuffled = records.clone();
            use rand::seq::SliceRandom;
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(monthly_median_series(&records, None), monthly_median_series(&shuffled, None));
            let total: usize = monthly_median_series(&records, None).iter().map(|p| p.n).sum();
            prop_assert_eq!(total, records.len());
        }

        #[test]
        fn exports_reparse_within_tolerance(values in prop::collection::vec(-1.0f64..=1.0, 1..30)) {
            let points: Vec<MonthlyPoint> = values
                .iter()
                .enumerate()
                .map(|(i, v)| MonthlyPoint { year: 2016 + (i / 12) as i32, month: (i % 12) as u32 + 1, median_compound: *v, n: i + 1 })
                .collect();
            let lines = vec![Timeline { party: Some("podemos".into()), points }];
            for (fmt, parse) in [
                (ExportFormat::Json, parse_timelines_json as fn(&str) -> Result<Vec<Timeline>, AnalyticsError>),
                (ExportFormat::Csv, parse_timelines_csv),
            ] {
                let back = parse(&render(Artifact::Timelines(&lines), fmt)).unwrap();
                prop_assert_eq!(back.len(), 1);
                prop_assert_eq!(&back[0].party, &lines[0].party);
                for (a, b) in back[0].points.iter().zip(&lines[0].points) {
                    prop_assert_eq!((a.year, a.month, a.n), (b.year, b.month, b.n));
                    prop_assert!((a.median_compound - b.median_compound).abs() <= 1e-6);
                }
            }
            let h = SentimentHistogram { scope: Scope::party("pp"), bin_edges: uniform_edges(7), counts: vec![1; 7] };
            let back = parse_histograms_json(&render(Artifact::Histograms(std::slice::from_ref(&h)), ExportFormat::Json)).unwrap();
            prop_assert_eq!(&back[0].counts, &h.counts);
            for (a, b) in back[0].bin_edges.iter().zip(&h.bin_edges) {
                prop_assert!((a - b).abs() <= 1e-6);
            }
        }
    }
}
