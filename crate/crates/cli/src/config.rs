//! JSON run configuration. Relative paths resolve against the directory of
//! the configuration file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use pulse_core::analytics::DEFAULT_BINS;
use pulse_core::corpus::parse_timestamp;
use pulse_core::features::{DEFAULT_MAX_SIZE, DEFAULT_MIN_COUNT, DEFAULT_TRAIN_FRACTION};
use pulse_core::sentiment::ScorerConfig;
use pulse_core::textprep::DEFAULT_MIN_TOKENS;
use pulse_core::NetworkConfig;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    /// Label-set JSON; the five Spanish parties when absent.
    pub labels: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    /// Valence lexicon replacing the bundled English one.
    pub lexicon: Option<PathBuf>,
    /// JSON object mapping class id to "left"/"right" for the 2x2 matrix.
    pub leaning_map: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub start: String,
    pub end: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub min_tokens: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            min_tokens: DEFAULT_MIN_TOKENS,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub min_count: u64,
    pub max_size: usize,
    pub train_fraction: f64,
    /// Share of the training portion held out for early stopping.
    pub validation_fraction: f64,
    pub undersample: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            min_count: DEFAULT_MIN_COUNT,
            max_size: DEFAULT_MAX_SIZE,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            validation_fraction: 0.1,
            undersample: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsConfig {
    pub n_bins: usize,
    pub top_n: usize,
    /// Also emit per-party-per-year clouds and histograms.
    pub by_year: bool,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        AnalyticsConfig {
            n_bins: DEFAULT_BINS,
            top_n: 100,
            by_year: true,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub paths: Paths,
    pub window: Option<Window>,
    pub preprocess: PreprocessConfig,
    pub features: FeatureConfig,
    /// Input and output widths are taken from the data.
    pub network: NetworkConfig,
    pub sentiment: ScorerConfig,
    pub analytics: AnalyticsConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [
            &mut p.corpus,
            &mut p.labels,
            &mut p.stopwords,
            &mut p.lemmas,
            &mut p.lexicon,
            &mut p.leaning_map,
            &mut p.out_dir,
        ] {
            if let Some(path) = slot {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
    }

    pub fn seed(&self) -> Result<u64> {
        match self.seed {
            Some(s) => Ok(s),
            None => bail!("a seed is required: set \"seed\" in the config or pass --seed"),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Every referenced input file must exist.
    pub fn validate(&self) -> Result<()> {
        let p = &self.paths;
        for (name, path) in [
            ("corpus", &p.corpus),
            ("labels", &p.labels),
            ("stopwords", &p.stopwords),
            ("lemmas", &p.lemmas),
            ("lexicon", &p.lexicon),
            ("leaning_map", &p.leaning_map),
        ] {
            if let Some(path) = path {
                if !path.is_file() {
                    bail!("{name} file not found: {}", path.display());
                }
            }
        }
        self.window_bounds()?;
        let f = &self.features;
        if !(f.train_fraction > 0.0 && f.train_fraction < 1.0) {
            bail!("features.train_fraction must be in (0, 1)");
        }
        if !(f.validation_fraction > 0.0 && f.validation_fraction < 1.0) {
            bail!("features.validation_fraction must be in (0, 1)");
        }
        Ok(())
    }

    pub fn window_bounds(&self) -> Result<Option<(DateTime<Utc>, DateTime<Utc>)>> {
        let Some(w) = &self.window else { return Ok(None) };
        let parse = |s: &str| parse_timestamp(s).with_context(|| format!("invalid window timestamp '{s}'"));
        Ok(Some((parse(&w.start)?, parse(&w.end)?)))
    }
}
