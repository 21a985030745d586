//! The full analysis pipeline: retention, trend classification, category
//! breakdown, consensus, clustering and the weekly recommendation
//! evaluation, written as CSV artifacts plus a JSON manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use apptrend_core::evaluate::{trailing_weeks, weekly_protocol_variants, EvalConfig, Variant, DEFAULT_MAX_USERS};
use apptrend_core::kmeans::{cluster_size_distribution, kmeans};
use apptrend_core::recommend::{UsageWeights, DEFAULT_LIST_LEN, DEFAULT_UNIVERSE};
use apptrend_core::retention::{retention_curves, spearman, summarize, DEFAULT_QUIET_WINDOW};
use apptrend_core::series::{consensus, normalize, relative_performance, NormalizedSeries};
use apptrend_core::trend::{
    category_breakdown, extract_features, FeatureVector, Prototypes, TrendClassification, TrendClassifier,
    DEFAULT_MARGINAL_GATE, DEFAULT_THRESHOLD, UNCATEGORIZED,
};
use apptrend_core::Dataset;
use serde::Serialize;
use thiserror::Error;

use crate::ingest::date_of;
use crate::prototypes::{load_prototypes, PrototypeError};
use crate::tables;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Prototypes(#[from] PrototypeError),
    #[error(transparent)]
    Analysis(#[from] apptrend_core::Error),
}

pub type Result<T> = std::result::Result<T, ReportError>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Weights {
    pub recency: f64,
    pub frequency: f64,
    pub days: f64,
}

/// Every tunable of a report run; recorded verbatim in the manifest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub resample_len: usize,
    pub threshold: f64,
    pub marginal_gate: u32,
    pub prototypes: Option<PathBuf>,
    pub k: usize,
    pub runs: usize,
    pub seed: u64,
    pub n: usize,
    pub weeks: usize,
    pub universe: usize,
    pub max_users: usize,
    pub boost_hot: f64,
    pub weights: Weights,
    pub retention_days: Vec<u32>,
    pub quiet_window: u32,
    pub min_users: u32,
    /// Categories whose consensus is written; all when empty.
    pub categories: Vec<String>,
    /// Apps whose performance relative to their category is written.
    pub relative_apps: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let w = UsageWeights::default();
        RunConfig {
            input: None,
            out_dir: PathBuf::from("report"),
            resample_len: apptrend_core::series::DEFAULT_LEN,
            threshold: DEFAULT_THRESHOLD,
            marginal_gate: DEFAULT_MARGINAL_GATE,
            prototypes: None,
            k: 20,
            runs: 10,
            seed: 42,
            n: DEFAULT_LIST_LEN,
            weeks: 4,
            universe: DEFAULT_UNIVERSE,
            max_users: DEFAULT_MAX_USERS,
            boost_hot: 1.0,
            weights: Weights {
                recency: w.recency,
                frequency: w.frequency,
                days: w.days,
            },
            retention_days: vec![1, 3, 7],
            quiet_window: DEFAULT_QUIET_WINDOW,
            min_users: 1,
            categories: Vec::new(),
            relative_apps: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn classifier(&self) -> Result<TrendClassifier> {
        let prototypes = match &self.prototypes {
            Some(path) => load_prototypes(path, self.resample_len)?,
            None => Prototypes::canonical(self.resample_len)?,
        };
        Ok(TrendClassifier::new(prototypes, self.threshold, self.marginal_gate)?)
    }

    pub fn usage_weights(&self) -> Result<UsageWeights> {
        Ok(UsageWeights::new(self.weights.recency, self.weights.frequency, self.weights.days)?)
    }

    pub fn eval_config(&self, classifier: TrendClassifier) -> Result<EvalConfig> {
        Ok(EvalConfig {
            n: self.n,
            universe: self.universe,
            max_users: self.max_users,
            weights: self.usage_weights()?,
            classifier,
            boost_hot: self.boost_hot,
        })
    }
}

/// Normalized series, features and classification of one app over the whole window.
#[derive(Clone, Debug)]
pub struct AppTrend {
    pub series: NormalizedSeries,
    pub features: FeatureVector,
    pub classification: TrendClassification,
}

pub fn app_trends(ds: &Dataset, classifier: &TrendClassifier, len: usize) -> Result<Vec<AppTrend>> {
    ds.apps()
        .iter()
        .map(|app| {
            let series = normalize(&ds.daily_usage(app)?, len)?;
            let features = extract_features(&series)?;
            let classification = classifier.classify(&series, series.max_raw)?;
            Ok(AppTrend {
                series,
                features,
                classification,
            })
        })
        .collect()
}

fn category_name<'a>(ds: &'a Dataset, app: &str) -> &'a str {
    ds.categories().get(app).unwrap_or(UNCATEGORIZED)
}

/// Consensus series of every category, or only of `wanted`, by category name.
pub fn category_consensus(
    ds: &Dataset,
    trends: &[AppTrend],
    wanted: &[String],
) -> Result<BTreeMap<String, apptrend_core::series::ConsensusSeries>> {
    let mut groups: BTreeMap<&str, Vec<&NormalizedSeries>> = BTreeMap::new();
    for t in trends {
        let app = t.series.app_id.as_deref().unwrap_or_default();
        groups.entry(category_name(ds, app)).or_default().push(&t.series);
    }
    for c in wanted {
        if !groups.contains_key(c.as_str()) {
            return Err(apptrend_core::Error::InvalidParameter {
                name: "category",
                reason: "no app belongs to the requested category",
            }
            .into());
        }
    }
    groups
        .into_iter()
        .filter(|(c, _)| wanted.is_empty() || wanted.iter().any(|w| w == c))
        .map(|(c, members)| Ok((c.to_string(), consensus(members)?)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Artifact {
    pub file: String,
    pub rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Window {
    pub start: String,
    pub end: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub records: usize,
    pub apps: usize,
    pub users: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RetentionStats {
    pub d: u32,
    pub apps: usize,
    pub users: u64,
    pub macro_rate: f64,
    pub micro_rate: f64,
    /// Rank correlation between cohort size and the day-`d` rate.
    pub spearman_users_vs_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterStats {
    pub k: usize,
    pub sse: f64,
    pub best_seed: u64,
    /// `(cluster, size)`, largest first.
    pub sizes: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub retention: Vec<RetentionStats>,
    pub kinds: BTreeMap<String, usize>,
    pub kmeans: Option<ClusterStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub seed: u64,
    pub window: Window,
    pub dataset: DatasetSummary,
    pub artifacts: Vec<Artifact>,
    pub summary: Summary,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_table<F>(dir: &Path, file: &str, artifacts: &mut Vec<Artifact>, write: F) -> Result<()>
where
    F: FnOnce(BufWriter<File>) -> csv::Result<usize>,
{
    let path = dir.join(file);
    let rows = write(create(&path)?).map_err(|source| ReportError::Csv { path, source })?;
    artifacts.push(Artifact {
        file: file.to_string(),
        rows,
    });
    Ok(())
}

/// Runs every analysis on `ds` and writes the artifacts into `cfg.out_dir`.
pub fn run_report(ds: &Dataset, cfg: &RunConfig) -> Result<Manifest> {
    let dir = cfg.out_dir.as_path();
    fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let classifier = cfg.classifier()?;
    let eval = cfg.eval_config(classifier.clone())?;
    let weeks = trailing_weeks(ds, cfg.weeks)?;
    let mut artifacts = Vec::new();

    let max_d = cfg.retention_days.iter().copied().max().unwrap_or(0);
    let curves = retention_curves(ds, max_d, cfg.quiet_window);
    write_table(dir, "retention.csv", &mut artifacts, |w| tables::retention(w, &curves, &cfg.retention_days))?;
    let mut retention = Vec::new();
    for &d in &cfg.retention_days {
        let Ok(s) = summarize(&curves, d, cfg.min_users) else {
            continue;
        };
        let (sizes, rates): (Vec<f64>, Vec<f64>) = curves
            .iter()
            .filter(|c| c.cohort_size >= cfg.min_users && c.cohort_size > 0)
            .filter_map(|c| Some((c.cohort_size as f64, c.rate(d)?)))
            .unzip();
        retention.push(RetentionStats {
            d,
            apps: s.apps,
            users: s.users,
            macro_rate: s.macro_rate,
            micro_rate: s.micro_rate,
            spearman_users_vs_rate: spearman(&sizes, &rates).ok(),
        });
    }

    let trends = app_trends(ds, &classifier, cfg.resample_len)?;
    let classifications: Vec<TrendClassification> = trends.iter().map(|t| t.classification.clone()).collect();
    write_table(dir, "classification.csv", &mut artifacts, |w| tables::classification(w, &classifications))?;
    let breakdown = category_breakdown(&classifications, ds.categories())?;
    write_table(dir, "categories.csv", &mut artifacts, |w| tables::categories(w, &breakdown))?;

    let consensus: Vec<_> = category_consensus(ds, &trends, &cfg.categories)?.into_iter().collect();
    write_table(dir, "consensus.csv", &mut artifacts, |w| tables::consensus(w, &consensus))?;
    if !cfg.relative_apps.is_empty() {
        let all = category_consensus(ds, &trends, &[])?;
        let mut rel = Vec::new();
        for app in &cfg.relative_apps {
            let id = ds.app_id(app).ok_or_else(|| apptrend_core::Error::UnknownApp(app.clone()))?;
            let category = category_name(ds, app);
            rel.push((app.as_str(), category, relative_performance(&trends[id.index()].series, &all[category])?));
        }
        let rows: Vec<tables::RelativeRow> = rel
            .iter()
            .map(|(app_id, category, series)| tables::RelativeRow { app_id, category, series })
            .collect();
        write_table(dir, "relative.csv", &mut artifacts, |w| tables::relative(w, &rows))?;
    }

    let points: Vec<FeatureVector> = trends.iter().map(|t| t.features).collect();
    let clusters = if points.len() >= cfg.k {
        Some(kmeans(&points, cfg.k, cfg.runs, cfg.seed)?)
    } else {
        None
    };

    let mut reports = weekly_protocol_variants(ds, &weeks, &eval, &[Variant::Baseline, Variant::FlopsRemoved])?;
    let filtered = reports.pop().expect("two variants");
    let baseline = reports.pop().expect("two variants");
    write_table(dir, "evaluation.csv", &mut artifacts, |w| tables::evaluation_comparison(w, &baseline, &filtered))?;

    let mut kinds = BTreeMap::new();
    for c in &classifications {
        *kinds.entry(c.kind.to_string()).or_insert(0) += 1;
    }
    let (start, end) = ds.window();
    let manifest = Manifest {
        config: cfg.clone(),
        seed: cfg.seed,
        window: Window {
            start: date_of(start).to_string(),
            end: date_of(end).to_string(),
        },
        dataset: DatasetSummary {
            records: ds.len(),
            apps: ds.apps().len(),
            users: ds.users().len(),
        },
        artifacts,
        summary: Summary {
            retention,
            kinds,
            kmeans: clusters.map(|r| ClusterStats {
                k: r.k,
                sse: r.sse,
                best_seed: r.seed,
                sizes: cluster_size_distribution(&r),
            }),
        },
    };
    let path = dir.join("manifest.json");
    let mut out = create(&path)?;
    serde_json::to_writer_pretty(&mut out, &manifest)
        .map_err(std::io::Error::from)
        .and_then(|_| out.write_all(b"\n"))
        .and_then(|_| out.flush())
        .map_err(|source| ReportError::Io { path, source })?;
    Ok(manifest)
}
