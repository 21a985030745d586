//! Command-line interface. Tables go to `--out` when given, stdout otherwise;
//! summaries and diagnostics go to stderr.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use apptrend_core::evaluate::{classify_apps, trailing_weeks, weekly_protocol, Variant};
use apptrend_core::kmeans::kmeans;
use apptrend_core::recommend::{build_profiles, top_apps, trend_filter_top, SlopeOne, TrendPolicy, DEFAULT_LIST_LEN};
use apptrend_core::retention::{retention_curves, summarize};
use apptrend_core::series::relative_performance;
use apptrend_core::synth::{generate, Retained, SynthSpec, DEFAULT_START};
use apptrend_core::trend::TrendKind;
use apptrend_core::Dataset;
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use crate::ingest::{day_of, load_records, parse_date, write_jsonl, write_truth, Format, LoadOptions};
use crate::report::{app_trends, category_consensus, run_report, RunConfig, Weights};
use crate::tables;

#[derive(Debug, Parser)]
#[command(name = "apptrend", version, about = "App usage trends, retention and trend-aware recommendations")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Output file, or directory for `report`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Points per normalized series.
    #[arg(long, global = true, default_value_t = apptrend_core::series::DEFAULT_LEN)]
    pub resample_len: usize,
    /// Largest feature distance at which an app still matches a prototype.
    #[arg(long, global = true, default_value_t = apptrend_core::trend::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Apps whose peak daily users stay below this are Marginal.
    #[arg(long, global = true, default_value_t = apptrend_core::trend::DEFAULT_MARGINAL_GATE)]
    pub marginal_gate: u32,
    /// Prototype config file replacing the canonical trend patterns.
    #[arg(long, global = true)]
    pub prototypes: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Input {
    /// Usage log (.jsonl or .csv).
    pub input: PathBuf,
    /// Input format; inferred from the extension by default.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<Format>,
    /// First day of the observation window.
    #[arg(long, value_parser = parse_date)]
    pub window_start: Option<NaiveDate>,
    /// Last day of the observation window.
    #[arg(long, value_parser = parse_date)]
    pub window_end: Option<NaiveDate>,
}

fn parse_format(s: &str) -> Result<Format, String> {
    match s.to_ascii_lowercase().as_str() {
        "jsonl" => Ok(Format::Jsonl),
        "csv" => Ok(Format::Csv),
        _ => Err(format!("unknown format {s:?}, expected jsonl or csv")),
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a usage log and summarize it, or print one app's daily users.
    Ingest {
        #[command(flatten)]
        input: Input,
        /// Print the daily distinct-user counts of this app instead.
        #[arg(long)]
        daily: Option<String>,
    },
    /// Per-app retention rates.
    Retention {
        #[command(flatten)]
        input: Input,
        /// Day offsets to report, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1,3,7")]
        days: Vec<u32>,
        /// Users active this close to the window end are left out of the cohort.
        #[arg(long, default_value_t = apptrend_core::retention::DEFAULT_QUIET_WINDOW)]
        quiet_window: u32,
        /// Minimum cohort size for the summary.
        #[arg(long, default_value_t = 1)]
        min_users: u32,
    },
    /// Trend kind of every app.
    Classify {
        #[command(flatten)]
        input: Input,
    },
    /// Consensus trend of a category, optionally with one app relative to it.
    Consensus {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        category: String,
        /// App whose series minus the consensus is added as a column.
        #[arg(long)]
        relative: Option<String>,
    },
    /// Cluster apps by trend features.
    Kmeans {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 10)]
        runs: usize,
    },
    /// Top-N apps for one user.
    Recommend {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        user: String,
        #[arg(long, default_value_t = DEFAULT_LIST_LEN)]
        n: usize,
        /// Leave Flop apps out of the list.
        #[arg(long)]
        drop_flops: bool,
        /// Multiply the relevance of Hot apps by this factor.
        #[arg(long)]
        boost_hot: Option<f64>,
        /// Train on data up to this day; the window end by default.
        #[arg(long, value_parser = parse_date)]
        as_of: Option<NaiveDate>,
        /// Number of most used apps to draw candidates from.
        #[arg(long, default_value_t = apptrend_core::recommend::DEFAULT_UNIVERSE)]
        universe: usize,
    },
    /// Weekly evaluation of recommendation lists.
    Evaluate {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 4)]
        weeks: usize,
        #[arg(long, default_value_t = DEFAULT_LIST_LEN)]
        n: usize,
        #[arg(long)]
        drop_flops: bool,
        #[arg(long, default_value_t = 1.0)]
        boost_hot: f64,
        #[arg(long, default_value_t = apptrend_core::recommend::DEFAULT_UNIVERSE)]
        universe: usize,
        /// Evaluate only this many of the most active users.
        #[arg(long, default_value_t = apptrend_core::evaluate::DEFAULT_MAX_USERS)]
        max_users: usize,
    },
    /// Generate a synthetic usage log with known trend archetypes.
    Synth(SynthArgs),
    /// Run every analysis and write CSV artifacts plus a manifest.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    pub hot: usize,
    #[arg(long, default_value_t = 100)]
    pub flop: usize,
    #[arg(long, default_value_t = 100)]
    pub dominant: usize,
    #[arg(long, default_value_t = 100)]
    pub marginal: usize,
    #[arg(long, default_value_t = 5000)]
    pub users: usize,
    #[arg(long, default_value_t = 365)]
    pub days: usize,
    /// Standard deviation of the noise on the normalized scale.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, value_parser = parse_date)]
    pub start: Option<NaiveDate>,
    #[arg(long, default_value_t = 8)]
    pub categories: usize,
    #[arg(long, default_value_t = 20.0)]
    pub peak_min: f64,
    #[arg(long, default_value_t = 100.0)]
    pub peak_max: f64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub input: Input,
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, default_value_t = DEFAULT_LIST_LEN)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub weeks: usize,
    #[arg(long, default_value_t = apptrend_core::recommend::DEFAULT_UNIVERSE)]
    pub universe: usize,
    #[arg(long, default_value_t = apptrend_core::evaluate::DEFAULT_MAX_USERS)]
    pub max_users: usize,
    #[arg(long, default_value_t = 1.0)]
    pub boost_hot: f64,
    /// Usage score weights: recency,frequency,days.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub weights: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', default_value = "1,3,7")]
    pub days: Vec<u32>,
    #[arg(long, default_value_t = apptrend_core::retention::DEFAULT_QUIET_WINDOW)]
    pub quiet_window: u32,
    #[arg(long, default_value_t = 1)]
    pub min_users: u32,
    /// Restrict consensus output to these categories (repeatable).
    #[arg(long = "category")]
    pub categories: Vec<String>,
    /// Also write these apps relative to their category (repeatable).
    #[arg(long = "relative")]
    pub relative: Vec<String>,
}

impl Input {
    fn load(&self) -> Result<Dataset> {
        let window = match (self.window_start, self.window_end) {
            (Some(s), Some(e)) => Some((s, e)),
            (None, None) => None,
            _ => bail!("--window-start and --window-end must be given together"),
        };
        load_records(&self.input, self.format, &LoadOptions { window })
            .with_context(|| format!("loading {}", self.input.display()))
    }
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

impl Global {
    fn config(&self) -> RunConfig {
        RunConfig {
            resample_len: self.resample_len,
            threshold: self.threshold,
            marginal_gate: self.marginal_gate,
            prototypes: self.prototypes.clone(),
            seed: self.seed,
            ..RunConfig::default()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Ingest { input, daily } => {
            let ds = input.load()?;
            let out = output(&g.out)?;
            match daily {
                Some(app) => {
                    tables::daily_usage(out, &ds.daily_usage(&app)?)?;
                }
                None => {
                    let (start, end) = ds.window();
                    let mut w = csv::Writer::from_writer(out);
                    w.write_record(["metric", "value"])?;
                    for (k, v) in [
                        ("records", ds.len().to_string()),
                        ("apps", ds.apps().len().to_string()),
                        ("users", ds.users().len().to_string()),
                        ("categorized_apps", ds.categories().len().to_string()),
                        ("window_start", crate::ingest::date_of(start).to_string()),
                        ("window_end", crate::ingest::date_of(end).to_string()),
                    ] {
                        w.write_record([k, v.as_str()])?;
                    }
                    w.flush()?;
                }
            }
        }
        Command::Retention {
            input,
            days,
            quiet_window,
            min_users,
        } => {
            let ds = input.load()?;
            let max_d = days.iter().copied().max().unwrap_or(0);
            let curves = retention_curves(&ds, max_d, quiet_window);
            tables::retention(output(&g.out)?, &curves, &days)?;
            for &d in &days {
                match summarize(&curves, d, min_users) {
                    Ok(s) => eprintln!(
                        "day {d}: {} apps, {} users, macro {:.4}, micro {:.4}",
                        s.apps, s.users, s.macro_rate, s.micro_rate
                    ),
                    Err(e) => eprintln!("day {d}: {e}"),
                }
            }
        }
        Command::Classify { input } => {
            let ds = input.load()?;
            let cfg = g.config();
            let trends = app_trends(&ds, &cfg.classifier()?, cfg.resample_len)?;
            let rows: Vec<_> = trends.into_iter().map(|t| t.classification).collect();
            tables::classification(output(&g.out)?, &rows)?;
        }
        Command::Consensus {
            input,
            category,
            relative,
        } => {
            let ds = input.load()?;
            let cfg = g.config();
            let trends = app_trends(&ds, &cfg.classifier()?, cfg.resample_len)?;
            let all = category_consensus(&ds, &trends, std::slice::from_ref(&category))?;
            let consensus = &all[&category];
            let rel = match &relative {
                Some(app) => {
                    let id = ds.app_id(app).with_context(|| format!("unknown app: {app}"))?;
                    let r = relative_performance(&trends[id.index()].series, consensus)?;
                    eprintln!("{app}: slope relative to {category} = {:.6}", r.slope());
                    Some(r)
                }
                None => None,
            };
            tables::consensus_single(output(&g.out)?, consensus, rel.as_ref())?;
        }
        Command::Kmeans { input, k, runs } => {
            let ds = input.load()?;
            let cfg = g.config();
            let trends = app_trends(&ds, &cfg.classifier()?, cfg.resample_len)?;
            let points: Vec<_> = trends.iter().map(|t| t.features).collect();
            let result = kmeans(&points, k, runs, g.seed)?;
            eprintln!("k {k}: sse {:.6} (run seed {})", result.sse, result.seed);
            tables::kmeans(output(&g.out)?, &result)?;
        }
        Command::Recommend {
            input,
            user,
            n,
            drop_flops,
            boost_hot,
            as_of,
            universe,
        } => {
            let ds = input.load()?;
            let cfg = g.config();
            let as_of = as_of.map(day_of).unwrap_or(ds.window().1);
            let apps = top_apps(&ds, as_of, universe);
            let uid = ds.user_id(&user).with_context(|| format!("unknown user: {user}"))?;
            let weights = cfg.usage_weights()?;
            let profiles = build_profiles(&ds, None, &apps, as_of, &weights);
            let profile = profiles
                .iter()
                .find(|p| p.user_id == ds.user_name(uid))
                .ok_or_else(|| apptrend_core::Error::ColdUser(user.clone()))?;
            let ranked = SlopeOne::fit(&profiles).rank(profile)?;
            let kinds: BTreeMap<String, TrendKind> = classify_apps(&ds, &apps, as_of, &cfg.classifier()?)?
                .into_iter()
                .map(|c| (c.app_id, c.kind))
                .collect();
            let mut policy = if drop_flops { TrendPolicy::drop_flops(1.0) } else { TrendPolicy::identity() };
            if let Some(b) = boost_hot {
                policy.boost.insert(TrendKind::Hot, b);
            }
            let list = trend_filter_top(&ranked, &kinds, &policy, n);
            tables::recommendations(output(&g.out)?, &list, &kinds)?;
        }
        Command::Evaluate {
            input,
            weeks,
            n,
            drop_flops,
            boost_hot,
            universe,
            max_users,
        } => {
            let ds = input.load()?;
            let cfg = RunConfig {
                n,
                universe,
                max_users,
                boost_hot,
                ..g.config()
            };
            let eval = cfg.eval_config(cfg.classifier()?)?;
            let variant = if drop_flops { Variant::FlopsRemoved } else { Variant::Baseline };
            let reports = weekly_protocol(&ds, &trailing_weeks(&ds, weeks)?, &eval, variant)?;
            for r in reports.iter().filter(|r| r.has_no_test_users()) {
                eprintln!("week {}: no test users", r.week);
            }
            tables::evaluation(output(&g.out)?, &reports)?;
        }
        Command::Synth(args) => synth(g, &args)?,
        Command::Report(args) => {
            let ds = args.input.load()?;
            let out_dir = g.out.clone().unwrap_or_else(|| PathBuf::from("report"));
            let weights = match args.weights.as_deref() {
                Some(&[recency, frequency, days]) => Weights { recency, frequency, days },
                Some(_) => bail!("--weights takes three values"),
                None => RunConfig::default().weights,
            };
            let cfg = RunConfig {
                input: Some(args.input.input.clone()),
                out_dir,
                k: args.k,
                runs: args.runs,
                n: args.n,
                weeks: args.weeks,
                universe: args.universe,
                max_users: args.max_users,
                boost_hot: args.boost_hot,
                weights,
                retention_days: args.days,
                quiet_window: args.quiet_window,
                min_users: args.min_users,
                categories: args.categories,
                relative_apps: args.relative,
                ..g.config()
            };
            let manifest = run_report(&ds, &cfg)?;
            for a in &manifest.artifacts {
                eprintln!("{}: {} rows", cfg.out_dir.join(&a.file).display(), a.rows);
            }
        }
    }
    Ok(())
}

fn synth(g: &Global, args: &SynthArgs) -> Result<()> {
    let Some(out) = &g.out else {
        bail!("synth needs --out for the generated log");
    };
    let spec = SynthSpec {
        hot: args.hot,
        flop: args.flop,
        dominant: args.dominant,
        marginal: args.marginal,
        users: args.users,
        days: args.days,
        noise_sigma: args.noise,
        seed: g.seed,
        start: args.start.map(day_of).unwrap_or(DEFAULT_START),
        peak_range: (args.peak_min, args.peak_max),
        marginal_gate: g.marginal_gate,
        categories: args.categories,
        retained: Retained::default(),
    };
    let data = generate(&spec)?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_jsonl(&data.dataset, BufWriter::new(file)).with_context(|| format!("writing {}", out.display()))?;
    let truth_path = out.parent().unwrap_or(Path::new("")).join("truth.csv");
    let truth = File::create(&truth_path).with_context(|| format!("creating {}", truth_path.display()))?;
    write_truth(&data.truth, BufWriter::new(truth)).with_context(|| format!("writing {}", truth_path.display()))?;
    eprintln!(
        "{} records, {} apps, {} users -> {}, {}",
        data.dataset.len(),
        data.dataset.apps().len(),
        data.dataset.users().len(),
        out.display(),
        truth_path.display()
    );
    Ok(())
}
