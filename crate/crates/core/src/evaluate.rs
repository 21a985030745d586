//! Recommendation list metrics and the incremental weekly evaluation.
//!
//! Each week is evaluated with a model trained on everything before it.
//! Per user, a list is compared with the user's list from the previous week
//! (diversity), with every list the user received before (novelty), and with
//! the apps the user newly adopted during the week (accuracy).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{AppId, Dataset, UserId};
use crate::day::Day;
use crate::error::{Error, Result};
use crate::recommend::{build_profiles, top_apps, trend_filter_top, SlopeOne, TrendPolicy, UsageWeights, DEFAULT_LIST_LEN, DEFAULT_UNIVERSE};
use crate::series::normalize;
use crate::trend::{TrendClassification, TrendClassifier, TrendKind};

/// Number of most active users evaluated by default.
pub const DEFAULT_MAX_USERS: usize = 4500;

fn check_list_len(len: usize, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "N",
            reason: "must be positive",
        });
    }
    if len > n {
        return Err(Error::InvalidParameter {
            name: "N",
            reason: "list is longer than N",
        });
    }
    Ok(())
}

/// Share of `l2` that was not already in `l1`, relative to the list size `n`.
pub fn diversity<T: Ord>(l1: &BTreeSet<T>, l2: &BTreeSet<T>, n: usize) -> Result<f64> {
    check_list_len(l2.len(), n)?;
    Ok(l2.difference(l1).count() as f64 / n as f64)
}

/// Share of `l1` not among the previously seen apps `seen`, relative to `n`.
pub fn novelty<T: Ord>(l1: &BTreeSet<T>, seen: &BTreeSet<T>, n: usize) -> Result<f64> {
    check_list_len(l1.len(), n)?;
    Ok(l1.difference(seen).count() as f64 / n as f64)
}

/// Share of the ground-truth apps `truth` that `l1` contains.
pub fn accuracy<T: Ord>(l1: &BTreeSet<T>, truth: &BTreeSet<T>) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::Empty("ground truth"));
    }
    Ok(truth.intersection(l1).count() as f64 / truth.len() as f64)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Baseline,
    FlopsRemoved,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::FlopsRemoved => "flops_removed",
        }
    }
}

/// Inclusive day range.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Week {
    pub start: Day,
    pub end: Day,
}

/// The last `count` seven-day weeks of the dataset window, oldest first.
pub fn trailing_weeks(ds: &Dataset, count: usize) -> Result<Vec<Week>> {
    let (start, end) = ds.window();
    if count == 0 {
        return Err(Error::InvalidParameter {
            name: "weeks",
            reason: "must be at least 1",
        });
    }
    let first = end - (7 * count as i32 - 1);
    if first <= start {
        return Err(Error::InvalidParameter {
            name: "weeks",
            reason: "no training data before the first week",
        });
    }
    Ok((0..count as i32)
        .map(|w| Week {
            start: first + 7 * w,
            end: first + 7 * w + 6,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    /// List length.
    pub n: usize,
    /// Candidate universe size: most used apps before each week.
    pub universe: usize,
    /// Evaluate only this many of the most active users.
    pub max_users: usize,
    pub weights: UsageWeights,
    pub classifier: TrendClassifier,
    /// Relevance multiplier for Hot apps when Flops are removed.
    pub boost_hot: f64,
}

impl EvalConfig {
    pub fn with_defaults(resample_len: usize) -> Result<Self> {
        Ok(EvalConfig {
            n: DEFAULT_LIST_LEN,
            universe: DEFAULT_UNIVERSE,
            max_users: DEFAULT_MAX_USERS,
            weights: UsageWeights::default(),
            classifier: TrendClassifier::with_defaults(resample_len)?,
            boost_hot: 1.0,
        })
    }

    fn policy(&self, variant: Variant) -> TrendPolicy {
        match variant {
            Variant::Baseline => TrendPolicy::identity(),
            Variant::FlopsRemoved => TrendPolicy::drop_flops(self.boost_hot),
        }
    }
}

/// One week of one variant. Metrics are means over test users; `None` when
/// no user qualifies. The `pooled_*` metrics treat the union of all lists of
/// the week as a single list.
#[derive(Clone, Debug, PartialEq)]
pub struct WeeklyEvalReport {
    /// 1-based.
    pub week: usize,
    pub start: Day,
    pub end: Day,
    pub variant: Variant,
    /// Distinct recommended apps classified Hot / Flop.
    pub rec_hot: usize,
    pub rec_flop: usize,
    /// Hot / Flop apps in the candidate universe.
    pub total_hot: usize,
    pub total_flop: usize,
    /// Users who received a list and were active during the week.
    pub test_users: usize,
    pub diversity: Option<f64>,
    pub novelty: Option<f64>,
    pub accuracy: Option<f64>,
    pub pooled_diversity: Option<f64>,
    pub pooled_novelty: Option<f64>,
    pub pooled_accuracy: Option<f64>,
}

impl WeeklyEvalReport {
    pub fn has_no_test_users(&self) -> bool {
        self.test_users == 0
    }
}

/// Trend classification of `apps` from their usage up to `until`. Apps
/// without usage in that range are skipped.
pub fn classify_apps(ds: &Dataset, apps: &[AppId], until: Day, classifier: &TrendClassifier) -> Result<Vec<TrendClassification>> {
    let len = classifier.prototypes.hot.series.len();
    let mut out = Vec::with_capacity(apps.len());
    for &app in apps {
        if let Some(raw) = ds.daily_usage_until(app, until) {
            let s = normalize(&raw, len)?;
            out.push(classifier.classify(&s, s.max_raw)?);
        }
    }
    Ok(out)
}

fn validate_weeks(ds: &Dataset, weeks: &[Week]) -> Result<()> {
    let bad = |reason| Err(Error::InvalidParameter { name: "weeks", reason });
    if weeks.is_empty() {
        return bad("at least one week is required");
    }
    if weeks.iter().any(|w| w.start > w.end) {
        return bad("week start after its end");
    }
    if weeks.windows(2).any(|p| p[1].start <= p[0].end) {
        return bad("weeks must be disjoint and chronological");
    }
    if weeks[0].start <= ds.window().0 {
        return bad("no training data before the first week");
    }
    Ok(())
}

/// The `max` users with the most records before `before`; ties by user order.
fn most_active_users(ds: &Dataset, before: Day, max: usize) -> Vec<UserId> {
    let mut activity = vec![0u32; ds.users().len()];
    for r in ds.records().iter().filter(|r| r.day < before) {
        activity[r.user.index()] += 1;
    }
    let mut users: Vec<UserId> = (0..activity.len() as u32)
        .map(UserId)
        .filter(|u| activity[u.index()] > 0)
        .collect();
    users.sort_by(|a, b| activity[b.index()].cmp(&activity[a.index()]).then(a.cmp(b)));
    users.truncate(max);
    users.sort_unstable();
    users
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Default)]
struct History {
    last: BTreeMap<String, BTreeSet<String>>,
    seen: BTreeMap<String, BTreeSet<String>>,
    pooled_last: Option<BTreeSet<String>>,
    pooled_seen: BTreeSet<String>,
}

/// Runs the weekly protocol for one variant.
pub fn weekly_protocol(ds: &Dataset, weeks: &[Week], cfg: &EvalConfig, variant: Variant) -> Result<Vec<WeeklyEvalReport>> {
    Ok(weekly_protocol_variants(ds, weeks, cfg, &[variant])?.remove(0))
}

/// Runs the weekly protocol for several variants sharing the same trained
/// models; one report sequence per variant, in the given order.
pub fn weekly_protocol_variants(
    ds: &Dataset,
    weeks: &[Week],
    cfg: &EvalConfig,
    variants: &[Variant],
) -> Result<Vec<Vec<WeeklyEvalReport>>> {
    validate_weeks(ds, weeks)?;
    if cfg.n == 0 {
        return Err(Error::InvalidParameter {
            name: "N",
            reason: "must be positive",
        });
    }
    let users = most_active_users(ds, weeks[0].start, cfg.max_users);
    let mut is_eval_user = vec![false; ds.users().len()];
    for u in &users {
        is_eval_user[u.index()] = true;
    }
    let mut histories: Vec<History> = variants.iter().map(|_| History::default()).collect();
    let mut reports: Vec<Vec<WeeklyEvalReport>> = variants.iter().map(|_| Vec::new()).collect();

    for (w, week) in weeks.iter().enumerate() {
        let cutoff = week.start - 1;
        let universe = top_apps(ds, cutoff, cfg.universe);
        let kinds: BTreeMap<String, TrendKind> = classify_apps(ds, &universe, cutoff, &cfg.classifier)?
            .into_iter()
            .map(|c| (c.app_id, c.kind))
            .collect();
        let total = |k| kinds.values().filter(|&&v| v == k).count();

        // Apps each evaluated user used during the week, by user name.
        let mut used: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for &app in &universe {
            for r in ds.app_records_between(app, week.start, week.end) {
                if is_eval_user[r.user.index()] {
                    used.entry(ds.user_name(r.user)).or_default().insert(ds.app_name(app));
                }
            }
        }

        let profiles = build_profiles(ds, Some(&users), &universe, cutoff, &cfg.weights);
        let model = SlopeOne::fit(&profiles);
        let ranked = profiles.iter().map(|p| model.rank(p)).collect::<Result<Vec<_>>>()?;

        for ((variant, history), out) in variants.iter().zip(&mut histories).zip(&mut reports) {
            let policy = cfg.policy(*variant);
            let mut divs = Vec::new();
            let mut novs = Vec::new();
            let mut accs = Vec::new();
            let mut hits = 0usize;
            let mut truth_total = 0usize;
            let mut test_users = 0usize;
            let mut pooled: BTreeSet<String> = BTreeSet::new();
            let mut lists: Vec<(String, BTreeSet<String>)> = Vec::with_capacity(profiles.len());

            for (profile, full) in profiles.iter().zip(&ranked) {
                let list = trend_filter_top(full, &kinds, &policy, cfg.n);
                let apps: BTreeSet<String> = list.items.into_iter().map(|i| i.app_id).collect();
                pooled.extend(apps.iter().cloned());

                if let Some(active) = used.get(profile.user_id.as_str()) {
                    test_users += 1;
                    if w > 0 {
                        if let Some(prev) = history.last.get(&profile.user_id) {
                            divs.push(diversity(prev, &apps, cfg.n)?);
                        }
                        let empty = BTreeSet::new();
                        let seen = history.seen.get(&profile.user_id).unwrap_or(&empty);
                        novs.push(novelty(&apps, seen, cfg.n)?);
                    }
                    let truth: BTreeSet<&str> = active.iter().copied().filter(|a| !profile.uses(a)).collect();
                    if !truth.is_empty() {
                        let mine: BTreeSet<&str> = apps.iter().map(String::as_str).collect();
                        accs.push(accuracy(&mine, &truth)?);
                        hits += truth.intersection(&mine).count();
                        truth_total += truth.len();
                    }
                }
                lists.push((profile.user_id.clone(), apps));
            }

            let count_kind = |k| pooled.iter().filter(|a| kinds.get(a.as_str()) == Some(&k)).count();
            let any = test_users > 0;
            let pooled_diversity = match &history.pooled_last {
                Some(prev) if any && !pooled.is_empty() => Some(diversity(prev, &pooled, pooled.len())?),
                _ => None,
            };
            let pooled_novelty = if any && w > 0 && !pooled.is_empty() {
                Some(novelty(&pooled, &history.pooled_seen, pooled.len())?)
            } else {
                None
            };
            out.push(WeeklyEvalReport {
                week: w + 1,
                start: week.start,
                end: week.end,
                variant: *variant,
                rec_hot: count_kind(TrendKind::Hot),
                rec_flop: count_kind(TrendKind::Flop),
                total_hot: total(TrendKind::Hot),
                total_flop: total(TrendKind::Flop),
                test_users,
                diversity: mean(&divs),
                novelty: mean(&novs),
                accuracy: mean(&accs),
                pooled_diversity,
                pooled_novelty,
                pooled_accuracy: (truth_total > 0).then(|| hits as f64 / truth_total as f64),
            });

            history.pooled_seen.extend(pooled.iter().cloned());
            history.pooled_last = Some(pooled);
            for (user, apps) in lists {
                history.seen.entry(user.clone()).or_default().extend(apps.iter().cloned());
                history.last.insert(user, apps);
            }
        }
    }
    Ok(reports)
}
