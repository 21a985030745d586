//! Usage scores, Slope One relevance prediction and trend-aware re-ranking.
//!
//! The deviation between two apps is the mean, over users who used both, of
//! `score(j) - score(i)`. A candidate app `j` is scored for user `u` as the
//! mean of `dev(i, j) + score_u(i)` over the apps `i` of `u` that share at
//! least one user with `j`.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::dataset::{AppId, Dataset, SpanScanner, UserId, UserSpan};
use crate::day::Day;
use crate::error::{Error, Result};
use crate::trend::TrendKind;

/// Days after the last use at which the recency component reaches zero.
pub const RECENCY_HORIZON_DAYS: f64 = 90.0;
/// Active days at which the duration component saturates.
pub const DURATION_CAP_DAYS: f64 = 30.0;
/// Size of the candidate universe of most used apps.
pub const DEFAULT_UNIVERSE: usize = 1000;
pub const DEFAULT_LIST_LEN: usize = 20;

/// Weights of the recency, frequency and duration components of a usage score.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct UsageWeights {
    pub recency: f64,
    pub frequency: f64,
    pub days: f64,
}

impl UsageWeights {
    pub fn new(recency: f64, frequency: f64, days: f64) -> Result<Self> {
        let ws = [recency, frequency, days];
        if ws.iter().any(|w| w.is_nan() || *w < 0.0) {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: "must be non-negative",
            });
        }
        if libm::fabs(ws.iter().sum::<f64>() - 1.0) > 1e-9 {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: "must sum to 1",
            });
        }
        Ok(UsageWeights { recency, frequency, days })
    }
}

impl Default for UsageWeights {
    fn default() -> Self {
        UsageWeights {
            recency: 1.0 / 3.0,
            frequency: 1.0 / 3.0,
            days: 1.0 / 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UsageScore {
    pub user_id: String,
    pub app_id: String,
    pub score: f64,
}

/// Score of a span observed up to and including `as_of`.
pub fn span_score(span: &UserSpan, as_of: Day, weights: &UsageWeights) -> f64 {
    let recency = (1.0 - (as_of - span.last) as f64 / RECENCY_HORIZON_DAYS).max(0.0);
    let frequency = span.active_days as f64 / (as_of - span.first + 1) as f64;
    let duration = (span.active_days as f64 / DURATION_CAP_DAYS).min(1.0);
    (weights.recency * recency + weights.frequency * frequency + weights.days * duration).clamp(0.0, 1.0)
}

/// Usage score of `user` for `app` from records on or before `as_of`.
pub fn usage_score(
    ds: &Dataset,
    user: &str,
    app: &str,
    as_of: Day,
    weights: &UsageWeights,
) -> Result<UsageScore> {
    let app_id = ds.require_app(app)?;
    let user_id = ds.user_id(user).ok_or_else(|| Error::UnknownUser(user.to_string()))?;
    let mut span: Option<UserSpan> = None;
    for r in ds.app_records_until(app_id, as_of).iter().filter(|r| r.user == user_id) {
        match &mut span {
            None => {
                span = Some(UserSpan {
                    user: user_id,
                    app: app_id,
                    first: r.day,
                    last: r.day,
                    active_days: 1,
                })
            }
            Some(s) => {
                s.last = r.day;
                s.active_days += 1;
            }
        }
    }
    let span = span.ok_or(Error::InvalidParameter {
        name: "as_of",
        reason: "user has no usage of the app on or before this day",
    })?;
    Ok(UsageScore {
        user_id: user.to_string(),
        app_id: app.to_string(),
        score: span_score(&span, as_of, weights),
    })
}

/// Usage scores of one user; the key set is the set of apps the user used.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UserProfile {
    pub user_id: String,
    pub scores: BTreeMap<String, f64>,
}

impl UserProfile {
    pub fn new(user_id: &str) -> Self {
        UserProfile {
            user_id: user_id.to_string(),
            scores: BTreeMap::new(),
        }
    }

    pub fn with_scores<'a>(user_id: &str, scores: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        UserProfile {
            user_id: user_id.to_string(),
            scores: scores.into_iter().map(|(a, s)| (a.to_string(), s)).collect(),
        }
    }

    pub fn uses(&self, app: &str) -> bool {
        self.scores.contains_key(app)
    }
}

/// The `m` apps with the most distinct user-days on or before `until`,
/// most used first, ties by app order.
pub fn top_apps(ds: &Dataset, until: Day, m: usize) -> Vec<AppId> {
    let mut usage: Vec<(usize, AppId)> = ds
        .app_ids()
        .map(|a| (ds.app_records_until(a, until).len(), a))
        .filter(|&(n, _)| n > 0)
        .collect();
    usage.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    usage.truncate(m);
    usage.into_iter().map(|(_, a)| a).collect()
}

/// Profiles over `apps` from records on or before `as_of`. With `users`,
/// only those users are profiled. Users without any usage are left out;
/// output is in user order.
pub fn build_profiles(
    ds: &Dataset,
    users: Option<&[UserId]>,
    apps: &[AppId],
    as_of: Day,
    weights: &UsageWeights,
) -> Vec<UserProfile> {
    let keep: Option<Vec<bool>> = users.map(|us| {
        let mut keep = vec![false; ds.users().len()];
        for u in us {
            keep[u.index()] = true;
        }
        keep
    });
    let mut by_user: BTreeMap<UserId, UserProfile> = BTreeMap::new();
    let mut scanner = SpanScanner::new(ds);
    for &app in apps {
        let name = ds.app_name(app);
        for span in scanner.scan(ds.app_records_until(app, as_of)) {
            if keep.as_ref().is_some_and(|k| !k[span.user.index()]) {
                continue;
            }
            by_user
                .entry(span.user)
                .or_insert_with(|| UserProfile::new(ds.user_name(span.user)))
                .scores
                .insert(name.to_string(), span_score(&span, as_of, weights));
        }
    }
    by_user.into_values().collect()
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Deviation {
    /// Mean of `score(j) - score(i)` over co-users; 0 without support.
    pub dev: f64,
    /// Number of users who used both apps.
    pub support: u32,
}

/// Deviation of `j` relative to `i`, evaluated directly from the profiles.
pub fn deviation(profiles: &[UserProfile], i: &str, j: &str) -> Deviation {
    let mut sum = 0.0;
    let mut support = 0u32;
    for p in profiles {
        if let (Some(si), Some(sj)) = (p.scores.get(i), p.scores.get(j)) {
            sum += sj - si;
            support += 1;
        }
    }
    Deviation {
        dev: if support == 0 { 0.0 } else { sum / support as f64 },
        support,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecommendedItem {
    pub app_id: String,
    pub relevance: f64,
}

/// Ranked recommendations for one user; at most `n` items once truncated.
#[derive(Clone, Debug, PartialEq)]
pub struct RecommendationList {
    pub user_id: String,
    pub items: Vec<RecommendedItem>,
    pub n: usize,
}

impl RecommendationList {
    pub fn app_ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|i| i.app_id.as_str())
    }

    fn sort(&mut self) {
        self.items.sort_by(by_relevance);
    }
}

/// Relevance descending, then app id ascending.
fn by_relevance(a: &RecommendedItem, b: &RecommendedItem) -> Ordering {
    b.relevance.total_cmp(&a.relevance).then_with(|| a.app_id.cmp(&b.app_id))
}

/// Pairwise deviation table over every app that appears in the training profiles.
#[derive(Clone, Debug)]
pub struct SlopeOne {
    apps: Vec<String>,
    sums: Vec<f64>,
    support: Vec<u32>,
}

impl SlopeOne {
    pub fn fit(profiles: &[UserProfile]) -> Self {
        let mut apps: Vec<String> = profiles.iter().flat_map(|p| p.scores.keys().cloned()).collect();
        apps.sort_unstable();
        apps.dedup();
        let m = apps.len();
        let mut sums = vec![0.0; m * m];
        let mut support = vec![0u32; m * m];
        let mut rated: Vec<(usize, f64)> = Vec::new();
        for p in profiles {
            rated.clear();
            rated.extend(p.scores.iter().map(|(a, &s)| (index_of(&apps, a).expect("app collected above"), s)));
            for &(a, sa) in &rated {
                let row = a * m;
                for &(b, sb) in &rated {
                    if a != b {
                        sums[row + b] += sb - sa;
                        support[row + b] += 1;
                    }
                }
            }
        }
        SlopeOne { apps, sums, support }
    }

    pub fn apps(&self) -> &[String] {
        &self.apps
    }

    pub fn deviation(&self, i: &str, j: &str) -> Deviation {
        match (index_of(&self.apps, i), index_of(&self.apps, j)) {
            (Some(a), Some(b)) if a != b => {
                let k = a * self.apps.len() + b;
                let support = self.support[k];
                Deviation {
                    dev: if support == 0 { 0.0 } else { self.sums[k] / support as f64 },
                    support,
                }
            }
            _ => Deviation { dev: 0.0, support: 0 },
        }
    }

    /// Every candidate with at least one co-used app, ranked.
    pub fn rank(&self, profile: &UserProfile) -> Result<RecommendationList> {
        if profile.scores.is_empty() {
            return Err(Error::ColdUser(profile.user_id.clone()));
        }
        let m = self.apps.len();
        let mut acc = vec![0.0; m];
        let mut count = vec![0u32; m];
        let mut own = vec![false; m];
        for (app, &score) in &profile.scores {
            let Some(i) = index_of(&self.apps, app) else {
                continue;
            };
            own[i] = true;
            let row = i * m;
            for j in 0..m {
                let support = self.support[row + j];
                if support > 0 {
                    acc[j] += self.sums[row + j] / support as f64 + score;
                    count[j] += 1;
                }
            }
        }
        let items: Vec<RecommendedItem> = (0..m)
            .filter(|&j| !own[j] && count[j] > 0)
            .map(|j| RecommendedItem {
                app_id: self.apps[j].clone(),
                relevance: acc[j] / count[j] as f64,
            })
            .collect();
        let mut list = RecommendationList {
            user_id: profile.user_id.clone(),
            n: items.len(),
            items,
        };
        list.sort();
        Ok(list)
    }

    pub fn recommend(&self, profile: &UserProfile, n: usize) -> Result<RecommendationList> {
        let mut list = self.rank(profile)?;
        list.n = n;
        list.items.truncate(n);
        Ok(list)
    }
}

fn index_of(apps: &[String], app: &str) -> Option<usize> {
    apps.binary_search_by(|a| a.as_str().cmp(app)).ok()
}

/// Top-`n` Slope One recommendations for `user`, fitted on all `profiles`.
pub fn slope_one(profiles: &[UserProfile], user: &str, n: usize) -> Result<RecommendationList> {
    let profile = profiles
        .iter()
        .find(|p| p.user_id == user)
        .ok_or_else(|| Error::ColdUser(user.to_string()))?;
    SlopeOne::fit(profiles).recommend(profile, n)
}

/// Which trend kinds to drop from recommendations and how to scale the rest.
#[derive(Clone, Debug, PartialEq)]
pub struct TrendPolicy {
    pub drop: Vec<TrendKind>,
    pub boost: BTreeMap<TrendKind, f64>,
}

impl TrendPolicy {
    /// Keeps everything unchanged.
    pub fn identity() -> Self {
        TrendPolicy {
            drop: Vec::new(),
            boost: BTreeMap::new(),
        }
    }

    pub fn drop_flops(boost_hot: f64) -> Self {
        TrendPolicy {
            drop: vec![TrendKind::Flop],
            boost: [(TrendKind::Hot, boost_hot)].into_iter().collect(),
        }
    }
}

impl Default for TrendPolicy {
    fn default() -> Self {
        Self::drop_flops(1.0)
    }
}

/// Removes dropped kinds, rescales boosted kinds and re-ranks. `list` may
/// hold more than `list.n` candidates; the result refills from them and is
/// truncated to `list.n`. Apps without a classification count as Unclassified.
pub fn trend_filter(
    list: &RecommendationList,
    classifications: &BTreeMap<String, TrendKind>,
    policy: &TrendPolicy,
) -> RecommendationList {
    trend_filter_top(list, classifications, policy, list.n)
}

/// [`trend_filter`] keeping the best `n` items regardless of `list.n`.
pub fn trend_filter_top(
    list: &RecommendationList,
    classifications: &BTreeMap<String, TrendKind>,
    policy: &TrendPolicy,
    n: usize,
) -> RecommendationList {
    let kind_of = |app: &str| classifications.get(app).copied().unwrap_or(TrendKind::Unclassified);
    let mut kept: Vec<(usize, f64)> = list
        .items
        .iter()
        .enumerate()
        .filter_map(|(i, item)| {
            let kind = kind_of(&item.app_id);
            if policy.drop.contains(&kind) {
                return None;
            }
            Some((i, item.relevance * policy.boost.get(&kind).copied().unwrap_or(1.0)))
        })
        .collect();
    kept.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| list.items[a.0].app_id.cmp(&list.items[b.0].app_id))
    });
    kept.truncate(n);
    RecommendationList {
        user_id: list.user_id.clone(),
        items: kept
            .into_iter()
            .map(|(i, relevance)| RecommendedItem {
                app_id: list.items[i].app_id.clone(),
                relevance,
            })
            .collect(),
        n,
    }
}
