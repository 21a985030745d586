//! Synthetic usage datasets with planted trend archetypes.
//!
//! Each app follows its archetype's canonical curve, scaled to a random peak
//! number of daily users. Gaussian noise is added on the normalized scale and
//! the result clipped to `[0, 1]` before scaling, so the realized peak never
//! exceeds the drawn one. Daily users are realized with churn: a fraction of
//! yesterday's users is kept and the rest is drawn afresh from the pool.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{AppId, CategoryMap, Dataset, Record, UserId};
use crate::day::Day;
use crate::error::{Error, Result};
use crate::trend::{canonical_series, TrendKind, DEFAULT_MARGINAL_GATE};

/// 2014-01-01.
pub const DEFAULT_START: Day = Day(16071);

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub hot: usize,
    pub flop: usize,
    pub dominant: usize,
    pub marginal: usize,
    pub users: usize,
    pub days: usize,
    /// Standard deviation of the noise on the normalized scale.
    pub noise_sigma: f64,
    pub seed: u64,
    pub start: Day,
    /// Peaks of non-Marginal apps are log-uniform in this range.
    pub peak_range: (f64, f64),
    /// Marginal peaks stay strictly below this.
    pub marginal_gate: u32,
    pub categories: usize,
    /// Share of yesterday's users kept, per archetype.
    pub retained: Retained,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Retained {
    pub hot: f64,
    pub flop: f64,
    pub dominant: f64,
    pub marginal: f64,
}

impl Default for Retained {
    fn default() -> Self {
        Retained {
            hot: 0.7,
            flop: 0.3,
            dominant: 0.9,
            marginal: 0.5,
        }
    }
}

impl Retained {
    fn of(&self, kind: TrendKind) -> f64 {
        match kind {
            TrendKind::Hot => self.hot,
            TrendKind::Flop => self.flop,
            TrendKind::Dominant => self.dominant,
            TrendKind::Marginal | TrendKind::Unclassified => self.marginal,
        }
    }
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            hot: 100,
            flop: 100,
            dominant: 100,
            marginal: 100,
            users: 5000,
            days: 365,
            noise_sigma: 0.0,
            seed: 42,
            start: DEFAULT_START,
            peak_range: (20.0, 100.0),
            marginal_gate: DEFAULT_MARGINAL_GATE,
            categories: 8,
            retained: Retained::default(),
        }
    }
}

impl SynthSpec {
    pub fn apps(&self) -> usize {
        self.hot + self.flop + self.dominant + self.marginal
    }

    fn validate(&self) -> Result<()> {
        let bad = |name, reason| Err(Error::InvalidParameter { name, reason });
        if self.apps() == 0 {
            return bad("apps", "at least one app is required");
        }
        if self.users == 0 {
            return bad("users", "must be positive");
        }
        if self.days < 2 {
            return bad("days", "must be at least 2");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise", "must be finite and non-negative");
        }
        let (lo, hi) = self.peak_range;
        if !(lo >= 1.0 && lo <= hi && hi.is_finite()) {
            return bad("peak range", "must satisfy 1 <= low <= high");
        }
        if self.marginal > 0 && self.marginal_gate < 2 {
            return bad("marginal gate", "must be at least 2 to plant Marginal apps");
        }
        if self.categories == 0 {
            return bad("categories", "must be positive");
        }
        let r = self.retained;
        if [r.hot, r.flop, r.dominant, r.marginal].iter().any(|x| !(0.0..=1.0).contains(x)) {
            return bad("retained", "must lie in [0, 1]");
        }
        Ok(())
    }

    /// Archetype of every app, in app order.
    fn kinds(&self) -> Vec<TrendKind> {
        [
            (TrendKind::Hot, self.hot),
            (TrendKind::Flop, self.flop),
            (TrendKind::Dominant, self.dominant),
            (TrendKind::Marginal, self.marginal),
        ]
        .into_iter()
        .flat_map(|(k, n)| core::iter::repeat_n(k, n))
        .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthDataset {
    pub dataset: Dataset,
    /// Planted archetype of every app.
    pub truth: BTreeMap<String, TrendKind>,
}

fn width(n: usize) -> usize {
    let mut w = 1;
    let mut x = n.saturating_sub(1);
    while x >= 10 {
        x /= 10;
        w += 1;
    }
    w
}

pub fn app_name(i: usize, total: usize) -> String {
    format!("app-{:0w$}", i, w = width(total))
}

pub fn user_name(i: usize, total: usize) -> String {
    format!("user-{:0w$}", i, w = width(total))
}

/// Generates the dataset described by `spec`; deterministic in `spec`.
pub fn generate(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let kinds = spec.kinds();
    let n_apps = kinds.len();
    let apps: Vec<String> = (0..n_apps).map(|i| app_name(i, n_apps)).collect();
    let users: Vec<String> = (0..spec.users).map(|i| user_name(i, spec.users)).collect();

    let mut curves: BTreeMap<TrendKind, Vec<f64>> = BTreeMap::new();
    let mut records = Vec::new();
    let mut today_mark = vec![u32::MAX; spec.users];
    let mut stamp = 0u32;
    let mut categories = CategoryMap::new();

    // Separate streams for volumes and identities keep each app independent
    // of every other app and of the order of generation.
    let stream = |i: usize, part: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(2 * i as u64 + part);
        rng
    };
    let counts: Vec<Vec<u32>> = kinds
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            let curve = curves.entry(kind).or_insert_with(|| canonical_series(kind, spec.days));
            daily_counts(&mut stream(i, 0), spec, kind, curve)
        })
        .collect();
    records.reserve_exact(counts.iter().flatten().map(|&c| c as usize).sum());
    for (i, &kind) in kinds.iter().enumerate() {
        realize(
            &mut stream(i, 1),
            spec,
            AppId(i as u32),
            &counts[i],
            spec.retained.of(kind),
            &mut today_mark,
            &mut stamp,
            &mut records,
        );
        categories.insert(&apps[i], &format!("cat-{}", i % spec.categories))?;
    }

    let window = (spec.start, spec.start + (spec.days as i32 - 1));
    let truth = apps.iter().cloned().zip(kinds.iter().copied()).collect();
    let dataset = Dataset::from_parts(apps, users, records, categories, Some(window))?;
    Ok(SynthDataset { dataset, truth })
}

/// Target distinct-user count per day.
fn daily_counts(rng: &mut ChaCha8Rng, spec: &SynthSpec, kind: TrendKind, curve: &[f64]) -> Vec<u32> {
    let peak = if kind == TrendKind::Marginal {
        rng.random_range(1..spec.marginal_gate) as f64
    } else {
        let (lo, hi) = spec.peak_range;
        libm::exp(rng.random_range(libm::log(lo)..=libm::log(hi)))
    };
    let noise = (spec.noise_sigma > 0.0).then(|| Normal::new(0.0, spec.noise_sigma).expect("validated sigma"));
    let cap = spec.users as f64;
    let mut counts: Vec<u32> = curve
        .iter()
        .map(|&v| {
            let v = match &noise {
                Some(n) => (v + n.sample(rng)).clamp(0.0, 1.0),
                None => v,
            };
            libm::round(peak * v).min(cap) as u32
        })
        .collect();
    if counts.iter().all(|&c| c == 0) {
        // Keep every app observable: one user on the curve's highest day.
        let top = curve
            .iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v > curve[best] { i } else { best });
        counts[top] = 1;
    }
    counts
}

#[allow(clippy::too_many_arguments)]
fn realize(
    rng: &mut ChaCha8Rng,
    spec: &SynthSpec,
    app: AppId,
    counts: &[u32],
    retained: f64,
    mark: &mut [u32],
    stamp: &mut u32,
    out: &mut Vec<Record>,
) {
    let mut yesterday: Vec<u32> = Vec::new();
    let mut today: Vec<u32> = Vec::new();
    for (d, &count) in counts.iter().enumerate() {
        let count = count as usize;
        *stamp = stamp.wrapping_add(1);
        if *stamp == u32::MAX {
            mark.fill(u32::MAX);
            *stamp = 0;
        }
        today.clear();
        let keep = (libm::round(retained * yesterday.len() as f64) as usize).min(count);
        for k in index::sample(rng, yesterday.len(), keep) {
            let u = yesterday[k];
            mark[u as usize] = *stamp;
            today.push(u);
        }
        while today.len() < count {
            let u = rng.random_range(0..spec.users as u32);
            if mark[u as usize] != *stamp {
                mark[u as usize] = *stamp;
                today.push(u);
            }
        }
        today.sort_unstable();
        let day = spec.start + d as i32;
        out.extend(today.iter().map(|&u| Record {
            app,
            day,
            user: UserId(u),
        }));
        core::mem::swap(&mut yesterday, &mut today);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(kind: TrendKind) -> SynthSpec {
        let mut s = SynthSpec {
            hot: 0,
            flop: 0,
            dominant: 0,
            marginal: 0,
            users: 500,
            days: 50,
            ..SynthSpec::default()
        };
        match kind {
            TrendKind::Hot => s.hot = 1,
            TrendKind::Flop => s.flop = 1,
            TrendKind::Dominant => s.dominant = 1,
            _ => s.marginal = 1,
        }
        s
    }

    #[test]
    fn noise_free_hot_is_a_scaled_ramp() {
        let spec = SynthSpec {
            peak_range: (100.0, 100.0),
            ..one(TrendKind::Hot)
        };
        let out = generate(&spec).unwrap();
        let raw = out.dataset.daily_usage("app-0").unwrap();
        // Day 0 has no users, so the series starts on day 1.
        assert_eq!(raw.start, spec.start + 1);
        for (i, &c) in raw.counts.iter().enumerate() {
            let d = (i + 1) as f64;
            assert_eq!(c as f64, libm::round(100.0 * d / 49.0));
        }
        assert_eq!(out.truth["app-0"], TrendKind::Hot);
    }

    #[test]
    fn marginal_stays_below_gate() {
        for seed in 0..20 {
            let spec = SynthSpec {
                seed,
                noise_sigma: 0.3,
                ..one(TrendKind::Marginal)
            };
            let out = generate(&spec).unwrap();
            let raw = out.dataset.daily_usage("app-0").unwrap();
            assert!(raw.max_count() < DEFAULT_MARGINAL_GATE);
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let spec = SynthSpec {
            users: 300,
            days: 40,
            hot: 3,
            flop: 3,
            dominant: 3,
            marginal: 3,
            noise_sigma: 0.1,
            ..SynthSpec::default()
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = generate(&SynthSpec { seed: 7, ..spec.clone() }).unwrap();
        assert_ne!(other.dataset, generate(&spec).unwrap().dataset);
    }

    #[test]
    fn window_and_categories() {
        let spec = SynthSpec {
            users: 100,
            days: 30,
            hot: 2,
            flop: 2,
            dominant: 2,
            marginal: 2,
            categories: 3,
            ..SynthSpec::default()
        };
        let out = generate(&spec).unwrap();
        assert_eq!(out.dataset.window(), (spec.start, spec.start + 29));
        assert_eq!(out.dataset.apps().len(), 8);
        assert_eq!(out.dataset.categories().len(), 8);
        assert_eq!(out.dataset.categories().get("app-4"), Some("cat-1"));
    }

    #[test]
    fn full_retention_keeps_users() {
        let spec = SynthSpec {
            peak_range: (30.0, 30.0),
            retained: Retained {
                dominant: 1.0,
                ..Retained::default()
            },
            ..one(TrendKind::Dominant)
        };
        let out = generate(&spec).unwrap();
        let recs = out.dataset.records();
        let users_on = |d: i32| -> Vec<u32> { recs.iter().filter(|r| r.day == spec.start + d).map(|r| r.user.0).collect() };
        // The Dominant curve only ripples, so each day shares most users with the previous one.
        let (a, b) = (users_on(0), users_on(1));
        let shared = b.iter().filter(|u| a.contains(u)).count();
        assert_eq!(shared, a.len().min(b.len()));
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&SynthSpec { days: 1, ..SynthSpec::default() }).is_err());
        assert!(generate(&SynthSpec { users: 0, ..SynthSpec::default() }).is_err());
        assert!(generate(&SynthSpec { noise_sigma: -1.0, ..SynthSpec::default() }).is_err());
        assert!(generate(&SynthSpec { hot: 0, flop: 0, dominant: 0, marginal: 0, ..SynthSpec::default() }).is_err());
    }

    #[test]
    fn names_sort_numerically() {
        assert_eq!(app_name(7, 1000), "app-007");
        assert_eq!(user_name(0, 1), "user-0");
        assert_eq!(user_name(9, 10), "user-9");
        assert_eq!(user_name(10, 11), "user-10");
    }
}
