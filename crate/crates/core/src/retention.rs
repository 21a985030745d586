//! Retention curves, their distribution across apps, and rank correlation.
//!
//! A user "continues" an app `d` days after first use when the span between
//! their first and last observed day is at least `d`. Users still active
//! within the quiet window before the end of the observation window are left
//! out of the cohort, since their span is not finished yet.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{Dataset, SpanScanner, UserSpan};
use crate::day::Day;
use crate::error::{Error, Result};

pub const DEFAULT_QUIET_WINDOW: u32 = 7;

#[derive(Clone, Debug, PartialEq)]
pub struct RetentionCurve {
    pub app_id: String,
    pub cohort_size: u32,
    /// Cohort members whose span is at least `d`, indexed by `d`.
    pub survivors: Vec<u32>,
    /// `survivors[d] / cohort_size`, indexed by `d`. Empty for an empty cohort.
    pub rates: Vec<f64>,
}

impl RetentionCurve {
    /// Builds the curve for `d = 0..=max_d` from the spans of one app.
    pub fn from_spans(
        app_id: &str,
        spans: &[UserSpan],
        window_end: Day,
        max_d: u32,
        quiet_window: u32,
    ) -> Self {
        let cutoff = window_end - quiet_window as i32;
        // histogram of span lengths capped at max_d, then suffix sums
        let mut survivors = vec![0u32; max_d as usize + 1];
        let mut cohort_size = 0u32;
        for span in spans.iter().filter(|s| s.last <= cutoff) {
            cohort_size += 1;
            survivors[(span.length() as usize).min(max_d as usize)] += 1;
        }
        for d in (0..max_d as usize).rev() {
            survivors[d] += survivors[d + 1];
        }
        if cohort_size == 0 {
            return RetentionCurve {
                app_id: app_id.to_string(),
                cohort_size: 0,
                survivors: Vec::new(),
                rates: Vec::new(),
            };
        }
        let rates = survivors
            .iter()
            .map(|&n| n as f64 / cohort_size as f64)
            .collect();
        RetentionCurve {
            app_id: app_id.to_string(),
            cohort_size,
            survivors,
            rates,
        }
    }

    pub fn rate(&self, d: u32) -> Option<f64> {
        self.rates.get(d as usize).copied()
    }

    pub fn max_d(&self) -> Option<u32> {
        self.rates.len().checked_sub(1).map(|d| d as u32)
    }
}

/// One span per distinct user of `app`, sorted by user.
pub fn user_spans(ds: &Dataset, app: &str) -> Result<Vec<UserSpan>> {
    let id = ds.require_app(app)?;
    Ok(SpanScanner::new(ds).scan(ds.app_records(id)))
}

pub fn retention_curve(ds: &Dataset, app: &str, max_d: u32, quiet_window: u32) -> Result<RetentionCurve> {
    let spans = user_spans(ds, app)?;
    let (_, window_end) = ds.window();
    Ok(RetentionCurve::from_spans(app, &spans, window_end, max_d, quiet_window))
}

/// Retention curves of every app, in app order.
pub fn retention_curves(ds: &Dataset, max_d: u32, quiet_window: u32) -> Vec<RetentionCurve> {
    let mut scanner = SpanScanner::new(ds);
    let (_, window_end) = ds.window();
    ds.app_ids()
        .map(|app| {
            let spans = scanner.scan(ds.app_records(app));
            RetentionCurve::from_spans(ds.app_name(app), &spans, window_end, max_d, quiet_window)
        })
        .collect()
}

fn rate_at(curve: &RetentionCurve, d: u32) -> Result<f64> {
    curve.rate(d).ok_or(Error::InvalidParameter {
        name: "d",
        reason: "beyond the computed range of a retention curve",
    })
}

/// Empirical CDF of `rate(d)` over curves whose cohort has at least
/// `min_users` members, as ascending `(rate, cumulative fraction)` steps.
pub fn retention_cdf(curves: &[RetentionCurve], d: u32, min_users: u32) -> Result<Vec<(f64, f64)>> {
    let mut rates = curves
        .iter()
        .filter(|c| c.cohort_size >= min_users && c.cohort_size > 0)
        .map(|c| rate_at(c, d))
        .collect::<Result<Vec<f64>>>()?;
    if rates.is_empty() {
        return Err(Error::Empty("population"));
    }
    rates.sort_unstable_by(f64::total_cmp);
    let n = rates.len() as f64;
    let mut steps: Vec<(f64, f64)> = Vec::new();
    for (i, &r) in rates.iter().enumerate() {
        let cumulative = (i + 1) as f64 / n;
        match steps.last_mut() {
            Some(last) if last.0 == r => last.1 = cumulative,
            _ => steps.push((r, cumulative)),
        }
    }
    Ok(steps)
}

/// Day-`d` retention aggregated over qualifying apps.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct RetentionSummary {
    pub d: u32,
    pub apps: usize,
    pub users: u64,
    /// Mean of per-app rates.
    pub macro_rate: f64,
    /// Pooled survivors over pooled cohorts.
    pub micro_rate: f64,
}

pub fn summarize(curves: &[RetentionCurve], d: u32, min_users: u32) -> Result<RetentionSummary> {
    let mut apps = 0usize;
    let mut rate_sum = 0.0;
    let mut users = 0u64;
    let mut survivors = 0u64;
    for c in curves.iter().filter(|c| c.cohort_size >= min_users && c.cohort_size > 0) {
        rate_sum += rate_at(c, d)?;
        apps += 1;
        users += c.cohort_size as u64;
        survivors += c.survivors[d as usize] as u64;
    }
    if apps == 0 {
        return Err(Error::Empty("population"));
    }
    Ok(RetentionSummary {
        d,
        apps,
        users,
        macro_rate: rate_sum / apps as f64,
        micro_rate: survivors as f64 / users as f64,
    })
}

/// 1-based ranks with ties replaced by their average rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j share rank (i+1 + j) / 2
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Spearman rank correlation, using average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "length",
            reason: "at least two observations are required",
        });
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let mean = (x.len() + 1) as f64 / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - mean, b - mean);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateRanks);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}
