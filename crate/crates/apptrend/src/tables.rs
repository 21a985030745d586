//! CSV renderings of analysis results. Every writer emits a header row and
//! returns the number of data rows written.

use std::collections::BTreeMap;
use std::io::Write;

use apptrend_core::evaluate::WeeklyEvalReport;
use apptrend_core::kmeans::{cluster_size_distribution, ClusterResult};
use apptrend_core::recommend::RecommendationList;
use apptrend_core::retention::RetentionCurve;
use apptrend_core::series::{ConsensusSeries, RelativeSeries};
use apptrend_core::trend::{CategoryBreakdown, TrendClassification, TrendKind};
use apptrend_core::DailySeries;

use crate::ingest::date_of;

pub type Result<T> = csv::Result<T>;

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn writer<W: Write>(out: W, header: &[String]) -> Result<csv::Writer<W>> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    Ok(w)
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

/// `app_id, cohort_size, rate_d<d>...`; rates are empty for empty cohorts.
pub fn retention<W: Write>(out: W, curves: &[RetentionCurve], days: &[u32]) -> Result<usize> {
    let mut cols = header(&["app_id", "cohort_size"]);
    cols.extend(days.iter().map(|d| format!("rate_d{d}")));
    let mut w = writer(out, &cols)?;
    for c in curves {
        let mut row = vec![c.app_id.clone(), c.cohort_size.to_string()];
        row.extend(days.iter().map(|&d| opt(c.rate(d))));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(curves.len())
}

pub fn classification<W: Write>(out: W, rows: &[TrendClassification]) -> Result<usize> {
    let mut w = writer(out, &header(&["app_id", "kind", "distance", "max_raw_users"]))?;
    for c in rows {
        w.write_record([c.app_id.clone(), c.kind.to_string(), num(c.distance), c.max_raw_users.to_string()])?;
    }
    w.flush()?;
    Ok(rows.len())
}

pub fn categories<W: Write>(out: W, rows: &[CategoryBreakdown]) -> Result<usize> {
    let mut w = writer(
        out,
        &header(&[
            "category",
            "apps",
            "marginal",
            "rest",
            "hot",
            "dominant",
            "flop",
            "unclassified",
            "marginal_pct",
            "hot_pct",
            "dominant_pct",
            "flop_pct",
            "mean_distance",
            "distance_variance",
        ]),
    )?;
    for b in rows {
        w.write_record([
            b.category.clone(),
            b.apps.to_string(),
            b.marginal.to_string(),
            b.rest.to_string(),
            b.hot.to_string(),
            b.dominant.to_string(),
            b.flop.to_string(),
            b.unclassified.to_string(),
            num(b.marginal_pct),
            num(b.hot_pct),
            num(b.dominant_pct),
            num(b.flop_pct),
            num(b.mean_distance),
            num(b.distance_variance),
        ])?;
    }
    w.flush()?;
    Ok(rows.len())
}

/// Long format: `category, members, index, value`.
pub fn consensus<W: Write>(out: W, rows: &[(String, ConsensusSeries)]) -> Result<usize> {
    let mut w = writer(out, &header(&["category", "members", "index", "value"]))?;
    let mut n = 0;
    for (category, c) in rows {
        for (i, v) in c.values.iter().enumerate() {
            w.write_record([category.clone(), c.member_count.to_string(), i.to_string(), num(*v)])?;
            n += 1;
        }
    }
    w.flush()?;
    Ok(n)
}

/// `index, value[, relative]` for a single category.
pub fn consensus_single<W: Write>(out: W, c: &ConsensusSeries, relative: Option<&RelativeSeries>) -> Result<usize> {
    let cols: &[&str] = if relative.is_some() { &["index", "value", "relative"] } else { &["index", "value"] };
    let mut w = writer(out, &header(cols))?;
    for (i, v) in c.values.iter().enumerate() {
        let mut row = vec![i.to_string(), num(*v)];
        if let Some(r) = relative {
            row.push(num(r.values[i]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(c.values.len())
}

pub struct RelativeRow<'a> {
    pub app_id: &'a str,
    pub category: &'a str,
    pub series: &'a RelativeSeries,
}

/// Long format: `app_id, category, slope, index, relative`.
pub fn relative<W: Write>(out: W, rows: &[RelativeRow]) -> Result<usize> {
    let mut w = writer(out, &header(&["app_id", "category", "slope", "index", "relative"]))?;
    let mut n = 0;
    for r in rows {
        let slope = num(r.series.slope());
        for (i, v) in r.series.values.iter().enumerate() {
            w.write_record([r.app_id, r.category, &slope, &i.to_string(), &num(*v)])?;
            n += 1;
        }
    }
    w.flush()?;
    Ok(n)
}

/// One row per cluster, largest first: size and centroid coordinates.
pub fn kmeans<W: Write>(out: W, result: &ClusterResult) -> Result<usize> {
    let mut w = writer(out, &header(&["cluster", "size", "auc", "peak", "slope", "variance"]))?;
    let mut sizes = cluster_size_distribution(result);
    let listed: Vec<usize> = sizes.iter().map(|&(c, _)| c).collect();
    sizes.extend((0..result.k).filter(|c| !listed.contains(c)).map(|c| (c, 0)));
    for &(c, size) in &sizes {
        let f = result.centroids[c];
        w.write_record([c.to_string(), size.to_string(), num(f.auc), num(f.peak), num(f.slope), num(f.variance)])?;
    }
    w.flush()?;
    Ok(sizes.len())
}

pub fn recommendations<W: Write>(out: W, list: &RecommendationList, kinds: &BTreeMap<String, TrendKind>) -> Result<usize> {
    let mut w = writer(out, &header(&["rank", "app_id", "P", "trend_kind"]))?;
    for (i, item) in list.items.iter().enumerate() {
        let kind = kinds.get(&item.app_id).copied().unwrap_or(TrendKind::Unclassified);
        w.write_record([(i + 1).to_string(), item.app_id.clone(), num(item.relevance), kind.to_string()])?;
    }
    w.flush()?;
    Ok(list.items.len())
}

/// One variant, one row per week.
pub fn evaluation<W: Write>(out: W, reports: &[WeeklyEvalReport]) -> Result<usize> {
    let mut w = writer(
        out,
        &header(&[
            "week",
            "rec_hot",
            "rec_flop",
            "total_hot",
            "total_flop",
            "div",
            "nov",
            "acc",
            "test_users",
            "pooled_div",
            "pooled_nov",
            "pooled_acc",
        ]),
    )?;
    for r in reports {
        w.write_record([
            r.week.to_string(),
            r.rec_hot.to_string(),
            r.rec_flop.to_string(),
            r.total_hot.to_string(),
            r.total_flop.to_string(),
            opt(r.diversity),
            opt(r.novelty),
            opt(r.accuracy),
            r.test_users.to_string(),
            opt(r.pooled_diversity),
            opt(r.pooled_novelty),
            opt(r.pooled_accuracy),
        ])?;
    }
    w.flush()?;
    Ok(reports.len())
}

/// Baseline and Flop-free variants side by side, with the accuracy change.
pub fn evaluation_comparison<W: Write>(out: W, baseline: &[WeeklyEvalReport], filtered: &[WeeklyEvalReport]) -> Result<usize> {
    let mut w = writer(
        out,
        &header(&[
            "week",
            "start",
            "end",
            "test_users",
            "rec_hot",
            "rec_flop",
            "total_hot",
            "total_flop",
            "div",
            "nov",
            "acc",
            "rec_hot_wo_flops",
            "rec_flop_wo_flops",
            "div_wo_flops",
            "nov_wo_flops",
            "acc_wo_flops",
            "acc_delta",
            "pooled_div",
            "pooled_nov",
            "pooled_acc",
            "pooled_div_wo_flops",
            "pooled_nov_wo_flops",
            "pooled_acc_wo_flops",
        ]),
    )?;
    for (b, f) in baseline.iter().zip(filtered) {
        let delta = match (b.accuracy, f.accuracy) {
            (Some(x), Some(y)) => Some(y - x),
            _ => None,
        };
        w.write_record([
            b.week.to_string(),
            date_of(b.start).to_string(),
            date_of(b.end).to_string(),
            b.test_users.to_string(),
            b.rec_hot.to_string(),
            b.rec_flop.to_string(),
            b.total_hot.to_string(),
            b.total_flop.to_string(),
            opt(b.diversity),
            opt(b.novelty),
            opt(b.accuracy),
            f.rec_hot.to_string(),
            f.rec_flop.to_string(),
            opt(f.diversity),
            opt(f.novelty),
            opt(f.accuracy),
            opt(delta),
            opt(b.pooled_diversity),
            opt(b.pooled_novelty),
            opt(b.pooled_accuracy),
            opt(f.pooled_diversity),
            opt(f.pooled_novelty),
            opt(f.pooled_accuracy),
        ])?;
    }
    w.flush()?;
    Ok(baseline.len().min(filtered.len()))
}

/// `date, users, missing` for one app.
pub fn daily_usage<W: Write>(out: W, series: &DailySeries) -> Result<usize> {
    let mut w = writer(out, &header(&["date", "users", "missing"]))?;
    for (i, &c) in series.counts.iter().enumerate() {
        w.write_record([date_of(series.start + i as i32).to_string(), c.to_string(), series.is_missing(i).to_string()])?;
    }
    w.flush()?;
    Ok(series.counts.len())
}
