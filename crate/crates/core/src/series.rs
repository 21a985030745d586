//! Normalized usage series and the operations that compare them: group
//! consensus, relative performance against a group, lifecycle alignment
//! against a prototype, and peak detection.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::DailySeries;
use crate::error::{Error, Result};

/// Default number of points every series is resampled to.
pub const DEFAULT_LEN: usize = 100;
pub const DEFAULT_PEAK_PROMINENCE: f64 = 0.25;
/// Resampled points skipped by peak detection to step over the initial slide.
pub const DEFAULT_PEAK_WARMUP: usize = 5;

/// A usage series scaled into `[0, 1]` by its peak and resampled to a fixed length.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedSeries {
    pub app_id: Option<String>,
    pub values: Vec<f64>,
    /// Peak distinct-user count before normalization.
    pub max_raw: u32,
    /// Positions whose value depends on an interpolated day.
    pub missing_mask: Vec<bool>,
}

impl NormalizedSeries {
    /// Wraps already-normalized values, e.g. a prototype or a synthetic curve.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("series"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter {
                name: "series",
                reason: "values must lie in [0, 1]",
            });
        }
        let missing_mask = vec![false; values.len()];
        Ok(NormalizedSeries {
            app_id: None,
            values,
            max_raw: 0,
            missing_mask,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Pointwise mean of a group of normalized series.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsensusSeries {
    pub values: Vec<f64>,
    pub member_count: usize,
}

/// An app's normalized series minus its group consensus.
#[derive(Clone, Debug, PartialEq)]
pub struct RelativeSeries {
    pub values: Vec<f64>,
}

impl RelativeSeries {
    /// Least-squares slope over the unit domain; positive when the app
    /// gains on its group.
    pub fn slope(&self) -> f64 {
        least_squares_slope(&self.values)
    }
}

/// Result of aligning a series against a prototype.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Alignment {
    pub shift: usize,
    pub stage: f64,
    pub residual: f64,
}

/// Linear resampling of `values` onto `len` evenly spaced points of the same domain.
pub fn resample(values: &[f64], len: usize) -> Vec<f64> {
    let n = values.len();
    if n == 0 || len == 0 {
        return Vec::new();
    }
    if len == 1 || n == 1 {
        return vec![values[0]; len];
    }
    (0..len)
        .map(|k| {
            let (lo, frac) = grid_position(k, n, len);
            lerp(values, lo, frac)
        })
        .collect()
}

/// Position of output point `k` on an `n`-point source grid, as the lower
/// source index and the fractional offset toward the next one.
fn grid_position(k: usize, n: usize, len: usize) -> (usize, f64) {
    let p = (k * (n - 1)) as f64 / (len - 1) as f64;
    let lo = (libm::floor(p) as usize).min(n - 1);
    (lo, p - lo as f64)
}

fn lerp(values: &[f64], lo: usize, frac: f64) -> f64 {
    if frac == 0.0 || lo + 1 >= values.len() {
        values[lo]
    } else {
        values[lo] + (values[lo + 1] - values[lo]) * frac
    }
}

/// Normalizes raw daily counts: zero (missing) days are linearly
/// interpolated between their nearest observed neighbours, values are divided
/// by the series maximum, and the result is resampled to `len` points.
pub fn normalize(raw: &DailySeries, len: usize) -> Result<NormalizedSeries> {
    let mut s = normalize_counts(&raw.counts, len)?;
    s.app_id = Some(raw.app_id.clone());
    Ok(s)
}

pub fn normalize_counts(counts: &[u32], len: usize) -> Result<NormalizedSeries> {
    if len < 2 {
        return Err(Error::InvalidParameter {
            name: "resample length",
            reason: "must be at least 2",
        });
    }
    let max_raw = counts.iter().copied().max().unwrap_or(0);
    if max_raw == 0 {
        return Err(Error::NoUsage);
    }
    // Ratios of observed counts are exact under positive scaling of the
    // counts, so everything downstream is too.
    let max = max_raw as f64;
    let mut ratios: Vec<f64> = counts.iter().map(|&c| c as f64 / max).collect();
    fill_gaps(&mut ratios, counts);

    let n = ratios.len();
    let mut values = Vec::with_capacity(len);
    let mut missing_mask = Vec::with_capacity(len);
    for k in 0..len {
        if n == 1 {
            values.push(ratios[0]);
            missing_mask.push(false);
            continue;
        }
        let (lo, frac) = grid_position(k, n, len);
        values.push(lerp(&ratios, lo, frac));
        let hi_missing = frac > 0.0 && lo + 1 < n && counts[lo + 1] == 0;
        missing_mask.push(counts[lo] == 0 || hi_missing);
    }

    // Resampling can fall between the peak day and its neighbours.
    let peak = values.iter().copied().fold(0.0, f64::max);
    if peak < 1.0 {
        for v in &mut values {
            *v /= peak;
        }
    }

    Ok(NormalizedSeries {
        app_id: None,
        values,
        max_raw,
        missing_mask,
    })
}

/// Replaces values at zero-count positions by linear interpolation between
/// the nearest observed neighbours; leading and trailing gaps copy the
/// nearest observed value. At least one count must be positive.
fn fill_gaps(values: &mut [f64], counts: &[u32]) {
    let observed: Vec<usize> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, _)| i)
        .collect();
    let first = observed[0];
    let last = observed[observed.len() - 1];
    let (head, tail) = (values[first], values[last]);
    values[..first].fill(head);
    values[last + 1..].fill(tail);
    for pair in observed.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (va, vb) = (values[a], values[b]);
        for (k, v) in values[a + 1..b].iter_mut().enumerate() {
            *v = va + (vb - va) * (k + 1) as f64 / (b - a) as f64;
        }
    }
}

/// Pointwise arithmetic mean of the group.
pub fn consensus<'a, I>(group: I) -> Result<ConsensusSeries>
where
    I: IntoIterator<Item = &'a NormalizedSeries>,
{
    let mut sums: Vec<f64> = Vec::new();
    let mut member_count = 0usize;
    for s in group {
        if member_count == 0 {
            sums = s.values.clone();
        } else {
            if s.len() != sums.len() {
                return Err(Error::LengthMismatch {
                    expected: sums.len(),
                    found: s.len(),
                });
            }
            for (acc, v) in sums.iter_mut().zip(&s.values) {
                *acc += v;
            }
        }
        member_count += 1;
    }
    if member_count == 0 {
        return Err(Error::Empty("group"));
    }
    let n = member_count as f64;
    let values = sums.into_iter().map(|v| (v / n).clamp(0.0, 1.0)).collect();
    Ok(ConsensusSeries { values, member_count })
}

pub fn relative_performance(app: &NormalizedSeries, cat: &ConsensusSeries) -> Result<RelativeSeries> {
    if app.len() != cat.values.len() {
        return Err(Error::LengthMismatch {
            expected: cat.values.len(),
            found: app.len(),
        });
    }
    let values = app.values.iter().zip(&cat.values).map(|(a, c)| a - c).collect();
    Ok(RelativeSeries { values })
}

/// Finds how far into the prototype's lifecycle the app is: the shift `s`
/// minimizing the mean squared error between the app and the prototype
/// advanced by `s` points (indices past the end hold the prototype's final
/// value). Ties go to the smallest shift. `stage` is `(s + L) / (2L)`.
pub fn align_stage(app: &NormalizedSeries, proto: &NormalizedSeries) -> Result<Alignment> {
    if app.is_empty() || proto.is_empty() {
        return Err(Error::Empty("series"));
    }
    let len = proto.len();
    let resampled;
    let app_values: &[f64] = if app.len() == len {
        &app.values
    } else {
        resampled = resample(&app.values, len);
        &resampled
    };
    let last = proto.values[len - 1];
    let mut best = Alignment {
        shift: 0,
        stage: 0.5,
        residual: f64::INFINITY,
    };
    for shift in 0..len {
        let sse: f64 = app_values
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let p = proto.values.get(i + shift).copied().unwrap_or(last);
                (a - p) * (a - p)
            })
            .sum();
        let mse = sse / len as f64;
        if mse < best.residual {
            best = Alignment {
                shift,
                stage: (shift + len) as f64 / (2 * len) as f64,
                residual: mse,
            };
        }
    }
    Ok(best)
}

/// Topographic prominence of a local maximum at `i`: its height above the
/// higher of the two lowest points separating it from higher ground (or the
/// series ends) on either side.
pub fn prominence(series: &[f64], i: usize) -> f64 {
    let peak = series[i];
    let mut left_min = peak;
    for &v in series[..i].iter().rev() {
        if v > peak {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = peak;
    for &v in &series[i + 1..] {
        if v > peak {
            break;
        }
        right_min = right_min.min(v);
    }
    peak - left_min.max(right_min)
}

/// Indices after `warmup` holding a strict local maximum with prominence of
/// at least `min_prominence`, ascending.
pub fn detect_peaks(series: &[f64], min_prominence: f64, warmup: usize) -> Vec<usize> {
    if series.len() < 3 {
        return Vec::new();
    }
    (warmup + 1..series.len() - 1)
        .filter(|&i| series[i] > series[i - 1] && series[i] > series[i + 1])
        .filter(|&i| prominence(series, i) >= min_prominence)
        .collect()
}

/// Least-squares slope of `values` against evenly spaced points on `[0, 1]`.
pub fn least_squares_slope(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    // Centered abscissae 2i - (n - 1) are exact integers summing to zero;
    // pairing mirrored points keeps a constant series at exactly zero.
    let sxy: f64 = (0..n / 2)
        .map(|i| (n - 1 - 2 * i) as f64 * (values[n - 1 - i] - values[i]))
        .sum();
    6.0 * sxy / (n as f64 * (n + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::day::Day;

    fn raw(counts: &[u32]) -> DailySeries {
        DailySeries {
            app_id: "a".into(),
            start: Day(0),
            counts: counts.to_vec(),
        }
    }

    fn series(values: &[f64]) -> NormalizedSeries {
        NormalizedSeries::from_values(values.to_vec()).unwrap()
    }

    #[test]
    fn normalize_divides_by_max() {
        let s = normalize(&raw(&[2, 4, 8]), 3).unwrap();
        assert_eq!(s.values, [0.25, 0.5, 1.0]);
        assert_eq!(s.max_raw, 8);
        assert_eq!(s.app_id.as_deref(), Some("a"));
    }

    #[test]
    fn normalize_interpolates_gaps() {
        let s = normalize(&raw(&[4, 0, 2]), 3).unwrap();
        assert_eq!(s.values, [1.0, 0.75, 0.5]);
        assert_eq!(s.missing_mask, [false, true, false]);
    }

    #[test]
    fn normalize_is_scale_invariant() {
        let base = normalize(&raw(&[2, 4, 8]), 3).unwrap();
        for k in [3u32, 7, 1000] {
            let scaled = normalize(&raw(&[2 * k, 4 * k, 8 * k]), 3).unwrap();
            assert_eq!(scaled.values, base.values);
        }
    }

    #[test]
    fn normalize_boundary_gaps_take_nearest_value() {
        let s = normalize_counts(&[0, 2, 0, 4, 0], 5).unwrap();
        assert_eq!(s.values, [0.5, 0.5, 0.75, 1.0, 1.0]);
    }

    #[test]
    fn normalize_rejects_no_usage() {
        assert_eq!(normalize(&raw(&[0, 0]), 3), Err(Error::NoUsage));
        assert_eq!(normalize(&raw(&[]), 3), Err(Error::NoUsage));
        assert!(normalize(&raw(&[1]), 1).is_err());
    }

    #[test]
    fn normalize_single_day_is_flat() {
        let s = normalize(&raw(&[7]), 4).unwrap();
        assert_eq!(s.values, [1.0; 4]);
    }

    #[test]
    fn normalize_keeps_a_unit_peak_after_resampling() {
        // the peak day falls between output grid points
        let s = normalize_counts(&[1, 2, 10, 2, 1, 1], 4).unwrap();
        assert!(s.values.contains(&1.0));
        assert!(s.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn resample_upsamples_linearly() {
        assert_eq!(resample(&[0.0, 1.0], 5), [0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(resample(&[0.3], 3), [0.3; 3]);
    }

    #[test]
    fn consensus_means() {
        let c = consensus([&series(&[0.0, 1.0]), &series(&[1.0, 0.0])]).unwrap();
        assert_eq!(c.values, [0.5, 0.5]);
        assert_eq!(c.member_count, 2);
        let single = series(&[0.2, 0.9]);
        assert_eq!(consensus([&single]).unwrap().values, single.values);
        let ones = series(&[1.0; 4]);
        assert_eq!(consensus([&ones, &ones, &ones]).unwrap().values, [1.0; 4]);
    }

    #[test]
    fn consensus_errors() {
        assert_eq!(consensus(core::iter::empty()), Err(Error::Empty("group")));
        let r = consensus([&series(&[0.0, 1.0]), &series(&[1.0])]);
        assert!(matches!(r, Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn relative_performance_cases() {
        let c = ConsensusSeries {
            values: vec![0.5, 0.5],
            member_count: 3,
        };
        let flat = relative_performance(&series(&[1.0, 1.0]), &c).unwrap();
        assert_eq!(flat.values, [0.5, 0.5]);
        let rising = relative_performance(&series(&[0.0, 1.0]), &c).unwrap();
        assert_eq!(rising.values, [-0.5, 0.5]);
        assert!(rising.slope() > 0.0);
        let same = relative_performance(&series(&[0.5, 0.5]), &c).unwrap();
        assert_eq!(same.values, [0.0, 0.0]);
        assert!(relative_performance(&series(&[0.5]), &c).is_err());
    }

    #[test]
    fn align_identical_series() {
        let p = series(&[0.0, 0.25, 0.5, 1.0]);
        let a = align_stage(&p, &p).unwrap();
        assert_eq!((a.shift, a.residual, a.stage), (0, 0.0, 0.5));
    }

    #[test]
    fn align_constant_series_prefers_smallest_shift() {
        let a = align_stage(&series(&[0.6; 10]), &series(&[0.6; 10])).unwrap();
        assert_eq!((a.shift, a.residual), (0, 0.0));
    }

    #[test]
    fn align_resamples_shorter_app() {
        let proto = series(&resample(&[0.0, 1.0], 9));
        let app = series(&[0.0, 1.0]);
        let a = align_stage(&app, &proto).unwrap();
        assert_eq!((a.shift, a.residual), (0, 0.0));
    }

    #[test]
    fn peaks_after_warmup() {
        assert_eq!(detect_peaks(&[1.0, 0.2, 0.9, 0.2], 0.5, 1), [2]);
        assert_eq!(detect_peaks(&[1.0, 0.2, 0.9, 0.2], 0.5, 2), Vec::<usize>::new());
        assert_eq!(detect_peaks(&[1.0, 0.8, 0.5, 0.3, 0.1], 0.01, 0), Vec::<usize>::new());
    }

    #[test]
    fn prominence_uses_higher_base() {
        let s = [0.0, 0.6, 0.1, 0.5, 0.3, 0.4, 0.0];
        assert!((prominence(&s, 3) - 0.4).abs() < 1e-12);
        assert!((prominence(&s, 5) - 0.1).abs() < 1e-12);
        assert!((prominence(&s, 1) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn plateaus_are_not_peaks() {
        assert!(detect_peaks(&[0.0, 1.0, 1.0, 0.0], 0.1, 0).is_empty());
    }

    #[test]
    fn slope_of_ramps() {
        assert!((least_squares_slope(&[0.0, 0.5, 1.0]) - 1.0).abs() < 1e-15);
        assert!((least_squares_slope(&[1.0, 0.5, 0.0]) + 1.0).abs() < 1e-15);
        assert_eq!(least_squares_slope(&[0.4; 7]), 0.0);
    }
}
