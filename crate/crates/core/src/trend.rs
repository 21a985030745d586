//! Shape features of normalized series and classification against the four
//! prototype trend patterns.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::dataset::CategoryMap;
use crate::error::{Error, Result};
use crate::series::{least_squares_slope, NormalizedSeries};

pub const DEFAULT_THRESHOLD: f64 = 0.4;
/// Apps whose peak daily users stay below this are Marginal regardless of shape.
pub const DEFAULT_MARGINAL_GATE: u32 = 5;
/// Minimum feature distance between the Hot and Flop prototypes.
pub const MIN_HOT_FLOP_DISTANCE: f64 = 0.8;
pub const UNCATEGORIZED: &str = "uncategorized";

/// Shape descriptor of a normalized series.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct FeatureVector {
    /// Trapezoidal area under the curve over the unit domain.
    pub auc: f64,
    /// Relative location of the first maximum.
    pub peak: f64,
    /// Least-squares slope over the unit domain, clamped to `[-1, 1]`.
    pub slope: f64,
    /// Population variance of the values.
    pub variance: f64,
}

impl FeatureVector {
    pub fn to_array(self) -> [f64; 4] {
        [self.auc, self.peak, self.slope, self.variance]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        FeatureVector {
            auc: a[0],
            peak: a[1],
            slope: a[2],
            variance: a[3],
        }
    }

    pub fn distance(&self, other: &FeatureVector) -> f64 {
        libm::sqrt(squared_distance(&self.to_array(), &other.to_array()))
    }
}

pub(crate) fn squared_distance(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn extract_features(s: &NormalizedSeries) -> Result<FeatureVector> {
    features_of(&s.values)
}

pub fn features_of(values: &[f64]) -> Result<FeatureVector> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "series",
            reason: "feature extraction needs at least two points",
        });
    }
    let width = (n - 1) as f64;
    // dividing (rather than multiplying by 1/width) keeps a constant series at exactly 1
    let auc = values.windows(2).map(|w| (w[0] + w[1]) / 2.0).sum::<f64>() / width;

    let mut argmax = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[argmax] {
            argmax = i;
        }
    }
    let peak = argmax as f64 / width;

    let slope = least_squares_slope(values).clamp(-1.0, 1.0);

    let mean = values.iter().sum::<f64>() / n as f64;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;

    Ok(FeatureVector {
        auc,
        peak,
        slope,
        variance,
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrendKind {
    Hot,
    Flop,
    Dominant,
    Marginal,
    Unclassified,
}

impl TrendKind {
    pub const ARCHETYPES: [TrendKind; 4] = [TrendKind::Hot, TrendKind::Flop, TrendKind::Dominant, TrendKind::Marginal];

    pub fn as_str(self) -> &'static str {
        match self {
            TrendKind::Hot => "hot",
            TrendKind::Flop => "flop",
            TrendKind::Dominant => "dominant",
            TrendKind::Marginal => "marginal",
            TrendKind::Unclassified => "unclassified",
        }
    }
}

impl fmt::Display for TrendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = [
            TrendKind::Hot,
            TrendKind::Flop,
            TrendKind::Dominant,
            TrendKind::Marginal,
            TrendKind::Unclassified,
        ]
        .into_iter()
        .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()));
        kind.ok_or(Error::InvalidParameter {
            name: "trend kind",
            reason: "expected hot, flop, dominant, marginal or unclassified",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrendPrototype {
    pub kind: TrendKind,
    pub series: NormalizedSeries,
    pub features: FeatureVector,
}

impl TrendPrototype {
    pub fn new(kind: TrendKind, series: NormalizedSeries) -> Result<Self> {
        let features = extract_features(&series)?;
        Ok(TrendPrototype { kind, series, features })
    }
}

/// Canonical curve of each archetype on `len` points of the unit domain.
///
/// * Hot: linear ramp from 0 to 1.
/// * Flop: ramp to 1 over the first tenth, then exponential decay to 0.05.
/// * Dominant: 0.95 plus a 0.05 cosine ripple with a period of `len / 10` points.
/// * Marginal: constant 1.
pub fn canonical_series(kind: TrendKind, len: usize) -> Vec<f64> {
    let last = (len.max(2) - 1) as f64;
    match kind {
        TrendKind::Hot => (0..len).map(|i| i as f64 / last).collect(),
        TrendKind::Flop => {
            let top = libm::round(0.1 * last) as usize;
            let tail = last - top as f64;
            (0..len)
                .map(|i| {
                    if i < top {
                        i as f64 / top as f64
                    } else if i == top || tail == 0.0 {
                        1.0
                    } else {
                        libm::exp(libm::log(0.05) * (i - top) as f64 / tail)
                    }
                })
                .collect()
        }
        TrendKind::Dominant => {
            let period = len as f64 / 10.0;
            (0..len)
                .map(|i| 0.95 + 0.05 * libm::cos(2.0 * core::f64::consts::PI * i as f64 / period))
                .collect()
        }
        TrendKind::Marginal | TrendKind::Unclassified => alloc::vec![1.0; len],
    }
}

/// The four reference patterns used for classification.
#[derive(Clone, Debug, PartialEq)]
pub struct Prototypes {
    pub hot: TrendPrototype,
    pub flop: TrendPrototype,
    pub dominant: TrendPrototype,
    pub marginal: TrendPrototype,
}

impl Prototypes {
    pub fn canonical(len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::InvalidParameter {
                name: "resample length",
                reason: "must be at least 2",
            });
        }
        let series = |kind| NormalizedSeries::from_values(canonical_series(kind, len));
        Prototypes::new(series(TrendKind::Hot)?, series(TrendKind::Flop)?, series(TrendKind::Dominant)?, series(TrendKind::Marginal)?)
    }

    /// Builds a prototype set, checking that Hot and Flop stay apart in feature space.
    pub fn new(
        hot: NormalizedSeries,
        flop: NormalizedSeries,
        dominant: NormalizedSeries,
        marginal: NormalizedSeries,
    ) -> Result<Self> {
        let set = Prototypes {
            hot: TrendPrototype::new(TrendKind::Hot, hot)?,
            flop: TrendPrototype::new(TrendKind::Flop, flop)?,
            dominant: TrendPrototype::new(TrendKind::Dominant, dominant)?,
            marginal: TrendPrototype::new(TrendKind::Marginal, marginal)?,
        };
        if set.hot.features.distance(&set.flop.features) <= MIN_HOT_FLOP_DISTANCE {
            return Err(Error::InvalidParameter {
                name: "prototypes",
                reason: "hot and flop prototypes are too close in feature space",
            });
        }
        Ok(set)
    }

    pub fn get(&self, kind: TrendKind) -> Option<&TrendPrototype> {
        match kind {
            TrendKind::Hot => Some(&self.hot),
            TrendKind::Flop => Some(&self.flop),
            TrendKind::Dominant => Some(&self.dominant),
            TrendKind::Marginal => Some(&self.marginal),
            TrendKind::Unclassified => None,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &TrendPrototype> {
        [&self.hot, &self.flop, &self.dominant, &self.marginal].into_iter()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrendClassification {
    pub app_id: String,
    pub kind: TrendKind,
    pub distance: f64,
    pub max_raw_users: u32,
}

/// Nearest-prototype classifier with a distance threshold and a raw-volume gate.
#[derive(Clone, Debug, PartialEq)]
pub struct TrendClassifier {
    pub prototypes: Prototypes,
    pub threshold: f64,
    pub marginal_gate: u32,
}

impl TrendClassifier {
    pub fn new(prototypes: Prototypes, threshold: f64, marginal_gate: u32) -> Result<Self> {
        if threshold.is_nan() || threshold <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "threshold",
                reason: "must be positive",
            });
        }
        Ok(TrendClassifier {
            prototypes,
            threshold,
            marginal_gate,
        })
    }

    pub fn with_defaults(len: usize) -> Result<Self> {
        Self::new(Prototypes::canonical(len)?, DEFAULT_THRESHOLD, DEFAULT_MARGINAL_GATE)
    }

    /// Apps below the marginal gate are Marginal. Everything else goes to the
    /// nearest of Hot, Flop and Dominant (ties in that order) when within the
    /// threshold, inclusive, and is Unclassified otherwise.
    pub fn classify(&self, s: &NormalizedSeries, max_raw_users: u32) -> Result<TrendClassification> {
        let features = extract_features(s)?;
        let app_id = s.app_id.clone().unwrap_or_default();
        if max_raw_users < self.marginal_gate {
            return Ok(TrendClassification {
                app_id,
                kind: TrendKind::Marginal,
                distance: features.distance(&self.prototypes.marginal.features),
                max_raw_users,
            });
        }
        let mut best = (TrendKind::Unclassified, f64::INFINITY);
        for proto in [&self.prototypes.hot, &self.prototypes.flop, &self.prototypes.dominant] {
            let d = features.distance(&proto.features);
            if d < best.1 {
                best = (proto.kind, d);
            }
        }
        let kind = if best.1 <= self.threshold { best.0 } else { TrendKind::Unclassified };
        Ok(TrendClassification {
            app_id,
            kind,
            distance: best.1,
            max_raw_users,
        })
    }
}

/// Classifies against the canonical prototypes of the series' length.
pub fn classify(
    s: &NormalizedSeries,
    max_raw_users: u32,
    threshold: f64,
    marginal_gate: u32,
) -> Result<TrendClassification> {
    TrendClassifier::new(Prototypes::canonical(s.len())?, threshold, marginal_gate)?.classify(s, max_raw_users)
}

/// Trend mix of one category. Marginal share is over all apps; the other
/// shares are over the non-Marginal rest and read 0 when the rest is empty.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoryBreakdown {
    pub category: String,
    pub apps: usize,
    pub marginal: usize,
    pub rest: usize,
    pub hot: usize,
    pub dominant: usize,
    pub flop: usize,
    pub unclassified: usize,
    pub marginal_pct: f64,
    pub hot_pct: f64,
    pub dominant_pct: f64,
    pub flop_pct: f64,
    pub mean_distance: f64,
    pub distance_variance: f64,
}

pub fn category_breakdown(
    classifications: &[TrendClassification],
    cats: &CategoryMap,
) -> Result<Vec<CategoryBreakdown>> {
    if classifications.is_empty() {
        return Err(Error::Empty("classifications"));
    }
    let mut groups: BTreeMap<&str, Vec<&TrendClassification>> = BTreeMap::new();
    for c in classifications {
        let cat = cats.get(&c.app_id).unwrap_or(UNCATEGORIZED);
        groups.entry(cat).or_default().push(c);
    }
    let pct = |part: usize, whole: usize| {
        if whole == 0 {
            0.0
        } else {
            100.0 * part as f64 / whole as f64
        }
    };
    Ok(groups
        .into_iter()
        .map(|(category, members)| {
            let count = |k: TrendKind| members.iter().filter(|c| c.kind == k).count();
            let apps = members.len();
            let marginal = count(TrendKind::Marginal);
            let rest = apps - marginal;
            let (hot, dominant, flop) = (count(TrendKind::Hot), count(TrendKind::Dominant), count(TrendKind::Flop));
            let mean = members.iter().map(|c| c.distance).sum::<f64>() / apps as f64;
            let var = members.iter().map(|c| (c.distance - mean) * (c.distance - mean)).sum::<f64>() / apps as f64;
            CategoryBreakdown {
                category: category.to_string(),
                apps,
                marginal,
                rest,
                hot,
                dominant,
                flop,
                unclassified: count(TrendKind::Unclassified),
                marginal_pct: pct(marginal, apps),
                hot_pct: pct(hot, rest),
                dominant_pct: pct(dominant, rest),
                flop_pct: pct(flop, rest),
                mean_distance: mean,
                distance_variance: var,
            }
        })
        .collect())
}
