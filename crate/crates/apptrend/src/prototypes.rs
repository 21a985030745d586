//! Prototype config files: one line per archetype, the kind name followed by
//! comma-separated values, e.g. `hot,0,0.25,0.5,0.75,1`. Values are
//! resampled to the working length; kinds that are not listed keep their
//! canonical series. Blank lines and `#` comments are ignored.

use std::collections::BTreeMap;
use std::path::Path;

use apptrend_core::series::{resample, NormalizedSeries};
use apptrend_core::trend::{canonical_series, Prototypes, TrendKind};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PrototypeError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error(transparent)]
    Invalid(#[from] apptrend_core::Error),
}

pub fn parse_prototypes(text: &str, len: usize) -> Result<Prototypes, PrototypeError> {
    let mut series: BTreeMap<TrendKind, Vec<f64>> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| PrototypeError::Line { line, message };
        let mut fields = content.split(',').map(str::trim);
        let name = fields.next().unwrap_or_default();
        let kind: TrendKind = name.parse().map_err(|_| err(format!("unknown kind {name:?}")))?;
        if kind == TrendKind::Unclassified {
            return Err(err("unclassified has no prototype".into()));
        }
        let values = fields
            .map(|v| v.parse::<f64>().map_err(|_| err(format!("invalid value {v:?}"))))
            .collect::<Result<Vec<f64>, _>>()?;
        if values.len() < 2 {
            return Err(err("a prototype needs at least two values".into()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(err(format!("value {v} outside [0, 1]")));
        }
        if series.insert(kind, values).is_some() {
            return Err(err(format!("duplicate prototype for {kind}")));
        }
    }
    let mut take = |kind| {
        let values = match series.remove(&kind) {
            Some(v) => resample(&v, len),
            None => canonical_series(kind, len),
        };
        NormalizedSeries::from_values(values)
    };
    Ok(Prototypes::new(
        take(TrendKind::Hot)?,
        take(TrendKind::Flop)?,
        take(TrendKind::Dominant)?,
        take(TrendKind::Marginal)?,
    )?)
}

pub fn load_prototypes(path: &Path, len: usize) -> Result<Prototypes, PrototypeError> {
    let text = std::fs::read_to_string(path).map_err(|source| PrototypeError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_prototypes(&text, len)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_canonical() {
        assert_eq!(parse_prototypes("# nothing\n\n", 50).unwrap(), Prototypes::canonical(50).unwrap());
    }

    #[test]
    fn listed_kind_is_resampled() {
        let p = parse_prototypes("HOT, 0, 1\n", 5).unwrap();
        assert_eq!(p.hot.series.values, [0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(p.flop, Prototypes::canonical(5).unwrap().flop);
    }

    #[test]
    fn errors_name_the_line() {
        let e = parse_prototypes("hot,0,1\nflop,1,x\n", 5).unwrap_err();
        assert_eq!(e.to_string(), "line 2: invalid value \"x\"");
        assert!(parse_prototypes("hot,0,1\nhot,0,1", 5).is_err());
        assert!(parse_prototypes("bogus,0,1", 5).is_err());
        assert!(parse_prototypes("hot,0,1.5", 5).is_err());
        assert!(parse_prototypes("hot,1", 5).is_err());
    }

    #[test]
    fn hot_equal_to_flop_is_rejected() {
        let flop: Vec<String> = canonical_series(TrendKind::Flop, 20).iter().map(|v| v.to_string()).collect();
        let text = format!("hot,{}\n", flop.join(","));
        assert!(matches!(parse_prototypes(&text, 20), Err(PrototypeError::Invalid(_))));
    }
}
