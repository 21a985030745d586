//! Usage logs on disk: JSONL and CSV readers, plus the JSONL writer used for
//! synthetic data.
//!
//! Every row names a user, an app and a date, and may name the app's
//! category. Dates are ISO-8601; timestamps are reduced to their UTC
//! calendar date.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use apptrend_core::trend::TrendKind;
use apptrend_core::{Dataset, DatasetBuilder, Day};
use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: field `{field}`: {message}")]
    Field {
        line: u64,
        field: &'static str,
        message: String,
    },
    #[error("line {line}: {message}")]
    Line { line: u64, message: String },
    #[error("{}: unsupported format, expected .jsonl or .csv", path.display())]
    UnknownFormat { path: PathBuf },
    #[error(transparent)]
    Dataset(#[from] apptrend_core::Error),
}

pub type Result<T> = std::result::Result<T, IngestError>;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("jsonl" | "ndjson" | "json") => Ok(Format::Jsonl),
            Some("csv") => Ok(Format::Csv),
            _ => Err(IngestError::UnknownFormat { path: path.to_path_buf() }),
        }
    }
}

/// Overrides the observation window, which is otherwise the span of the data.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadOptions {
    pub window: Option<(NaiveDate, NaiveDate)>,
}

const EPOCH: NaiveDate = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date");

pub fn day_of(date: NaiveDate) -> Day {
    Day((date - EPOCH).num_days() as i32)
}

pub fn date_of(day: Day) -> NaiveDate {
    EPOCH + chrono::Duration::days(day.0 as i64)
}

/// Parses `YYYY-MM-DD`, or a timestamp whose UTC date is taken.
pub fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    let s = s.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc).date_naive());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t.date());
        }
    }
    Err(format!("invalid date {s:?}"))
}

pub fn load_records(path: &Path, format: Option<Format>, opts: &LoadOptions) -> Result<Dataset> {
    let format = match format {
        Some(f) => f,
        None => Format::from_path(path)?,
    };
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let result = match format {
        Format::Jsonl => parse_jsonl(reader, opts),
        Format::Csv => parse_csv(reader, opts),
    };
    result.map_err(|e| match e {
        IngestError::Io { source, .. } => IngestError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

struct Rows {
    builder: DatasetBuilder,
}

impl Rows {
    fn new(opts: &LoadOptions) -> Self {
        let mut builder = DatasetBuilder::new();
        if let Some((start, end)) = opts.window {
            builder = builder.window(day_of(start), day_of(end));
        }
        Rows { builder }
    }

    fn push(&mut self, line: u64, user: &str, app: &str, date: &str, category: Option<&str>) -> Result<()> {
        let nonempty = |field, value: &str| {
            if value.trim().is_empty() {
                Err(IngestError::Field {
                    line,
                    field,
                    message: "empty value".into(),
                })
            } else {
                Ok(())
            }
        };
        nonempty("user", user)?;
        nonempty("app", app)?;
        let day = parse_date(date).map_err(|message| IngestError::Field {
            line,
            field: "date",
            message,
        })?;
        let at_line = |e: apptrend_core::Error| IngestError::Line {
            line,
            message: e.to_string(),
        };
        self.builder.push(user, app, day_of(day)).map_err(at_line)?;
        if let Some(c) = category.filter(|c| !c.is_empty()) {
            self.builder.set_category(app, c).map_err(at_line)?;
        }
        Ok(())
    }

    fn finish(self) -> Result<Dataset> {
        Ok(self.builder.build()?)
    }
}

pub fn parse_jsonl<R: BufRead>(reader: R, opts: &LoadOptions) -> Result<Dataset> {
    let mut rows = Rows::new(opts);
    for (i, line) in reader.lines().enumerate() {
        let n = i as u64 + 1;
        let line = line.map_err(|source| IngestError::Io {
            path: PathBuf::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| IngestError::Line {
            line: n,
            message: format!("invalid JSON: {e}"),
        })?;
        let obj = value.as_object().ok_or_else(|| IngestError::Line {
            line: n,
            message: "expected a JSON object".into(),
        })?;
        let field = |name: &'static str| -> Result<Option<&str>> {
            match obj.get(name) {
                None | Some(Value::Null) => Ok(None),
                Some(Value::String(s)) => Ok(Some(s)),
                Some(_) => Err(IngestError::Field {
                    line: n,
                    field: name,
                    message: "expected a string".into(),
                }),
            }
        };
        let required = |name: &'static str| -> Result<&str> {
            field(name)?.ok_or(IngestError::Field {
                line: n,
                field: name,
                message: "missing".into(),
            })
        };
        rows.push(n, required("user")?, required("app")?, required("date")?, field("category")?)?;
    }
    rows.finish()
}

pub fn parse_csv<R: Read>(reader: R, opts: &LoadOptions) -> Result<Dataset> {
    let mut csv = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let csv_error = |e: csv::Error| {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        IngestError::Line {
            line,
            message: e.to_string(),
        }
    };
    let headers = csv.headers().map_err(csv_error)?.clone();
    if headers.is_empty() {
        return Err(apptrend_core::Error::NoRecords.into());
    }
    let column = |name: &'static str| headers.iter().position(|h| h == name);
    let missing = |field| IngestError::Field {
        line: 1,
        field,
        message: "missing column".into(),
    };
    let user = column("user").ok_or_else(|| missing("user"))?;
    let app = column("app").ok_or_else(|| missing("app"))?;
    let date = column("date").ok_or_else(|| missing("date"))?;
    let category = column("category");

    let mut rows = Rows::new(opts);
    for record in csv.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let get = |i: usize, field: &'static str| {
            record.get(i).ok_or(IngestError::Field {
                line,
                field,
                message: "missing".into(),
            })
        };
        let cat = category.and_then(|i| record.get(i));
        rows.push(line, get(user, "user")?, get(app, "app")?, get(date, "date")?, cat)?;
    }
    rows.finish()
}

#[derive(Serialize)]
struct JsonRow<'a> {
    user: &'a str,
    app: &'a str,
    date: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    category: Option<&'a str>,
}

/// Writes one JSON object per record, in app, day, user order.
pub fn write_jsonl<W: Write>(ds: &Dataset, mut out: W) -> io::Result<()> {
    let mut dates: BTreeMap<Day, String> = BTreeMap::new();
    for r in ds.records() {
        let date = dates.entry(r.day).or_insert_with(|| date_of(r.day).to_string());
        let row = JsonRow {
            user: ds.user_name(r.user),
            app: ds.app_name(r.app),
            date: date.clone(),
            category: ds.category_of(r.app),
        };
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Writes `app_id,archetype` rows.
pub fn write_truth<W: Write>(truth: &BTreeMap<String, TrendKind>, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["app_id", "archetype"])?;
    for (app, kind) in truth {
        w.write_record([app.as_str(), kind.as_str()])?;
    }
    w.flush()?;
    Ok(())
}
