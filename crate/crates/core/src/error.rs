use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the analytics core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An input produced no usage records at all.
    NoRecords,
    /// The named app does not occur in the dataset.
    UnknownApp(String),
    /// The named user does not occur in the dataset.
    UnknownUser(String),
    /// A usage series has no positive count.
    NoUsage,
    /// A collection that must be non-empty was empty.
    Empty(&'static str),
    /// Two sequences that must share a length did not.
    LengthMismatch { expected: usize, found: usize },
    /// A numeric argument is outside its valid range.
    InvalidParameter { name: &'static str, reason: &'static str },
    /// Rank correlation is undefined because one side has no rank variance.
    DegenerateRanks,
    /// The user has no usage history to recommend from.
    ColdUser(String),
    /// An app was declared with two different categories.
    CategoryConflict { app: String, first: String, second: String },
    /// A record lies outside the declared observation window.
    OutsideWindow { app: String, day: i32 },
    /// An identifier was empty.
    EmptyId(&'static str),
    /// k-means needs at least as many points as clusters.
    TooFewPoints { points: usize, k: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NoRecords => f.write_str("no records"),
            Error::UnknownApp(app) => write!(f, "unknown app: {app}"),
            Error::UnknownUser(user) => write!(f, "unknown user: {user}"),
            Error::NoUsage => f.write_str("no usage"),
            Error::Empty(what) => write!(f, "empty {what}"),
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::InvalidParameter { name, reason } => write!(f, "invalid {name}: {reason}"),
            Error::DegenerateRanks => f.write_str("degenerate ranks"),
            Error::ColdUser(user) => write!(f, "cold user: {user}"),
            Error::CategoryConflict { app, first, second } => {
                write!(f, "app {app} has conflicting categories {first:?} and {second:?}")
            }
            Error::OutsideWindow { app, day } => {
                write!(f, "record for app {app} on day {day} lies outside the observation window")
            }
            Error::EmptyId(field) => write!(f, "empty {field} id"),
            Error::TooFewPoints { points, k } => {
                write!(f, "k-means needs at least k={k} points, got {points}")
            }
        }
    }
}

impl core::error::Error for Error {}
