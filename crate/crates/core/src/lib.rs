#![no_std]
extern crate alloc;

pub mod dataset;
pub mod day;
pub mod error;
pub mod evaluate;
pub mod kmeans;
pub mod recommend;
pub mod retention;
pub mod series;
pub mod synth;
pub mod trend;

pub use dataset::{AppId, CategoryMap, DailySeries, Dataset, DatasetBuilder, Record, UsageRecord, UserId, UserSpan};
pub use day::Day;
pub use error::{Error, Result};
