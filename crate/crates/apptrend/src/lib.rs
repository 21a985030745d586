//! File formats, the reporting pipeline and the command-line front end for
//! [`apptrend_core`].

pub mod cli;
pub mod ingest;
pub mod prototypes;
pub mod report;
pub mod tables;
