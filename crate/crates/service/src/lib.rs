//! Annotation service for blinded human evaluation, plus the helpers behind
//! the `idiombench` command line.

mod error;
pub mod http;
pub mod lm;
pub mod service;
pub mod store;

use std::path::PathBuf;

pub use error::ServiceError;

pub const DATA_DIR_ENV: &str = "IDIOMBENCH_DATA_DIR";

/// `explicit`, else `$IDIOMBENCH_DATA_DIR`, else `./idiombench-data`.
pub fn data_dir(explicit: Option<PathBuf>) -> PathBuf {
    explicit
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("idiombench-data"))
}
