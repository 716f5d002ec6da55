//! Shared execution of star-schema query batches with partition-granular
//! view reuse.

pub mod bench;
pub mod calibrate;
pub mod cli;
pub mod config;
pub mod error;
pub mod executor;
pub mod globalplan;
pub mod materializer;
pub mod oracle;
pub mod partitioner;
pub mod queryset;
pub mod storage;
pub mod tuner;
pub mod workload;

pub use error::{Error, Result};
