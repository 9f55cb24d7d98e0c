pub mod classify;
pub mod config;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod graph;
pub mod pcst;
pub mod loss;
pub mod metrics;
pub mod projection;
pub mod report;
pub mod solver;
pub mod synth;
pub mod theory;

pub use error::{Error, Result};
