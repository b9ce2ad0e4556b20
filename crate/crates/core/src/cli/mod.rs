//! Flat `key=value` experiment configs and the runner behind the `mdng` binary.

mod config;
mod run;

pub use config::{parse_config, Command, ConfigError, ExperimentConfig, InitChoice};
pub use run::{config_text_from_summary, run, Check, RunOutcome, SUMMARY_SEPARATOR};
