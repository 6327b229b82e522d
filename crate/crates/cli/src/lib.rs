//! Experiment runner: TOML configs, named presets, CSV/JSON artifacts and
//! the diagnostics battery.

pub mod certify;
pub mod config;
pub mod output;
pub mod presets;
pub mod runner;
