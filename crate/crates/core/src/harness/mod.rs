pub mod commands;
pub mod config;
pub mod presets;
pub mod report;
