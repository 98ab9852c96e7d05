//! Configuration, experiment commands and result files for the
//! `cavity-cool` command line tool.

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod output;
