//! Command-line workflows and the JSON recommendation service.

pub mod cli;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod service;
