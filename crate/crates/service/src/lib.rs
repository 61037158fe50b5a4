//! HTTP service and command-line front end for `ontosearch-core`.

pub mod api;
pub mod cli;
pub mod config;
