//! Command line and HTTP front ends for the verbspace library.

pub mod cli;
pub mod service;
