//! Library surface of the `sparsense` command-line tool; the binary in
//! `main.rs` is a thin wrapper so integration tests can drive the commands
//! directly.

pub mod commands;
pub mod config;
