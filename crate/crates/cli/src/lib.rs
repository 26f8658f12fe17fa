//! The `curator` command-line tool and its HTTP session server.

pub mod args;
pub mod commands;
pub mod server;
pub mod setup;
