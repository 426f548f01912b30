//! Scenario files, command dispatch and reports for the `netclear` binary.

pub mod app;
pub mod report;
pub mod scenario;
