//! Internals of the `ptobs` binary: scenario schema and loading, experiment
//! orchestration, and artifact emission. Split from `main.rs` so the pieces
//! are testable in isolation; the numerical machinery lives in `ptobs-core`.

pub mod output;
pub mod runner;
pub mod scenario;
