//! Library half of the `covarc` binary, kept separate so the sweep runner
//! and formatting can be tested without spawning processes.

pub mod output;
pub mod sweep;
