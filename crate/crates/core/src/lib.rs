//! Interactive structured music: a synchronous reactive kernel that runs
//! composer-authored scores, audience selection handling, per-instrument
//! pattern scheduling, a simulated audience and a live performance server.

pub mod cli;
pub mod dsl;
pub mod kernel;
pub mod runtime;
pub mod scheduler;
pub mod score;
pub mod server;
pub mod simulator;
