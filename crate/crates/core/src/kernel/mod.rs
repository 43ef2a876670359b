//! Synchronous reactive kernel.
//!
//! Programs are trees of statements exchanging broadcast signals. A
//! [`Machine`] executes an elaborated program instant by instant: within one
//! instant every signal has a single status and value, seen identically by
//! every statement regardless of the order in which concurrent branches are
//! scheduled.

pub mod ast;
mod elaborate;
mod expr;
pub mod ir;
mod machine;
mod task;
mod value;

pub use elaborate::{elaborate, elaborate_with_globals, ElabError};
pub use expr::{eval_sig_expr, Eval, EvalError, MapEnv, SignalEnv, Status};
pub use ir::{Program, SigId};
pub use machine::{
    Inputs, Machine, MachineStatus, ReactError, ReactionResult, SpawnedTask, TaskHandle,
};
pub use task::{AsyncTask, Injection, Metronome, ReactiveHost, TaskContext, TaskFactory};
pub use value::Value;

/// Builds an [`Inputs`] map from `(name, value)` pairs.
pub fn inputs<I, K>(pairs: I) -> Inputs
where
    I: IntoIterator<Item = (K, Option<Value>)>,
    K: Into<String>,
{
    pairs.into_iter().map(|(k, v)| (k.into(), v)).collect()
}
