use std::collections::BTreeMap;

use thiserror::Error;

use crate::kernel::ast::{Binding, ModuleDef, RunBindings, SigExpr, Span, Stmt, StmtKind};
use crate::kernel::Value;

/// Name of the library module that `run Tank(sigarray = G)` refers to.
pub const TANK_MODULE: &str = "Tank";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TankError {
    #[error("a tank needs at least one signal")]
    Empty,
}

/// One `await nameIn; emit nameOut(false)` branch per name, in parallel.
/// A single name gives the bare sequence.
pub fn expand_tank<S: AsRef<str>>(names: &[S]) -> Result<Stmt, TankError> {
    let mut branches: Vec<Stmt> = names
        .iter()
        .map(|n| {
            let n = n.as_ref();
            Stmt::seq(vec![
                Stmt::await_(SigExpr::now(format!("{n}In"))),
                Stmt::emit(format!("{n}Out"), Some(Value::Bool(false))),
            ])
        })
        .collect();
    match branches.len() {
        0 => Err(TankError::Empty),
        1 => Ok(branches.pop().unwrap()),
        _ => Ok(Stmt::fork(branches)),
    }
}

/// A `run Tank(...)` call that could not be expanded.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BadTankCall {
    pub arg: String,
    pub span: Span,
}

/// Replaces every `run Tank(sigarray = G)` by the activation of tank group
/// `G`, the expansion over its patterns, and its deactivation once all of
/// them have been selected.
pub(crate) fn rewrite_tank_calls(
    modules: &mut BTreeMap<String, ModuleDef>,
    tanks: &BTreeMap<String, Vec<String>>,
) -> Vec<BadTankCall> {
    let mut bad = Vec::new();
    if modules.contains_key(TANK_MODULE) {
        // A score-defined Tank module takes precedence.
        return bad;
    }
    for m in modules.values_mut() {
        rewrite(&mut m.body, tanks, &mut bad);
    }
    bad
}

fn rewrite(s: &mut Stmt, tanks: &BTreeMap<String, Vec<String>>, bad: &mut Vec<BadTankCall>) {
    let span = s.span;
    match &mut s.kind {
        StmtKind::Run { module, bindings } if module == TANK_MODULE => {
            let arg = match bindings {
                RunBindings::Explicit(v) if v.len() == 1 => match &v[0] {
                    Binding::Assign { param, arg } if param == "sigarray" => Some(arg.clone()),
                    _ => None,
                },
                _ => None,
            };
            let expansion = arg
                .as_ref()
                .and_then(|a| tanks.get(a).map(|pats| (a, pats)))
                .and_then(|(a, pats)| Some((a, expand_tank(pats).ok()?)));
            match expansion {
                Some((group, body)) => {
                    *s = Stmt::seq(vec![
                        Stmt::emit(format!("{group}Out"), Some(Value::Bool(true))).at(span),
                        body,
                        Stmt::emit(format!("{group}Out"), Some(Value::Bool(false))).at(span),
                    ])
                    .at(span);
                }
                None => bad.push(BadTankCall {
                    arg: arg.unwrap_or_else(|| "<missing sigarray>".into()),
                    span,
                }),
            }
        }
        StmtKind::Seq(v) | StmtKind::Fork(v) => v.iter_mut().for_each(|c| rewrite(c, tanks, bad)),
        StmtKind::Every { body, .. }
        | StmtKind::Loop(body)
        | StmtKind::Abort { body, .. }
        | StmtKind::Suspend { body, .. }
        | StmtKind::Local { body, .. } => rewrite(body, tanks, bad),
        StmtKind::If {
            then, otherwise, ..
        } => {
            rewrite(then, tanks, bad);
            if let Some(o) = otherwise {
                rewrite(o, tanks, bad);
            }
        }
        _ => {}
    }
}
