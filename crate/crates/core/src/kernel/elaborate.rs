//! Module inlining and signal resolution.

use std::collections::BTreeMap;

use thiserror::Error;

use super::ast::{Binding, Direction, ModuleDef, RunBindings, SignalDecl, Span, Stmt, StmtKind};
use super::ir::{Node, NodeId, NodeKind, Program, SigId, SignalInfo};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElabError {
    #[error("unknown module `{name}` at {span}")]
    UnknownModule { name: String, span: Span },
    #[error("interface signal `{signal}` of module `{module}` is not bound at {span}")]
    UnboundInterfaceSignal {
        module: String,
        signal: String,
        span: Span,
    },
    #[error("recursive module instantiation: {}", chain.join(" -> "))]
    RecursiveInstantiation { chain: Vec<String> },
    #[error("unknown signal `{name}` at {span}")]
    UnknownSignal { name: String, span: Span },
    #[error("signal `{name}` declared twice at {span}")]
    DuplicateSignalDecl { name: String, span: Span },
    #[error("`{module}` has no interface signal `{signal}` at {span}")]
    NoSuchInterfaceSignal {
        module: String,
        signal: String,
        span: Span,
    },
    #[error("fork needs at least two branches at {span}")]
    DegenerateFork { span: Span },
    #[error("await count must be at least 1 at {span}")]
    ZeroCount { span: Span },
}

/// Inlines `entry` and everything it runs into a single program.
pub fn elaborate(
    modules: &BTreeMap<String, ModuleDef>,
    entry: &str,
) -> Result<Program, ElabError> {
    elaborate_with_globals(modules, entry, &[])
}

/// Like [`elaborate`], with extra boundary signals visible from every module
/// body (the score's group signals).
pub fn elaborate_with_globals(
    modules: &BTreeMap<String, ModuleDef>,
    entry: &str,
    globals: &[SignalDecl],
) -> Result<Program, ElabError> {
    let entry_def = modules.get(entry).ok_or_else(|| ElabError::UnknownModule {
        name: entry.to_owned(),
        span: Span::default(),
    })?;
    let mut el = Elaborator {
        modules,
        signals: Vec::new(),
        globals: Vec::new(),
        stack: Vec::new(),
        next_node: 0,
    };
    for g in globals {
        if el.globals.iter().any(|(n, _)| n == &g.name) {
            return Err(ElabError::DuplicateSignalDecl {
                name: g.name.clone(),
                span: g.span,
            });
        }
        let id = el.declare(g);
        el.globals.push((g.name.clone(), id));
    }
    let mut scope = el.globals.clone();
    let mut seen = Vec::new();
    for decl in &entry_def.interface {
        if seen.contains(&decl.name) {
            return Err(ElabError::DuplicateSignalDecl {
                name: decl.name.clone(),
                span: decl.span,
            });
        }
        seen.push(decl.name.clone());
        // Declaring a global in the entry interface refers to the global.
        let existing = el
            .globals
            .iter()
            .find(|(n, _)| n == &decl.name)
            .map(|(_, id)| *id);
        match existing {
            Some(id) if el.signals[id.index()].direction == decl.direction => {}
            Some(_) => {
                return Err(ElabError::DuplicateSignalDecl {
                    name: decl.name.clone(),
                    span: decl.span,
                })
            }
            None => {
                let id = el.declare(decl);
                scope.push((decl.name.clone(), id));
            }
        }
    }
    el.stack.push(entry.to_owned());
    let body = el.stmt(&entry_def.body, &mut scope)?;
    Ok(Program {
        signals: el.signals,
        body,
        node_count: el.next_node,
    })
}

struct Elaborator<'a> {
    modules: &'a BTreeMap<String, ModuleDef>,
    signals: Vec<SignalInfo>,
    globals: Vec<(String, SigId)>,
    stack: Vec<String>,
    next_node: u32,
}

type Scope = Vec<(String, SigId)>;

fn lookup(scope: &Scope, name: &str) -> Option<SigId> {
    scope.iter().rev().find(|(n, _)| n == name).map(|(_, id)| *id)
}

impl Elaborator<'_> {
    fn declare(&mut self, decl: &SignalDecl) -> SigId {
        let id = SigId(self.signals.len() as u32);
        self.signals.push(SignalInfo {
            name: decl.name.clone(),
            direction: decl.direction,
            init: decl.init.clone(),
        });
        id
    }

    fn resolve(&self, scope: &Scope, name: &str, span: Span) -> Result<SigId, ElabError> {
        lookup(scope, name).ok_or_else(|| ElabError::UnknownSignal {
            name: name.to_owned(),
            span,
        })
    }

    fn expr(
        &self,
        scope: &Scope,
        e: &super::ast::SigExpr,
        span: Span,
    ) -> Result<super::ir::Expr, ElabError> {
        e.try_map_signals(&mut |name: &String| self.resolve(scope, name, span))
    }

    fn stmt(&mut self, s: &Stmt, scope: &mut Scope) -> Result<Node, ElabError> {
        let span = s.span;
        // Reserve the id before children so ids follow pre-order.
        let id = NodeId(self.next_node);
        self.next_node += 1;
        let kind = match &s.kind {
            StmtKind::Nothing => NodeKind::Nothing,
            StmtKind::Emit { signal, value } => NodeKind::Emit {
                signal: self.resolve(scope, signal, span)?,
                value: value
                    .as_ref()
                    .map(|v| self.expr(scope, v, span))
                    .transpose()?,
            },
            StmtKind::Await { expr, immediate } => NodeKind::Await {
                count: 1,
                expr: self.expr(scope, expr, span)?,
                immediate: *immediate,
            },
            StmtKind::AwaitCount {
                count,
                expr,
                immediate,
            } => {
                if *count == 0 {
                    return Err(ElabError::ZeroCount { span });
                }
                NodeKind::Await {
                    count: *count,
                    expr: self.expr(scope, expr, span)?,
                    immediate: *immediate,
                }
            }
            StmtKind::Seq(v) => NodeKind::Seq(
                v.iter()
                    .map(|c| self.stmt(c, scope))
                    .collect::<Result<_, _>>()?,
            ),
            StmtKind::Fork(v) => {
                if v.len() < 2 {
                    return Err(ElabError::DegenerateFork { span });
                }
                NodeKind::Fork(
                    v.iter()
                        .map(|c| self.stmt(c, scope))
                        .collect::<Result<_, _>>()?,
                )
            }
            StmtKind::Every {
                expr,
                immediate,
                body,
            } => NodeKind::Every {
                expr: self.expr(scope, expr, span)?,
                immediate: *immediate,
                body: Box::new(self.stmt(body, scope)?),
            },
            StmtKind::If {
                expr,
                then,
                otherwise,
            } => NodeKind::If {
                expr: self.expr(scope, expr, span)?,
                then: Box::new(self.stmt(then, scope)?),
                otherwise: match otherwise {
                    Some(o) => Some(Box::new(self.stmt(o, scope)?)),
                    None => None,
                },
            },
            StmtKind::Loop(body) => NodeKind::Loop(Box::new(self.stmt(body, scope)?)),
            StmtKind::Abort { expr, body } => NodeKind::Abort {
                expr: self.expr(scope, expr, span)?,
                body: Box::new(self.stmt(body, scope)?),
            },
            StmtKind::Suspend { expr, body } => NodeKind::Suspend {
                expr: self.expr(scope, expr, span)?,
                body: Box::new(self.stmt(body, scope)?),
            },
            StmtKind::Local { decl, body } => {
                let mut decl = decl.clone();
                decl.direction = Direction::Local;
                let sig = self.declare(&decl);
                scope.push((decl.name.clone(), sig));
                let body = self.stmt(body, scope);
                scope.pop();
                NodeKind::Local {
                    signal: sig,
                    body: Box::new(body?),
                }
            }
            StmtKind::Async {
                task,
                signals,
                done,
            } => NodeKind::Async {
                task: task.clone(),
                signals: signals
                    .iter()
                    .map(|n| self.resolve(scope, n, span))
                    .collect::<Result<_, _>>()?,
                done: done
                    .as_ref()
                    .map(|n| self.resolve(scope, n, span))
                    .transpose()?,
            },
            StmtKind::Run { module, bindings } => {
                return self.run(id, span, module, bindings, scope);
            }
        };
        Ok(Node { id, span, kind })
    }

    fn run(
        &mut self,
        id: NodeId,
        span: Span,
        module: &str,
        bindings: &RunBindings,
        caller: &Scope,
    ) -> Result<Node, ElabError> {
        let def = self
            .modules
            .get(module)
            .ok_or_else(|| ElabError::UnknownModule {
                name: module.to_owned(),
                span,
            })?;
        if self.stack.iter().any(|m| m == module) {
            let mut chain = self.stack.clone();
            chain.push(module.to_owned());
            return Err(ElabError::RecursiveInstantiation { chain });
        }
        let mut seen: Vec<&str> = Vec::new();
        for decl in &def.interface {
            if seen.contains(&decl.name.as_str()) {
                return Err(ElabError::DuplicateSignalDecl {
                    name: decl.name.clone(),
                    span: decl.span,
                });
            }
            seen.push(&decl.name);
        }

        let mut scope = self.globals.clone();
        match bindings {
            RunBindings::Implicit => {
                for decl in &def.interface {
                    let sig = lookup(caller, &decl.name).ok_or_else(|| {
                        ElabError::UnboundInterfaceSignal {
                            module: module.to_owned(),
                            signal: decl.name.clone(),
                            span,
                        }
                    })?;
                    scope.push((decl.name.clone(), sig));
                }
            }
            RunBindings::Explicit(list) => {
                let mut bound: BTreeMap<&str, SigId> = BTreeMap::new();
                for b in list {
                    let (callee, caller_name) = match b {
                        Binding::As { callee, caller } => (callee, caller),
                        Binding::Assign { param, arg } => (param, arg),
                    };
                    if !def.interface.iter().any(|d| &d.name == callee) {
                        return Err(ElabError::NoSuchInterfaceSignal {
                            module: module.to_owned(),
                            signal: callee.clone(),
                            span,
                        });
                    }
                    bound.insert(callee, self.resolve(caller, caller_name, span)?);
                }
                for decl in &def.interface {
                    let sig = bound.get(decl.name.as_str()).copied().ok_or_else(|| {
                        ElabError::UnboundInterfaceSignal {
                            module: module.to_owned(),
                            signal: decl.name.clone(),
                            span,
                        }
                    })?;
                    scope.push((decl.name.clone(), sig));
                }
            }
        }

        self.stack.push(module.to_owned());
        let body = self.stmt(&def.body, &mut scope);
        self.stack.pop();
        // The run node itself becomes a one-statement sequence so spans of
        // the call site stay addressable.
        Ok(Node {
            id,
            span,
            kind: NodeKind::Seq(vec![body?]),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ast::{SigExpr, SignalDecl};
    use crate::kernel::Value;

    fn modules(defs: Vec<ModuleDef>) -> BTreeMap<String, ModuleDef> {
        defs.into_iter().map(|m| (m.name.clone(), m)).collect()
    }

    fn session(name: &str, sig: &str) -> ModuleDef {
        ModuleDef::new(
            name,
            vec![SignalDecl::output(sig)],
            Stmt::emit(sig, Some(Value::Bool(true))),
        )
    }

    #[test]
    fn sessions_run_in_sequence() {
        let main = ModuleDef::new(
            "Opus1",
            vec![
                SignalDecl::output("A"),
                SignalDecl::output("B"),
                SignalDecl::output("C"),
            ],
            Stmt::seq(vec![
                Stmt::run("ScaleSession", RunBindings::Implicit),
                Stmt::run("ChromaticSession", RunBindings::Implicit),
                Stmt::run("TonalSession", RunBindings::Implicit),
            ]),
        );
        let mods = modules(vec![
            main,
            session("ScaleSession", "A"),
            session("ChromaticSession", "B"),
            session("TonalSession", "C"),
        ]);
        let prog = elaborate(&mods, "Opus1").unwrap();
        let NodeKind::Seq(items) = &prog.body.kind else {
            panic!("expected a sequence")
        };
        let emitted: Vec<&str> = items
            .iter()
            .map(|n| match &n.kind {
                NodeKind::Seq(inner) => match &inner[0].kind {
                    NodeKind::Emit { signal, .. } => prog.name(*signal),
                    k => panic!("unexpected {k:?}"),
                },
                k => panic!("unexpected {k:?}"),
            })
            .collect();
        assert_eq!(emitted, ["A", "B", "C"]);
    }

    #[test]
    fn implicit_binding_is_identity() {
        let mods = modules(vec![
            ModuleDef::new(
                "Main",
                vec![SignalDecl::output("A")],
                Stmt::run("M", RunBindings::Implicit),
            ),
            session("M", "A"),
        ]);
        let prog = elaborate(&mods, "Main").unwrap();
        assert_eq!(prog.signals.len(), 1);
        assert!(prog.pretty().contains("emit A(true)"));
    }

    #[test]
    fn as_binding_renames() {
        let m = ModuleDef::new(
            "M",
            vec![SignalDecl::input("solo")],
            Stmt::seq(vec![
                Stmt::await_(SigExpr::now("solo")),
                Stmt::emit("solo", Some(Value::from("x"))),
            ]),
        );
        let main = ModuleDef::new(
            "Main",
            vec![SignalDecl::input("leadChoice")],
            Stmt::run(
                "M",
                RunBindings::Explicit(vec![Binding::As {
                    callee: "solo".into(),
                    caller: "leadChoice".into(),
                }]),
            ),
        );
        let prog = elaborate(&modules(vec![m, main]), "Main").unwrap();
        let text = prog.pretty();
        assert!(text.contains("await (leadChoice.now)"), "{text}");
        assert!(text.contains("emit leadChoice(\"x\")"), "{text}");
        assert!(!text.contains("solo"));
    }

    #[test]
    fn unknown_module() {
        let mods = modules(vec![ModuleDef::new(
            "Main",
            vec![],
            Stmt::run("Nope", RunBindings::Implicit),
        )]);
        assert!(matches!(
            elaborate(&mods, "Main"),
            Err(ElabError::UnknownModule { name, .. }) if name == "Nope"
        ));
        assert!(matches!(
            elaborate(&mods, "Missing"),
            Err(ElabError::UnknownModule { .. })
        ));
    }

    #[test]
    fn unbound_interface_signal() {
        let mods = modules(vec![
            ModuleDef::new("Main", vec![], Stmt::run("M", RunBindings::Implicit)),
            session("M", "A"),
        ]);
        assert!(matches!(
            elaborate(&mods, "Main"),
            Err(ElabError::UnboundInterfaceSignal { signal, .. }) if signal == "A"
        ));
        let explicit = modules(vec![
            ModuleDef::new(
                "Main",
                vec![SignalDecl::output("A")],
                Stmt::run("M", RunBindings::Explicit(vec![])),
            ),
            session("M", "A"),
        ]);
        assert!(matches!(
            elaborate(&explicit, "Main"),
            Err(ElabError::UnboundInterfaceSignal { .. })
        ));
    }

    #[test]
    fn recursion_is_rejected() {
        let mods = modules(vec![
            ModuleDef::new("A", vec![], Stmt::run("B", RunBindings::Implicit)),
            ModuleDef::new("B", vec![], Stmt::run("A", RunBindings::Implicit)),
        ]);
        assert_eq!(
            elaborate(&mods, "A"),
            Err(ElabError::RecursiveInstantiation {
                chain: vec!["A".into(), "B".into(), "A".into()]
            })
        );
    }

    #[test]
    fn locals_shadow_and_stay_distinct() {
        let body = Stmt::local(
            SignalDecl::local("S"),
            Stmt::seq(vec![
                Stmt::emit("S", None),
                Stmt::local(SignalDecl::local("S"), Stmt::emit("S", None)),
            ]),
        );
        let mods = modules(vec![ModuleDef::new("Main", vec![], body)]);
        let prog = elaborate(&mods, "Main").unwrap();
        let emitted = prog.emitted_signals();
        assert_eq!(emitted.len(), 2);
        assert!(prog.signals.iter().all(|s| !s.is_boundary()));
    }

    #[test]
    fn globals_are_visible_in_callees() {
        let mods = modules(vec![
            ModuleDef::new("Main", vec![], Stmt::run("M", RunBindings::Implicit)),
            ModuleDef::new("M", vec![], Stmt::emit("GOut", Some(true.into()))),
        ]);
        let prog =
            elaborate_with_globals(&mods, "Main", &[SignalDecl::output("GOut")]).unwrap();
        assert_eq!(prog.outputs().count(), 1);
        assert!(matches!(
            elaborate(&mods, "Main"),
            Err(ElabError::UnknownSignal { name, .. }) if name == "GOut"
        ));
    }
}
