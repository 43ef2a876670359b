//! Source-level statement trees, as produced by the orchestration parser
//! and consumed by [`elaborate`](super::elaborate).
//!
//! Signals are referenced by name here. Module instantiation (`run`) is
//! still present and is removed by elaboration.

use std::fmt;

use super::value::Value;

/// Position of a construct in the orchestration source (1-based).
///
/// Spans never take part in structural equality: two trees that differ only
/// in where they came from compare equal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Input,
    Output,
    Local,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalDecl {
    pub name: String,
    pub direction: Direction,
    pub init: Option<Value>,
    pub span: Span,
}

impl SignalDecl {
    pub fn input(name: impl Into<String>) -> Self {
        Self::new(name, Direction::Input)
    }

    pub fn output(name: impl Into<String>) -> Self {
        Self::new(name, Direction::Output)
    }

    pub fn local(name: impl Into<String>) -> Self {
        Self::new(name, Direction::Local)
    }

    fn new(name: impl Into<String>, direction: Direction) -> Self {
        SignalDecl {
            name: name.into(),
            direction,
            init: None,
            span: Span::default(),
        }
    }

    pub fn with_init(mut self, init: Value) -> Self {
        self.init = Some(init);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Eq => "===",
            BinaryOp::Ne => "!==",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
        }
    }

    /// Binding strength, higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne => 3,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => 6,
        }
    }
}

/// Pure signal expression over `S.now`, `S.nowval` and literals.
#[derive(Debug, Clone, PartialEq)]
pub enum SigExpr<S = String> {
    Lit(Value),
    Now(S),
    NowVal(S),
    Unary(UnaryOp, Box<SigExpr<S>>),
    Binary(BinaryOp, Box<SigExpr<S>>, Box<SigExpr<S>>),
}

impl<S> SigExpr<S> {
    pub fn now(sig: impl Into<S>) -> Self {
        SigExpr::Now(sig.into())
    }

    pub fn nowval(sig: impl Into<S>) -> Self {
        SigExpr::NowVal(sig.into())
    }

    pub fn lit(v: impl Into<Value>) -> Self {
        SigExpr::Lit(v.into())
    }

    pub fn binary(op: BinaryOp, lhs: SigExpr<S>, rhs: SigExpr<S>) -> Self {
        SigExpr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Every signal the expression reads, in left-to-right order.
    pub fn signals(&self) -> Vec<&S> {
        let mut out = Vec::new();
        self.collect_signals(&mut out);
        out
    }

    fn collect_signals<'a>(&'a self, out: &mut Vec<&'a S>) {
        match self {
            SigExpr::Lit(_) => {}
            SigExpr::Now(s) | SigExpr::NowVal(s) => out.push(s),
            SigExpr::Unary(_, e) => e.collect_signals(out),
            SigExpr::Binary(_, a, b) => {
                a.collect_signals(out);
                b.collect_signals(out);
            }
        }
    }

    pub fn try_map_signals<T, E>(
        &self,
        f: &mut impl FnMut(&S) -> Result<T, E>,
    ) -> Result<SigExpr<T>, E> {
        Ok(match self {
            SigExpr::Lit(v) => SigExpr::Lit(v.clone()),
            SigExpr::Now(s) => SigExpr::Now(f(s)?),
            SigExpr::NowVal(s) => SigExpr::NowVal(f(s)?),
            SigExpr::Unary(op, e) => SigExpr::Unary(*op, Box::new(e.try_map_signals(f)?)),
            SigExpr::Binary(op, a, b) => SigExpr::Binary(
                *op,
                Box::new(a.try_map_signals(f)?),
                Box::new(b.try_map_signals(f)?),
            ),
        })
    }
}

/// One binding of a `run` statement.
#[derive(Debug, Clone, PartialEq)]
pub enum Binding {
    /// `callee as caller`
    As { callee: String, caller: String },
    /// `param = argument`
    Assign { param: String, arg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunBindings {
    /// `run M(...)`: each interface signal binds to the caller signal of the same name.
    Implicit,
    Explicit(Vec<Binding>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Nothing,
    Emit {
        signal: String,
        value: Option<SigExpr>,
    },
    Await {
        expr: SigExpr,
        immediate: bool,
    },
    AwaitCount {
        count: u32,
        expr: SigExpr,
        immediate: bool,
    },
    Seq(Vec<Stmt>),
    Fork(Vec<Stmt>),
    Every {
        expr: SigExpr,
        immediate: bool,
        body: Box<Stmt>,
    },
    If {
        expr: SigExpr,
        then: Box<Stmt>,
        otherwise: Option<Box<Stmt>>,
    },
    Loop(Box<Stmt>),
    Abort {
        expr: SigExpr,
        body: Box<Stmt>,
    },
    Suspend {
        expr: SigExpr,
        body: Box<Stmt>,
    },
    Run {
        module: String,
        bindings: RunBindings,
    },
    /// Local signal scoped over `body`.
    Local {
        decl: SignalDecl,
        body: Box<Stmt>,
    },
    /// Hands control to a host task. `signals` are the signals the task may
    /// inject into future reactions; the statement terminates in the first
    /// later instant where `done` is present.
    Async {
        task: String,
        signals: Vec<String>,
        done: Option<String>,
    },
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Stmt {
            kind,
            span: Span::default(),
        }
    }

    pub fn at(mut self, span: Span) -> Self {
        self.span = span;
        self
    }

    pub fn nothing() -> Self {
        Stmt::new(StmtKind::Nothing)
    }

    pub fn emit(signal: impl Into<String>, value: Option<Value>) -> Self {
        Stmt::new(StmtKind::Emit {
            signal: signal.into(),
            value: value.map(SigExpr::Lit),
        })
    }

    pub fn await_(expr: SigExpr) -> Self {
        Stmt::new(StmtKind::Await {
            expr,
            immediate: false,
        })
    }

    pub fn await_immediate(expr: SigExpr) -> Self {
        Stmt::new(StmtKind::Await {
            expr,
            immediate: true,
        })
    }

    pub fn await_count(count: u32, expr: SigExpr) -> Self {
        Stmt::new(StmtKind::AwaitCount {
            count,
            expr,
            immediate: false,
        })
    }

    pub fn seq(stmts: Vec<Stmt>) -> Self {
        Stmt::new(StmtKind::Seq(stmts))
    }

    pub fn fork(branches: Vec<Stmt>) -> Self {
        Stmt::new(StmtKind::Fork(branches))
    }

    pub fn every(expr: SigExpr, body: Stmt) -> Self {
        Stmt::new(StmtKind::Every {
            expr,
            immediate: false,
            body: Box::new(body),
        })
    }

    pub fn if_(expr: SigExpr, then: Stmt, otherwise: Option<Stmt>) -> Self {
        Stmt::new(StmtKind::If {
            expr,
            then: Box::new(then),
            otherwise: otherwise.map(Box::new),
        })
    }

    pub fn loop_(body: Stmt) -> Self {
        Stmt::new(StmtKind::Loop(Box::new(body)))
    }

    pub fn abort(expr: SigExpr, body: Stmt) -> Self {
        Stmt::new(StmtKind::Abort {
            expr,
            body: Box::new(body),
        })
    }

    pub fn suspend(expr: SigExpr, body: Stmt) -> Self {
        Stmt::new(StmtKind::Suspend {
            expr,
            body: Box::new(body),
        })
    }

    pub fn run(module: impl Into<String>, bindings: RunBindings) -> Self {
        Stmt::new(StmtKind::Run {
            module: module.into(),
            bindings,
        })
    }

    pub fn local(decl: SignalDecl, body: Stmt) -> Self {
        Stmt::new(StmtKind::Local {
            decl,
            body: Box::new(body),
        })
    }

    /// Pre-order walk over this statement and all nested statements.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        match &self.kind {
            StmtKind::Seq(v) | StmtKind::Fork(v) => v.iter().for_each(|s| s.walk(f)),
            StmtKind::Every { body, .. }
            | StmtKind::Loop(body)
            | StmtKind::Abort { body, .. }
            | StmtKind::Suspend { body, .. }
            | StmtKind::Local { body, .. } => body.walk(f),
            StmtKind::If {
                then, otherwise, ..
            } => {
                then.walk(f);
                if let Some(o) = otherwise {
                    o.walk(f);
                }
            }
            StmtKind::Nothing
            | StmtKind::Emit { .. }
            | StmtKind::Await { .. }
            | StmtKind::AwaitCount { .. }
            | StmtKind::Run { .. }
            | StmtKind::Async { .. } => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleDef {
    pub name: String,
    pub interface: Vec<SignalDecl>,
    pub body: Stmt,
    pub span: Span,
}

impl ModuleDef {
    pub fn new(name: impl Into<String>, interface: Vec<SignalDecl>, body: Stmt) -> Self {
        ModuleDef {
            name: name.into(),
            interface,
            body,
            span: Span::default(),
        }
    }
}
