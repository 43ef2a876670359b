//! Elaborated programs: module instantiations inlined, every signal
//! reference resolved to a [`SigId`] in the program's signal table.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use super::ast::{Direction, SigExpr, Span};
use super::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SigId(pub u32);

impl SigId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, PartialEq)]
pub struct SignalInfo {
    /// Source name. Distinct local instances may share a name.
    pub name: String,
    pub direction: Direction,
    pub init: Option<Value>,
}

impl SignalInfo {
    /// Inputs and outputs cross the machine boundary; locals never do.
    pub fn is_boundary(&self) -> bool {
        self.direction != Direction::Local
    }
}

pub type Expr = SigExpr<SigId>;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub span: Span,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Nothing,
    Emit {
        signal: SigId,
        value: Option<Expr>,
    },
    /// `await` when `count == 1`, `await count` otherwise.
    Await {
        count: u32,
        expr: Expr,
        immediate: bool,
    },
    Seq(Vec<Node>),
    Fork(Vec<Node>),
    Every {
        expr: Expr,
        immediate: bool,
        body: Box<Node>,
    },
    If {
        expr: Expr,
        then: Box<Node>,
        otherwise: Option<Box<Node>>,
    },
    Loop(Box<Node>),
    Abort {
        expr: Expr,
        body: Box<Node>,
    },
    Suspend {
        expr: Expr,
        body: Box<Node>,
    },
    Local {
        signal: SigId,
        body: Box<Node>,
    },
    Async {
        task: String,
        signals: Vec<SigId>,
        done: Option<SigId>,
    },
}

impl Node {
    pub fn children(&self) -> Vec<&Node> {
        match &self.kind {
            NodeKind::Seq(v) | NodeKind::Fork(v) => v.iter().collect(),
            NodeKind::Every { body, .. }
            | NodeKind::Loop(body)
            | NodeKind::Abort { body, .. }
            | NodeKind::Suspend { body, .. }
            | NodeKind::Local { body, .. } => vec![body],
            NodeKind::If {
                then, otherwise, ..
            } => {
                let mut v = vec![then.as_ref()];
                if let Some(o) = otherwise {
                    v.push(o);
                }
                v
            }
            NodeKind::Nothing
            | NodeKind::Emit { .. }
            | NodeKind::Await { .. }
            | NodeKind::Async { .. } => Vec::new(),
        }
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Node)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub signals: Vec<SignalInfo>,
    pub body: Node,
    pub node_count: u32,
}

impl Program {
    pub fn signal(&self, id: SigId) -> &SignalInfo {
        &self.signals[id.index()]
    }

    pub fn name(&self, id: SigId) -> &str {
        &self.signals[id.index()].name
    }

    /// Boundary signal with the given name and direction.
    pub fn lookup(&self, name: &str, direction: Direction) -> Option<SigId> {
        self.signals
            .iter()
            .position(|s| s.direction == direction && s.name == name)
            .map(|i| SigId(i as u32))
    }

    pub fn inputs(&self) -> impl Iterator<Item = (SigId, &SignalInfo)> {
        self.boundary(Direction::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = (SigId, &SignalInfo)> {
        self.boundary(Direction::Output)
    }

    fn boundary(&self, dir: Direction) -> impl Iterator<Item = (SigId, &SignalInfo)> {
        self.signals
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.direction == dir)
            .map(|(i, s)| (SigId(i as u32), s))
    }

    /// Signals named by at least one `emit` in the program.
    pub fn emitted_signals(&self) -> BTreeSet<SigId> {
        let mut out = BTreeSet::new();
        self.body.walk(&mut |n| {
            if let NodeKind::Emit { signal, .. } = &n.kind {
                out.insert(*signal);
            }
        });
        out
    }

    /// Renders the program with signal names, one statement per line.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        self.pretty_node(&self.body, 0, &mut out);
        out
    }

    fn expr(&self, e: &Expr) -> String {
        let named = e
            .try_map_signals::<String, ()>(&mut |id| Ok(self.name(*id).to_owned()))
            .expect("infallible");
        crate::dsl::print_expr(&named)
    }

    fn pretty_node(&self, node: &Node, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        let imm = |b: bool| if b { "immediate " } else { "" };
        match &node.kind {
            NodeKind::Nothing => writeln!(out, "{pad}nothing").unwrap(),
            NodeKind::Emit { signal, value } => {
                let v = value.as_ref().map(|e| self.expr(e)).unwrap_or_default();
                writeln!(out, "{pad}emit {}({v})", self.name(*signal)).unwrap()
            }
            NodeKind::Await {
                count,
                expr,
                immediate,
            } => {
                if *count == 1 {
                    writeln!(out, "{pad}await {}({})", imm(*immediate), self.expr(expr)).unwrap()
                } else {
                    writeln!(
                        out,
                        "{pad}await {}count({count}, {})",
                        imm(*immediate),
                        self.expr(expr)
                    )
                    .unwrap()
                }
            }
            NodeKind::Seq(v) => {
                writeln!(out, "{pad}seq").unwrap();
                v.iter().for_each(|n| self.pretty_node(n, depth + 1, out));
            }
            NodeKind::Fork(v) => {
                writeln!(out, "{pad}fork").unwrap();
                v.iter().for_each(|n| self.pretty_node(n, depth + 1, out));
            }
            NodeKind::Every {
                expr,
                immediate,
                body,
            } => {
                writeln!(out, "{pad}every {}({})", imm(*immediate), self.expr(expr)).unwrap();
                self.pretty_node(body, depth + 1, out);
            }
            NodeKind::If {
                expr,
                then,
                otherwise,
            } => {
                writeln!(out, "{pad}if ({})", self.expr(expr)).unwrap();
                self.pretty_node(then, depth + 1, out);
                if let Some(o) = otherwise {
                    writeln!(out, "{pad}else").unwrap();
                    self.pretty_node(o, depth + 1, out);
                }
            }
            NodeKind::Loop(body) => {
                writeln!(out, "{pad}loop").unwrap();
                self.pretty_node(body, depth + 1, out);
            }
            NodeKind::Abort { expr, body } => {
                writeln!(out, "{pad}abort ({})", self.expr(expr)).unwrap();
                self.pretty_node(body, depth + 1, out);
            }
            NodeKind::Suspend { expr, body } => {
                writeln!(out, "{pad}suspend ({})", self.expr(expr)).unwrap();
                self.pretty_node(body, depth + 1, out);
            }
            NodeKind::Local { signal, body } => {
                writeln!(out, "{pad}signal {}", self.name(*signal)).unwrap();
                self.pretty_node(body, depth + 1, out);
            }
            NodeKind::Async {
                task,
                signals,
                done,
            } => {
                let args: Vec<_> = signals.iter().map(|s| self.name(*s)).collect();
                write!(out, "{pad}async {task}({})", args.join(", ")).unwrap();
                if let Some(d) = done {
                    write!(out, " done {}", self.name(*d)).unwrap();
                }
                out.push('\n');
            }
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty())
    }
}
