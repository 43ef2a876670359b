use std::collections::BTreeMap;
use std::fmt::Write;

use crate::kernel::ast::{
    Binding, Direction, ModuleDef, RunBindings, SigExpr, SignalDecl, Stmt, StmtKind, UnaryOp,
};

const INDENT: &str = "    ";

/// Renders an expression with the fewest parentheses that re-parse to the
/// same tree.
pub fn print_expr(e: &SigExpr) -> String {
    let mut out = String::new();
    expr(e, &mut out);
    out
}

fn expr(e: &SigExpr, out: &mut String) {
    match e {
        SigExpr::Lit(v) => write!(out, "{v}").unwrap(),
        SigExpr::Now(s) => write!(out, "{s}.now").unwrap(),
        SigExpr::NowVal(s) => write!(out, "{s}.nowval").unwrap(),
        SigExpr::Unary(op, inner) => {
            out.push(match op {
                UnaryOp::Not => '!',
                UnaryOp::Neg => '-',
            });
            let wrap = matches!(**inner, SigExpr::Binary(..));
            operand(inner, wrap, out);
        }
        SigExpr::Binary(op, l, r) => {
            let prec = op.precedence();
            operand(l, matches!(**l, SigExpr::Binary(o, ..) if o.precedence() < prec), out);
            write!(out, " {} ", op.symbol()).unwrap();
            operand(r, matches!(**r, SigExpr::Binary(o, ..) if o.precedence() <= prec), out);
        }
    }
}

fn operand(e: &SigExpr, wrap: bool, out: &mut String) {
    if wrap {
        out.push('(');
        expr(e, out);
        out.push(')');
    } else {
        expr(e, out);
    }
}

/// Renders one statement, without a trailing newline on the last line.
pub fn print_stmt(s: &Stmt) -> String {
    let mut out = String::new();
    stmt(s, 0, &mut out);
    out.truncate(out.trim_end().len());
    out
}

pub fn print_module(m: &ModuleDef) -> String {
    let mut out = String::new();
    let decls: Vec<String> = m.interface.iter().map(decl).collect();
    write!(out, "module {}({}) ", m.name, decls.join(", ")).unwrap();
    block(&m.body, 0, &mut out);
    out.push('\n');
    out
}

/// Renders a whole orchestration, modules separated by blank lines.
pub fn print_modules(modules: &BTreeMap<String, ModuleDef>) -> String {
    modules
        .values()
        .map(print_module)
        .collect::<Vec<_>>()
        .join("\n")
}

fn decl(d: &SignalDecl) -> String {
    let kw = match d.direction {
        Direction::Input => "in ",
        Direction::Output => "out ",
        Direction::Local => "signal ",
    };
    match &d.init {
        Some(v) => format!("{kw}{} = {v}", d.name),
        None => format!("{kw}{}", d.name),
    }
}

fn block(s: &Stmt, depth: usize, out: &mut String) {
    out.push_str("{\n");
    items(s, depth + 1, out);
    out.push_str(&INDENT.repeat(depth));
    out.push('}');
}

fn items(s: &Stmt, depth: usize, out: &mut String) {
    match &s.kind {
        StmtKind::Seq(v) => v.iter().for_each(|c| items_one(c, depth, out)),
        _ => items_one(s, depth, out),
    }
}

// A nested sequence only arises as the body of a local, which already
// flattens into its enclosing block.
fn items_one(s: &Stmt, depth: usize, out: &mut String) {
    if let StmtKind::Local { decl: d, body } = &s.kind {
        writeln!(out, "{}{};", INDENT.repeat(depth), decl(d)).unwrap();
        items(body, depth, out);
    } else {
        stmt(s, depth, out);
    }
}

fn stmt(s: &Stmt, depth: usize, out: &mut String) {
    let pad = INDENT.repeat(depth);
    let imm = |b: bool| if b { "immediate " } else { "" };
    out.push_str(&pad);
    match &s.kind {
        StmtKind::Nothing => out.push_str("nothing;"),
        StmtKind::Emit { signal, value } => {
            let v = value.as_ref().map(print_expr).unwrap_or_default();
            write!(out, "emit {signal}({v});").unwrap();
        }
        StmtKind::Await { expr, immediate } => {
            write!(out, "await {}({});", imm(*immediate), print_expr(expr)).unwrap()
        }
        StmtKind::AwaitCount {
            count,
            expr,
            immediate,
        } => write!(
            out,
            "await {}count({count}, {});",
            imm(*immediate),
            print_expr(expr)
        )
        .unwrap(),
        StmtKind::Seq(_) | StmtKind::Local { .. } => {
            // Only reachable for a bare sequence printed on its own.
            out.truncate(out.len() - pad.len());
            items(s, depth, out);
            return;
        }
        StmtKind::Fork(branches) => {
            out.push_str("fork ");
            for (i, b) in branches.iter().enumerate() {
                if i > 0 {
                    out.push_str(" par ");
                }
                block(b, depth, out);
            }
        }
        StmtKind::Every {
            expr,
            immediate,
            body,
        } => {
            write!(out, "every {}({}) ", imm(*immediate), print_expr(expr)).unwrap();
            block(body, depth, out);
        }
        StmtKind::If { .. } => if_chain(s, depth, out),
        StmtKind::Loop(body) => {
            out.push_str("loop ");
            block(body, depth, out);
        }
        StmtKind::Abort { expr, body } => {
            write!(out, "abort ({}) ", print_expr(expr)).unwrap();
            block(body, depth, out);
        }
        StmtKind::Suspend { expr, body } => {
            write!(out, "suspend ({}) ", print_expr(expr)).unwrap();
            block(body, depth, out);
        }
        StmtKind::Run { module, bindings } => {
            let args = match bindings {
                RunBindings::Implicit => "...".to_string(),
                RunBindings::Explicit(v) => v
                    .iter()
                    .map(|b| match b {
                        Binding::As { callee, caller } => format!("{callee} as {caller}"),
                        Binding::Assign { param, arg } => format!("{param} = {arg}"),
                    })
                    .collect::<Vec<_>>()
                    .join(", "),
            };
            write!(out, "run {module}({args});").unwrap();
        }
        StmtKind::Async {
            task,
            signals,
            done,
        } => {
            write!(out, "async {task}({})", signals.join(", ")).unwrap();
            if let Some(d) = done {
                write!(out, " done {d}").unwrap();
            }
            out.push(';');
        }
    }
    out.push('\n');
}

fn if_chain(s: &Stmt, depth: usize, out: &mut String) {
    let StmtKind::If {
        expr,
        then,
        otherwise,
    } = &s.kind
    else {
        unreachable!()
    };
    write!(out, "if ({}) ", print_expr(expr)).unwrap();
    block(then, depth, out);
    if let Some(o) = otherwise {
        out.push_str(" else ");
        if matches!(o.kind, StmtKind::If { .. }) {
            if_chain(o, depth, out);
        } else {
            block(o, depth, out);
        }
    }
}
