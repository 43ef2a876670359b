use std::collections::{BTreeMap, BTreeSet};

use crate::kernel::ast::{
    BinaryOp, Binding, Direction, ModuleDef, RunBindings, SigExpr, SignalDecl, Span, Stmt,
    StmtKind, UnaryOp,
};
use crate::kernel::Value;

use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

/// Parses an orchestration source into its modules, keyed by name.
pub fn parse_orchestration(source: &str) -> Result<BTreeMap<String, ModuleDef>, ParseError> {
    let mut p = Parser::new(source)?;
    let mut modules = BTreeMap::new();
    while !p.at_eof() {
        let m = p.module()?;
        if modules.contains_key(&m.name) {
            return Err(ParseError::DuplicateModule {
                name: m.name,
                span: m.span,
            });
        }
        modules.insert(m.name.clone(), m);
    }
    Ok(modules)
}

/// Parses a standalone signal expression such as `A.now && B.nowval > 2`.
pub fn parse_expr(source: &str) -> Result<SigExpr, ParseError> {
    let mut p = Parser::new(source)?;
    let e = p.expr()?;
    if !p.at_eof() {
        return Err(p.unexpected("end of expression"));
    }
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    scopes: Vec<BTreeSet<String>>,
}

const STMT_KEYWORDS: &[&str] = &[
    "nothing", "emit", "await", "fork", "every", "if", "loop", "abort", "suspend", "run",
    "signal", "async",
];

impl Parser {
    fn new(source: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: tokenize(source)?,
            pos: 0,
            scopes: Vec::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let found = match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Num(n) => format!("number {n}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        };
        ParseError::syntax(self.span(), format!("expected {wanted}, found {found}"))
    }

    fn is_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if self.is_sym(sym) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), ParseError> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{sym}`")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Ident(s) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn declare(&mut self, name: &str, span: Span) -> Result<(), ParseError> {
        let scope = self.scopes.last_mut().expect("declaration outside a scope");
        if !scope.insert(name.to_string()) {
            return Err(ParseError::DuplicateSignalDecl {
                name: name.to_string(),
                span,
            });
        }
        Ok(())
    }

    fn module(&mut self) -> Result<ModuleDef, ParseError> {
        let span = self.span();
        self.expect_kw("module")?;
        let name = self.ident()?;
        self.expect_sym("(")?;
        self.scopes.push(BTreeSet::new());
        let mut interface = Vec::new();
        if !self.is_sym(")") {
            loop {
                let dspan = self.span();
                let direction = if self.eat_kw("in") {
                    Direction::Input
                } else if self.eat_kw("out") {
                    Direction::Output
                } else {
                    return Err(self.unexpected("`in` or `out`"));
                };
                let name = self.ident()?;
                self.declare(&name, dspan)?;
                let init = if self.eat_sym("=") {
                    Some(self.literal()?)
                } else {
                    None
                };
                interface.push(SignalDecl {
                    name,
                    direction,
                    init,
                    span: dspan,
                });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        // The body block shares the interface scope.
        let body = self.block_in_current_scope()?;
        self.scopes.pop();
        Ok(ModuleDef {
            name,
            interface,
            body,
            span,
        })
    }

    fn block(&mut self) -> Result<Stmt, ParseError> {
        self.scopes.push(BTreeSet::new());
        let b = self.block_in_current_scope();
        self.scopes.pop();
        b
    }

    fn block_in_current_scope(&mut self) -> Result<Stmt, ParseError> {
        let span = self.span();
        self.expect_sym("{")?;
        let body = self.items(span)?;
        self.expect_sym("}")?;
        Ok(body)
    }

    /// Statements up to the closing brace. A local declaration scopes over
    /// the remainder of the block.
    fn items(&mut self, span: Span) -> Result<Stmt, ParseError> {
        let mut items = Vec::new();
        while !self.is_sym("}") {
            if self.is_kw("signal") {
                let dspan = self.span();
                self.advance();
                let name = self.ident()?;
                self.declare(&name, dspan)?;
                let init = if self.eat_sym("=") {
                    Some(self.literal()?)
                } else {
                    None
                };
                self.expect_sym(";")?;
                let rest_span = self.span();
                let body = self.items(rest_span)?;
                let decl = SignalDecl {
                    name,
                    direction: Direction::Local,
                    init,
                    span: dspan,
                };
                items.push(Stmt::local(decl, body).at(dspan));
                break;
            }
            items.push(self.stmt()?);
        }
        Ok(match items.len() {
            1 => items.pop().unwrap(),
            _ => Stmt::seq(items).at(span),
        })
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let span = self.span();
        let word = match self.peek() {
            Tok::Ident(w) => w.clone(),
            _ => return Err(self.unexpected("statement")),
        };
        if !STMT_KEYWORDS.contains(&word.as_str()) {
            return Err(ParseError::UnknownConstruct { word, span });
        }
        self.advance();
        let kind = match word.as_str() {
            "nothing" => {
                self.expect_sym(";")?;
                StmtKind::Nothing
            }
            "emit" => {
                let signal = self.ident()?;
                self.expect_sym("(")?;
                let value = if self.is_sym(")") {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect_sym(")")?;
                self.expect_sym(";")?;
                StmtKind::Emit { signal, value }
            }
            "await" => {
                let immediate = self.eat_kw("immediate");
                let kind = if self.eat_kw("count") {
                    self.expect_sym("(")?;
                    let count = self.count()?;
                    self.expect_sym(",")?;
                    let expr = self.expr()?;
                    self.expect_sym(")")?;
                    StmtKind::AwaitCount {
                        count,
                        expr,
                        immediate,
                    }
                } else {
                    let expr = self.paren_expr()?;
                    StmtKind::Await { expr, immediate }
                };
                self.expect_sym(";")?;
                kind
            }
            "fork" => {
                let mut branches = vec![self.block()?];
                if !self.is_kw("par") {
                    return Err(self.unexpected("`par`"));
                }
                while self.eat_kw("par") {
                    branches.push(self.block()?);
                }
                StmtKind::Fork(branches)
            }
            "every" => {
                let immediate = self.eat_kw("immediate");
                let expr = self.paren_expr()?;
                let body = Box::new(self.block()?);
                StmtKind::Every {
                    expr,
                    immediate,
                    body,
                }
            }
            "if" => return self.if_rest(span),
            "loop" => StmtKind::Loop(Box::new(self.block()?)),
            "abort" => {
                let expr = self.paren_expr()?;
                StmtKind::Abort {
                    expr,
                    body: Box::new(self.block()?),
                }
            }
            "suspend" => {
                let expr = self.paren_expr()?;
                StmtKind::Suspend {
                    expr,
                    body: Box::new(self.block()?),
                }
            }
            "run" => {
                let module = self.ident()?;
                self.expect_sym("(")?;
                let bindings = if self.eat_sym("...") {
                    RunBindings::Implicit
                } else {
                    let mut v = Vec::new();
                    if !self.is_sym(")") {
                        loop {
                            v.push(self.binding()?);
                            if !self.eat_sym(",") {
                                break;
                            }
                        }
                    }
                    RunBindings::Explicit(v)
                };
                self.expect_sym(")")?;
                self.expect_sym(";")?;
                StmtKind::Run { module, bindings }
            }
            "async" => {
                let task = self.ident()?;
                self.expect_sym("(")?;
                let mut signals = Vec::new();
                if !self.is_sym(")") {
                    loop {
                        signals.push(self.ident()?);
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                }
                self.expect_sym(")")?;
                let done = if self.eat_kw("done") {
                    Some(self.ident()?)
                } else {
                    None
                };
                self.expect_sym(";")?;
                StmtKind::Async {
                    task,
                    signals,
                    done,
                }
            }
            _ => unreachable!("keyword list and match arms disagree"),
        };
        Ok(Stmt::new(kind).at(span))
    }

    fn if_rest(&mut self, span: Span) -> Result<Stmt, ParseError> {
        let expr = self.paren_expr()?;
        let then = self.block()?;
        let otherwise = if self.eat_kw("else") {
            if self.is_kw("if") {
                let s = self.span();
                self.advance();
                Some(self.if_rest(s)?)
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(Stmt::if_(expr, then, otherwise).at(span))
    }

    fn binding(&mut self) -> Result<Binding, ParseError> {
        let first = self.ident()?;
        if self.eat_kw("as") {
            Ok(Binding::As {
                callee: first,
                caller: self.ident()?,
            })
        } else if self.eat_sym("=") {
            Ok(Binding::Assign {
                param: first,
                arg: self.ident()?,
            })
        } else {
            Err(self.unexpected("`as` or `=`"))
        }
    }

    fn count(&mut self) -> Result<u32, ParseError> {
        match *self.peek() {
            Tok::Num(n) if n.fract() == 0.0 && n >= 0.0 && n <= u32::MAX as f64 => {
                self.advance();
                Ok(n as u32)
            }
            _ => Err(self.unexpected("integer count")),
        }
    }

    fn literal(&mut self) -> Result<Value, ParseError> {
        let neg = self.eat_sym("-");
        let v = match self.peek().clone() {
            Tok::Num(n) => Value::Num(if neg { -n } else { n }),
            Tok::Str(s) if !neg => Value::Str(s),
            Tok::Ident(w) if !neg && (w == "true" || w == "false") => Value::Bool(w == "true"),
            _ => return Err(self.unexpected("literal")),
        };
        self.advance();
        Ok(v)
    }

    fn paren_expr(&mut self) -> Result<SigExpr, ParseError> {
        self.expect_sym("(")?;
        let e = self.expr()?;
        self.expect_sym(")")?;
        Ok(e)
    }

    pub(crate) fn expr(&mut self) -> Result<SigExpr, ParseError> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        let Tok::Sym(s) = self.peek() else {
            return None;
        };
        Some(match *s {
            "||" => BinaryOp::Or,
            "&&" => BinaryOp::And,
            "==" | "===" => BinaryOp::Eq,
            "!=" | "!==" => BinaryOp::Ne,
            "<" => BinaryOp::Lt,
            "<=" => BinaryOp::Le,
            ">" => BinaryOp::Gt,
            ">=" => BinaryOp::Ge,
            "+" => BinaryOp::Add,
            "-" => BinaryOp::Sub,
            "*" => BinaryOp::Mul,
            "/" => BinaryOp::Div,
            "%" => BinaryOp::Rem,
            _ => return None,
        })
    }

    // Precedence climbing; every binary operator is left-associative.
    fn binary(&mut self, min_prec: u8) -> Result<SigExpr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            if op.precedence() < min_prec {
                break;
            }
            self.advance();
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = SigExpr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<SigExpr, ParseError> {
        if self.eat_sym("!") {
            return Ok(SigExpr::Unary(UnaryOp::Not, Box::new(self.unary()?)));
        }
        if self.eat_sym("-") {
            if let Tok::Num(n) = *self.peek() {
                self.advance();
                return Ok(SigExpr::Lit(Value::Num(-n)));
            }
            return Ok(SigExpr::Unary(UnaryOp::Neg, Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<SigExpr, ParseError> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.advance();
                Ok(SigExpr::Lit(Value::Num(n)))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(SigExpr::Lit(Value::Str(s)))
            }
            Tok::Sym("(") => self.paren_expr(),
            Tok::Ident(w) if (w == "true" || w == "false") && !matches!(self.peek_at(1), Tok::Sym(".")) => {
                self.advance();
                Ok(SigExpr::Lit(Value::Bool(w == "true")))
            }
            Tok::Ident(name) => {
                self.advance();
                self.expect_sym(".")?;
                let field_span = self.span();
                match self.ident()?.as_str() {
                    "now" => Ok(SigExpr::Now(name)),
                    "nowval" => Ok(SigExpr::NowVal(name)),
                    other => Err(ParseError::syntax(
                        field_span,
                        format!("expected `now` or `nowval`, found `{other}`"),
                    )),
                }
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body(src: &str) -> Stmt {
        let m = parse_orchestration(&format!("module M(in A, in B) {{ {src} }}")).unwrap();
        m["M"].body.clone()
    }

    #[test]
    fn await_count() {
        let s = body("await count(3, ChromBassIn.now);");
        assert_eq!(s, Stmt::await_count(3, SigExpr::now("ChromBassIn")));
    }

    #[test]
    fn fork_par() {
        let s = body("fork { emit A(true); } par { emit B(true); }");
        assert_eq!(
            s,
            Stmt::fork(vec![
                Stmt::emit("A", Some(Value::Bool(true))),
                Stmt::emit("B", Some(Value::Bool(true))),
            ])
        );
    }

    #[test]
    fn tank_run_binding() {
        let s = body("run Tank(sigarray = ChromPercuTank);");
        assert_eq!(
            s,
            Stmt::run(
                "Tank",
                RunBindings::Explicit(vec![Binding::Assign {
                    param: "sigarray".into(),
                    arg: "ChromPercuTank".into(),
                }])
            )
        );
    }

    #[test]
    fn implicit_and_as_bindings() {
        assert_eq!(body("run X(...);"), Stmt::run("X", RunBindings::Implicit));
        assert_eq!(
            body("run X(solo as leadChoice);"),
            Stmt::run(
                "X",
                RunBindings::Explicit(vec![Binding::As {
                    callee: "solo".into(),
                    caller: "leadChoice".into()
                }])
            )
        );
    }

    #[test]
    fn locals_scope_over_rest_of_block() {
        let s = body("emit A(); signal S = 2; emit S(S.nowval + 1); emit B();");
        let StmtKind::Seq(items) = &s.kind else {
            panic!("{s:?}")
        };
        assert_eq!(items.len(), 2);
        let StmtKind::Local { decl, body } = &items[1].kind else {
            panic!()
        };
        assert_eq!(decl.init, Some(Value::Num(2.0)));
        assert!(matches!(&body.kind, StmtKind::Seq(v) if v.len() == 2));
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expr("1 - 2 - 3 * 4 % 5 < 6 && !A.now || B.nowval === 'x'").unwrap();
        use BinaryOp::*;
        let lhs = SigExpr::binary(
            Sub,
            SigExpr::binary(Sub, SigExpr::lit(1), SigExpr::lit(2)),
            SigExpr::binary(Rem, SigExpr::binary(Mul, SigExpr::lit(3), SigExpr::lit(4)), SigExpr::lit(5)),
        );
        let expected = SigExpr::binary(
            Or,
            SigExpr::binary(
                And,
                SigExpr::binary(Lt, lhs, SigExpr::lit(6)),
                SigExpr::Unary(UnaryOp::Not, Box::new(SigExpr::now("A"))),
            ),
            SigExpr::binary(Eq, SigExpr::nowval("B"), SigExpr::lit("x")),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_orchestration("module M() {\n  emit A(;\n}").unwrap_err();
        assert!(matches!(err, ParseError::SyntaxError { line: 2, col: 10, .. }), "{err:?}");
    }

    #[test]
    fn unknown_construct() {
        let err = parse_orchestration("module M() {\n  sustain A;\n}").unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownConstruct {
                word: "sustain".into(),
                span: Span::new(2, 3)
            }
        );
        assert_eq!(err.position(), (2, 3));
    }

    #[test]
    fn duplicate_declarations() {
        let err = parse_orchestration("module M(in A, out A) { nothing; }").unwrap_err();
        assert!(matches!(err, ParseError::DuplicateSignalDecl { ref name, .. } if name == "A"));
        let err = parse_orchestration("module M(in A) { signal A; nothing; }").unwrap_err();
        assert!(matches!(err, ParseError::DuplicateSignalDecl { .. }));
        // Nested blocks may shadow.
        parse_orchestration("module M(in A) { loop { signal A; await (A.now); } }").unwrap();
    }

    #[test]
    fn else_if_chains() {
        let s = body("if (A.now) { nothing; } else if (B.now) { emit A(); } else { emit B(); }");
        let StmtKind::If { otherwise, .. } = &s.kind else {
            panic!()
        };
        assert!(matches!(otherwise.as_deref().map(|o| &o.kind), Some(StmtKind::If { .. })));
    }

    #[test]
    fn comments_are_ignored() {
        let s = body("// hello\n/* block\n comment */ nothing;");
        assert_eq!(s, Stmt::nothing());
    }
}
