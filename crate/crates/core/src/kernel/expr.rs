//! Evaluation of signal expressions against a partially known environment.

use thiserror::Error;

use super::ast::{BinaryOp, UnaryOp};
use super::ir::{Expr, SigId};
use super::value::Value;

/// What the current instant knows about a signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Unknown,
    Present,
    Absent,
}

/// Read access to signal statuses and visible values.
pub trait SignalEnv {
    fn status(&self, sig: SigId) -> Status;
    /// Value `S.nowval` would return once the status is settled.
    fn value(&self, sig: SigId) -> Option<&Value>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum Eval {
    Ready(Value),
    /// The expression reads this signal, whose status is not settled yet.
    NotReady(SigId),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("value of signal #{} read before any emission or initialization", .0.index())]
    UninitializedValueRead(SigId),
    #[error("operator `{op}` cannot combine {lhs} and {rhs}")]
    BinaryType {
        op: &'static str,
        lhs: &'static str,
        rhs: &'static str,
    },
    #[error("operator `-` expects a number, found {0}")]
    NegType(&'static str),
}

/// Evaluates `expr`, or reports the first unsettled signal it depends on.
///
/// `&&` and `||` short-circuit: an operand that is not needed is not read,
/// so it cannot make the expression unready.
pub fn eval_sig_expr(env: &impl SignalEnv, expr: &Expr) -> Result<Eval, EvalError> {
    macro_rules! ready {
        ($e:expr) => {
            match eval_sig_expr(env, $e)? {
                Eval::Ready(v) => v,
                not_ready => return Ok(not_ready),
            }
        };
    }
    let v = match expr {
        Expr::Lit(v) => v.clone(),
        Expr::Now(s) => match env.status(*s) {
            Status::Unknown => return Ok(Eval::NotReady(*s)),
            st => Value::Bool(st == Status::Present),
        },
        Expr::NowVal(s) => match env.status(*s) {
            Status::Unknown => return Ok(Eval::NotReady(*s)),
            _ => env
                .value(*s)
                .cloned()
                .ok_or(EvalError::UninitializedValueRead(*s))?,
        },
        Expr::Unary(UnaryOp::Not, e) => Value::Bool(!ready!(e).truthy()),
        Expr::Unary(UnaryOp::Neg, e) => match ready!(e) {
            Value::Num(n) => Value::Num(-n),
            other => return Err(EvalError::NegType(other.type_name())),
        },
        Expr::Binary(BinaryOp::And, a, b) => {
            let l = ready!(a);
            if !l.truthy() {
                Value::Bool(false)
            } else {
                Value::Bool(ready!(b).truthy())
            }
        }
        Expr::Binary(BinaryOp::Or, a, b) => {
            let l = ready!(a);
            if l.truthy() {
                Value::Bool(true)
            } else {
                Value::Bool(ready!(b).truthy())
            }
        }
        Expr::Binary(op, a, b) => {
            let l = ready!(a);
            let r = ready!(b);
            binary(*op, l, r)?
        }
    };
    Ok(Eval::Ready(v))
}

fn binary(op: BinaryOp, l: Value, r: Value) -> Result<Value, EvalError> {
    let mismatch = |l: &Value, r: &Value| EvalError::BinaryType {
        op: op.symbol(),
        lhs: l.type_name(),
        rhs: r.type_name(),
    };
    Ok(match op {
        BinaryOp::Eq => Value::Bool(l == r),
        BinaryOp::Ne => Value::Bool(l != r),
        BinaryOp::Add => match (&l, &r) {
            (Value::Num(x), Value::Num(y)) => Value::Num(x + y),
            (Value::Str(x), Value::Str(y)) => Value::Str(format!("{x}{y}")),
            (Value::Str(x), Value::Num(_)) => Value::Str(format!("{x}{r}")),
            (Value::Num(_), Value::Str(y)) => Value::Str(format!("{l}{y}")),
            _ => return Err(mismatch(&l, &r)),
        },
        BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => {
            let (Value::Num(x), Value::Num(y)) = (&l, &r) else {
                return Err(mismatch(&l, &r));
            };
            Value::Num(match op {
                BinaryOp::Sub => x - y,
                BinaryOp::Mul => x * y,
                BinaryOp::Div => x / y,
                _ => x % y,
            })
        }
        BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
            let ord = match (&l, &r) {
                (Value::Num(x), Value::Num(y)) => x.partial_cmp(y),
                (Value::Str(x), Value::Str(y)) => Some(x.cmp(y)),
                _ => return Err(mismatch(&l, &r)),
            };
            let Some(ord) = ord else {
                return Ok(Value::Bool(false));
            };
            Value::Bool(match op {
                BinaryOp::Lt => ord.is_lt(),
                BinaryOp::Le => ord.is_le(),
                BinaryOp::Gt => ord.is_gt(),
                _ => ord.is_ge(),
            })
        }
        BinaryOp::And | BinaryOp::Or => unreachable!("short-circuit operators handled above"),
    })
}

/// A plain environment, mostly useful in tests.
#[derive(Debug, Clone, Default)]
pub struct MapEnv {
    pub statuses: Vec<Status>,
    pub values: Vec<Option<Value>>,
}

impl MapEnv {
    pub fn new(n: usize) -> Self {
        MapEnv {
            statuses: vec![Status::Absent; n],
            values: vec![None; n],
        }
    }

    pub fn set(&mut self, sig: SigId, status: Status, value: Option<Value>) {
        self.statuses[sig.index()] = status;
        self.values[sig.index()] = value;
    }
}

impl SignalEnv for MapEnv {
    fn status(&self, sig: SigId) -> Status {
        self.statuses[sig.index()]
    }

    fn value(&self, sig: SigId) -> Option<&Value> {
        self.values[sig.index()].as_ref()
    }
}
