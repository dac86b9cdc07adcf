//! Source-level syntax tree for the input language.

use std::fmt;

/// Comparison operators usable in conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    /// The operator `c` such that `a c b <=> !(a self b)`.
    pub fn negated(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    pub fn apply(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        };
        f.write_str(s)
    }
}

/// Integer-valued expression. Multiplication is restricted to a constant
/// factor on at least one side; the validator rejects anything nonlinear.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IntExpr {
    Const(i64),
    Var(String),
    Neg(Box<IntExpr>),
    Add(Box<IntExpr>, Box<IntExpr>),
    Sub(Box<IntExpr>, Box<IntExpr>),
    Mul(Box<IntExpr>, Box<IntExpr>),
}

impl IntExpr {
    pub fn var(name: impl Into<String>) -> IntExpr {
        IntExpr::Var(name.into())
    }

    /// Variables mentioned by the expression, in first-occurrence order.
    pub fn variables(&self, out: &mut Vec<String>) {
        match self {
            IntExpr::Const(_) => {}
            IntExpr::Var(v) => {
                if !out.iter().any(|x| x == v) {
                    out.push(v.clone());
                }
            }
            IntExpr::Neg(e) => e.variables(out),
            IntExpr::Add(a, b) | IntExpr::Sub(a, b) | IntExpr::Mul(a, b) => {
                a.variables(out);
                b.variables(out);
            }
        }
    }
}

/// Boolean condition over integer comparisons.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BoolExpr {
    Lit(bool),
    Cmp(CmpOp, IntExpr, IntExpr),
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
}

impl BoolExpr {
    pub fn negated(&self) -> BoolExpr {
        BoolExpr::Not(Box::new(self.clone()))
    }

    pub fn variables(&self, out: &mut Vec<String>) {
        match self {
            BoolExpr::Lit(_) => {}
            BoolExpr::Cmp(_, a, b) => {
                a.variables(out);
                b.variables(out);
            }
            BoolExpr::Not(e) => e.variables(out),
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) => {
                a.variables(out);
                b.variables(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Assign { var: String, expr: IntExpr },
    Skip,
    If { cond: BoolExpr, then_branch: Vec<Stmt>, else_branch: Vec<Stmt> },
    While { cond: BoolExpr, body: Vec<Stmt> },
    Assert { cond: BoolExpr },
}

/// A validated program: declared integer variables, the ordered input
/// subset, and the statement body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub declarations: Vec<String>,
    pub inputs: Vec<String>,
    pub body: Vec<Stmt>,
    /// SHA-256 of the source text, carried through to witness headers.
    pub source_hash: String,
}

// Rendering follows the source grammar so that witness invariants can be
// printed and re-parsed without loss.

fn int_prec(e: &IntExpr) -> u8 {
    match e {
        IntExpr::Const(_) | IntExpr::Var(_) | IntExpr::Neg(_) => 3,
        IntExpr::Mul(_, _) => 2,
        IntExpr::Add(_, _) | IntExpr::Sub(_, _) => 1,
    }
}

fn fmt_int(e: &IntExpr, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
    let prec = int_prec(e);
    let paren = prec < min_prec;
    if paren {
        f.write_str("(")?;
    }
    match e {
        IntExpr::Const(c) => write!(f, "{c}")?,
        IntExpr::Var(v) => f.write_str(v)?,
        IntExpr::Neg(inner) => {
            f.write_str("-")?;
            fmt_int(inner, f, 3)?;
        }
        IntExpr::Add(a, b) => {
            fmt_int(a, f, 1)?;
            f.write_str(" + ")?;
            fmt_int(b, f, 2)?;
        }
        IntExpr::Sub(a, b) => {
            fmt_int(a, f, 1)?;
            f.write_str(" - ")?;
            fmt_int(b, f, 2)?;
        }
        IntExpr::Mul(a, b) => {
            fmt_int(a, f, 2)?;
            f.write_str(" * ")?;
            fmt_int(b, f, 3)?;
        }
    }
    if paren {
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for IntExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_int(self, f, 0)
    }
}

fn bool_prec(e: &BoolExpr) -> u8 {
    match e {
        BoolExpr::Lit(_) | BoolExpr::Cmp(..) | BoolExpr::Not(_) => 3,
        BoolExpr::And(_, _) => 2,
        BoolExpr::Or(_, _) => 1,
    }
}

fn fmt_bool(e: &BoolExpr, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
    let prec = bool_prec(e);
    let paren = prec < min_prec;
    if paren {
        f.write_str("(")?;
    }
    match e {
        BoolExpr::Lit(b) => f.write_str(if *b { "true" } else { "false" })?,
        BoolExpr::Cmp(op, a, b) => write!(f, "{a} {op} {b}")?,
        BoolExpr::Not(inner) => {
            f.write_str("!")?;
            match inner.as_ref() {
                BoolExpr::Lit(_) => fmt_bool(inner, f, 3)?,
                _ => {
                    f.write_str("(")?;
                    fmt_bool(inner, f, 0)?;
                    f.write_str(")")?;
                }
            }
        }
        BoolExpr::And(a, b) => {
            fmt_bool(a, f, 2)?;
            f.write_str(" && ")?;
            fmt_bool(b, f, 3)?;
        }
        BoolExpr::Or(a, b) => {
            fmt_bool(a, f, 1)?;
            f.write_str(" || ")?;
            fmt_bool(b, f, 2)?;
        }
    }
    if paren {
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_bool(self, f, 0)
    }
}
