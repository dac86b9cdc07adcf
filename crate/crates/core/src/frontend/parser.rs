//! Recursive-descent parser and static validation.

use super::ast::{BoolExpr, CmpOp, IntExpr, Program, Stmt};
use super::lexer::{Lexer, Pos, Tok};
use super::FrontendError;

pub(super) struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    pub fn new(source: &str) -> Result<Self, FrontendError> {
        Ok(Parser { toks: Lexer::new(source).tokenize()?, at: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), FrontendError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(FrontendError::syntax(self.pos(), format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, FrontendError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            _ => Err(FrontendError::syntax(self.pos(), format!("expected {what}"))),
        }
    }

    pub fn program(&mut self, source_hash: String) -> Result<Program, FrontendError> {
        let mut declarations = Vec::new();
        let mut inputs = Vec::new();
        loop {
            match self.peek() {
                Tok::KwDecl => {
                    self.bump();
                    loop {
                        let pos = self.pos();
                        let name = self.ident("variable name")?;
                        if declarations.contains(&name) {
                            return Err(FrontendError::Validation {
                                line: pos.line,
                                col: pos.col,
                                message: format!("duplicate declaration of `{name}`"),
                            });
                        }
                        declarations.push(name);
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    self.expect(Tok::Semi, "';' after declaration")?;
                }
                Tok::KwInput => {
                    self.bump();
                    loop {
                        let pos = self.pos();
                        let name = self.ident("input variable name")?;
                        if !declarations.contains(&name) {
                            return Err(FrontendError::UndeclaredVariable {
                                line: pos.line,
                                col: pos.col,
                                name,
                            });
                        }
                        if inputs.contains(&name) {
                            return Err(FrontendError::Validation {
                                line: pos.line,
                                col: pos.col,
                                message: format!("duplicate input declaration of `{name}`"),
                            });
                        }
                        inputs.push(name);
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    self.expect(Tok::Semi, "';' after input list")?;
                }
                _ => break,
            }
        }
        let mut body = Vec::new();
        while *self.peek() != Tok::Eof {
            body.push(self.stmt()?);
        }
        let program = Program { declarations, inputs, body, source_hash };
        validate(&program)?;
        Ok(program)
    }

    fn block(&mut self) -> Result<Vec<Stmt>, FrontendError> {
        self.expect(Tok::LBrace, "'{'")?;
        let mut out = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(FrontendError::syntax(self.pos(), "unterminated block, expected '}'"));
            }
            out.push(self.stmt()?);
        }
        self.bump();
        Ok(out)
    }

    fn stmt(&mut self) -> Result<Stmt, FrontendError> {
        match self.peek().clone() {
            Tok::KwSkip => {
                self.bump();
                self.expect(Tok::Semi, "';' after skip")?;
                Ok(Stmt::Skip)
            }
            Tok::KwAssert => {
                self.bump();
                self.expect(Tok::LParen, "'(' after assert")?;
                let cond = self.bool_expr()?;
                self.expect(Tok::RParen, "')'")?;
                self.expect(Tok::Semi, "';' after assert")?;
                Ok(Stmt::Assert { cond })
            }
            Tok::KwIf => {
                self.bump();
                self.expect(Tok::LParen, "'(' after if")?;
                let cond = self.bool_expr()?;
                self.expect(Tok::RParen, "')'")?;
                let then_branch = self.block()?;
                let else_branch = if *self.peek() == Tok::KwElse {
                    self.bump();
                    self.block()?
                } else {
                    Vec::new()
                };
                Ok(Stmt::If { cond, then_branch, else_branch })
            }
            Tok::KwWhile => {
                self.bump();
                self.expect(Tok::LParen, "'(' after while")?;
                let cond = self.bool_expr()?;
                self.expect(Tok::RParen, "')'")?;
                let body = self.block()?;
                Ok(Stmt::While { cond, body })
            }
            Tok::Ident(_) => {
                let var = self.ident("variable")?;
                self.expect(Tok::Assign, "'=' in assignment")?;
                let expr = self.int_expr()?;
                self.expect(Tok::Semi, "';' after assignment")?;
                Ok(Stmt::Assign { var, expr })
            }
            _ => Err(FrontendError::syntax(self.pos(), "expected statement")),
        }
    }

    pub fn bool_expr(&mut self) -> Result<BoolExpr, FrontendError> {
        let mut lhs = self.bool_and()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            let rhs = self.bool_and()?;
            lhs = BoolExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn bool_and(&mut self) -> Result<BoolExpr, FrontendError> {
        let mut lhs = self.bool_atom()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            let rhs = self.bool_atom()?;
            lhs = BoolExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn bool_atom(&mut self) -> Result<BoolExpr, FrontendError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(BoolExpr::Not(Box::new(self.bool_atom()?)))
            }
            Tok::KwTrue => {
                self.bump();
                Ok(BoolExpr::Lit(true))
            }
            Tok::KwFalse => {
                self.bump();
                Ok(BoolExpr::Lit(false))
            }
            Tok::LParen => {
                // Could open a parenthesized condition or the left operand of
                // a comparison; try the condition first and backtrack.
                let save = self.at;
                self.bump();
                if let Ok(inner) = self.bool_expr() {
                    if *self.peek() == Tok::RParen {
                        self.bump();
                        return Ok(inner);
                    }
                }
                self.at = save;
                self.comparison()
            }
            _ => self.comparison(),
        }
    }

    fn comparison(&mut self) -> Result<BoolExpr, FrontendError> {
        let lhs = self.int_expr()?;
        let op = match self.peek() {
            Tok::EqEq => CmpOp::Eq,
            Tok::NotEq => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return Err(FrontendError::syntax(self.pos(), "expected comparison operator")),
        };
        self.bump();
        let rhs = self.int_expr()?;
        Ok(BoolExpr::Cmp(op, lhs, rhs))
    }

    fn int_expr(&mut self) -> Result<IntExpr, FrontendError> {
        let mut lhs = self.int_term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.int_term()?;
                    lhs = IntExpr::Add(Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.int_term()?;
                    lhs = IntExpr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn int_term(&mut self) -> Result<IntExpr, FrontendError> {
        let mut lhs = self.int_factor()?;
        while *self.peek() == Tok::Star {
            self.bump();
            let rhs = self.int_factor()?;
            lhs = IntExpr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn int_factor(&mut self) -> Result<IntExpr, FrontendError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(IntExpr::Const(v))
            }
            Tok::Ident(_) => Ok(IntExpr::Var(self.ident("variable")?)),
            Tok::Minus => {
                self.bump();
                Ok(IntExpr::Neg(Box::new(self.int_factor()?)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.int_expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            _ => Err(FrontendError::syntax(self.pos(), "expected integer expression")),
        }
    }
}

fn is_const(e: &IntExpr) -> bool {
    match e {
        IntExpr::Const(_) => true,
        IntExpr::Neg(i) => is_const(i),
        IntExpr::Var(_) => false,
        IntExpr::Add(a, b) | IntExpr::Sub(a, b) | IntExpr::Mul(a, b) => is_const(a) && is_const(b),
    }
}

fn check_int(e: &IntExpr, declared: &[String]) -> Result<(), FrontendError> {
    match e {
        IntExpr::Const(_) => Ok(()),
        IntExpr::Var(v) => {
            if declared.iter().any(|d| d == v) {
                Ok(())
            } else {
                Err(FrontendError::UndeclaredVariable { line: 0, col: 0, name: v.clone() })
            }
        }
        IntExpr::Neg(i) => check_int(i, declared),
        IntExpr::Add(a, b) | IntExpr::Sub(a, b) => {
            check_int(a, declared)?;
            check_int(b, declared)
        }
        IntExpr::Mul(a, b) => {
            check_int(a, declared)?;
            check_int(b, declared)?;
            if is_const(a) || is_const(b) {
                Ok(())
            } else {
                Err(FrontendError::Nonlinear { expr: e.to_string() })
            }
        }
    }
}

pub(super) fn check_bool(e: &BoolExpr, declared: &[String]) -> Result<(), FrontendError> {
    match e {
        BoolExpr::Lit(_) => Ok(()),
        BoolExpr::Cmp(_, a, b) => {
            check_int(a, declared)?;
            check_int(b, declared)
        }
        BoolExpr::Not(i) => check_bool(i, declared),
        BoolExpr::And(a, b) | BoolExpr::Or(a, b) => {
            check_bool(a, declared)?;
            check_bool(b, declared)
        }
    }
}

fn check_stmts(stmts: &[Stmt], declared: &[String], asserts: &mut usize) -> Result<(), FrontendError> {
    for s in stmts {
        match s {
            Stmt::Skip => {}
            Stmt::Assign { var, expr } => {
                if !declared.iter().any(|d| d == var) {
                    return Err(FrontendError::UndeclaredVariable {
                        line: 0,
                        col: 0,
                        name: var.clone(),
                    });
                }
                check_int(expr, declared)?;
            }
            Stmt::If { cond, then_branch, else_branch } => {
                check_bool(cond, declared)?;
                check_stmts(then_branch, declared, asserts)?;
                check_stmts(else_branch, declared, asserts)?;
            }
            Stmt::While { cond, body } => {
                check_bool(cond, declared)?;
                check_stmts(body, declared, asserts)?;
            }
            Stmt::Assert { cond } => {
                check_bool(cond, declared)?;
                *asserts += 1;
            }
        }
    }
    Ok(())
}

fn validate(p: &Program) -> Result<(), FrontendError> {
    let mut asserts = 0;
    check_stmts(&p.body, &p.declarations, &mut asserts)?;
    if asserts == 0 {
        return Err(FrontendError::Validation {
            line: 0,
            col: 0,
            message: "program must contain at least one assert statement".into(),
        });
    }
    Ok(())
}
