//! Parsing of the minimal imperative input language and CFA construction.

mod ast;
mod cfa;
mod lexer;
mod parser;

pub use ast::{BoolExpr, CmpOp, IntExpr, Program, Stmt};
pub use cfa::{build_cfa, Cfa, Edge, EdgeOp, Indicator, LocId};

use lexer::Pos;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: u32, col: u32, message: String },
    #[error("use of undeclared variable `{name}` at {line}:{col}")]
    UndeclaredVariable { line: u32, col: u32, name: String },
    #[error("nonlinear expression not supported: {expr}")]
    Nonlinear { expr: String },
    #[error("invalid program at {line}:{col}: {message}")]
    Validation { line: u32, col: u32, message: String },
}

impl FrontendError {
    fn syntax(pos: Pos, message: impl Into<String>) -> Self {
        FrontendError::Syntax { line: pos.line, col: pos.col, message: message.into() }
    }
}

/// Parse and validate a program from source text.
pub fn parse(source: &str) -> Result<Program, FrontendError> {
    let hash = hex_digest(source);
    parser::Parser::new(source)?.program(hash)
}

/// Parse a single condition, validated against a declared variable set.
/// Used for invariants and transition conditions in witness files.
pub fn parse_bool_expr(source: &str, declared: &[String]) -> Result<BoolExpr, FrontendError> {
    let mut p = parser::Parser::new(source)?;
    let e = p.bool_expr()?;
    parser::check_bool(&e, declared)?;
    Ok(e)
}

pub fn hex_digest(source: &str) -> String {
    let mut h = Sha256::new();
    h.update(source.as_bytes());
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const RUNNING_EXAMPLE: &str = "\
decl x, a, b;
input x;
a = 0;
b = 0;
if (x >= 0) {
  while (a < x) {
    a = a + 1;
    b = b + 1;
  }
} else {
  a = 10;
  b = 10;
}
assert(a == b);
";

    #[test]
    fn parses_running_example() {
        let p = parse(RUNNING_EXAMPLE).unwrap();
        assert_eq!(p.inputs, vec!["x"]);
        assert_eq!(p.declarations.len(), 3);
        assert_eq!(p.body.len(), 4);
    }

    #[test]
    fn parses_minimal_assert_only_program() {
        let p = parse("assert(1 == 1);").unwrap();
        assert!(p.declarations.is_empty());
        assert_eq!(p.body, vec![Stmt::Assert { cond: BoolExpr::Cmp(CmpOp::Eq, IntExpr::Const(1), IntExpr::Const(1)) }]);
    }

    #[test]
    fn rejects_undeclared_variable() {
        let err = parse("decl x; x = y + 1; assert(x == 1);").unwrap_err();
        assert!(matches!(err, FrontendError::UndeclaredVariable { ref name, .. } if name == "y"));
    }

    #[test]
    fn rejects_nonlinear_multiplication() {
        let err = parse("decl x, y; input x, y; assert(x * y == 0);").unwrap_err();
        assert!(matches!(err, FrontendError::Nonlinear { .. }));
        // Constant factors stay legal.
        parse("decl x; input x; assert(2 * x == x + x);").unwrap();
    }

    #[test]
    fn rejects_missing_assert() {
        let err = parse("decl x; x = 1;").unwrap_err();
        assert!(matches!(err, FrontendError::Validation { .. }));
    }

    #[test]
    fn rejects_undeclared_input() {
        let err = parse("decl x; input q; assert(x == x);").unwrap_err();
        assert!(matches!(err, FrontendError::UndeclaredVariable { ref name, .. } if name == "q"));
    }

    #[test]
    fn cfa_of_running_example_matches_expected_shape() {
        let p = parse(RUNNING_EXAMPLE).unwrap();
        let cfa = build_cfa(&p);
        // Ten program locations plus the error location of the assert.
        assert_eq!(cfa.n_locations, 11);
        assert_eq!(cfa.error_locations.len(), 1);
        assert_eq!(cfa.loop_heads.len(), 1);

        let head = *cfa.loop_heads.iter().next().unwrap();
        let (t, f) = cfa.assume_pair(head).expect("loop head branches");
        assert_eq!(cfa.edge(t).indicator, Indicator::True);
        assert_eq!(cfa.edge(f).indicator, Indicator::False);
        // The true evaluation enters the loop body, the false evaluation
        // leaves towards the merge location.
        assert_ne!(cfa.edge(t).target, cfa.edge(f).target);
        assert_eq!(head, LocId(3));
        assert_eq!(cfa.edge(t).target, LocId(4));

        // Assume-pair conditions are syntactic negations.
        for loc in cfa.locations() {
            if let Some((t, f)) = cfa.assume_pair(loc) {
                let (EdgeOp::Assume { cond: ct }, EdgeOp::Assume { cond: cf }) =
                    (&cfa.edge(t).op, &cfa.edge(f).op)
                else {
                    panic!("assume pair must carry assume operations");
                };
                assert_eq!(*cf, ct.negated());
            }
        }
    }

    #[test]
    fn straight_line_program_has_only_n_edges() {
        let p = parse("decl a; a = 1; a = a + 1; assert(a == 2);").unwrap();
        let cfa = build_cfa(&p);
        let non_assert_edges: Vec<_> =
            cfa.edges.iter().filter(|e| !matches!(e.op, EdgeOp::Assume { .. })).collect();
        for e in non_assert_edges {
            assert_eq!(e.indicator, Indicator::None);
        }
    }

    #[test]
    fn branching_locations_carry_exactly_t_and_f() {
        let src = "decl x, y; input x; if (x > 0) { y = 1; } else { y = 2; } while (y > 0) { y = y - 1; } assert(y == 0);";
        let cfa = build_cfa(&parse(src).unwrap());
        let mut pairs = 0;
        for loc in cfa.locations() {
            let out = cfa.out_edges(loc);
            if out.len() == 2 {
                pairs += 1;
                let inds: Vec<_> = out.iter().map(|&e| cfa.edge(e).indicator).collect();
                assert_eq!(inds, vec![Indicator::True, Indicator::False]);
            } else {
                assert!(out.len() <= 1 || cfa.assume_pair(loc).is_none());
            }
        }
        // if, while, assert
        assert_eq!(pairs, 3);
    }

    #[test]
    fn cfa_is_connected_from_initial() {
        let p = parse(RUNNING_EXAMPLE).unwrap();
        let cfa = build_cfa(&p);
        let mut seen = vec![false; cfa.n_locations];
        let mut stack = vec![cfa.initial];
        while let Some(l) = stack.pop() {
            if seen[l.0] {
                continue;
            }
            seen[l.0] = true;
            for &e in cfa.out_edges(l) {
                stack.push(cfa.edge(e).target);
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn expression_display_round_trips_through_parser() {
        let exprs = ["a == b && x >= 0", "!(a < x) || b != 2", "a + 2 * b - -3 == 0", "true", "a - (b - 1) == 0"];
        let declared: Vec<String> = ["a", "b", "x"].iter().map(|s| s.to_string()).collect();
        for src in exprs {
            let e = parse_bool_expr(src, &declared).unwrap();
            let printed = e.to_string();
            let again = parse_bool_expr(&printed, &declared).unwrap();
            assert_eq!(e, again, "{src} -> {printed}");
        }
    }
}
