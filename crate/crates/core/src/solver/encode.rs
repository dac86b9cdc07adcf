//! Translation from source-level expressions to solver constraints, and the
//! single-assignment path formula encoder.

use std::collections::BTreeMap;

use crate::frontend::{BoolExpr, Cfa, CmpOp, EdgeOp, IntExpr};
use crate::semantics::TestCase;

use super::term::{Constraint, LinTerm, Model, SymbolTable};

/// Encode an integer expression under a variable binding. The frontend
/// guarantees linearity, so one side of every multiplication is constant.
pub fn encode_int(e: &IntExpr, env: &impl Fn(&str) -> LinTerm) -> LinTerm {
    match e {
        IntExpr::Const(c) => LinTerm::constant(*c),
        IntExpr::Var(v) => env(v),
        IntExpr::Neg(i) => encode_int(i, env).negate(),
        IntExpr::Add(a, b) => encode_int(a, env).add(&encode_int(b, env)),
        IntExpr::Sub(a, b) => encode_int(a, env).sub(&encode_int(b, env)),
        IntExpr::Mul(a, b) => {
            let ta = encode_int(a, env);
            let tb = encode_int(b, env);
            match (ta.is_const(), tb.is_const()) {
                (Some(c), _) => tb.scale(c),
                (_, Some(c)) => ta.scale(c),
                _ => unreachable!("frontend rejects nonlinear expressions"),
            }
        }
    }
}

pub fn encode_bool(e: &BoolExpr, env: &impl Fn(&str) -> LinTerm) -> Constraint {
    match e {
        BoolExpr::Lit(true) => Constraint::True,
        BoolExpr::Lit(false) => Constraint::False,
        BoolExpr::Cmp(op, a, b) => Constraint::cmp(*op, &encode_int(a, env), &encode_int(b, env)),
        BoolExpr::Not(i) => encode_bool(i, env).negated(),
        BoolExpr::And(a, b) => Constraint::and(vec![encode_bool(a, env), encode_bool(b, env)]),
        BoolExpr::Or(a, b) => Constraint::or(vec![encode_bool(a, env), encode_bool(b, env)]),
    }
}

/// Strongest-postcondition path formula builder. Every assignment binds a
/// fresh indexed symbol (`v@1`, `v@2`, ...); assume edges conjoin their
/// condition over the current bindings. The formula is satisfiable exactly
/// when the encoded syntactic path is feasible.
pub struct PathEncoder {
    pub symtab: SymbolTable,
    binding: BTreeMap<String, LinTerm>,
    versions: BTreeMap<String, u32>,
    constraints: Vec<Constraint>,
    inputs: Vec<String>,
}

impl PathEncoder {
    /// Encoding from program start: inputs are free `x@0` symbols, all other
    /// variables start at the concrete value 0.
    pub fn from_program_start(cfa: &Cfa) -> PathEncoder {
        let mut symtab = SymbolTable::new();
        let mut binding = BTreeMap::new();
        for v in &cfa.vars {
            if cfa.is_input(v) {
                let s = symtab.intern(&format!("{v}@0"));
                binding.insert(v.clone(), LinTerm::symbol(s));
            } else {
                binding.insert(v.clone(), LinTerm::constant(0));
            }
        }
        PathEncoder {
            symtab,
            binding,
            versions: BTreeMap::new(),
            constraints: Vec::new(),
            inputs: cfa.inputs.clone(),
        }
    }

    /// Encoding from an arbitrary program point: every variable is a free
    /// `v@0` symbol. Used for inductiveness obligations where the entry
    /// states are constrained by an invariant instead of program start.
    pub fn from_free_state(cfa: &Cfa) -> PathEncoder {
        let mut symtab = SymbolTable::new();
        let mut binding = BTreeMap::new();
        for v in &cfa.vars {
            let s = symtab.intern(&format!("{v}@0"));
            binding.insert(v.clone(), LinTerm::symbol(s));
        }
        PathEncoder {
            symtab,
            binding,
            versions: BTreeMap::new(),
            constraints: Vec::new(),
            inputs: cfa.inputs.clone(),
        }
    }

    fn env(&self) -> impl Fn(&str) -> LinTerm + '_ {
        |name| self.binding.get(name).cloned().unwrap_or_else(|| LinTerm::constant(0))
    }

    /// Conjoin a condition over the current bindings.
    pub fn assume(&mut self, cond: &BoolExpr) {
        let c = encode_bool(cond, &self.env());
        self.constraints.push(c);
    }

    /// Evaluate a condition over the current bindings without conjoining it.
    pub fn conditioned(&self, cond: &BoolExpr) -> Constraint {
        encode_bool(cond, &self.env())
    }

    pub fn assign(&mut self, var: &str, expr: &IntExpr) {
        let t = encode_int(expr, &self.env());
        let version = self.versions.entry(var.to_string()).or_insert(0);
        *version += 1;
        let s = self.symtab.intern(&format!("{var}@{version}"));
        let fresh = LinTerm::symbol(s);
        self.constraints.push(Constraint::cmp(CmpOp::Eq, &fresh, &t));
        self.binding.insert(var.to_string(), fresh);
    }

    pub fn apply_edge(&mut self, cfa: &Cfa, edge_index: usize) {
        match &cfa.edge(edge_index).op {
            EdgeOp::Assign { var, expr } => self.assign(var, expr),
            EdgeOp::Assume { cond } => self.assume(cond),
            EdgeOp::Skip => {}
        }
    }

    pub fn formula(&self) -> Constraint {
        Constraint::and(self.constraints.clone())
    }

    /// The test case read off a model: only input variables whose initial
    /// symbol actually occurs in the formula are assigned.
    pub fn input_test_case(&self, model: &Model) -> TestCase {
        let mut occurring = std::collections::BTreeSet::new();
        self.formula().symbols(&mut occurring);
        let mut tc = TestCase::new();
        for input in &self.inputs {
            if let Some(sym) = self.symtab.lookup(&format!("{input}@0")) {
                if occurring.contains(&sym) {
                    if let Some(&v) = model.get(&sym) {
                        tc.0.insert(input.clone(), v);
                    }
                }
            }
        }
        tc
    }
}

/// The path formula for a syntactic path given as an edge-index sequence.
pub fn path_formula(cfa: &Cfa, edges: &[usize]) -> (Constraint, PathEncoder) {
    let mut enc = PathEncoder::from_program_start(cfa);
    for &e in edges {
        enc.apply_edge(cfa, e);
    }
    (enc.formula(), enc)
}
