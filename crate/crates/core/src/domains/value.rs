//! Value analysis: each variable maps to a concrete integer or top.

use std::collections::BTreeMap;

use crate::frontend::{BoolExpr, Cfa, EdgeOp, IntExpr};
use crate::semantics::{completions, InputDomain, TestCase};

/// Abstract store; absent variables are top. The all-top state is the empty
/// map, bottom is represented by producing no successor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ValueState(pub BTreeMap<String, i64>);

impl ValueState {
    pub fn top() -> ValueState {
        ValueState::default()
    }

    pub fn get(&self, var: &str) -> Option<i64> {
        self.0.get(var).copied()
    }

    /// Partial evaluation; `None` is top (unknown value or overflow).
    pub fn eval_int(&self, e: &IntExpr) -> Option<i64> {
        match e {
            IntExpr::Const(c) => Some(*c),
            IntExpr::Var(v) => self.get(v),
            IntExpr::Neg(i) => self.eval_int(i)?.checked_neg(),
            IntExpr::Add(a, b) => self.eval_int(a)?.checked_add(self.eval_int(b)?),
            IntExpr::Sub(a, b) => self.eval_int(a)?.checked_sub(self.eval_int(b)?),
            IntExpr::Mul(a, b) => self.eval_int(a)?.checked_mul(self.eval_int(b)?),
        }
    }

    /// Three-valued condition evaluation; `None` means undetermined.
    pub fn eval_bool(&self, e: &BoolExpr) -> Option<bool> {
        match e {
            BoolExpr::Lit(b) => Some(*b),
            BoolExpr::Cmp(op, a, b) => Some(op.apply(self.eval_int(a)?, self.eval_int(b)?)),
            BoolExpr::Not(i) => self.eval_bool(i).map(|b| !b),
            BoolExpr::And(a, b) => match (self.eval_bool(a), self.eval_bool(b)) {
                (Some(false), _) | (_, Some(false)) => Some(false),
                (Some(true), Some(true)) => Some(true),
                _ => None,
            },
            BoolExpr::Or(a, b) => match (self.eval_bool(a), self.eval_bool(b)) {
                (Some(true), _) | (_, Some(true)) => Some(true),
                (Some(false), Some(false)) => Some(false),
                _ => None,
            },
        }
    }

    /// `self` is less-or-equal `other` iff other agrees on every variable it
    /// constrains.
    pub fn leq(&self, other: &ValueState) -> bool {
        other.0.iter().all(|(k, v)| self.get(k) == Some(*v))
    }

    /// Pointwise join: keep agreeing values, top out the rest.
    pub fn join(&self, other: &ValueState) -> ValueState {
        ValueState(
            self.0
                .iter()
                .filter(|(k, v)| other.get(k) == Some(**v))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        )
    }

    /// Single-edge transfer used both by the value CPA and the range
    /// reduction. Assume edges return `None` when the condition is
    /// definitely false.
    pub fn transfer(&self, op: &EdgeOp) -> Option<ValueState> {
        match op {
            EdgeOp::Skip => Some(self.clone()),
            EdgeOp::Assign { var, expr } => {
                let mut next = self.clone();
                match self.eval_int(expr) {
                    Some(v) => {
                        next.0.insert(var.clone(), v);
                    }
                    None => {
                        next.0.remove(var);
                    }
                }
                Some(next)
            }
            EdgeOp::Assume { cond } => match self.eval_bool(cond) {
                Some(false) => None,
                _ => Some(self.clone()),
            },
        }
    }
}

/// The value CPA. Over a bounded input domain the initial states enumerate
/// every assignment, which makes the analysis behave like the concrete
/// semantics per input; over the unbounded domain inputs stay top and the
/// analysis overapproximates.
#[derive(Debug, Clone)]
pub struct ValueCpa {
    pub input_domain: InputDomain,
}

impl ValueCpa {
    pub fn initial_states(&self, cfa: &Cfa, cap: u128) -> Result<Vec<ValueState>, String> {
        match self.input_domain {
            InputDomain::Unbounded => {
                let mut st = ValueState::top();
                for v in &cfa.vars {
                    if !cfa.is_input(v) {
                        st.0.insert(v.clone(), 0);
                    }
                }
                Ok(vec![st])
            }
            InputDomain::Bounded { .. } => {
                let assignments = completions(cfa, &TestCase::new(), self.input_domain, cap)
                    .map_err(|e| e.to_string())?;
                Ok(assignments
                    .iter()
                    .map(|tc| {
                        let mut st = ValueState::top();
                        for v in &cfa.vars {
                            st.0.insert(v.clone(), tc.get(v).unwrap_or(0));
                        }
                        st
                    })
                    .collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse, build_cfa, CmpOp};

    fn st(pairs: &[(&str, i64)]) -> ValueState {
        ValueState(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    #[test]
    fn assume_with_definitely_false_condition_kills_state() {
        // a < x with a = 2, x = 2
        let cond = BoolExpr::Cmp(CmpOp::Lt, IntExpr::var("a"), IntExpr::var("x"));
        let s = st(&[("x", 2), ("a", 2)]);
        assert_eq!(s.transfer(&EdgeOp::Assume { cond }), None);
    }

    #[test]
    fn assume_on_top_keeps_both_branches() {
        let cond = BoolExpr::Cmp(CmpOp::Ge, IntExpr::var("x"), IntExpr::Const(0));
        let s = ValueState::top();
        assert_eq!(s.transfer(&EdgeOp::Assume { cond: cond.clone() }), Some(s.clone()));
        assert_eq!(
            s.transfer(&EdgeOp::Assume { cond: BoolExpr::Not(Box::new(cond)) }),
            Some(s)
        );
    }

    #[test]
    fn assignment_evaluates_partially() {
        let s = st(&[("a", 1)]);
        let next = s
            .transfer(&EdgeOp::Assign {
                var: "a".into(),
                expr: IntExpr::Add(Box::new(IntExpr::var("a")), Box::new(IntExpr::Const(1))),
            })
            .unwrap();
        assert_eq!(next.get("a"), Some(2));
        // unknown operand tops the target out
        let next = s
            .transfer(&EdgeOp::Assign { var: "a".into(), expr: IntExpr::var("zz") })
            .unwrap();
        assert_eq!(next.get("a"), None);
    }

    #[test]
    fn order_and_join_are_pointwise() {
        let bottom_ish = st(&[("a", 1), ("b", 2)]);
        let looser = st(&[("a", 1)]);
        assert!(bottom_ish.leq(&looser));
        assert!(!looser.leq(&bottom_ish));
        assert_eq!(bottom_ish.join(&st(&[("a", 1), ("b", 3)])), looser);
    }

    #[test]
    fn bounded_initial_states_enumerate_the_domain() {
        let cfa = build_cfa(&parse("decl x, a; input x; a = 0; assert(a == 0);").unwrap());
        let cpa = ValueCpa { input_domain: InputDomain::Bounded { lo: -2, hi: 2 } };
        let states = cpa.initial_states(&cfa, 1000).unwrap();
        assert_eq!(states.len(), 5);
        assert!(states.iter().all(|s| s.get("a") == Some(0)));
        let xs: Vec<i64> = states.iter().map(|s| s.get("x").unwrap()).collect();
        assert_eq!(xs, vec![-2, -1, 0, 1, 2]);
        let unbounded = ValueCpa { input_domain: InputDomain::Unbounded };
        let states = unbounded.initial_states(&cfa, 1000).unwrap();
        assert_eq!(states.len(), 1);
        assert_eq!(states[0].get("x"), None);
    }
}
