//! Symbolic execution: a symbolic store over input symbols plus a path
//! condition checked for satisfiability at every branch.

use std::collections::BTreeMap;

use crate::cpa::AnalysisCtx;
use crate::frontend::{Cfa, EdgeOp, LocId};
use crate::solver::{encode_bool, encode_int, Constraint, LinTerm, SatResult};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymExecState {
    /// Variable values as linear terms over the input symbols.
    pub store: BTreeMap<String, LinTerm>,
    /// Conjunction of branch constraints along the current path.
    pub pc: Vec<Constraint>,
    /// Loop-head visit counts on the current path.
    pub visits: BTreeMap<usize, u16>,
}

impl SymExecState {
    pub fn term_of(&self, var: &str) -> LinTerm {
        self.store.get(var).cloned().unwrap_or_else(|| LinTerm::constant(0))
    }

    pub fn pc_formula(&self) -> Constraint {
        Constraint::and(self.pc.clone())
    }
}

pub const DEFAULT_LOOP_CAP: u16 = 16;

#[derive(Debug, Clone)]
pub struct SymExecCpa {
    /// Paths revisiting a loop head more often than this degrade the run
    /// to an unknown verdict instead of diverging.
    pub loop_cap: u16,
}

impl Default for SymExecCpa {
    fn default() -> Self {
        SymExecCpa { loop_cap: DEFAULT_LOOP_CAP }
    }
}

impl SymExecCpa {
    pub fn initial_state(&self, cfa: &Cfa, ctx: &mut AnalysisCtx) -> SymExecState {
        let mut store = BTreeMap::new();
        for v in &cfa.vars {
            if cfa.is_input(v) {
                let sym = ctx.symtab.intern(&format!("{v}@in"));
                store.insert(v.clone(), LinTerm::symbol(sym));
            } else {
                store.insert(v.clone(), LinTerm::constant(0));
            }
        }
        SymExecState { store, pc: Vec::new(), visits: BTreeMap::new() }
    }

    pub fn transfer(
        &self,
        s: &SymExecState,
        cfa: &Cfa,
        edge_index: usize,
        ctx: &mut AnalysisCtx,
    ) -> Vec<SymExecState> {
        let edge = cfa.edge(edge_index);
        let mut next = s.clone();
        match &edge.op {
            EdgeOp::Skip => {}
            EdgeOp::Assign { var, expr } => {
                let env = |name: &str| s.term_of(name);
                let t = encode_int(expr, &env);
                next.store.insert(var.clone(), t);
            }
            EdgeOp::Assume { cond } => {
                let env = |name: &str| s.term_of(name);
                match encode_bool(cond, &env) {
                    Constraint::True => {}
                    Constraint::False => return vec![],
                    c => {
                        next.pc.push(c);
                        match ctx.solver.check_sat(&next.pc_formula(), &ctx.symtab) {
                            SatResult::Unsat => return vec![],
                            SatResult::Sat(_) => {}
                            SatResult::Unknown(reason) => {
                                // Keep exploring; soundness for a later
                                // FALSE is restored by the concrete replay.
                                ctx.degrade(format!("path condition undecided: {reason}"));
                            }
                        }
                    }
                }
            }
        }
        if self.enter(&mut next, cfa, edge.target) {
            vec![next]
        } else {
            ctx.degrade(format!(
                "loop at {} exceeded the unrolling cap of {}",
                edge.target, self.loop_cap
            ));
            vec![]
        }
    }

    /// Count the visit; false when the loop cap is exceeded.
    fn enter(&self, s: &mut SymExecState, cfa: &Cfa, loc: LocId) -> bool {
        if !cfa.loop_heads.contains(&loc) {
            return true;
        }
        let n = s.visits.entry(loc.0).or_insert(0);
        *n += 1;
        *n <= self.loop_cap
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{build_cfa, parse, Indicator};
    use crate::solver::SolverHandle;

    const RUNNING_EXAMPLE: &str = "decl x, a, b; input x; a = 0; b = 0; \
        if (x >= 0) { while (a < x) { a = a + 1; b = b + 1; } } else { a = 10; b = 10; } \
        assert(a == b);";

    fn ctx() -> AnalysisCtx {
        AnalysisCtx::new(SolverHandle::internal())
    }

    #[test]
    fn assume_extends_the_path_condition() {
        let cfa = build_cfa(&parse(RUNNING_EXAMPLE).unwrap());
        let cpa = SymExecCpa::default();
        let mut ctx = ctx();
        let mut st = cpa.initial_state(&cfa, &mut ctx);
        // walk a = 0; b = 0; then take [x >= 0]
        let mut loc = cfa.initial;
        for _ in 0..2 {
            let e = cfa.out_edges(loc)[0];
            st = cpa.transfer(&st, &cfa, e, &mut ctx).pop().unwrap();
            loc = cfa.edge(e).target;
        }
        let (t, f) = cfa.assume_pair(loc).unwrap();
        let taken = cpa.transfer(&st, &cfa, t, &mut ctx).pop().unwrap();
        assert_eq!(taken.pc.len(), 1);
        // x >= 0 then !(x >= 0) is dropped as unsatisfiable
        let dead = cpa.transfer(&taken, &cfa, f, &mut ctx);
        let _ = dead;
        let both = cpa.transfer(&taken, &cfa, f, &mut ctx);
        assert!(both.is_empty() || {
            // f leaves the branch location, so this can only be non-empty if
            // the solver failed; the context then carries a degradation.
            ctx.degraded().is_some()
        });
    }

    #[test]
    fn substitution_updates_the_store() {
        let cfa = build_cfa(&parse("decl a; a = a + 1; a = a + 1; assert(a == 2);").unwrap());
        let cpa = SymExecCpa::default();
        let mut ctx = ctx();
        let mut st = cpa.initial_state(&cfa, &mut ctx);
        let mut loc = cfa.initial;
        for _ in 0..2 {
            let e = cfa.out_edges(loc)[0];
            st = cpa.transfer(&st, &cfa, e, &mut ctx).pop().unwrap();
            loc = cfa.edge(e).target;
        }
        assert_eq!(st.term_of("a"), LinTerm::constant(2));
    }

    #[test]
    fn loop_cap_degrades_instead_of_diverging() {
        let cfa = build_cfa(&parse(RUNNING_EXAMPLE).unwrap());
        let cpa = SymExecCpa { loop_cap: 2 };
        let mut ctx = ctx();
        let head = *cfa.loop_heads.iter().next().unwrap();
        let mut st = cpa.initial_state(&cfa, &mut ctx);
        st.visits.insert(head.0, 2);
        let back_edge = cfa
            .edges
            .iter()
            .find(|e| e.target == head && e.indicator == Indicator::None)
            .unwrap()
            .index;
        assert!(cpa.transfer(&st, &cfa, back_edge, &mut ctx).is_empty());
        assert!(ctx.degraded().is_some());
    }
}
