//! Witness generation from a finished reached set.

use std::collections::BTreeMap;

use crate::cpa::{AbstractState, CpaDefinition, ReachedSet};
use crate::domains::interval::IntervalState;
use crate::domains::symexec::SymExecState;
use crate::domains::value::ValueState;
use crate::frontend::{BoolExpr, Cfa, CmpOp, IntExpr, LocId};
use crate::semantics::TestCase;
use crate::solver::{LinTerm, SymbolTable};

use super::{cfa_shaped_transitions, simplify_and, simplify_or, WitnessAutomaton, WitnessMeta};

/// Rendering style per analysis kind. Path-based analyses provide
/// invariants at loop heads and branching locations; the abstracting
/// interval analysis only at loop heads, mirroring loop-head block
/// abstraction. Everything else explored is `true`, unexplored locations
/// are `false`.
fn renders_at(analysis: &CpaDefinition, cfa: &Cfa, loc: LocId) -> bool {
    let innermost = innermost(analysis);
    match innermost {
        CpaDefinition::Interval(_) => cfa.loop_heads.contains(&loc),
        CpaDefinition::Value(_) | CpaDefinition::SymExec(_) => {
            cfa.loop_heads.contains(&loc) || cfa.out_edges(loc).len() >= 2
        }
        _ => false,
    }
}

fn innermost(analysis: &CpaDefinition) -> &CpaDefinition {
    match analysis {
        CpaDefinition::Composite(parts) => {
            innermost(parts.last().expect("composite CPAs are non-empty"))
        }
        other => other,
    }
}

fn var_eq_const(var: &str, value: i64) -> BoolExpr {
    BoolExpr::Cmp(CmpOp::Eq, IntExpr::var(var), IntExpr::Const(value))
}

fn render_value(states: &[&ValueState]) -> BoolExpr {
    let mut it = states.iter();
    let Some(first) = it.next() else { return BoolExpr::Lit(false) };
    let joined = it.fold((*first).clone(), |acc, s| acc.join(s));
    simplify_and(joined.0.iter().map(|(v, &c)| var_eq_const(v, c)).collect())
}

fn render_interval(states: &[&IntervalState]) -> BoolExpr {
    let mut it = states.iter();
    let Some(first) = it.next() else { return BoolExpr::Lit(false) };
    let joined = it.fold((*first).clone(), |acc, s| acc.join(s));
    let mut conjuncts = Vec::new();
    for ((a, b), d) in &joined.deltas {
        let rhs = if *d == 0 {
            IntExpr::var(b)
        } else {
            IntExpr::Add(Box::new(IntExpr::var(b)), Box::new(IntExpr::Const(*d)))
        };
        conjuncts.push(BoolExpr::Cmp(CmpOp::Eq, IntExpr::var(a), rhs));
    }
    // One-sided bounds left over from widening are dropped: they would
    // narrow the joint invariant below what the partner ranges cover.
    for (v, itv) in &joined.bounds {
        if let (Some(lo), Some(hi)) = itv {
            if lo == hi {
                conjuncts.push(var_eq_const(v, *lo));
            } else {
                conjuncts.push(BoolExpr::Cmp(CmpOp::Ge, IntExpr::var(v), IntExpr::Const(*lo)));
                conjuncts.push(BoolExpr::Cmp(CmpOp::Le, IntExpr::var(v), IntExpr::Const(*hi)));
            }
        }
    }
    simplify_and(conjuncts)
}

/// Render a linear term back to source syntax when every symbol is the
/// still-live initial value of an input variable.
fn render_term(t: &LinTerm, sym_vars: &BTreeMap<u32, String>) -> Option<IntExpr> {
    let mut expr: Option<IntExpr> = if t.constant != 0 || t.coeffs.is_empty() {
        Some(IntExpr::Const(t.constant))
    } else {
        None
    };
    for (sym, &coeff) in &t.coeffs {
        let var = sym_vars.get(&sym.0)?;
        let part = match coeff {
            1 => IntExpr::var(var),
            -1 => IntExpr::Neg(Box::new(IntExpr::var(var))),
            c => IntExpr::Mul(Box::new(IntExpr::Const(c)), Box::new(IntExpr::var(var))),
        };
        expr = Some(match expr {
            None => part,
            Some(e) => IntExpr::Add(Box::new(e), Box::new(part)),
        });
    }
    expr
}

fn render_constraint(
    c: &crate::solver::Constraint,
    sym_vars: &BTreeMap<u32, String>,
) -> Option<BoolExpr> {
    use crate::solver::Constraint;
    Some(match c {
        Constraint::True => BoolExpr::Lit(true),
        Constraint::False => BoolExpr::Lit(false),
        Constraint::Cmp(op, t) => {
            BoolExpr::Cmp(*op, render_term(t, sym_vars)?, IntExpr::Const(0))
        }
        Constraint::Not(i) => BoolExpr::Not(Box::new(render_constraint(i, sym_vars)?)),
        Constraint::And(parts) => {
            let mut acc = BoolExpr::Lit(true);
            for p in parts {
                acc = BoolExpr::And(Box::new(acc), Box::new(render_constraint(p, sym_vars)?));
            }
            acc
        }
        Constraint::Or(parts) => {
            let mut acc = BoolExpr::Lit(false);
            for p in parts {
                acc = BoolExpr::Or(Box::new(acc), Box::new(render_constraint(p, sym_vars)?));
            }
            acc
        }
    })
}

const SYMEXEC_DISJUNCT_CAP: usize = 64;

fn render_symexec(states: &[&SymExecState], cfa: &Cfa, symtab: &SymbolTable) -> BoolExpr {
    if states.is_empty() {
        return BoolExpr::Lit(false);
    }
    if states.len() > SYMEXEC_DISJUNCT_CAP {
        return BoolExpr::Lit(true);
    }
    let mut disjuncts = Vec::new();
    for s in states {
        // Symbols still bound to their own input variable render as that
        // variable; everything else is projected away.
        let mut sym_vars: BTreeMap<u32, String> = BTreeMap::new();
        for input in &cfa.inputs {
            if let Some(sym) = symtab.lookup(&format!("{input}@in")) {
                if s.store.get(input) == Some(&LinTerm::symbol(sym)) {
                    sym_vars.insert(sym.0, input.clone());
                }
            }
        }
        let mut conjuncts = Vec::new();
        for (var, term) in &s.store {
            if let Some(sym) = symtab.lookup(&format!("{var}@in")) {
                if *term == LinTerm::symbol(sym) {
                    continue;
                }
            }
            if let Some(e) = render_term(term, &sym_vars) {
                conjuncts.push(BoolExpr::Cmp(CmpOp::Eq, IntExpr::var(var), e));
            }
        }
        for c in &s.pc {
            if let Some(b) = render_constraint(c, &sym_vars) {
                conjuncts.push(b);
            }
        }
        disjuncts.push(simplify_and(conjuncts));
    }
    simplify_or(disjuncts)
}

/// Build the correctness witness for a finished (TRUE-verdict) range run:
/// one state per program location, invariants rendered from the reached
/// abstract states, `false` at locations the analysis never explored, and
/// transitions mirroring the control flow.
pub fn generate_correctness_witness(
    reached: &ReachedSet,
    cfa: &Cfa,
    analysis: &CpaDefinition,
    symtab: &SymbolTable,
    range_lower: Option<&TestCase>,
    range_upper: Option<&TestCase>,
) -> WitnessAutomaton {
    let mut invariants = Vec::with_capacity(cfa.n_locations);
    for loc in cfa.locations() {
        let states: Vec<&AbstractState> =
            reached.active_at(loc).map(|n| n.state.analysis_component()).collect();
        let inv = if states.is_empty() {
            BoolExpr::Lit(false)
        } else if !renders_at(analysis, cfa, loc) {
            BoolExpr::Lit(true)
        } else {
            match states[0] {
                AbstractState::Value(_) => {
                    let vs: Vec<&ValueState> = states
                        .iter()
                        .filter_map(|s| match s {
                            AbstractState::Value(v) => Some(v),
                            _ => None,
                        })
                        .collect();
                    render_value(&vs)
                }
                AbstractState::Interval(_) => {
                    let is: Vec<&IntervalState> = states
                        .iter()
                        .filter_map(|s| match s {
                            AbstractState::Interval(i) => Some(i),
                            _ => None,
                        })
                        .collect();
                    render_interval(&is)
                }
                AbstractState::SymExec(_) => {
                    let ss: Vec<&SymExecState> = states
                        .iter()
                        .filter_map(|s| match s {
                            AbstractState::SymExec(sy) => Some(sy),
                            _ => None,
                        })
                        .collect();
                    render_symexec(&ss, cfa, symtab)
                }
                _ => BoolExpr::Lit(true),
            }
        };
        invariants.push(inv);
    }
    WitnessAutomaton {
        meta: WitnessMeta {
            program_hash: cfa.source_hash.clone(),
            producer: analysis.name(),
            range_lower: range_lower.cloned(),
            range_upper: range_upper.cloned(),
        },
        invariants,
        initial: cfa.initial.0,
        transitions: cfa_shaped_transitions(cfa),
    }
}
