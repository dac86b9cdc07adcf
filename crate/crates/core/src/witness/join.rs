//! Joining two correctness witnesses over the same program.
//!
//! A worklist explores (location, state, state') triples along the control
//! flow, skipping transition combinations whose conditions exclude each
//! other. The joint invariant per location is the disjunction, over the
//! explored triples at that location, of the two state invariants; the
//! joint transitions re-encode the control flow with always-true conditions
//! plus otherwise self-loops, so the result is complete by construction.

use std::collections::{BTreeSet, VecDeque};

use crate::frontend::{BoolExpr, Cfa};
use crate::solver::{encode_bool, Constraint, LinTerm, SatResult, SolverHandle, SymbolTable};

use super::{
    cfa_shaped_transitions, simplify_or, WitnessAutomaton, WitnessError, WitnessMeta,
};

fn check_hash(cfa: &Cfa, w: &WitnessAutomaton) -> Result<(), WitnessError> {
    if w.meta.program_hash != cfa.source_hash {
        return Err(WitnessError::IncompatibleCfa(format!(
            "witness produced for program {} but joining over {}",
            &w.meta.program_hash[..12.min(w.meta.program_hash.len())],
            &cfa.source_hash[..12]
        )));
    }
    Ok(())
}

/// Conditions are formulas over the program variables; conjunction
/// unsatisfiability prunes the pair. An undecided conjunction keeps the
/// pair, which only over-explores.
fn conditions_exclude(
    a: &BoolExpr,
    b: &BoolExpr,
    cfa: &Cfa,
    solver: &mut SolverHandle,
) -> bool {
    if *a == BoolExpr::Lit(true) && *b == BoolExpr::Lit(true) {
        return false;
    }
    if *a == BoolExpr::Lit(false) || *b == BoolExpr::Lit(false) {
        return true;
    }
    let mut symtab = SymbolTable::new();
    let mut syms = std::collections::BTreeMap::new();
    for v in &cfa.vars {
        syms.insert(v.clone(), LinTerm::symbol(symtab.intern(v)));
    }
    let env = |name: &str| syms.get(name).cloned().unwrap_or_else(|| LinTerm::constant(0));
    let conj = Constraint::and(vec![encode_bool(a, &env), encode_bool(b, &env)]);
    matches!(solver.check_sat(&conj, &symtab), SatResult::Unsat)
}

pub fn join_witnesses(
    cfa: &Cfa,
    a: &WitnessAutomaton,
    b: &WitnessAutomaton,
    solver: &mut SolverHandle,
) -> Result<WitnessAutomaton, WitnessError> {
    check_hash(cfa, a)?;
    check_hash(cfa, b)?;
    a.check_completeness(cfa)?;
    b.check_completeness(cfa)?;

    let start = (cfa.initial, a.initial, b.initial);
    let mut explored: BTreeSet<(usize, usize, usize)> =
        [(start.0 .0, start.1, start.2)].into_iter().collect();
    let mut worklist: VecDeque<(usize, usize, usize)> = explored.iter().copied().collect();

    while let Some((loc, qa, qb)) = worklist.pop_front() {
        for &edge_index in cfa.out_edges(crate::frontend::LocId(loc)) {
            let wire = cfa.wire_id(edge_index);
            let target = cfa.edge(edge_index).target.0;
            for ta in a.transitions_covering(qa, wire) {
                for tb in b.transitions_covering(qb, wire) {
                    if conditions_exclude(&ta.condition, &tb.condition, cfa, solver) {
                        continue;
                    }
                    let triple = (target, ta.target, tb.target);
                    if explored.insert(triple) {
                        worklist.push_back(triple);
                    }
                }
            }
        }
    }

    let mut invariants = Vec::with_capacity(cfa.n_locations);
    for loc in cfa.locations() {
        let parts: Vec<BoolExpr> = explored
            .iter()
            .filter(|(l, _, _)| *l == loc.0)
            .map(|&(_, qa, qb)| {
                simplify_or(vec![a.invariants[qa].clone(), b.invariants[qb].clone()])
            })
            .collect();
        invariants.push(simplify_or(parts));
    }

    Ok(WitnessAutomaton {
        meta: WitnessMeta {
            program_hash: cfa.source_hash.clone(),
            producer: format!("join({}, {})", a.meta.producer, b.meta.producer),
            range_lower: None,
            range_upper: None,
        },
        invariants,
        initial: cfa.initial.0,
        transitions: cfa_shaped_transitions(cfa),
    })
}

/// Join more than two witnesses by folding pairwise, left to right.
pub fn fold_join(
    cfa: &Cfa,
    witnesses: &[WitnessAutomaton],
    solver: &mut SolverHandle,
) -> Result<WitnessAutomaton, WitnessError> {
    let Some((first, rest)) = witnesses.split_first() else {
        return Err(WitnessError::Shape("no witnesses to join".into()));
    };
    let mut acc = first.clone();
    for w in rest {
        acc = join_witnesses(cfa, &acc, w, solver)?;
    }
    Ok(acc)
}
