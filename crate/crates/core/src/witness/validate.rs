//! Inductiveness-based validation of location-shaped witnesses.
//!
//! Obligations run between invariant carriers: the initial location, loop
//! heads, every location with a non-trivial invariant, error locations, and
//! sinks. Each control-flow block between two carriers must map the source
//! invariant into the target invariant under the strongest postcondition;
//! blocks into an error location must be infeasible under the source
//! invariant outright. Structured programs put a loop head on every cycle,
//! so the blocks are finite.

use std::collections::BTreeSet;

use crate::frontend::{BoolExpr, Cfa, LocId};
use crate::solver::{Constraint, PathEncoder, SatResult, SolverHandle};

use super::{WitnessAutomaton, WitnessError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationResult {
    Valid,
    /// The invariant at `location` is not re-established along the block
    /// ending with `edge` (a wire id), or an error location is reachable.
    Invalid { location: usize, edge: Option<(usize, usize)> },
    Unknown { reason: String },
}

fn check_shape(cfa: &Cfa, w: &WitnessAutomaton) -> Result<(), WitnessError> {
    if w.invariants.len() != cfa.n_locations {
        return Err(WitnessError::Shape(format!(
            "expected one state per program location ({}), got {}",
            cfa.n_locations,
            w.invariants.len()
        )));
    }
    if w.initial != cfa.initial.0 {
        return Err(WitnessError::Shape("initial state is not the initial location".into()));
    }
    if w.meta.program_hash != cfa.source_hash {
        return Err(WitnessError::IncompatibleCfa("program hash mismatch".into()));
    }
    w.check_completeness(cfa)
}

const BLOCK_CAP: usize = 100_000;

/// Enumerate the maximal edge blocks from `from` to the next carrier.
fn blocks_from(
    cfa: &Cfa,
    from: LocId,
    carriers: &BTreeSet<LocId>,
) -> Result<Vec<Vec<usize>>, WitnessError> {
    let mut out = Vec::new();
    let mut stack: Vec<(LocId, Vec<usize>)> = vec![(from, Vec::new())];
    while let Some((loc, edges)) = stack.pop() {
        for &e in cfa.out_edges(loc) {
            let target = cfa.edge(e).target;
            let mut next = edges.clone();
            next.push(e);
            if carriers.contains(&target) {
                out.push(next);
            } else if next.len() > cfa.n_locations * 4 {
                // a cycle without a carrier; structured CFAs cannot produce
                // this, foreign inputs might
                return Err(WitnessError::Shape(
                    "control-flow cycle without a loop-head carrier".into(),
                ));
            } else {
                stack.push((target, next));
            }
            if out.len() > BLOCK_CAP {
                return Err(WitnessError::Shape("too many obligation blocks".into()));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Check a witness: (a) the initial invariant holds in every initial data
/// state, (b) block-wise inductiveness, (c) error locations carry `false`
/// and are unreachable under the invariants.
pub fn validate_witness(
    cfa: &Cfa,
    w: &WitnessAutomaton,
    solver: &mut SolverHandle,
) -> Result<ValidationResult, WitnessError> {
    check_shape(cfa, w)?;

    // (a) initial states: non-inputs are zero, inputs free
    let enc = PathEncoder::from_program_start(cfa);
    let violated = enc.conditioned(&w.invariants[cfa.initial.0].negated());
    match solver.check_sat(&violated, &enc.symtab) {
        SatResult::Sat(_) => {
            return Ok(ValidationResult::Invalid { location: cfa.initial.0, edge: None })
        }
        SatResult::Unknown(reason) => return Ok(ValidationResult::Unknown { reason }),
        SatResult::Unsat => {}
    }

    let mut carriers: BTreeSet<LocId> = cfa.loop_heads.clone();
    carriers.insert(cfa.initial);
    carriers.extend(cfa.error_locations.iter().copied());
    for loc in cfa.locations() {
        if cfa.is_sink(loc) || w.invariants[loc.0] != BoolExpr::Lit(true) {
            carriers.insert(loc);
        }
    }

    for &from in &carriers {
        let source_inv = &w.invariants[from.0];
        if *source_inv == BoolExpr::Lit(false) {
            // nothing is claimed reachable here
            continue;
        }
        for block in blocks_from(cfa, from, &carriers)? {
            let last = *block.last().expect("blocks are non-empty");
            let target = cfa.edge(last).target;
            let mut enc = PathEncoder::from_free_state(cfa);
            enc.assume(source_inv);
            for &e in &block {
                enc.apply_edge(cfa, e);
            }
            let obligation = if cfa.is_error(target) {
                // (c) reachability of the error location itself is the
                // violation, whatever its invariant says
                enc.formula()
            } else {
                let target_inv = &w.invariants[target.0];
                if *target_inv == BoolExpr::Lit(true) {
                    continue;
                }
                Constraint::and(vec![
                    enc.formula(),
                    enc.conditioned(&target_inv.negated()),
                ])
            };
            match solver.check_sat(&obligation, &enc.symtab) {
                SatResult::Sat(_) => {
                    return Ok(ValidationResult::Invalid {
                        location: target.0,
                        edge: Some(cfa.wire_id(last)),
                    })
                }
                SatResult::Unknown(reason) => {
                    return Ok(ValidationResult::Unknown { reason })
                }
                SatResult::Unsat => {}
            }
        }
    }

    // (c) error invariants must not claim reachable states
    for err in &cfa.error_locations {
        let inv = &w.invariants[err.0];
        if *inv == BoolExpr::Lit(false) {
            continue;
        }
        let enc = PathEncoder::from_free_state(cfa);
        let claim = enc.conditioned(inv);
        match solver.check_sat(&claim, &enc.symtab) {
            SatResult::Unsat => {}
            SatResult::Sat(_) => {
                return Ok(ValidationResult::Invalid { location: err.0, edge: None })
            }
            SatResult::Unknown(reason) => return Ok(ValidationResult::Unknown { reason }),
        }
    }

    Ok(ValidationResult::Valid)
}

/// Solver-checked logical equivalence of two formulas over program
/// variables; `None` when the solver cannot decide.
pub fn formulas_equivalent(
    cfa: &Cfa,
    a: &BoolExpr,
    b: &BoolExpr,
    solver: &mut SolverHandle,
) -> Option<bool> {
    let enc = PathEncoder::from_free_state(cfa);
    for (x, y) in [(a, b), (b, a)] {
        let side = Constraint::and(vec![
            enc.conditioned(x),
            enc.conditioned(&y.negated()),
        ]);
        match solver.check_sat(&side, &enc.symtab) {
            SatResult::Sat(_) => return Some(false),
            SatResult::Unsat => {}
            SatResult::Unknown(_) => return None,
        }
    }
    Some(true)
}
