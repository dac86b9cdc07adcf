//! Correctness-witness automata: per-range generation, joining, validation,
//! and the structured file format.

mod format;
mod generate;
mod join;
mod validate;

pub use format::{read_witness, write_witness};
pub use generate::generate_correctness_witness;
pub use join::{fold_join, join_witnesses};
pub use validate::{formulas_equivalent, validate_witness, ValidationResult};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::frontend::{BoolExpr, Cfa};
use crate::semantics::TestCase;

#[derive(Debug, Error)]
pub enum WitnessError {
    #[error("witness does not match the program: {0}")]
    IncompatibleCfa(String),
    #[error("transition references unknown edge ({0}, {1})")]
    UnknownEdge(usize, usize),
    #[error("state {state} does not cover edge {edge:?}")]
    Incomplete { state: usize, edge: (usize, usize) },
    #[error("malformed witness: {0}")]
    Shape(String),
    #[error("witness file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessMeta {
    pub program_hash: String,
    pub producer: String,
    pub range_lower: Option<TestCase>,
    pub range_upper: Option<TestCase>,
}

/// Which CFA edges a transition accepts: an explicit set of wire ids, or
/// every edge not covered by the state's other outgoing transitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EdgeSelector {
    Edges(BTreeSet<(usize, usize)>),
    Otherwise,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessTransition {
    pub source: usize,
    pub target: usize,
    pub selector: EdgeSelector,
    pub condition: BoolExpr,
}

/// Protocol automaton with one invariant per state. Generated and joined
/// witnesses use one state per program location (state index = location id)
/// with explicit transitions along the control flow plus otherwise
/// self-loops, which makes them complete by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessAutomaton {
    pub meta: WitnessMeta,
    pub invariants: Vec<BoolExpr>,
    pub initial: usize,
    pub transitions: Vec<WitnessTransition>,
}

impl WitnessAutomaton {
    pub fn outgoing(&self, state: usize) -> impl Iterator<Item = &WitnessTransition> {
        self.transitions.iter().filter(move |t| t.source == state)
    }

    /// Edges explicitly covered by the state's transitions; the complement
    /// is what `Otherwise` matches.
    fn explicit_edges(&self, state: usize) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for t in self.outgoing(state) {
            if let EdgeSelector::Edges(edges) = &t.selector {
                out.extend(edges.iter().copied());
            }
        }
        out
    }

    /// Transitions of `state` that accept the given CFA edge.
    pub fn transitions_covering(
        &self,
        state: usize,
        wire: (usize, usize),
    ) -> Vec<&WitnessTransition> {
        let explicit = self.explicit_edges(state);
        self.outgoing(state)
            .filter(|t| match &t.selector {
                EdgeSelector::Edges(edges) => edges.contains(&wire),
                EdgeSelector::Otherwise => !explicit.contains(&wire),
            })
            .collect()
    }

    /// Syntactic completeness: every state covers every CFA edge with at
    /// least one transition whose condition is not literally false.
    pub fn check_completeness(&self, cfa: &Cfa) -> Result<(), WitnessError> {
        let all_wires: BTreeSet<(usize, usize)> =
            (0..cfa.edges.len()).map(|i| cfa.wire_id(i)).collect();
        for t in &self.transitions {
            if t.source >= self.invariants.len() || t.target >= self.invariants.len() {
                return Err(WitnessError::Shape(format!(
                    "transition {} -> {} references an unknown state",
                    t.source, t.target
                )));
            }
            if let EdgeSelector::Edges(edges) = &t.selector {
                for &wire in edges {
                    if !all_wires.contains(&wire) {
                        return Err(WitnessError::UnknownEdge(wire.0, wire.1));
                    }
                }
            }
        }
        for state in 0..self.invariants.len() {
            let mut covered = BTreeSet::new();
            let mut has_live_otherwise = false;
            for t in self.outgoing(state) {
                if t.condition == BoolExpr::Lit(false) {
                    continue;
                }
                match &t.selector {
                    EdgeSelector::Edges(edges) => covered.extend(edges.iter().copied()),
                    EdgeSelector::Otherwise => has_live_otherwise = true,
                }
            }
            if has_live_otherwise {
                continue;
            }
            if let Some(&missing) = all_wires.difference(&covered).next() {
                return Err(WitnessError::Incomplete { state, edge: missing });
            }
        }
        Ok(())
    }
}

/// Location-shaped witness skeleton: explicit transitions mirroring the
/// control flow (condition true) plus an otherwise self-loop per location.
pub(crate) fn cfa_shaped_transitions(cfa: &Cfa) -> Vec<WitnessTransition> {
    let mut transitions = Vec::new();
    for e in &cfa.edges {
        transitions.push(WitnessTransition {
            source: e.source.0,
            target: e.target.0,
            selector: EdgeSelector::Edges([cfa.wire_id(e.index)].into_iter().collect()),
            condition: BoolExpr::Lit(true),
        });
    }
    for loc in cfa.locations() {
        transitions.push(WitnessTransition {
            source: loc.0,
            target: loc.0,
            selector: EdgeSelector::Otherwise,
            condition: BoolExpr::Lit(true),
        });
    }
    transitions
}

/// Disjunction with flattening, syntactic deduplication, and literal
/// absorption.
pub(crate) fn simplify_or(parts: Vec<BoolExpr>) -> BoolExpr {
    let mut flat: Vec<BoolExpr> = Vec::new();
    let mut stack = parts;
    stack.reverse();
    while let Some(p) = stack.pop() {
        match p {
            BoolExpr::Lit(false) => {}
            BoolExpr::Lit(true) => return BoolExpr::Lit(true),
            BoolExpr::Or(a, b) => {
                stack.push(*b);
                stack.push(*a);
            }
            other => {
                if !flat.contains(&other) {
                    flat.push(other);
                }
            }
        }
    }
    match flat.len() {
        0 => BoolExpr::Lit(false),
        _ => {
            let mut it = flat.into_iter();
            let first = it.next().unwrap();
            it.fold(first, |acc, e| BoolExpr::Or(Box::new(acc), Box::new(e)))
        }
    }
}

/// Conjunction with flattening and literal absorption.
pub(crate) fn simplify_and(parts: Vec<BoolExpr>) -> BoolExpr {
    let mut flat: Vec<BoolExpr> = Vec::new();
    let mut stack = parts;
    stack.reverse();
    while let Some(p) = stack.pop() {
        match p {
            BoolExpr::Lit(true) => {}
            BoolExpr::Lit(false) => return BoolExpr::Lit(false),
            BoolExpr::And(a, b) => {
                stack.push(*b);
                stack.push(*a);
            }
            other => {
                if !flat.contains(&other) {
                    flat.push(other);
                }
            }
        }
    }
    match flat.len() {
        0 => BoolExpr::Lit(true),
        _ => {
            let mut it = flat.into_iter();
            let first = it.next().unwrap();
            it.fold(first, |acc, e| BoolExpr::And(Box::new(acc), Box::new(e)))
        }
    }
}
