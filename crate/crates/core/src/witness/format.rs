//! Structured witness file format (JSON).
//!
//! Invariants and transition conditions are expression strings in the
//! program's grammar extended with the literals `true` and `false`; edges
//! are `(source_location, op_index)` wire pairs or the keyword `otherwise`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::frontend::{parse_bool_expr, Cfa};
use crate::semantics::TestCase;

use super::{EdgeSelector, WitnessAutomaton, WitnessError, WitnessMeta, WitnessTransition};

#[derive(Serialize, Deserialize)]
struct RangeRepr {
    lower: Option<TestCase>,
    upper: Option<TestCase>,
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    id: usize,
    invariant: String,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SelectorRepr {
    Keyword(String),
    Edges(Vec<(usize, usize)>),
}

#[derive(Serialize, Deserialize)]
struct TransitionRepr {
    source: usize,
    target: usize,
    edges: SelectorRepr,
    condition: String,
}

#[derive(Serialize, Deserialize)]
struct WitnessRepr {
    program_hash: String,
    producer: String,
    range: RangeRepr,
    initial: usize,
    states: Vec<StateRepr>,
    transitions: Vec<TransitionRepr>,
}

pub fn write_witness(w: &WitnessAutomaton) -> String {
    let repr = WitnessRepr {
        program_hash: w.meta.program_hash.clone(),
        producer: w.meta.producer.clone(),
        range: RangeRepr {
            lower: w.meta.range_lower.clone(),
            upper: w.meta.range_upper.clone(),
        },
        initial: w.initial,
        states: w
            .invariants
            .iter()
            .enumerate()
            .map(|(id, inv)| StateRepr { id, invariant: inv.to_string() })
            .collect(),
        transitions: w
            .transitions
            .iter()
            .map(|t| TransitionRepr {
                source: t.source,
                target: t.target,
                edges: match &t.selector {
                    EdgeSelector::Otherwise => SelectorRepr::Keyword("otherwise".into()),
                    EdgeSelector::Edges(e) => SelectorRepr::Edges(e.iter().copied().collect()),
                },
                condition: t.condition.to_string(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&repr).expect("witness serialization cannot fail")
}

pub fn read_witness(text: &str, cfa: &Cfa) -> Result<WitnessAutomaton, WitnessError> {
    let repr: WitnessRepr =
        serde_json::from_str(text).map_err(|e| WitnessError::Format(e.to_string()))?;
    let mut invariants = vec![None; repr.states.len()];
    for s in &repr.states {
        if s.id >= invariants.len() {
            return Err(WitnessError::Shape(format!("state id {} out of range", s.id)));
        }
        let inv = parse_bool_expr(&s.invariant, &cfa.vars)
            .map_err(|e| WitnessError::Format(format!("invariant of state {}: {e}", s.id)))?;
        invariants[s.id] = Some(inv);
    }
    let invariants: Vec<_> = invariants
        .into_iter()
        .enumerate()
        .map(|(id, inv)| inv.ok_or(WitnessError::Shape(format!("missing state {id}"))))
        .collect::<Result<_, _>>()?;
    let mut transitions = Vec::with_capacity(repr.transitions.len());
    for t in &repr.transitions {
        let selector = match &t.edges {
            SelectorRepr::Keyword(k) if k == "otherwise" => EdgeSelector::Otherwise,
            SelectorRepr::Keyword(k) => {
                return Err(WitnessError::Format(format!("unknown edge keyword `{k}`")))
            }
            SelectorRepr::Edges(list) => {
                let set: BTreeSet<(usize, usize)> = list.iter().copied().collect();
                for &wire in &set {
                    if cfa.edge_by_wire(wire).is_none() {
                        return Err(WitnessError::UnknownEdge(wire.0, wire.1));
                    }
                }
                EdgeSelector::Edges(set)
            }
        };
        let condition = parse_bool_expr(&t.condition, &cfa.vars)
            .map_err(|e| WitnessError::Format(format!("transition condition: {e}")))?;
        transitions.push(WitnessTransition { source: t.source, target: t.target, selector, condition });
    }
    Ok(WitnessAutomaton {
        meta: WitnessMeta {
            program_hash: repr.program_hash,
            producer: repr.producer,
            range_lower: repr.range.lower,
            range_upper: repr.range.upper,
        },
        invariants,
        initial: repr.initial,
        transitions,
    })
}
