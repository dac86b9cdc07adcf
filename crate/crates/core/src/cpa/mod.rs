//! The configurable-program-analysis framework: abstract states, the four
//! CPA components, composition, and the meta reachability algorithm.

mod algo;

pub use algo::{
    run_cpa, ArgNode, Budget, CancelToken, Counterexample, CpaRunOutcome, ReachedSet, RunStats,
    Verdict,
};

use thiserror::Error;

use crate::domains::interval::{IntervalCpa, IntervalState};
use crate::domains::symexec::{SymExecCpa, SymExecState};
use crate::domains::value::{ValueCpa, ValueState};
use crate::frontend::Cfa;
use crate::range_reduction::{BoundCpa, BoundState};
use crate::solver::{SolverHandle, SymbolTable};

#[derive(Debug, Error)]
pub enum CpaError {
    #[error("composite CPA needs at least two components, got {0}")]
    Arity(usize),
    #[error("initial state construction failed: {0}")]
    Initial(String),
}

/// Mutable per-run context: the solver handle, the symbol table shared by
/// symbolic states, and the degradation flag that turns an otherwise
/// complete exploration into an unknown verdict.
#[derive(Debug)]
pub struct AnalysisCtx {
    pub solver: SolverHandle,
    pub symtab: SymbolTable,
    degraded: Option<String>,
}

impl AnalysisCtx {
    pub fn new(solver: SolverHandle) -> AnalysisCtx {
        AnalysisCtx { solver, symtab: SymbolTable::new(), degraded: None }
    }

    pub fn degrade(&mut self, reason: String) {
        if self.degraded.is_none() {
            self.degraded = Some(reason);
        }
    }

    pub fn degraded(&self) -> Option<&str> {
        self.degraded.as_deref()
    }
}

/// A configurable program analysis. Composition is a first-class variant so
/// ranged analyses can be assembled at run time.
#[derive(Debug, Clone)]
pub enum CpaDefinition {
    /// Pass-through component with a single unit state.
    Unit,
    Value(ValueCpa),
    Interval(IntervalCpa),
    SymExec(SymExecCpa),
    Bound(BoundCpa),
    Composite(Vec<CpaDefinition>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AbstractState {
    Unit,
    Value(ValueState),
    Interval(IntervalState),
    SymExec(SymExecState),
    Bound(BoundState),
    Composite(Vec<AbstractState>),
}

impl AbstractState {
    /// The innermost analysis component of a composite state; used by
    /// witness generation to render invariants.
    pub fn analysis_component(&self) -> &AbstractState {
        match self {
            AbstractState::Composite(parts) => {
                parts.last().expect("composite states are non-empty").analysis_component()
            }
            other => other,
        }
    }
}

/// Build a composite CPA. Nested composites are flattened, so composition
/// is associative on the resulting state tuples.
pub fn compose(cpas: Vec<CpaDefinition>) -> Result<CpaDefinition, CpaError> {
    if cpas.len() < 2 {
        return Err(CpaError::Arity(cpas.len()));
    }
    let mut flat = Vec::new();
    for cpa in cpas {
        match cpa {
            CpaDefinition::Composite(inner) => flat.extend(inner),
            other => flat.push(other),
        }
    }
    Ok(CpaDefinition::Composite(flat))
}

impl CpaDefinition {
    pub fn name(&self) -> String {
        match self {
            CpaDefinition::Unit => "unit".into(),
            CpaDefinition::Value(_) => "value".into(),
            CpaDefinition::Interval(_) => "interval".into(),
            CpaDefinition::SymExec(_) => "symexec".into(),
            CpaDefinition::Bound(b) => match b.role {
                crate::range_reduction::Role::Lower => "bound-lower".into(),
                crate::range_reduction::Role::Upper => "bound-upper".into(),
            },
            CpaDefinition::Composite(parts) => {
                let names: Vec<String> = parts.iter().map(|p| p.name()).collect();
                format!("({})", names.join(" x "))
            }
        }
    }

    /// Initial abstract states at the initial location. The value analysis
    /// enumerates the bounded input domain here, so the count is capped.
    pub fn initial(&self, cfa: &Cfa, ctx: &mut AnalysisCtx, cap: u128) -> Result<Vec<AbstractState>, CpaError> {
        match self {
            CpaDefinition::Unit => Ok(vec![AbstractState::Unit]),
            CpaDefinition::Value(v) => Ok(v
                .initial_states(cfa, cap)
                .map_err(CpaError::Initial)?
                .into_iter()
                .map(AbstractState::Value)
                .collect()),
            CpaDefinition::Interval(i) => {
                Ok(vec![AbstractState::Interval(i.initial_state(cfa))])
            }
            CpaDefinition::SymExec(s) => {
                Ok(vec![AbstractState::SymExec(s.initial_state(cfa, ctx))])
            }
            CpaDefinition::Bound(b) => {
                let (_, st) = crate::range_reduction::init_bound(
                    cfa,
                    &b.test_case,
                    b.role,
                    b.input_domain,
                )
                .map_err(|e| CpaError::Initial(e.to_string()))?;
                Ok(vec![AbstractState::Bound(st)])
            }
            CpaDefinition::Composite(parts) => {
                let mut acc: Vec<Vec<AbstractState>> = vec![Vec::new()];
                for part in parts {
                    let options = part.initial(cfa, ctx, cap)?;
                    let mut next = Vec::with_capacity(acc.len() * options.len());
                    for prefix in &acc {
                        for opt in &options {
                            let mut tuple = prefix.clone();
                            tuple.push(opt.clone());
                            next.push(tuple);
                        }
                    }
                    acc = next;
                    if acc.len() as u128 > cap {
                        return Err(CpaError::Initial(format!(
                            "more than {cap} initial composite states"
                        )));
                    }
                }
                Ok(acc.into_iter().map(AbstractState::Composite).collect())
            }
        }
    }

    /// Abstract successors along one edge. The composite transfer is the
    /// product transfer with the bottom short-circuit: no successor as soon
    /// as one component has none.
    pub fn transfer(
        &self,
        state: &AbstractState,
        cfa: &Cfa,
        edge_index: usize,
        ctx: &mut AnalysisCtx,
    ) -> Vec<AbstractState> {
        match (self, state) {
            (CpaDefinition::Unit, AbstractState::Unit) => vec![AbstractState::Unit],
            (CpaDefinition::Value(_), AbstractState::Value(v)) => v
                .transfer(&cfa.edge(edge_index).op)
                .into_iter()
                .map(AbstractState::Value)
                .collect(),
            (CpaDefinition::Interval(_), AbstractState::Interval(i)) => i
                .transfer(&cfa.edge(edge_index).op)
                .into_iter()
                .map(AbstractState::Interval)
                .collect(),
            (CpaDefinition::SymExec(s), AbstractState::SymExec(st)) => s
                .transfer(st, cfa, edge_index, ctx)
                .into_iter()
                .map(AbstractState::SymExec)
                .collect(),
            (CpaDefinition::Bound(b), AbstractState::Bound(st)) => b
                .transfer(st, cfa, edge_index)
                .into_iter()
                .map(AbstractState::Bound)
                .collect(),
            (CpaDefinition::Composite(parts), AbstractState::Composite(states)) => {
                debug_assert_eq!(parts.len(), states.len());
                let mut tuples: Vec<Vec<AbstractState>> = vec![Vec::new()];
                for (part, st) in parts.iter().zip(states) {
                    let succs = part.transfer(st, cfa, edge_index, ctx);
                    if succs.is_empty() {
                        return vec![];
                    }
                    let mut next = Vec::with_capacity(tuples.len() * succs.len());
                    for prefix in &tuples {
                        for s in &succs {
                            let mut tuple = prefix.clone();
                            tuple.push(s.clone());
                            next.push(tuple);
                        }
                    }
                    tuples = next;
                }
                tuples.into_iter().map(AbstractState::Composite).collect()
            }
            _ => unreachable!("state kind does not match CPA kind"),
        }
    }

    /// Coverage order used by the stop operator.
    pub fn leq(&self, a: &AbstractState, b: &AbstractState) -> bool {
        match (self, a, b) {
            (CpaDefinition::Unit, AbstractState::Unit, AbstractState::Unit) => true,
            (CpaDefinition::Value(_), AbstractState::Value(x), AbstractState::Value(y)) => {
                x.leq(y)
            }
            (
                CpaDefinition::Interval(_),
                AbstractState::Interval(x),
                AbstractState::Interval(y),
            ) => x.leq(y),
            (
                CpaDefinition::SymExec(_),
                AbstractState::SymExec(x),
                AbstractState::SymExec(y),
            ) => x == y,
            (CpaDefinition::Bound(_), AbstractState::Bound(x), AbstractState::Bound(y)) => {
                match (x, y) {
                    (_, BoundState::Released) => true,
                    (BoundState::Tracking(vx), BoundState::Tracking(vy)) => vx.leq(vy),
                    (BoundState::Released, BoundState::Tracking(_)) => false,
                }
            }
            (
                CpaDefinition::Composite(parts),
                AbstractState::Composite(xs),
                AbstractState::Composite(ys),
            ) => parts
                .iter()
                .zip(xs.iter().zip(ys))
                .all(|(p, (x, y))| p.leq(x, y)),
            _ => unreachable!("state kind does not match CPA kind"),
        }
    }

    /// Whether merge never combines states (merge-sep).
    pub fn is_sep(&self) -> bool {
        match self {
            CpaDefinition::Interval(_) => false,
            CpaDefinition::Composite(parts) => parts.iter().all(|p| p.is_sep()),
            _ => true,
        }
    }

    /// Merge operator. Returns the replacement for `old` when information
    /// is combined, `None` to keep states separate. Composites merge
    /// component-wise but only when every merge-sep component agrees, which
    /// keeps path-tracking components exact.
    pub fn merge(
        &self,
        new: &AbstractState,
        old: &AbstractState,
        at_loop_head: bool,
    ) -> Option<AbstractState> {
        match (self, new, old) {
            (
                CpaDefinition::Interval(cpa),
                AbstractState::Interval(n),
                AbstractState::Interval(o),
            ) => {
                if !at_loop_head {
                    return None;
                }
                let merged = cpa.merge_at_loop_head(n, o);
                if merged == *o {
                    None
                } else {
                    Some(AbstractState::Interval(merged))
                }
            }
            (
                CpaDefinition::Composite(parts),
                AbstractState::Composite(ns),
                AbstractState::Composite(os),
            ) => {
                let mut out = Vec::with_capacity(parts.len());
                let mut changed = false;
                for (p, (n, o)) in parts.iter().zip(ns.iter().zip(os)) {
                    if p.is_sep() {
                        if n != o {
                            return None;
                        }
                        out.push(o.clone());
                    } else {
                        match p.merge(n, o, at_loop_head) {
                            Some(m) => {
                                changed = true;
                                out.push(m);
                            }
                            None => out.push(o.clone()),
                        }
                    }
                }
                if changed {
                    Some(AbstractState::Composite(out))
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{build_cfa, parse};
    use crate::semantics::InputDomain;

    #[test]
    fn compose_requires_two_components() {
        let err = compose(vec![CpaDefinition::Unit]).unwrap_err();
        assert!(matches!(err, CpaError::Arity(1)));
    }

    #[test]
    fn compose_flattens_nested_composites() {
        let inner = compose(vec![CpaDefinition::Unit, CpaDefinition::Unit]).unwrap();
        let outer = compose(vec![CpaDefinition::Unit, inner]).unwrap();
        let CpaDefinition::Composite(parts) = outer else { panic!() };
        assert_eq!(parts.len(), 3);
    }

    #[test]
    fn composite_transfer_short_circuits_on_empty_component() {
        let cfa = build_cfa(&parse("decl x; input x; assert(x == 0);").unwrap());
        let cpa = compose(vec![
            CpaDefinition::Unit,
            CpaDefinition::Value(ValueCpa { input_domain: InputDomain::Unbounded }),
        ])
        .unwrap();
        let mut ctx = AnalysisCtx::new(SolverHandle::internal());
        // pick the assume edge that contradicts a concrete value
        let state = AbstractState::Composite(vec![
            AbstractState::Unit,
            AbstractState::Value(ValueState(
                [("x".to_string(), 5i64)].into_iter().collect(),
            )),
        ]);
        let (t, f) = cfa.assume_pair(cfa.initial).unwrap();
        assert!(cpa.transfer(&state, &cfa, t, &mut ctx).is_empty());
        assert_eq!(cpa.transfer(&state, &cfa, f, &mut ctx).len(), 1);
    }
}
