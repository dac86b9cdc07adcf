//! The meta reachability algorithm driving a configured CPA.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::frontend::{Cfa, LocId};
use crate::semantics::{execute, TestCase, DEFAULT_STEP_LIMIT};
use crate::solver::{path_formula, SatResult, SolverHandle, SymbolTable};

use super::{AbstractState, AnalysisCtx, CpaDefinition};

#[derive(Debug, Clone)]
pub struct Budget {
    pub max_states: usize,
    pub wall: Option<Duration>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_states: 1_000_000, wall: Some(Duration::from_secs(60)) }
    }
}

/// Cooperative cancellation; checked at every waitlist pop, so a cancelled
/// run stops within one transfer step.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> CancelToken {
        CancelToken::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Verdict {
    True,
    False,
    Unknown,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::True => f.write_str("TRUE"),
            Verdict::False => f.write_str("FALSE"),
            Verdict::Unknown => f.write_str("UNKNOWN"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArgNode {
    pub id: usize,
    pub loc: LocId,
    pub state: AbstractState,
    pub pred: Option<(usize, usize)>,
    pub active: bool,
}

/// Abstract reachability graph plus the frontier bookkeeping.
#[derive(Debug, Default)]
pub struct ReachedSet {
    pub nodes: Vec<ArgNode>,
    by_loc: HashMap<LocId, Vec<usize>>,
    by_hash: HashMap<(LocId, u64), Vec<usize>>,
}

fn state_hash(state: &AbstractState) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    state.hash(&mut h);
    h.finish()
}

impl ReachedSet {
    fn add(&mut self, loc: LocId, state: AbstractState, pred: Option<(usize, usize)>) -> usize {
        let id = self.nodes.len();
        self.by_loc.entry(loc).or_default().push(id);
        self.by_hash.entry((loc, state_hash(&state))).or_default().push(id);
        self.nodes.push(ArgNode { id, loc, state, pred, active: true });
        id
    }

    fn contains_equal(&self, loc: LocId, state: &AbstractState) -> bool {
        self.by_hash
            .get(&(loc, state_hash(state)))
            .map(|ids| ids.iter().any(|&i| self.nodes[i].active && self.nodes[i].state == *state))
            .unwrap_or(false)
    }

    pub fn active_at(&self, loc: LocId) -> impl Iterator<Item = &ArgNode> {
        self.by_loc
            .get(&loc)
            .into_iter()
            .flatten()
            .map(|&i| &self.nodes[i])
            .filter(|n| n.active)
    }

    pub fn locations(&self) -> BTreeSet<LocId> {
        self.nodes.iter().filter(|n| n.active).map(|n| n.loc).collect()
    }

    /// Edge sequence from the initial location to a node.
    pub fn path_edges(&self, node: usize) -> Vec<usize> {
        let mut edges = Vec::new();
        let mut cur = Some(node);
        while let Some(id) = cur {
            match self.nodes[id].pred {
                Some((p, e)) => {
                    edges.push(e);
                    cur = Some(p);
                }
                None => cur = None,
            }
        }
        edges.reverse();
        edges
    }

    pub fn active_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.active).count()
    }
}

#[derive(Debug, Clone)]
pub struct Counterexample {
    /// Concrete edge trace of the replayed violation.
    pub edges: Vec<usize>,
    /// Input assignment that drives execution into the error location.
    pub test_case: TestCase,
}

#[derive(Debug, Clone, Default)]
pub struct RunStats {
    pub steps: u64,
    pub peak_states: usize,
    pub solver_queries: u64,
    pub cancel_observed_at_step: Option<u64>,
    pub wall: Duration,
}

#[derive(Debug)]
pub struct CpaRunOutcome {
    pub verdict: Verdict,
    pub reason: String,
    pub reached: ReachedSet,
    pub counterexample: Option<Counterexample>,
    pub stats: RunStats,
    /// Symbol table of the run; symbolic-state invariants render through it.
    pub symtab: SymbolTable,
}

fn finish_run(
    verdict: Verdict,
    reason: impl Into<String>,
    reached: ReachedSet,
    counterexample: Option<Counterexample>,
    mut stats: RunStats,
    ctx: AnalysisCtx,
    started: Instant,
) -> CpaRunOutcome {
    stats.wall = started.elapsed();
    stats.solver_queries = ctx.solver.queries;
    CpaRunOutcome {
        verdict,
        reason: reason.into(),
        reached,
        counterexample,
        stats,
        symtab: ctx.symtab,
    }
}

/// Run the CPA algorithm to a fixpoint, a confirmed violation, budget
/// exhaustion, or cancellation.
///
/// FALSE is only reported after the abstract counterexample is replayed
/// concretely: the path formula must be satisfiable and the extracted test
/// case must drive `execute` into the error location. A spurious abstract
/// counterexample degrades the verdict to UNKNOWN since no refinement is
/// available.
pub fn run_cpa(
    cfa: &Cfa,
    cpa: &CpaDefinition,
    budget: &Budget,
    cancel: &CancelToken,
    solver: SolverHandle,
) -> CpaRunOutcome {
    let started = Instant::now();
    let mut ctx = AnalysisCtx::new(solver);
    let mut reached = ReachedSet::default();
    let mut waitlist: VecDeque<usize> = VecDeque::new();
    let mut stats = RunStats::default();

    let initial = match cpa.initial(cfa, &mut ctx, budget.max_states as u128) {
        Ok(states) => states,
        Err(e) => {
            return finish_run(
                Verdict::Unknown,
                format!("initial states unavailable: {e}"),
                reached,
                None,
                stats,
                ctx,
                started,
            )
        }
    };
    for st in initial {
        if reached.nodes.len() >= budget.max_states {
            return finish_run(
                Verdict::Unknown,
                format!("state budget of {} exhausted", budget.max_states),
                reached,
                None,
                stats,
                ctx,
                started,
            );
        }
        if reached.contains_equal(cfa.initial, &st) {
            continue;
        }
        let id = reached.add(cfa.initial, st, None);
        waitlist.push_back(id);
    }

    // Linear coverage scans are skipped on very dense locations; exact
    // duplicates are still caught by hashing.
    const COVERAGE_SCAN_LIMIT: usize = 256;

    while let Some(node_id) = waitlist.pop_front() {
        if cancel.is_cancelled() {
            stats.cancel_observed_at_step = Some(stats.steps);
            return finish_run(Verdict::Unknown, "cancelled", reached, None, stats, ctx, started);
        }
        if stats.steps % 128 == 0 {
            if let Some(wall) = budget.wall {
                if started.elapsed() > wall {
                    return finish_run(
                        Verdict::Unknown,
                        format!("wall budget of {wall:?} exhausted"),
                        reached,
                        None,
                        stats,
                        ctx,
                        started,
                    );
                }
            }
        }
        stats.steps += 1;
        if !reached.nodes[node_id].active {
            continue;
        }
        let loc = reached.nodes[node_id].loc;
        let state = reached.nodes[node_id].state.clone();
        for &edge_index in cfa.out_edges(loc) {
            let target = cfa.edge(edge_index).target;
            let at_loop_head = cfa.loop_heads.contains(&target);
            for succ in cpa.transfer(&state, cfa, edge_index, &mut ctx) {
                if reached.nodes.len() >= budget.max_states {
                    return finish_run(
                        Verdict::Unknown,
                        format!("state budget of {} exhausted", budget.max_states),
                        reached,
                        None,
                        stats,
                        ctx,
                        started,
                    );
                }
                // merge step
                let mut consumed = false;
                if !cpa.is_sep() {
                    let partners: Vec<usize> = reached.active_at(target).map(|n| n.id).collect();
                    for old_id in partners {
                        let old_state = reached.nodes[old_id].state.clone();
                        if let Some(merged) = cpa.merge(&succ, &old_state, at_loop_head) {
                            reached.nodes[old_id].active = false;
                            let id = reached.add(target, merged, Some((node_id, edge_index)));
                            waitlist.push_back(id);
                            if cpa.leq(&succ, &reached.nodes[id].state) {
                                consumed = true;
                            }
                        }
                    }
                }
                if consumed {
                    continue;
                }
                // stop step
                if reached.contains_equal(target, &succ) {
                    continue;
                }
                let nearby: Vec<usize> = reached.active_at(target).map(|n| n.id).collect();
                if nearby.len() <= COVERAGE_SCAN_LIMIT
                    && nearby.iter().any(|&i| cpa.leq(&succ, &reached.nodes[i].state))
                {
                    continue;
                }
                let id = reached.add(target, succ, Some((node_id, edge_index)));
                stats.peak_states = stats.peak_states.max(reached.nodes.len());
                if cfa.is_error(target) {
                    // confirm the abstract counterexample concretely
                    let edges = reached.path_edges(id);
                    let (formula, enc) = path_formula(cfa, &edges);
                    match ctx.solver.check_sat(&formula, &enc.symtab) {
                        SatResult::Sat(model) => {
                            let tc = enc.input_test_case(&model).completed(cfa);
                            match execute(cfa, &tc, DEFAULT_STEP_LIMIT) {
                                Ok(path) if cfa.is_error(path.final_location(cfa)) => {
                                    let cex =
                                        Counterexample { edges: path.edges, test_case: tc };
                                    return finish_run(
                                        Verdict::False,
                                        "assertion violation confirmed by concrete replay",
                                        reached,
                                        Some(cex),
                                        stats,
                                        ctx,
                                        started,
                                    );
                                }
                                _ => {
                                    return finish_run(
                                        Verdict::Unknown,
                                        "counterexample replay diverged",
                                        reached,
                                        None,
                                        stats,
                                        ctx,
                                        started,
                                    )
                                }
                            }
                        }
                        SatResult::Unsat => {
                            return finish_run(
                                Verdict::Unknown,
                                "abstract counterexample is infeasible and no refinement is available",
                                reached,
                                None,
                                stats,
                                ctx,
                                started,
                            )
                        }
                        SatResult::Unknown(r) => {
                            return finish_run(
                                Verdict::Unknown,
                                format!("counterexample feasibility undecided: {r}"),
                                reached,
                                None,
                                stats,
                                ctx,
                                started,
                            )
                        }
                    }
                }
                waitlist.push_back(id);
            }
        }
    }

    match ctx.degraded() {
        Some(reason) => {
            let reason = reason.to_string();
            finish_run(Verdict::Unknown, reason, reached, None, stats, ctx, started)
        }
        None => finish_run(
            Verdict::True,
            "fixpoint reached without error states",
            reached,
            None,
            stats,
            ctx,
            started,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::value::ValueCpa;
    use crate::frontend::{build_cfa, parse};
    use crate::semantics::InputDomain;

    const RUNNING_EXAMPLE: &str = "decl x, a, b; input x; a = 0; b = 0; \
        if (x >= 0) { while (a < x) { a = a + 1; b = b + 1; } } else { a = 10; b = 10; } \
        assert(a == b);";

    fn value_cpa(domain: InputDomain) -> CpaDefinition {
        CpaDefinition::Value(ValueCpa { input_domain: domain })
    }

    #[test]
    fn trivially_failing_assert_yields_false_with_short_counterexample() {
        let cfa = build_cfa(&parse("assert(0 == 1);").unwrap());
        let out = run_cpa(
            &cfa,
            &value_cpa(InputDomain::DEFAULT),
            &Budget::default(),
            &CancelToken::new(),
            SolverHandle::internal(),
        );
        assert_eq!(out.verdict, Verdict::False);
        let cex = out.counterexample.unwrap();
        assert_eq!(cex.edges.len(), 1);
        assert!(cex.test_case.0.is_empty());
    }

    #[test]
    fn bounded_value_analysis_proves_the_running_example() {
        let cfa = build_cfa(&parse(RUNNING_EXAMPLE).unwrap());
        let out = run_cpa(
            &cfa,
            &value_cpa(InputDomain::DEFAULT),
            &Budget::default(),
            &CancelToken::new(),
            SolverHandle::internal(),
        );
        assert_eq!(out.verdict, Verdict::True);
    }

    #[test]
    fn unbounded_value_analysis_runs_out_of_budget_on_the_loop() {
        let cfa = build_cfa(&parse(RUNNING_EXAMPLE).unwrap());
        let out = run_cpa(
            &cfa,
            &value_cpa(InputDomain::Unbounded),
            &Budget { max_states: 2_000, wall: None },
            &CancelToken::new(),
            SolverHandle::internal(),
        );
        assert_eq!(out.verdict, Verdict::Unknown);
        assert!(out.reason.contains("budget"));
    }

    #[test]
    fn value_analysis_on_determined_program_follows_the_concrete_path() {
        let src = "decl a, b; a = 1; b = a + 1; while (a < b) { a = a + 1; } assert(a == b);";
        let cfa = build_cfa(&parse(src).unwrap());
        let out = run_cpa(
            &cfa,
            &value_cpa(InputDomain::DEFAULT),
            &Budget::default(),
            &CancelToken::new(),
            SolverHandle::internal(),
        );
        assert_eq!(out.verdict, Verdict::True);
        let concrete = execute(&cfa, &TestCase::new(), 10_000).unwrap();
        let visited: BTreeSet<usize> =
            out.reached.nodes.iter().filter_map(|n| n.pred.map(|(_, e)| e)).collect();
        let concrete_edges: BTreeSet<usize> = concrete.edges.iter().copied().collect();
        assert_eq!(visited, concrete_edges);
    }

    #[test]
    fn pre_set_cancellation_stops_before_the_first_step() {
        let cfa = build_cfa(&parse(RUNNING_EXAMPLE).unwrap());
        let token = CancelToken::new();
        token.cancel();
        let out = run_cpa(
            &cfa,
            &value_cpa(InputDomain::DEFAULT),
            &Budget::default(),
            &token,
            SolverHandle::internal(),
        );
        assert_eq!(out.verdict, Verdict::Unknown);
        assert_eq!(out.stats.cancel_observed_at_step, Some(0));
        assert_eq!(out.stats.steps, 0);
    }

    #[test]
    fn cancellation_is_observed_at_the_next_pop() {
        let cfa = build_cfa(&parse(RUNNING_EXAMPLE).unwrap());
        let token = CancelToken::new();
        let handle = {
            let cfa = cfa.clone();
            let token = token.clone();
            std::thread::spawn(move || {
                run_cpa(
                    &cfa,
                    &value_cpa(InputDomain::Unbounded),
                    &Budget { max_states: 50_000_000, wall: None },
                    &token,
                    SolverHandle::internal(),
                )
            })
        };
        std::thread::sleep(Duration::from_millis(30));
        token.cancel();
        let out = handle.join().unwrap();
        assert_eq!(out.verdict, Verdict::Unknown);
        // the run stopped at the pop where it observed the token
        assert_eq!(out.stats.cancel_observed_at_step, Some(out.stats.steps));
    }
}
