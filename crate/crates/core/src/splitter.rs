//! Range-bounding test-case generation.
//!
//! The loop-bound splitter walks the leftmost syntactic path with exactly
//! `k` unrollings per loop, builds its path formula, and extracts the test
//! case from a model. The random splitters walk the CFA choosing the true
//! branch with a fixed probability. Unsatisfiable walks are shortened from
//! the back until the formula admits a model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::frontend::{Cfa, Indicator, LocId};
use crate::semantics::TestCase;
use crate::solver::{path_formula, SatResult, SolverHandle};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitDiagnostics {
    /// Length of the walked syntactic path before any shortening.
    pub walk_len: usize,
    /// Number of edges dropped by the shortening loop.
    pub dropped_edges: usize,
    pub solver_queries: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitResult {
    /// Bound test cases in ascending range order: `n` test cases split the
    /// path space into `n + 1` ranges.
    pub test_cases: Vec<TestCase>,
    /// Present when no usable split was found; the orchestrator then runs a
    /// single full range.
    pub failed: Option<String>,
    pub diagnostics: Vec<SplitDiagnostics>,
}

impl SplitResult {
    fn failure(reason: impl Into<String>) -> SplitResult {
        SplitResult { test_cases: Vec::new(), failed: Some(reason.into()), diagnostics: Vec::new() }
    }
}

const WALK_CAP: usize = 100_000;

/// Leftmost syntactic path with exactly `k` unrollings per loop: the true
/// branch is taken at the first `k` visits of a loop head (counts reset when
/// the loop exits, so nested loops unroll `k` times per outer iteration) and
/// at every non-loop condition.
fn loop_bound_walk(cfa: &Cfa, k: u32) -> Option<Vec<usize>> {
    let mut edges = Vec::new();
    let mut loc = cfa.initial;
    let mut visits: std::collections::BTreeMap<LocId, u32> = Default::default();
    let mut saw_loop = false;
    while !cfa.is_sink(loc) {
        if edges.len() >= WALK_CAP {
            return None;
        }
        let taken = match cfa.assume_pair(loc) {
            Some((t, f)) => {
                if cfa.loop_heads.contains(&loc) {
                    saw_loop = true;
                    let count = visits.entry(loc).or_insert(0);
                    if *count < k {
                        *count += 1;
                        t
                    } else {
                        *count = 0;
                        f
                    }
                } else {
                    t
                }
            }
            None => cfa.out_edges(loc)[0],
        };
        edges.push(taken);
        loc = cfa.edge(taken).target;
    }
    if saw_loop {
        Some(edges)
    } else {
        None
    }
}

/// Shorten the syntactic path from the back until its formula is
/// satisfiable, then read the test case off the model.
fn solve_with_shortening(
    cfa: &Cfa,
    mut edges: Vec<usize>,
    solver: &mut SolverHandle,
) -> Result<(TestCase, SplitDiagnostics), String> {
    let walk_len = edges.len();
    let queries_before = solver.queries;
    loop {
        let (formula, enc) = path_formula(cfa, &edges);
        match solver.check_sat(&formula, &enc.symtab) {
            SatResult::Sat(model) => {
                let diagnostics = SplitDiagnostics {
                    walk_len,
                    dropped_edges: walk_len - edges.len(),
                    solver_queries: solver.queries - queries_before,
                };
                return Ok((enc.input_test_case(&model), diagnostics));
            }
            SatResult::Unsat | SatResult::Unknown(_) if !edges.is_empty() => {
                edges.pop();
            }
            SatResult::Unsat => {
                return Err("empty path is unsatisfiable".into());
            }
            SatResult::Unknown(reason) => {
                return Err(format!("solver could not decide any prefix: {reason}"));
            }
        }
    }
}

/// Loop-bound splitter: one test case whose induced path runs every loop
/// exactly `k` times along the leftmost branch choices. Fails on loop-free
/// programs.
pub fn split_loopbound(cfa: &Cfa, k: u32, solver: &mut SolverHandle) -> SplitResult {
    if k == 0 {
        return SplitResult::failure("loop bound must be at least 1");
    }
    if cfa.loop_heads.is_empty() {
        return SplitResult::failure("program is loop-free");
    }
    let Some(edges) = loop_bound_walk(cfa, k) else {
        return SplitResult::failure("no loop on the leftmost path");
    };
    match solve_with_shortening(cfa, edges, solver) {
        Ok((tc, diagnostics)) => {
            SplitResult { test_cases: vec![tc], failed: None, diagnostics: vec![diagnostics] }
        }
        Err(reason) => SplitResult::failure(reason),
    }
}

/// Run the loop-bound splitter for several bounds. Deeper unrollings induce
/// smaller paths, so the test cases are emitted in descending bound order to
/// keep consecutive induced paths ascending.
pub fn split_loopbound_multi(cfa: &Cfa, ks: &[u32], solver: &mut SolverHandle) -> SplitResult {
    let mut ks: Vec<u32> = ks.to_vec();
    ks.sort_unstable_by(|a, b| b.cmp(a));
    ks.dedup();
    let mut out = SplitResult { test_cases: Vec::new(), failed: None, diagnostics: Vec::new() };
    for &k in &ks {
        let one = split_loopbound(cfa, k, solver);
        match one.failed {
            None => {
                out.test_cases.extend(one.test_cases);
                out.diagnostics.extend(one.diagnostics);
            }
            Some(reason) => return SplitResult::failure(reason),
        }
    }
    out
}

/// Random walk over the CFA taking the true branch with probability
/// `p_true`; deterministic for a fixed seed.
pub fn split_random(
    cfa: &Cfa,
    p_true: f64,
    seed: u64,
    max_depth: usize,
    solver: &mut SolverHandle,
) -> SplitResult {
    if !(p_true > 0.0 && p_true < 1.0) {
        return SplitResult::failure("branch probability must be strictly between 0 and 1");
    }
    let edges = random_walk(cfa, p_true, seed, max_depth);
    match solve_with_shortening(cfa, edges, solver) {
        Ok((tc, diagnostics)) => {
            SplitResult { test_cases: vec![tc], failed: None, diagnostics: vec![diagnostics] }
        }
        Err(reason) => SplitResult::failure(reason),
    }
}

pub fn random_walk(cfa: &Cfa, p_true: f64, seed: u64, max_depth: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    let mut loc = cfa.initial;
    while !cfa.is_sink(loc) && edges.len() < max_depth {
        let taken = match cfa.assume_pair(loc) {
            Some((t, f)) => {
                if rng.gen_bool(p_true) {
                    t
                } else {
                    f
                }
            }
            None => cfa.out_edges(loc)[0],
        };
        edges.push(taken);
        loc = cfa.edge(taken).target;
    }
    edges
}

pub const DEFAULT_RANDOM_DEPTH: usize = 512;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{build_cfa, parse};
    use crate::semantics::{execute, DEFAULT_STEP_LIMIT};

    const RUNNING_EXAMPLE: &str = "decl x, a, b; input x; a = 0; b = 0; \
        if (x >= 0) { while (a < x) { a = a + 1; b = b + 1; } } else { a = 10; b = 10; } \
        assert(a == b);";

    #[test]
    fn loop_bound_three_picks_x_three() {
        let cfa = build_cfa(&parse(RUNNING_EXAMPLE).unwrap());
        let mut solver = SolverHandle::internal();
        let r = split_loopbound(&cfa, 3, &mut solver);
        assert!(r.failed.is_none());
        assert_eq!(r.test_cases, vec![TestCase::new().assign("x", 3)]);
        assert_eq!(r.diagnostics[0].dropped_edges, 0);
    }

    #[test]
    fn loop_bound_one_picks_x_one() {
        let cfa = build_cfa(&parse(RUNNING_EXAMPLE).unwrap());
        let mut solver = SolverHandle::internal();
        let r = split_loopbound(&cfa, 1, &mut solver);
        assert_eq!(r.test_cases, vec![TestCase::new().assign("x", 1)]);
    }

    #[test]
    fn loop_free_program_fails_the_split() {
        let cfa = build_cfa(&parse(
            "decl x, y; input x; if (x >= 0) { y = x; } else { y = 0 - x; } assert(y >= 0);",
        )
        .unwrap());
        let mut solver = SolverHandle::internal();
        let r = split_loopbound(&cfa, 3, &mut solver);
        assert!(r.failed.is_some());
        assert!(r.test_cases.is_empty());
    }

    #[test]
    fn deterministic_loop_engages_the_shortening() {
        // the loop runs exactly four times regardless of input, so the
        // 3-unrolling exit conjunct is contradictory and gets shortened away
        let cfa = build_cfa(&parse(
            "decl i; i = 0; while (i < 4) { i = i + 1; } assert(i == 4);",
        )
        .unwrap());
        let mut solver = SolverHandle::internal();
        let r = split_loopbound(&cfa, 3, &mut solver);
        assert!(r.failed.is_none());
        assert!(r.diagnostics[0].dropped_edges > 0);
        assert_eq!(r.test_cases, vec![TestCase::new()]);
    }

    #[test]
    fn infeasible_branch_choices_inside_the_loop_shorten_to_a_model() {
        let src = "decl x, i, p; input x; i = 0; p = 0; \
            while (i < x) { if (p == 0) { p = 1; } else { p = 0; } i = i + 1; } \
            assert(p == 0 || p == 1);";
        let cfa = build_cfa(&parse(src).unwrap());
        let mut solver = SolverHandle::internal();
        let r = split_loopbound(&cfa, 3, &mut solver);
        assert!(r.failed.is_none());
        assert!(r.diagnostics[0].dropped_edges > 0);
        // whatever the model, the induced execution must be feasible
        let tc = r.test_cases[0].completed(&cfa);
        execute(&cfa, &tc, DEFAULT_STEP_LIMIT).unwrap();
    }

    #[test]
    fn nested_loops_unroll_per_outer_iteration() {
        let src = "decl x, y, i, j, s; input x, y; i = 0; s = 0; \
            while (i < x) { j = 0; while (j < y) { j = j + 1; s = s + 1; } i = i + 1; } \
            assert(s >= 0);";
        let cfa = build_cfa(&parse(src).unwrap());
        let mut solver = SolverHandle::internal();
        let r = split_loopbound(&cfa, 2, &mut solver);
        assert!(r.failed.is_none());
        let tc = &r.test_cases[0];
        assert_eq!(tc.get("x"), Some(2));
        assert_eq!(tc.get("y"), Some(2));
    }

    #[test]
    fn multi_bound_splitting_orders_test_cases_by_induced_path() {
        use crate::semantics::{induced_min_path, leq, InputDomain};
        let cfa = build_cfa(&parse(RUNNING_EXAMPLE).unwrap());
        let mut solver = SolverHandle::internal();
        let r = split_loopbound_multi(&cfa, &[3, 6], &mut solver);
        assert_eq!(r.test_cases.len(), 2);
        let domain = InputDomain::Bounded { lo: -8, hi: 8 };
        let p0 = induced_min_path(&cfa, &r.test_cases[0], domain, 10_000).unwrap();
        let p1 = induced_min_path(&cfa, &r.test_cases[1], domain, 10_000).unwrap();
        assert!(leq(&p0, &p1, &cfa));
    }

    #[test]
    fn random_split_is_deterministic_and_feasible() {
        let cfa = build_cfa(&parse(RUNNING_EXAMPLE).unwrap());
        let mut solver = SolverHandle::internal();
        let a = split_random(&cfa, 0.5, 42, DEFAULT_RANDOM_DEPTH, &mut solver);
        let b = split_random(&cfa, 0.5, 42, DEFAULT_RANDOM_DEPTH, &mut solver);
        assert!(a.failed.is_none());
        assert_eq!(a.test_cases, b.test_cases);
        let tc = a.test_cases[0].completed(&cfa);
        execute(&cfa, &tc, DEFAULT_STEP_LIMIT).unwrap();
    }

    #[test]
    fn heavier_true_bias_walks_deeper_on_average() {
        let cfa = build_cfa(&parse(RUNNING_EXAMPLE).unwrap());
        let mean = |p: f64| -> f64 {
            let total: usize = (0..1000)
                .map(|seed| random_walk(&cfa, p, seed, DEFAULT_RANDOM_DEPTH).len())
                .sum();
            total as f64 / 1000.0
        };
        assert!(mean(0.9) > mean(0.5));
    }
}
