//! Concrete execution semantics, the total path ordering, ranges, and the
//! brute-force path enumeration used as an oracle by tests and the CLI.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{BoolExpr, Cfa, EdgeOp, Indicator, IntExpr, LocId};

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error("test case does not assign input `{0}`")]
    Underspecified(String),
    #[error("test case assigns `{0}`, which is not an input variable")]
    NotAnInput(String),
    #[error("execution exceeded {0} steps")]
    StepLimit(usize),
    #[error("arithmetic overflow while evaluating `{0}`")]
    Overflow(String),
    #[error("input domain enumerates {count} assignments, more than the cap of {cap}")]
    DomainTooLarge { count: u128, cap: u128 },
    #[error("operation requires a bounded input domain")]
    UnboundedDomain,
    #[error("paths are not comparable: {0}")]
    Incomparable(String),
}

/// A (possibly partial) assignment of input variables.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TestCase(pub BTreeMap<String, i64>);

impl TestCase {
    pub fn new() -> Self {
        TestCase(BTreeMap::new())
    }

    pub fn assign(mut self, var: &str, value: i64) -> Self {
        self.0.insert(var.to_string(), value);
        self
    }

    pub fn get(&self, var: &str) -> Option<i64> {
        self.0.get(var).copied()
    }

    /// Checks that every assigned variable is an input of `cfa`.
    pub fn validate(&self, cfa: &Cfa) -> Result<(), SemanticsError> {
        for name in self.0.keys() {
            if !cfa.is_input(name) {
                return Err(SemanticsError::NotAnInput(name.clone()));
            }
        }
        Ok(())
    }

    pub fn is_total(&self, cfa: &Cfa) -> bool {
        cfa.inputs.iter().all(|i| self.0.contains_key(i))
    }

    /// Fill unassigned inputs with 0.
    pub fn completed(&self, cfa: &Cfa) -> TestCase {
        let mut map = self.0.clone();
        for i in &cfa.inputs {
            map.entry(i.clone()).or_insert(0);
        }
        TestCase(map)
    }
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}: {v}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Concrete data state: one value per declared variable, in `Cfa::vars`
/// order. Variables start at 0; inputs are overwritten from the test case.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DataState(pub Vec<i64>);

impl DataState {
    pub fn initial(cfa: &Cfa, tc: &TestCase) -> DataState {
        let mut vals = vec![0i64; cfa.vars.len()];
        for (name, value) in &tc.0 {
            if let Some(i) = cfa.var_pos(name) {
                vals[i] = *value;
            }
        }
        DataState(vals)
    }

    pub fn get(&self, cfa: &Cfa, name: &str) -> Option<i64> {
        cfa.var_pos(name).map(|i| self.0[i])
    }
}

/// Evaluate an integer expression in a concrete state.
pub fn eval_int(e: &IntExpr, cfa: &Cfa, s: &DataState) -> Result<i64, SemanticsError> {
    let ov = || SemanticsError::Overflow(e.to_string());
    match e {
        IntExpr::Const(c) => Ok(*c),
        IntExpr::Var(v) => Ok(s.0[cfa.var_pos(v).expect("validated variable")]),
        IntExpr::Neg(i) => eval_int(i, cfa, s)?.checked_neg().ok_or_else(ov),
        IntExpr::Add(a, b) => {
            eval_int(a, cfa, s)?.checked_add(eval_int(b, cfa, s)?).ok_or_else(ov)
        }
        IntExpr::Sub(a, b) => {
            eval_int(a, cfa, s)?.checked_sub(eval_int(b, cfa, s)?).ok_or_else(ov)
        }
        IntExpr::Mul(a, b) => {
            eval_int(a, cfa, s)?.checked_mul(eval_int(b, cfa, s)?).ok_or_else(ov)
        }
    }
}

pub fn eval_bool(e: &BoolExpr, cfa: &Cfa, s: &DataState) -> Result<bool, SemanticsError> {
    Ok(match e {
        BoolExpr::Lit(b) => *b,
        BoolExpr::Cmp(op, a, b) => op.apply(eval_int(a, cfa, s)?, eval_int(b, cfa, s)?),
        BoolExpr::Not(i) => !eval_bool(i, cfa, s)?,
        BoolExpr::And(a, b) => eval_bool(a, cfa, s)? && eval_bool(b, cfa, s)?,
        BoolExpr::Or(a, b) => eval_bool(a, cfa, s)? || eval_bool(b, cfa, s)?,
    })
}

/// An execution path: the edge sequence from the initial location plus the
/// data states along it (kept for diagnostics; ordering and equality use
/// only the edge sequence).
#[derive(Debug, Clone)]
pub struct Path {
    pub edges: Vec<usize>,
    pub states: Vec<DataState>,
    pub maximal: bool,
}

impl PartialEq for Path {
    fn eq(&self, other: &Self) -> bool {
        self.edges == other.edges
    }
}

impl Eq for Path {}

impl Path {
    pub fn final_location(&self, cfa: &Cfa) -> LocId {
        self.edges.last().map(|&e| cfa.edge(e).target).unwrap_or(cfa.initial)
    }

    pub fn final_state(&self) -> &DataState {
        self.states.last().expect("paths carry at least the initial state")
    }

    pub fn visit_count(&self, cfa: &Cfa, loc: LocId) -> usize {
        usize::from(cfa.initial == loc)
            + self.edges.iter().filter(|&&e| cfa.edge(e).target == loc).count()
    }

    /// Truncate to the first `len` edges.
    pub fn prefix(&self, len: usize) -> Path {
        Path {
            edges: self.edges[..len].to_vec(),
            states: self.states[..len + 1].to_vec(),
            maximal: false,
        }
    }
}

pub const DEFAULT_STEP_LIMIT: usize = 200_000;
pub const DEFAULT_ASSIGNMENT_CAP: u128 = 1_000_000;

/// Run the program under a fully specified test case. Deterministic; an
/// assertion failure yields a path ending at the error location.
pub fn execute(cfa: &Cfa, tc: &TestCase, step_limit: usize) -> Result<Path, SemanticsError> {
    tc.validate(cfa)?;
    for i in &cfa.inputs {
        if tc.get(i).is_none() {
            return Err(SemanticsError::Underspecified(i.clone()));
        }
    }
    let mut state = DataState::initial(cfa, tc);
    let mut loc = cfa.initial;
    let mut path = Path { edges: Vec::new(), states: vec![state.clone()], maximal: false };
    loop {
        let out = cfa.out_edges(loc);
        if out.is_empty() {
            path.maximal = true;
            return Ok(path);
        }
        if path.edges.len() >= step_limit {
            return Err(SemanticsError::StepLimit(step_limit));
        }
        let taken = if let Some((t, f)) = cfa.assume_pair(loc) {
            let EdgeOp::Assume { cond } = &cfa.edge(t).op else { unreachable!() };
            if eval_bool(cond, cfa, &state)? {
                t
            } else {
                f
            }
        } else {
            debug_assert_eq!(out.len(), 1, "non-branching locations have one successor");
            out[0]
        };
        let edge = cfa.edge(taken);
        if let EdgeOp::Assign { var, expr } = &edge.op {
            let v = eval_int(expr, cfa, &state)?;
            state.0[cfa.var_pos(var).expect("validated variable")] = v;
        }
        loc = edge.target;
        path.edges.push(taken);
        path.states.push(state.clone());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Leq,
    Geq,
    Equal,
}

/// Result of comparing two paths: the relation and the length of the common
/// edge prefix at which they diverge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathOrderWitness {
    pub relation: Relation,
    pub diverge_index: usize,
}

/// Total order on paths of one CFA: a path is smaller than its extensions,
/// and at the first divergence the path taking the true branch is smaller.
pub fn path_leq(a: &Path, b: &Path, cfa: &Cfa) -> Result<PathOrderWitness, SemanticsError> {
    let mut k = 0;
    while k < a.edges.len() && k < b.edges.len() && a.edges[k] == b.edges[k] {
        k += 1;
    }
    if k == a.edges.len() && k == b.edges.len() {
        return Ok(PathOrderWitness { relation: Relation::Equal, diverge_index: k });
    }
    if k == a.edges.len() {
        return Ok(PathOrderWitness { relation: Relation::Leq, diverge_index: k });
    }
    if k == b.edges.len() {
        return Ok(PathOrderWitness { relation: Relation::Geq, diverge_index: k });
    }
    let (ea, eb) = (a.edges[k], b.edges[k]);
    if ea >= cfa.edges.len() || eb >= cfa.edges.len() || cfa.edge(ea).source != cfa.edge(eb).source
    {
        return Err(SemanticsError::Incomparable(
            "diverging edges do not leave a common location".into(),
        ));
    }
    match (cfa.edge(ea).indicator, cfa.edge(eb).indicator) {
        (Indicator::True, Indicator::False) => {
            Ok(PathOrderWitness { relation: Relation::Leq, diverge_index: k })
        }
        (Indicator::False, Indicator::True) => {
            Ok(PathOrderWitness { relation: Relation::Geq, diverge_index: k })
        }
        _ => Err(SemanticsError::Incomparable(
            "divergence without a true/false assume pair".into(),
        )),
    }
}

pub fn leq(a: &Path, b: &Path, cfa: &Cfa) -> bool {
    matches!(
        path_leq(a, b, cfa).map(|w| w.relation),
        Ok(Relation::Leq) | Ok(Relation::Equal)
    )
}

/// A path bound: the universal bottom/top sentinels or a concrete path.
#[derive(Debug, Clone, PartialEq)]
pub enum PathBound {
    Bottom,
    Concrete(Path),
    Top,
}

impl PathBound {
    pub fn leq(&self, other: &PathBound, cfa: &Cfa) -> bool {
        match (self, other) {
            (PathBound::Bottom, _) => true,
            (_, PathBound::Top) => true,
            (PathBound::Top, _) => false,
            (_, PathBound::Bottom) => false,
            (PathBound::Concrete(a), PathBound::Concrete(b)) => leq(a, b, cfa),
        }
    }
}

/// A closed interval of paths under the path ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRange {
    pub lower: PathBound,
    pub upper: PathBound,
}

impl PathRange {
    pub fn full() -> PathRange {
        PathRange { lower: PathBound::Bottom, upper: PathBound::Top }
    }

    pub fn contains(&self, path: &Path, cfa: &Cfa) -> bool {
        let p = PathBound::Concrete(path.clone());
        self.lower.leq(&p, cfa) && p.leq(&self.upper, cfa)
    }
}

pub fn in_range(path: &Path, range: &PathRange, cfa: &Cfa) -> bool {
    range.contains(path, cfa)
}

/// The bounded input box used by oracles and the value analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputDomain {
    Bounded { lo: i64, hi: i64 },
    Unbounded,
}

impl InputDomain {
    pub const DEFAULT: InputDomain = InputDomain::Bounded { lo: -8, hi: 8 };

    pub fn assignment_count(&self, free_inputs: usize) -> Option<u128> {
        match self {
            InputDomain::Unbounded => {
                if free_inputs == 0 {
                    Some(1)
                } else {
                    None
                }
            }
            InputDomain::Bounded { lo, hi } => {
                let width = (hi - lo) as u128 + 1;
                let mut total: u128 = 1;
                for _ in 0..free_inputs {
                    total = total.checked_mul(width)?;
                }
                Some(total)
            }
        }
    }
}

/// All completions of `tc` over the domain, lexicographic in input order.
pub fn completions(
    cfa: &Cfa,
    tc: &TestCase,
    domain: InputDomain,
    cap: u128,
) -> Result<Vec<TestCase>, SemanticsError> {
    tc.validate(cfa)?;
    let free: Vec<&String> = cfa.inputs.iter().filter(|i| tc.get(i).is_none()).collect();
    let InputDomain::Bounded { lo, hi } = domain else {
        if free.is_empty() {
            return Ok(vec![tc.clone()]);
        }
        return Err(SemanticsError::UnboundedDomain);
    };
    let count = domain
        .assignment_count(free.len())
        .ok_or(SemanticsError::DomainTooLarge { count: u128::MAX, cap })?;
    if count > cap {
        return Err(SemanticsError::DomainTooLarge { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut odo = vec![lo; free.len()];
    loop {
        let mut t = tc.clone();
        for (i, v) in free.iter().zip(&odo) {
            t.0.insert((*i).clone(), *v);
        }
        out.push(t);
        // advance odometer, last input fastest
        let mut pos = free.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            if odo[pos] < hi {
                odo[pos] += 1;
                for v in &mut odo[pos + 1..] {
                    *v = lo;
                }
                break;
            }
        }
    }
}

/// Every maximal feasible path over total assignments from the domain,
/// deduplicated and sorted ascending by the path order.
pub fn enumerate_paths(
    cfa: &Cfa,
    domain: InputDomain,
    cap: u128,
) -> Result<Vec<Path>, SemanticsError> {
    let all = completions(cfa, &TestCase::new(), domain, cap)?;
    let mut paths: Vec<Path> = Vec::new();
    for tc in &all {
        let p = execute(cfa, tc, DEFAULT_STEP_LIMIT)?;
        if !paths.iter().any(|q| q.edges == p.edges) {
            paths.push(p);
        }
    }
    sort_paths(&mut paths, cfa);
    Ok(paths)
}

pub fn sort_paths(paths: &mut [Path], cfa: &Cfa) {
    paths.sort_by(|a, b| match path_leq(a, b, cfa).expect("total order").relation {
        Relation::Leq => std::cmp::Ordering::Less,
        Relation::Equal => std::cmp::Ordering::Equal,
        Relation::Geq => std::cmp::Ordering::Greater,
    });
}

/// The minimum, under the path order, of the maximal paths consistent with a
/// possibly partial test case, taken over the bounded input domain.
pub fn induced_min_path(
    cfa: &Cfa,
    tc: &TestCase,
    domain: InputDomain,
    cap: u128,
) -> Result<Path, SemanticsError> {
    let all = completions(cfa, tc, domain, cap)?;
    let mut best: Option<Path> = None;
    for t in &all {
        let p = execute(cfa, t, DEFAULT_STEP_LIMIT)?;
        best = Some(match best {
            None => p,
            Some(b) => {
                if leq(&p, &b, cfa) {
                    p
                } else {
                    b
                }
            }
        });
    }
    Ok(best.expect("at least one completion"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{build_cfa, parse};

    const RUNNING_EXAMPLE: &str = "decl x, a, b; input x; a = 0; b = 0; \
        if (x >= 0) { while (a < x) { a = a + 1; b = b + 1; } } else { a = 10; b = 10; } \
        assert(a == b);";

    fn running_example() -> Cfa {
        build_cfa(&parse(RUNNING_EXAMPLE).unwrap())
    }

    fn tc(pairs: &[(&str, i64)]) -> TestCase {
        let mut t = TestCase::new();
        for (k, v) in pairs {
            t = t.assign(k, *v);
        }
        t
    }

    #[test]
    fn execute_loops_twice_for_x2() {
        let cfa = running_example();
        let head = *cfa.loop_heads.iter().next().unwrap();
        let p = execute(&cfa, &tc(&[("x", 2)]), 10_000).unwrap();
        assert!(p.maximal);
        // initial visit plus two loop-arounds
        let visits = p.edges.iter().filter(|&&e| cfa.edge(e).target == head).count();
        assert_eq!(visits, 3);
        let fin = p.final_location(&cfa);
        assert!(!cfa.is_error(fin) && cfa.is_sink(fin));
        assert_eq!(p.final_state().get(&cfa, "a"), Some(2));
        assert_eq!(p.final_state().get(&cfa, "b"), Some(2));
    }

    #[test]
    fn execute_skips_loop_for_x0() {
        let cfa = running_example();
        let p = execute(&cfa, &tc(&[("x", 0)]), 10_000).unwrap();
        assert_eq!(p.edges.len(), 5);
        assert!(!cfa.is_error(p.final_location(&cfa)));
    }

    #[test]
    fn failing_assert_ends_at_error_location() {
        let cfa = build_cfa(&parse("assert(0 == 1);").unwrap());
        let p = execute(&cfa, &TestCase::new(), 10).unwrap();
        assert!(p.maximal);
        assert!(cfa.is_error(p.final_location(&cfa)));
    }

    #[test]
    fn loop_path_is_smaller_than_exit_path() {
        let cfa = running_example();
        let p1 = execute(&cfa, &tc(&[("x", 2)]), 10_000).unwrap();
        let p2 = execute(&cfa, &tc(&[("x", 0)]), 10_000).unwrap();
        let w = path_leq(&p1, &p2, &cfa).unwrap();
        assert_eq!(w.relation, Relation::Leq);
        // Both share a = 0; b = 0; [x >= 0] before diverging at the loop head.
        assert_eq!(w.diverge_index, 3);
        assert_eq!(
            path_leq(&p1, &p1, &cfa).unwrap(),
            PathOrderWitness { relation: Relation::Equal, diverge_index: p1.edges.len() }
        );
    }

    #[test]
    fn sentinels_bound_every_path() {
        let cfa = running_example();
        let p = execute(&cfa, &tc(&[("x", 1)]), 10_000).unwrap();
        let b = PathBound::Concrete(p);
        assert!(b.leq(&PathBound::Top, &cfa));
        assert!(PathBound::Bottom.leq(&b, &cfa));
        assert!(!PathBound::Top.leq(&b, &cfa));
        assert!(!b.leq(&PathBound::Bottom, &cfa));
    }

    #[test]
    fn prefixes_precede_extensions() {
        let cfa = running_example();
        let p = execute(&cfa, &tc(&[("x", 3)]), 10_000).unwrap();
        for len in 0..p.edges.len() {
            let pre = p.prefix(len);
            let w = path_leq(&pre, &p, &cfa).unwrap();
            assert!(matches!(w.relation, Relation::Leq | Relation::Equal));
        }
    }

    #[test]
    fn enumeration_small_domain_gives_three_ordered_paths() {
        let cfa = running_example();
        let paths = enumerate_paths(&cfa, InputDomain::Bounded { lo: -1, hi: 1 }, 1000).unwrap();
        assert_eq!(paths.len(), 3);
        let p_loop = execute(&cfa, &tc(&[("x", 1)]), 10_000).unwrap();
        let p_zero = execute(&cfa, &tc(&[("x", 0)]), 10_000).unwrap();
        let p_else = execute(&cfa, &tc(&[("x", -1)]), 10_000).unwrap();
        assert_eq!(paths[0], p_loop);
        assert_eq!(paths[1], p_zero);
        assert_eq!(paths[2], p_else);
    }

    #[test]
    fn enumeration_default_domain_is_totally_ordered() {
        let cfa = running_example();
        let assignments = completions(&cfa, &TestCase::new(), InputDomain::DEFAULT, 1000).unwrap();
        assert_eq!(assignments.len(), 17);
        let paths = enumerate_paths(&cfa, InputDomain::DEFAULT, 1000).unwrap();
        // Nine distinct unrolling counts for x in 0..=8 plus the single
        // else-branch path shared by every negative input.
        assert_eq!(paths.len(), 10);
        for i in 0..paths.len() {
            for j in i + 1..paths.len() {
                let w = path_leq(&paths[i], &paths[j], &cfa).unwrap();
                assert_eq!(w.relation, Relation::Leq);
            }
        }
    }

    #[test]
    fn straight_line_program_has_one_path() {
        let cfa = build_cfa(&parse("decl a; a = 3; assert(a == 3);").unwrap());
        let paths = enumerate_paths(&cfa, InputDomain::DEFAULT, 1000).unwrap();
        assert_eq!(paths.len(), 1);
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let cfa = running_example();
        let err = enumerate_paths(&cfa, InputDomain::DEFAULT, 2).unwrap_err();
        assert!(matches!(err, SemanticsError::DomainTooLarge { count: 17, cap: 2 }));
    }

    #[test]
    fn induced_min_of_total_test_case_is_execute() {
        let cfa = running_example();
        let t = tc(&[("x", 2)]);
        let p = induced_min_path(&cfa, &t, InputDomain::DEFAULT, 1000).unwrap();
        assert_eq!(p, execute(&cfa, &t, 10_000).unwrap());
    }

    #[test]
    fn induced_min_of_empty_test_case_is_leftmost_bounded_path() {
        let cfa = running_example();
        let p = induced_min_path(&cfa, &TestCase::new(), InputDomain::DEFAULT, 1000).unwrap();
        // Maximal loop unrolling within the bound takes the true branch at
        // every divergence, so the minimum is the x = 8 path.
        assert_eq!(p, execute(&cfa, &tc(&[("x", 8)]), 10_000).unwrap());
    }

    #[test]
    fn induced_min_on_loop_free_diamond_takes_true_branches() {
        let src = "decl x, y; input x; if (x >= 0) { y = 1; } else { y = 2; } assert(y > 0);";
        let cfa = build_cfa(&parse(src).unwrap());
        let p = induced_min_path(&cfa, &TestCase::new(), InputDomain::DEFAULT, 1000).unwrap();
        for &e in &p.edges {
            assert_ne!(cfa.edge(e).indicator, Indicator::False);
        }
    }

    #[test]
    fn range_membership_uses_closed_bounds() {
        let cfa = running_example();
        let p1 = execute(&cfa, &tc(&[("x", 2)]), 10_000).unwrap();
        let p2 = execute(&cfa, &tc(&[("x", 0)]), 10_000).unwrap();
        let p_else = execute(&cfa, &tc(&[("x", -1)]), 10_000).unwrap();
        let below_p2 = PathRange { lower: PathBound::Bottom, upper: PathBound::Concrete(p2.clone()) };
        assert!(below_p2.contains(&p2, &cfa), "closed upper bound");
        assert!(below_p2.contains(&p1, &cfa));
        assert!(!below_p2.contains(&p_else, &cfa));
    }

    #[test]
    fn full_range_equals_enumeration() {
        let cfa = running_example();
        let full = PathRange::full();
        for p in enumerate_paths(&cfa, InputDomain::DEFAULT, 1000).unwrap() {
            assert!(full.contains(&p, &cfa));
        }
    }

    #[test]
    fn execute_is_deterministic() {
        let cfa = running_example();
        let a = execute(&cfa, &tc(&[("x", 5)]), 10_000).unwrap();
        let b = execute(&cfa, &tc(&[("x", 5)]), 10_000).unwrap();
        assert_eq!(a.edges, b.edges);
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn underspecified_execute_is_rejected() {
        let cfa = running_example();
        assert!(matches!(
            execute(&cfa, &TestCase::new(), 10),
            Err(SemanticsError::Underspecified(_))
        ));
        assert!(matches!(
            execute(&cfa, &tc(&[("a", 1)]), 10),
            Err(SemanticsError::NotAnInput(_))
        ));
    }
}
