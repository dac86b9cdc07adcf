//! Range reduction: bound CPAs that restrict any analysis to the paths of a
//! range, realized by tracking the bound test case with value-analysis
//! machinery.
//!
//! A tracking state follows the bound path. When the bound provably takes
//! the other branch of a condition, the side that stays in range is released
//! to top (every extension remains in range) and the side that leaves the
//! range produces no successor. Conditions a partial test case leaves open
//! are resolved towards the true branch, which realizes the minimum of the
//! induced path set; resolution consults the configured input domain so that
//! the tracked path matches the bounded-domain minimum used by the oracle.

use crate::domains::interval::eval_bool_itv;
use crate::domains::value::ValueState;
use crate::frontend::{BoolExpr, Cfa, EdgeOp, Indicator};
use crate::semantics::{InputDomain, SemanticsError, TestCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    /// Tracks the lower bound of `[tau, top]`.
    Lower,
    /// Tracks the upper bound of `[bottom, tau]`.
    Upper,
}

/// Bound-tracking state. `Released` is the top sentinel: the current path is
/// strictly inside the range on this side, so all extensions stay in range.
/// Exclusion is expressed by producing no successor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BoundState {
    Tracking(ValueState),
    Released,
}

#[derive(Debug, Clone)]
pub struct BoundCpa {
    pub role: Role,
    pub test_case: TestCase,
    pub input_domain: InputDomain,
}

/// Initial tracking state: the test case's assignments, top elsewhere.
pub fn init_bound(
    cfa: &Cfa,
    tc: &TestCase,
    role: Role,
    input_domain: InputDomain,
) -> Result<(BoundCpa, BoundState), SemanticsError> {
    tc.validate(cfa)?;
    let state = BoundState::Tracking(ValueState(tc.0.clone()));
    Ok((BoundCpa { role, test_case: tc.clone(), input_domain }, state))
}

impl BoundCpa {
    /// Resolve a condition the tracked values leave open by bounding the
    /// unassigned inputs with the input domain.
    fn domain_resolve(&self, cond: &BoolExpr, v: &ValueState, cfa: &Cfa) -> Option<bool> {
        let InputDomain::Bounded { lo, hi } = self.input_domain else {
            return None;
        };
        let env = |name: &str| -> (Option<i64>, Option<i64>) {
            match v.get(name) {
                Some(c) => (Some(c), Some(c)),
                None if cfa.is_input(name) => (Some(lo), Some(hi)),
                None => (None, None),
            }
        };
        eval_bool_itv(cond, &env)
    }

    pub fn transfer(&self, s: &BoundState, cfa: &Cfa, edge_index: usize) -> Vec<BoundState> {
        let edge = cfa.edge(edge_index);
        let BoundState::Tracking(v) = s else {
            return vec![BoundState::Released];
        };
        match &edge.op {
            EdgeOp::Assume { cond } => {
                let decided = v.eval_bool(cond).or_else(|| self.domain_resolve(cond, v, cfa));
                match decided {
                    // The bound path takes this very edge.
                    Some(true) => vec![BoundState::Tracking(v.clone())],
                    // The bound path takes the partner edge.
                    Some(false) => match (self.role, edge.indicator) {
                        // Bound goes false; paths through the true branch
                        // are smaller.
                        (Role::Lower, Indicator::True) => vec![],
                        (Role::Upper, Indicator::True) => vec![BoundState::Released],
                        // Bound goes true; paths through the false branch
                        // are greater.
                        (Role::Lower, Indicator::False) => vec![BoundState::Released],
                        (Role::Upper, Indicator::False) => vec![],
                        _ => vec![],
                    },
                    // Undetermined: the bound is the minimum of its induced
                    // path set and follows the true branch.
                    None => match edge.indicator {
                        Indicator::True => vec![BoundState::Tracking(v.clone())],
                        Indicator::False => match self.role {
                            Role::Lower => vec![BoundState::Released],
                            Role::Upper => vec![],
                        },
                        Indicator::None => vec![BoundState::Tracking(v.clone())],
                    },
                }
            }
            op => match v.transfer(op) {
                Some(next) => vec![BoundState::Tracking(next)],
                None => vec![],
            },
        }
    }
}

/// Compose an analysis with the bound CPAs for a range given by optional
/// lower and upper test cases. Absent bounds become pass-through components,
/// so the composite always has the shape `lower x upper x analysis`.
pub fn make_ranged(
    analysis: crate::cpa::CpaDefinition,
    lower: Option<&TestCase>,
    upper: Option<&TestCase>,
    input_domain: InputDomain,
) -> Result<crate::cpa::CpaDefinition, crate::cpa::CpaError> {
    use crate::cpa::CpaDefinition;
    let lower_cpa = match lower {
        Some(tc) => CpaDefinition::Bound(BoundCpa {
            role: Role::Lower,
            test_case: tc.clone(),
            input_domain,
        }),
        None => CpaDefinition::Unit,
    };
    let upper_cpa = match upper {
        Some(tc) => CpaDefinition::Bound(BoundCpa {
            role: Role::Upper,
            test_case: tc.clone(),
            input_domain,
        }),
        None => CpaDefinition::Unit,
    };
    crate::cpa::compose(vec![lower_cpa, upper_cpa, analysis])
}

/// Maximal paths explored by a finished run: edge traces of reached-set
/// leaves sitting at sink locations, sorted by the path order.
pub fn explored_maximal_paths(
    reached: &crate::cpa::ReachedSet,
    cfa: &Cfa,
) -> Vec<crate::semantics::Path> {
    use crate::semantics::{sort_paths, DataState, Path};
    let mut out: Vec<Path> = Vec::new();
    for n in reached.nodes.iter().filter(|n| n.active) {
        if !cfa.is_sink(n.loc) {
            continue;
        }
        let edges = reached.path_edges(n.id);
        if !out.iter().any(|p| p.edges == edges) {
            out.push(Path {
                edges,
                states: vec![DataState(vec![0; cfa.vars.len()])],
                maximal: true,
            });
        }
    }
    sort_paths(&mut out, cfa);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{build_cfa, parse};

    const RUNNING_EXAMPLE: &str = "decl x, a, b; input x; a = 0; b = 0; \
        if (x >= 0) { while (a < x) { a = a + 1; b = b + 1; } } else { a = 10; b = 10; } \
        assert(a == b);";

    fn tracking(pairs: &[(&str, i64)]) -> BoundState {
        BoundState::Tracking(ValueState(
            pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        ))
    }

    #[test]
    fn init_keeps_test_case_and_tops_the_rest() {
        let cfa = build_cfa(&parse(RUNNING_EXAMPLE).unwrap());
        let tc = TestCase::new().assign("x", 0);
        let (_, st) = init_bound(&cfa, &tc, Role::Upper, InputDomain::DEFAULT).unwrap();
        let BoundState::Tracking(v) = &st else { panic!() };
        assert_eq!(v.get("x"), Some(0));
        assert_eq!(v.get("a"), None);
        assert_eq!(v.get("b"), None);

        let empty = init_bound(&cfa, &TestCase::new(), Role::Lower, InputDomain::DEFAULT).unwrap();
        let BoundState::Tracking(v) = &empty.1 else { panic!() };
        assert!(v.0.is_empty());

        let err = init_bound(
            &cfa,
            &TestCase::new().assign("a", 1),
            Role::Lower,
            InputDomain::DEFAULT,
        );
        assert!(matches!(err, Err(SemanticsError::NotAnInput(_))));
    }

    #[test]
    fn lower_bound_releases_on_false_branch_when_bound_goes_true() {
        let cfa = build_cfa(&parse(RUNNING_EXAMPLE).unwrap());
        let head = *cfa.loop_heads.iter().next().unwrap();
        let (t, f) = cfa.assume_pair(head).unwrap();
        let cpa = BoundCpa {
            role: Role::Lower,
            test_case: TestCase::new().assign("x", 2),
            input_domain: InputDomain::DEFAULT,
        };
        // a < x holds under {x: 2, a: 0}: the bound enters the loop
        let st = tracking(&[("x", 2), ("a", 0), ("b", 0)]);
        assert_eq!(cpa.transfer(&st, &cfa, f), vec![BoundState::Released]);
        assert_eq!(cpa.transfer(&st, &cfa, t), vec![st.clone()]);
        // a < x fails under {x: 2, a: 2}: deeper unrollings leave the range
        let st = tracking(&[("x", 2), ("a", 2), ("b", 2)]);
        assert_eq!(cpa.transfer(&st, &cfa, t), vec![]);
        let exited = cpa.transfer(&st, &cfa, f);
        assert_eq!(exited, vec![st.clone()]);
    }

    #[test]
    fn upper_bound_releases_on_true_branch_when_bound_goes_false() {
        let cfa = build_cfa(&parse(RUNNING_EXAMPLE).unwrap());
        let head = *cfa.loop_heads.iter().next().unwrap();
        let (t, f) = cfa.assume_pair(head).unwrap();
        let cpa = BoundCpa {
            role: Role::Upper,
            test_case: TestCase::new().assign("x", 0),
            input_domain: InputDomain::DEFAULT,
        };
        // a < x fails under {x: 0, a: 0}: the loop subtree stays in range
        let st = tracking(&[("x", 0), ("a", 0), ("b", 0)]);
        assert_eq!(cpa.transfer(&st, &cfa, t), vec![BoundState::Released]);
        assert_eq!(cpa.transfer(&st, &cfa, f), vec![st.clone()]);
    }

    #[test]
    fn released_states_stay_released() {
        let cfa = build_cfa(&parse(RUNNING_EXAMPLE).unwrap());
        for role in [Role::Lower, Role::Upper] {
            let cpa = BoundCpa {
                role,
                test_case: TestCase::new(),
                input_domain: InputDomain::DEFAULT,
            };
            for e in 0..cfa.edges.len() {
                assert_eq!(
                    cpa.transfer(&BoundState::Released, &cfa, e),
                    vec![BoundState::Released]
                );
            }
        }
    }

    #[test]
    fn undetermined_conditions_follow_the_true_branch() {
        let cfa = build_cfa(&parse(RUNNING_EXAMPLE).unwrap());
        // x unassigned: x >= 0 is open under the default domain [-8, 8]
        let branch = cfa
            .locations()
            .find(|&l| match cfa.assume_pair(l) {
                Some((_, f)) => {
                    !cfa.loop_heads.contains(&l) && !cfa.is_error(cfa.edge(f).target)
                }
                None => false,
            })
            .unwrap();
        let (t, f) = cfa.assume_pair(branch).unwrap();
        let st = tracking(&[("a", 0), ("b", 0)]);
        let lower = BoundCpa {
            role: Role::Lower,
            test_case: TestCase::new(),
            input_domain: InputDomain::DEFAULT,
        };
        let upper = BoundCpa {
            role: Role::Upper,
            test_case: TestCase::new(),
            input_domain: InputDomain::DEFAULT,
        };
        assert_eq!(lower.transfer(&st, &cfa, t), vec![st.clone()]);
        assert_eq!(lower.transfer(&st, &cfa, f), vec![BoundState::Released]);
        assert_eq!(upper.transfer(&st, &cfa, t), vec![st.clone()]);
        assert_eq!(upper.transfer(&st, &cfa, f), vec![]);
    }

    #[test]
    fn ranged_value_analysis_explores_exactly_the_in_range_paths() {
        use crate::cpa::{run_cpa, Budget, CancelToken, CpaDefinition, Verdict};
        use crate::domains::value::ValueCpa;
        use crate::semantics::{
            enumerate_paths, in_range, induced_min_path, PathBound, PathRange,
        };
        use crate::solver::SolverHandle;

        let cfa = build_cfa(&parse(RUNNING_EXAMPLE).unwrap());
        let domain = InputDomain::DEFAULT;
        let all = enumerate_paths(&cfa, domain, 10_000).unwrap();
        let tau = TestCase::new().assign("x", 0);
        let pivot = induced_min_path(&cfa, &tau, domain, 10_000).unwrap();

        for (lower, upper) in [(None, Some(&tau)), (Some(&tau), None)] {
            let analysis = CpaDefinition::Value(ValueCpa { input_domain: domain });
            let ranged = make_ranged(analysis, lower, upper, domain).unwrap();
            let out = run_cpa(
                &cfa,
                &ranged,
                &Budget::default(),
                &CancelToken::new(),
                SolverHandle::internal(),
            );
            assert_eq!(out.verdict, Verdict::True);
            let explored = explored_maximal_paths(&out.reached, &cfa);
            let range = PathRange {
                lower: lower
                    .map(|_| PathBound::Concrete(pivot.clone()))
                    .unwrap_or(PathBound::Bottom),
                upper: upper
                    .map(|_| PathBound::Concrete(pivot.clone()))
                    .unwrap_or(PathBound::Top),
            };
            let expected: Vec<_> =
                all.iter().filter(|p| in_range(p, &range, &cfa)).cloned().collect();
            assert_eq!(explored, expected);
        }
    }

    #[test]
    fn full_range_composition_matches_the_plain_analysis() {
        use crate::cpa::{run_cpa, Budget, CancelToken, CpaDefinition};
        use crate::domains::value::ValueCpa;
        use crate::solver::SolverHandle;

        let cfa = build_cfa(&parse(RUNNING_EXAMPLE).unwrap());
        let domain = InputDomain::Bounded { lo: -2, hi: 2 };
        let plain = CpaDefinition::Value(ValueCpa { input_domain: domain });
        let ranged = make_ranged(plain.clone(), None, None, domain).unwrap();
        let a = run_cpa(&cfa, &plain, &Budget::default(), &CancelToken::new(), SolverHandle::internal());
        let b = run_cpa(&cfa, &ranged, &Budget::default(), &CancelToken::new(), SolverHandle::internal());
        assert_eq!(a.verdict, b.verdict);
        assert_eq!(a.reached.locations(), b.reached.locations());
        assert_eq!(
            explored_maximal_paths(&a.reached, &cfa),
            explored_maximal_paths(&b.reached, &cfa)
        );
    }

    #[test]
    fn domain_resolution_decides_out_of_domain_branches() {
        // x > 20 is definitely false when inputs live in [-8, 8]
        let cfa = build_cfa(&parse(
            "decl x, y; input x; if (x > 20) { y = 1; } else { y = 2; } assert(y > 0);",
        )
        .unwrap());
        let branch = cfa.initial;
        let (t, f) = cfa.assume_pair(branch).unwrap();
        let st = tracking(&[]);
        let lower = BoundCpa {
            role: Role::Lower,
            test_case: TestCase::new(),
            input_domain: InputDomain::DEFAULT,
        };
        // bound goes false: true branch leaves the lower range
        assert_eq!(lower.transfer(&st, &cfa, t), vec![]);
        assert_eq!(lower.transfer(&st, &cfa, f), vec![st.clone()]);
    }
}
