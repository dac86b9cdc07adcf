//! Built-in satisfiability check for linear integer constraints.
//!
//! The procedure normalizes to DNF, eliminates unit-coefficient equalities
//! by substitution, propagates interval bounds per canonical term, and then
//! searches for a model inside an expanding box `[-B, B]` with `B` doubling
//! up to a cap. UNSAT is reported only when every disjunct dies with a
//! propagation contradiction; otherwise the result degrades to UNKNOWN.

use std::collections::{BTreeMap, BTreeSet};

use crate::frontend::CmpOp;

use super::term::{Constraint, LinTerm, Model, SymId};
use super::SatResult;

#[derive(Debug, Clone)]
pub struct InternalLimits {
    pub dnf_cap: usize,
    pub box_start: i64,
    pub box_cap: i64,
    pub node_budget: u64,
    pub propagation_rounds: usize,
}

impl Default for InternalLimits {
    fn default() -> Self {
        InternalLimits {
            dnf_cap: 512,
            box_start: 8,
            box_cap: 1 << 16,
            node_budget: 400_000,
            propagation_rounds: 64,
        }
    }
}

/// Canonical variable part of a linear term: gcd-reduced coefficients with
/// the smallest symbol's coefficient positive.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Key(Vec<(SymId, i64)>);

type Itv = (Option<i64>, Option<i64>);

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn div_floor(a: i128, b: i128) -> i128 {
    a.div_euclid(b)
}

fn div_ceil(a: i128, b: i128) -> i128 {
    -((-a).div_euclid(b))
}

fn to_i64(v: i128) -> Option<i64> {
    i64::try_from(v).ok()
}

/// One atomic fact about the canonical unit term of an atom.
enum Fact {
    AlwaysTrue,
    AlwaysFalse,
    Bounds(Key, Itv),
    NotEqual(Key, i64),
}

/// Normalize `t <op> 0` into a fact over the canonical variable part.
fn atom_fact(op: CmpOp, t: &LinTerm) -> Fact {
    let Some(first_coeff) = t.coeffs.values().next().copied() else {
        return if op.apply(t.constant, 0) { Fact::AlwaysTrue } else { Fact::AlwaysFalse };
    };
    // lin <op'> b, where b = -constant and op' flips if we negate lin.
    let mut lin: Vec<(SymId, i64)> = t.coeffs.iter().map(|(&s, &c)| (s, c)).collect();
    let mut b = -(t.constant as i128);
    let mut op = op;
    if first_coeff < 0 {
        for (_, c) in &mut lin {
            *c = -*c;
        }
        b = -b;
        op = match op {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Ne => CmpOp::Ne,
        };
    }
    let mut g = 0;
    for (_, c) in &lin {
        g = gcd(g, *c);
    }
    debug_assert!(g > 0);
    for (_, c) in &mut lin {
        *c /= g;
    }
    let g = g as i128;
    let key = Key(lin);
    match op {
        CmpOp::Le => match to_i64(div_floor(b, g)) {
            Some(hi) => Fact::Bounds(key, (None, Some(hi))),
            None => {
                if b > 0 {
                    Fact::AlwaysTrue
                } else {
                    Fact::AlwaysFalse
                }
            }
        },
        CmpOp::Lt => match to_i64(div_floor(b - 1, g)) {
            Some(hi) => Fact::Bounds(key, (None, Some(hi))),
            None => {
                if b > 0 {
                    Fact::AlwaysTrue
                } else {
                    Fact::AlwaysFalse
                }
            }
        },
        CmpOp::Ge => match to_i64(div_ceil(b, g)) {
            Some(lo) => Fact::Bounds(key, (Some(lo), None)),
            None => {
                if b < 0 {
                    Fact::AlwaysTrue
                } else {
                    Fact::AlwaysFalse
                }
            }
        },
        CmpOp::Gt => match to_i64(div_floor(b, g).checked_add(1).unwrap_or(i128::MAX)) {
            Some(lo) => Fact::Bounds(key, (Some(lo), None)),
            None => {
                if b < 0 {
                    Fact::AlwaysTrue
                } else {
                    Fact::AlwaysFalse
                }
            }
        },
        CmpOp::Eq => {
            if b.rem_euclid(g) != 0 {
                Fact::AlwaysFalse
            } else {
                match to_i64(b / g) {
                    Some(v) => Fact::Bounds(key, (Some(v), Some(v))),
                    None => Fact::AlwaysFalse,
                }
            }
        }
        CmpOp::Ne => {
            if b.rem_euclid(g) != 0 {
                Fact::AlwaysTrue
            } else {
                match to_i64(b / g) {
                    Some(v) => Fact::NotEqual(key, v),
                    None => Fact::AlwaysTrue,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Domains {
    itv: BTreeMap<Key, Itv>,
    forbidden: BTreeMap<Key, BTreeSet<i64>>,
}

impl Domains {
    /// Returns false on contradiction.
    fn restrict(&mut self, key: &Key, (lo, hi): Itv) -> bool {
        let slot = self.itv.entry(key.clone()).or_insert((None, None));
        if let Some(lo) = lo {
            slot.0 = Some(slot.0.map_or(lo, |old| old.max(lo)));
        }
        if let Some(hi) = hi {
            slot.1 = Some(slot.1.map_or(hi, |old| old.min(hi)));
        }
        let mut cur = *slot;
        if let Some(bad) = self.forbidden.get(key) {
            loop {
                match cur {
                    (Some(l), _) if bad.contains(&l) => cur.0 = Some(l + 1),
                    (_, Some(h)) if matches!(cur.0, Some(l) if l <= h) && bad.contains(&h) => {
                        cur.1 = Some(h - 1)
                    }
                    _ => break,
                }
                if matches!(cur, (Some(l), Some(h)) if l > h) {
                    break;
                }
            }
            *self.itv.get_mut(key).unwrap() = cur;
        }
        !matches!(cur, (Some(l), Some(h)) if l > h)
    }

    fn forbid(&mut self, key: &Key, v: i64) -> bool {
        self.forbidden.entry(key.clone()).or_default().insert(v);
        self.restrict(key, (None, None))
    }

    fn sym_box(&self, s: SymId) -> Itv {
        self.itv.get(&Key(vec![(s, 1)])).copied().unwrap_or((None, None))
    }

    fn singleton(&self, s: SymId) -> Option<i64> {
        match self.sym_box(s) {
            (Some(l), Some(h)) if l == h => Some(l),
            _ => None,
        }
    }
}

fn add_itv(a: (i128, i128), b: (i128, i128)) -> (i128, i128) {
    (a.0 + b.0, a.1 + b.1)
}

const INF: i128 = i128::MAX / 4;

fn sym_itv_i128(d: &Domains, s: SymId) -> (i128, i128) {
    let (lo, hi) = d.sym_box(s);
    (lo.map_or(-INF, |v| v as i128), hi.map_or(INF, |v| v as i128))
}

fn scale_itv((lo, hi): (i128, i128), c: i64) -> (i128, i128) {
    let c = c as i128;
    if c >= 0 {
        (lo.saturating_mul(c), hi.saturating_mul(c))
    } else {
        (hi.saturating_mul(c), lo.saturating_mul(c))
    }
}

fn clamp_itv((lo, hi): (i128, i128)) -> Itv {
    let lo = if lo <= -INF / 2 { None } else { to_i64(lo) };
    let hi = if hi >= INF / 2 { None } else { to_i64(hi) };
    (lo, hi)
}

/// One propagation pass over all keys; returns false on contradiction.
fn propagate(d: &mut Domains, rounds: usize) -> bool {
    for _ in 0..rounds {
        let mut changed = false;
        let keys: Vec<Key> = d.itv.keys().cloned().collect();
        for key in keys {
            if key.0.len() < 2 {
                continue;
            }
            // term bounds from symbol boxes
            let mut total = (0i128, 0i128);
            for &(s, c) in &key.0 {
                total = add_itv(total, scale_itv(sym_itv_i128(d, s), c));
            }
            let before = d.itv.get(&key).copied().unwrap();
            if !d.restrict(&key, clamp_itv(total)) {
                return false;
            }
            if d.itv.get(&key).copied().unwrap() != before {
                changed = true;
            }
            // refine each symbol from the term bound
            let (tlo, thi) = {
                let (l, h) = d.itv.get(&key).copied().unwrap();
                (l.map_or(-INF, |v| v as i128), h.map_or(INF, |v| v as i128))
            };
            for &(s, c) in &key.0 {
                let mut rest = (0i128, 0i128);
                for &(s2, c2) in &key.0 {
                    if s2 != s {
                        rest = add_itv(rest, scale_itv(sym_itv_i128(d, s2), c2));
                    }
                }
                // c*s in [tlo - rest.1, thi - rest.0]
                let lo_c = tlo.saturating_sub(rest.1);
                let hi_c = thi.saturating_sub(rest.0);
                let (slo, shi) = if c > 0 {
                    (div_ceil(lo_c, c as i128), div_floor(hi_c, c as i128))
                } else {
                    (div_ceil(hi_c, c as i128), div_floor(lo_c, c as i128))
                };
                let skey = Key(vec![(s, 1)]);
                let before = d.itv.get(&skey).copied().unwrap_or((None, None));
                if !d.restrict(&skey, clamp_itv((slo, shi))) {
                    return false;
                }
                if d.itv.get(&skey).copied().unwrap() != before {
                    changed = true;
                }
            }
        }
        if !changed {
            return true;
        }
    }
    true
}

enum DisjunctOutcome {
    Sat(Model),
    ProvedUnsat,
    Exhausted,
}

struct Search<'a> {
    budget: &'a mut u64,
    limits: &'a InternalLimits,
}

impl Search<'_> {
    /// Depth-first model search over `syms` within `[-bound, bound]`.
    fn dive(
        &mut self,
        atoms: &[(CmpOp, LinTerm)],
        d: &Domains,
        syms: &[SymId],
        bound: i64,
        model: &mut Model,
    ) -> Option<Model> {
        let next = syms
            .iter()
            .find(|s| !model.contains_key(s) && d.singleton(**s).is_none())
            .copied();
        // collect forced values first
        let mut full = model.clone();
        for s in syms {
            if let Some(v) = d.singleton(*s) {
                full.entry(*s).or_insert(v);
            }
        }
        let Some(var) = next else {
            if syms.iter().all(|s| full.contains_key(s)) {
                let ok = atoms.iter().all(|(op, t)| {
                    t.eval(&full).map(|v| op.apply(v, 0)).unwrap_or(false)
                });
                if ok {
                    return Some(full);
                }
            }
            return None;
        };
        let (lo, hi) = d.sym_box(var);
        let lo = lo.map_or(-bound, |v| v.max(-bound));
        let hi = hi.map_or(bound, |v| v.min(bound));
        if lo > hi {
            return None;
        }
        let skey = Key(vec![(var, 1)]);
        let empty = BTreeSet::new();
        let bad = d.forbidden.get(&skey).unwrap_or(&empty);
        for v in ByMagnitude::new(lo, hi) {
            if bad.contains(&v) {
                continue;
            }
            if *self.budget == 0 {
                return None;
            }
            *self.budget -= 1;
            let mut d2 = d.clone();
            if !d2.restrict(&skey, (Some(v), Some(v))) {
                continue;
            }
            if !propagate(&mut d2, self.limits.propagation_rounds) {
                continue;
            }
            model.insert(var, v);
            if let Some(m) = self.dive(atoms, &d2, syms, bound, model) {
                return Some(m);
            }
            model.remove(&var);
        }
        None
    }
}

/// Yields lo..=hi ordered by absolute value, positives first on ties.
struct ByMagnitude {
    lo: i64,
    hi: i64,
    next: Option<i64>,
}

impl ByMagnitude {
    fn new(lo: i64, hi: i64) -> Self {
        let first = if lo <= 0 && 0 <= hi {
            Some(0)
        } else if lo > 0 {
            Some(lo)
        } else {
            Some(hi)
        };
        ByMagnitude { lo, hi, next: first }
    }
}

impl Iterator for ByMagnitude {
    type Item = i64;

    fn next(&mut self) -> Option<i64> {
        let cur = self.next?;
        // successor in by-magnitude order within [lo, hi]
        let mut cand = if cur > 0 { -cur } else { -cur + 1 };
        loop {
            if cand.abs() > self.hi.abs().max(self.lo.abs()) {
                self.next = None;
                break;
            }
            if cand >= self.lo && cand <= self.hi {
                self.next = Some(cand);
                break;
            }
            cand = if cand > 0 { -cand } else { -cand + 1 };
        }
        Some(cur)
    }
}

fn decide_disjunct(
    atoms: &[(CmpOp, LinTerm)],
    limits: &InternalLimits,
    budget: &mut u64,
) -> DisjunctOutcome {
    // Unit-coefficient equality elimination.
    let mut atoms: Vec<(CmpOp, LinTerm)> = atoms.to_vec();
    let mut defs: Vec<(SymId, LinTerm)> = Vec::new();
    loop {
        let mut pick: Option<(usize, SymId, i64)> = None;
        for (i, (op, t)) in atoms.iter().enumerate() {
            if *op != CmpOp::Eq {
                continue;
            }
            if let Some((&s, &c)) = t.coeffs.iter().find(|(_, &c)| c == 1 || c == -1) {
                pick = Some((i, s, c));
                break;
            }
        }
        let Some((i, s, c)) = pick else { break };
        let (_, t) = atoms.remove(i);
        // c*s + rest = 0  =>  s = -rest/c with c=±1
        let mut rest = t.clone();
        rest.coeffs.remove(&s);
        let def = rest.scale(-c);
        for (_, a) in &mut atoms {
            *a = a.subst(s, &def);
        }
        for (_, d) in &mut defs {
            *d = d.subst(s, &def);
        }
        defs.push((s, def));
    }

    // Constant folding and fact extraction.
    let mut d = Domains::default();
    let mut live: Vec<(CmpOp, LinTerm)> = Vec::new();
    for (op, t) in &atoms {
        match atom_fact(*op, t) {
            Fact::AlwaysTrue => {}
            Fact::AlwaysFalse => return DisjunctOutcome::ProvedUnsat,
            Fact::Bounds(key, itv) => {
                if !d.restrict(&key, itv) {
                    return DisjunctOutcome::ProvedUnsat;
                }
                live.push((*op, t.clone()));
            }
            Fact::NotEqual(key, v) => {
                if !d.forbid(&key, v) {
                    return DisjunctOutcome::ProvedUnsat;
                }
                live.push((*op, t.clone()));
            }
        }
    }
    if !propagate(&mut d, limits.propagation_rounds) {
        return DisjunctOutcome::ProvedUnsat;
    }

    let mut syms: BTreeSet<SymId> = BTreeSet::new();
    for (_, t) in &live {
        t.symbols(&mut syms);
    }
    let syms: Vec<SymId> = syms.into_iter().collect();

    let mut bound = limits.box_start;
    loop {
        let mut search = Search { budget, limits };
        let mut model = Model::new();
        if let Some(mut m) = search.dive(&live, &d, &syms, bound, &mut model) {
            // Recover eliminated symbols in reverse elimination order.
            for (s, def) in defs.iter().rev() {
                let v = def.eval(&m).expect("definition closed under model");
                m.insert(*s, v);
            }
            return DisjunctOutcome::Sat(m);
        }
        if *budget == 0 || bound >= limits.box_cap {
            return DisjunctOutcome::Exhausted;
        }
        bound = (bound * 2).min(limits.box_cap);
    }
}

pub fn check_sat_internal(c: &Constraint, limits: &InternalLimits) -> SatResult {
    let Some(disjuncts) = c.dnf(limits.dnf_cap) else {
        return SatResult::Unknown("constraint too large for DNF expansion".into());
    };
    if disjuncts.is_empty() {
        return SatResult::Unsat;
    }
    let mut budget = limits.node_budget;
    let mut all_refuted = true;
    for atoms in &disjuncts {
        match decide_disjunct(atoms, limits, &mut budget) {
            DisjunctOutcome::Sat(mut model) => {
                // Complete with every symbol of the original constraint.
                let mut syms = BTreeSet::new();
                c.symbols(&mut syms);
                for s in syms {
                    model.entry(s).or_insert(0);
                }
                debug_assert_eq!(c.eval(&model), Some(true), "internal model must satisfy input");
                if c.eval(&model) != Some(true) {
                    return SatResult::Unknown("internal model failed verification".into());
                }
                return SatResult::Sat(model);
            }
            DisjunctOutcome::ProvedUnsat => {}
            DisjunctOutcome::Exhausted => all_refuted = false,
        }
    }
    if all_refuted {
        SatResult::Unsat
    } else {
        SatResult::Unknown("no model within search box and no contradiction proof".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::term::SymbolTable;

    fn check(c: &Constraint) -> SatResult {
        check_sat_internal(c, &InternalLimits::default())
    }

    #[test]
    fn loop_bound_formula_pins_unique_model() {
        // x>=0 && 0<x && 1<x && 2<x && !(3<x)  =>  x = 3
        let mut tab = SymbolTable::new();
        let x = LinTerm::symbol(tab.intern("x@0"));
        let c = Constraint::and(vec![
            Constraint::cmp(CmpOp::Ge, &x, &LinTerm::constant(0)),
            Constraint::cmp(CmpOp::Lt, &LinTerm::constant(0), &x),
            Constraint::cmp(CmpOp::Lt, &LinTerm::constant(1), &x),
            Constraint::cmp(CmpOp::Lt, &LinTerm::constant(2), &x),
            Constraint::cmp(CmpOp::Lt, &LinTerm::constant(3), &x).negated(),
        ]);
        let SatResult::Sat(m) = check(&c) else { panic!("expected sat") };
        assert_eq!(m.values().copied().collect::<Vec<_>>(), vec![3]);
    }

    #[test]
    fn opposite_strict_bounds_are_unsat() {
        let mut tab = SymbolTable::new();
        let x = LinTerm::symbol(tab.intern("x"));
        let c = Constraint::and(vec![
            Constraint::cmp(CmpOp::Lt, &x, &LinTerm::constant(0)),
            Constraint::cmp(CmpOp::Gt, &x, &LinTerm::constant(0)),
        ]);
        assert!(matches!(check(&c), SatResult::Unsat));
    }

    #[test]
    fn true_is_sat_with_empty_model() {
        let SatResult::Sat(m) = check(&Constraint::True) else { panic!() };
        assert!(m.is_empty());
    }

    #[test]
    fn equality_chains_are_resolved_by_substitution() {
        // a1 = a0 + 1, b1 = b0 + 1, a0 = b0, a1 != b1  => unsat
        let mut tab = SymbolTable::new();
        let a0 = LinTerm::symbol(tab.intern("a@0"));
        let a1 = LinTerm::symbol(tab.intern("a@1"));
        let b0 = LinTerm::symbol(tab.intern("b@0"));
        let b1 = LinTerm::symbol(tab.intern("b@1"));
        let one = LinTerm::constant(1);
        let c = Constraint::and(vec![
            Constraint::cmp(CmpOp::Eq, &a1, &a0.add(&one)),
            Constraint::cmp(CmpOp::Eq, &b1, &b0.add(&one)),
            Constraint::cmp(CmpOp::Eq, &a0, &b0),
            Constraint::cmp(CmpOp::Ne, &a1, &b1),
        ]);
        assert!(matches!(check(&c), SatResult::Unsat));
    }

    #[test]
    fn divisibility_contradictions_are_proved() {
        let mut tab = SymbolTable::new();
        let x = LinTerm::symbol(tab.intern("x"));
        // 2x = 7
        let c = Constraint::cmp(CmpOp::Eq, &x.scale(2), &LinTerm::constant(7));
        assert!(matches!(check(&c), SatResult::Unsat));
    }

    #[test]
    fn disjunction_explores_both_sides() {
        let mut tab = SymbolTable::new();
        let x = LinTerm::symbol(tab.intern("x"));
        let c = Constraint::or(vec![
            Constraint::and(vec![
                Constraint::cmp(CmpOp::Lt, &x, &LinTerm::constant(0)),
                Constraint::cmp(CmpOp::Gt, &x, &LinTerm::constant(0)),
            ]),
            Constraint::cmp(CmpOp::Eq, &x, &LinTerm::constant(41)),
        ]);
        let SatResult::Sat(m) = check(&c) else { panic!("expected sat") };
        assert_eq!(m.values().copied().next(), Some(41));
    }

    #[test]
    fn model_search_prefers_smallest_magnitude() {
        let mut tab = SymbolTable::new();
        let x = LinTerm::symbol(tab.intern("x"));
        let c = Constraint::cmp(CmpOp::Ge, &x, &LinTerm::constant(-5));
        let SatResult::Sat(m) = check(&c) else { panic!() };
        assert_eq!(m.values().copied().next(), Some(0));
    }

    #[test]
    fn large_forced_values_exceed_search_box() {
        let mut tab = SymbolTable::new();
        let x = LinTerm::symbol(tab.intern("x"));
        // propagation pins x = 100000 without any search
        let c = Constraint::cmp(CmpOp::Eq, &x, &LinTerm::constant(100_000));
        let SatResult::Sat(m) = check(&c) else { panic!() };
        assert_eq!(m.values().copied().next(), Some(100_000));
    }

    #[test]
    fn by_magnitude_order_is_stable() {
        let vals: Vec<i64> = ByMagnitude::new(-2, 3).collect();
        assert_eq!(vals, vec![0, 1, -1, 2, -2, 3]);
        let vals: Vec<i64> = ByMagnitude::new(2, 4).collect();
        assert_eq!(vals, vec![2, 3, 4]);
        let vals: Vec<i64> = ByMagnitude::new(-4, -2).collect();
        assert_eq!(vals, vec![-2, -3, -4]);
    }
}
