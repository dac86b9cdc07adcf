//! Interval analysis with a small relational extension: differences between
//! variable pairs (`a - b = d`) are tracked exactly, which keeps lockstep
//! equalities through loops. Loop-head merges join with threshold widening
//! after a fixed delay.

use std::collections::BTreeMap;

use crate::frontend::{BoolExpr, Cfa, CmpOp, EdgeOp, IntExpr};

/// Closed interval; `None` is unbounded on that side.
pub type Itv = (Option<i64>, Option<i64>);

const INF: i128 = i128::MAX / 4;

fn lo_i128(i: Itv) -> i128 {
    i.0.map_or(-INF, |v| v as i128)
}

fn hi_i128(i: Itv) -> i128 {
    i.1.map_or(INF, |v| v as i128)
}

fn from_i128(lo: i128, hi: i128) -> Itv {
    let l = if lo <= -INF / 2 { None } else { i64::try_from(lo).ok() };
    let h = if hi >= INF / 2 { None } else { i64::try_from(hi).ok() };
    (l, h)
}

fn is_full(i: Itv) -> bool {
    i == (None, None)
}

fn is_empty(lo: i128, hi: i128) -> bool {
    lo > hi
}

fn div_floor(a: i128, b: i128) -> i128 {
    a.div_euclid(b)
}

fn div_ceil(a: i128, b: i128) -> i128 {
    -((-a).div_euclid(b))
}

/// Plain interval evaluation of an integer expression.
pub fn eval_int_itv(e: &IntExpr, env: &impl Fn(&str) -> Itv) -> (i128, i128) {
    match e {
        IntExpr::Const(c) => (*c as i128, *c as i128),
        IntExpr::Var(v) => {
            let i = env(v);
            (lo_i128(i), hi_i128(i))
        }
        IntExpr::Neg(i) => {
            let (l, h) = eval_int_itv(i, env);
            (-h, -l)
        }
        IntExpr::Add(a, b) => {
            let (al, ah) = eval_int_itv(a, env);
            let (bl, bh) = eval_int_itv(b, env);
            (al.saturating_add(bl), ah.saturating_add(bh))
        }
        IntExpr::Sub(a, b) => {
            let (al, ah) = eval_int_itv(a, env);
            let (bl, bh) = eval_int_itv(b, env);
            (al.saturating_sub(bh), ah.saturating_sub(bl))
        }
        IntExpr::Mul(a, b) => {
            let (al, ah) = eval_int_itv(a, env);
            let (bl, bh) = eval_int_itv(b, env);
            let products = [
                al.saturating_mul(bl),
                al.saturating_mul(bh),
                ah.saturating_mul(bl),
                ah.saturating_mul(bh),
            ];
            (*products.iter().min().unwrap(), *products.iter().max().unwrap())
        }
    }
}

fn cmp_over(op: CmpOp, (l, h): (i128, i128)) -> Option<bool> {
    // compare the interval of a difference against zero
    match op {
        CmpOp::Eq => {
            if l == 0 && h == 0 {
                Some(true)
            } else if h < 0 || l > 0 {
                Some(false)
            } else {
                None
            }
        }
        CmpOp::Ne => cmp_over(CmpOp::Eq, (l, h)).map(|b| !b),
        CmpOp::Lt => {
            if h < 0 {
                Some(true)
            } else if l >= 0 {
                Some(false)
            } else {
                None
            }
        }
        CmpOp::Le => {
            if h <= 0 {
                Some(true)
            } else if l > 0 {
                Some(false)
            } else {
                None
            }
        }
        CmpOp::Gt => cmp_over(CmpOp::Le, (l, h)).map(|b| !b),
        CmpOp::Ge => cmp_over(CmpOp::Lt, (l, h)).map(|b| !b),
    }
}

/// Three-valued condition evaluation over a box.
pub fn eval_bool_itv(e: &BoolExpr, env: &impl Fn(&str) -> Itv) -> Option<bool> {
    match e {
        BoolExpr::Lit(b) => Some(*b),
        BoolExpr::Cmp(op, a, b) => {
            let (al, ah) = eval_int_itv(a, env);
            let (bl, bh) = eval_int_itv(b, env);
            cmp_over(*op, (al.saturating_sub(bh), ah.saturating_sub(bl)))
        }
        BoolExpr::Not(i) => eval_bool_itv(i, env).map(|b| !b),
        BoolExpr::And(a, b) => match (eval_bool_itv(a, env), eval_bool_itv(b, env)) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        },
        BoolExpr::Or(a, b) => match (eval_bool_itv(a, env), eval_bool_itv(b, env)) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        },
    }
}

/// Linear view of an expression: coefficients per variable plus a constant.
fn linearize(e: &IntExpr, coeffs: &mut BTreeMap<String, i64>, k: &mut i64, scale: i64) {
    match e {
        IntExpr::Const(c) => *k += c * scale,
        IntExpr::Var(v) => *coeffs.entry(v.clone()).or_insert(0) += scale,
        IntExpr::Neg(i) => linearize(i, coeffs, k, -scale),
        IntExpr::Add(a, b) => {
            linearize(a, coeffs, k, scale);
            linearize(b, coeffs, k, scale);
        }
        IntExpr::Sub(a, b) => {
            linearize(a, coeffs, k, scale);
            linearize(b, coeffs, k, -scale);
        }
        IntExpr::Mul(a, b) => {
            if let Some(c) = const_of(a) {
                linearize(b, coeffs, k, scale * c);
            } else if let Some(c) = const_of(b) {
                linearize(a, coeffs, k, scale * c);
            } else {
                unreachable!("frontend rejects nonlinear expressions");
            }
        }
    }
}

fn const_of(e: &IntExpr) -> Option<i64> {
    match e {
        IntExpr::Const(c) => Some(*c),
        IntExpr::Neg(i) => const_of(i).map(|c| -c),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct IntervalState {
    /// Tracked bounds; absent variables are unbounded.
    pub bounds: BTreeMap<String, Itv>,
    /// Exact differences: key `(a, b)` with `a < b` lexicographically means
    /// `a - b = value`.
    pub deltas: BTreeMap<(String, String), i64>,
    /// Number of loop-head joins that produced this state.
    pub join_count: u8,
}

impl IntervalState {
    pub fn var_itv(&self, v: &str) -> Itv {
        self.bounds.get(v).copied().unwrap_or((None, None))
    }

    fn set_itv(&mut self, v: &str, itv: Itv) {
        if is_full(itv) {
            self.bounds.remove(v);
        } else {
            self.bounds.insert(v.to_string(), itv);
        }
    }

    pub fn delta(&self, a: &str, b: &str) -> Option<i64> {
        if a == b {
            return Some(0);
        }
        if a < b {
            self.deltas.get(&(a.to_string(), b.to_string())).copied()
        } else {
            self.deltas.get(&(b.to_string(), a.to_string())).map(|d| -d)
        }
    }

    fn set_delta(&mut self, a: &str, b: &str, d: i64) {
        if a == b {
            return;
        }
        if a < b {
            self.deltas.insert((a.to_string(), b.to_string()), d);
        } else {
            self.deltas.insert((b.to_string(), a.to_string()), -d);
        }
    }

    fn drop_deltas_of(&mut self, v: &str) {
        self.deltas.retain(|(a, b), _| a != v && b != v);
    }

    /// Interval of a linear form, using exact differences where a +c/-c
    /// coefficient pair has a known delta.
    fn linear_itv(&self, coeffs: &BTreeMap<String, i64>, k: i64) -> (i128, i128) {
        let mut remaining: BTreeMap<&str, i64> =
            coeffs.iter().filter(|(_, &c)| c != 0).map(|(v, &c)| (v.as_str(), c)).collect();
        let mut base = k as i128;
        // cancel matched pairs through known differences
        loop {
            let mut cancelled = None;
            'outer: for (&a, &ca) in &remaining {
                for (&b, &cb) in &remaining {
                    if a < b && ca == -cb {
                        if let Some(d) = self.delta(a, b) {
                            base += ca as i128 * d as i128;
                            cancelled = Some((a.to_string(), b.to_string()));
                            break 'outer;
                        }
                    }
                }
            }
            match cancelled {
                Some((a, b)) => {
                    remaining.remove(a.as_str());
                    remaining.remove(b.as_str());
                }
                None => break,
            }
        }
        let (mut lo, mut hi) = (base, base);
        for (v, c) in remaining {
            let i = self.var_itv(v);
            let (l, h) = (lo_i128(i), hi_i128(i));
            let (l, h) = if c >= 0 {
                (l.saturating_mul(c as i128), h.saturating_mul(c as i128))
            } else {
                (h.saturating_mul(c as i128), l.saturating_mul(c as i128))
            };
            lo = lo.saturating_add(l);
            hi = hi.saturating_add(h);
        }
        (lo, hi)
    }

    /// Three-valued evaluation, delta-aware for comparisons.
    pub fn eval_bool(&self, e: &BoolExpr) -> Option<bool> {
        match e {
            BoolExpr::Lit(b) => Some(*b),
            BoolExpr::Cmp(op, a, b) => {
                let mut coeffs = BTreeMap::new();
                let mut k = 0i64;
                linearize(a, &mut coeffs, &mut k, 1);
                linearize(b, &mut coeffs, &mut k, -1);
                cmp_over(*op, self.linear_itv(&coeffs, k))
            }
            BoolExpr::Not(i) => self.eval_bool(i).map(|b| !b),
            BoolExpr::And(a, b) => match (self.eval_bool(a), self.eval_bool(b)) {
                (Some(false), _) | (_, Some(false)) => Some(false),
                (Some(true), Some(true)) => Some(true),
                _ => None,
            },
            BoolExpr::Or(a, b) => match (self.eval_bool(a), self.eval_bool(b)) {
                (Some(true), _) | (_, Some(true)) => Some(true),
                (Some(false), Some(false)) => Some(false),
                _ => None,
            },
        }
    }

    /// Constrain by a comparison; returns false when the state empties.
    fn refine_cmp(&mut self, op: CmpOp, lhs: &IntExpr, rhs: &IntExpr) -> bool {
        let mut coeffs = BTreeMap::new();
        let mut k = 0i64;
        linearize(lhs, &mut coeffs, &mut k, 1);
        linearize(rhs, &mut coeffs, &mut k, -1);
        coeffs.retain(|_, c| *c != 0);
        match self.linear_itv(&coeffs, k) {
            itv => {
                if let Some(decided) = cmp_over(op, itv) {
                    if !decided {
                        return false;
                    }
                }
            }
        }
        // record exact differences: a - b + k == 0
        if op == CmpOp::Eq && coeffs.len() == 2 {
            let vars: Vec<(&String, &i64)> = coeffs.iter().collect();
            if *vars[0].1 == 1 && *vars[1].1 == -1 {
                let (a, b) = (vars[0].0.clone(), vars[1].0.clone());
                match self.delta(&a, &b) {
                    Some(d) if d != -k => return false,
                    _ => self.set_delta(&a, &b, -k),
                }
            } else if *vars[0].1 == -1 && *vars[1].1 == 1 {
                let (a, b) = (vars[0].0.clone(), vars[1].0.clone());
                match self.delta(&b, &a) {
                    Some(d) if d != -k => return false,
                    _ => self.set_delta(&b, &a, -k),
                }
            }
        }
        if op == CmpOp::Ne && coeffs.len() == 2 {
            // a - b + k != 0 with known delta was already decided above
        }
        // box refinement per variable: c*v + rest <op> 0
        let keys: Vec<String> = coeffs.keys().cloned().collect();
        for v in keys {
            let c = coeffs[&v];
            let mut rest_lo = k as i128;
            let mut rest_hi = k as i128;
            for (w, &cw) in &coeffs {
                if *w == v {
                    continue;
                }
                let i = self.var_itv(w);
                let (l, h) = (lo_i128(i), hi_i128(i));
                let (l, h) = if cw >= 0 {
                    (l.saturating_mul(cw as i128), h.saturating_mul(cw as i128))
                } else {
                    (h.saturating_mul(cw as i128), l.saturating_mul(cw as i128))
                };
                rest_lo = rest_lo.saturating_add(l);
                rest_hi = rest_hi.saturating_add(h);
            }
            let (cur_lo, cur_hi) = {
                let i = self.var_itv(&v);
                (lo_i128(i), hi_i128(i))
            };
            // weakest sound bound on c*v
            let (mut new_lo, mut new_hi) = (cur_lo, cur_hi);
            let c128 = c as i128;
            let apply_upper = |bound: i128, lo: &mut i128, hi: &mut i128| {
                // c*v <= bound
                if c128 > 0 {
                    *hi = (*hi).min(div_floor(bound, c128));
                } else {
                    *lo = (*lo).max(div_ceil(bound, c128));
                }
            };
            let apply_lower = |bound: i128, lo: &mut i128, hi: &mut i128| {
                // c*v >= bound
                if c128 > 0 {
                    *lo = (*lo).max(div_ceil(bound, c128));
                } else {
                    *hi = (*hi).min(div_floor(bound, c128));
                }
            };
            match op {
                CmpOp::Le => apply_upper(-rest_lo, &mut new_lo, &mut new_hi),
                CmpOp::Lt => apply_upper(-rest_lo - 1, &mut new_lo, &mut new_hi),
                CmpOp::Ge => apply_lower(-rest_hi, &mut new_lo, &mut new_hi),
                CmpOp::Gt => apply_lower(-rest_hi + 1, &mut new_lo, &mut new_hi),
                CmpOp::Eq => {
                    apply_upper(-rest_lo, &mut new_lo, &mut new_hi);
                    apply_lower(-rest_hi, &mut new_lo, &mut new_hi);
                }
                CmpOp::Ne => {}
            }
            if is_empty(new_lo, new_hi) {
                return false;
            }
            self.set_itv(&v, from_i128(new_lo, new_hi));
        }
        self.propagate_deltas()
    }

    /// Tighten boxes through known differences; false when empty.
    fn propagate_deltas(&mut self) -> bool {
        for _ in 0..2 {
            let pairs: Vec<((String, String), i64)> =
                self.deltas.iter().map(|(p, d)| (p.clone(), *d)).collect();
            for ((a, b), d) in pairs {
                let ia = self.var_itv(&a);
                let ib = self.var_itv(&b);
                // a = b + d
                let lo = lo_i128(ia).max(lo_i128(ib).saturating_add(d as i128));
                let hi = hi_i128(ia).min(hi_i128(ib).saturating_add(d as i128));
                if is_empty(lo, hi) {
                    return false;
                }
                self.set_itv(&a, from_i128(lo, hi));
                let lo_b = lo.saturating_sub(d as i128);
                let hi_b = hi.saturating_sub(d as i128);
                self.set_itv(&b, from_i128(lo_b, hi_b));
            }
        }
        true
    }

    /// Constrain by an arbitrary condition expected to evaluate to `expect`;
    /// `None` when the state becomes empty.
    pub fn refine(&self, cond: &BoolExpr, expect: bool) -> Option<IntervalState> {
        match self.eval_bool(cond) {
            Some(b) if b != expect => return None,
            _ => {}
        }
        match cond {
            BoolExpr::Lit(b) => {
                if *b == expect {
                    Some(self.clone())
                } else {
                    None
                }
            }
            BoolExpr::Not(i) => self.refine(i, !expect),
            BoolExpr::Cmp(op, a, b) => {
                let eff = if expect { *op } else { op.negated() };
                let mut next = self.clone();
                if next.refine_cmp(eff, a, b) {
                    Some(next)
                } else {
                    None
                }
            }
            BoolExpr::And(a, b) => {
                if expect {
                    self.refine(a, true)?.refine(b, true)
                } else {
                    // refine only when one side is forced
                    match (self.eval_bool(a), self.eval_bool(b)) {
                        (Some(true), _) => self.refine(b, false),
                        (_, Some(true)) => self.refine(a, false),
                        _ => Some(self.clone()),
                    }
                }
            }
            BoolExpr::Or(a, b) => {
                if expect {
                    match (self.eval_bool(a), self.eval_bool(b)) {
                        (Some(false), _) => self.refine(b, true),
                        (_, Some(false)) => self.refine(a, true),
                        _ => Some(self.clone()),
                    }
                } else {
                    self.refine(a, false)?.refine(b, false)
                }
            }
        }
    }

    pub fn transfer(&self, op: &EdgeOp) -> Option<IntervalState> {
        match op {
            EdgeOp::Skip => Some(self.clone()),
            EdgeOp::Assume { cond } => self.refine(cond, true),
            EdgeOp::Assign { var, expr } => {
                let mut next = self.clone();
                let new_itv = {
                    let mut coeffs = BTreeMap::new();
                    let mut k = 0i64;
                    linearize(expr, &mut coeffs, &mut k, 1);
                    coeffs.retain(|_, c| *c != 0);
                    from_i128_pair(self.linear_itv(&coeffs, k))
                };
                let mut coeffs = BTreeMap::new();
                let mut k = 0i64;
                linearize(expr, &mut coeffs, &mut k, 1);
                coeffs.retain(|_, c| *c != 0);
                if coeffs.len() == 1 && coeffs.values().next() == Some(&1) {
                    let src = coeffs.keys().next().unwrap().clone();
                    if src == *var {
                        // self shift: x = x + k
                        let shifted: Vec<((String, String), i64)> = next
                            .deltas
                            .iter()
                            .map(|((a, b), d)| {
                                let mut d = *d;
                                if a == var {
                                    d += k;
                                }
                                if b == var {
                                    d -= k;
                                }
                                ((a.clone(), b.clone()), d)
                            })
                            .collect();
                        next.deltas = shifted.into_iter().collect();
                    } else {
                        // rebind: x = y + k
                        next.drop_deltas_of(var);
                        let derived: Vec<(String, i64)> = next
                            .deltas
                            .iter()
                            .filter_map(|((a, b), d)| {
                                if a == &src {
                                    Some((b.clone(), k + d))
                                } else if b == &src {
                                    Some((a.clone(), k - d))
                                } else {
                                    None
                                }
                            })
                            .collect();
                        next.set_delta(var, &src, k);
                        for (w, d) in derived {
                            if w != *var {
                                next.set_delta(var, &w, d);
                            }
                        }
                    }
                } else if coeffs.is_empty() {
                    // constant: derive differences against singleton boxes
                    next.drop_deltas_of(var);
                    let singles: Vec<(String, i64)> = next
                        .bounds
                        .iter()
                        .filter(|(w, _)| *w != var)
                        .filter_map(|(w, i)| match i {
                            (Some(l), Some(h)) if l == h => Some((w.clone(), *l)),
                            _ => None,
                        })
                        .collect();
                    for (w, val) in singles {
                        next.set_delta(var, &w, k - val);
                    }
                } else {
                    next.drop_deltas_of(var);
                }
                next.set_itv(var, new_itv);
                if next.propagate_deltas() {
                    Some(next)
                } else {
                    None
                }
            }
        }
    }

    pub fn leq(&self, other: &IntervalState) -> bool {
        for (v, &itv) in &other.bounds {
            let mine = self.var_itv(v);
            if lo_i128(mine) < lo_i128(itv) || hi_i128(mine) > hi_i128(itv) {
                return false;
            }
        }
        other.deltas.iter().all(|(p, d)| self.deltas.get(p) == Some(d))
    }

    pub fn join(&self, other: &IntervalState) -> IntervalState {
        let mut bounds = BTreeMap::new();
        for (v, &itv) in &self.bounds {
            if other.bounds.contains_key(v) {
                let o = other.var_itv(v);
                let merged = from_i128(lo_i128(itv).min(lo_i128(o)), hi_i128(itv).max(hi_i128(o)));
                if !is_full(merged) {
                    bounds.insert(v.clone(), merged);
                }
            }
        }
        let deltas = self
            .deltas
            .iter()
            .filter(|(p, d)| other.deltas.get(p) == Some(d))
            .map(|(p, d)| (p.clone(), *d))
            .collect();
        IntervalState { bounds, deltas, join_count: self.join_count.max(other.join_count) }
    }

    /// Widen unstable bounds of `cur` (a join result that contains `prev`),
    /// snapping to the nearest enclosing threshold before giving up to
    /// infinity.
    pub fn widen(prev: &IntervalState, cur: &IntervalState, thresholds: &std::collections::BTreeSet<i64>) -> IntervalState {
        let mut out = cur.clone();
        let keys: Vec<String> = cur.bounds.keys().cloned().collect();
        for v in keys {
            let p = prev.var_itv(&v);
            let c = cur.var_itv(&v);
            let mut lo = c.0;
            let mut hi = c.1;
            if lo_i128(c) < lo_i128(p) {
                lo = lo.and_then(|l| thresholds.range(..=l).next_back().copied());
            }
            if hi_i128(c) > hi_i128(p) {
                hi = hi.and_then(|h| thresholds.range(h..).next().copied());
            }
            out.set_itv(&v, (lo, hi));
        }
        out
    }
}

fn from_i128_pair((lo, hi): (i128, i128)) -> Itv {
    from_i128(lo, hi)
}

/// Widening delay: merges at a loop head join plainly this many times
/// before widening engages.
pub const WIDENING_DELAY: u8 = 3;

#[derive(Debug, Clone)]
pub struct IntervalCpa {
    pub thresholds: std::collections::BTreeSet<i64>,
}

impl IntervalCpa {
    pub fn for_cfa(cfa: &Cfa) -> IntervalCpa {
        let mut thresholds = cfa.condition_constants();
        thresholds.insert(0);
        IntervalCpa { thresholds }
    }

    pub fn initial_state(&self, cfa: &Cfa) -> IntervalState {
        let mut st = IntervalState::default();
        let non_inputs: Vec<&String> = cfa.vars.iter().filter(|v| !cfa.is_input(v)).collect();
        for v in &non_inputs {
            st.bounds.insert((*v).clone(), (Some(0), Some(0)));
        }
        for (i, a) in non_inputs.iter().enumerate() {
            for b in &non_inputs[i + 1..] {
                st.set_delta(a, b, 0);
            }
        }
        st
    }

    /// Loop-head merge: join, widening once the delay is exhausted.
    pub fn merge_at_loop_head(&self, new: &IntervalState, old: &IntervalState) -> IntervalState {
        let mut joined = old.join(new);
        let count = old.join_count.saturating_add(1);
        joined.join_count = count;
        if count >= WIDENING_DELAY {
            let mut widened = IntervalState::widen(old, &joined, &self.thresholds);
            widened.join_count = count;
            widened
        } else {
            joined
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    fn assign(var: &str, src: &str) -> EdgeOp {
        let p = parse(&format!("decl a, b, x; {var} = {src}; assert(a == a);")).unwrap();
        match &p.body[0] {
            crate::frontend::Stmt::Assign { var, expr } => {
                EdgeOp::Assign { var: var.clone(), expr: expr.clone() }
            }
            _ => unreachable!(),
        }
    }

    fn assume(cond: &str) -> EdgeOp {
        let p = parse(&format!("decl a, b, x; assert({cond});")).unwrap();
        match &p.body[0] {
            crate::frontend::Stmt::Assert { cond } => EdgeOp::Assume { cond: cond.clone() },
            _ => unreachable!(),
        }
    }

    #[test]
    fn lockstep_increments_keep_the_difference() {
        let mut st = IntervalState::default();
        st.bounds.insert("a".into(), (Some(0), Some(0)));
        st.bounds.insert("b".into(), (Some(0), Some(0)));
        st.set_delta("a", "b", 0);
        let st = st.transfer(&assign("a", "a + 1")).unwrap();
        assert_eq!(st.delta("a", "b"), Some(1));
        let st = st.transfer(&assign("b", "b + 1")).unwrap();
        assert_eq!(st.delta("a", "b"), Some(0));
        assert_eq!(st.var_itv("a"), (Some(1), Some(1)));
        // the equality decides the assertion even after widening the boxes
        let mut widened = st.clone();
        widened.bounds.remove("a");
        widened.bounds.remove("b");
        assert_eq!(widened.eval_bool(&crate::frontend::BoolExpr::Cmp(
            CmpOp::Eq,
            IntExpr::var("a"),
            IntExpr::var("b"),
        )), Some(true));
    }

    #[test]
    fn definitely_false_assume_empties_the_state() {
        let mut st = IntervalState::default();
        st.bounds.insert("x".into(), (None, Some(-1)));
        assert!(st.transfer(&assume("x >= 0")).is_none());
    }

    #[test]
    fn assume_refines_boxes() {
        let mut st = IntervalState::default();
        st.bounds.insert("a".into(), (Some(0), Some(0)));
        let st = st.transfer(&assume("a < x")).unwrap();
        assert_eq!(st.var_itv("x"), (Some(1), None));
        let st = st.transfer(&assume("x <= 5")).unwrap();
        assert_eq!(st.var_itv("x"), (Some(1), Some(5)));
    }

    #[test]
    fn widening_after_delay_hits_threshold_or_infinity() {
        let cpa = IntervalCpa { thresholds: [0].into_iter().collect() };
        let mut old = IntervalState::default();
        old.bounds.insert("a".into(), (Some(0), Some(1)));
        old.join_count = 2;
        let mut new = IntervalState::default();
        new.bounds.insert("a".into(), (Some(0), Some(2)));
        let merged = cpa.merge_at_loop_head(&new, &old);
        assert_eq!(merged.var_itv("a"), (Some(0), None));
        // with a matching threshold the bound snaps there first
        let cpa = IntervalCpa { thresholds: [0, 5].into_iter().collect() };
        let merged = cpa.merge_at_loop_head(&new, &old);
        assert_eq!(merged.var_itv("a"), (Some(0), Some(5)));
    }

    #[test]
    fn delay_joins_plainly_before_widening() {
        let cpa = IntervalCpa { thresholds: [0].into_iter().collect() };
        let mut old = IntervalState::default();
        old.bounds.insert("a".into(), (Some(0), Some(1)));
        let mut new = IntervalState::default();
        new.bounds.insert("a".into(), (Some(0), Some(2)));
        let merged = cpa.merge_at_loop_head(&new, &old);
        assert_eq!(merged.var_itv("a"), (Some(0), Some(2)));
        assert_eq!(merged.join_count, 1);
    }

    #[test]
    fn rebinding_assignment_derives_differences() {
        let mut st = IntervalState::default();
        st.bounds.insert("a".into(), (Some(3), Some(3)));
        st.set_delta("a", "x", 1);
        let st = st.transfer(&assign("b", "a + 2")).unwrap();
        assert_eq!(st.delta("b", "a"), Some(2));
        assert_eq!(st.delta("b", "x"), Some(3));
        assert_eq!(st.var_itv("b"), (Some(5), Some(5)));
    }

    #[test]
    fn constant_assignment_relates_singletons() {
        let mut st = IntervalState::default();
        st.bounds.insert("a".into(), (Some(10), Some(10)));
        let st = st.transfer(&assign("b", "10")).unwrap();
        assert_eq!(st.delta("a", "b"), Some(0));
    }

    #[test]
    fn order_respects_boxes_and_deltas() {
        let mut tight = IntervalState::default();
        tight.bounds.insert("a".into(), (Some(0), Some(1)));
        tight.set_delta("a", "b", 0);
        let mut loose = IntervalState::default();
        loose.bounds.insert("a".into(), (Some(0), Some(5)));
        assert!(tight.leq(&loose));
        assert!(!loose.leq(&tight));
        let mut loose_delta = loose.clone();
        loose_delta.set_delta("a", "b", 0);
        assert!(tight.leq(&loose_delta));
        assert!(!loose.leq(&loose_delta));
    }
}
