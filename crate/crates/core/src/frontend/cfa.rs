//! Control-flow automaton construction.
//!
//! Branching happens only through paired assume edges whose conditions are
//! syntactic negations of each other; the pair carries the branch indicators
//! T and F, every other edge N. Assertions are lowered to an assume pair
//! whose F side leads to a distinguished error location.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::ast::{BoolExpr, IntExpr, Program, Stmt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct LocId(pub usize);

impl fmt::Display for LocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0)
    }
}

/// Branch indicator of an edge: T for the true evaluation of a condition,
/// F for the false evaluation, N for everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Indicator {
    True,
    False,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EdgeOp {
    Assign { var: String, expr: IntExpr },
    Assume { cond: BoolExpr },
    Skip,
}

impl fmt::Display for EdgeOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeOp::Assign { var, expr } => write!(f, "{var} = {expr};"),
            EdgeOp::Assume { cond } => write!(f, "[{cond}]"),
            EdgeOp::Skip => f.write_str("skip;"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    /// Dense index within `Cfa::edges`.
    pub index: usize,
    pub source: LocId,
    pub target: LocId,
    pub op: EdgeOp,
    pub indicator: Indicator,
    /// Position among the source location's outgoing edges. The pair
    /// `(source, op_index)` is the stable wire identifier of the edge.
    pub op_index: usize,
}

#[derive(Debug, Clone)]
pub struct Cfa {
    pub vars: Vec<String>,
    pub inputs: Vec<String>,
    pub initial: LocId,
    pub n_locations: usize,
    pub edges: Vec<Edge>,
    out: Vec<Vec<usize>>,
    pub error_locations: BTreeSet<LocId>,
    pub loop_heads: BTreeSet<LocId>,
    pub source_hash: String,
}

impl Cfa {
    pub fn out_edges(&self, loc: LocId) -> &[usize] {
        &self.out[loc.0]
    }

    pub fn edge(&self, index: usize) -> &Edge {
        &self.edges[index]
    }

    pub fn is_sink(&self, loc: LocId) -> bool {
        self.out[loc.0].is_empty()
    }

    pub fn is_error(&self, loc: LocId) -> bool {
        self.error_locations.contains(&loc)
    }

    pub fn locations(&self) -> impl Iterator<Item = LocId> {
        (0..self.n_locations).map(LocId)
    }

    /// The (T, F) assume pair leaving `loc`, if `loc` branches.
    pub fn assume_pair(&self, loc: LocId) -> Option<(usize, usize)> {
        let out = self.out_edges(loc);
        if out.len() == 2 {
            let (a, b) = (&self.edges[out[0]], &self.edges[out[1]]);
            if a.indicator == Indicator::True && b.indicator == Indicator::False {
                return Some((out[0], out[1]));
            }
        }
        None
    }

    pub fn wire_id(&self, index: usize) -> (usize, usize) {
        let e = &self.edges[index];
        (e.source.0, e.op_index)
    }

    pub fn edge_by_wire(&self, wire: (usize, usize)) -> Option<usize> {
        let out = self.out.get(wire.0)?;
        out.get(wire.1).copied()
    }

    pub fn var_pos(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    pub fn is_input(&self, name: &str) -> bool {
        self.inputs.iter().any(|v| v == name)
    }

    /// Integer constants appearing in assume conditions; used as widening
    /// thresholds by the interval analysis.
    pub fn condition_constants(&self) -> BTreeSet<i64> {
        let mut out = BTreeSet::new();
        for e in &self.edges {
            if let EdgeOp::Assume { cond } = &e.op {
                collect_bool_consts(cond, &mut out);
            }
        }
        out
    }

    pub fn describe_edge(&self, index: usize) -> String {
        let e = &self.edges[index];
        format!("{} -{}-> {}", e.source, e.op, e.target)
    }
}

fn collect_int_consts(e: &IntExpr, out: &mut BTreeSet<i64>) {
    match e {
        IntExpr::Const(c) => {
            out.insert(*c);
        }
        IntExpr::Var(_) => {}
        IntExpr::Neg(i) => collect_int_consts(i, out),
        IntExpr::Add(a, b) | IntExpr::Sub(a, b) | IntExpr::Mul(a, b) => {
            collect_int_consts(a, out);
            collect_int_consts(b, out);
        }
    }
}

fn collect_bool_consts(e: &BoolExpr, out: &mut BTreeSet<i64>) {
    match e {
        BoolExpr::Lit(_) => {}
        BoolExpr::Cmp(_, a, b) => {
            collect_int_consts(a, out);
            collect_int_consts(b, out);
        }
        BoolExpr::Not(i) => collect_bool_consts(i, out),
        BoolExpr::And(a, b) | BoolExpr::Or(a, b) => {
            collect_bool_consts(a, out);
            collect_bool_consts(b, out);
        }
    }
}

struct RawEdge {
    source: usize,
    target: usize,
    op: EdgeOp,
    indicator: Indicator,
}

struct Builder {
    next_loc: usize,
    edges: Vec<RawEdge>,
    error_locations: BTreeSet<usize>,
    loop_heads: BTreeSet<usize>,
}

impl Builder {
    fn fresh(&mut self) -> usize {
        let l = self.next_loc;
        self.next_loc += 1;
        l
    }

    fn edge(&mut self, source: usize, op: EdgeOp, indicator: Indicator, target: usize) {
        self.edges.push(RawEdge { source, target, op, indicator });
    }

    fn assume_pair(&mut self, source: usize, cond: &BoolExpr, t_target: usize, f_target: usize) {
        self.edge(source, EdgeOp::Assume { cond: cond.clone() }, Indicator::True, t_target);
        self.edge(
            source,
            EdgeOp::Assume { cond: cond.negated() },
            Indicator::False,
            f_target,
        );
    }

    fn lower_block(&mut self, stmts: &[Stmt], entry: usize, exit: usize) {
        debug_assert!(!stmts.is_empty());
        let mut cur = entry;
        for (i, s) in stmts.iter().enumerate() {
            let next = if i + 1 == stmts.len() { exit } else { self.fresh() };
            self.lower_stmt(s, cur, next);
            cur = next;
        }
    }

    fn lower_stmt(&mut self, s: &Stmt, entry: usize, exit: usize) {
        match s {
            Stmt::Assign { var, expr } => {
                self.edge(
                    entry,
                    EdgeOp::Assign { var: var.clone(), expr: expr.clone() },
                    Indicator::None,
                    exit,
                );
            }
            Stmt::Skip => self.edge(entry, EdgeOp::Skip, Indicator::None, exit),
            Stmt::If { cond, then_branch, else_branch } => {
                let t_target = if then_branch.is_empty() { exit } else { self.fresh() };
                let f_target = if else_branch.is_empty() { exit } else { self.fresh() };
                self.assume_pair(entry, cond, t_target, f_target);
                if !then_branch.is_empty() {
                    self.lower_block(then_branch, t_target, exit);
                }
                if !else_branch.is_empty() {
                    self.lower_block(else_branch, f_target, exit);
                }
            }
            Stmt::While { cond, body } => {
                self.loop_heads.insert(entry);
                let b_target = if body.is_empty() { entry } else { self.fresh() };
                self.assume_pair(entry, cond, b_target, exit);
                if !body.is_empty() {
                    self.lower_block(body, b_target, entry);
                }
            }
            Stmt::Assert { cond } => {
                let err = self.fresh();
                self.error_locations.insert(err);
                self.assume_pair(entry, cond, exit, err);
            }
        }
    }
}

/// Build the deterministic CFA for a validated program.
///
/// Locations are renumbered in depth-first preorder from the initial
/// location, following true branches first, so ids are stable for a given
/// source text.
pub fn build_cfa(p: &Program) -> Cfa {
    let mut b = Builder {
        next_loc: 0,
        edges: Vec::new(),
        error_locations: BTreeSet::new(),
        loop_heads: BTreeSet::new(),
    };
    let entry = b.fresh();
    let exit = b.fresh();
    b.lower_block(&p.body, entry, exit);

    // Outgoing edge indices per raw location, assume pairs ordered T then F.
    let mut raw_out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, e) in b.edges.iter().enumerate() {
        raw_out.entry(e.source).or_default().push(i);
    }
    for out in raw_out.values_mut() {
        out.sort_by_key(|&i| match b.edges[i].indicator {
            Indicator::True => 0,
            Indicator::False => 1,
            Indicator::None => 2,
        });
    }

    let mut renumber: BTreeMap<usize, usize> = BTreeMap::new();
    let mut stack = vec![entry];
    while let Some(raw) = stack.pop() {
        if renumber.contains_key(&raw) {
            continue;
        }
        let id = renumber.len();
        renumber.insert(raw, id);
        if let Some(out) = raw_out.get(&raw) {
            for &ei in out.iter().rev() {
                let tgt = b.edges[ei].target;
                if !renumber.contains_key(&tgt) {
                    stack.push(tgt);
                }
            }
        }
    }
    // Structured lowering reaches every allocated location, but do not rely
    // on it for id assignment.
    for raw in 0..b.next_loc {
        let next = renumber.len();
        renumber.entry(raw).or_insert(next);
    }

    let n_locations = b.next_loc;
    let mut edges: Vec<Edge> = Vec::with_capacity(b.edges.len());
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n_locations];
    let mut ordered: Vec<(usize, usize, usize)> = Vec::new(); // (new source, op_index, raw edge)
    for (&raw_src, raw_edges) in &raw_out {
        for (op_index, &ei) in raw_edges.iter().enumerate() {
            ordered.push((renumber[&raw_src], op_index, ei));
        }
    }
    ordered.sort();
    for (src, op_index, ei) in ordered {
        let raw = &b.edges[ei];
        let index = edges.len();
        out[src].push(index);
        edges.push(Edge {
            index,
            source: LocId(src),
            target: LocId(renumber[&raw.target]),
            op: raw.op.clone(),
            indicator: raw.indicator,
            op_index,
        });
    }

    Cfa {
        vars: p.declarations.clone(),
        inputs: p.inputs.clone(),
        initial: LocId(renumber[&entry]),
        n_locations,
        edges,
        out,
        error_locations: b.error_locations.iter().map(|l| LocId(renumber[l])).collect(),
        loop_heads: b.loop_heads.iter().map(|l| LocId(renumber[l])).collect(),
        source_hash: p.source_hash.clone(),
    }
}
