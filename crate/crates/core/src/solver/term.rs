//! Linear integer terms over interned symbols, and quantifier-free
//! constraints built from comparisons against zero.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::frontend::CmpOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymId(pub u32);

#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    names: Vec<String>,
    index: BTreeMap<String, SymId>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> SymId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = SymId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn lookup(&self, name: &str) -> Option<SymId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: SymId) -> &str {
        &self.names[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

pub type Model = BTreeMap<SymId, i64>;

/// A linear term `sum(coeff_i * sym_i) + constant`. Zero coefficients are
/// never stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct LinTerm {
    pub coeffs: BTreeMap<SymId, i64>,
    pub constant: i64,
}

fn chk(v: Option<i64>) -> i64 {
    v.expect("coefficient overflow in linear term arithmetic")
}

impl LinTerm {
    pub fn constant(c: i64) -> LinTerm {
        LinTerm { coeffs: BTreeMap::new(), constant: c }
    }

    pub fn symbol(s: SymId) -> LinTerm {
        LinTerm { coeffs: BTreeMap::from([(s, 1)]), constant: 0 }
    }

    pub fn is_const(&self) -> Option<i64> {
        if self.coeffs.is_empty() {
            Some(self.constant)
        } else {
            None
        }
    }

    pub fn add(&self, other: &LinTerm) -> LinTerm {
        let mut out = self.clone();
        out.constant = chk(out.constant.checked_add(other.constant));
        for (&s, &c) in &other.coeffs {
            let e = out.coeffs.entry(s).or_insert(0);
            *e = chk(e.checked_add(c));
            if *e == 0 {
                out.coeffs.remove(&s);
            }
        }
        out
    }

    pub fn negate(&self) -> LinTerm {
        self.scale(-1)
    }

    pub fn sub(&self, other: &LinTerm) -> LinTerm {
        self.add(&other.negate())
    }

    pub fn scale(&self, k: i64) -> LinTerm {
        if k == 0 {
            return LinTerm::constant(0);
        }
        LinTerm {
            coeffs: self.coeffs.iter().map(|(&s, &c)| (s, chk(c.checked_mul(k)))).collect(),
            constant: chk(self.constant.checked_mul(k)),
        }
    }

    /// Replace `sym` by `def` everywhere.
    pub fn subst(&self, sym: SymId, def: &LinTerm) -> LinTerm {
        let Some(&c) = self.coeffs.get(&sym) else {
            return self.clone();
        };
        let mut rest = self.clone();
        rest.coeffs.remove(&sym);
        rest.add(&def.scale(c))
    }

    pub fn eval(&self, model: &Model) -> Option<i64> {
        let mut acc: i64 = self.constant;
        for (s, &c) in &self.coeffs {
            let v = *model.get(s)?;
            acc = acc.checked_add(c.checked_mul(v)?)?;
        }
        Some(acc)
    }

    pub fn symbols(&self, out: &mut BTreeSet<SymId>) {
        out.extend(self.coeffs.keys().copied());
    }
}

impl fmt::Display for LinTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (s, c) in &self.coeffs {
            if first {
                if *c == 1 {
                    write!(f, "s{}", s.0)?;
                } else if *c == -1 {
                    write!(f, "-s{}", s.0)?;
                } else {
                    write!(f, "{}*s{}", c, s.0)?;
                }
                first = false;
            } else if *c >= 0 {
                if *c == 1 {
                    write!(f, " + s{}", s.0)?;
                } else {
                    write!(f, " + {}*s{}", c, s.0)?;
                }
            } else if *c == -1 {
                write!(f, " - s{}", s.0)?;
            } else {
                write!(f, " - {}*s{}", -c, s.0)?;
            }
        }
        if first {
            write!(f, "{}", self.constant)?;
        } else if self.constant > 0 {
            write!(f, " + {}", self.constant)?;
        } else if self.constant < 0 {
            write!(f, " - {}", -self.constant)?;
        }
        Ok(())
    }
}

/// Quantifier-free constraint; comparisons read `term <op> 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Constraint {
    True,
    False,
    Cmp(CmpOp, LinTerm),
    Not(Box<Constraint>),
    And(Vec<Constraint>),
    Or(Vec<Constraint>),
}

impl Constraint {
    /// `lhs <op> rhs` folded to a comparison against zero.
    pub fn cmp(op: CmpOp, lhs: &LinTerm, rhs: &LinTerm) -> Constraint {
        let t = lhs.sub(rhs);
        match t.is_const() {
            Some(c) => {
                if op.apply(c, 0) {
                    Constraint::True
                } else {
                    Constraint::False
                }
            }
            None => Constraint::Cmp(op, t),
        }
    }

    pub fn and(parts: Vec<Constraint>) -> Constraint {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Constraint::True => {}
                Constraint::False => return Constraint::False,
                Constraint::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Constraint::True,
            1 => out.pop().unwrap(),
            _ => Constraint::And(out),
        }
    }

    pub fn or(parts: Vec<Constraint>) -> Constraint {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Constraint::False => {}
                Constraint::True => return Constraint::True,
                Constraint::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Constraint::False,
            1 => out.pop().unwrap(),
            _ => Constraint::Or(out),
        }
    }

    pub fn negated(&self) -> Constraint {
        match self {
            Constraint::True => Constraint::False,
            Constraint::False => Constraint::True,
            Constraint::Cmp(op, t) => Constraint::Cmp(op.negated(), t.clone()),
            Constraint::Not(inner) => (**inner).clone(),
            Constraint::And(parts) => {
                Constraint::or(parts.iter().map(|p| p.negated()).collect())
            }
            Constraint::Or(parts) => {
                Constraint::and(parts.iter().map(|p| p.negated()).collect())
            }
        }
    }

    /// Negation normal form: `Not` pushed into comparisons.
    pub fn nnf(&self) -> Constraint {
        match self {
            Constraint::True | Constraint::False | Constraint::Cmp(..) => self.clone(),
            Constraint::Not(inner) => inner.negated().nnf(),
            Constraint::And(parts) => Constraint::and(parts.iter().map(|p| p.nnf()).collect()),
            Constraint::Or(parts) => Constraint::or(parts.iter().map(|p| p.nnf()).collect()),
        }
    }

    /// Disjunctive normal form as atom lists; `None` when the clause count
    /// would exceed `cap`. `Some(vec![])` means the constraint is false,
    /// a clause of zero atoms means true.
    pub fn dnf(&self, cap: usize) -> Option<Vec<Vec<(CmpOp, LinTerm)>>> {
        fn go(c: &Constraint, cap: usize) -> Option<Vec<Vec<(CmpOp, LinTerm)>>> {
            match c {
                Constraint::True => Some(vec![vec![]]),
                Constraint::False => Some(vec![]),
                Constraint::Cmp(op, t) => Some(vec![vec![(*op, t.clone())]]),
                Constraint::Not(_) => unreachable!("dnf runs on nnf input"),
                Constraint::Or(parts) => {
                    let mut out = Vec::new();
                    for p in parts {
                        out.extend(go(p, cap)?);
                        if out.len() > cap {
                            return None;
                        }
                    }
                    Some(out)
                }
                Constraint::And(parts) => {
                    let mut acc: Vec<Vec<(CmpOp, LinTerm)>> = vec![vec![]];
                    for p in parts {
                        let rhs = go(p, cap)?;
                        let mut next = Vec::new();
                        for a in &acc {
                            for b in &rhs {
                                let mut clause = a.clone();
                                clause.extend(b.iter().cloned());
                                next.push(clause);
                                if next.len() > cap {
                                    return None;
                                }
                            }
                        }
                        acc = next;
                    }
                    Some(acc)
                }
            }
        }
        go(&self.nnf(), cap)
    }

    pub fn eval(&self, model: &Model) -> Option<bool> {
        Some(match self {
            Constraint::True => true,
            Constraint::False => false,
            Constraint::Cmp(op, t) => op.apply(t.eval(model)?, 0),
            Constraint::Not(inner) => !inner.eval(model)?,
            Constraint::And(parts) => {
                for p in parts {
                    if !p.eval(model)? {
                        return Some(false);
                    }
                }
                true
            }
            Constraint::Or(parts) => {
                for p in parts {
                    if p.eval(model)? {
                        return Some(true);
                    }
                }
                false
            }
        })
    }

    pub fn symbols(&self, out: &mut BTreeSet<SymId>) {
        match self {
            Constraint::True | Constraint::False => {}
            Constraint::Cmp(_, t) => t.symbols(out),
            Constraint::Not(inner) => inner.symbols(out),
            Constraint::And(parts) | Constraint::Or(parts) => {
                for p in parts {
                    p.symbols(out);
                }
            }
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::True => f.write_str("true"),
            Constraint::False => f.write_str("false"),
            Constraint::Cmp(op, t) => write!(f, "{t} {op} 0"),
            Constraint::Not(inner) => write!(f, "!({inner})"),
            Constraint::And(parts) => {
                let strs: Vec<String> = parts.iter().map(|p| format!("({p})")).collect();
                f.write_str(&strs.join(" && "))
            }
            Constraint::Or(parts) => {
                let strs: Vec<String> = parts.iter().map(|p| format!("({p})")).collect();
                f.write_str(&strs.join(" || "))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: u32) -> SymId {
        SymId(n)
    }

    #[test]
    fn linear_arithmetic_normalizes() {
        let x = LinTerm::symbol(s(0));
        let y = LinTerm::symbol(s(1));
        let t = x.scale(2).add(&y).sub(&x).sub(&x); // 2x + y - x - x = y
        assert_eq!(t, y);
        let u = x.add(&LinTerm::constant(3)).subst(s(0), &y.add(&LinTerm::constant(1)));
        assert_eq!(u, y.add(&LinTerm::constant(4)));
    }

    #[test]
    fn constant_comparisons_fold() {
        assert_eq!(
            Constraint::cmp(CmpOp::Lt, &LinTerm::constant(3), &LinTerm::constant(4)),
            Constraint::True
        );
        assert_eq!(
            Constraint::cmp(CmpOp::Lt, &LinTerm::constant(4), &LinTerm::constant(3)),
            Constraint::False
        );
    }

    #[test]
    fn dnf_distributes_and_caps() {
        let x = LinTerm::symbol(s(0));
        let a = Constraint::Cmp(CmpOp::Ge, x.clone());
        let b = Constraint::Cmp(CmpOp::Le, x.clone());
        let c = Constraint::and(vec![
            Constraint::or(vec![a.clone(), b.clone()]),
            Constraint::or(vec![a.clone(), b.clone()]),
        ]);
        assert_eq!(c.dnf(16).unwrap().len(), 4);
        assert!(c.dnf(3).is_none());
        // negation of a conjunction lands in NNF without Not nodes
        let n = Constraint::Not(Box::new(c)).nnf();
        fn no_not(c: &Constraint) -> bool {
            match c {
                Constraint::Not(_) => false,
                Constraint::And(ps) | Constraint::Or(ps) => ps.iter().all(no_not),
                _ => true,
            }
        }
        assert!(no_not(&n));
    }

    #[test]
    fn eval_follows_model() {
        let x = LinTerm::symbol(s(0));
        let c = Constraint::cmp(CmpOp::Ge, &x, &LinTerm::constant(2));
        let mut m = Model::new();
        m.insert(s(0), 5);
        assert_eq!(c.eval(&m), Some(true));
        m.insert(s(0), 1);
        assert_eq!(c.eval(&m), Some(false));
    }
}
