//! SMT-LIB2 client for an external solver process.
//!
//! One process per query: emits `(set-logic QF_LIA)`, constant declarations,
//! the assertion, `(check-sat)` and `(get-model)`, then parses the
//! `sat`/`unsat`/`unknown` reply and the s-expression model.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use crate::frontend::CmpOp;

use super::term::{Constraint, LinTerm, Model, SymbolTable};
use super::SatResult;

#[derive(Debug, Clone)]
pub struct ExternalConfig {
    pub command: Vec<String>,
    pub timeout: Duration,
}

impl ExternalConfig {
    /// Parse a command line such as `z3 -in` into a config.
    pub fn from_command_line(line: &str, timeout: Duration) -> Option<ExternalConfig> {
        let command: Vec<String> = line.split_whitespace().map(|s| s.to_string()).collect();
        if command.is_empty() {
            None
        } else {
            Some(ExternalConfig { command, timeout })
        }
    }
}

fn smt_int(v: i64) -> String {
    if v < 0 {
        format!("(- {})", v.unsigned_abs())
    } else {
        v.to_string()
    }
}

fn smt_term(t: &LinTerm, tab: &SymbolTable) -> String {
    let mut parts: Vec<String> = Vec::new();
    for (s, &c) in &t.coeffs {
        let name = tab.name(*s);
        if c == 1 {
            parts.push(name.to_string());
        } else {
            parts.push(format!("(* {} {})", smt_int(c), name));
        }
    }
    if t.constant != 0 || parts.is_empty() {
        parts.push(smt_int(t.constant));
    }
    if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        format!("(+ {})", parts.join(" "))
    }
}

fn smt_constraint(c: &Constraint, tab: &SymbolTable) -> String {
    match c {
        Constraint::True => "true".into(),
        Constraint::False => "false".into(),
        Constraint::Cmp(op, t) => {
            let ts = smt_term(t, tab);
            match op {
                CmpOp::Eq => format!("(= {ts} 0)"),
                CmpOp::Ne => format!("(not (= {ts} 0))"),
                CmpOp::Lt => format!("(< {ts} 0)"),
                CmpOp::Le => format!("(<= {ts} 0)"),
                CmpOp::Gt => format!("(> {ts} 0)"),
                CmpOp::Ge => format!("(>= {ts} 0)"),
            }
        }
        Constraint::Not(i) => format!("(not {})", smt_constraint(i, tab)),
        Constraint::And(parts) => {
            let inner: Vec<String> = parts.iter().map(|p| smt_constraint(p, tab)).collect();
            format!("(and {})", inner.join(" "))
        }
        Constraint::Or(parts) => {
            let inner: Vec<String> = parts.iter().map(|p| smt_constraint(p, tab)).collect();
            format!("(or {})", inner.join(" "))
        }
    }
}

pub fn render_script(c: &Constraint, tab: &SymbolTable) -> String {
    let mut syms = std::collections::BTreeSet::new();
    c.symbols(&mut syms);
    let mut script = String::from("(set-logic QF_LIA)\n");
    for s in &syms {
        script.push_str(&format!("(declare-const {} Int)\n", tab.name(*s)));
    }
    script.push_str(&format!("(assert {})\n", smt_constraint(c, tab)));
    script.push_str("(check-sat)\n(get-model)\n");
    script
}

#[derive(Debug, PartialEq)]
enum SToken {
    Open,
    Close,
    Atom(String),
}

fn tokenize(text: &str) -> Vec<SToken> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' => {
                out.push(SToken::Open);
                chars.next();
            }
            ')' => {
                out.push(SToken::Close);
                chars.next();
            }
            '|' => {
                chars.next();
                let mut atom = String::new();
                for c in chars.by_ref() {
                    if c == '|' {
                        break;
                    }
                    atom.push(c);
                }
                out.push(SToken::Atom(atom));
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut atom = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' {
                        break;
                    }
                    atom.push(c);
                    chars.next();
                }
                out.push(SToken::Atom(atom));
            }
        }
    }
    out
}

/// Extract `(define-fun NAME () Int VALUE)` bindings; VALUE may be negated
/// as `(- N)`.
fn parse_model(tokens: &[SToken], tab: &SymbolTable) -> Option<Model> {
    let mut model = Model::new();
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i] == SToken::Atom("define-fun".into()) {
            let SToken::Atom(name) = &tokens[i + 1] else { return None };
            // skip: ( ) Int  -> value
            let mut j = i + 2;
            if tokens.get(j) != Some(&SToken::Open) || tokens.get(j + 1) != Some(&SToken::Close) {
                return None;
            }
            j += 2;
            if tokens.get(j) != Some(&SToken::Atom("Int".into())) {
                return None;
            }
            j += 1;
            let value = match tokens.get(j)? {
                SToken::Atom(v) => v.parse::<i64>().ok()?,
                SToken::Open => {
                    let SToken::Atom(minus) = tokens.get(j + 1)? else { return None };
                    let SToken::Atom(v) = tokens.get(j + 2)? else { return None };
                    if minus != "-" || tokens.get(j + 3) != Some(&SToken::Close) {
                        return None;
                    }
                    j += 3;
                    -v.parse::<i64>().ok()?
                }
                SToken::Close => return None,
            };
            if let Some(sym) = tab.lookup(name) {
                model.insert(sym, value);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    Some(model)
}

pub fn check_sat_external(
    cfg: &ExternalConfig,
    c: &Constraint,
    tab: &SymbolTable,
) -> SatResult {
    let script = render_script(c, tab);
    let mut cmd = Command::new(&cfg.command[0]);
    cmd.args(&cfg.command[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null());
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => return SatResult::Unknown(format!("failed to launch external solver: {e}")),
    };
    if let Some(mut stdin) = child.stdin.take() {
        if stdin.write_all(script.as_bytes()).is_err() {
            let _ = child.kill();
            return SatResult::Unknown("failed to write to external solver".into());
        }
    }
    let started = Instant::now();
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) => {
                if started.elapsed() > cfg.timeout {
                    let _ = child.kill();
                    let _ = child.wait();
                    return SatResult::Unknown("external solver timeout".into());
                }
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(e) => return SatResult::Unknown(format!("external solver wait failed: {e}")),
        }
    }
    let mut output = String::new();
    if let Some(mut stdout) = child.stdout.take() {
        if stdout.read_to_string(&mut output).is_err() {
            return SatResult::Unknown("failed to read external solver output".into());
        }
    }
    let tokens = tokenize(&output);
    let status = tokens.iter().find_map(|t| match t {
        SToken::Atom(a) if a == "sat" || a == "unsat" || a == "unknown" => Some(a.clone()),
        _ => None,
    });
    match status.as_deref() {
        Some("unsat") => SatResult::Unsat,
        Some("unknown") => SatResult::Unknown("external solver reported unknown".into()),
        Some("sat") => match parse_model(&tokens, tab) {
            Some(mut model) => {
                let mut syms = std::collections::BTreeSet::new();
                c.symbols(&mut syms);
                for s in syms {
                    model.entry(s).or_insert(0);
                }
                if c.eval(&model) == Some(true) {
                    SatResult::Sat(model)
                } else {
                    SatResult::Unknown("external model failed verification".into())
                }
            }
            None => SatResult::Unknown("could not parse external solver model".into()),
        },
        _ => SatResult::Unknown(format!(
            "unrecognized external solver reply: {:?}",
            output.lines().next().unwrap_or("")
        )),
    }
}
