//! Constraint representation, satisfiability, and path formulas.
//!
//! The internal backend is the default and keeps the artifact free of
//! external dependencies; an SMT-LIB2 subprocess backend is available as an
//! opt-in for cross-checking.

mod encode;
mod internal;
mod smtlib;
pub mod term;

pub use encode::{encode_bool, encode_int, path_formula, PathEncoder};
pub use internal::InternalLimits;
pub use smtlib::{check_sat_external, render_script, ExternalConfig};
pub use term::{Constraint, LinTerm, Model, SymId, SymbolTable};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    Sat(Model),
    Unsat,
    Unknown(String),
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatResult::Sat(_))
    }
}

#[derive(Debug, Clone)]
pub enum Backend {
    Internal,
    External(ExternalConfig),
}

/// A satisfiability oracle. Handles are cheap to create and are not shared
/// between workers; each analysis run owns its own.
#[derive(Debug, Clone)]
pub struct SolverHandle {
    pub backend: Backend,
    pub limits: InternalLimits,
    pub queries: u64,
}

impl SolverHandle {
    pub fn internal() -> SolverHandle {
        SolverHandle { backend: Backend::Internal, limits: InternalLimits::default(), queries: 0 }
    }

    pub fn external(cfg: ExternalConfig) -> SolverHandle {
        SolverHandle {
            backend: Backend::External(cfg),
            limits: InternalLimits::default(),
            queries: 0,
        }
    }

    pub fn check_sat(&mut self, c: &Constraint, tab: &SymbolTable) -> SatResult {
        self.queries += 1;
        match &self.backend {
            Backend::Internal => internal::check_sat_internal(c, &self.limits),
            Backend::External(cfg) => smtlib::check_sat_external(cfg, c, tab),
        }
    }
}
