//! Concrete analysis domains plugged into the CPA framework.

pub mod interval;
pub mod symexec;
pub mod value;

pub use interval::{IntervalCpa, IntervalState};
pub use symexec::{SymExecCpa, SymExecState};
pub use value::{ValueCpa, ValueState};
