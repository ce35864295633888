//! Candidate budgets for exhaustive searches.
//!
//! Budgets are measured in candidate tuples (loop iterations of the
//! innermost search), not wall time, so runs are reproducible across
//! machines. Exceeding a budget is a refusal up front, computed from the
//! projected search volume, never a mid-run abort.

use crate::error::{Error, Result};

pub const DEFAULT_CANDIDATES: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub candidates: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            candidates: DEFAULT_CANDIDATES,
        }
    }
}

impl Budget {
    pub fn new(candidates: u64) -> Self {
        Budget { candidates }
    }

    /// Refuses when `projected` candidates exceed the budget. `what` names
    /// the search; `feasible` suggests a parameter that would fit, if known.
    pub fn admit(&self, projected: u128, what: &str, feasible: Option<String>) -> Result<()> {
        if projected <= self.candidates as u128 {
            return Ok(());
        }
        let hint = feasible
            .map(|f| format!("; feasible: {f}"))
            .unwrap_or_default();
        Err(Error::resource(format!(
            "{what} needs {projected} candidates, budget is {}{hint}",
            self.candidates
        )))
    }
}
