use alloc::vec::Vec;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("{name} = {value} is out of domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// The caller broke a structural precondition (wrong detector kind,
    /// mismatched lengths, malformed bracket, ...).
    #[error("contract violation: {0}")]
    Contract(&'static str),

    /// Both hypotheses assign zero probability to the observed outcome.
    #[error("outcome {outcome} is impossible under both hypotheses")]
    DegenerateEvidence { outcome: u64 },

    /// The likelihood ratio never crosses one, so no count threshold exists.
    #[error("no discrimination threshold: {0}")]
    NoThreshold(&'static str),

    /// Exact enumeration would exceed its branch budget.
    #[error("outcome tree has {branches:e} branches, budget is {budget:e}; use Monte Carlo instead")]
    BranchBudget { branches: f64, budget: f64 },

    /// The joint plan search hit its iteration cap; carries the best plan seen.
    #[error("plan search did not converge; best error rate {error_rate:e}")]
    PlanSearch {
        error_rate: f64,
        betas: Vec<f64>,
        fractions: Vec<f64>,
    },

    /// The minimizer could not produce a usable result.
    #[error("optimizer failed ({reason}) on [{lo}, {hi}]")]
    Optimizer {
        reason: &'static str,
        lo: f64,
        hi: f64,
    },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            reason,
        }
    }
}
