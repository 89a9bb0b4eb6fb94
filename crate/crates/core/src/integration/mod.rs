//! Integration of simple and generalized strategies against a path family,
//! portfolio bookkeeping and admissibility.

mod generalized;
mod portfolio;
mod simple;
mod strategy;

pub use generalized::{
    integrate_generalized_with,
    evaluate_functional, integrate_generalized, FunctionalValue, GeneralizedDiagnostics, GeneralizedStrategy,
    DEFAULT_SCHEDULE,
};
pub use portfolio::{
    admissibility_check, admissibility_check_generalized, bank_position, portfolio_value, AdmissibilityReport,
    PortfolioValue,
};
pub use simple::integrate_simple;
pub use strategy::{Leg, SimpleStrategy, StopRule, Weight, WeightFn};
