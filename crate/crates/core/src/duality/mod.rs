//! Utility maximization with finitely many bonds, its dual, and
//! super-replication.

mod dual;
mod hedge;
mod primal;
mod superrep;
mod utility;

pub use dual::{budget_root, conjugacy_gap, dual_value, optimal_terminal_wealth, GapReport, OptimalWealth};
pub use hedge::{superhedge_strategy, HedgeBasis, HedgeConfig, Superhedge};
pub use primal::{primal_finite_bonds, primal_finite_bonds_from, primal_nested, OptimizerConfig, PrimalResult, BASIS};
pub use superrep::{control_variate_price, orthogonal_density, superrep_price, ClaimSpec, PricingMeasures, SuperrepResult};
pub use utility::{conjugate_value, UtilityKind, UtilitySpec};
