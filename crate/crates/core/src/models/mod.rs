//! Integrator families: the non-local-martingale counterexample families and
//! a Gaussian HJM bond market.

pub mod example21;
pub mod hjm;

pub use example21::{
    example21_maturity_grid, example21_node, gen_example21, gen_example22_perturbed, Example21Family,
    Example21Params, Example22Family,
};
pub use hjm::{
    extend_after_maturity, forward_rates, gen_gaussian_market, BondMarket, Factor, GaussianHjmParams, InitialCurve,
};
