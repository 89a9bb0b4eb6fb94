//! Stochastic integration against maturity-indexed families of
//! semimartingales on discretized path sets, with bond-market utility
//! maximization and super-replication built on top.
//!
//! Modules follow the data flow: lattices and path containers
//! ([`grid`], [`paths`]), topology proxies ([`seminorm`]), integrator
//! generators ([`models`]), integrals of simple and generalized strategies
//! ([`integration`]), measure-valued strategies ([`measure`]) and the duality
//! pipeline ([`duality`]).

pub mod duality;
pub mod error;
pub mod grid;
pub mod integration;
pub mod io;
pub mod measure;
pub mod models;
pub mod paths;
pub mod rng;
pub mod seminorm;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{MaturityGrid, ScenarioSet, TimeGrid};
pub use paths::{FamilyPaths, History, PathFamily, PredictableSet, ProcessPaths};
