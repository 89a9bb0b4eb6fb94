use crate::error::{Error, Result};
use crate::models::BondMarket;
use crate::paths::{History, PathFamily, ProcessPaths};
use crate::stats::par_map;

use super::generalized::GeneralizedStrategy;
use super::simple::integrate_simple;
use super::strategy::SimpleStrategy;

/// `V̄_t = V_0 + (H·P̄)_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioValue {
    pub v0: f64,
    pub path: ProcessPaths,
}

pub fn portfolio_value(v0: f64, h: &SimpleStrategy, discounted: &dyn PathFamily) -> Result<PortfolioValue> {
    let gains = integrate_simple(h, discounted)?;
    Ok(PortfolioValue { v0, path: gains.map(|g| v0 + g) })
}

/// Discounted bank holding `φ_n = (H·P̄)_n − Σ_i h^i_n P̄^{x_i}_n`.
pub fn bank_position(h: &SimpleStrategy, market: &BondMarket) -> Result<ProcessPaths> {
    let fam = &market.discounted;
    let gains = integrate_simple(h, fam)?;
    let legs: Vec<_> = h
        .legs()
        .iter()
        .map(|l| Ok((fam.maturity_grid().require(l.maturity)?, l.weight.resolve(fam)?)))
        .collect::<Result<_>>()?;
    let nt = fam.time_grid().len();
    let rows = par_map(fam.scenarios(), |s| {
        (0..nt)
            .map(|n| {
                let hist = History::new(fam, s, n);
                let held: f64 = legs.iter().map(|(m, w)| w.eval(&hist) * fam.value(s, n, *m)).sum();
                gains.get(s, n) - held
            })
            .collect::<Vec<f64>>()
    });
    ProcessPaths::from_rows(fam.time_grid().clone(), rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    /// `min (H·S) + x` over approximants, scenarios and times.
    pub worst_margin: f64,
    /// `(approximant index, scenario, time index)` of the worst margin.
    pub location: (usize, usize, usize),
}

fn worst(y: &ProcessPaths, x: f64, k: usize) -> AdmissibilityReport {
    let mut report = AdmissibilityReport { admissible: true, worst_margin: f64::INFINITY, location: (k, 0, 0) };
    for s in 0..y.scenarios() {
        for (n, v) in y.path(s).iter().enumerate() {
            if v + x < report.worst_margin {
                report.worst_margin = v + x;
                report.location = (k, s, n);
            }
        }
    }
    report.admissible = report.worst_margin >= 0.0;
    report
}

fn check_x(x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("admissibility level must be > 0 (got {x})")));
    }
    Ok(())
}

/// Whether `(H·S)_t ≥ −x` at every grid time in every scenario.
pub fn admissibility_check(h: &SimpleStrategy, family: &dyn PathFamily, x: f64) -> Result<AdmissibilityReport> {
    check_x(x)?;
    Ok(worst(&integrate_simple(h, family)?, x, 0))
}

/// Admissibility of every approximant along the schedule; the location's
/// first entry is the schedule index `n`.
pub fn admissibility_check_generalized(
    g: &GeneralizedStrategy,
    family: &dyn PathFamily,
    x: f64,
    schedule: &[usize],
) -> Result<AdmissibilityReport> {
    check_x(x)?;
    let mut out: Option<AdmissibilityReport> = None;
    for &n in schedule {
        let r = worst(&integrate_simple(&g.approximant(n)?, family)?, x, n);
        if out.is_none_or(|o| r.worst_margin < o.worst_margin) {
            out = Some(r);
        }
    }
    out.ok_or_else(|| Error::InvalidParameter("empty schedule".into()))
}
