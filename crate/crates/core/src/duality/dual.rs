use crate::error::{Error, Result};
use crate::models::BondMarket;
use crate::stats::{combined_se, Estimate};

use super::utility::{conjugate_value, UtilitySpec};

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be > 0 (got {v})")));
    }
    Ok(())
}

/// `v(y) = E[V(y Z_T)]`.
pub fn dual_value(y: f64, market: &BondMarket, u: &UtilitySpec) -> Result<Estimate> {
    check_positive("y", y)?;
    let z = market.terminal_density();
    let xs: Vec<f64> = z.iter().map(|&z| conjugate_value(u, y * z)).collect::<Result<_>>()?;
    Ok(Estimate::from_samples(&xs))
}

fn budget(y: f64, z: &[f64], u: &UtilitySpec) -> f64 {
    let xs: Vec<f64> = z.iter().map(|&z| z * u.inverse_marginal(y * z)).collect();
    crate::stats::pairwise_sum(&xs) / z.len() as f64
}

/// Solves `E[Z_T I(y Z_T)] = x` by bisection in `ln y` over `[1e-10, 1e10]`.
pub fn budget_root(x: f64, market: &BondMarket, u: &UtilitySpec) -> Result<f64> {
    check_positive("x", x)?;
    let z = market.terminal_density();
    let (mut lo, mut hi) = (1e-10f64.ln(), 1e10f64.ln());
    let (b_lo, b_hi) = (budget(lo.exp(), &z, u), budget(hi.exp(), &z, u));
    if !(b_lo >= x && b_hi <= x) {
        return Err(Error::Bracketing(format!("budget {b_hi}..{b_lo} does not bracket x = {x}")));
    }
    // relative tolerance 1e-10 on y is an absolute one on ln y
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if budget(mid.exp(), &z, u) > x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

#[derive(Debug, Clone)]
pub struct OptimalWealth {
    pub y_hat: f64,
    pub wealth: Vec<f64>,
    /// `E[U(X̂)]`.
    pub utility: Estimate,
    /// `E[Z_T X̂]`.
    pub budget: Estimate,
}

impl OptimalWealth {
    /// `E[Z_T X̂] ∈ x (1 ± 3 SE)`.
    pub fn budget_feasible(&self, x: f64) -> bool {
        (self.budget.mean - x).abs() <= 3.0 * self.budget.se + 1e-12 * x
    }
}

/// `X̂ = I(ŷ Z_T)` with `ŷ` from [`budget_root`].
pub fn optimal_terminal_wealth(x: f64, market: &BondMarket, u: &UtilitySpec) -> Result<OptimalWealth> {
    let y_hat = budget_root(x, market, u)?;
    let z = market.terminal_density();
    let wealth: Vec<f64> = z.iter().map(|&z| u.inverse_marginal(y_hat * z)).collect();
    let utils: Vec<f64> = wealth.iter().map(|&w| u.value(w)).collect();
    let spent: Vec<f64> = wealth.iter().zip(&z).map(|(w, z)| w * z).collect();
    Ok(OptimalWealth {
        y_hat,
        utility: Estimate::from_samples(&utils),
        budget: Estimate::from_samples(&spent),
        wealth,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    /// `min_k [v(y_k) + x y_k]`.
    pub dual_bound: Estimate,
    pub y_at_min: f64,
    /// `|u − dual_bound|`.
    pub gap: f64,
    pub combined_se: f64,
    /// How far the grid minimum may sit above the true infimum, from the
    /// secant lines of the sampled convex curve.
    pub grid_resolution: f64,
    pub within: bool,
}

/// Compares a primal estimate with the dual bound `inf_y [v(y) + xy]` on a grid.
pub fn conjugacy_gap(
    x: f64,
    y_grid: &[f64],
    market: &BondMarket,
    u: &UtilitySpec,
    u_estimate: Estimate,
) -> Result<GapReport> {
    check_positive("x", x)?;
    if y_grid.len() < 2 {
        return Err(Error::InvalidParameter("y grid needs at least two points".into()));
    }
    let mut ys = y_grid.to_vec();
    ys.sort_by(f64::total_cmp);
    let vals: Vec<Estimate> = ys
        .iter()
        .map(|&y| dual_value(y, market, u).map(|v| Estimate { mean: v.mean + x * y, se: v.se }))
        .collect::<Result<_>>()?;
    let k = (0..vals.len()).min_by(|&a, &b| vals[a].mean.total_cmp(&vals[b].mean)).unwrap_or(0);
    let means: Vec<f64> = vals.iter().map(|v| v.mean).collect();
    let grid_resolution = means[k] - convex_lower_bound(&ys, &means, k);
    let best = vals[k];
    let gap = (u_estimate.mean - best.mean).abs();
    let se = combined_se(u_estimate.se, best.se);
    Ok(GapReport {
        dual_bound: best,
        y_at_min: ys[k],
        gap,
        combined_se: se,
        grid_resolution,
        within: gap <= 3.0 * se + grid_resolution,
    })
}

/// Lower bound on the minimum of a convex function near grid minimum `k`,
/// from the secants adjacent to the bracketing intervals.
fn convex_lower_bound(ys: &[f64], v: &[f64], k: usize) -> f64 {
    let n = ys.len();
    let slope = |i: usize| (v[i + 1] - v[i]) / (ys[i + 1] - ys[i]);
    let mut lower = v[k];
    // interval (y_{k-1}, y_k): bounded below by the secants on (y_{k-2}, y_{k-1}) and (y_k, y_{k+1})
    let mut check = |i: usize| {
        if i + 1 >= n {
            return;
        }
        let left = (i >= 1).then(|| (ys[i], v[i], slope(i - 1)));
        let right = (i + 2 < n).then(|| (ys[i + 1], v[i + 1], slope(i + 1)));
        let bound = match (left, right) {
            (Some((y0, v0, s0)), Some((y1, v1, s1))) if s1 > s0 => {
                let y = ((v1 - s1 * y1) - (v0 - s0 * y0)) / (s0 - s1);
                let y = y.clamp(y0, y1);
                (v0 + s0 * (y - y0)).max(v1 + s1 * (y - y1))
            }
            (Some((y0, v0, s0)), _) => v0 + s0.min(0.0) * (ys[i + 1] - y0),
            (_, Some((y1, v1, s1))) => v1 - s1.max(0.0) * (y1 - ys[i]),
            _ => v[i].min(v[i + 1]),
        };
        lower = lower.min(bound);
    };
    if k >= 1 {
        check(k - 1);
    }
    check(k);
    lower
}
