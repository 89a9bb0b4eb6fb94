use std::sync::Arc;

use crate::error::{Error, Result};
use crate::models::BondMarket;
use crate::paths::PathFamily;
use crate::stats::{pairwise_sum, Estimate};

type Payoff = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Claim paid at the horizon, in discounted units, as a function of the
/// terminal discounted slice `P̄(T, ·)` and the bank account `B_T`.
#[derive(Clone)]
pub struct ClaimSpec {
    name: String,
    payoff: Payoff,
}

impl std::fmt::Debug for ClaimSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ClaimSpec({})", self.name)
    }
}

impl ClaimSpec {
    pub fn new(name: impl Into<String>, payoff: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), payoff: Arc::new(payoff) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant {c}"), move |_, _| c)
    }

    /// `P̄(T, T_m)` for maturity index `m`.
    pub fn forward(m: usize) -> Self {
        Self::new(format!("bond[{m}]"), move |slice, _| slice[m])
    }

    /// `(P(T, T_m) − K)⁺ / B_T`.
    pub fn zcb_call(m: usize, strike: f64) -> Self {
        Self::new(format!("call bond[{m}] K={strike}"), move |slice, bank| (slice[m] * bank - strike).max(0.0) / bank)
    }

    pub fn payoff(&self, slice: &[f64], bank: f64) -> f64 {
        (self.payoff)(slice, bank)
    }

    /// Terminal payoffs per scenario; errors on a negative value.
    pub fn terminal(&self, market: &BondMarket) -> Result<Vec<f64>> {
        let fam = &market.discounted;
        let last = fam.time_grid().len() - 1;
        let mut slice = vec![0.0; fam.maturity_grid().len()];
        let mut out = Vec::with_capacity(market.scenario_count());
        for s in 0..market.scenario_count() {
            fam.fill_slice(s, last, &mut slice);
            let v = self.payoff(&slice, market.bank.get(s, last));
            if !(v >= 0.0) {
                return Err(Error::NegativePayoff { scenario: s, value: v });
            }
            out.push(v);
        }
        Ok(out)
    }
}

/// Candidate martingale measures for the pricing sup.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum PricingMeasures {
    /// The single density of the simulated market.
    #[default]
    Complete,
    /// Market price of risk `λ + c·n(t)` for each loading `c`, with `n(t)` a
    /// unit vector orthogonal to the vols of every tradable bond.
    Orthogonal { tradables: Vec<f64>, loadings: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperrepResult {
    pub price: Estimate,
    /// One estimate per candidate measure, in configuration order.
    pub per_measure: Vec<Estimate>,
    /// Index of the maximizing measure.
    pub argmax: usize,
}

/// Self-normalized `Σ Z X / Σ Z` with a delta-method standard error.
fn weighted_mean(z: &[f64], x: &[f64]) -> Estimate {
    let n = z.len() as f64;
    let zx: Vec<f64> = z.iter().zip(x).map(|(a, b)| a * b).collect();
    let sz = pairwise_sum(z);
    let mean = pairwise_sum(&zx) / sz;
    let resid: Vec<f64> = z.iter().zip(x).map(|(a, b)| (a * (b - mean)).powi(2)).collect();
    let zbar = sz / n;
    let se = if z.len() > 1 { (pairwise_sum(&resid) / (n - 1.0)).sqrt() / zbar / n.sqrt() } else { 0.0 };
    Estimate { mean, se }
}

/// `sup_{ℙ*} E_{ℙ*}[X]` over the configured candidate measures.
pub fn superrep_price(claim: &ClaimSpec, market: &BondMarket, measures: &PricingMeasures) -> Result<SuperrepResult> {
    let x = claim.terminal(market)?;
    let per_measure = match measures {
        PricingMeasures::Complete => vec![weighted_mean(&market.terminal_density(), &x)],
        PricingMeasures::Orthogonal { tradables, loadings } => {
            if loadings.is_empty() {
                return Err(Error::InvalidParameter("no loadings configured".into()));
            }
            loadings
                .iter()
                .map(|&c| Ok(weighted_mean(&orthogonal_density(market, tradables, c)?, &x)))
                .collect::<Result<_>>()?
        }
    };
    let argmax = (0..per_measure.len()).max_by(|&a, &b| per_measure[a].mean.total_cmp(&per_measure[b].mean)).unwrap_or(0);
    Ok(SuperrepResult { price: per_measure[argmax], per_measure, argmax })
}

/// `E[Z_T X]` with the martingale controls `Z_T P̄(T, x) − P̄(0, x)` for the
/// given maturities and `Z_T − 1`, coefficients fitted by least squares.
pub fn control_variate_price(claim: &ClaimSpec, market: &BondMarket, controls: &[f64]) -> Result<Estimate> {
    let x = claim.terminal(market)?;
    let z = market.terminal_density();
    let fam = &market.discounted;
    let last = fam.time_grid().len() - 1;
    let ms: Vec<usize> = controls.iter().map(|&m| fam.maturity_grid().require(m)).collect::<Result<_>>()?;
    let ns = x.len();
    let k = ms.len() + 1;
    let ctrl = |s: usize, j: usize| -> f64 {
        if j == 0 {
            z[s] - 1.0
        } else {
            z[s] * fam.value(s, last, ms[j - 1]) - fam.value(s, 0, ms[j - 1])
        }
    };
    let y: Vec<f64> = (0..ns).map(|s| z[s] * x[s]).collect();
    let ybar = pairwise_sum(&y) / ns as f64;
    let cbar: Vec<f64> = (0..k).map(|j| (0..ns).map(|s| ctrl(s, j)).sum::<f64>() / ns as f64).collect();
    let mut a = vec![0.0; k * k];
    let mut b = vec![0.0; k];
    for s in 0..ns {
        let c: Vec<f64> = (0..k).map(|j| ctrl(s, j) - cbar[j]).collect();
        for i in 0..k {
            b[i] += c[i] * (y[s] - ybar);
            for j in 0..k {
                a[i * k + j] += c[i] * c[j];
            }
        }
    }
    let beta = solve_small(a, b, k);
    let adj: Vec<f64> = (0..ns).map(|s| y[s] - (0..k).map(|j| beta[j] * ctrl(s, j)).sum::<f64>()).collect();
    Ok(Estimate::from_samples(&adj))
}

/// Gaussian elimination with partial pivoting; near-singular pivots give zero coefficients.
fn solve_small(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Vec<f64> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let mut pivots = vec![true; n];
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs())).unwrap();
        if a[piv * n + col].abs() <= 1e-12 * scale {
            pivots[col] = false;
            continue;
        }
        for j in 0..n {
            a.swap(col * n + j, piv * n + j);
        }
        b.swap(col, piv);
        for i in col + 1..n {
            let f = a[i * n + col] / a[col * n + col];
            for j in col..n {
                a[i * n + j] -= f * a[col * n + j];
            }
            b[i] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        if !pivots[i] {
            continue;
        }
        let s: f64 = (i + 1..n).map(|j| a[i * n + j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i * n + i];
    }
    x
}

/// Unit vector orthogonal to the given vectors, from Gram–Schmidt over the
/// canonical basis; `None` when they span the space.
fn orthogonal_direction(vectors: &[Vec<f64>], d: usize) -> Option<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let project = |v: &[f64], basis: &[Vec<f64>]| {
        let mut w = v.to_vec();
        for b in basis {
            let c: f64 = w.iter().zip(b).map(|(a, b)| a * b).sum();
            w.iter_mut().zip(b).for_each(|(a, b)| *a -= c * b);
        }
        w
    };
    for v in vectors {
        let w = project(v, &basis);
        let n = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-12 {
            basis.push(w.iter().map(|a| a / n).collect());
        }
    }
    for k in 0..d {
        let mut e = vec![0.0; d];
        e[k] = 1.0;
        let w = project(&e, &basis);
        let n = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-6 {
            return Some(w.iter().map(|a| a / n).collect());
        }
    }
    None
}

/// `Z^c_T = exp(−Σ_n θ_n·ΔW_n − ½ Σ_n |θ_n|² Δt)` with `θ_n = λ + c n(t_n)`.
pub fn orthogonal_density(market: &BondMarket, tradables: &[f64], c: f64) -> Result<Vec<f64>> {
    let params = &market.params;
    let d = params.factors.len();
    let grid = market.times();
    let pts = grid.points();
    for &m in tradables {
        market.maturities().require(m)?;
    }
    let mut thetas = Vec::with_capacity(grid.steps());
    for n in 0..grid.steps() {
        let vols: Vec<Vec<f64>> =
            tradables.iter().filter(|&&m| m > pts[n]).map(|&m| params.bond_vol(pts[n], m)).collect();
        let dir = match orthogonal_direction(&vols, d) {
            Some(v) => v,
            None if c == 0.0 => vec![0.0; d],
            None => {
                return Err(Error::InvalidParameter(
                    "tradable bonds span every factor; no orthogonal measure exists".into(),
                ))
            }
        };
        thetas.push(params.lambda.iter().zip(&dir).map(|(l, v)| l + c * v).collect::<Vec<f64>>());
    }
    Ok((0..market.scenario_count())
        .map(|s| {
            let mut expo = 0.0;
            for (n, th) in thetas.iter().enumerate() {
                let dt = grid.dt(n);
                for k in 0..d {
                    let dw = market.brownian[k].get(s, n + 1) - market.brownian[k].get(s, n);
                    expo -= th[k] * dw + 0.5 * th[k] * th[k] * dt;
                }
            }
            expo.exp()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_direction_in_plane() {
        let v = orthogonal_direction(&[vec![1.0, 1.0]], 2).unwrap();
        assert!((v[0] + v[1]).abs() < 1e-12 && ((v[0] * v[0] + v[1] * v[1]) - 1.0).abs() < 1e-12);
        assert!(orthogonal_direction(&[vec![1.0, 0.0], vec![0.0, 2.0]], 2).is_none());
    }

    #[test]
    fn weighted_mean_of_constant() {
        let e = weighted_mean(&[0.5, 1.5, 1.0], &[2.0, 2.0, 2.0]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.se, 0.0);
    }
}
