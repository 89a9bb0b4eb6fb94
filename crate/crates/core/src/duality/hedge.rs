use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integration::{integrate_simple, Leg, SimpleStrategy, Weight};
use crate::models::BondMarket;
use crate::paths::{PathFamily, ProcessPaths};
use crate::stats::{pairwise_sum, Estimate};

use super::superrep::{superrep_price, ClaimSpec, PricingMeasures};

/// Functions of the standardized state `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HedgeBasis {
    /// `1, z, …, z^degree`.
    Poly(usize),
    /// Piecewise-linear hats on equally spaced knots over `[−3, 3]`.
    Hat(usize),
}

impl HedgeBasis {
    fn len(&self) -> usize {
        match *self {
            HedgeBasis::Poly(d) => d + 1,
            HedgeBasis::Hat(k) => k.max(2),
        }
    }

    fn eval(&self, z: f64, out: &mut [f64]) {
        match *self {
            HedgeBasis::Poly(_) => {
                let mut p = 1.0;
                for o in out.iter_mut() {
                    *o = p;
                    p *= z;
                }
            }
            HedgeBasis::Hat(_) => {
                let k = out.len();
                let h = 6.0 / (k - 1) as f64;
                let u = ((z.clamp(-3.0, 3.0) + 3.0) / h).min((k - 1) as f64);
                out.iter_mut().for_each(|o| *o = 0.0);
                let i = (u.floor() as usize).min(k - 2);
                let w = u - i as f64;
                out[i] = 1.0 - w;
                out[i + 1] = w;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedgeConfig {
    /// Hedge instruments; the state is `ln P̄(t, last) − ln P̄(t, first)`
    /// (`ln P̄(t, first)` for a single instrument).
    pub tradables: Vec<f64>,
    pub basis: HedgeBasis,
}

impl Default for HedgeConfig {
    fn default() -> Self {
        Self { tradables: vec![1.0, 5.0], basis: HedgeBasis::Hat(30) }
    }
}

#[derive(Debug, Clone)]
pub struct Superhedge {
    pub x0: f64,
    pub strategy: SimpleStrategy,
    /// `X − x0 − (H·P̄)_T` per scenario.
    pub errors: Vec<f64>,
    pub mean_abs_error: Estimate,
    /// `E[(X − x0 − (H·P̄)_T)⁺]`.
    pub shortfall: Estimate,
    /// Steps whose regression needed the ridge fallback.
    pub ridge_steps: usize,
}

/// Backward least-squares projection of the claim onto tradable-bond
/// increments, weighted by `Z_T`.
pub fn superhedge_strategy(claim: &ClaimSpec, market: &BondMarket, cfg: &HedgeConfig) -> Result<Superhedge> {
    if cfg.tradables.is_empty() {
        return Err(Error::InvalidParameter("superhedge needs at least one tradable".into()));
    }
    let fam = &market.discounted;
    let bonds: Vec<usize> = cfg.tradables.iter().map(|&m| fam.maturity_grid().require(m)).collect::<Result<_>>()?;
    let x = claim.terminal(market)?;
    let x0 = superrep_price(claim, market, &PricingMeasures::Complete)?.price.mean;
    let weights = market.terminal_density();
    let ns = market.scenario_count();
    let nt = fam.time_grid().len();
    let nb = bonds.len();
    let kb = cfg.basis.len();

    let mut holdings = vec![vec![0.0; ns * nt]; nb];
    let mut future = vec![0.0; ns];
    let mut ridge_steps = 0;
    let mut zs = vec![0.0; ns];
    let mut psi = vec![0.0; kb];
    for n in (0..nt - 1).rev() {
        for (s, z) in zs.iter_mut().enumerate() {
            let first = fam.value(s, n, bonds[0]).ln();
            *z = if nb > 1 { fam.value(s, n, bonds[nb - 1]).ln() - first } else { first };
        }
        let mean = pairwise_sum(&zs) / ns as f64;
        let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / ns as f64;
        let sd = var.sqrt();
        let k = if sd > 1e-12 * (1.0 + mean.abs()) { kb } else { 1 };
        // price columns are constant when the state is
        let extra = if k > 1 { nb } else { 0 };
        let p = k + extra + nb * k;
        let mut ata = vec![0.0; p * p];
        let mut aty = vec![0.0; p];
        let mut row = vec![0.0; p];
        let fill = |s: usize, row: &mut [f64], psi: &mut [f64]| {
            if k == 1 {
                psi[0] = 1.0;
            } else {
                cfg.basis.eval((zs[s] - mean) / sd, psi);
            }
            row[..k].copy_from_slice(&psi[..k]);
            for (b, &m) in bonds.iter().enumerate() {
                if extra > 0 {
                    row[k + b] = fam.value(s, n, m);
                }
                let dp = fam.value(s, n + 1, m) - fam.value(s, n, m);
                for j in 0..k {
                    row[k + extra + b * k + j] = psi[j] * dp;
                }
            }
        };
        let mut nz: Vec<usize> = Vec::with_capacity(p);
        for s in 0..ns {
            fill(s, &mut row, &mut psi);
            let w = weights[s];
            let y = x[s] - future[s];
            nz.clear();
            nz.extend((0..p).filter(|&i| row[i] != 0.0));
            for (a, &i) in nz.iter().enumerate() {
                let wi = w * row[i];
                aty[i] += wi * y;
                for &j in &nz[..=a] {
                    ata[i * p + j] += wi * row[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                ata[j * p + i] = ata[i * p + j];
            }
        }
        let (beta, ridged) = solve_normal(ata, aty, p);
        if ridged {
            ridge_steps += 1;
        }
        for s in 0..ns {
            fill(s, &mut row, &mut psi);
            for (b, &m) in bonds.iter().enumerate() {
                let h: f64 = (0..k).map(|j| beta[k + extra + b * k + j] * psi[j]).sum();
                holdings[b][s * nt + n] = h;
                future[s] += h * (fam.value(s, n + 1, m) - fam.value(s, n, m));
            }
        }
    }
    if ridge_steps > 0 {
        log::warn!("superhedge regression was singular at {ridge_steps} steps; used a ridge fallback");
    }
    let mut legs = Vec::with_capacity(nb);
    for (b, table) in holdings.into_iter().enumerate() {
        let table = ProcessPaths::new(fam.time_grid().clone(), ns, table)?;
        legs.push(Leg { maturity: cfg.tradables[b], weight: Weight::Table(Arc::new(table)) });
    }
    let strategy = SimpleStrategy::new(legs);
    let gains = integrate_simple(&strategy, fam)?.terminal();
    let errors: Vec<f64> = x.iter().zip(&gains).map(|(x, g)| x - x0 - g).collect();
    let abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    let short: Vec<f64> = errors.iter().map(|e| e.max(0.0)).collect();
    Ok(Superhedge {
        x0,
        strategy,
        mean_abs_error: Estimate::from_samples(&abs),
        shortfall: Estimate::from_samples(&short),
        errors,
        ridge_steps,
    })
}

/// Least squares from normal equations with column equilibration; adds a
/// ridge when the Cholesky factorization meets a vanishing pivot.
fn solve_normal(mut a: Vec<f64>, mut b: Vec<f64>, p: usize) -> (Vec<f64>, bool) {
    let scale: Vec<f64> = (0..p).map(|i| if a[i * p + i] > 0.0 { 1.0 / a[i * p + i].sqrt() } else { 0.0 }).collect();
    for i in 0..p {
        for j in 0..p {
            a[i * p + j] *= scale[i] * scale[j];
        }
        b[i] *= scale[i];
    }
    let active: Vec<usize> = (0..p).filter(|&i| scale[i] > 0.0).collect();
    let q = active.len();
    let sub: Vec<f64> = active.iter().flat_map(|&i| active.iter().map(move |&j| (i, j))).map(|(i, j)| a[i * p + j]).collect();
    let rhs: Vec<f64> = active.iter().map(|&i| b[i]).collect();
    let (sol, ridged) = match cholesky_solve(&sub, &rhs, q, 0.0) {
        Some(x) => (x, false),
        None => (cholesky_solve(&sub, &rhs, q, 1e-8).expect("ridge system is positive definite"), true),
    };
    let mut out = vec![0.0; p];
    for (k, &i) in active.iter().enumerate() {
        out[i] = sol[k] * scale[i];
    }
    (out, ridged)
}

fn cholesky_solve(a: &[f64], b: &[f64], n: usize, ridge: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j] + if i == j { ridge } else { 0.0 };
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 1e-11 {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hats_partition_unity() {
        let b = HedgeBasis::Hat(7);
        let mut out = vec![0.0; 7];
        for z in [-5.0, -3.0, -0.3, 0.0, 1.7, 3.0, 9.0] {
            b.eval(z, &mut out);
            assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn normal_solve_with_and_without_ridge() {
        let (x, r) = solve_normal(vec![4.0, 2.0, 2.0, 3.0], vec![2.0, 1.0], 2);
        assert!(!r && (x[0] - 0.5).abs() < 1e-12 && x[1].abs() < 1e-12);
        let (_, r) = solve_normal(vec![1.0, 1.0, 1.0, 1.0], vec![1.0, 1.0], 2);
        assert!(r);
    }
}
