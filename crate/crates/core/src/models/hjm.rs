//! Multi-factor Gaussian HJM bond market with exponential volatility loadings
//! `σ_k(t, T) = σ_{0,k} e^{−a_k (T − t)}`.
//!
//! Simulation is exact on the time grid: per step and factor, the triple
//! (OU state, its time integral, Brownian increment) is drawn from its joint
//! Gaussian law, so `P̄(·, T)` is a martingale under `ℙ*` in distribution and
//! `B_t = exp(∫ r)` carries no quadrature error.

use log::warn;

use crate::error::{Error, Result};
use crate::grid::{MaturityGrid, ScenarioSet, TimeGrid, NODE_TOL};
use crate::paths::{FamilyPaths, PathFamily, ProcessPaths};
use crate::rng::Purpose;
use crate::stats::{integrate, norm_cdf, par_map, Estimate};

/// `(1 − e^{−a τ}) / a`, continuous at `a = 0`.
pub fn decay_integral(a: f64, tau: f64) -> f64 {
    if a.abs() * tau.abs() < 1e-300 || a == 0.0 {
        tau
    } else {
        -(-a * tau).exp_m1() / a
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Factor {
    /// Volatility scale σ₀ (1/years per √year).
    pub sigma: f64,
    /// Decay a ≥ 0 (1/years).
    pub decay: f64,
}

impl Factor {
    pub fn forward_vol(&self, t: f64, maturity: f64) -> f64 {
        if maturity < t {
            0.0
        } else {
            self.sigma * (-self.decay * (maturity - t)).exp()
        }
    }

    /// Bond-price volatility `∫_t^T σ(t, u) du`.
    pub fn bond_vol(&self, t: f64, maturity: f64) -> f64 {
        if maturity <= t {
            0.0
        } else {
            self.sigma * decay_integral(self.decay, maturity - t)
        }
    }

    /// `y(t) = ∫_0^t σ(s, t)² ds`.
    fn variance_accrual(&self, t: f64) -> f64 {
        self.sigma * self.sigma * decay_integral(2.0 * self.decay, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCurve {
    Flat(f64),
    NelsonSiegel { beta0: f64, beta1: f64, beta2: f64, tau: f64 },
}

impl InitialCurve {
    pub fn forward(&self, t: f64) -> f64 {
        match *self {
            InitialCurve::Flat(r) => r,
            InitialCurve::NelsonSiegel { beta0, beta1, beta2, tau } => {
                let e = (-t / tau).exp();
                beta0 + beta1 * e + beta2 * (t / tau) * e
            }
        }
    }

    /// `∫_0^T f(0, u) du = −ln P(0, T)`.
    pub fn integrated(&self, t: f64) -> f64 {
        match *self {
            InitialCurve::Flat(r) => r * t,
            InitialCurve::NelsonSiegel { beta0, beta1, beta2, tau } => {
                let x = t / tau;
                let om = -(-x).exp_m1();
                beta0 * t + beta1 * tau * om + beta2 * (tau * om - t * (-x).exp())
            }
        }
    }

    pub fn discount(&self, t: f64) -> f64 {
        (-self.integrated(t)).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianHjmParams {
    pub factors: Vec<Factor>,
    pub curve: InitialCurve,
    /// Market price of risk, one entry per factor.
    pub lambda: Vec<f64>,
    pub horizon: f64,
    pub max_maturity: f64,
}

impl Default for GaussianHjmParams {
    fn default() -> Self {
        Self {
            factors: vec![Factor { sigma: 0.02, decay: 0.1 }, Factor { sigma: 0.015, decay: 1.0 }],
            curve: InitialCurve::Flat(0.03),
            lambda: vec![0.18, 0.24],
            horizon: 1.0,
            max_maturity: 5.0,
        }
    }
}

impl GaussianHjmParams {
    pub fn validate(&self) -> Result<()> {
        if self.factors.is_empty() {
            return Err(Error::InvalidParameter("at least one factor required".into()));
        }
        if self.lambda.len() != self.factors.len() {
            return Err(Error::InvalidParameter(format!(
                "lambda has {} entries for {} factors",
                self.lambda.len(),
                self.factors.len()
            )));
        }
        for f in &self.factors {
            if !f.sigma.is_finite() || !(f.decay >= 0.0) || !f.decay.is_finite() {
                return Err(Error::InvalidParameter(format!("bad factor {f:?}")));
            }
        }
        if self.lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidParameter("lambda must be finite".into()));
        }
        if !(self.horizon > 0.0) || !(self.horizon <= self.max_maturity) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < horizon <= max maturity (got {}, {})",
                self.horizon, self.max_maturity
            )));
        }
        Ok(())
    }

    pub fn lambda_norm_sq(&self) -> f64 {
        self.lambda.iter().map(|l| l * l).sum()
    }

    /// Bond volatility vector `Σ̃(t, T)` (one entry per factor).
    pub fn bond_vol(&self, t: f64, maturity: f64) -> Vec<f64> {
        self.factors.iter().map(|f| f.bond_vol(t, maturity)).collect()
    }

    /// Time-`t` bond price from the factor states.
    pub fn bond_price(&self, t: f64, maturity: f64, states: &[f64]) -> f64 {
        let mut expo = self.curve.integrated(t) - self.curve.integrated(maturity);
        for (f, x) in self.factors.iter().zip(states) {
            let b = decay_integral(f.decay, maturity - t);
            expo -= b * x + 0.5 * b * b * f.variance_accrual(t);
        }
        expo.exp()
    }
}

/// Simulated bond market on a time grid and maturity grid.
#[derive(Debug, Clone)]
pub struct BondMarket {
    pub prices: FamilyPaths,
    pub discounted: FamilyPaths,
    pub bank: ProcessPaths,
    pub short_rate: ProcessPaths,
    /// `Z_t = dℙ*/dℙ |_{F_t}`.
    pub density: ProcessPaths,
    /// Driving ℙ-Brownian motions, one per factor.
    pub brownian: Vec<ProcessPaths>,
    pub params: GaussianHjmParams,
    pub scenarios: ScenarioSet,
}

impl BondMarket {
    pub fn times(&self) -> &TimeGrid {
        self.prices.time_grid()
    }

    pub fn maturities(&self) -> &MaturityGrid {
        self.prices.maturity_grid()
    }

    pub fn scenario_count(&self) -> usize {
        self.scenarios.count
    }

    pub fn terminal_density(&self) -> Vec<f64> {
        self.density.terminal()
    }

    /// Time-sliced means of `Z_t P̄(t, T_m)`.
    pub fn density_weighted_means(&self, m: usize) -> Vec<Estimate> {
        let nt = self.times().len();
        (0..nt)
            .map(|n| {
                let xs: Vec<f64> = (0..self.scenario_count())
                    .map(|s| self.density.get(s, n) * self.discounted.value(s, n, m))
                    .collect();
                Estimate::from_samples(&xs)
            })
            .collect()
    }
}

/// Per-step moments of (x_{n+1}, ∫ x, ΔW) for one factor.
#[derive(Debug, Clone, Copy)]
struct StepLaw {
    decay_factor: f64,
    state_to_integral: f64,
    mean_x: f64,
    mean_i: f64,
    chol: [[f64; 3]; 3],
}

fn step_law(f: &Factor, lambda: f64, t0: f64, t1: f64) -> StepLaw {
    let a = f.decay;
    let sig = f.sigma;
    let dt = t1 - t0;
    let drift = |s: f64| f.variance_accrual(s) + sig * lambda;
    let mean_x = integrate(|s| (-a * (t1 - s)).exp() * drift(s), t0, t1);
    let mean_i = integrate(|s| decay_integral(a, t1 - s) * drift(s), t0, t1);
    let cxx = sig * sig * integrate(|u| (-2.0 * a * u).exp(), 0.0, dt);
    let cii = sig * sig * integrate(|u| decay_integral(a, u).powi(2), 0.0, dt);
    let cxi = sig * sig * integrate(|u| (-a * u).exp() * decay_integral(a, u), 0.0, dt);
    let cxw = sig * integrate(|u| (-a * u).exp(), 0.0, dt);
    let ciw = sig * integrate(|u| decay_integral(a, u), 0.0, dt);
    let cov = [[cxx, cxi, cxw], [cxi, cii, ciw], [cxw, ciw, dt]];
    StepLaw {
        decay_factor: (-a * dt).exp(),
        state_to_integral: decay_integral(a, dt),
        mean_x,
        mean_i,
        chol: cholesky3(cov),
    }
}

/// Lower Cholesky factor; zero pivots (degenerate directions) give zero columns.
fn cholesky3(c: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut l = [[0.0; 3]; 3];
    let scale = c[0][0].abs().max(c[1][1].abs()).max(c[2][2].abs()).max(f64::MIN_POSITIVE);
    for i in 0..3 {
        for j in 0..=i {
            let mut sum = c[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                l[i][i] = if sum > 1e-14 * scale { sum.sqrt() } else { 0.0 };
            } else {
                l[i][j] = if l[j][j] > 0.0 { sum / l[j][j] } else { 0.0 };
            }
        }
    }
    l
}

struct ScenarioPaths {
    prices: Vec<f64>,
    bank: Vec<f64>,
    short_rate: Vec<f64>,
    density: Vec<f64>,
    brownian: Vec<Vec<f64>>,
}

const BLOCK: usize = 4096;

/// Simulates the market under ℙ and applies the after-maturity convention.
pub fn gen_gaussian_market(
    params: &GaussianHjmParams,
    times: &TimeGrid,
    maturities: &MaturityGrid,
    scenarios: ScenarioSet,
) -> Result<BondMarket> {
    params.validate()?;
    if (times.horizon() - params.horizon).abs() > NODE_TOL {
        return Err(Error::InvalidParameter(format!(
            "time grid ends at {} but horizon is {}",
            times.horizon(),
            params.horizon
        )));
    }
    if maturities.last() > params.max_maturity + NODE_TOL {
        return Err(Error::InvalidParameter(format!(
            "maturity {} beyond max maturity {}",
            maturities.last(),
            params.max_maturity
        )));
    }
    let d = params.factors.len();
    let nt = times.len();
    let nm = maturities.len();
    let pts = times.points();
    let laws: Vec<Vec<StepLaw>> = (0..times.steps())
        .map(|n| {
            params
                .factors
                .iter()
                .zip(&params.lambda)
                .map(|(f, &l)| step_law(f, l, pts[n], pts[n + 1]))
                .collect()
        })
        .collect();
    let lam2 = params.lambda_norm_sq();

    let simulate = |s: usize| -> ScenarioPaths {
        let mut rng = scenarios.rng(s, Purpose::Brownian);
        let mut x = vec![0.0; d];
        let mut integ = vec![0.0; d];
        let mut w = vec![0.0; d];
        let mut out = ScenarioPaths {
            prices: vec![0.0; nt * nm],
            bank: vec![0.0; nt],
            short_rate: vec![0.0; nt],
            density: vec![0.0; nt],
            brownian: vec![vec![0.0; nt]; d],
        };
        for n in 0..nt {
            let t = pts[n];
            if n > 0 {
                for k in 0..d {
                    let law = &laws[n - 1][k];
                    let z = [rng.normal(), rng.normal(), rng.normal()];
                    let l = &law.chol;
                    let ex = l[0][0] * z[0];
                    let ei = l[1][0] * z[0] + l[1][1] * z[1];
                    let ew = l[2][0] * z[0] + l[2][1] * z[1] + l[2][2] * z[2];
                    integ[k] += x[k] * law.state_to_integral + law.mean_i + ei;
                    x[k] = x[k] * law.decay_factor + law.mean_x + ex;
                    w[k] += ew;
                }
            }
            let log_bank = params.curve.integrated(t) + integ.iter().sum::<f64>();
            out.bank[n] = log_bank.exp();
            out.short_rate[n] = params.curve.forward(t) + x.iter().sum::<f64>();
            let lw: f64 = params.lambda.iter().zip(&w).map(|(l, w)| l * w).sum();
            out.density[n] = (-lw - 0.5 * lam2 * t).exp();
            for k in 0..d {
                out.brownian[k][n] = w[k];
            }
            for (m, &mat) in maturities.points().iter().enumerate() {
                out.prices[n * nm + m] = if (mat - t).abs() <= NODE_TOL {
                    1.0
                } else if mat > t {
                    params.bond_price(t, mat, &x)
                } else {
                    // overwritten by the after-maturity convention
                    1.0
                };
            }
        }
        out
    };

    let count = scenarios.count;
    let mut prices = vec![0.0; count * nt * nm];
    let mut bank = vec![0.0; count * nt];
    let mut short_rate = vec![0.0; count * nt];
    let mut density = vec![0.0; count * nt];
    let mut brownian = vec![vec![0.0; count * nt]; d];
    let mut start = 0;
    while start < count {
        let len = BLOCK.min(count - start);
        let rows = par_map(len, |i| simulate(start + i));
        for (i, row) in rows.into_iter().enumerate() {
            let s = start + i;
            prices[s * nt * nm..(s + 1) * nt * nm].copy_from_slice(&row.prices);
            bank[s * nt..(s + 1) * nt].copy_from_slice(&row.bank);
            short_rate[s * nt..(s + 1) * nt].copy_from_slice(&row.short_rate);
            density[s * nt..(s + 1) * nt].copy_from_slice(&row.density);
            for k in 0..d {
                brownian[k][s * nt..(s + 1) * nt].copy_from_slice(&row.brownian[k]);
            }
        }
        start += len;
    }

    let check = |v: &[f64], width: usize| -> Result<()> {
        if let Some(k) = v.iter().position(|x| !x.is_finite()) {
            let per = nt * width;
            return Err(Error::NonFinite { scenario: k / per, step: (k % per) / width, maturity: k % width });
        }
        Ok(())
    };
    check(&prices, nm)?;
    check(&bank, 1)?;
    check(&short_rate, 1)?;
    check(&density, 1)?;

    let bank = ProcessPaths::new(times.clone(), count, bank)?;
    let prices = FamilyPaths::from_parts_unchecked(times.clone(), maturities.clone(), count, true, prices);
    let discounted = prices.clone();
    let market = BondMarket {
        prices,
        discounted,
        bank,
        short_rate: ProcessPaths::new(times.clone(), count, short_rate)?,
        density: ProcessPaths::new(times.clone(), count, density)?,
        brownian: brownian
            .into_iter()
            .map(|b| ProcessPaths::new(times.clone(), count, b))
            .collect::<Result<_>>()?,
        params: params.clone(),
        scenarios,
    };
    Ok(extend_after_maturity(market))
}

/// Time index at which maturity `x` is reached, snapping to the nearest node.
fn maturity_time_index(times: &TimeGrid, x: f64) -> Option<usize> {
    if x > times.horizon() + NODE_TOL {
        return None;
    }
    let j = times.nearest(x);
    if (times.points()[j] - x).abs() > NODE_TOL {
        warn!("maturity {x} is not on the time grid; using t = {}", times.points()[j]);
    }
    Some(j)
}

/// After maturity the bond rolls into the bank account:
/// `P(t, T) = B_t / B_T` and `P̄(t, T) = 1 / B_T` for `t > T`.
/// Recomputes `P̄ = P / B` before maturity. Idempotent.
pub fn extend_after_maturity(mut market: BondMarket) -> BondMarket {
    let times = market.times().clone();
    let nt = times.len();
    let mats: Vec<Option<usize>> =
        market.maturities().points().iter().map(|&x| maturity_time_index(&times, x)).collect();
    let nm = mats.len();
    let count = market.scenario_count();
    let bank = market.bank.clone();
    {
        let p = market.prices.data_mut();
        for s in 0..count {
            let b = bank.path(s);
            for (m, j) in mats.iter().enumerate() {
                if let Some(j) = *j {
                    p[(s * nt + j) * nm + m] = 1.0;
                    for n in j + 1..nt {
                        p[(s * nt + n) * nm + m] = b[n] / b[j];
                    }
                }
            }
        }
    }
    let mut disc = market.prices.clone();
    {
        let pb = disc.data_mut();
        for s in 0..count {
            let b = bank.path(s);
            for n in 0..nt {
                for (m, j) in mats.iter().enumerate() {
                    let k = (s * nt + n) * nm + m;
                    pb[k] = match *j {
                        Some(j) if n >= j => 1.0 / b[j],
                        _ => pb[k] / b[n],
                    };
                }
            }
        }
    }
    market.discounted = disc;
    market
}

/// Forward rates `f(t, T) = −∂ ln P(t, T)/∂T` by second-order finite
/// differences in maturity, and the short rate `r(t) = f(t, t)` read off the
/// diagonal by linear interpolation in maturity.
pub fn forward_rates(market: &BondMarket) -> Result<(FamilyPaths, ProcessPaths)> {
    let mats = market.maturities().points().to_vec();
    if mats.len() < 2 {
        return Err(Error::InvalidParameter("forward rates need at least 2 maturities".into()));
    }
    let p = &market.prices;
    if let Some(k) = p.data().iter().position(|v| !(*v > 0.0)) {
        let nm = mats.len();
        let nt = market.times().len();
        return Err(Error::NonFinite { scenario: k / (nt * nm), step: (k / nm) % nt, maturity: k % nm });
    }
    let nm = mats.len();
    let deriv = |y: &[f64], m: usize| -> f64 {
        if nm == 2 {
            return (y[1] - y[0]) / (mats[1] - mats[0]);
        }
        let (i0, i1, i2) = if m == 0 {
            (0, 1, 2)
        } else if m == nm - 1 {
            (nm - 3, nm - 2, nm - 1)
        } else {
            (m - 1, m, m + 1)
        };
        let (x0, x1, x2) = (mats[i0], mats[i1], mats[i2]);
        let x = mats[m];
        // derivative of the quadratic through the three points, at x
        let l0 = (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2));
        let l1 = (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2));
        let l2 = (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1));
        l0 * y[i0] + l1 * y[i1] + l2 * y[i2]
    };
    let nt = market.times().len();
    let mut fwd = vec![0.0; p.scenarios() * nt * nm];
    let mut slice = vec![0.0; nm];
    for s in 0..p.scenarios() {
        for n in 0..nt {
            p.fill_slice(s, n, &mut slice);
            let logs: Vec<f64> = slice.iter().map(|v| v.ln()).collect();
            for m in 0..nm {
                fwd[(s * nt + n) * nm + m] = -deriv(&logs, m);
            }
        }
    }
    let fam = FamilyPaths::new(market.times().clone(), market.maturities().clone(), p.scenarios(), false, fwd)?;
    let pts = market.times().points();
    let short = ProcessPaths::from_fn(market.times().clone(), p.scenarios(), |s, n| {
        let t = pts[n];
        let j = mats.partition_point(|&x| x < t).clamp(1, nm - 1);
        let w = (t - mats[j - 1]) / (mats[j] - mats[j - 1]);
        (1.0 - w) * fam.value(s, n, j - 1) + w * fam.value(s, n, j)
    });
    Ok((fam, short))
}

/// Closed forms of the Gaussian model used as oracles.
pub mod analytic {
    use super::*;

    /// Black-type price at time 0 of a call expiring at `expiry` on the bond
    /// maturing at `maturity`, with discounted payoff `(P(T, T*) − K)⁺ / B_T`.
    pub fn zcb_call(params: &GaussianHjmParams, expiry: f64, maturity: f64, strike: f64) -> f64 {
        let total_var: f64 = params
            .factors
            .iter()
            .map(|f| {
                let b = decay_integral(f.decay, maturity - expiry);
                f.sigma * f.sigma * b * b * decay_integral(2.0 * f.decay, expiry)
            })
            .sum();
        let p_mat = params.curve.discount(maturity);
        let p_exp = params.curve.discount(expiry);
        if total_var <= 0.0 {
            return (p_mat - strike * p_exp).max(0.0);
        }
        let v = total_var.sqrt();
        let d1 = ((p_mat / (strike * p_exp)).ln() + 0.5 * total_var) / v;
        p_mat * norm_cdf(d1) - strike * p_exp * norm_cdf(d1 - v)
    }

    /// Optimal expected log growth `∫_0^T (Σ̃(t, T*)·λ)² / (2 |Σ̃(t, T*)|²) dt`
    /// when only the bond maturing at `maturity` is traded.
    pub fn single_bond_log_growth(params: &GaussianHjmParams, maturity: f64) -> f64 {
        integrate(
            |t| {
                let v = params.bond_vol(t, maturity);
                let dot: f64 = v.iter().zip(&params.lambda).map(|(a, b)| a * b).sum();
                let norm: f64 = v.iter().map(|a| a * a).sum();
                if norm > 0.0 {
                    0.5 * dot * dot / norm
                } else {
                    0.0
                }
            },
            0.0,
            params.horizon,
        )
    }

    /// Optimal expected log growth `|λ|² T / 2` in the complete market.
    pub fn complete_log_growth(params: &GaussianHjmParams) -> f64 {
        0.5 * params.lambda_norm_sq() * params.horizon
    }

    /// Variance of `ln P̄(t1, T) − ln P̄(t0, T)`: `∫_{t0}^{t1} |Σ̃(s, T)|² ds`.
    pub fn log_discounted_increment_variance(params: &GaussianHjmParams, t0: f64, t1: f64, maturity: f64) -> f64 {
        integrate(
            |s| params.bond_vol(s, maturity).iter().map(|v| v * v).sum::<f64>(),
            t0,
            t1,
        )
    }
}
