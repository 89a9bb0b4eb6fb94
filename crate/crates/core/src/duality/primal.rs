use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integration::{Leg, SimpleStrategy, Weight};
use crate::models::BondMarket;
use crate::paths::{PathFamily, ProcessPaths};
use crate::rng::{Purpose, ScenarioRng};
use crate::stats::{pairwise_sum, par_map, Estimate};

use super::utility::UtilitySpec;

/// Basis functions per bond: constant, `t / T`, standardized short rate,
/// standardized log discounted price.
pub const BASIS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Random restarts in addition to the seeded start.
    pub restarts: usize,
    pub restart_scale: f64,
    pub seed: u64,
    /// Leading scenarios used inside the optimizer loop; candidates are
    /// ranked on the full sample.
    pub optimizer_scenarios: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { max_iter: 300, grad_tol: 1e-7, restarts: 3, restart_scale: 0.5, seed: 0x0b7, optimizer_scenarios: 20_000 }
    }
}

/// Optimal proportional strategy for a finite set of bonds.
#[derive(Debug, Clone)]
pub struct PrimalResult {
    pub maturities: Vec<f64>,
    pub x: f64,
    /// Sample-average `E[U(x + (H·P̄)_T)]`.
    pub value: Estimate,
    /// `θ[b * BASIS + k]`.
    pub theta: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
    stats: BasisStats,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct BasisStats {
    horizon: f64,
    r_mean: f64,
    r_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PriceStats {
    mean: f64,
    sd: f64,
}

/// Per-step returns and basis inputs for the optimizer sample, laid out `[s][n][b]`.
struct Cache {
    count: usize,
    rate: Vec<f64>,
    ret: Vec<f64>,
    price: Vec<f64>,
}

struct Problem<'a> {
    market: &'a BondMarket,
    u: &'a UtilitySpec,
    x: f64,
    bonds: Vec<usize>,
    price_stats: Vec<PriceStats>,
    stats: BasisStats,
    cache: Option<Cache>,
}

fn mean_sd(sum: f64, sum2: f64, n: f64) -> (f64, f64) {
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0);
    let sd = var.sqrt();
    (mean, if sd > 1e-12 { sd } else { 1.0 })
}

impl<'a> Problem<'a> {
    fn new(market: &'a BondMarket, u: &'a UtilitySpec, x: f64, maturities: &[f64]) -> Result<Self> {
        let fam = &market.discounted;
        let bonds: Vec<usize> = maturities.iter().map(|&m| fam.maturity_grid().require(m)).collect::<Result<_>>()?;
        let ns = market.scenario_count();
        let steps = fam.time_grid().steps();
        let count = (ns * steps) as f64;
        let (mut rs, mut rs2) = (0.0, 0.0);
        for s in 0..ns {
            for &r in &market.short_rate.path(s)[..steps] {
                rs += r;
                rs2 += r * r;
            }
        }
        let (r_mean, r_sd) = mean_sd(rs, rs2, count);
        let price_stats = bonds
            .iter()
            .map(|&m| {
                let (mut a, mut b) = (0.0, 0.0);
                for s in 0..ns {
                    for n in 0..steps {
                        let l = fam.value(s, n, m).ln();
                        a += l;
                        b += l * l;
                    }
                }
                let (mean, sd) = mean_sd(a, b, count);
                PriceStats { mean, sd }
            })
            .collect();
        Ok(Self {
            market,
            u,
            x,
            bonds,
            price_stats,
            stats: BasisStats { horizon: fam.time_grid().horizon(), r_mean, r_sd },
            cache: None,
        })
    }

    fn with_cache(mut self, count: usize) -> Self {
        let fam = &self.market.discounted;
        let steps = fam.time_grid().steps();
        let nb = self.bonds.len();
        let count = count.min(self.market.scenario_count());
        let mut rate = Vec::with_capacity(count * steps);
        let mut ret = Vec::with_capacity(count * steps * nb);
        let mut price = Vec::with_capacity(count * steps * nb);
        for s in 0..count {
            for n in 0..steps {
                rate.push((self.market.short_rate.get(s, n) - self.stats.r_mean) / self.stats.r_sd);
                for (b, &m) in self.bonds.iter().enumerate() {
                    let p0 = fam.value(s, n, m);
                    ret.push(fam.value(s, n + 1, m) / p0 - 1.0);
                    price.push((p0.ln() - self.price_stats[b].mean) / self.price_stats[b].sd);
                }
            }
        }
        self.cache = Some(Cache { count, rate, ret, price });
        self
    }

    fn count(&self, cached: bool) -> usize {
        match (&self.cache, cached) {
            (Some(c), true) => c.count,
            _ => self.market.scenario_count(),
        }
    }

    fn wealth_cached(&self, c: &Cache, s: usize, theta: &[f64], grad: Option<&mut [f64]>) -> Option<f64> {
        let steps = self.market.times().steps();
        let nb = self.bonds.len();
        let pts = self.market.times().points();
        let mut log_w = self.x.ln();
        let mut g = grad;
        for n in 0..steps {
            let t = pts[n] / self.stats.horizon;
            let r = c.rate[s * steps + n];
            let base = (s * steps + n) * nb;
            let mut growth = 1.0;
            for b in 0..nb {
                let th = &theta[b * BASIS..(b + 1) * BASIS];
                let pi = th[0] + th[1] * t + th[2] * r + th[3] * c.price[base + b];
                growth += pi * c.ret[base + b];
            }
            if !(growth > 0.0) {
                return None;
            }
            log_w += growth.ln();
            if let Some(g) = g.as_deref_mut() {
                for b in 0..nb {
                    let k = c.ret[base + b] / growth;
                    let gb = &mut g[b * BASIS..(b + 1) * BASIS];
                    gb[0] += k;
                    gb[1] += k * t;
                    gb[2] += k * r;
                    gb[3] += k * c.price[base + b];
                }
            }
        }
        Some(log_w.exp())
    }

    fn dim(&self) -> usize {
        self.bonds.len() * BASIS
    }

    #[inline]
    fn basis(&self, s: usize, n: usize, b: usize, out: &mut [f64; BASIS]) {
        basis_values(
            &self.stats,
            &self.price_stats[b],
            self.market.times().points()[n],
            self.market.short_rate.get(s, n),
            self.market.discounted.value(s, n, self.bonds[b]),
            out,
        );
    }

    /// Terminal wealth of one scenario and, optionally, its `θ`-gradient of
    /// `ln W_T`. `None` when wealth is not strictly positive.
    fn wealth(&self, s: usize, theta: &[f64], grad: Option<&mut [f64]>) -> Option<f64> {
        let fam = &self.market.discounted;
        let steps = fam.time_grid().steps();
        let nb = self.bonds.len();
        let mut log_w = self.x.ln();
        let mut phi = [0.0; BASIS];
        let mut ret = vec![0.0; nb];
        let mut basis = vec![[0.0; BASIS]; nb];
        let mut g = grad;
        for n in 0..steps {
            let mut growth = 1.0;
            for b in 0..nb {
                let m = self.bonds[b];
                let p0 = fam.value(s, n, m);
                ret[b] = fam.value(s, n + 1, m) / p0 - 1.0;
                self.basis(s, n, b, &mut phi);
                basis[b] = phi;
                let pi: f64 = (0..BASIS).map(|k| theta[b * BASIS + k] * phi[k]).sum();
                growth += pi * ret[b];
            }
            if !(growth > 0.0) {
                return None;
            }
            log_w += growth.ln();
            if let Some(g) = g.as_deref_mut() {
                for b in 0..nb {
                    let c = ret[b] / growth;
                    for k in 0..BASIS {
                        g[b * BASIS + k] += c * basis[b][k];
                    }
                }
            }
        }
        Some(log_w.exp())
    }

    /// `(−J(θ), −∇J(θ))`, `J` the sample-average utility; `+∞` if infeasible.
    fn objective(&self, theta: &[f64], with_grad: bool, cached: bool) -> (f64, Vec<f64>) {
        const BLOCK: usize = 256;
        let ns = self.count(cached);
        let cache = self.cache.as_ref().filter(|_| cached);
        let dim = self.dim();
        let blocks = ns.div_ceil(BLOCK);
        let parts = par_map(blocks, |blk| {
            let mut total = Vec::with_capacity(BLOCK);
            let mut grad = vec![0.0; dim];
            let mut lg = vec![0.0; dim];
            for s in blk * BLOCK..((blk + 1) * BLOCK).min(ns) {
                lg.iter_mut().for_each(|v| *v = 0.0);
                let slot = if with_grad { Some(&mut lg[..]) } else { None };
                let w = match cache {
                    Some(c) => self.wealth_cached(c, s, theta, slot),
                    None => self.wealth(s, theta, slot),
                };
                let w = w?;
                let util = self.u.value(w);
                if !util.is_finite() {
                    return None;
                }
                total.push(util);
                if with_grad {
                    let scale = self.u.marginal(w) * w;
                    for (g, l) in grad.iter_mut().zip(&lg) {
                        *g += scale * l;
                    }
                }
            }
            Some((pairwise_sum(&total), grad))
        });
        let mut sums = Vec::with_capacity(blocks);
        let mut grad = vec![0.0; dim];
        for p in parts {
            let Some((v, g)) = p else { return (f64::INFINITY, vec![0.0; dim]) };
            sums.push(v);
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        let n = ns as f64;
        (-pairwise_sum(&sums) / n, grad.iter().map(|g| -g / n).collect())
    }

    fn samples(&self, theta: &[f64]) -> Vec<f64> {
        par_map(self.market.scenario_count(), |s| match self.wealth(s, theta, None) {
            Some(w) => self.u.value(w),
            None => f64::NEG_INFINITY,
        })
    }
}

fn basis_values(st: &BasisStats, ps: &PriceStats, t: f64, r: f64, price: f64, out: &mut [f64; BASIS]) {
    out[0] = 1.0;
    out[1] = t / st.horizon;
    out[2] = (r - st.r_mean) / st.r_sd;
    out[3] = (price.ln() - ps.mean) / ps.sd;
}

struct Outcome {
    theta: Vec<f64>,
    f: f64,
    iterations: usize,
    grad_norm: f64,
    trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS on `f` with Armijo backtracking.
fn bfgs(problem: &Problem, start: Vec<f64>, cfg: &OptimizerConfig) -> Outcome {
    let dim = start.len();
    let mut theta = start;
    let (mut f, mut g) = problem.objective(&theta, true, true);
    let mut h = vec![0.0; dim * dim];
    for i in 0..dim {
        h[i * dim + i] = 1.0;
    }
    let mut scaled = false;
    let mut trace = vec![f];
    let norm = |g: &[f64]| g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut iterations = 0;
    while iterations < cfg.max_iter && norm(&g) > cfg.grad_tol {
        iterations += 1;
        let mut p: Vec<f64> = (0..dim).map(|i| -dot(&h[i * dim..(i + 1) * dim], &g)).collect();
        let mut slope = dot(&p, &g);
        if slope >= 0.0 {
            // lost descent: restart from steepest descent
            h.iter_mut().enumerate().for_each(|(k, v)| *v = if k % (dim + 1) == 0 { 1.0 } else { 0.0 });
            p = g.iter().map(|v| -v).collect();
            slope = dot(&p, &g);
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let trial: Vec<f64> = theta.iter().zip(&p).map(|(t, d)| t + alpha * d).collect();
            let (ft, gt) = problem.objective(&trial, true, true);
            if ft.is_finite() && ft <= f + 1e-4 * alpha * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, ft, gt)) = accepted else { break };
        let s: Vec<f64> = trial.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if !scaled {
                let gamma = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= gamma);
                scaled = true;
            }
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..dim).map(|i| dot(&h[i * dim..(i + 1) * dim], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..dim {
                for j in 0..dim {
                    h[i * dim + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        let improvement = f - ft;
        theta = trial;
        f = ft;
        g = gt;
        trace.push(f);
        if improvement.abs() <= 1e-15 * (1.0 + f.abs()) {
            break;
        }
    }
    let grad_norm = norm(&g);
    Outcome { theta, f, iterations, grad_norm, trace }
}

/// Maximizes sample-average utility over proportional strategies in the
/// bonds `maturities`, starting from `start` (zero when absent) plus
/// `cfg.restarts` random perturbations of it. The reported value is the
/// best of these and never below the start's value.
pub fn primal_finite_bonds_from(
    maturities: &[f64],
    x: f64,
    market: &BondMarket,
    u: &UtilitySpec,
    cfg: &OptimizerConfig,
    start: Option<&[f64]>,
) -> Result<PrimalResult> {
    if maturities.is_empty() {
        return Err(Error::InvalidParameter("maturity set must be non-empty".into()));
    }
    if !(x > 0.0) {
        return Err(Error::InvalidParameter(format!("initial capital must be > 0 (got {x})")));
    }
    let problem = Problem::new(market, u, x, maturities)?.with_cache(cfg.optimizer_scenarios);
    let dim = problem.dim();
    let seed_theta = match start {
        Some(t) if t.len() == dim => t.to_vec(),
        Some(t) => return Err(Error::ShapeMismatch(format!("start has {} parameters, expected {dim}", t.len()))),
        None => vec![0.0; dim],
    };
    let first = bfgs(&problem, seed_theta.clone(), cfg);
    let mut candidates = vec![first];
    for r in 0..cfg.restarts {
        let mut rng = ScenarioRng::new(cfg.seed, r as u64, Purpose::Restarts);
        let init: Vec<f64> = seed_theta.iter().map(|t| t + cfg.restart_scale * rng.normal()).collect();
        if !problem.objective(&init, false, true).0.is_finite() {
            continue;
        }
        candidates.push(bfgs(&problem, init, cfg));
    }
    if candidates.iter().all(|c| c.grad_norm > cfg.grad_tol * 1e3) {
        let c = &candidates[0];
        return Err(Error::Optimizer { iterations: c.iterations, grad_norm: c.grad_norm, trace: c.trace.clone() });
    }
    // ranked on the full sample, the start included
    let mut best_f = problem.objective(&seed_theta, false, false).0;
    let seed_grad = candidates[0].grad_norm;
    let mut best = Outcome { theta: seed_theta, f: best_f, iterations: 0, grad_norm: seed_grad, trace: Vec::new() };
    for c in candidates {
        let f = problem.objective(&c.theta, false, false).0;
        if f < best_f {
            best_f = f;
            best = Outcome { f, ..c };
        }
    }
    let samples = problem.samples(&best.theta);
    Ok(PrimalResult {
        maturities: maturities.to_vec(),
        x,
        value: Estimate { mean: -best.f, se: Estimate::from_samples(&samples).se },
        theta: best.theta,
        iterations: best.iterations,
        grad_norm: best.grad_norm,
        stats: problem.stats,
    })
}

pub fn primal_finite_bonds(
    maturities: &[f64],
    x: f64,
    market: &BondMarket,
    u: &UtilitySpec,
    cfg: &OptimizerConfig,
) -> Result<PrimalResult> {
    primal_finite_bonds_from(maturities, x, market, u, cfg, None)
}

/// `u_j` along nested maturity sets, each optimization seeded with the
/// previous solution embedded (zero parameters for the added bonds).
pub fn primal_nested(
    sets: &[Vec<f64>],
    x: f64,
    market: &BondMarket,
    u: &UtilitySpec,
    cfg: &OptimizerConfig,
) -> Result<Vec<PrimalResult>> {
    let mut out: Vec<PrimalResult> = Vec::with_capacity(sets.len());
    for set in sets {
        let start = match out.last() {
            None => None,
            Some(prev) => {
                let mut theta = vec![0.0; set.len() * BASIS];
                for (b, m) in prev.maturities.iter().enumerate() {
                    let Some(pos) = set.iter().position(|x| (x - m).abs() < 1e-9) else {
                        return Err(Error::InvalidParameter(format!("maturity sets are not nested at {m}")));
                    };
                    theta[pos * BASIS..(pos + 1) * BASIS].copy_from_slice(&prev.theta[b * BASIS..(b + 1) * BASIS]);
                }
                Some(theta)
            }
        };
        let res = primal_finite_bonds_from(set, x, market, u, cfg, start.as_deref())?;
        out.push(res);
    }
    Ok(out)
}

impl PrimalResult {
    /// Unit holdings `h^b_n = π^b_n W̄_n / P̄^b_n` as table weights.
    pub fn strategy(&self, market: &BondMarket) -> Result<SimpleStrategy> {
        let dummy = UtilitySpec::log();
        let problem = Problem::new(market, &dummy, self.x, &self.maturities)?;
        let fam = &market.discounted;
        let nt = fam.time_grid().len();
        let nb = self.maturities.len();
        let rows = par_map(market.scenario_count(), |s| {
            let mut holdings = vec![vec![0.0; nt]; nb];
            let mut w = self.x;
            let mut phi = [0.0; BASIS];
            for n in 0..nt - 1 {
                let mut growth = 1.0;
                for (b, hold) in holdings.iter_mut().enumerate() {
                    let m = problem.bonds[b];
                    let p0 = fam.value(s, n, m);
                    problem.basis(s, n, b, &mut phi);
                    let pi: f64 = (0..BASIS).map(|k| self.theta[b * BASIS + k] * phi[k]).sum();
                    hold[n] = pi * w / p0;
                    growth += pi * (fam.value(s, n + 1, m) / p0 - 1.0);
                }
                w *= growth;
            }
            holdings
        });
        let mut legs = Vec::with_capacity(nb);
        for (b, &m) in self.maturities.iter().enumerate() {
            let data: Vec<f64> = rows.iter().flat_map(|r| r[b].iter().copied()).collect();
            let table = ProcessPaths::new(fam.time_grid().clone(), market.scenario_count(), data)?;
            legs.push(Leg { maturity: m, weight: Weight::Table(Arc::new(table)) });
        }
        debug_assert_eq!(self.stats, problem.stats);
        Ok(SimpleStrategy::new(legs))
    }
}
