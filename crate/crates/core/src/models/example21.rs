//! Martingales `M^i_t = (t ∧ T_i)/i² − 1{t ≥ T_i}` with `T_i ~ Exp(mean i²)`,
//! placed at maturities `x_i = 1 − 1/i` and interpolated linearly in between,
//! with `M^x = 0` at `x = 1`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{MaturityGrid, ScenarioSet, TimeGrid, NODE_TOL};
use crate::paths::PathFamily;
use crate::rng::Purpose;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example21Params {
    pub n_max: usize,
    pub horizon: f64,
}

impl Example21Params {
    pub fn validate(&self) -> Result<()> {
        if self.n_max < 2 {
            return Err(Error::InvalidParameter(format!("n_max >= 2 required (got {})", self.n_max)));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidParameter("horizon must be > 0".into()));
        }
        Ok(())
    }
}

/// Maturity of the `i`-th base martingale, `i >= 1`.
pub fn example21_node(i: usize) -> f64 {
    1.0 - 1.0 / i as f64
}

/// Grid holding `x_1 .. x_{n_max}`, the point 1, and any extra points in `[0, 1]`.
pub fn example21_maturity_grid(n_max: usize, extra: &[f64]) -> Result<MaturityGrid> {
    let nodes: Vec<f64> = (1..=n_max).map(example21_node).chain(std::iter::once(1.0)).collect();
    MaturityGrid::union(&[&nodes, extra])
}

/// Where a grid maturity sits between base nodes. Node index 0 stands for `x = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Bracket {
    lo: usize,
    hi: usize,
    weight: f64,
}

/// Lazily evaluated example21 family; stores one jump time per base martingale and scenario.
#[derive(Debug, Clone)]
pub struct Example21Family {
    params: Example21Params,
    times: TimeGrid,
    maturities: MaturityGrid,
    scenarios: ScenarioSet,
    jumps: Arc<Vec<f64>>,
    brackets: Vec<Bracket>,
}

/// Samples the jump times and validates that every node `x_i, i <= n_max`, is on the grid.
pub fn gen_example21(
    params: Example21Params,
    times: &TimeGrid,
    maturities: &MaturityGrid,
    scenarios: ScenarioSet,
) -> Result<Example21Family> {
    params.validate()?;
    if maturities.first() < 0.0 || maturities.last() > 1.0 + NODE_TOL {
        return Err(Error::InvalidGrid("example21 maturities must lie in [0, 1]".into()));
    }
    let missing: Vec<f64> = (1..=params.n_max)
        .map(example21_node)
        .filter(|&x| maturities.index_of(x).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingNodes(missing));
    }
    let brackets = maturities.points().iter().map(|&x| bracket(x, params.n_max)).collect();
    let n_max = params.n_max;
    let mut jumps = Vec::with_capacity(scenarios.count * n_max);
    for s in 0..scenarios.count {
        let mut rng = scenarios.rng(s, Purpose::Example21);
        for i in 1..=n_max {
            jumps.push(rng.exponential((i * i) as f64));
        }
    }
    Ok(Example21Family {
        params,
        times: times.clone(),
        maturities: maturities.clone(),
        scenarios,
        jumps: Arc::new(jumps),
        brackets,
    })
}

fn bracket(x: f64, n_max: usize) -> Bracket {
    // nodes x_i increase with i; x_i <= x < x_{i+1}
    for i in 1..=n_max {
        if (x - example21_node(i)).abs() <= NODE_TOL {
            return Bracket { lo: i, hi: i, weight: 0.0 };
        }
    }
    if (x - 1.0).abs() <= NODE_TOL {
        return Bracket { lo: 0, hi: 0, weight: 0.0 };
    }
    let mut lo = 1;
    while lo < n_max && example21_node(lo + 1) < x {
        lo += 1;
    }
    let (x_lo, x_hi, hi) = if lo == n_max {
        (example21_node(n_max), 1.0, 0)
    } else {
        (example21_node(lo), example21_node(lo + 1), lo + 1)
    };
    Bracket { lo, hi, weight: (x - x_lo) / (x_hi - x_lo) }
}

impl Example21Family {
    pub fn params(&self) -> Example21Params {
        self.params
    }

    pub fn scenario_set(&self) -> ScenarioSet {
        self.scenarios
    }

    /// Jump time `T_i` in scenario `s`.
    pub fn jump_time(&self, s: usize, i: usize) -> f64 {
        self.jumps[s * self.params.n_max + i - 1]
    }

    /// Closed form `M^i_t`; `i = 0` is the zero process at `x = 1`.
    pub fn base(&self, s: usize, i: usize, t: f64) -> f64 {
        if i == 0 {
            return 0.0;
        }
        let ti = self.jump_time(s, i);
        let sq = (i * i) as f64;
        t.min(ti) / sq - if t >= ti { 1.0 } else { 0.0 }
    }

    /// Maturity-grid index of node `x_i`.
    pub fn node_index(&self, i: usize) -> usize {
        self.maturities.index_of(example21_node(i)).expect("node validated at generation")
    }

    fn interpolated(&self, s: usize, t: f64, b: Bracket) -> f64 {
        if b.lo == b.hi {
            self.base(s, b.lo, t)
        } else {
            (1.0 - b.weight) * self.base(s, b.lo, t) + b.weight * self.base(s, b.hi, t)
        }
    }
}

impl PathFamily for Example21Family {
    fn time_grid(&self) -> &TimeGrid {
        &self.times
    }

    fn maturity_grid(&self) -> &MaturityGrid {
        &self.maturities
    }

    fn scenarios(&self) -> usize {
        self.scenarios.count
    }

    fn value(&self, s: usize, n: usize, m: usize) -> f64 {
        self.interpolated(s, self.times.points()[n], self.brackets[m])
    }

    fn fill_path(&self, s: usize, m: usize, out: &mut [f64]) {
        let b = self.brackets[m];
        for (o, &t) in out.iter_mut().zip(self.times.points()) {
            *o = self.interpolated(s, t, b);
        }
    }
}

/// Perturbed family `M^k`: equal to `M^x` for `x <= x_k`, zero for
/// `x >= x_{k+1}`, linear in between. Shares the base draws.
#[derive(Debug, Clone)]
pub struct Example22Family {
    base: Example21Family,
    k: usize,
    weights: Vec<Option<f64>>,
}

pub fn gen_example22_perturbed(base: &Example21Family, k: usize) -> Result<Example22Family> {
    if k == 0 || k >= base.params.n_max {
        return Err(Error::OutOfRange(format!("k must satisfy 1 <= k < n_max = {} (got {k})", base.params.n_max)));
    }
    let (xk, xk1) = (example21_node(k), example21_node(k + 1));
    // None: keep the base value; Some(w): (1 - w) M^k
    let weights = base
        .maturities
        .points()
        .iter()
        .map(|&x| {
            if x <= xk + NODE_TOL {
                None
            } else if x >= xk1 - NODE_TOL {
                Some(1.0)
            } else {
                Some((x - xk) / (xk1 - xk))
            }
        })
        .collect();
    Ok(Example22Family { base: base.clone(), k, weights })
}

impl Example22Family {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn base(&self) -> &Example21Family {
        &self.base
    }
}

impl PathFamily for Example22Family {
    fn time_grid(&self) -> &TimeGrid {
        &self.base.times
    }

    fn maturity_grid(&self) -> &MaturityGrid {
        &self.base.maturities
    }

    fn scenarios(&self) -> usize {
        self.base.scenarios.count
    }

    fn value(&self, s: usize, n: usize, m: usize) -> f64 {
        match self.weights[m] {
            None => self.base.value(s, n, m),
            Some(w) if w >= 1.0 => 0.0,
            Some(w) => (1.0 - w) * self.base.base(s, self.k, self.base.times.points()[n]),
        }
    }

    fn fill_path(&self, s: usize, m: usize, out: &mut [f64]) {
        match self.weights[m] {
            None => self.base.fill_path(s, m, out),
            Some(w) if w >= 1.0 => out.fill(0.0),
            Some(w) => {
                for (o, &t) in out.iter_mut().zip(self.base.times.points()) {
                    *o = (1.0 - w) * self.base.base(s, self.k, t);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::family_column;

    fn family(n_max: usize, scen: usize) -> Example21Family {
        let tg = TimeGrid::uniform(1.0, 16).unwrap();
        let mg = example21_maturity_grid(n_max, &[0.3, 0.55, 0.95]).unwrap();
        gen_example21(Example21Params { n_max, horizon: 1.0 }, &tg, &mg, ScenarioSet::new(scen, 11).unwrap()).unwrap()
    }

    #[test]
    fn missing_nodes_are_listed() {
        let tg = TimeGrid::uniform(1.0, 4).unwrap();
        let mg = MaturityGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let err = gen_example21(Example21Params { n_max: 3, horizon: 1.0 }, &tg, &mg, ScenarioSet::new(1, 1).unwrap())
            .unwrap_err();
        match err {
            Error::MissingNodes(v) => {
                assert_eq!(v.len(), 1);
                assert!((v[0] - 2.0 / 3.0).abs() < 1e-15);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn n_max_one_rejected() {
        assert!(Example21Params { n_max: 1, horizon: 1.0 }.validate().is_err());
    }

    #[test]
    fn first_martingale_before_jump_is_t() {
        let f = family(4, 200);
        let s = (0..200).find(|&s| f.jump_time(s, 1) > 1.0).expect("some T_1 > 1");
        let col = family_column(&f, f.node_index(1));
        for (v, t) in col.path(s).iter().zip(f.time_grid().points()) {
            assert_eq!(v, t);
        }
    }

    #[test]
    fn jump_size_at_first_grid_time_after_jump() {
        let f = family(4, 500);
        let pts = f.time_grid().points();
        for s in 0..500 {
            for i in 1..=4 {
                let ti = f.jump_time(s, i);
                if let Some(n) = pts.iter().position(|&t| t >= ti) {
                    if n == 0 {
                        continue;
                    }
                    let sq = (i * i) as f64;
                    let jump = f.base(s, i, pts[n]) - f.base(s, i, pts[n - 1]);
                    let expected = (ti - pts[n - 1]) / sq - 1.0;
                    assert!((jump - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn interpolation_and_endpoint() {
        let f = family(4, 3);
        let m1 = f.maturity_grid().require(1.0).unwrap();
        let m = f.maturity_grid().require(0.55).unwrap();
        for s in 0..3 {
            for n in 0..f.time_grid().len() {
                assert_eq!(f.value(s, n, m1), 0.0);
                let t = f.time_grid().points()[n];
                let w = (0.55 - 0.5) / (2.0 / 3.0 - 0.5);
                let expect = (1.0 - w) * f.base(s, 2, t) + w * f.base(s, 3, t);
                assert!((f.value(s, n, m) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn perturbation_structure() {
        let f = family(6, 20);
        let p = gen_example22_perturbed(&f, 3).unwrap();
        assert!(gen_example22_perturbed(&f, 6).is_err());
        let grid = f.maturity_grid().points().to_vec();
        for (m, &x) in grid.iter().enumerate() {
            for s in 0..20 {
                for n in 0..f.time_grid().len() {
                    if x <= example21_node(3) + 1e-12 {
                        assert_eq!(p.value(s, n, m).to_bits(), f.value(s, n, m).to_bits());
                    } else if x >= example21_node(4) - 1e-12 {
                        assert_eq!(p.value(s, n, m), 0.0);
                    }
                }
            }
        }
    }
}
