use crate::error::{Error, Result};
use crate::paths::{History, PathFamily, ProcessPaths};
use crate::stats::par_map;

use super::strategy::{ResolvedWeight, SimpleStrategy};

/// `(H·S)_n = Σ_{k<n} Σ_i h^i_k (S^{x_i}_{k+1} − S^{x_i}_k)`, starting at 0.
///
/// Each leg is summed over runs of constant weight as `c (S_end − S_start)`,
/// so a constant weight gives `c (S_n − S_0)` exactly. Legs are added in
/// leg order at every time index.
pub fn integrate_simple(strategy: &SimpleStrategy, family: &dyn PathFamily) -> Result<ProcessPaths> {
    let nt = family.time_grid().len();
    let legs: Vec<(usize, ResolvedWeight)> = strategy
        .legs()
        .iter()
        .map(|l| Ok((family.maturity_grid().require(l.maturity)?, l.weight.resolve(family)?)))
        .collect::<Result<_>>()?;
    let constants: Vec<Option<f64>> = strategy.legs().iter().map(|l| l.weight.is_constant()).collect();
    let bound = strategy.bound();
    let nl = legs.len();

    let rows = par_map(family.scenarios(), |s| -> Result<Vec<f64>> {
        let mut paths = vec![0.0; nl * nt];
        for (k, (m, _)) in legs.iter().enumerate() {
            family.fill_path(s, *m, &mut paths[k * nt..(k + 1) * nt]);
        }
        // per leg: banked value of finished runs, current weight, run start
        let mut bank = vec![0.0; nl];
        let mut weight = vec![0.0; nl];
        let mut start = vec![0usize; nl];
        let mut out = vec![0.0; nt];
        for n in 0..nt {
            let mut total = 0.0;
            for k in 0..nl {
                let p = &paths[k * nt..(k + 1) * nt];
                if n + 1 < nt {
                    let h = match constants[k] {
                        Some(c) => c,
                        None => legs[k].1.eval(&History::new(family, s, n)),
                    };
                    if !h.is_finite() {
                        return Err(Error::NonFiniteWeight { scenario: s, step: n, leg: k });
                    }
                    if let Some(b) = bound {
                        if h.abs() > b {
                            return Err(Error::OutOfRange(format!(
                                "weight {h} exceeds bound {b} at scenario {s}, step {n}, leg {k}"
                            )));
                        }
                    }
                    if n == 0 {
                        weight[k] = h;
                    } else if h != weight[k] {
                        bank[k] += weight[k] * (p[n] - p[start[k]]);
                        weight[k] = h;
                        start[k] = n;
                    }
                }
                total += bank[k] + weight[k] * (p[n] - p[start[k]]);
            }
            out[n] = total;
        }
        Ok(out)
    });
    let mut data = Vec::with_capacity(family.scenarios() * nt);
    for r in rows {
        data.extend(r?);
    }
    ProcessPaths::new(family.time_grid().clone(), family.scenarios(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{MaturityGrid, TimeGrid};
    use crate::integration::Weight;
    use crate::paths::FamilyPaths;
    use std::sync::Arc;

    fn family() -> FamilyPaths {
        let tg = TimeGrid::uniform(1.0, 4).unwrap();
        let mg = MaturityGrid::new(vec![0.5, 1.0]).unwrap();
        FamilyPaths::from_fn(tg, mg, 3, false, |s, n, m| ((s + 1) * (n * n + 1)) as f64 * (m as f64 + 0.5)).unwrap()
    }

    #[test]
    fn dirac_telescopes() {
        let f = family();
        let y = integrate_simple(&SimpleStrategy::dirac(1.0), &f).unwrap();
        for s in 0..3 {
            for n in 0..5 {
                assert_eq!(y.get(s, n), f.value(s, n, 1) - f.value(s, 0, 1));
            }
        }
    }

    #[test]
    fn constant_combination() {
        let f = family();
        let y = integrate_simple(&SimpleStrategy::constant(&[(0.5, 2.0), (1.0, 3.0)]), &f).unwrap();
        for s in 0..3 {
            for n in 0..5 {
                let expect = 2.0 * (f.value(s, n, 0) - f.value(s, 0, 0)) + 3.0 * (f.value(s, n, 1) - f.value(s, 0, 1));
                assert!((y.get(s, n) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn off_grid_leg_and_bad_weights() {
        let f = family();
        assert!(matches!(integrate_simple(&SimpleStrategy::dirac(0.7), &f), Err(Error::OffGrid(_))));
        let nan = SimpleStrategy::new(vec![]).with_leg(0.5, Weight::Predictable(Arc::new(|_| f64::NAN)));
        assert!(matches!(integrate_simple(&nan, &f), Err(Error::NonFiniteWeight { .. })));
        let big = SimpleStrategy::constant(&[(0.5, 3.0)]).with_bound(1.0);
        assert!(integrate_simple(&big, &f).is_err());
    }

    #[test]
    fn proportional_weight_reads_current_state() {
        let f = family();
        let h = SimpleStrategy::new(vec![]).with_leg(1.0, Weight::Proportional { coef: 0.5, maturity: 0.5 });
        let y = integrate_simple(&h, &f).unwrap();
        let mut acc = 0.0;
        for n in 0..4 {
            acc += 0.5 * f.value(2, n, 0) * (f.value(2, n + 1, 1) - f.value(2, n, 1));
        }
        assert_eq!(y.get(2, 4), acc);
    }
}
