//! Signed measures over maturities, measure-valued simple processes and
//! their approximation by finite Dirac combinations.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{TimeGrid, NODE_TOL};
use crate::integration::{Leg, SimpleStrategy, Weight};
use crate::paths::{History, PathFamily, ProcessPaths};
use crate::stats::par_map;

/// Piecewise-constant density on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub lo: f64,
    pub hi: f64,
    pub density: f64,
}

impl Cell {
    pub fn mass(&self) -> f64 {
        self.density * (self.hi - self.lo)
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Finite signed measure: atoms plus an optional piecewise-constant density.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SignedMeasureGrid {
    atoms: Vec<(f64, f64)>,
    cells: Vec<Cell>,
}

impl SignedMeasureGrid {
    /// Atoms are sorted by location and coincident atoms merged.
    pub fn new(atoms: Vec<(f64, f64)>, cells: Vec<Cell>) -> Result<Self> {
        for &(x, w) in &atoms {
            if !x.is_finite() || !w.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite atom ({x}, {w})")));
            }
        }
        let mut cells = cells;
        for c in &cells {
            if !(c.hi > c.lo) || !c.density.is_finite() || !c.lo.is_finite() || !c.hi.is_finite() {
                return Err(Error::InvalidParameter(format!("invalid cell {c:?}")));
            }
        }
        cells.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        if cells.windows(2).any(|w| w[1].lo < w[0].hi - NODE_TOL) {
            return Err(Error::InvalidParameter("density cells overlap".into()));
        }
        Ok(Self { atoms: merge_atoms(atoms), cells })
    }

    pub fn atomic(atoms: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(atoms, Vec::new())
    }

    pub fn dirac(x: f64) -> Self {
        Self { atoms: vec![(x, 1.0)], cells: Vec::new() }
    }

    /// Density `mass / (b - a)` on `[a, b]`, split into `cells` equal cells.
    pub fn uniform(a: f64, b: f64, mass: f64, cells: usize) -> Result<Self> {
        Self::from_density(a, b, cells, |_| mass / (b - a))
    }

    /// Density proportional to `exp(rate · x)` on `[a, b]` with total mass `mass`.
    pub fn exponential_tilt(a: f64, b: f64, rate: f64, mass: f64, cells: usize) -> Result<Self> {
        let norm = if rate.abs() < 1e-14 { b - a } else { ((rate * b).exp() - (rate * a).exp()) / rate };
        Self::from_density(a, b, cells, |x| mass * (rate * x).exp() / norm)
    }

    /// Samples `density` at cell midpoints of an equal partition of `[a, b]`.
    pub fn from_density(a: f64, b: f64, cells: usize, density: impl Fn(f64) -> f64) -> Result<Self> {
        if !(b > a) || cells == 0 {
            return Err(Error::InvalidParameter(format!("density needs a < b and cells > 0 (got [{a}, {b}], {cells})")));
        }
        let h = (b - a) / cells as f64;
        let cells = (0..cells)
            .map(|k| {
                let lo = a + k as f64 * h;
                let hi = if k + 1 == cells { b } else { a + (k + 1) as f64 * h };
                Cell { lo, hi, density: density(0.5 * (lo + hi)) }
            })
            .collect();
        Self::new(Vec::new(), cells)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn is_atomic(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.1.abs()).sum::<f64>() + self.cells.iter().map(|c| c.mass().abs()).sum::<f64>()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>() + self.cells.iter().map(|c| c.mass()).sum::<f64>()
    }

    /// Smallest interval holding every atom and cell.
    pub fn support(&self) -> Option<(f64, f64)> {
        let lo = self.atoms.iter().map(|a| a.0).chain(self.cells.iter().map(|c| c.lo)).fold(f64::INFINITY, f64::min);
        let hi = self.atoms.iter().map(|a| a.0).chain(self.cells.iter().map(|c| c.hi)).fold(f64::NEG_INFINITY, f64::max);
        (lo <= hi).then_some((lo, hi))
    }

    /// `∫ f dm` with atoms evaluated exactly and cells by the midpoint rule.
    pub fn pair_fn(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for &(x, w) in &self.atoms {
            acc += w * f(x);
        }
        for c in &self.cells {
            acc += c.mass() * f(c.mid());
        }
        acc
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|&(x, w)| (x, a * w)).collect(),
            cells: self.cells.iter().map(|c| Cell { density: a * c.density, ..*c }).collect(),
        }
    }

    /// Splits atoms onto the bracketing grid nodes so that pairing with the
    /// linearly interpolated curve is unchanged. Cells are replaced by their
    /// midpoint atoms first.
    pub fn to_grid_atoms(&self, nodes: &[f64]) -> Result<Vec<(usize, f64)>> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        let mut push = |k: usize, w: f64| {
            if w != 0.0 {
                match out.iter_mut().find(|e| e.0 == k) {
                    Some(e) => e.1 += w,
                    None => out.push((k, w)),
                }
            }
        };
        let all = self.atoms.iter().copied().chain(self.cells.iter().map(|c| (c.mid(), c.mass())));
        for (x, w) in all {
            let (lo, hi, theta) = locate(nodes, x)?;
            push(lo, w * (1.0 - theta));
            if hi != lo {
                push(hi, w * theta);
            }
        }
        out.sort_by_key(|e| e.0);
        Ok(out)
    }
}

fn merge_atoms(mut atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (x, w) in atoms {
        match out.last_mut() {
            Some(last) if (last.0 - x).abs() <= NODE_TOL => last.1 += w,
            _ => out.push((x, w)),
        }
    }
    out
}

/// Bracketing node indices and interpolation weight of `x`; exact at nodes.
fn locate(nodes: &[f64], x: f64) -> Result<(usize, usize, f64)> {
    let n = nodes.len();
    if n == 0 || x < nodes[0] - NODE_TOL || x > nodes[n - 1] + NODE_TOL {
        return Err(Error::OutOfRange(format!("location {x} outside the maturity interval")));
    }
    let k = nodes.partition_point(|&v| v < x - NODE_TOL);
    if k < n && (nodes[k] - x).abs() <= NODE_TOL {
        return Ok((k, k, 0.0));
    }
    let (lo, hi) = (k - 1, k);
    Ok((lo, hi, (x - nodes[lo]) / (nodes[hi] - nodes[lo])))
}

fn interpolate(nodes: &[f64], values: &[f64], x: f64) -> Result<f64> {
    let (lo, hi, theta) = locate(nodes, x)?;
    Ok(if lo == hi { values[lo] } else { values[lo] + theta * (values[hi] - values[lo]) })
}

/// `∫ f dm` for a curve `f` given at the maturity nodes, linearly interpolated.
pub fn pair_measure_curve(m: &SignedMeasureGrid, nodes: &[f64], f: &[f64]) -> Result<f64> {
    if nodes.len() != f.len() {
        return Err(Error::ShapeMismatch(format!("{} nodes but {} curve values", nodes.len(), f.len())));
    }
    let mut acc = 0.0;
    for &(x, w) in m.atoms() {
        acc += w * interpolate(nodes, f, x)?;
    }
    for c in m.cells() {
        if c.lo < nodes[0] - NODE_TOL || c.hi > nodes[nodes.len() - 1] + NODE_TOL {
            return Err(Error::OutOfRange(format!("cell [{}, {}] outside the maturity interval", c.lo, c.hi)));
        }
        acc += c.mass() * interpolate(nodes, f, c.mid())?;
    }
    Ok(acc)
}

/// One piece `1_{Γ × (t_start, t_end]} m` of a measure-valued simple process.
#[derive(Debug, Clone)]
pub struct MeasurePiece {
    pub start: f64,
    pub end: f64,
    /// `Γ` per scenario.
    pub event: Vec<bool>,
    pub measure: SignedMeasureGrid,
}

impl MeasurePiece {
    pub fn always(start: f64, end: f64, scenarios: usize, measure: SignedMeasureGrid) -> Self {
        Self { start, end, event: vec![true; scenarios], measure }
    }

    /// `Γ` decided from the history at `start`.
    pub fn from_rule(
        family: &dyn PathFamily,
        start: f64,
        end: f64,
        measure: SignedMeasureGrid,
        rule: impl Fn(&History) -> bool,
    ) -> Result<Self> {
        let n = index(family.time_grid(), start)?;
        let event = (0..family.scenarios()).map(|s| rule(&History::new(family, s, n))).collect();
        Ok(Self { start, end, event, measure })
    }
}

#[derive(Debug, Clone, Default)]
pub struct MeasureSimpleProcess {
    pieces: Vec<MeasurePiece>,
}

impl MeasureSimpleProcess {
    pub fn new(mut pieces: Vec<MeasurePiece>) -> Result<Self> {
        pieces.sort_by(|a, b| a.start.total_cmp(&b.start));
        for p in &pieces {
            if !(p.end > p.start) {
                return Err(Error::InvalidParameter(format!("empty interval ({}, {}]", p.start, p.end)));
            }
        }
        if pieces.windows(2).any(|w| w[1].start < w[0].end - NODE_TOL) {
            return Err(Error::InvalidParameter("measure process intervals overlap".into()));
        }
        Ok(Self { pieces })
    }

    pub fn pieces(&self) -> &[MeasurePiece] {
        &self.pieces
    }

    /// Equivalent simple strategy of a purely atomic process: one leg per
    /// piece and atom, holding the atom's weight on the piece's interval and event.
    pub fn to_simple_strategy(&self) -> Result<SimpleStrategy> {
        let mut legs = Vec::new();
        for p in &self.pieces {
            if !p.measure.is_atomic() {
                return Err(Error::InvalidParameter("measure has a density part".into()));
            }
            let event = Arc::new(p.event.clone());
            for &(x, w) in p.measure.atoms() {
                let (start, end, event) = (p.start, p.end, event.clone());
                let weight = Weight::Predictable(Arc::new(move |h: &History| {
                    let t = h.time(h.now());
                    if event[h.scenario()] && t >= start - NODE_TOL && t < end - NODE_TOL {
                        w
                    } else {
                        0.0
                    }
                }));
                legs.push(Leg { maturity: x, weight });
            }
        }
        Ok(SimpleStrategy::new(legs))
    }

    /// Applies `f` to every piece's measure.
    pub fn map_measures(&self, f: impl Fn(&SignedMeasureGrid) -> SignedMeasureGrid) -> Self {
        Self {
            pieces: self.pieces.iter().map(|p| MeasurePiece { measure: f(&p.measure), ..p.clone() }).collect(),
        }
    }
}

fn index(grid: &TimeGrid, t: f64) -> Result<usize> {
    grid.index_of(t).ok_or(Error::OffGrid(t))
}

/// `(φ·P)_t = Σ_i (m_i(P_{t_{i+1}∧t}) − m_i(P_{t_i∧t})) 1_{Γ_i}`, each term
/// the pairing of `m_i` with the price-curve difference, summed atom by atom.
pub fn integrate_measure_process(phi: &MeasureSimpleProcess, family: &dyn PathFamily) -> Result<ProcessPaths> {
    let grid = family.time_grid();
    let nt = grid.len();
    let ns = family.scenarios();
    let nodes = family.maturity_grid().points();
    let mut spans = Vec::with_capacity(phi.pieces.len());
    for p in &phi.pieces {
        if p.event.len() != ns {
            return Err(Error::ShapeMismatch(format!("event has {} scenarios, family {ns}", p.event.len())));
        }
        spans.push((index(grid, p.start)?, index(grid, p.end)?));
        pair_measure_curve(&p.measure, nodes, &vec![0.0; nodes.len()])?;
    }
    let rows = par_map(ns, |s| -> Result<Vec<f64>> {
        let mut out = vec![0.0; nt];
        let mut lo = vec![0.0; nodes.len()];
        let mut hi = vec![0.0; nodes.len()];
        for (n, o) in out.iter_mut().enumerate() {
            let mut total = 0.0;
            for (p, &(a, b)) in phi.pieces.iter().zip(&spans) {
                if !p.event[s] {
                    continue;
                }
                family.fill_slice(s, a.min(n), &mut lo);
                family.fill_slice(s, b.min(n), &mut hi);
                for (x, w) in weighted_points(&p.measure) {
                    let (i, j, theta) = locate(nodes, x)?;
                    let d = if i == j { hi[i] - lo[i] } else { interp_pair(&hi, i, j, theta) - interp_pair(&lo, i, j, theta) };
                    total += w * d;
                }
            }
            *o = total;
        }
        Ok(out)
    });
    let mut data = Vec::with_capacity(ns * nt);
    for r in rows {
        data.extend(r?);
    }
    ProcessPaths::new(grid.clone(), ns, data)
}

/// Atoms, then cell midpoints with cell masses.
fn weighted_points(m: &SignedMeasureGrid) -> impl Iterator<Item = (f64, f64)> + '_ {
    m.atoms.iter().copied().chain(m.cells.iter().map(|c| (c.mid(), c.mass())))
}

fn interp_pair(v: &[f64], a: usize, b: usize, theta: f64) -> f64 {
    v[a] + theta * (v[b] - v[a])
}

/// Piece of `|m|` used while cutting quantile cells.
struct Chunk {
    lo: f64,
    hi: f64,
    abs_mass: f64,
    positive: bool,
}

/// Purely atomic approximation with at most `2n` atoms: the support is cut
/// into `n` cells of equal `|m|`-mass, and in each cell the positive and the
/// negative parts are lumped at their own barycenters.
pub fn dirac_approximate(m: &SignedMeasureGrid, n: usize) -> Result<SignedMeasureGrid> {
    if n == 0 {
        return Err(Error::InvalidParameter("atom budget must be >= 1".into()));
    }
    if m.is_atomic() && m.atoms.len() <= n {
        return Ok(m.clone());
    }
    let tv = m.total_variation();
    if tv == 0.0 {
        return Ok(SignedMeasureGrid::default());
    }
    let mut chunks: Vec<Chunk> = m
        .atoms
        .iter()
        .filter(|a| a.1 != 0.0)
        .map(|&(x, w)| Chunk { lo: x, hi: x, abs_mass: w.abs(), positive: w > 0.0 })
        .chain(m.cells.iter().filter(|c| c.density != 0.0).map(|c| Chunk {
            lo: c.lo,
            hi: c.hi,
            abs_mass: c.mass().abs(),
            positive: c.density > 0.0,
        }))
        .collect();
    chunks.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));

    // per cell: (positive mass, positive moment, negative mass, negative moment)
    let mut bins = vec![[0.0f64; 4]; n];
    let quantum = tv / n as f64;
    let mut filled = 0.0;
    let mut bin = 0;
    for c in &chunks {
        let mut left = c.abs_mass;
        let mut pos = c.lo;
        while left > 0.0 {
            let room = if bin + 1 == n { f64::INFINITY } else { (bin + 1) as f64 * quantum - filled };
            let take = left.min(room.max(0.0));
            let end = if c.hi > c.lo { pos + (c.hi - c.lo) * take / c.abs_mass } else { pos };
            let bary = 0.5 * (pos + end);
            let b = &mut bins[bin];
            if c.positive {
                b[0] += take;
                b[1] += take * bary;
            } else {
                b[2] += take;
                b[3] += take * bary;
            }
            filled += take;
            left -= take;
            pos = end;
            if left > 0.0 {
                bin = (bin + 1).min(n - 1);
            }
        }
    }
    let mut atoms = Vec::with_capacity(2 * n);
    for b in &bins {
        if b[0] > 0.0 {
            atoms.push((b[1] / b[0], b[0]));
        }
        if b[2] > 0.0 {
            atoms.push((b[3] / b[2], -b[2]));
        }
    }
    let mut out = SignedMeasureGrid { atoms: merge_atoms(atoms), cells: Vec::new() };
    while out.total_variation() > tv {
        let scale = tv / out.total_variation() * (1.0 - f64::EPSILON);
        out = out.scaled(scale);
    }
    Ok(out)
}

/// `sup_{f 1-Lipschitz} |∫f dm − ∫f dn|` for measures of equal total mass,
/// computed as `∫ |F_m − F_n| dx` with both distribution functions exact.
pub fn lipschitz_pairing_error(m: &SignedMeasureGrid, n: &SignedMeasureGrid) -> f64 {
    // breakpoints where either distribution function changes slope or jumps
    let mut xs: Vec<f64> = Vec::new();
    for g in [m, n] {
        xs.extend(g.atoms.iter().map(|a| a.0));
        for c in &g.cells {
            xs.push(c.lo);
            xs.push(c.hi);
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut total = 0.0;
    for w in xs.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        // D(x) = F_m(x) − F_n(x) is linear on (a, b)
        let da = cdf_right(m, a) - cdf_right(n, a);
        let db = cdf_left(m, b) - cdf_left(n, b);
        total += abs_linear_integral(da, db, b - a);
    }
    total
}

fn cdf_right(g: &SignedMeasureGrid, x: f64) -> f64 {
    let atoms: f64 = g.atoms.iter().filter(|a| a.0 <= x).map(|a| a.1).sum();
    atoms + cell_cdf(g, x)
}

fn cdf_left(g: &SignedMeasureGrid, x: f64) -> f64 {
    let atoms: f64 = g.atoms.iter().filter(|a| a.0 < x).map(|a| a.1).sum();
    atoms + cell_cdf(g, x)
}

fn cell_cdf(g: &SignedMeasureGrid, x: f64) -> f64 {
    g.cells.iter().map(|c| c.density * (x.min(c.hi) - c.lo).max(0.0)).sum()
}

fn abs_linear_integral(a: f64, b: f64, width: f64) -> f64 {
    if a * b >= 0.0 {
        0.5 * (a.abs() + b.abs()) * width
    } else {
        0.5 * (a * a + b * b) / (a - b).abs() * width
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_examples() {
        let nodes: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let sq: Vec<f64> = nodes.iter().map(|x| x * x).collect();
        assert_eq!(pair_measure_curve(&SignedMeasureGrid::dirac(0.5), &nodes, &sq).unwrap(), 0.25);
        let u = SignedMeasureGrid::uniform(0.0, 1.0, 1.0, 10).unwrap();
        assert!((pair_measure_curve(&u, &nodes, &nodes).unwrap() - 0.5).abs() < 1e-12);
        let d = SignedMeasureGrid::atomic(vec![(0.2, 1.0), (0.7, -1.0)]).unwrap();
        assert_eq!(pair_measure_curve(&d, &nodes, &[3.0; 11]).unwrap(), 0.0);
        assert!(pair_measure_curve(&SignedMeasureGrid::dirac(1.5), &nodes, &sq).is_err());
    }

    #[test]
    fn uniform_two_atoms() {
        let u = SignedMeasureGrid::uniform(0.0, 1.0, 1.0, 64).unwrap();
        let a = dirac_approximate(&u, 2).unwrap();
        assert_eq!(a.atoms().len(), 2);
        assert!((a.atoms()[0].0 - 0.25).abs() < 1e-12 && (a.atoms()[0].1 - 0.5).abs() < 1e-12);
        assert!((a.atoms()[1].0 - 0.75).abs() < 1e-12 && (a.atoms()[1].1 - 0.5).abs() < 1e-12);
        assert!((a.pair_fn(|x| x) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn atomic_fixed_point_and_zero() {
        let m = SignedMeasureGrid::atomic(vec![(0.1, 2.0), (0.4, -1.0)]).unwrap();
        assert_eq!(dirac_approximate(&m, 3).unwrap(), m);
        let z = SignedMeasureGrid::atomic(vec![(0.3, 0.0)]).unwrap();
        assert!(dirac_approximate(&z, 0).is_err());
        let zc = SignedMeasureGrid::uniform(0.0, 1.0, 0.0, 4).unwrap();
        assert!(dirac_approximate(&zc, 2).unwrap().atoms().is_empty());
    }

    #[test]
    fn lipschitz_error_first_order() {
        let u = SignedMeasureGrid::uniform(0.0, 1.0, 1.0, 64).unwrap();
        for n in [4, 8, 16, 32] {
            let e = lipschitz_pairing_error(&u, &dirac_approximate(&u, n).unwrap());
            assert!((e - 0.25 / n as f64).abs() < 1e-10, "n={n} e={e}");
        }
    }

    #[test]
    fn grid_atoms_preserve_interpolated_pairing() {
        let nodes = [0.0, 0.5, 1.0];
        let f = [1.0, 3.0, 2.0];
        let m = SignedMeasureGrid::atomic(vec![(0.2, 1.5), (0.5, -1.0), (0.9, 0.7)]).unwrap();
        let direct = pair_measure_curve(&m, &nodes, &f).unwrap();
        let split: f64 = m.to_grid_atoms(&nodes).unwrap().iter().map(|&(k, w)| w * f[k]).sum();
        assert!((direct - split).abs() < 1e-12);
    }
}
