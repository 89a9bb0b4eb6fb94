//! Path containers and history views.
//!
//! Containers are immutable once built. Builders of predictable quantities
//! (strategy weights, controls, predictable sets) only ever receive a
//! [`History`] or [`ProcessHistory`], which refuses access past "now".

use crate::error::{Error, Result};
use crate::grid::{MaturityGrid, TimeGrid};

/// One real process per scenario, sampled on a time grid. Scenario-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessPaths {
    grid: TimeGrid,
    scenarios: usize,
    data: Vec<f64>,
}

impl ProcessPaths {
    pub fn new(grid: TimeGrid, scenarios: usize, data: Vec<f64>) -> Result<Self> {
        if scenarios == 0 {
            return Err(Error::NoScenarios);
        }
        if data.len() != scenarios * grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} scenarios x {} times",
                data.len(),
                scenarios,
                grid.len()
            )));
        }
        Ok(Self { grid, scenarios, data })
    }

    pub fn zeros(grid: TimeGrid, scenarios: usize) -> Self {
        let data = vec![0.0; scenarios * grid.len()];
        Self { grid, scenarios, data }
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f64>(grid: TimeGrid, scenarios: usize, mut f: F) -> Self {
        let nt = grid.len();
        let mut data = Vec::with_capacity(scenarios * nt);
        for s in 0..scenarios {
            for n in 0..nt {
                data.push(f(s, n));
            }
        }
        Self { grid, scenarios, data }
    }

    /// Deterministic process shared by every scenario.
    pub fn deterministic(grid: TimeGrid, scenarios: usize, f: impl Fn(f64) -> f64) -> Self {
        let row: Vec<f64> = grid.points().iter().map(|&t| f(t)).collect();
        Self::from_fn(grid, scenarios, |_, n| row[n])
    }

    pub fn from_rows(grid: TimeGrid, rows: Vec<Vec<f64>>) -> Result<Self> {
        let scenarios = rows.len();
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        Self::new(grid, scenarios, data)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn scenarios(&self) -> usize {
        self.scenarios
    }

    pub fn times(&self) -> usize {
        self.grid.len()
    }

    pub fn path(&self, s: usize) -> &[f64] {
        let nt = self.grid.len();
        &self.data[s * nt..(s + 1) * nt]
    }

    pub fn get(&self, s: usize, n: usize) -> f64 {
        self.data[s * self.grid.len() + n]
    }

    pub fn terminal(&self) -> Vec<f64> {
        let last = self.grid.len() - 1;
        (0..self.scenarios).map(|s| self.get(s, last)).collect()
    }

    pub fn column(&self, n: usize) -> Vec<f64> {
        (0..self.scenarios).map(|s| self.get(s, n)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.scenarios != other.scenarios || self.grid != other.grid {
            return Err(Error::ShapeMismatch("process paths differ in grid or scenario count".into()));
        }
        Ok(())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Self { grid: self.grid.clone(), scenarios: self.scenarios, data })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            scenarios: self.scenarios,
            data: self.data.iter().map(|x| f(*x)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// The process frozen after time index `stop`.
    pub fn stopped(&self, stop: usize) -> Self {
        let stop = stop.min(self.grid.len() - 1);
        Self::from_fn(self.grid.clone(), self.scenarios, |s, n| self.get(s, n.min(stop)))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn history(&self, scenario: usize, now: usize) -> ProcessHistory<'_> {
        ProcessHistory { paths: self, scenario, now }
    }
}

/// Read access to one scenario of a [`ProcessPaths`] up to and including `now`.
#[derive(Clone, Copy)]
pub struct ProcessHistory<'a> {
    paths: &'a ProcessPaths,
    scenario: usize,
    now: usize,
}

impl<'a> ProcessHistory<'a> {
    pub fn now(&self) -> usize {
        self.now
    }

    pub fn scenario(&self) -> usize {
        self.scenario
    }

    pub fn time(&self, n: usize) -> f64 {
        assert!(n <= self.now, "history access beyond the present");
        self.paths.grid.points()[n]
    }

    pub fn value(&self, n: usize) -> f64 {
        assert!(n <= self.now, "history access beyond the present");
        self.paths.get(self.scenario, n)
    }

    pub fn prefix(&self) -> &'a [f64] {
        &self.paths.path(self.scenario)[..=self.now]
    }
}

/// A maturity-indexed family of processes `S^x`, `x` on a maturity grid.
///
/// Implemented both by dense storage ([`FamilyPaths`]) and by closed-form
/// generators that evaluate lazily.
pub trait PathFamily: Sync {
    fn time_grid(&self) -> &TimeGrid;
    fn maturity_grid(&self) -> &MaturityGrid;
    fn scenarios(&self) -> usize;
    fn value(&self, s: usize, n: usize, m: usize) -> f64;

    fn is_price_family(&self) -> bool {
        false
    }

    /// Time path of `S^{x_m}` in scenario `s`.
    fn fill_path(&self, s: usize, m: usize, out: &mut [f64]) {
        for (n, o) in out.iter_mut().enumerate() {
            *o = self.value(s, n, m);
        }
    }

    /// Maturity slice at time index `n` in scenario `s`.
    fn fill_slice(&self, s: usize, n: usize, out: &mut [f64]) {
        for (m, o) in out.iter_mut().enumerate() {
            *o = self.value(s, n, m);
        }
    }

    fn history(&self, scenario: usize, now: usize) -> History<'_>
    where
        Self: Sized,
    {
        History { family: self, scenario, now }
    }
}

/// Read access to a family in one scenario up to and including `now`.
#[derive(Clone, Copy)]
pub struct History<'a> {
    family: &'a dyn PathFamily,
    scenario: usize,
    now: usize,
}

impl<'a> History<'a> {
    pub fn new(family: &'a dyn PathFamily, scenario: usize, now: usize) -> Self {
        Self { family, scenario, now }
    }

    pub fn now(&self) -> usize {
        self.now
    }

    pub fn scenario(&self) -> usize {
        self.scenario
    }

    pub fn time(&self, n: usize) -> f64 {
        assert!(n <= self.now, "history access beyond the present");
        self.family.time_grid().points()[n]
    }

    pub fn family(&self) -> &'a dyn PathFamily {
        self.family
    }

    pub fn maturities(&self) -> &'a MaturityGrid {
        self.family.maturity_grid()
    }

    pub fn value(&self, n: usize, m: usize) -> f64 {
        assert!(n <= self.now, "history access beyond the present");
        self.family.value(self.scenario, n, m)
    }

    /// Current maturity slice.
    pub fn slice(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.family.maturity_grid().len()];
        self.family.fill_slice(self.scenario, self.now, &mut out);
        out
    }
}

/// Dense family storage, `values[s][n][m]` laid out scenario-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyPaths {
    times: TimeGrid,
    maturities: MaturityGrid,
    scenarios: usize,
    is_price_family: bool,
    data: Vec<f64>,
}

impl FamilyPaths {
    pub fn new(
        times: TimeGrid,
        maturities: MaturityGrid,
        scenarios: usize,
        is_price_family: bool,
        data: Vec<f64>,
    ) -> Result<Self> {
        if scenarios == 0 {
            return Err(Error::NoScenarios);
        }
        let expected = scenarios * times.len() * maturities.len();
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!("{} values, expected {expected}", data.len())));
        }
        let fam = Self { times, maturities, scenarios, is_price_family, data };
        fam.validate()?;
        Ok(fam)
    }

    pub fn from_fn(
        times: TimeGrid,
        maturities: MaturityGrid,
        scenarios: usize,
        is_price_family: bool,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let (nt, nm) = (times.len(), maturities.len());
        let mut data = Vec::with_capacity(scenarios * nt * nm);
        for s in 0..scenarios {
            for n in 0..nt {
                for m in 0..nm {
                    data.push(f(s, n, m));
                }
            }
        }
        Self::new(times, maturities, scenarios, is_price_family, data)
    }

    /// Materializes any family.
    pub fn from_family(family: &dyn PathFamily) -> Result<Self> {
        let nm = family.maturity_grid().len();
        let nt = family.time_grid().len();
        let mut data = vec![0.0; family.scenarios() * nt * nm];
        let mut slice = vec![0.0; nm];
        for s in 0..family.scenarios() {
            for n in 0..nt {
                family.fill_slice(s, n, &mut slice);
                let off = (s * nt + n) * nm;
                data[off..off + nm].copy_from_slice(&slice);
            }
        }
        Self::new(
            family.time_grid().clone(),
            family.maturity_grid().clone(),
            family.scenarios(),
            family.is_price_family(),
            data,
        )
    }

    fn validate(&self) -> Result<()> {
        let (nt, nm) = (self.times.len(), self.maturities.len());
        for (k, &v) in self.data.iter().enumerate() {
            let ok = v.is_finite() && (!self.is_price_family || v > 0.0);
            if !ok {
                return Err(Error::NonFinite {
                    scenario: k / (nt * nm),
                    step: (k / nm) % nt,
                    maturity: k % nm,
                });
            }
        }
        Ok(())
    }

    pub(crate) fn from_parts_unchecked(
        times: TimeGrid,
        maturities: MaturityGrid,
        scenarios: usize,
        is_price_family: bool,
        data: Vec<f64>,
    ) -> Self {
        Self { times, maturities, scenarios, is_price_family, data }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn index(&self, s: usize, n: usize, m: usize) -> usize {
        (s * self.times.len() + n) * self.maturities.len() + m
    }

    /// `S^{x_m}` as a process.
    pub fn column(&self, m: usize) -> ProcessPaths {
        let data = (0..self.scenarios)
            .flat_map(|s| (0..self.times.len()).map(move |n| (s, n)))
            .map(|(s, n)| self.data[self.index(s, n, m)])
            .collect();
        ProcessPaths::new(self.times.clone(), self.scenarios, data).expect("shape")
    }

    pub fn map(&self, is_price_family: bool, f: impl Fn(usize, usize, usize, f64) -> f64) -> Result<Self> {
        Self::from_fn(self.times.clone(), self.maturities.clone(), self.scenarios, is_price_family, |s, n, m| {
            f(s, n, m, self.data[self.index(s, n, m)])
        })
    }
}

impl PathFamily for FamilyPaths {
    fn time_grid(&self) -> &TimeGrid {
        &self.times
    }

    fn maturity_grid(&self) -> &MaturityGrid {
        &self.maturities
    }

    fn scenarios(&self) -> usize {
        self.scenarios
    }

    fn value(&self, s: usize, n: usize, m: usize) -> f64 {
        self.data[self.index(s, n, m)]
    }

    fn is_price_family(&self) -> bool {
        self.is_price_family
    }

    fn fill_path(&self, s: usize, m: usize, out: &mut [f64]) {
        let nm = self.maturities.len();
        let base = s * self.times.len() * nm + m;
        for (n, o) in out.iter_mut().enumerate() {
            *o = self.data[base + n * nm];
        }
    }

    fn fill_slice(&self, s: usize, n: usize, out: &mut [f64]) {
        let off = self.index(s, n, 0);
        out.copy_from_slice(&self.data[off..off + self.maturities.len()]);
    }
}

/// Extracts `S^{x_m}` from any family.
pub fn family_column(family: &dyn PathFamily, m: usize) -> ProcessPaths {
    let nt = family.time_grid().len();
    let mut data = vec![0.0; family.scenarios() * nt];
    for s in 0..family.scenarios() {
        family.fill_path(s, m, &mut data[s * nt..(s + 1) * nt]);
    }
    ProcessPaths::new(family.time_grid().clone(), family.scenarios(), data).expect("shape")
}

/// Predictable subset of scenario x step. Entry `(s, n)` flags the increment
/// over `(t_n, t_{n+1}]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictableSet {
    scenarios: usize,
    steps: usize,
    indicator: Vec<bool>,
}

impl PredictableSet {
    pub fn empty(scenarios: usize, steps: usize) -> Self {
        Self { scenarios, steps, indicator: vec![false; scenarios * steps] }
    }

    /// Builds the set from a rule that sees the family history up to `t_n`.
    pub fn from_rule(family: &dyn PathFamily, rule: impl Fn(&History) -> bool) -> Self {
        let steps = family.time_grid().steps();
        let scenarios = family.scenarios();
        let mut indicator = Vec::with_capacity(scenarios * steps);
        for s in 0..scenarios {
            for n in 0..steps {
                indicator.push(rule(&History::new(family, s, n)));
            }
        }
        Self { scenarios, steps, indicator }
    }

    /// Deterministic time set `Ω × (t_a, t_b]` given by step indices `a..b`.
    pub fn time_band(scenarios: usize, steps: usize, from_step: usize, to_step: usize) -> Self {
        let mut set = Self::empty(scenarios, steps);
        for s in 0..scenarios {
            for n in from_step..to_step.min(steps) {
                set.indicator[s * steps + n] = true;
            }
        }
        set
    }

    pub fn scenarios(&self) -> usize {
        self.scenarios
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn contains(&self, s: usize, n: usize) -> bool {
        self.indicator[s * self.steps + n]
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.scenarios != other.scenarios || self.steps != other.steps {
            return Err(Error::ShapeMismatch("predictable sets differ in shape".into()));
        }
        let indicator = self.indicator.iter().zip(&other.indicator).map(|(a, b)| *a || *b).collect();
        Ok(Self { scenarios: self.scenarios, steps: self.steps, indicator })
    }
}
