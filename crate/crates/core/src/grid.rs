//! Time and maturity lattices and scenario sets.

use crate::error::{Error, Result};
use crate::rng::{Purpose, ScenarioRng};

/// Tolerance used when matching a requested time or maturity to a node.
pub const NODE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid("time grid needs at least 2 points".into()));
        }
        if points[0] != 0.0 {
            return Err(Error::InvalidGrid("time grid must start at 0".into()));
        }
        ensure_increasing(&points, "time grid")?;
        Ok(Self { points })
    }

    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || steps == 0 {
            return Err(Error::InvalidGrid(format!(
                "uniform grid needs horizon > 0 and steps > 0 (got {horizon}, {steps})"
            )));
        }
        let mut points: Vec<f64> = (0..=steps).map(|n| horizon * n as f64 / steps as f64).collect();
        points[steps] = horizon;
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.points.last().unwrap()
    }

    pub fn dt(&self, n: usize) -> f64 {
        self.points[n + 1] - self.points[n]
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        exact_index(&self.points, t)
    }

    pub fn nearest(&self, t: f64) -> usize {
        nearest_index(&self.points, t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaturityGrid {
    points: Vec<f64>,
}

impl MaturityGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("maturity grid is empty".into()));
        }
        if points.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidGrid("maturities must be finite and >= 0".into()));
        }
        ensure_increasing(&points, "maturity grid")?;
        Ok(Self { points })
    }

    /// Sorted union of several point sets, merging points closer than [`NODE_TOL`].
    pub fn union(sets: &[&[f64]]) -> Result<Self> {
        let mut all: Vec<f64> = sets.iter().flat_map(|s| s.iter().copied()).collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut points: Vec<f64> = Vec::with_capacity(all.len());
        for x in all {
            match points.last() {
                Some(&last) if (x - last).abs() < NODE_TOL => {}
                _ => points.push(x),
            }
        }
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        *self.points.last().unwrap()
    }

    pub fn index_of(&self, x: f64) -> Option<usize> {
        exact_index(&self.points, x)
    }

    pub fn require(&self, x: f64) -> Result<usize> {
        self.index_of(x).ok_or(Error::OffGrid(x))
    }

    pub fn nearest(&self, x: f64) -> usize {
        nearest_index(&self.points, x)
    }
}

/// Scenario count and seed. All draws for scenario `s` come from the stream `(seed, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioSet {
    pub count: usize,
    pub seed: u64,
}

impl ScenarioSet {
    pub fn new(count: usize, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::NoScenarios);
        }
        Ok(Self { count, seed })
    }

    pub fn rng(&self, scenario: usize, purpose: Purpose) -> ScenarioRng {
        ScenarioRng::new(self.seed, scenario as u64, purpose)
    }
}

fn ensure_increasing(points: &[f64], what: &str) -> Result<()> {
    for w in points.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidGrid(format!(
                "{what} must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidGrid(format!("{what} has non-finite points")));
    }
    Ok(())
}

fn nearest_index(points: &[f64], x: f64) -> usize {
    let pos = points.partition_point(|&p| p < x);
    if pos == 0 {
        0
    } else if pos == points.len() {
        points.len() - 1
    } else if (points[pos] - x).abs() < (x - points[pos - 1]).abs() {
        pos
    } else {
        pos - 1
    }
}

fn exact_index(points: &[f64], x: f64) -> Option<usize> {
    let i = nearest_index(points, x);
    ((points[i] - x).abs() <= NODE_TOL).then_some(i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_grid_validation() {
        assert!(TimeGrid::new(vec![0.0]).is_err());
        assert!(TimeGrid::new(vec![0.1, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.5, 0.5]).is_err());
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert_eq!(g.points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.index_of(0.75), Some(3));
        assert_eq!(g.index_of(0.7), None);
        assert_eq!(g.nearest(0.7), 3);
    }

    #[test]
    fn maturity_union_merges_close_points() {
        let g = MaturityGrid::union(&[&[0.0, 0.5, 1.0], &[0.5 + 1e-12, 0.75]]).unwrap();
        assert_eq!(g.points(), &[0.0, 0.5, 0.75, 1.0]);
        assert!(matches!(g.require(0.6), Err(Error::OffGrid(_))));
    }

    #[test]
    fn empty_scenario_set_rejected() {
        assert!(matches!(ScenarioSet::new(0, 1), Err(Error::NoScenarios)));
    }
}
