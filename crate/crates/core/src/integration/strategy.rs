use std::sync::Arc;

use crate::error::{Error, Result};
use crate::paths::{History, PathFamily, ProcessPaths};

pub type WeightFn = Arc<dyn Fn(&History) -> f64 + Send + Sync>;

/// Returns true once the stopping time has been reached by `t_n`.
pub type StopRule = Arc<dyn Fn(&History) -> bool + Send + Sync>;

/// Weight process of one leg. The value at time index `n` is the holding
/// over `(t_n, t_{n+1}]`.
#[derive(Clone)]
pub enum Weight {
    Constant(f64),
    /// `coef · S^{maturity}_{t_n}`.
    Proportional { coef: f64, maturity: f64 },
    /// Precomputed holdings, one row per scenario and one column per time index.
    Table(Arc<ProcessPaths>),
    Predictable(WeightFn),
    Scaled(f64, Box<Weight>),
}

impl std::fmt::Debug for Weight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Weight::Constant(c) => write!(f, "Constant({c})"),
            Weight::Proportional { coef, maturity } => write!(f, "Proportional({coef} x S^{maturity})"),
            Weight::Table(_) => write!(f, "Table"),
            Weight::Predictable(_) => write!(f, "Predictable"),
            Weight::Scaled(a, w) => write!(f, "{a} * {w:?}"),
        }
    }
}

/// A weight with maturity lookups resolved against a specific family.
pub(crate) enum ResolvedWeight<'a> {
    Constant(f64),
    Proportional { coef: f64, m: usize },
    Table(&'a ProcessPaths),
    Predictable(&'a WeightFn),
    Scaled(f64, Box<ResolvedWeight<'a>>),
}

impl Weight {
    pub(crate) fn resolve<'a>(&'a self, family: &dyn PathFamily) -> Result<ResolvedWeight<'a>> {
        Ok(match self {
            Weight::Constant(c) => ResolvedWeight::Constant(*c),
            Weight::Proportional { coef, maturity } => {
                ResolvedWeight::Proportional { coef: *coef, m: family.maturity_grid().require(*maturity)? }
            }
            Weight::Table(t) => {
                if t.scenarios() != family.scenarios() || t.grid() != family.time_grid() {
                    return Err(Error::ShapeMismatch("weight table does not match the family".into()));
                }
                ResolvedWeight::Table(t)
            }
            Weight::Predictable(f) => ResolvedWeight::Predictable(f),
            Weight::Scaled(a, w) => ResolvedWeight::Scaled(*a, Box::new(w.resolve(family)?)),
        })
    }

    pub fn is_constant(&self) -> Option<f64> {
        match self {
            Weight::Constant(c) => Some(*c),
            Weight::Scaled(a, w) => w.is_constant().map(|c| a * c),
            _ => None,
        }
    }
}

impl ResolvedWeight<'_> {
    pub(crate) fn eval(&self, h: &History) -> f64 {
        match self {
            ResolvedWeight::Constant(c) => *c,
            ResolvedWeight::Proportional { coef, m } => coef * h.value(h.now(), *m),
            ResolvedWeight::Table(t) => t.get(h.scenario(), h.now()),
            ResolvedWeight::Predictable(f) => f(h),
            ResolvedWeight::Scaled(a, w) => a * w.eval(h),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Leg {
    pub maturity: f64,
    pub weight: Weight,
}

/// Finite combination `Σ_i h^i δ_{x_i}` of Dirac deltas with predictable weights.
#[derive(Debug, Clone, Default)]
pub struct SimpleStrategy {
    legs: Vec<Leg>,
    bound: Option<f64>,
}

impl SimpleStrategy {
    pub fn new(legs: Vec<Leg>) -> Self {
        Self { legs, bound: None }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Constant-weight strategy.
    pub fn constant(legs: &[(f64, f64)]) -> Self {
        Self::new(legs.iter().map(|&(x, w)| Leg { maturity: x, weight: Weight::Constant(w) }).collect())
    }

    /// Buy-and-hold one unit of the bond maturing at `maturity`.
    pub fn dirac(maturity: f64) -> Self {
        Self::constant(&[(maturity, 1.0)])
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn with_leg(mut self, maturity: f64, weight: Weight) -> Self {
        self.legs.push(Leg { maturity, weight });
        self
    }

    pub fn legs(&self) -> &[Leg] {
        &self.legs
    }

    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            legs: self
                .legs
                .iter()
                .map(|l| Leg { maturity: l.maturity, weight: Weight::Scaled(a, Box::new(l.weight.clone())) })
                .collect(),
            bound: self.bound.map(|b| b * a.abs()),
        }
    }

    /// Leg-wise sum (legs are concatenated).
    pub fn plus(&self, other: &Self) -> Self {
        let mut legs = self.legs.clone();
        legs.extend(other.legs.iter().cloned());
        let bound = match (self.bound, other.bound) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        Self { legs, bound }
    }

    /// `H · 1_{[0, τ]}`: every weight is switched off once `stop` fires.
    pub fn stopped(&self, stop: StopRule) -> Self {
        let legs = self
            .legs
            .iter()
            .map(|l| {
                let inner = l.weight.clone();
                let stop = stop.clone();
                Leg { maturity: l.maturity, weight: Weight::Predictable(stopped_weight(inner, stop)) }
            })
            .collect();
        Self { legs, bound: self.bound }
    }
}

fn stopped_weight(inner: Weight, stop: StopRule) -> WeightFn {
    Arc::new(move |h: &History| {
        if stop(h) {
            return 0.0;
        }
        match inner.resolve(h.family()) {
            Ok(w) => w.eval(h),
            Err(_) => f64::NAN,
        }
    })
}
