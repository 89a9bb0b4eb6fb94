//! Seminorms and Emery-topology proxies on discretized processes, plus
//! negligible-set checks.
//!
//! The Emery quasinorm `sup_{|H|<=1} E[1 ∧ sup_t |(H·Y)_t|]` is bounded from
//! below by restricting `H` to a finite dictionary of predictable controls.

use std::sync::Arc;

use log::warn;

use crate::error::{Error, Result};
use crate::paths::{family_column, PathFamily, PredictableSet, ProcessHistory, ProcessPaths};
use crate::rng::{Purpose, ScenarioRng};
use crate::stats::{pairwise_sum, par_map, Estimate};

pub type ControlFn = Arc<dyn Fn(&ProcessHistory) -> f64 + Send + Sync>;

/// A predictable control `h_n`, evaluated from the integrator's history up to `t_n`.
#[derive(Clone)]
pub enum Control {
    Constant(f64),
    /// `sign(Y_n - Y_{n-1})`, zero at the first step.
    SignPreviousIncrement,
    /// `sign(Y_n - Y_0)`.
    SignRunningIntegral,
    /// Independent fair signs drawn from a counter-based stream.
    RandomSigns(u64),
    Custom(ControlFn),
}

impl std::fmt::Debug for Control {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Control::Constant(c) => write!(f, "Constant({c})"),
            Control::SignPreviousIncrement => write!(f, "SignPreviousIncrement"),
            Control::SignRunningIntegral => write!(f, "SignRunningIntegral"),
            Control::RandomSigns(k) => write!(f, "RandomSigns({k})"),
            Control::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ControlDictionary {
    controls: Vec<Control>,
    seed: u64,
}

impl ControlDictionary {
    /// Constant ±1, previous-increment sign, running-integral sign and
    /// `random_paths` random sign paths.
    pub fn standard(random_paths: usize, seed: u64) -> Self {
        let mut controls = vec![
            Control::Constant(1.0),
            Control::Constant(-1.0),
            Control::SignPreviousIncrement,
            Control::SignRunningIntegral,
        ];
        controls.extend((0..random_paths as u64).map(Control::RandomSigns));
        Self { controls, seed }
    }

    pub fn from_controls(controls: Vec<Control>, seed: u64) -> Result<Self> {
        if controls.is_empty() {
            return Err(Error::InvalidParameter("control dictionary is empty".into()));
        }
        Ok(Self { controls, seed })
    }

    /// The controls actually used: always contains the constant control 1.
    pub fn effective(&self) -> Vec<Control> {
        let mut out = self.controls.clone();
        if !out.iter().any(|c| matches!(c, Control::Constant(v) if *v == 1.0)) {
            out.insert(0, Control::Constant(1.0));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.effective().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl Default for ControlDictionary {
    fn default() -> Self {
        Self::standard(8, 0x5eed)
    }
}

/// Dictionary-proxy value with the standard error of the maximizing control's estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyEstimate {
    pub value: f64,
    pub se: f64,
    pub control: usize,
}

/// Monte Carlo estimate of `E[sup_{n<=stop} |Y_n|^2]^{1/2}`.
pub fn sup_seminorm(y: &ProcessPaths, stop_index: usize) -> Result<f64> {
    if y.scenarios() == 0 {
        return Err(Error::NoScenarios);
    }
    if stop_index >= y.times() {
        return Err(Error::OutOfRange(format!("stop index {stop_index} beyond {} times", y.times())));
    }
    let sq: Vec<f64> = (0..y.scenarios())
        .map(|s| y.path(s)[..=stop_index].iter().fold(0.0f64, |m, v| m.max(v.abs())).powi(2))
        .collect();
    Ok((pairwise_sum(&sq) / y.scenarios() as f64).sqrt())
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Per-scenario `1 ∧ sup_n |Σ_{k<n} h_k ΔY_k|` for one control.
fn capped_integral_sup(y: &ProcessPaths, control: &Control, seed: u64) -> Result<Vec<f64>> {
    let steps = y.times() - 1;
    let results = par_map(y.scenarios(), |s| -> Result<f64> {
        let path = y.path(s);
        let mut rng = match control {
            Control::RandomSigns(k) => Some(ScenarioRng::new(
                seed ^ k.wrapping_mul(0x9e37_79b9_7f4a_7c15),
                s as u64,
                Purpose::Controls,
            )),
            _ => None,
        };
        let mut acc = 0.0f64;
        let mut sup = 0.0f64;
        for n in 0..steps {
            let h = match control {
                Control::Constant(c) => *c,
                Control::SignPreviousIncrement => {
                    if n == 0 {
                        0.0
                    } else {
                        sign(path[n] - path[n - 1])
                    }
                }
                Control::SignRunningIntegral => sign(path[n] - path[0]),
                Control::RandomSigns(_) => rng.as_mut().unwrap().sign(),
                Control::Custom(f) => f(&y.history(s, n)),
            };
            if !(h.abs() <= 1.0) {
                return Err(Error::ControlNotAdmissible { value: h, scenario: s, step: n });
            }
            acc += h * (path[n + 1] - path[n]);
            sup = sup.max(acc.abs());
            if sup >= 1.0 {
                break;
            }
        }
        Ok(sup.min(1.0))
    });
    results.into_iter().collect()
}

/// Dictionary lower bound of the Emery quasinorm: the largest Monte Carlo
/// estimate of `E[1 ∧ sup_n |(h·Y)_n|]` over the effective dictionary.
pub fn emery_proxy(y: &ProcessPaths, dictionary: &ControlDictionary) -> Result<ProxyEstimate> {
    if y.scenarios() == 0 {
        return Err(Error::NoScenarios);
    }
    let mut best = ProxyEstimate { value: -1.0, se: 0.0, control: 0 };
    for (k, control) in dictionary.effective().iter().enumerate() {
        let samples = capped_integral_sup(y, control, dictionary.seed())?;
        let est = Estimate::from_samples(&samples);
        if est.mean > best.value {
            best = ProxyEstimate { value: est.mean, se: est.se, control: k };
        }
    }
    Ok(best)
}

/// `emery_proxy(X - Y)`.
pub fn emery_distance_proxy(
    x: &ProcessPaths,
    y: &ProcessPaths,
    dictionary: &ControlDictionary,
) -> Result<ProxyEstimate> {
    emery_proxy(&x.sub(y)?, dictionary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegligibleReport {
    pub negligible: bool,
    pub violation_count: usize,
    /// First violating `(scenario, step, maturity)` triples, capped at [`NegligibleReport::MAX_LISTED`].
    pub violations: Vec<(usize, usize, usize)>,
}

impl NegligibleReport {
    pub const MAX_LISTED: usize = 1000;
}

/// Grid rendering of negligibility: every flagged increment of every family
/// member is at most `tol` in absolute value, in every scenario.
pub fn check_negligible(set: &PredictableSet, family: &dyn PathFamily, tol: f64) -> Result<NegligibleReport> {
    let steps = family.time_grid().steps();
    if set.scenarios() != family.scenarios() || set.steps() != steps {
        return Err(Error::ShapeMismatch("predictable set does not match the family grids".into()));
    }
    let nm = family.maturity_grid().len();
    let mut path = vec![0.0; steps + 1];
    let mut violations = Vec::new();
    let mut count = 0usize;
    for s in 0..family.scenarios() {
        if !(0..steps).any(|n| set.contains(s, n)) {
            continue;
        }
        for m in 0..nm {
            family.fill_path(s, m, &mut path);
            for n in 0..steps {
                if set.contains(s, n) && (path[n + 1] - path[n]).abs() > tol {
                    count += 1;
                    if violations.len() < NegligibleReport::MAX_LISTED {
                        violations.push((s, n, m));
                    }
                }
            }
        }
    }
    Ok(NegligibleReport { negligible: count == 0, violation_count: count, violations })
}

/// Default tolerance for [`check_negligible`].
pub const NEGLIGIBLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityPoint {
    pub offset: f64,
    /// Maturity actually used for `x + offset` after snapping to the grid.
    pub maturity: f64,
    pub proxy: ProxyEstimate,
}

/// `emery_proxy(S^{x+Δx} - S^x)` for each offset.
pub fn continuity_profile(
    family: &dyn PathFamily,
    x: f64,
    offsets: &[f64],
    dictionary: &ControlDictionary,
) -> Result<Vec<ContinuityPoint>> {
    let grid = family.maturity_grid();
    let snap = |target: f64| -> Result<usize> {
        if target < grid.first() - 1e-12 || target > grid.last() + 1e-12 {
            return Err(Error::OutOfRange(format!(
                "maturity {target} outside [{}, {}]",
                grid.first(),
                grid.last()
            )));
        }
        let i = grid.nearest(target);
        if (grid.points()[i] - target).abs() > crate::grid::NODE_TOL {
            warn!("maturity {target} snapped to grid node {}", grid.points()[i]);
        }
        Ok(i)
    };
    let base_index = snap(x)?;
    let base = family_column(family, base_index);
    offsets
        .iter()
        .map(|&dx| {
            let m = snap(x + dx)?;
            let other = family_column(family, m);
            Ok(ContinuityPoint {
                offset: dx,
                maturity: grid.points()[m],
                proxy: emery_distance_proxy(&other, &base, dictionary)?,
            })
        })
        .collect()
}
