use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::NODE_TOL;
use crate::measure::{dirac_approximate, pair_measure_curve, MeasureSimpleProcess};
use crate::models::example21_node;
use crate::paths::{History, PathFamily, ProcessPaths};
use crate::seminorm::{emery_distance_proxy, ControlDictionary, ProxyEstimate};

use super::simple::integrate_simple;
use super::strategy::{Leg, SimpleStrategy, Weight};

pub const DEFAULT_SCHEDULE: [usize; 5] = [10, 20, 50, 100, 200];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FunctionalValue {
    Value(f64),
    NotInDomain,
}

impl FunctionalValue {
    pub fn value(self) -> Option<f64> {
        match self {
            FunctionalValue::Value(v) => Some(v),
            FunctionalValue::NotInDomain => None,
        }
    }
}

type Approximants = Arc<dyn Fn(usize) -> Result<SimpleStrategy> + Send + Sync>;
type Evaluator = Arc<dyn Fn(&History, &[f64]) -> FunctionalValue + Send + Sync>;

/// A limit object given both by approximating simple strategies and by a
/// direct evaluator of the limiting functional on test curves.
#[derive(Clone)]
pub struct GeneralizedStrategy {
    name: String,
    approximants: Approximants,
    evaluator: Evaluator,
}

impl std::fmt::Debug for GeneralizedStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GeneralizedStrategy({})", self.name)
    }
}

impl GeneralizedStrategy {
    pub fn new(
        name: impl Into<String>,
        approximants: impl Fn(usize) -> Result<SimpleStrategy> + Send + Sync + 'static,
        evaluator: impl Fn(&History, &[f64]) -> FunctionalValue + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), approximants: Arc::new(approximants), evaluator: Arc::new(evaluator) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn approximant(&self, n: usize) -> Result<SimpleStrategy> {
        (self.approximants)(n)
    }

    pub fn evaluate(&self, history: &History, f: &[f64]) -> FunctionalValue {
        (self.evaluator)(history, f)
    }

    /// Every approximant equals `h`.
    pub fn constant(h: SimpleStrategy) -> Self {
        let eval = h.clone();
        Self::new("constant", move |_| Ok(h.clone()), move |hist, f| pairing(&eval, hist, f))
    }

    /// `Hⁿ = (1/n) Σ_{i≤n} i² δ_{x_i}` with `x_i = 1 − 1/i`.
    ///
    /// The evaluator takes Cesàro means of `i² f(x_i)` over every node
    /// available on the history's grid and accepts when the mean at the last
    /// node agrees with the mean at half of it.
    pub fn example21() -> Self {
        Self::new(
            "example21",
            |n| {
                if n == 0 {
                    return Err(Error::InvalidParameter("approximant index must be >= 1".into()));
                }
                let legs: Vec<(f64, f64)> =
                    (1..=n).map(|i| (example21_node(i), (i * i) as f64 / n as f64)).collect();
                Ok(SimpleStrategy::constant(&legs))
            },
            |hist, f| {
                let grid = hist.maturities();
                let mut sum = 0.0;
                let mut means = Vec::new();
                for i in 1.. {
                    let Some(m) = grid.index_of(example21_node(i)) else { break };
                    sum += (i * i) as f64 * f[m];
                    means.push(sum / i as f64);
                }
                if means.len() < 4 {
                    return FunctionalValue::NotInDomain;
                }
                let last = means[means.len() - 1];
                let half = means[means.len() / 2 - 1];
                if (last - half).abs() <= 1e-9 * (1.0 + last.abs()) {
                    FunctionalValue::Value(last)
                } else {
                    FunctionalValue::NotInDomain
                }
            },
        )
    }

    /// Approximants replace each piece's measure by its `n`-cell Dirac
    /// approximation, with atoms split onto the bracketing maturity nodes.
    pub fn measure_approximation(phi: MeasureSimpleProcess, nodes: Vec<f64>, times: Vec<f64>) -> Self {
        let phi = Arc::new(phi);
        let (p1, n1, t1) = (phi.clone(), nodes.clone(), times.clone());
        Self::new(
            "measure-approximation",
            move |n| {
                let mut legs = Vec::new();
                for piece in p1.pieces() {
                    let approx = dirac_approximate(&piece.measure, n)?;
                    let event = Arc::new(piece.event.clone());
                    let (start, end) = (piece.start, piece.end);
                    for (k, w) in approx.to_grid_atoms(&n1)? {
                        let event = event.clone();
                        let t = t1.clone();
                        let weight = Weight::Predictable(Arc::new(move |h: &History| {
                            let now = t[h.now()];
                            if now >= start - NODE_TOL && now < end - NODE_TOL && event[h.scenario()] {
                                w
                            } else {
                                0.0
                            }
                        }));
                        legs.push(Leg { maturity: n1[k], weight });
                    }
                }
                Ok(SimpleStrategy::new(legs))
            },
            move |hist, f| {
                let now = times[hist.now()];
                let mut acc = 0.0;
                for piece in phi.pieces() {
                    if now >= piece.start - NODE_TOL && now < piece.end - NODE_TOL && piece.event[hist.scenario()] {
                        match pair_measure_curve(&piece.measure, &nodes, f) {
                            Ok(v) => acc += v,
                            Err(_) => return FunctionalValue::NotInDomain,
                        }
                    }
                }
                FunctionalValue::Value(acc)
            },
        )
    }

    /// Approximant `n` is the entry with the largest index `<= n` (the first
    /// entry below that). The evaluator pairs with the last entry.
    pub fn custom_table(mut entries: Vec<(usize, SimpleStrategy)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter("custom table needs at least one entry".into()));
        }
        entries.sort_by_key(|e| e.0);
        let entries = Arc::new(entries);
        let e2 = entries.clone();
        Ok(Self::new(
            "custom",
            move |n| {
                let pos = entries.partition_point(|e| e.0 <= n);
                Ok(entries[pos.saturating_sub(1)].1.clone())
            },
            move |hist, f| pairing(&e2[e2.len() - 1].1, hist, f),
        ))
    }
}

/// `Σ_i h^i f(x_i)` with weights read from the history.
fn pairing(h: &SimpleStrategy, hist: &History, f: &[f64]) -> FunctionalValue {
    let family = hist.family();
    let mut acc = 0.0;
    for leg in h.legs() {
        let (Ok(m), Ok(w)) = (family.maturity_grid().require(leg.maturity), leg.weight.resolve(family)) else {
            return FunctionalValue::NotInDomain;
        };
        acc += w.eval(hist) * f[m];
    }
    if acc.is_finite() {
        FunctionalValue::Value(acc)
    } else {
        FunctionalValue::NotInDomain
    }
}

/// Pairings `kⁿ(f)` along the schedule; the last value is returned when the
/// final two differ by less than `tol`.
pub fn evaluate_functional(
    g: &GeneralizedStrategy,
    history: &History,
    f: &[f64],
    schedule: &[usize],
    tol: f64,
) -> FunctionalValue {
    let mut values = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let Ok(h) = g.approximant(n) else { return FunctionalValue::NotInDomain };
        match pairing(&h, history, f) {
            FunctionalValue::Value(v) => values.push(v),
            FunctionalValue::NotInDomain => return FunctionalValue::NotInDomain,
        }
    }
    match values.as_slice() {
        [.., a, b] if (b - a).abs() < tol => FunctionalValue::Value(*b),
        [b] => FunctionalValue::Value(*b),
        _ => FunctionalValue::NotInDomain,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedDiagnostics {
    pub schedule: Vec<usize>,
    /// `emery_distance_proxy(Y_{n_j}, Y_{n_{j+1}})`.
    pub distances: Vec<ProxyEstimate>,
    pub converged: bool,
}

fn check_schedule(schedule: &[usize]) -> Result<()> {
    if schedule.len() < 2 || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(format!("schedule must be increasing with >= 2 entries: {schedule:?}")));
    }
    Ok(())
}

/// Integrates the approximants along the schedule and tracks successive
/// Cauchy distances. Only two integrals are held at a time.
pub fn integrate_generalized(
    g: &GeneralizedStrategy,
    family: &dyn PathFamily,
    schedule: &[usize],
    dictionary: &ControlDictionary,
    cauchy_tol: f64,
) -> Result<(ProcessPaths, GeneralizedDiagnostics)> {
    integrate_generalized_with(g, family, schedule, dictionary, cauchy_tol, |_, _| Ok(()))
}

/// As [`integrate_generalized`], calling `inspect(n, Y_n)` on every integral.
pub fn integrate_generalized_with(
    g: &GeneralizedStrategy,
    family: &dyn PathFamily,
    schedule: &[usize],
    dictionary: &ControlDictionary,
    cauchy_tol: f64,
    mut inspect: impl FnMut(usize, &ProcessPaths) -> Result<()>,
) -> Result<(ProcessPaths, GeneralizedDiagnostics)> {
    check_schedule(schedule)?;
    let mut prev = integrate_simple(&g.approximant(schedule[0])?, family)?;
    inspect(schedule[0], &prev)?;
    let mut distances = Vec::with_capacity(schedule.len() - 1);
    for &n in &schedule[1..] {
        let next = integrate_simple(&g.approximant(n)?, family)?;
        inspect(n, &next)?;
        distances.push(emery_distance_proxy(&prev, &next, dictionary)?);
        prev = next;
    }
    let first = distances[0];
    let last = distances[distances.len() - 1];
    if last.value > 2.0 * first.value + 3.0 * last.se && last.value > cauchy_tol {
        return Err(Error::Divergence(distances.iter().map(|d| d.value).collect()));
    }
    let converged = last.value < cauchy_tol;
    log::debug!("{}: distances {:?}", g.name(), distances.iter().map(|d| d.value).collect::<Vec<_>>());
    Ok((prev, GeneralizedDiagnostics { schedule: schedule.to_vec(), distances, converged }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ScenarioSet, TimeGrid};
    use crate::models::{example21_maturity_grid, gen_example21, Example21Params};

    #[test]
    fn example21_functional_domain() {
        let tg = TimeGrid::uniform(1.0, 4).unwrap();
        let mg = example21_maturity_grid(200, &[]).unwrap();
        let fam = gen_example21(Example21Params { n_max: 200, horizon: 1.0 }, &tg, &mg, ScenarioSet::new(2, 1).unwrap())
            .unwrap();
        let hist = History::new(&fam, 0, 2);
        let g = GeneralizedStrategy::example21();
        let sq: Vec<f64> = mg.points().iter().map(|x| (1.0 - x) * (1.0 - x)).collect();
        let one = vec![1.0; mg.len()];
        let zero = vec![0.0; mg.len()];
        let v = evaluate_functional(&g, &hist, &sq, &DEFAULT_SCHEDULE, 1e-9).value().unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(evaluate_functional(&g, &hist, &one, &DEFAULT_SCHEDULE, 1e-9), FunctionalValue::NotInDomain);
        assert_eq!(evaluate_functional(&g, &hist, &zero, &DEFAULT_SCHEDULE, 1e-9), FunctionalValue::Value(0.0));
        assert!((g.evaluate(&hist, &sq).value().unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(g.evaluate(&hist, &one), FunctionalValue::NotInDomain);
    }

    #[test]
    fn constant_sequence_converges_immediately() {
        let tg = TimeGrid::uniform(1.0, 8).unwrap();
        let mg = example21_maturity_grid(4, &[]).unwrap();
        let fam = gen_example21(Example21Params { n_max: 4, horizon: 1.0 }, &tg, &mg, ScenarioSet::new(50, 3).unwrap())
            .unwrap();
        let g = GeneralizedStrategy::constant(SimpleStrategy::dirac(example21_node(2)));
        let (_, diag) = integrate_generalized(&g, &fam, &[1, 2, 3], &ControlDictionary::default(), 1e-9).unwrap();
        assert!(diag.converged);
        assert!(diag.distances.iter().all(|d| d.value == 0.0));
        assert!(integrate_generalized(&g, &fam, &[2], &ControlDictionary::default(), 1e-9).is_err());
    }
}
