//! Experiment configuration: INI-style sections with `key = value` lines and
//! `#` comments, parsed as TOML. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub grid: GridSection,
    pub scenarios: ScenarioSection,
    pub model: ModelSection,
    pub strategy: StrategySection,
    pub utility: UtilitySection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Trading horizon `T`.
    pub horizon: f64,
    /// Longest maturity `T*`.
    pub max_maturity: f64,
    pub steps: usize,
    pub maturities: Vec<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { horizon: 1.0, max_maturity: 5.0, steps: 128, maturities: vec![1.0, 2.0, 3.0, 4.0, 5.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub count: usize,
    pub seed: u64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self { count: 100_000, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// `gaussian` or `example21`.
    pub tag: String,
    pub sigma: Vec<f64>,
    pub decay: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Flat initial forward rate.
    pub rate: f64,
    pub n_max: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            tag: "gaussian".into(),
            sigma: vec![0.02, 0.015],
            decay: vec![0.1, 1.0],
            lambda: vec![0.18, 0.24],
            rate: 0.03,
            n_max: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategySection {
    pub schedule: Vec<usize>,
    pub cauchy_tol: f64,
    pub random_controls: usize,
    pub control_seed: u64,
    pub example22: Example22Section,
    pub superrep: SuperrepSection,
    pub measure: MeasureSection,
    pub continuity: ContinuitySection,
}

impl Default for StrategySection {
    fn default() -> Self {
        Self {
            schedule: vec![10, 20, 50, 100, 200],
            cauchy_tol: 0.05,
            random_controls: 8,
            control_seed: 0x5eed,
            example22: Example22Section::default(),
            superrep: SuperrepSection::default(),
            measure: MeasureSection::default(),
            continuity: ContinuitySection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Example22Section {
    pub k: Vec<usize>,
    /// Largest accepted `E[sup|H^n.M^k|]` at the last schedule entry.
    pub threshold: f64,
}

impl Default for Example22Section {
    fn default() -> Self {
        Self { k: vec![2, 5], threshold: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuperrepSection {
    /// `call` or `forward`.
    pub claim: String,
    pub maturity: f64,
    /// Defaults to the forward price `P(0,T*)/P(0,T)`.
    pub strike: Option<f64>,
    pub tradables: Vec<f64>,
    pub hedge_steps: Vec<usize>,
    pub basis_size: usize,
    /// Loadings on the direction orthogonal to the tradables; empty skips.
    pub loadings: Vec<f64>,
    pub rel_tol: f64,
}

impl Default for SuperrepSection {
    fn default() -> Self {
        Self {
            claim: "call".into(),
            maturity: 5.0,
            strike: None,
            tradables: vec![1.0, 5.0],
            hedge_steps: vec![32, 128],
            basis_size: 30,
            loadings: vec![],
            rel_tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureSection {
    /// `uniform` or `exponential_tilt`.
    pub density: String,
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
    pub rate: f64,
    pub cells: usize,
    pub budgets: Vec<usize>,
    /// Maturity nodes used for the integral comparison.
    pub nodes: usize,
}

impl Default for MeasureSection {
    fn default() -> Self {
        Self {
            density: "uniform".into(),
            lo: 2.0,
            hi: 4.0,
            mass: 1.0,
            rate: 0.5,
            cells: 64,
            budgets: vec![4, 8, 16, 32],
            nodes: 17,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuitySection {
    /// Defaults to 0.5 for `example21` and 2.0 for `gaussian`.
    pub base: Option<f64>,
    /// Defaults to 0.2, 0.1, 0.05, 0.025.
    pub offsets: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UtilitySection {
    /// `log` or `power`.
    pub kind: String,
    pub p: f64,
    pub x: f64,
    pub sets: Vec<Vec<f64>>,
    pub y_lo: f64,
    pub y_hi: f64,
    pub y_points: usize,
    pub restarts: usize,
    pub optimizer_scenarios: usize,
}

impl Default for UtilitySection {
    fn default() -> Self {
        Self {
            kind: "log".into(),
            p: 0.5,
            x: 1.0,
            sets: vec![vec![5.0], vec![2.0, 5.0], vec![2.0, 3.0, 5.0], vec![1.0, 2.0, 3.0, 4.0, 5.0]],
            y_lo: 0.5,
            y_hi: 2.0,
            y_points: 41,
            restarts: 3,
            optimizer_scenarios: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: String,
    /// Any of `csv`, `json`, `bin`. JSON verdicts and the manifest are always written.
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: "out".into(), formats: vec!["csv".into(), "json".into(), "bin".into()] }
    }
}

fn invalid(key: &str, msg: impl Into<String>) -> CliError {
    CliError::Config { key: key.into(), message: msg.into() }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// The resolved configuration echo written next to every run's outputs.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn wants(&self, format: &str) -> bool {
        self.output.formats.iter().any(|f| f == format)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let g = &self.grid;
        if !(g.horizon > 0.0) {
            return Err(invalid("grid.horizon", "must be > 0"));
        }
        if !(g.max_maturity >= g.horizon) {
            return Err(invalid("grid.max_maturity", "must be >= grid.horizon"));
        }
        if g.steps == 0 {
            return Err(invalid("grid.steps", "must be >= 1"));
        }
        if g.maturities.iter().any(|&x| !(x >= 0.0) || x > g.max_maturity) {
            return Err(invalid("grid.maturities", "entries must lie in [0, max_maturity]"));
        }
        if self.scenarios.count == 0 {
            return Err(invalid("scenarios.count", "must be >= 1"));
        }
        let m = &self.model;
        if m.tag != "gaussian" && m.tag != "example21" {
            return Err(invalid("model.tag", format!("unknown model `{}` (expected gaussian or example21)", m.tag)));
        }
        if m.sigma.is_empty() || m.sigma.len() != m.decay.len() || m.sigma.len() != m.lambda.len() {
            return Err(invalid("model.sigma", "sigma, decay and lambda need one entry per factor"));
        }
        if m.n_max < 2 {
            return Err(invalid("model.n_max", format!("n_max ≥ 2 required (got {})", m.n_max)));
        }
        let s = &self.strategy;
        if s.schedule.is_empty() || s.schedule.windows(2).any(|w| w[1] <= w[0]) || s.schedule[0] == 0 {
            return Err(invalid("strategy.schedule", "must be strictly increasing positive integers"));
        }
        if s.example22.k.contains(&0) {
            return Err(invalid("strategy.example22.k", "entries must be >= 1"));
        }
        let sr = &s.superrep;
        if sr.claim != "call" && sr.claim != "forward" {
            return Err(invalid("strategy.superrep.claim", format!("unknown claim `{}`", sr.claim)));
        }
        if !(sr.maturity > g.horizon && sr.maturity <= g.max_maturity) {
            return Err(invalid("strategy.superrep.maturity", "must lie in (horizon, max_maturity]"));
        }
        if sr.hedge_steps.is_empty() || sr.hedge_steps.contains(&0) {
            return Err(invalid("strategy.superrep.hedge_steps", "need positive step counts"));
        }
        if sr.tradables.is_empty() {
            return Err(invalid("strategy.superrep.tradables", "need at least one bond"));
        }
        let ms = &s.measure;
        if ms.density != "uniform" && ms.density != "exponential_tilt" {
            return Err(invalid("strategy.measure.density", format!("unknown density `{}`", ms.density)));
        }
        if !(ms.lo < ms.hi) || ms.lo < 0.0 || ms.hi > g.max_maturity {
            return Err(invalid("strategy.measure.lo", "need 0 <= lo < hi <= max_maturity"));
        }
        if ms.budgets.is_empty() || ms.budgets.contains(&0) {
            return Err(invalid("strategy.measure.budgets", "need positive atom budgets"));
        }
        if ms.nodes < 2 || ms.cells == 0 {
            return Err(invalid("strategy.measure.nodes", "need nodes >= 2 and cells >= 1"));
        }
        let u = &self.utility;
        if u.kind != "log" && u.kind != "power" {
            return Err(invalid("utility.kind", format!("unknown utility `{}`", u.kind)));
        }
        if !(u.x > 0.0) {
            return Err(invalid("utility.x", "initial capital must be > 0"));
        }
        if u.sets.is_empty() || u.sets.iter().any(|s| s.is_empty()) {
            return Err(invalid("utility.sets", "need non-empty maturity sets"));
        }
        if !(u.y_lo > 0.0 && u.y_hi > u.y_lo) || u.y_points < 2 {
            return Err(invalid("utility.y_lo", "need 0 < y_lo < y_hi and y_points >= 2"));
        }
        for f in &self.output.formats {
            if !["csv", "json", "bin"].contains(&f.as_str()) {
                return Err(invalid("output.formats", format!("unknown format `{f}`")));
            }
        }
        Ok(())
    }
}
