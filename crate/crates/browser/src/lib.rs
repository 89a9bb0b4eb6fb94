//! wasm-bindgen exports for the static page in `www/`. Each export returns a
//! JSON string so the page only needs `JSON.parse`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use bondint::integration::{integrate_simple, GeneralizedStrategy};
use bondint::measure::{dirac_approximate, lipschitz_pairing_error, SignedMeasureGrid};
use bondint::models::*;
use bondint::stats::Estimate;
use bondint::{FamilyPaths, MaturityGrid, PathFamily, ScenarioSet, TimeGrid};

const SHOWN_PATHS: usize = 12;

fn js(r: bondint::Result<Value>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Approximant integrals `H^n·M` for the example21 family against `A_t = t`.
pub fn example21_convergence_value(n_max: usize, steps: usize, scenarios: usize, seed: u64) -> bondint::Result<Value> {
    let fam = gen_example21(
        Example21Params { n_max, horizon: 1.0 },
        &TimeGrid::uniform(1.0, steps)?,
        &example21_maturity_grid(n_max, &[])?,
        ScenarioSet::new(scenarios, seed)?,
    )?;
    let times = fam.time_grid().points().to_vec();
    let g = GeneralizedStrategy::example21();
    let mut rows = Vec::new();
    let mut n = 1;
    while n <= n_max {
        let y = integrate_simple(&g.approximant(n)?, &fam)?;
        let sups: Vec<f64> = (0..scenarios)
            .map(|s| y.path(s).iter().zip(&times).fold(0.0f64, |m, (v, t)| m.max((v - t).abs())))
            .collect();
        let sup = Estimate::from_samples(&sups);
        let terminal = Estimate::from_samples(&y.terminal());
        let paths: Vec<&[f64]> = (0..scenarios.min(SHOWN_PATHS)).map(|s| y.path(s)).collect();
        rows.push(json!({
            "n": n,
            "sup_mean": sup.mean,
            "sup_se": sup.se,
            "terminal_mean": terminal.mean,
            "terminal_se": terminal.se,
            "paths": paths,
        }));
        n = if n == n_max { n + 1 } else { (2 * n).min(n_max) };
    }
    Ok(json!({ "times": times, "approximants": rows }))
}

/// Exponentially tilted density on `[lo, hi]` and its atomic approximation.
pub fn dirac_approximation_value(lo: f64, hi: f64, rate: f64, budget: usize) -> bondint::Result<Value> {
    let m = SignedMeasureGrid::exponential_tilt(lo, hi, rate, 1.0, 256)?;
    let a = dirac_approximate(&m, budget)?;
    let cells: Vec<[f64; 3]> = m.cells().iter().map(|c| [c.lo, c.hi, c.density]).collect();
    let atoms: Vec<[f64; 2]> = a.atoms().iter().map(|&(x, w)| [x, w]).collect();
    Ok(json!({
        "cells": cells,
        "atoms": atoms,
        "pairing_error": lipschitz_pairing_error(&m, &a),
        "total_variation": [m.total_variation(), a.total_variation()],
    }))
}

/// Bond price paths `P(t, T)` and discounted paths under the default
/// two-factor Gaussian model.
pub fn bond_paths_value(maturity: f64, steps: usize, scenarios: usize, seed: u64) -> bondint::Result<Value> {
    let params = GaussianHjmParams::default();
    let market = gen_gaussian_market(
        &params,
        &TimeGrid::uniform(params.horizon, steps)?,
        &MaturityGrid::new(vec![maturity])?,
        ScenarioSet::new(scenarios, seed)?,
    )?;
    let shown = scenarios.min(SHOWN_PATHS);
    let column = |f: &FamilyPaths| -> Vec<Vec<f64>> {
        (0..shown).map(|s| (0..f.time_grid().len()).map(|n| f.value(s, n, 0)).collect()).collect()
    };
    let fam = &market.discounted;
    let mean: Vec<f64> = (0..fam.time_grid().len())
        .map(|n| (0..scenarios).map(|s| fam.value(s, n, 0)).sum::<f64>() / scenarios as f64)
        .collect();
    Ok(json!({
        "times": market.prices.time_grid().points(),
        "prices": column(&market.prices),
        "discounted": column(fam),
        "discounted_mean": mean,
        "p0": params.curve.discount(maturity),
    }))
}

#[wasm_bindgen]
pub fn example21_convergence(n_max: u32, steps: u32, scenarios: u32, seed: u32) -> Result<String, JsValue> {
    js(example21_convergence_value(n_max as usize, steps as usize, scenarios as usize, seed.into()))
}

#[wasm_bindgen]
pub fn dirac_approximation(lo: f64, hi: f64, rate: f64, budget: u32) -> Result<String, JsValue> {
    js(dirac_approximation_value(lo, hi, rate, budget as usize))
}

#[wasm_bindgen]
pub fn bond_paths(maturity: f64, steps: u32, scenarios: u32, seed: u32) -> Result<String, JsValue> {
    js(bond_paths_value(maturity, steps as usize, scenarios as usize, seed.into()))
}
