//! One function per subcommand. Each writes its data files into the run
//! directory and returns the verdicts.

use bondint::duality::*;
use bondint::integration::*;
use bondint::io::{write_family, write_family_csv};
use bondint::measure::*;
use bondint::models::hjm::analytic;
use bondint::models::*;
use bondint::paths::family_column;
use bondint::seminorm::{continuity_profile, emery_distance_proxy, ControlDictionary, ContinuityPoint};
use bondint::stats::{combined_se, Estimate};
use bondint::*;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{Cell, RunOutput, Verdicts};

/// Standard errors per Monte Carlo band.
const K_SE: f64 = 3.0;
/// Relative band around the expected error ratio in convergence checks.
const HEDGE_BAND: f64 = 0.25;
const PAIRING_BAND: f64 = 0.2;
/// Largest family written as CSV next to the binary file, in values.
pub const CSV_VALUE_LIMIT: usize = 200_000;

type Res<T> = std::result::Result<T, CliError>;

fn params(cfg: &ExperimentConfig) -> GaussianHjmParams {
    let m = &cfg.model;
    GaussianHjmParams {
        factors: m.sigma.iter().zip(&m.decay).map(|(&sigma, &decay)| Factor { sigma, decay }).collect(),
        curve: InitialCurve::Flat(m.rate),
        lambda: m.lambda.clone(),
        horizon: cfg.grid.horizon,
        max_maturity: cfg.grid.max_maturity,
    }
}

fn scenarios(cfg: &ExperimentConfig) -> Res<ScenarioSet> {
    Ok(ScenarioSet::new(cfg.scenarios.count, cfg.scenarios.seed)?)
}

fn market(cfg: &ExperimentConfig, steps: usize, extra: &[f64]) -> Res<BondMarket> {
    let mats = MaturityGrid::union(&[&cfg.grid.maturities, extra])?;
    let times = TimeGrid::uniform(cfg.grid.horizon, steps)?;
    Ok(gen_gaussian_market(&params(cfg), &times, &mats, scenarios(cfg)?)?)
}

fn example21_family(cfg: &ExperimentConfig, extra: &[f64]) -> Res<Example21Family> {
    let inside: Vec<f64> = cfg.grid.maturities.iter().chain(extra).copied().filter(|&x| (0.0..=1.0).contains(&x)).collect();
    let mg = example21_maturity_grid(cfg.model.n_max, &inside)?;
    let times = TimeGrid::uniform(cfg.grid.horizon, cfg.grid.steps)?;
    let p = Example21Params { n_max: cfg.model.n_max, horizon: cfg.grid.horizon };
    Ok(gen_example21(p, &times, &mg, scenarios(cfg)?)?)
}

fn dictionary(cfg: &ExperimentConfig) -> ControlDictionary {
    ControlDictionary::standard(cfg.strategy.random_controls, cfg.strategy.control_seed)
}

fn est(e: &Estimate) -> serde_json::Value {
    json!({ "mean": e.mean, "se": e.se })
}

fn sup_abs(y: &ProcessPaths, offset: impl Fn(f64) -> f64) -> Estimate {
    let t = y.grid().points();
    let xs: Vec<f64> = (0..y.scenarios())
        .map(|s| y.path(s).iter().zip(t).fold(0.0f64, |m, (v, &t)| m.max((v - offset(t)).abs())))
        .collect();
    Estimate::from_samples(&xs)
}

/// Each value at most the previous one plus the combined band.
fn non_increasing(vals: &[Estimate]) -> bool {
    vals.windows(2).all(|w| w[1].mean <= w[0].mean + K_SE * combined_se(w[0].se, w[1].se))
}

fn check_schedule(cfg: &ExperimentConfig) -> Res<()> {
    if let Some(&n) = cfg.strategy.schedule.iter().find(|&&n| n > cfg.model.n_max) {
        return Err(CliError::Config {
            key: "strategy.schedule".into(),
            message: format!("entry {n} exceeds model.n_max = {}", cfg.model.n_max),
        });
    }
    Ok(())
}

pub fn example21(cfg: &ExperimentConfig, out: &mut RunOutput) -> Res<Verdicts> {
    check_schedule(cfg)?;
    let fam = example21_family(cfg, &[])?;
    let dict = dictionary(cfg);
    let a = ProcessPaths::deterministic(fam.time_grid().clone(), fam.scenarios(), |t| t);
    let mut rows = Vec::new();
    let mut dist = Vec::new();
    let mut terminal = Estimate { mean: f64::NAN, se: f64::NAN };
    let g = GeneralizedStrategy::example21();
    let schedule = &cfg.strategy.schedule;
    let mut record = |n: usize, y: &ProcessPaths| -> bondint::Result<()> {
        let d = emery_distance_proxy(y, &a, &dict)?;
        let sup = sup_abs(y, |t| t);
        terminal = Estimate::from_samples(&y.terminal());
        rows.push(vec![
            Cell::U(n),
            d.value.into(),
            d.se.into(),
            sup.mean.into(),
            sup.se.into(),
            terminal.mean.into(),
            terminal.se.into(),
        ]);
        dist.push(Estimate { mean: d.value, se: d.se });
        Ok(())
    };
    let cauchy = if schedule.len() >= 2 {
        let (_, diag) = integrate_generalized_with(&g, &fam, schedule, &dict, cfg.strategy.cauchy_tol, &mut record)?;
        Some(diag)
    } else {
        let y = integrate_simple(&g.approximant(schedule[0])?, &fam)?;
        record(schedule[0], &y)?;
        None
    };
    out.csv(
        "example21.csv",
        &["n", "emery_distance", "emery_se", "sup_dev_mean", "sup_dev_se", "terminal_mean", "terminal_se"],
        rows,
    )?;
    let mut v = Verdicts::default();
    let converges = non_increasing(&dist) && dist.last().unwrap().mean <= dist[0].mean;
    v.check("converges_to_A", converges);
    v.check("limit_mean_positive", terminal.mean - K_SE * terminal.se > 0.0);
    v.detail("emery_distance", dist.iter().map(|d| d.mean).collect::<Vec<_>>());
    v.detail("terminal_mean", est(&terminal));
    if let Some(diag) = cauchy {
        v.detail("cauchy_distances", diag.distances.iter().map(|d| d.value).collect::<Vec<_>>());
        v.detail("cauchy_converged", diag.converged);
    }
    Ok(v)
}

pub fn example22(cfg: &ExperimentConfig, out: &mut RunOutput) -> Res<Verdicts> {
    check_schedule(cfg)?;
    let fam = example21_family(cfg, &[])?;
    let g = GeneralizedStrategy::example21();
    let e22 = &cfg.strategy.example22;
    let mut table = Vec::new();
    let mut norms = Vec::new();
    let mut v = Verdicts::default();
    for &k in &e22.k {
        let pert = gen_example22_perturbed(&fam, k)?;
        let mut sups = Vec::new();
        for &n in &cfg.strategy.schedule {
            let y = integrate_simple(&g.approximant(n)?, &pert)?;
            let e = sup_abs(&y, |_| 0.0);
            table.push(vec![Cell::U(k), Cell::U(n), e.mean.into(), e.se.into()]);
            sups.push(e);
        }
        let last = sups[sups.len() - 1];
        v.check(format!("k{k}_integral_vanishes"), non_increasing(&sups) && last.mean < e22.threshold);
        v.detail(&format!("k{k}_final_sup"), est(&last));

        let bound = 1.0 - (-cfg.grid.horizon / (k * k) as f64).exp();
        let xk = example21_node(k);
        let mut ok = true;
        for (m, &x) in fam.maturity_grid().points().iter().enumerate() {
            if x <= xk + 1e-12 {
                continue;
            }
            let a = family_column(&fam, m).terminal();
            let b = family_column(&pert, m).terminal();
            let sq: Vec<f64> = a.iter().zip(&b).map(|(a, b)| (a - b) * (a - b)).collect();
            let e = Estimate::from_samples(&sq);
            ok &= e.mean <= bound + K_SE * e.se;
            norms.push(vec![Cell::U(k), x.into(), e.mean.into(), e.se.into(), bound.into()]);
        }
        v.check(format!("k{k}_perturbation_bound"), ok);
    }
    out.csv("example22.csv", &["k", "n", "sup_mean", "sup_se"], table)?;
    out.csv("perturbation.csv", &["k", "maturity", "second_moment", "se", "bound"], norms)?;
    Ok(v)
}

fn utility_spec(cfg: &ExperimentConfig) -> Res<UtilitySpec> {
    Ok(match cfg.utility.kind.as_str() {
        "log" => UtilitySpec::log(),
        _ => UtilitySpec::power(cfg.utility.p)?,
    })
}

pub fn utility(cfg: &ExperimentConfig, out: &mut RunOutput) -> Res<Verdicts> {
    let uc = &cfg.utility;
    let all: Vec<f64> = uc.sets.iter().flatten().copied().collect();
    let mkt = market(cfg, cfg.grid.steps, &all)?;
    let u = utility_spec(cfg)?;
    let ow = optimal_terminal_wealth(uc.x, &mkt, &u)?;
    let opt = OptimizerConfig {
        restarts: uc.restarts,
        optimizer_scenarios: uc.optimizer_scenarios,
        ..OptimizerConfig::default()
    };
    let nested = primal_nested(&uc.sets, uc.x, &mkt, &u, &opt)?;
    let rows = nested
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let mats = p.maturities.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(";");
            vec![Cell::U(j + 1), mats.into(), p.value.mean.into(), p.value.se.into(), Cell::U(p.iterations), p.grad_norm.into()]
        })
        .collect();
    out.csv("primal.csv", &["j", "maturities", "u_j", "se", "iterations", "grad_norm"], rows)?;

    let ratio = (uc.y_hi / uc.y_lo).ln() / (uc.y_points - 1) as f64;
    let ys: Vec<f64> = (0..uc.y_points).map(|k| uc.y_lo * (ratio * k as f64).exp()).collect();
    let mut dual_rows = Vec::new();
    for &y in &ys {
        let d = dual_value(y, &mkt, &u)?;
        dual_rows.push(vec![y.into(), d.mean.into(), d.se.into()]);
    }
    out.csv("dual.csv", &["y", "v", "se"], dual_rows)?;
    let gap = conjugacy_gap(uc.x, &ys, &mkt, &u, ow.utility)?;

    let mut v = Verdicts::default();
    v.check("monotone", nested.windows(2).all(|w| w[1].value.mean >= w[0].value.mean));
    v.check("gap_within", gap.within);
    let top = &nested[nested.len() - 1].value;
    v.check("largest_set_matches_dual", (top.mean - ow.utility.mean).abs() <= K_SE * combined_se(top.se, ow.utility.se));
    v.detail("u_dual", est(&ow.utility));
    v.detail("y_star", ow.y_hat);
    v.detail("gap", gap.gap);
    v.detail("gap_se", gap.combined_se);
    v.detail("u_j", nested.iter().map(|p| p.value.mean).collect::<Vec<_>>());
    if u.kind() == UtilityKind::Log && (uc.x - 1.0).abs() < 1e-15 {
        v.detail("closed_form_complete", analytic::complete_log_growth(&params(cfg)));
    }
    Ok(v)
}

pub fn superrep(cfg: &ExperimentConfig, out: &mut RunOutput) -> Res<Verdicts> {
    let sr = &cfg.strategy.superrep;
    let p = params(cfg);
    let t = cfg.grid.horizon;
    let extra: Vec<f64> = sr.tradables.iter().copied().chain([t, sr.maturity]).collect();
    let mkt = market(cfg, cfg.grid.steps, &extra)?;
    let m = mkt.maturities().require(sr.maturity)?;
    let p0 = p.curve.discount(sr.maturity);
    let strike = sr.strike.unwrap_or(p0 / p.curve.discount(t));
    let claim = if sr.claim == "call" { ClaimSpec::zcb_call(m, strike) } else { ClaimSpec::forward(m) };

    let mut v = Verdicts::default();
    let mut rows = Vec::new();
    let fwd = superrep_price(&ClaimSpec::forward(m), &mkt, &PricingMeasures::Complete)?;
    rows.push(vec!["forward".into(), fwd.price.mean.into(), fwd.price.se.into(), p0.into()]);
    v.check("forward_price", fwd.price.within(p0, K_SE));

    let plain = superrep_price(&claim, &mkt, &PricingMeasures::Complete)?;
    let cv = control_variate_price(&claim, &mkt, &sr.tradables)?;
    let reference = if sr.claim == "call" { analytic::zcb_call(&p, t, sr.maturity, strike) } else { p0 };
    rows.push(vec![format!("{} plain", sr.claim).into(), plain.price.mean.into(), plain.price.se.into(), reference.into()]);
    rows.push(vec![format!("{} control variate", sr.claim).into(), cv.mean.into(), cv.se.into(), reference.into()]);
    let rel = (cv.mean - reference).abs() / reference.abs().max(f64::MIN_POSITIVE);
    v.check("claim_price", rel <= sr.rel_tol);
    v.detail("claim_relative_error", rel);
    if !sr.loadings.is_empty() {
        let measures = PricingMeasures::Orthogonal { tradables: sr.tradables.clone(), loadings: sr.loadings.clone() };
        let up = superrep_price(&claim, &mkt, &measures)?;
        rows.push(vec![format!("{} superreplication", sr.claim).into(), up.price.mean.into(), up.price.se.into(), reference.into()]);
        v.detail("superreplication_argmax_loading", sr.loadings[up.argmax]);
    }
    out.csv("prices.csv", &["method", "price", "se", "reference"], rows)?;

    let hedge_cfg = HedgeConfig { tradables: sr.tradables.clone(), basis: HedgeBasis::Hat(sr.basis_size) };
    let mut maes = Vec::new();
    let mut hedge_rows = Vec::new();
    for &steps in &sr.hedge_steps {
        let mk = if steps == cfg.grid.steps { mkt.clone() } else { market(cfg, steps, &extra)? };
        let h = superhedge_strategy(&claim, &mk, &hedge_cfg)?;
        hedge_rows.push(vec![
            Cell::U(steps),
            h.x0.into(),
            h.mean_abs_error.mean.into(),
            h.mean_abs_error.se.into(),
            h.shortfall.mean.into(),
            Cell::U(h.ridge_steps),
        ]);
        maes.push((steps, h.mean_abs_error.mean));
    }
    out.csv("hedge.csv", &["steps", "x0", "mae", "mae_se", "shortfall", "ridge_steps"], hedge_rows)?;
    if maes.len() >= 2 {
        let (s0, e0) = maes[0];
        let (s1, e1) = maes[maes.len() - 1];
        let expected = (s1 as f64 / s0 as f64).sqrt();
        let ratio = e0 / e1;
        v.check("hedge_error_rate", (ratio / expected - 1.0).abs() <= HEDGE_BAND);
        v.detail("hedge_error_ratio", ratio);
        v.detail("hedge_expected_ratio", expected);
    }
    Ok(v)
}

fn configured_measure(cfg: &ExperimentConfig) -> Res<SignedMeasureGrid> {
    let ms = &cfg.strategy.measure;
    Ok(match ms.density.as_str() {
        "uniform" => SignedMeasureGrid::uniform(ms.lo, ms.hi, ms.mass, ms.cells)?,
        _ => SignedMeasureGrid::exponential_tilt(ms.lo, ms.hi, ms.rate, ms.mass, ms.cells)?,
    })
}

pub fn measure(cfg: &ExperimentConfig, out: &mut RunOutput) -> Res<Verdicts> {
    let ms = &cfg.strategy.measure;
    let m = configured_measure(cfg)?;
    let mut v = Verdicts::default();
    let mut rows = Vec::new();
    let mut errs = Vec::new();
    let mut tv_ok = true;
    for &n in &ms.budgets {
        let a = dirac_approximate(&m, n)?;
        let e = lipschitz_pairing_error(&m, &a);
        tv_ok &= a.total_variation() <= m.total_variation();
        rows.push(vec![Cell::U(n), Cell::U(a.atoms().len()), e.into(), a.total_variation().into(), m.total_variation().into()]);
        errs.push((n, e));
    }
    out.csv("pairing.csv", &["budget", "atoms", "w1_error", "tv", "tv_original"], rows)?;
    let rate_ok = errs.windows(2).all(|w| {
        let expected = w[1].0 as f64 / w[0].0 as f64;
        ((w[0].1 / w[1].1) / expected - 1.0).abs() <= PAIRING_BAND
    });
    v.check("pairing_error_rate", rate_ok);
    v.check("total_variation_bound", tv_ok);

    let nodes: Vec<f64> =
        (0..ms.nodes).map(|k| ms.lo + (ms.hi - ms.lo) * k as f64 / (ms.nodes - 1) as f64).collect();
    let mkt = market(cfg, cfg.grid.steps, &nodes)?;
    let fam = &mkt.discounted;
    let grid_nodes = fam.maturity_grid().points().to_vec();
    let times = fam.time_grid().points().to_vec();
    let phi = MeasureSimpleProcess::new(vec![MeasurePiece::always(0.0, cfg.grid.horizon, fam.scenarios(), m)])?;
    let exact = integrate_measure_process(&phi, fam)?.terminal();
    let g = GeneralizedStrategy::measure_approximation(phi, grid_nodes, times);
    let mut int_rows = Vec::new();
    let mut int_errs = Vec::new();
    for &n in &ms.budgets {
        let y = integrate_simple(&g.approximant(n)?, fam)?.terminal();
        let abs: Vec<f64> = y.iter().zip(&exact).map(|(a, b)| (a - b).abs()).collect();
        let e = Estimate::from_samples(&abs);
        int_rows.push(vec![Cell::U(n), e.mean.into(), e.se.into()]);
        int_errs.push(e);
    }
    out.csv("integral.csv", &["budget", "terminal_abs_error", "se"], int_rows)?;
    v.check("integral_error_decreasing", non_increasing(&int_errs));
    v.detail("w1_errors", errs.iter().map(|e| e.1).collect::<Vec<_>>());
    v.detail("integral_errors", int_errs.iter().map(|e| e.mean).collect::<Vec<_>>());
    Ok(v)
}

pub fn continuity(cfg: &ExperimentConfig, out: &mut RunOutput) -> Res<Verdicts> {
    let c = &cfg.strategy.continuity;
    let gaussian = cfg.model.tag == "gaussian";
    let base = c.base.unwrap_or(if gaussian { 2.0 } else { 0.5 });
    let offsets = c.offsets.clone().unwrap_or_else(|| vec![0.2, 0.1, 0.05, 0.025]);
    let mut points: Vec<f64> = offsets.iter().map(|d| base + d).collect();
    points.push(base);
    let dict = dictionary(cfg);
    let profile: Vec<ContinuityPoint> = if gaussian {
        let mkt = market(cfg, cfg.grid.steps, &points)?;
        continuity_profile(&mkt.discounted, base, &offsets, &dict)?
    } else {
        let fam = example21_family(cfg, &points)?;
        continuity_profile(&fam, base, &offsets, &dict)?
    };
    let rows = profile
        .iter()
        .map(|p| vec![p.offset.into(), p.maturity.into(), p.proxy.value.into(), p.proxy.se.into()])
        .collect();
    out.csv("continuity.csv", &["offset", "maturity", "proxy", "se"], rows)?;
    let mut sorted = profile.clone();
    sorted.sort_by(|a, b| b.offset.total_cmp(&a.offset));
    let vals: Vec<Estimate> = sorted.iter().map(|p| Estimate { mean: p.proxy.value, se: p.proxy.se }).collect();
    let mut v = Verdicts::default();
    v.check("monotone_in_offset", non_increasing(&vals));
    v.detail("proxy", vals.iter().map(|e| e.mean).collect::<Vec<_>>());
    Ok(v)
}

fn family_outputs(out: &mut RunOutput, fam: &dyn PathFamily, tag: &str, seed: u64) -> Res<bool> {
    if out.binary_enabled() {
        let mut buf = Vec::new();
        write_family(&mut buf, fam, tag, seed)?;
        out.binary("family.bin", &buf)?;
    }
    let size = fam.scenarios() * fam.time_grid().len() * fam.maturity_grid().len();
    if out.csv_enabled() && size <= CSV_VALUE_LIMIT {
        let mut buf = Vec::new();
        write_family_csv(&mut buf, fam)?;
        out.csv_bytes("family.csv", &buf)?;
    }
    let finite = (0..fam.scenarios()).all(|s| {
        (0..fam.time_grid().len()).all(|n| (0..fam.maturity_grid().len()).all(|m| fam.value(s, n, m).is_finite()))
    });
    Ok(finite)
}

pub fn simulate(cfg: &ExperimentConfig, out: &mut RunOutput) -> Res<Verdicts> {
    let seed = cfg.scenarios.seed;
    let mut v = Verdicts::default();
    let finite = if cfg.model.tag == "gaussian" {
        let mkt = market(cfg, cfg.grid.steps, &[])?;
        let ok = family_outputs(out, &mkt.prices, "gaussian", seed)?;
        let z = Estimate::from_samples(&mkt.terminal_density());
        v.detail("terminal_density_mean", est(&z));
        ok
    } else {
        let fam = example21_family(cfg, &[])?;
        family_outputs(out, &fam, "example21", seed)?
    };
    v.check("finite_values", finite);
    Ok(v)
}
