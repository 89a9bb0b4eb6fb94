use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bondint::integration::*;
use bondint::io::{read_family, read_family_csv, write_family, write_family_csv};
use bondint::measure::*;
use bondint::models::*;
use bondint::*;

fn random_family(rng: &mut ChaCha8Rng) -> FamilyPaths {
    let steps = rng.random_range(1..=8);
    let ns = rng.random_range(1..=5);
    let mut mats: Vec<f64> = [0.25, 0.5, 1.0, 2.0].into_iter().filter(|_| rng.random_bool(0.6)).collect();
    if mats.is_empty() {
        mats.push(1.0);
    }
    let tg = TimeGrid::uniform(1.0, steps).unwrap();
    let mg = MaturityGrid::new(mats).unwrap();
    let nm = mg.len();
    let data: Vec<f64> = (0..ns * (steps + 1) * nm).map(|_| rng.random_range(-2.0..2.0)).collect();
    FamilyPaths::from_fn(tg, mg, ns, false, |s, n, m| data[(s * (steps + 1) + n) * nm + m]).unwrap()
}

fn random_strategy(rng: &mut ChaCha8Rng, fam: &FamilyPaths) -> SimpleStrategy {
    let mats = fam.maturity_grid().points().to_vec();
    let mut h = SimpleStrategy::zero();
    for _ in 0..rng.random_range(0..=3) {
        let x = mats[rng.random_range(0..mats.len())];
        let w = match rng.random_range(0..3) {
            0 => Weight::Constant(rng.random_range(-3.0..3.0)),
            1 => Weight::Proportional { coef: rng.random_range(-1.0..1.0), maturity: x },
            _ => {
                let c: f64 = rng.random_range(-2.0..2.0);
                Weight::Predictable(Arc::new(move |h: &History| c * h.value(h.now(), 0).cos()))
            }
        };
        h = h.with_leg(x, w);
    }
    h
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn integral_is_linear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fam = random_family(&mut rng);
        let (h, k) = (random_strategy(&mut rng, &fam), random_strategy(&mut rng, &fam));
        let yh = integrate_simple(&h, &fam).unwrap();
        let yk = integrate_simple(&k, &fam).unwrap();
        let yc = integrate_simple(&h.scaled(a).plus(&k.scaled(b)), &fam).unwrap();
        for ((c, x), y) in yc.data().iter().zip(yh.data()).zip(yk.data()) {
            prop_assert!((c - (a * x + b * y)).abs() <= 1e-10);
        }
    }

    #[test]
    fn zero_leg_changes_nothing(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fam = random_family(&mut rng);
        let h = random_strategy(&mut rng, &fam);
        let x = fam.maturity_grid().points()[0];
        let padded = h.clone().with_leg(x, Weight::Constant(0.0));
        let y0 = integrate_simple(&h, &fam).unwrap();
        let y1 = integrate_simple(&padded, &fam).unwrap();
        prop_assert!(same_bits(y0.data(), y1.data()));
    }

    #[test]
    fn stopping_commutes_with_integration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fam = random_family(&mut rng);
        let h = random_strategy(&mut rng, &fam);
        let steps = fam.time_grid().steps();
        let tau: Arc<Vec<usize>> = Arc::new((0..fam.scenarios()).map(|_| rng.random_range(0..=steps)).collect());
        let t = tau.clone();
        let stopped = integrate_simple(&h.stopped(Arc::new(move |hist: &History| hist.now() >= t[hist.scenario()])), &fam).unwrap();
        let full = integrate_simple(&h, &fam).unwrap();
        for s in 0..fam.scenarios() {
            let want: Vec<f64> = (0..=steps).map(|n| full.get(s, n.min(tau[s]))).collect();
            prop_assert!(same_bits(stopped.path(s), &want));
        }
    }

    #[test]
    fn family_files_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fam = random_family(&mut rng);
        let mut bin = Vec::new();
        write_family(&mut bin, &fam, "random", seed).unwrap();
        let (header, back) = read_family(bin.as_slice(), false).unwrap();
        prop_assert_eq!(header.seed, seed);
        prop_assert!(same_bits(back.data(), fam.data()));
        let mut csv = Vec::new();
        write_family_csv(&mut csv, &fam).unwrap();
        let back = read_family_csv(csv.as_slice(), false).unwrap();
        prop_assert!(same_bits(back.data(), fam.data()));
    }

    #[test]
    fn dirac_approximation_keeps_mass_and_shrinks_variation(
        atoms in prop::collection::vec((0.0f64..1.0, -1.0f64..1.0), 0..4),
        density in -2.0f64..2.0,
        lo in 0.0f64..0.5,
        width in 0.01f64..0.5,
        n in 1usize..20,
    ) {
        let m = SignedMeasureGrid::new(atoms, vec![Cell { lo, hi: lo + width, density }]).unwrap();
        let a = dirac_approximate(&m, n).unwrap();
        prop_assert!(a.is_atomic());
        prop_assert!(a.total_variation() <= m.total_variation() + 1e-12);
        prop_assert!((a.total_mass() - m.total_mass()).abs() <= 1e-12);
    }
}

#[test]
fn example21_approximant_has_closed_form_integral() {
    let n_max = 12;
    let fam = gen_example21(
        Example21Params { n_max, horizon: 1.0 },
        &TimeGrid::uniform(1.0, 32).unwrap(),
        &example21_maturity_grid(n_max, &[]).unwrap(),
        ScenarioSet::new(300, 11).unwrap(),
    )
    .unwrap();
    let g = GeneralizedStrategy::example21();
    for n in [1, 5, n_max] {
        let y = integrate_simple(&g.approximant(n).unwrap(), &fam).unwrap();
        for s in 0..fam.scenarios() {
            for (k, &t) in fam.time_grid().points().iter().enumerate() {
                let want: f64 = (1..=n)
                    .map(|i| {
                        let ti = fam.jump_time(s, i);
                        t.min(ti) - if t >= ti { (i * i) as f64 } else { 0.0 }
                    })
                    .sum::<f64>()
                    / n as f64;
                assert!((y.get(s, k) - want).abs() <= 1e-12 * (1.0 + want.abs()), "n={n} s={s} k={k}");
            }
        }
    }
}

#[test]
fn buy_and_hold_bank_position_is_constant() {
    let market = gen_gaussian_market(
        &GaussianHjmParams::default(),
        &TimeGrid::uniform(1.0, 16).unwrap(),
        &MaturityGrid::new(vec![2.0, 5.0]).unwrap(),
        ScenarioSet::new(200, 5).unwrap(),
    )
    .unwrap();
    let h = SimpleStrategy::constant(&[(2.0, 1.5), (5.0, -0.5)]);
    let phi = bank_position(&h, &market).unwrap();
    let fam = &market.discounted;
    for s in 0..fam.scenarios() {
        let want = -1.5 * fam.value(s, 0, 0) + 0.5 * fam.value(s, 0, 1);
        for n in 0..fam.time_grid().len() {
            assert!((phi.get(s, n) - want).abs() <= 1e-12, "s={s} n={n}");
        }
    }
}

#[test]
fn atomic_measure_process_matches_its_simple_strategy() {
    let market = gen_gaussian_market(
        &GaussianHjmParams::default(),
        &TimeGrid::uniform(1.0, 8).unwrap(),
        &MaturityGrid::new(vec![1.0, 3.0, 5.0]).unwrap(),
        ScenarioSet::new(100, 2).unwrap(),
    )
    .unwrap();
    let m = SignedMeasureGrid::atomic(vec![(1.0, 0.5), (5.0, -1.25)]).unwrap();
    let phi = MeasureSimpleProcess::new(vec![MeasurePiece::always(0.25, 0.75, 100, m)]).unwrap();
    let a = integrate_measure_process(&phi, &market.discounted).unwrap();
    let b = integrate_simple(&phi.to_simple_strategy().unwrap(), &market.discounted).unwrap();
    assert!(same_bits(a.data(), b.data()));
}
