use proptest::prelude::*;

use kylesim::calculus::library::{PathwiseIntegral, TimeIntegral};
use kylesim::calculus::{evaluate, PathFunctional};
use kylesim::insider::table::MAX_ENTRY;
use kylesim::insider::value::{value_function_i, ValueFunctionSpec};
use kylesim::insider::wealth::wealth;
use kylesim::insider::{cap_rate, drift_first_passage, drift_gaussian_bridge, drift_kimura, DriftTable};
use kylesim::noise::NoiseVol;
use kylesim::path::{SamplePath, TimeGrid};
use kylesim::rules::{PricingRule, RectGrid, Rule};
use kylesim::scenario::{parse_noise, Scenario};
use kylesim::stats::basic::MeanSe;
use kylesim::stats::blocks::{test_brownian, test_terminal};
use kylesim::stats::{Thresholds, VerifyConfig};

fn path_strategy() -> impl Strategy<Value = SamplePath> {
    (1usize..40, 0.1f64..5.0).prop_flat_map(|(n, horizon)| {
        prop::collection::vec(-1e3f64..1e3, n + 1)
            .prop_map(move |v| SamplePath::new(TimeGrid::new(horizon, n).unwrap(), v).unwrap())
    })
}

fn path_and_index() -> impl Strategy<Value = (SamplePath, usize)> {
    path_strategy().prop_flat_map(|p| {
        let n = p.grid().n_steps();
        (Just(p), 0..=n)
    })
}

fn rules() -> Vec<Rule> {
    let s = NoiseVol::Constant(0.8);
    vec![
        Rule::Bachelier { p0: 0.3, lambda: 1.2, noise: s.clone() },
        Rule::BlackScholes { p0: 1.0, lambda: 0.7, noise: s.clone() },
        Rule::DetLambda { p0: 0.0, lambda0: 1.0, gamma: -0.5, noise: s.clone() },
        Rule::Kimura { p0: 0.4, c: 1.5, noise: s },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn stopping_is_idempotent((p, k) in path_and_index()) {
        let once = p.stopped(k).unwrap();
        prop_assert_eq!(once.stopped(k).unwrap(), once.clone());
        prop_assert_eq!(&once.values()[..=k], &p.values()[..=k]);
        prop_assert!(once.values()[k..].iter().all(|&v| v == p.value(k)));
        prop_assert_eq!(p.stopped(p.grid().n_steps()).unwrap(), p);
    }

    #[test]
    fn bump_then_unbump_returns_the_stopped_path((p, k) in path_and_index(), h in -10.0f64..10.0) {
        let back = p.vertical_bump(k, h).unwrap().vertical_bump(k, -h).unwrap();
        let stopped = p.stopped(k).unwrap();
        prop_assert_eq!(&back.values()[..k], &stopped.values()[..k]);
        // (x + h) - h is x up to one rounding of the larger magnitude.
        let tol = f64::EPSILON * (p.value(k).abs() + h.abs());
        for (a, b) in back.values()[k..].iter().zip(&stopped.values()[k..]) {
            prop_assert!((a - b).abs() <= tol);
        }
        prop_assert_eq!(p.vertical_bump(k, 0.0).unwrap(), stopped);
    }

    #[test]
    fn quadratic_variation_is_nonnegative_and_increasing(p in path_strategy()) {
        let qv: Vec<f64> = (0..=p.grid().n_steps()).map(|k| p.quadratic_variation(k).unwrap()).collect();
        prop_assert_eq!(qv[0], 0.0);
        prop_assert!(qv.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(p.quadratic_variation(p.grid().n_steps() + 1).is_err());
    }

    #[test]
    fn functionals_ignore_the_future((p, k) in path_and_index(), junk in prop::collection::vec(-50.0f64..50.0, 41)) {
        let mut values = p.values().to_vec();
        for (j, v) in values.iter_mut().enumerate().skip(k + 1) {
            *v = junk[j % junk.len()];
        }
        let q = SamplePath::new(*p.grid(), values).unwrap();
        let scaled = |x: &SamplePath| SamplePath::new(*x.grid(), x.values().iter().map(|v| v * 1e-3).collect()).unwrap();
        let (ps, qs) = (scaled(&p), scaled(&q));

        fn same<F: PathFunctional>(f: &F, a: &SamplePath, b: &SamplePath, k: usize) -> bool {
            evaluate(f, a, k).unwrap().to_bits() == evaluate(f, b, k).unwrap().to_bits()
        }
        prop_assert!(same(&TimeIntegral::new(|t, y| t * y.sin()), &ps, &qs, k));
        prop_assert!(same(&PathwiseIntegral::new(|_t, w| w * w * 0.5, |_t, _w| 0.0, |_t, _w| 1.0, 1.0), &ps, &qs, k));
        for rule in rules() {
            prop_assert!(same(&rule.functional(), &ps, &qs, k), "{}", rule.name());
        }
    }

    #[test]
    fn idle_insider_earns_exactly_nothing(
        v in -1e6f64..1e6,
        prices in prop::collection::vec(-1e6f64..1e6, 2..60),
        gamma in -3.0f64..=0.0,
    ) {
        let n = prices.len() - 1;
        let g = TimeGrid::new(1.0, n).unwrap();
        let rec = wealth(v, &prices, &vec![0.0; n], &g, gamma).unwrap();
        prop_assert_eq!(rec.wealth.to_bits(), 0.0f64.to_bits());
        prop_assert_eq!(rec.cap_events, 0);
    }

    #[test]
    fn capped_rates_respect_the_cap(raw in -1e9f64..1e9, cap in 1e-3f64..1e6) {
        let (r, hit) = cap_rate(raw, cap);
        prop_assert!(r.abs() <= cap);
        prop_assert_eq!(hit, raw.abs() > cap);
        if !hit {
            prop_assert_eq!(r, raw);
        }
    }

    #[test]
    fn bridge_drifts_vanish_on_target(y in -10.0f64..10.0, t in 0.0f64..0.99, p in 0.01f64..0.99, c in 0.1f64..3.0) {
        prop_assert_eq!(drift_gaussian_bridge(y, y, t, 1.0, 1e-3).unwrap(), 0.0);
        let k = drift_kimura(p, p, c, 1.0 - t).unwrap();
        prop_assert!((k - 0.5 * c * (1.0 - 2.0 * p)).abs() < 1e-12);
        prop_assert!(drift_gaussian_bridge(y, 0.0, 1.0, 1.0, 1e-3).is_err());
    }

    #[test]
    fn first_passage_drift_changes_sign_at_sqrt_remaining_time(d in 0.05f64..3.0, rem in 0.05f64..2.0) {
        let (a, u) = (1.0, 2.0);
        let t = u - rem;
        let f = |gap: f64| drift_first_passage(a, u, a - gap, t, false, 1e-4);
        // W below the level: positive drift far away, negative close in.
        let edge = rem.sqrt();
        if (d - edge).abs() > 1e-6 {
            prop_assert_eq!(f(d) > 0.0, d > edge);
        }
        prop_assert_eq!(drift_first_passage(a, u, a - d, t, true, 1e-4), 0.0);
    }

    #[test]
    fn value_functional_is_nonnegative(y in -5.0f64..5.0, v in -5.0f64..5.0, lam in 0.1f64..4.0) {
        let spec = ValueFunctionSpec { g: move |_t: f64, _z: f64| lam, tol: 1e-12 };
        let i = value_function_i(0.0, y, v, &spec).unwrap();
        prop_assert!(i >= 0.0);
        prop_assert!((i - (y - v) * (y - v) / (2.0 * lam)).abs() < 1e-9 * (1.0 + i));
        if y == v {
            prop_assert_eq!(i, 0.0);
        }
    }

    #[test]
    fn shipped_rules_are_increasing(t in 0.0f64..1.0, u in 0.001f64..0.999) {
        for rule in rules() {
            let p = match rule {
                Rule::Kimura { .. } => u,
                Rule::BlackScholes { .. } => 4.0 * u,
                _ => 10.0 * (u - 0.5),
            };
            let xi = match rule {
                Rule::Bachelier { p0, .. } | Rule::DetLambda { p0, .. } => p - p0,
                _ => p,
            };
            prop_assert!(rule.h_x(t, xi) * rule.lambda(t, p) > 0.0, "{}", rule.name());
        }
    }

    #[test]
    fn drift_table_parser_never_panics(text in ".{0,200}") {
        let _ = DriftTable::parse_csv(&text);
    }

    #[test]
    fn drift_table_interpolates_inside_its_range(
        times in prop::collection::btree_set(-100i32..100, 1..5),
        ys in prop::collection::btree_set(-100i32..100, 1..5),
        seed in prop::collection::vec(-1e3f64..1e3, 25),
        t in -200.0f64..200.0,
        y in -200.0f64..200.0,
    ) {
        let mut csv = String::from("t,y,theta\n");
        let mut k = 0;
        for &ti in &times {
            for &yj in &ys {
                csv.push_str(&format!("{ti},{yj},{}\n", seed[k % seed.len()]));
                k += 1;
            }
        }
        let table = DriftTable::parse_csv(&csv).unwrap();
        let (lo, hi) = table.theta.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &x| (a.0.min(x), a.1.max(x)));
        let v = table.eval(t, y);
        prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        k = 0;
        for &ti in &times {
            for &yj in &ys {
                prop_assert_eq!(table.eval(ti as f64, yj as f64), seed[k % seed.len()]);
                k += 1;
            }
        }
        prop_assert!(table.theta.iter().all(|x| x.abs() <= MAX_ENTRY));
    }

    #[test]
    fn scenario_parser_never_panics(text in "(\\[[a-z]{0,8}\\]\n|[a-zA-Z_0]{0,10} ?= ?[-0-9a-z_.,: ]{0,12}\n|#.{0,10}\n){0,12}") {
        if let Ok(sc) = Scenario::parse(&text, "fuzz", None) {
            prop_assert!(sc.validate().is_ok());
            let json = serde_json::to_string(&sc).unwrap();
            let back: Scenario = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, sc);
        }
    }

    #[test]
    fn noise_and_grid_specs_never_panic(text in "[-0-9.,: ]{0,24}") {
        if let Ok(n) = parse_noise(&text) {
            for t in [0.0, 0.5, 10.0] {
                prop_assert!(n.sigma(t) > 0.0 && n.sigma(t).is_finite());
            }
        }
        if let Ok(g) = RectGrid::parse(&text) {
            prop_assert_eq!(g.points().count(), g.t.2 * g.x.2);
        }
    }

    #[test]
    fn tightening_brownian_thresholds_never_rescues_a_failure(
        shift in -0.1f64..0.1,
        scale in 0.9f64..1.1,
        qv in 0.95f64..1.05,
        alpha in 0.001f64..0.2,
        qv_tol in 0.001f64..0.05,
        tighten in 1.0f64..5.0,
    ) {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(shift.to_bits() ^ scale.to_bits());
        let inc: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..50).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); shift + scale * z }).collect())
            .collect();
        let cfg = |alpha: f64, qv_tol: f64| VerifyConfig {
            thresholds: Thresholds { alpha, qv_tol, ..Thresholds::default() },
            ..VerifyConfig::default()
        };
        let loose = test_brownian(&inc, qv, &cfg(alpha, qv_tol));
        let tight = test_brownian(&inc, qv, &cfg((alpha * tighten).min(0.5), qv_tol / tighten));
        prop_assert!(!tight.pass || loose.pass);
    }

    #[test]
    fn tightening_terminal_thresholds_never_rescues_a_failure(
        g in prop::collection::vec(1e-3f64..1.0, 3),
        slope_min in 0.2f64..0.5,
        width in 0.05f64..0.5,
        gap_frac in 0.01f64..0.2,
        shrink in 0.0f64..0.04,
    ) {
        let dts = [0.01, 0.005, 0.0025];
        let gaps: Vec<MeanSe> = g.iter().map(|&m| MeanSe { mean: m, se: 0.01, sd: 1.0, n: 100 }).collect();
        let th = |lo: f64, hi: f64, gf: f64| Thresholds { slope_min: lo, slope_max: hi, gap_frac: gf, ..Thresholds::default() };
        let loose = test_terminal(&dts, &gaps, 1.0, &th(slope_min, slope_min + width, gap_frac)).unwrap();
        let tight = test_terminal(&dts, &gaps, 1.0, &th(slope_min + shrink, slope_min + width - shrink, gap_frac * 0.5)).unwrap();
        prop_assert!(!tight.pass || loose.pass);
    }
}
