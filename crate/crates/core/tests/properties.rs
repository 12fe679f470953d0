//! Invariance and linearity properties of the loss and its derivatives.

use fstress::verify::{fd_gradient, StepPolicy};
use fstress::{
    feasible_random_start, fit, fstress_eval, pair_count, stress_value, BaseFunction, Configuration,
    DerivTensors, DissimilarityData, FSpec, FitOptions, LossReport, Method,
};
use proptest::prelude::*;

/// Largest entry difference over the value and all tensors, relative to the
/// largest entry of any of them. A common scale keeps orders that vanish
/// identically (orders 3-4 of a one-dimensional Euclidean distance) from
/// turning rounding noise into relative error; the instances are unit-scale.
fn max_dev(a: &DerivTensors, b: &DerivTensors) -> f64 {
    let mut scale = a.value().abs().max(b.value().abs());
    let mut diff = (a.value() - b.value()).abs();
    for r in 1..=a.max_order() {
        let (x, y) = (a.order(r).unwrap(), b.order(r).unwrap());
        scale = x.iter().chain(y).fold(scale, |m, v| m.max(v.abs()));
        diff = x.iter().zip(y).fold(diff, |m, (p, q)| m.max((p - q).abs()));
    }
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Instances on a jittered lattice, so no two points come close. Some draws
/// still leave the domain (log with a fractional power needs squared
/// distances above 1); tests skip those.
fn arb_case() -> impl Strategy<Value = (Configuration, DissimilarityData, FSpec)> {
    (
        2usize..5,
        1usize..3,
        0usize..5,
        prop_oneof![Just(0.5), Just(1.0), Just(2.0), Just(1.5)],
    )
        .prop_flat_map(|(n, p, base, q)| {
            let m = pair_count(n);
            (
                Just((n, p, base, q)),
                proptest::collection::vec(-0.2f64..0.2, n * p),
                proptest::collection::vec(0.1f64..2.0, m),
                proptest::collection::vec(0.0f64..2.0, m),
            )
        })
        .prop_map(|((n, p, base, q), jitter, w, d)| {
            let base = BaseFunction::ALL[base];
            let spread = match base {
                BaseFunction::Log => 1.5,
                BaseFunction::Exp => 0.3,
                _ => 1.0,
            };
            let x = (0..n * p)
                .map(|k| {
                    let (s, i) = (k / n, k % n);
                    spread * ((i * (s + 1) + s * (i % 2)) as f64) + spread * jitter[k]
                })
                .collect();
            let cfg = Configuration::new(n, p, x).unwrap();
            (cfg, DissimilarityData::new(n, w, d).unwrap(), FSpec::new(base, q))
        })
}

fn eval(cfg: &Configuration, data: &DissimilarityData, spec: FSpec, order: usize) -> Option<LossReport> {
    fstress_eval(cfg, data, spec, order).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn translation_invariance((cfg, data, spec) in arb_case(), shift in proptest::collection::vec(-2.0f64..2.0, 3)) {
        let Some(base) = eval(&cfg, &data, spec, 4) else { return Ok(()) };
        let moved = cfg.translated(&shift[..cfg.p()]);
        let other = eval(&moved, &data, spec, 4).expect("translation keeps distances");
        prop_assert!(max_dev(&base.tensors, &other.tensors) < 1e-9);
    }

    #[test]
    fn weights_enter_linearly((cfg, data, spec) in arb_case(), c in 0.1f64..10.0) {
        let Some(base) = eval(&cfg, &data, spec, 4) else { return Ok(()) };
        let scaled = eval(&cfg, &data.scaled_weights(c).unwrap(), spec, 4).unwrap();
        let mut expected = base.tensors.clone();
        expected.scale(c);
        prop_assert!(max_dev(&scaled.tensors, &expected) < 1e-13);
    }

    #[test]
    fn pair_terms_add_up((cfg, data, spec) in arb_case(), split in any::<u64>()) {
        let Some(whole) = eval(&cfg, &data, spec, 4) else { return Ok(()) };
        let n = data.n();
        let mask = |keep: bool| -> Vec<f64> {
            data.weights()
                .iter()
                .enumerate()
                .map(|(k, &w)| if ((split >> (k % 64)) & 1 == 1) == keep { w } else { 0.0 })
                .collect()
        };
        let first = DissimilarityData::new(n, mask(true), data.delta().to_vec()).unwrap();
        let second = DissimilarityData::new(n, mask(false), data.delta().to_vec()).unwrap();
        let mut sum = eval(&cfg, &first, spec, 4).unwrap().tensors;
        sum.add_scaled(1.0, &eval(&cfg, &second, spec, 4).unwrap().tensors);
        prop_assert!(max_dev(&whole.tensors, &sum) < 1e-12);
    }

    #[test]
    fn lower_orders_do_not_depend_on_max_order((cfg, data, spec) in arb_case()) {
        let Some(full) = eval(&cfg, &data, spec, 4) else { return Ok(()) };
        for r in 0..4 {
            let part = eval(&cfg, &data, spec, r).unwrap();
            prop_assert_eq!(part.stress, full.stress);
            for k in 1..=r {
                prop_assert_eq!(part.tensors.order(k), full.tensors.order(k));
            }
        }
    }
}

fn exact_fit_instance(q: f64) -> (Configuration, DissimilarityData, FSpec) {
    let spec = FSpec::new(BaseFunction::Identity, q);
    let hidden = Configuration::from_points(&[
        vec![0.0, 0.0],
        vec![1.0, 0.1],
        vec![0.2, 1.3],
        vec![1.1, 0.9],
        vec![-0.7, 0.6],
    ])
    .unwrap();
    let delta = fstress::pairs(5)
        .map(|pair| {
            let t = fstress::squared_distance(&hidden, pair.i, pair.j).unwrap().1;
            spec.value(t).unwrap()
        })
        .collect();
    (hidden, DissimilarityData::unweighted(5, delta).unwrap(), spec)
}

#[test]
fn fit_is_translation_equivariant() {
    let (_, data, spec) = exact_fit_instance(1.0);
    for method in [Method::Newton, Method::GradientDescent] {
        let opts = FitOptions {
            method,
            max_iter: 40,
            ..FitOptions::default()
        };
        let start = feasible_random_start(5, 2, &data, spec, &opts).unwrap();
        let shift = [3.0, -2.0];
        let a = fit(&start, &data, spec, &opts).unwrap();
        let b = fit(&start.translated(&shift), &data, spec, &opts).unwrap();
        assert!(
            (a.stress - b.stress).abs() <= 1e-9 * a.stress.max(1e-12),
            "{method:?}"
        );
        let back = b.config.translated(&[-shift[0], -shift[1]]);
        for (u, v) in a.config.x().iter().zip(back.x()) {
            assert!((u - v).abs() < 1e-6, "{method:?}: {u} vs {v}");
        }
    }
}

#[test]
fn converged_fit_is_stationary_by_finite_differences() {
    for q in [0.5, 1.0] {
        let (_, data, spec) = exact_fit_instance(q);
        let opts = FitOptions {
            seed: 11,
            ..FitOptions::default()
        };
        let start = feasible_random_start(5, 2, &data, spec, &opts).unwrap();
        let res = fit(&start, &data, spec, &opts).unwrap();
        assert!(res.converged());
        let cfg = res.config;
        let fd = fd_gradient(
            |y: &[f64]| stress_value(&cfg.with_x(y.to_vec())?, &data, spec),
            cfg.x(),
            StepPolicy::gradient(),
        )
        .unwrap();
        let scale = data.constant();
        assert!(fd.iter().all(|g| g.abs() <= 1e-6 * scale), "q={q}: {fd:?}");
        let analytic = fstress_eval(&cfg, &data, spec, 1).unwrap();
        assert!(analytic.tensors.gradient().iter().all(|g| g.abs() <= opts.tol));
    }
}
