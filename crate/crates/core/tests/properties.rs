use care_core::evaluation::concordance_index_reference;
use care_core::kernels::{feature_map, PolynomialFeatures};
use care_core::model_selection::combine;
use care_core::*;
use proptest::prelude::*;

fn kernel_for(variant: u8, d: usize, a: f64) -> KernelConfig {
    match variant % 5 {
        0 => KernelConfig::gaussian(vec![0.6; d], a),
        1 => KernelConfig::polynomial(2 + u32::from(variant % 2), a),
        2 if d == 1 => KernelConfig::sobolev1(a),
        3 if d == 1 => KernelConfig::sobolev2(a),
        _ => KernelConfig::additive_sobolev1(d, a),
    }
}

fn points(d: usize, n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0..=1.0f64, d), n)
}

fn dataset() -> impl Strategy<Value = SurvivalDataset> {
    (2usize..40).prop_flat_map(|n| {
        (
            points(1, n),
            prop::collection::vec(1u32..=8, n),
            prop::collection::vec(prop::bool::weighted(0.3), n),
        )
            .prop_map(|(xs, ts, cs)| {
                let records = xs
                    .into_iter()
                    .zip(ts)
                    .zip(cs)
                    .map(|((x, t), c)| SurvivalRecord::new(x, f64::from(t) / 8.0, c))
                    .collect();
                SurvivalDataset::new(records, 1.0).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_symmetry_and_shift(variant in 0u8..10, d in 1usize..4, a in 0.0..3.0f64,
                                 x in prop::collection::vec(0.0..=1.0f64, 3),
                                 y in prop::collection::vec(0.0..=1.0f64, 3)) {
        let k = kernel_for(variant, d, a);
        let (x, y) = (&x[..d], &y[..d]);
        prop_assert_eq!(eval_kernel(&k, x, y).unwrap(), eval_kernel(&k, y, x).unwrap());
        if !matches!(k, KernelConfig::Polynomial { .. }) {
            let v = eval_kernel(&k, x, y).unwrap();
            let v0 = eval_kernel(&k.unshifted(), x, y).unwrap();
            prop_assert!((v - (v0 + a)).abs() <= 1e-14 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn gram_is_positive_semidefinite(variant in 0u8..10, d in 1usize..4, a in 0.0..2.0f64,
                                     pts in (1usize..=20).prop_flat_map(|n| points(3, n))) {
        let k = kernel_for(variant, d, a);
        let pts: Vec<Vec<f64>> = pts.iter().map(|p| p[..d].to_vec()).collect();
        let g = gram_matrix(&k, &pts).unwrap().into_matrix();
        let (values, _) = g.symmetric_eigen();
        let top = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(values[0] >= -1e-8 * top, "min eigenvalue {}", values[0]);
    }

    #[test]
    fn kappa_bounded_by_closed_form(variant in 0u8..10, d in 1usize..4, a in 0.2..2.0f64,
                                    pts in (1usize..=20).prop_flat_map(|n| points(3, n))) {
        let k = kernel_for(variant, d, a);
        let pts: Vec<Vec<f64>> = pts.iter().map(|p| p[..d].to_vec()).collect();
        let g = gram_matrix(&k, &pts).unwrap().into_matrix();
        let kappa = kappa_matrix(&g).unwrap();
        let c = constant_norm_squared(&k).unwrap();
        prop_assert!(kappa >= 1.0 / c - 1e-6, "kappa {kappa} vs {}", 1.0 / c);
    }

    #[test]
    fn feature_map_reproduces_kernel(p in 1u32..5, a in 0.1..3.0f64, d in 1usize..4,
                                     x in prop::collection::vec(-1.0..1.0f64, 3),
                                     y in prop::collection::vec(-1.0..1.0f64, 3)) {
        let k = KernelConfig::polynomial(p, a);
        let (x, y) = (&x[..d], &y[..d]);
        let (fx, fy) = (feature_map(&k, x).unwrap(), feature_map(&k, y).unwrap());
        let dot: f64 = fx.iter().zip(&fy).map(|(u, v)| u * v).sum();
        let v = eval_kernel(&k, x, y).unwrap();
        prop_assert!((dot - v).abs() <= 1e-10 * v.abs().max(1.0));
        let feats = PolynomialFeatures::new(&k, d, 10_000).unwrap();
        prop_assert_eq!(feats.len() + 1, fx.len());
    }

    #[test]
    fn likelihood_shift_invariance(data in dataset(), c in -50.0..50.0f64, seed in 0u64..1000) {
        let f: Vec<f64> = (0..data.len()).map(|i| ((i as u64 * 7919 + seed) % 97) as f64 / 10.0 - 4.8).collect();
        let g: Vec<f64> = f.iter().map(|v| v + c).collect();
        let a = neg_log_partial_likelihood(&f, &data).unwrap();
        let b = neg_log_partial_likelihood(&g, &data).unwrap();
        prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn penalized_objective_is_convex(data in dataset(), variant in 0u8..5, gamma in 1e-3..10.0f64,
                                     b1 in prop::collection::vec(-2.0..2.0f64, 40),
                                     b2 in prop::collection::vec(-2.0..2.0f64, 40)) {
        let ctx = RepresenterContext::new(&data, Kernel::new(kernel_for(variant, 1, 1.0)).unwrap()).unwrap();
        let m = ctx.basis().len();
        let (b1, b2) = (&b1[..m], &b2[..m]);
        let mid: Vec<f64> = b1.iter().zip(b2).map(|(u, v)| 0.5 * (u + v)).collect();
        let f = |b: &[f64]| penalized_objective(b, &ctx, gamma).unwrap();
        prop_assert!(f(&mid) <= 0.5 * (f(b1) + f(b2)) + 1e-10);
    }

    #[test]
    fn representer_functions_are_centred(data in dataset(), variant in 0u8..5,
                                         beta in prop::collection::vec(-3.0..3.0f64, 40)) {
        let ctx = RepresenterContext::new(&data, Kernel::new(kernel_for(variant, 1, 0.5)).unwrap()).unwrap();
        let d = ctx.design();
        for j in 0..d.cols() {
            let mean: f64 = (0..d.rows()).map(|i| d[(i, j)]).sum::<f64>() / d.rows() as f64;
            prop_assert!(mean.abs() <= 1e-10);
        }
        let f = ctx.fitted_values(&beta[..d.cols()]);
        prop_assert!((f.iter().sum::<f64>() / f.len() as f64).abs() <= 1e-10);
    }

    #[test]
    fn penalty_equals_bordered_form(data in dataset(), variant in 0u8..5, a in 0.2..2.0f64,
                                    beta in prop::collection::vec(-3.0..3.0f64, 40)) {
        let config = kernel_for(variant, 1, a);
        let ctx = RepresenterContext::new(&data, Kernel::new(config.clone()).unwrap()).unwrap();
        let basis = ctx.basis();
        let beta = &beta[..basis.len()];
        let xs = data.covariates();
        let n = xs.len();
        // independent oracle: δ = (β₀, β) against [[‖1‖², 1ᵀ], [1, K_AA]]
        let kbar = |y: &[f64]| xs.iter().map(|x| eval_kernel(&config, x, y).unwrap()).sum::<f64>() / n as f64;
        let b0: f64 = -basis.iter().zip(beta).map(|(&j, b)| kbar(&xs[j]) * b).sum::<f64>();
        let c = constant_norm_squared(&config).unwrap();
        let mut bordered = c * b0 * b0 + 2.0 * b0 * beta.iter().sum::<f64>();
        for (p, &i) in basis.iter().enumerate() {
            for (q, &j) in basis.iter().enumerate() {
                bordered += beta[p] * beta[q] * eval_kernel(&config, &xs[i], &xs[j]).unwrap();
            }
        }
        let pen = ctx.penalty(beta);
        prop_assert!((pen - bordered).abs() <= 1e-9 * bordered.abs().max(1.0), "{pen} vs {bordered}");
    }

    #[test]
    fn concordance_order_only(data in dataset(), seed in 0u64..1000) {
        let f: Vec<f64> = (0..data.len()).map(|i| ((i as u64 * 31 + seed) % 11) as f64).collect();
        let g: Vec<f64> = f.iter().map(|v| v.exp() * 3.0 - 2.0).collect();
        match (concordance_index(&f, &data), concordance_index_reference(&f, &data)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a, b);
                prop_assert!((0.0..=1.0).contains(&a));
                prop_assert_eq!(concordance_index(&g, &data).unwrap(), a);
            }
            (Err(a), Err(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn breslow_monotone_in_unit_interval(data in dataset()) {
        let s = breslow_survival(&data);
        prop_assert!(s.values().iter().all(|v| *v > 0.0 && *v <= 1.0));
        prop_assert!(s.values().windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(s.times().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn theta_grid_in_simplex(m in 1usize..4, r in 1usize..12) {
        let g = theta_grid(m, r).unwrap();
        prop_assert!(g.contains_vertices());
        for p in g.points() {
            prop_assert!(p.iter().all(|v| *v >= 0.0));
            prop_assert!(p.iter().sum::<f64>() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn convex_combination_between_components(theta in prop::collection::vec(0.0..1.0f64, 2),
                                              f in prop::collection::vec(-5.0..5.0f64, 6),
                                              e1 in prop::collection::vec(-5.0..5.0f64, 6),
                                              e2 in prop::collection::vec(-5.0..5.0f64, 6)) {
        let s: f64 = theta.iter().sum();
        let theta: Vec<f64> = if s > 1.0 { theta.iter().map(|t| t / s).collect() } else { theta };
        let out = combine(&theta, &f, &[e1.clone(), e2.clone()]);
        for i in 0..6 {
            let lo = f[i].min(e1[i]).min(e2[i]);
            let hi = f[i].max(e1[i]).max(e2[i]);
            prop_assert!(out[i] >= lo - 1e-12 && out[i] <= hi + 1e-12);
        }
    }
}

#[test]
fn all_censored_gradient_is_penalty_only() {
    let records = (0..6)
        .map(|i| SurvivalRecord::new(vec![i as f64 / 6.0], 0.1 + 0.1 * i as f64, true))
        .collect();
    let data = SurvivalDataset::new(records, 1.0).unwrap();
    let ctx = RepresenterContext::new(&data, Kernel::new(KernelConfig::sobolev1(1.0)).unwrap()).unwrap();
    let beta: Vec<f64> = (0..ctx.basis().len()).map(|i| i as f64 - 1.5).collect();
    let g = penalized_gradient(&beta, &ctx, 0.3).unwrap();
    let kb = ctx.penalty_matrix().mul_vec(&beta);
    for (gi, k) in g.iter().zip(kb) {
        assert_eq!(*gi, 2.0 * 0.3 * k);
    }
    let v = penalized_objective(&beta, &ctx, 0.3).unwrap();
    assert!((v - 0.3 * ctx.penalty(&beta)).abs() < 1e-15);
}
