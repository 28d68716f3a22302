use irt_ensemble::eval::pearson;
use irt_ensemble::irt::{fit, latent_trait, simulate, trait_weights, FitConfig, ItemParams};
use irt_ensemble::model::LogitScores;
use ndarray::ArrayView1;
use proptest::prelude::*;

/// Random items; with `mixed`, each item is reversed with probability 1/2.
fn items(n: usize, mixed: bool) -> impl Strategy<Value = Vec<ItemParams>> {
    prop::collection::vec(
        (0.4f64..3.0, -1.5f64..1.5, 0.3f64..1.5, any::<bool>()),
        n,
    )
    .prop_map(move |v| {
        v.into_iter()
            .map(|(a, b, g, neg)| {
                let s = if mixed && neg { -1.0 } else { 1.0 };
                ItemParams::new(s * a, b, s * g).unwrap()
            })
            .collect()
    })
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    pearson(ArrayView1::from(a), ArrayView1::from(b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn em_never_decreases_marginal_likelihood(items in items(5, true), seed in 0u64..1000) {
        let (_, z) = simulate(&items, 150, seed).unwrap();
        let model = fit(&z, &FitConfig { max_iter: 200, ..FitConfig::default() }).unwrap();
        for w in model.log_likelihood_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-8, "{} -> {}", w[0], w[1]);
        }
        prop_assert!(model.items.iter().all(ItemParams::is_valid));
        prop_assert!(model.theta.iter().all(|t| t.is_finite()));
    }

    #[test]
    fn trait_decomposition_is_exact(items in items(4, true), seed in 0u64..1000) {
        let (_, z) = simulate(&items, 60, seed).unwrap();
        let model = fit(&z, &FitConfig::default()).unwrap();
        let (zeta, omega) = trait_weights(&model.items);
        for (i, row) in z.values().outer_iter().enumerate() {
            let alt: f64 = row.iter().enumerate().map(|(j, &v)| zeta[j] + omega[j] * v).sum();
            prop_assert!((alt - model.theta[i]).abs() <= 1e-12 * model.theta[i].abs().max(1.0));
        }
        prop_assert_eq!(latent_trait(&z, &model.items).unwrap(), model.theta);
    }

    #[test]
    fn reversing_a_detector_keeps_the_trait(items in items(6, false), seed in 0u64..1000, j in 0usize..6) {
        let (_, z) = simulate(&items, 300, seed).unwrap();
        let mut flipped = z.values().to_owned();
        flipped.column_mut(j).mapv_inplace(|v| -v);
        let flipped = LogitScores::from_values(flipped).unwrap();
        let cfg = FitConfig { max_iter: 300, ..FitConfig::default() };
        let a = fit(&z, &cfg).unwrap();
        let b = fit(&flipped, &cfg).unwrap();
        prop_assert!(corr(&a.theta, &b.theta) > 0.99);
        prop_assert!(b.items.iter().all(|it| it.alpha * it.gamma > 0.0));
        prop_assert!(b.items[j].gamma * a.items[j].gamma < 0.0);
    }

    #[test]
    fn fit_is_bitwise_deterministic(items in items(3, true), seed in 0u64..1000) {
        let (_, z) = simulate(&items, 80, seed).unwrap();
        let cfg = FitConfig::default();
        prop_assert_eq!(fit(&z, &cfg).unwrap(), fit(&z, &cfg).unwrap());
    }
}
