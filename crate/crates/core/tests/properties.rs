mod common;

use std::collections::BTreeSet;

use common::{linear_net, random_net};
use grace_core::data::{project_domain, split, within_domain, Dtype, FeatureDomain, Normalizer};
use grace_core::discretize::{code_for, discretize};
use grace_core::entropy::{entropy_filter, symmetrical_uncertainty, SuMatrix};
use grace_core::metrics::{
    avg_num_feats, domain_rate, fidelity, info_gain_metric, InfoGainVariant, Outcome,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn codes(len: usize) -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0u32..5, len)
}

fn domain_strategy() -> impl Strategy<Value = FeatureDomain> {
    (any::<bool>(), -50i32..50, 0i32..100).prop_map(|(int, lo, width)| {
        let dtype = if int { Dtype::Integer } else { Dtype::Real };
        FeatureDomain::new("f", dtype, lo as f64, (lo + width) as f64).unwrap()
    })
}

proptest! {
    #[test]
    fn softmax_output_is_a_distribution(seed in any::<u64>(), m in 1usize..8, z in 2usize..5,
                                        x in prop::collection::vec(-5.0f64..5.0, 8)) {
        let net = random_net(&[m, 6, 4, z], &mut ChaCha8Rng::seed_from_u64(seed));
        let p = net.forward(&x[..m]).unwrap();
        prop_assert_eq!(p.len(), z);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn su_is_bounded_and_symmetric((a, b) in (1usize..120).prop_flat_map(|n| (codes(n), codes(n)))) {
        let ab = symmetrical_uncertainty(&a, &b).unwrap();
        let ba = symmetrical_uncertainty(&b, &a).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn filter_output_is_a_low_redundancy_subsequence(
        cols in (20usize..60).prop_flat_map(|n| prop::collection::vec(codes(n), 2..7)),
        gamma in 0.0f64..1.0,
        order_seed in any::<u64>(),
    ) {
        let m = cols.len();
        let su = SuMatrix::new(cols).unwrap();
        let mut ranked: Vec<usize> = (0..m).collect();
        use rand::seq::SliceRandom;
        ranked.shuffle(&mut ChaCha8Rng::seed_from_u64(order_seed));
        let kept = entropy_filter(&ranked, gamma, &su).unwrap();
        prop_assert_eq!(kept.first(), ranked.first());
        let mut it = ranked.iter();
        prop_assert!(kept.iter().all(|k| it.any(|r| r == k)));
        for (i, &a) in kept.iter().enumerate() {
            for &b in &kept[..i] {
                prop_assert!(su.get(a, b).unwrap() <= gamma);
            }
        }
    }

    #[test]
    fn split_is_a_partition(n in 30usize..500, seed in any::<u64>()) {
        let s = split(n, [0.8, 0.1, 0.1], seed).unwrap();
        let all: BTreeSet<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(s.train.len() + s.val.len() + s.test.len(), n);
        prop_assert!(!s.test.is_empty());
        prop_assert_eq!(s, split(n, [0.8, 0.1, 0.1], seed).unwrap());
    }

    #[test]
    fn discretization_codes_respect_value_order(
        points in prop::collection::vec((-20i32..20, 0usize..3), 2..80)
    ) {
        let values: Vec<f64> = points.iter().map(|p| p.0 as f64 / 4.0).collect();
        let labels: Vec<usize> = points.iter().map(|p| p.1).collect();
        let d = discretize(&values, &labels).unwrap();
        prop_assert!(d.cuts.windows(2).all(|w| w[0] < w[1]));
        for a in &values {
            for b in &values {
                if a <= b {
                    prop_assert!(code_for(&d.cuts, *a) <= code_for(&d.cuts, *b));
                }
            }
        }
    }

    #[test]
    fn domain_projection_is_idempotent(
        domains in prop::collection::vec(domain_strategy(), 1..6),
        raw in prop::collection::vec(-200.0f64..200.0, 6),
    ) {
        let x = &raw[..domains.len()];
        let once = project_domain(x, &domains);
        prop_assert!(within_domain(&once, &domains));
        prop_assert_eq!(project_domain(&once, &domains), once);
    }

    #[test]
    fn normalizer_round_trips(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..20),
                              probe in prop::collection::vec(-1e3f64..1e3, 3)) {
        let n = Normalizer::fit(&rows).unwrap();
        let back = n.inverse(&n.transform(&probe));
        for (a, b) in back.iter().zip(&probe) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn metrics_stay_in_range_and_ignore_order(
        raw in prop::collection::vec(
            (prop::collection::vec(0.0f64..1.0, 3), prop::collection::btree_set(0usize..3, 0..4), any::<bool>()),
            1..25),
        cols in prop::collection::vec(codes(40), 3),
        shift in 0usize..25,
    ) {
        let model = linear_net(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], &[0.0, 0.0]);
        let su = SuMatrix::new(cols).unwrap();
        let domains: Vec<FeatureDomain> = (0..3)
            .map(|j| FeatureDomain::new(format!("f{j}"), Dtype::Real, 0.0, 0.8).unwrap())
            .collect();
        let outcomes: Vec<Outcome> = raw
            .iter()
            .map(|(xt, feats, success)| {
                let claimed = grace_core::argmax(&model.forward(xt).unwrap());
                Outcome {
                    x: vec![0.5; 3],
                    x_tilde: xt.clone(),
                    claimed,
                    original_class: 1 - claimed,
                    features: feats.iter().copied().collect(),
                    success: *success,
                }
            })
            .collect();
        let mut rotated = outcomes.clone();
        rotated.rotate_left(shift % outcomes.len());
        for variant in [InfoGainVariant::Literal, InfoGainVariant::Offdiag] {
            let fid = fidelity(&outcomes, &model).unwrap();
            let ig = info_gain_metric(&outcomes, &su, variant).unwrap();
            let dom = domain_rate(&outcomes, &domains).unwrap();
            for v in [fid, ig, dom] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!(ig * fid <= ig && ig * fid <= fid);
            prop_assert_eq!(fid, fidelity(&rotated, &model).unwrap());
            prop_assert_eq!(ig, info_gain_metric(&rotated, &su, variant).unwrap());
            prop_assert_eq!(dom, domain_rate(&rotated, &domains).unwrap());
            prop_assert_eq!(avg_num_feats(&outcomes).unwrap(), avg_num_feats(&rotated).unwrap());
        }
    }
}
