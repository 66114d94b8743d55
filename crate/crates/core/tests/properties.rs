use proptest::prelude::*;

use spsoft::grid::{one_hot_encode, ClassStack, LabelMap, Mask, Shape};
use spsoft::losses::{kl_loss, softmax, Probabilities};
use spsoft::metrics::{hd95, surface_distances};
use spsoft::sdt::signed_edt;
use spsoft::slic::connected_components;
use spsoft::soften::{classify_relation, dist_to_prob, gaussian_soften, soften, Relation, SoftLabelStack};

fn labels_strategy() -> impl Strategy<Value = LabelMap> {
    (2usize..12, 2usize..12, 2usize..5).prop_flat_map(|(h, w, c)| {
        proptest::collection::vec(0..c as u32, h * w)
            .prop_map(move |labels| LabelMap::new(Shape::unit(&[h, w]).unwrap(), labels, c).unwrap())
    })
}

/// Labels together with an arbitrary block partition of the same lattice.
fn labels_and_blocks() -> impl Strategy<Value = (LabelMap, Vec<u32>)> {
    labels_strategy().prop_flat_map(|labels| {
        let n = labels.labels().len();
        (Just(labels), proptest::collection::vec(0u32..6, n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_hot_round_trips(labels in labels_strategy()) {
        let hot = one_hot_encode(&labels).unwrap();
        prop_assert_eq!(hot.to_labels(), labels);
        for p in 0..hot.stack().num_pixels() {
            prop_assert_eq!(hot.stack().pixel(p).iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn dist_to_prob_is_monotone_and_symmetric(a in -1e3f64..1e3, b in -1e3f64..1e3) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if lo < hi {
            prop_assert!(dist_to_prob(lo) <= dist_to_prob(hi));
        }
        prop_assert!((dist_to_prob(a) + dist_to_prob(-a) - 1.0).abs() < 1e-15);
        prop_assert!(dist_to_prob(a) > 0.0 && dist_to_prob(a) < 1.0);
    }

    #[test]
    fn signed_edt_sign_follows_mask(
        mask in proptest::collection::vec(any::<bool>(), 64)
    ) {
        let shape = Shape::unit(&[8, 8]).unwrap();
        let m = Mask::new(shape.clone(), mask.clone()).unwrap();
        let Ok(field) = signed_edt(&m) else { return Ok(()) };
        for (i, &d) in field.values().iter().enumerate() {
            // background is strictly negative, boundary zero, interior positive
            if mask[i] {
                prop_assert!(d >= 0.0);
            } else {
                prop_assert!(d < 0.0);
            }
        }
    }

    #[test]
    fn soften_stays_in_range_and_local((labels, raw) in labels_and_blocks()) {
        let shape = labels.shape().clone();
        let sp = connected_components(&shape, &raw);
        let hard = one_hot_encode(&labels).unwrap();
        let blocks = sp.blocks();
        for normalize in [false, true] {
            let soft = soften(&hard, &sp, normalize).unwrap();
            prop_assert!(soft.stack().data().iter().all(|v| (0.0..=1.0).contains(v)));
            for c in 0..hard.num_classes() {
                let fg = hard.foreground(c);
                for block in &blocks {
                    if classify_relation(block, &fg) != Relation::Intersect && !normalize {
                        for &p in block {
                            prop_assert_eq!(soft.plane(c)[p].to_bits(), hard.plane(c)[p].to_bits());
                        }
                    }
                }
            }
            if normalize {
                for p in 0..shape.len() {
                    prop_assert!((soft.stack().pixel(p).iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn gaussian_soften_sums_to_one(labels in labels_strategy(), sigma in 0.2f64..3.0) {
        let soft = gaussian_soften(&one_hot_encode(&labels).unwrap(), sigma).unwrap();
        for p in 0..labels.labels().len() {
            prop_assert!((soft.stack().pixel(p).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn kl_is_non_negative_and_zero_at_target(
        logits in proptest::collection::vec(-4.0f64..4.0, 3 * 20),
        other in proptest::collection::vec(-4.0f64..4.0, 3 * 20),
    ) {
        let shape = Shape::unit(&[4, 5]).unwrap();
        let p = softmax(&ClassStack::new(shape.clone(), 3, logits).unwrap());
        let q = softmax(&ClassStack::new(shape, 3, other).unwrap());
        let target = SoftLabelStack::new(q.stack().clone(), true).unwrap();
        prop_assert!(kl_loss(&target, &p).unwrap() >= -1e-12);
        prop_assert!(kl_loss(&target, &q).unwrap().abs() < 1e-12);
    }

    #[test]
    fn softmax_is_a_distribution(logits in proptest::collection::vec(-50.0f64..50.0, 4 * 6)) {
        let p = softmax(&ClassStack::new(Shape::unit(&[2, 3]).unwrap(), 4, logits).unwrap());
        prop_assert!(Probabilities::new(p.stack().clone()).is_ok());
    }

    #[test]
    fn class_permutation_commutes_with_softening((labels, raw) in labels_and_blocks()) {
        let c = labels.num_classes();
        let shape = labels.shape().clone();
        let perm: Vec<u32> = (0..c as u32).rev().collect();
        let permuted = LabelMap::new(shape.clone(), labels.labels().iter().map(|&l| perm[l as usize]).collect(), c).unwrap();
        let sp = connected_components(&shape, &raw);
        let a = soften(&one_hot_encode(&labels).unwrap(), &sp, true).unwrap();
        let b = soften(&one_hot_encode(&permuted).unwrap(), &sp, true).unwrap();
        for k in 0..c {
            prop_assert_eq!(a.plane(k), b.plane(perm[k] as usize));
        }
    }

    #[test]
    fn hd95_is_symmetric(
        a in proptest::collection::vec(any::<bool>(), 100),
        b in proptest::collection::vec(any::<bool>(), 100),
    ) {
        prop_assume!(a.contains(&true) && b.contains(&true));
        let shape = Shape::unit(&[10, 10]).unwrap();
        let ma = Mask::new(shape.clone(), a).unwrap();
        let mb = Mask::new(shape, b).unwrap();
        prop_assert_eq!(hd95(&ma, &mb).unwrap(), hd95(&mb, &ma).unwrap());
        let sd = surface_distances(&ma, &ma).unwrap();
        prop_assert!(sd.a_to_b.iter().all(|&d| d == 0.0));
    }
}
