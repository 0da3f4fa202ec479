use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segsolve_core::*;

fn random_set(spec: GridSpec, seed: u64, density: f64) -> NodeSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flags = (0..spec.len()).map(|_| rng.gen_bool(density)).collect();
    NodeSet::from_flags(spec, flags).unwrap()
}

fn nonempty_set(spec: GridSpec, seed: u64, density: f64) -> NodeSet {
    let mut s = random_set(spec, seed, density);
    if s.is_empty() {
        s.insert(seed as usize % spec.len());
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn distance_matches_brute_force(seed in any::<u64>(), density in 0.001..0.05f64) {
        let spec = GridSpec::new(24, 19, 0.1, (0.0, 0.0)).unwrap();
        let s = nonempty_set(spec, seed, density);
        let d = distance_transform(&s).unwrap();
        for k in 0..spec.len() {
            let (x, y) = spec.position_of(k);
            let brute = s
                .iter()
                .map(|m| {
                    let (a, b) = spec.position_of(m);
                    ((x - a).powi(2) + (y - b).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            prop_assert!((d.at(k) - brute).abs() < 1e-12);
            prop_assert_eq!(d.at(k) == 0.0, s.contains(k));
        }
    }

    #[test]
    fn distance_is_lipschitz(seed in any::<u64>(), density in 0.001..0.2f64) {
        let spec = GridSpec::new(48, 40, 0.05, (0.0, 0.0)).unwrap();
        let s = nonempty_set(spec, seed, density);
        let d = distance_transform(&s).unwrap();
        let h = spec.h();
        for k in 0..spec.len() {
            for (di, dj, len) in [(1, 0, 1.0), (0, 1, 1.0), (1, 1, 2f64.sqrt()), (1, -1, 2f64.sqrt())] {
                if let Some(n) = spec.offset(k, di, dj) {
                    prop_assert!((d.at(k) - d.at(n)).abs() <= h * len + 1e-12);
                }
            }
        }
    }

    #[test]
    fn dilation_is_monotone(seed in any::<u64>(), t1 in 0.05..0.5f64, extra in 0.0..0.5f64) {
        let spec = GridSpec::new(40, 40, 0.05, (0.0, 0.0)).unwrap();
        let s = nonempty_set(spec, seed, 0.01);
        let a = dilate(&s, t1).unwrap();
        let b = dilate(&s, t1 + extra).unwrap();
        prop_assert!(s.is_subset(&a));
        prop_assert!(a.is_subset(&b));
    }

    #[test]
    fn iterated_dilation_within_collar(seed in any::<u64>(), t1 in 0.1..0.4f64, t2 in 0.1..0.4f64) {
        let spec = GridSpec::new(48, 48, 0.05, (0.0, 0.0)).unwrap();
        let h = spec.h();
        let s = nonempty_set(spec, seed, 0.005);
        let iterated = dilate(&dilate(&s, t1).unwrap(), t2).unwrap();
        let direct = dilate(&s, t1 + t2).unwrap();
        let d = distance_transform(&s).unwrap();
        for k in direct.difference(&iterated).iter() {
            prop_assert!(d.at(k) > t1 + t2 - 2f64.sqrt() * h, "missed node at distance {}", d.at(k));
        }
    }

    #[test]
    fn set_identities(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let spec = GridSpec::new(64, 64, 1.0 / 64.0, (0.0, 0.0)).unwrap();
        let (a, b, c) = (random_set(spec, a, 0.3), random_set(spec, b, 0.5), random_set(spec, c, 0.4));
        prop_assert_eq!(a.union(&b).complement(), a.complement().intersection(&b.complement()));
        prop_assert_eq!(a.intersection(&b).complement(), a.complement().union(&b.complement()));
        prop_assert_eq!(a.difference(&b), a.intersection(&b.complement()));
        prop_assert_eq!(a.intersection(&b.union(&c)), a.intersection(&b).union(&a.intersection(&c)));
        prop_assert!(a.intersection(&b).is_subset(&a));
        prop_assert!(a.is_subset(&a.union(&c)));
        prop_assert_eq!(a.union(&b).count() + a.intersection(&b).count(), a.count() + b.count());
        prop_assert!(a.boundary().is_subset(&a));
    }
}

#[test]
fn classification_covers_every_node() {
    let dom = DomainSpec::new(vec![
        Primitive::Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 2.0,
            y1: 1.0,
        },
        Primitive::Disc {
            cx: 2.0,
            cy: 0.5,
            r: 0.7,
        },
    ])
    .unwrap();
    let mask = build_mask(&dom, 0.5, dom.covering_grid(0.5, 0.05).unwrap()).unwrap();
    let spec = *mask.spec();
    let total = mask.interior().count() + mask.strip().count() + mask.of_class(NodeClass::Far).count();
    assert_eq!(total, spec.len());
    assert!(mask.interior().intersection(&mask.strip()).is_empty());
    let d = distance_transform(&mask.interior()).unwrap();
    for k in mask.strip().iter() {
        // Strip nodes are within R of the domain; every boundary point has an
        // interior node within about one diagonal.
        assert!(d.at(k) <= 0.5 + 2.0 * spec.h(), "strip node at distance {}", d.at(k));
    }
}
