use proptest::prelude::*;
use segsolve_core::fbanalysis::*;
use segsolve_core::*;

fn big_mask(h: f64) -> RegionMask {
    let dom = DomainSpec::rect(-2.0, -2.0, 2.0, 2.0).unwrap();
    build_mask(&dom, 0.5, dom.covering_grid(0.5, h).unwrap()).unwrap()
}

fn discs(spec: GridSpec, list: &[(f64, f64, f64)]) -> NodeSet {
    NodeSet::from_positions(spec, |x, y| {
        list.iter()
            .any(|&(cx, cy, r)| (x - cx).powi(2) + (y - cy).powi(2) <= r * r)
    })
}

fn disc_list(n: usize) -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-1.2..1.2f64, -1.2..1.2f64, 0.05..0.5f64), 1..=n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gap_is_symmetric(a in disc_list(3), b in disc_list(3)) {
        let mask = big_mask(1.0 / 32.0);
        let spec = *mask.spec();
        let sa = SupportSet::from_nodes(discs(spec, &a).intersection(&mask.interior()), 0.1, 0);
        let sb = SupportSet::from_nodes(discs(spec, &b).intersection(&mask.interior()), 0.1, 1);
        prop_assume!(!sa.is_empty() && !sb.is_empty());
        let ab = support_gap(&sa, &sb).unwrap().value;
        let ba = support_gap(&sb, &sa).unwrap().value;
        prop_assert!((ab - ba).abs() <= spec.h());
    }

    #[test]
    fn near_set_contains_support(list in disc_list(5), r in 0.1..0.5f64) {
        let mask = big_mask(1.0 / 32.0);
        let spec = *mask.spec();
        let s = SupportSet::from_nodes(discs(spec, &list).intersection(&mask.interior()), 0.1, 0);
        prop_assume!(!s.is_empty());
        let fan = far_and_near(&s, r, &mask).unwrap();
        prop_assume!(!fan.far_empty);
        prop_assert!(s.nodes().is_subset(&fan.near));
        prop_assert_eq!(fan.ball_union_outside_collar, 0);
    }

    #[test]
    fn dilation_ratio_is_bounded(list in disc_list(5)) {
        let h = 1.0 / 64.0;
        let dom = DomainSpec::rect(-2.0, -2.0, 2.0, 2.0).unwrap();
        let spec = dom.covering_grid(0.5, h).unwrap();
        let e = discs(spec, &list);
        prop_assume!(!e.is_empty());
        for row in perimeter_and_ratio(&e, &[0.1, 0.2, 0.3]).unwrap() {
            prop_assert!(row.ratio <= 8.0, "{:?}", row);
        }
    }
}

#[test]
fn sigma_rule() {
    assert_eq!(default_sigma(0.01, 1.0, 0.01), 0.1);
    assert_eq!(default_sigma(0.25, 1.0, 0.01), 0.5);
}
