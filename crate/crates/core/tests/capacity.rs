use slicecap::capacity::{analyze, check_fig8_cobordism, monotonicity_scan, Kind, PipelineOptions};
use slicecap::family::{build_example_family_with_blend, Blend, CrossingSign, ExampleParams};
use slicecap::Error;

#[test]
fn capacities_do_not_depend_on_the_blend() {
    let p = ExampleParams::new(5.0, 0.25, 1.0, 4.0, 2);
    for sign in [CrossingSign::Negative, CrossingSign::Positive] {
        let quintic = build_example_family_with_blend(p, sign, Blend::Quintic).unwrap();
        let septic = build_example_family_with_blend(p, sign, Blend::Septic).unwrap();
        for a in [1.0, 2.25, 3.5] {
            let a = -sign.as_f64() * a;
            let t0 = analyze(&quintic, a, &PipelineOptions::default()).unwrap().fast.unwrap();
            let t1 = analyze(&septic, a, &PipelineOptions::default()).unwrap().fast.unwrap();
            assert!(t0.max_difference(&t1) < 1e-9 * t0.max_abs(), "{sign:?} at {a}");
        }
    }
}

#[test]
fn positive_crossings_reverse_the_verdicts() {
    // with positive crossings a smaller bottom end is the unobstructed case
    for (rb, rt, obstructed) in [(2.0, 3.0, false), (3.0, 2.0, true)] {
        let v = check_fig8_cobordism(CrossingSign::Positive, rb, rt, 0).unwrap();
        assert_eq!(v.obstructed, obstructed, "{rb} -> {rt}: {:?}", v.reasons);
        assert!(v.top.get(0, Kind::LowerMinus) < 0.0);
    }
}

#[test]
fn scan_rejects_heights_of_both_signs() {
    let f = build_example_family_with_blend(ExampleParams::new(5.0, 0.25, 1.0, 4.0, 2), CrossingSign::Negative, Blend::Quintic)
        .unwrap();
    let r = monotonicity_scan(&f, &[-1.0, 1.0], &PipelineOptions::default());
    assert!(matches!(r, Err(Error::InvalidParams(_))));
}
