use slicecap::family::{build_example_family, CrossingSign, ExampleParams, GeneratingFamily};
use slicecap::homology::{build_field, persistence, rank_sweep, unexplained_events, CubicalField, Side};
use slicecap::morse::{analyze_height, CriticalDatum};
use slicecap::slice::SliceOptions;
use slicecap::Error;

fn family(sign: CrossingSign) -> GeneratingFamily {
    build_example_family(ExampleParams::new(5.0, 0.25, 1.0, 4.0, 2), sign).unwrap()
}

fn setup(sign: CrossingSign, a: f64, res: usize) -> (CubicalField, Vec<CriticalDatum>) {
    let (_, delta, crit) = analyze_height(&family(sign), a, &SliceOptions::default()).unwrap();
    (build_field(&delta, res).unwrap(), crit)
}

fn theta_for(crit: &[CriticalDatum]) -> f64 {
    1.25 * crit.iter().map(|c| c.value.abs()).fold(0.0, f64::max) + 1.0
}

#[test]
fn whole_pair_beyond_critical_values_is_acyclic() {
    for (sign, a) in [(CrossingSign::Negative, 1.0), (CrossingSign::Negative, 2.5), (CrossingSign::Positive, -1.0)] {
        let (field, crit) = setup(sign, a, 32);
        let b = persistence(&field);
        let theta = theta_for(&crit);
        for k in 0..=3 {
            assert_eq!(b.whole.relative_rank(k, -theta, theta), 0, "{sign:?} a={a} degree {k}");
        }
    }
}

#[test]
fn bars_sit_at_critical_values() {
    for res in [32, 64] {
        let (field, crit) = setup(CrossingSign::Negative, 1.0, res);
        let b = persistence(&field);
        let known: Vec<(f64, f64)> = crit.iter().map(|c| (c.value, field.cell_variation(&c.point))).collect();
        assert!(unexplained_events(&b, theta_for(&crit), &known).is_empty());
        // the minimum of Δ on P₊ is the index-0 point near −32/3
        let plus: Vec<_> = b.plus.bars[0].iter().filter(|(_, d)| d.is_infinite()).collect();
        assert_eq!(plus.len(), 1);
        assert!((plus[0].0 + 32.0 / 3.0).abs() < field.cell_variation(&[0.0, -2.0, 2.0]));
    }
}

#[test]
fn splitting_is_additive_away_from_zero() {
    let (field, crit) = setup(CrossingSign::Negative, 1.0, 32);
    let values: Vec<f64> = crit.iter().map(|c| c.value).collect();
    let theta = theta_for(&crit);
    let levels = slicecap::homology::default_levels(1.0, theta, 40);
    let sweep = rank_sweep(&field, 1.0, &levels, &values).unwrap();
    let b = &sweep.barcodes;
    for &l in &sweep.levels {
        let (s, t) = if l < 0.0 { (l, -1.0) } else { (1.0, l) };
        assert!(b.splitting_defects(s, t).is_empty(), "({s}, {t})");
    }
    for side in [Side::Plus, Side::Minus, Side::Whole] {
        let bc = b.get(side);
        for (s, t) in [(-theta, theta), (-5.0, 5.0), (-theta, -1.0), (1.0, theta)] {
            assert_eq!(bc.euler_from_ranks(s, t), bc.euler_of_pair(s, t));
        }
    }
}

#[test]
fn eta_must_separate_zero() {
    let (field, crit) = setup(CrossingSign::Negative, 1.0, 16);
    let values: Vec<f64> = crit.iter().map(|c| c.value).collect();
    assert!(matches!(rank_sweep(&field, 11.0, &[-12.0], &values), Err(Error::BadEta { .. })));
}

#[test]
fn rejects_low_resolution_and_high_dimension() {
    let f = family(CrossingSign::Negative);
    let delta = slicecap::morse::DifferenceFunction::new(f.sheared(1.0));
    assert!(matches!(build_field(&delta, 8), Err(Error::InvalidParams(_))));
    let big = f.stabilize(&slicecap::family::QuadraticForm::diagonal(&[1.0]).unwrap());
    let delta = slicecap::morse::DifferenceFunction::new(big.sheared(1.0));
    let r = build_field(&delta, 16);
    assert!(matches!(r, Err(Error::UnsupportedDimension(5))), "{:?}", r.err());
}
