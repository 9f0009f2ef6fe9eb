//! End-to-end acceptance checks. Run with
//! `cargo test -p slicecap --test acceptance -- --nocapture` to see the
//! PASS/FAIL table.

use std::time::{Duration, Instant};

use slicecap::capacity::{
    analyze, check_fig8_cobordism, corpus, derivative_report, measured_box, nonsqueezing_check, run_suite, BoxRegion,
    Kind, PipelineOptions, SUITES,
};
use slicecap::family::{build_example_family, CrossingSign, ExampleParams, GeneratingFamily};
use slicecap::homology::{build_field, default_levels, persistence, rank_sweep, unexplained_events};
use slicecap::morse::{
    analyze_height, bott_samples, crossing_path, morse_index_hessian, morse_index_maslov, CriticalKind,
    DifferenceFunction,
};
use slicecap::slice::SliceOptions;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fam(sign: CrossingSign) -> GeneratingFamily {
    build_example_family(ExampleParams::new(5.0, 0.25, 1.0, 4.0, 2), sign).unwrap()
}

/// Closed-form lobe area of the built-in eight, `(4/3)(K − a)^{3/2}`.
fn area(k: f64, a: f64) -> f64 {
    4.0 / 3.0 * (k - a).powf(1.5)
}

fn within(t: Instant, limit: Duration, what: &str) -> Result<Duration, String> {
    let e = t.elapsed();
    if e > limit {
        Err(format!("{what} took {e:?}, limit {limit:?}"))
    } else {
        Ok(e)
    }
}

fn critical_points_of_example() -> Outcome {
    let t = Instant::now();
    let f = fam(CrossingSign::Negative);
    let (diagram, delta, crit) = analyze_height(&f, 1.0, &SliceOptions::default()).map_err(|e| e.to_string())?;
    let a = 32.0 / 3.0;
    for (target, value, index) in [([0.0, -2.0, 2.0], -a, 0), ([0.0, 2.0, -2.0], a, 3)] {
        let c = crit
            .iter()
            .filter(|c| c.is_isolated())
            .find(|c| c.point.iter().zip(target).all(|(p, q)| (p - q).abs() < 1e-6))
            .ok_or(format!("no isolated point at {target:?}"))?;
        ensure!((c.value - value).abs() / a < 1e-6, "value {} at {target:?}, want {value}", c.value);
        ensure!(c.index == index, "index {} at {target:?}, want {index}", c.index);
    }
    let bott = crit.iter().find(|c| !c.is_isolated()).ok_or("no Bott component")?;
    ensure!(bott.kind == CriticalKind::Bott { dim: 1 }, "Bott kind {:?}", bott.kind);
    ensure!(bott.index == 1, "Bott index {}", bott.index);
    let mut worst_r = 0.0f64;
    for q in bott_samples(&delta, &diagram, 32) {
        ensure!(delta.value(&q).abs() < 1e-8, "Bott value {}", delta.value(&q));
        worst_r = worst_r.max(((q[0] * q[0] + q[1] * q[1]).sqrt() - 2.0).abs());
    }
    ensure!(worst_r < 1e-6, "Bott circle radius off by {worst_r}");
    let e = within(t, Duration::from_secs(5), "solve")?;
    Ok(format!("values ∓{a:.6}, indices 0/3, Bott circle r=2 index 1, {e:.2?}"))
}

fn quadrature_matches_critical_values() -> Outcome {
    let f = fam(CrossingSign::Negative);
    let mut worst = 0.0f64;
    for h in [1.0, 1.75, 2.5, 3.25] {
        let (d, _, crit) = analyze_height(&f, h, &SliceOptions::default()).map_err(|e| e.to_string())?;
        let q = d.lobe_area(0).ok_or(format!("no lobe at {h}"))?;
        let top = crit.iter().filter(|c| c.is_isolated()).map(|c| c.value.abs()).fold(0.0, f64::max);
        let rel = (q - top).abs() / top;
        ensure!((top - area(5.0, h)).abs() / top < 1e-8, "critical value {top} at {h} off the closed form");
        worst = worst.max(rel);
    }
    ensure!(worst < 1e-5, "worst relative error {worst:.3e}");
    Ok(format!("worst relative error {worst:.2e} over 4 heights"))
}

fn maslov_matches_hessian() -> Outcome {
    let opts = SliceOptions::default();
    let mut checked = 0;
    for (label, f, hs) in corpus().map_err(|e| e.to_string())? {
        for &h in &hs {
            let (_, delta, crit) = analyze_height(&f, h, &opts).map_err(|e| e.to_string())?;
            for c in crit.iter().filter(|c| c.is_isolated()) {
                let hess = morse_index_hessian(&delta, c).map_err(|e| e.to_string())?;
                let path = crossing_path(&delta, c, &opts).map_err(|e| format!("{label} at {h}: {e}"))?;
                let mas = morse_index_maslov(&path, f.fiber_dim()).map_err(|e| format!("{label} at {h}: {e}"))?;
                ensure!(mas == hess as i64, "{label} at {h}: Maslov {mas} vs Hessian {hess}");
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} crossings agree"))
}

fn capacity_table_and_sweep() -> Outcome {
    let t = Instant::now();
    let opts = PipelineOptions { sweep: true, resolution: 64, ..Default::default() };
    let mut worst = 0.0f64;
    for (sign, h) in [(CrossingSign::Negative, 1.0), (CrossingSign::Positive, -1.0), (CrossingSign::Negative, 3.25)] {
        let an = analyze(&fam(sign), h, &opts).map_err(|e| e.to_string())?;
        let a = an.diagram.lobe_area(0).ok_or("no lobe")?;
        let fast = an.fast.as_ref().ok_or("no fast table")?;
        let want = match sign {
            CrossingSign::Negative => [(0, Kind::LowerPlus, -a), (1, Kind::UpperMinus, a)],
            CrossingSign::Positive => [(0, Kind::LowerMinus, -a), (1, Kind::UpperPlus, a)],
        };
        for (k, kind, v) in fast.entries() {
            let expected = want.iter().find(|w| w.0 == k && w.1 == kind).map(|w| w.2).unwrap_or(0.0);
            ensure!((v - expected).abs() <= 1e-9 * a, "{sign:?} {h}: {} deg {k} = {v}, want {expected}", kind.label());
        }
        let swept = an.swept.as_ref().ok_or("no sweep table")?;
        for (k, kind, v) in fast.entries().filter(|e| e.2 != 0.0) {
            let d = (swept.get(k, kind) - v).abs();
            ensure!(d <= an.cell_variation, "{sign:?} {h}: sweep {} vs {v}, variation {}", swept.get(k, kind), an.cell_variation);
            worst = worst.max(d / an.cell_variation);
        }
    }
    let e = within(t, Duration::from_secs(120), "table and sweep")?;
    Ok(format!("rows match both signs; sweep within {:.0}% of one-cell variation; {e:.1?}", 100.0 * worst))
}

fn property_suites() -> Outcome {
    let mut summary = Vec::new();
    for name in SUITES {
        let t = Instant::now();
        let r = run_suite(name).map_err(|e| format!("{name}: {e}"))?;
        ensure!(r.passed, "{name}: {}", r.lines.join("; "));
        let e = within(t, Duration::from_secs(120), name)?;
        summary.push(format!("{name} {:.1}s", e.as_secs_f64()));
    }
    Ok(summary.join(", "))
}

fn derivative_law() -> Outcome {
    let f = fam(CrossingSign::Negative);
    let heights: Vec<f64> = (0..=10).map(|i| 1.0 + 0.25 * i as f64).collect();
    let rows = derivative_report(&f, &heights, 1e-3, &SliceOptions::default()).map_err(|e| e.to_string())?;
    ensure!(rows.len() == 2 * heights.len(), "{} rows for {} heights", rows.len(), heights.len());
    let mut worst = 0.0f64;
    for r in &rows {
        // d/dt of ∓(4/3)(K − t)^{3/2} is ±2√(K − t) for the c₊ / C₋ entries
        let closed = 2.0 * (5.0 - r.height).sqrt() * if r.kind == Kind::LowerPlus { 1.0 } else { -1.0 };
        ensure!((r.derivative - closed).abs() < 1e-3, "t={} {}: {} vs closed form {closed}", r.height, r.kind.label(), r.derivative);
        ensure!((r.gap.abs() - closed.abs()).abs() < 1e-6, "t={}: gap {} vs {closed}", r.height, r.gap);
        worst = worst.max((r.derivative.abs() - r.gap.abs()).abs());
    }
    Ok(format!("{} rows, worst |dc/dt| − |x̃_n − x_n| = {worst:.2e}", rows.len()))
}

fn cobordism_verdicts() -> Outcome {
    let mut out = Vec::new();
    for (rb, rt, want) in [(2.0, 3.0, true), (2.0, 2.0, true), (3.0, 2.0, false)] {
        let v = check_fig8_cobordism(CrossingSign::Negative, rb, rt, 0).map_err(|e| e.to_string())?;
        ensure!(v.obstructed == want, "r={rb} R={rt}: {}", v.label());
        out.push(format!("{rb}->{rt} {}", v.label()));
    }
    Ok(out.join(", "))
}

fn nonsqueezing() -> Outcome {
    let f = fam(CrossingSign::Negative);
    let opts = SliceOptions::default();
    let b = measured_box(&f, 1.0, 0.05, &opts).map_err(|e| e.to_string())?;
    let v = nonsqueezing_check(&f, 1.0, b, &opts).map_err(|e| e.to_string())?;
    ensure!(v.product >= 32.0 / 3.0 && !v.excluded, "measured l*w {} ({})", v.product, v.label());
    let synthetic = BoxRegion { x: (-2.5, 2.5), y: (1.0, 3.0) };
    let s = nonsqueezing_check(&f, 1.0, synthetic, &opts).map_err(|e| e.to_string())?;
    ensure!((s.product - 10.0).abs() < 1e-12 && s.excluded, "synthetic box {} {}", s.product, s.label());
    Ok(format!("measured l*w = {:.3} >= 32/3; l*w = 10 box {}", v.product, s.label()))
}

fn homology_sanity() -> Outcome {
    let mut detail = Vec::new();
    for res in [32, 64] {
        for (sign, h) in [(CrossingSign::Negative, 1.0), (CrossingSign::Positive, -1.0)] {
            let f = fam(sign);
            let (_, delta, crit) = analyze_height(&f, h, &SliceOptions::default()).map_err(|e| e.to_string())?;
            let delta: DifferenceFunction = delta;
            let field = build_field(&delta, res).map_err(|e| e.to_string())?;
            let theta = 1.25 * crit.iter().map(|c| c.value.abs()).fold(0.0, f64::max) + 1.0;
            let b = persistence(&field);
            for k in 0..=b.whole.max_degree() {
                let r = b.whole.relative_rank(k, -theta, theta);
                ensure!(r == 0, "res {res} {sign:?}: rank {r} in degree {k} beyond all critical values");
            }
            let values: Vec<f64> = crit.iter().map(|c| c.value).collect();
            let levels = default_levels(1.0, theta, 40);
            let sweep = rank_sweep(&field, 1.0, &levels, &values).map_err(|e| e.to_string())?;
            for &l in &sweep.levels {
                let (s, t) = if l < 0.0 { (l, -1.0) } else { (1.0, l) };
                let bad = sweep.barcodes.splitting_defects(s, t);
                ensure!(bad.is_empty(), "res {res} {sign:?}: splitting fails at ({s}, {t}): {bad:?}");
            }
            let known: Vec<(f64, f64)> = crit.iter().map(|c| (c.value, field.cell_variation(&c.point))).collect();
            let stray = unexplained_events(&b, theta, &known);
            ensure!(stray.is_empty(), "res {res} {sign:?}: events away from critical values {stray:?}");
        }
        detail.push(format!("res {res} ok"));
    }
    Ok(detail.join(", "))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("critical points of the example", critical_points_of_example),
        ("quadrature vs critical values", quadrature_matches_critical_values),
        ("Maslov vs Hessian index", maslov_matches_hessian),
        ("capacity table and rank sweep", capacity_table_and_sweep),
        ("property suites", property_suites),
        ("derivative law", derivative_law),
        ("cobordism verdicts", cobordism_verdicts),
        ("non-squeezing", nonsqueezing),
        ("homology sanity", homology_sanity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(msg) => println!("criterion {} {name}: PASS ({msg})", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({msg})", i + 1);
            }
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
