//! Browser bindings: the slice drawing, the critical points of the
//! difference function and a capacity curve, each for the built-in
//! figure-eight family. Results are SVG or JSON strings.

use serde_json::{json, Value};
use slicecap::capacity::{analyze, monotonicity_scan, PipelineOptions};
use slicecap::family::{build_example_family, CrossingSign, ExampleParams, GeneratingFamily};
use slicecap::io::diagram_svg;
use slicecap::morse::{analyze_height, CriticalKind};
use slicecap::slice::SliceOptions;
use wasm_bindgen::prelude::*;

fn family(sign: &str, k: f64, dim: usize) -> Result<GeneratingFamily, String> {
    let sign = match sign {
        "neg" => CrossingSign::Negative,
        "pos" => CrossingSign::Positive,
        _ => return Err(format!("unknown sign '{sign}'")),
    };
    build_example_family(ExampleParams::new(k, 0.25, 1.0, k - 1.0, dim), sign).map_err(|e| e.to_string())
}

fn err(e: impl ToString) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// SVG of the slice of the built-in family at height `a`.
#[wasm_bindgen]
pub fn slice_svg(sign: &str, k: f64, a: f64) -> Result<String, JsValue> {
    slice_svg_impl(sign, k, a).map_err(err)
}

fn slice_svg_impl(sign: &str, k: f64, a: f64) -> Result<String, String> {
    let f = family(sign, k, 2)?;
    let h = analyze(&f, a, &PipelineOptions::default()).map_err(|e| e.to_string())?;
    Ok(diagram_svg(&h.diagram))
}

/// Critical points of the difference function at height `a` as JSON.
#[wasm_bindgen]
pub fn critical_points(sign: &str, k: f64, a: f64, dim: usize) -> Result<String, JsValue> {
    critical_points_impl(sign, k, a, dim).map(|v| v.to_string()).map_err(err)
}

fn critical_points_impl(sign: &str, k: f64, a: f64, dim: usize) -> Result<Value, String> {
    let f = family(sign, k, dim)?;
    let (_, _, crit) = analyze_height(&f, a, &SliceOptions::default()).map_err(|e| e.to_string())?;
    Ok(Value::Array(
        crit.iter()
            .map(|c| {
                let kind = match c.kind {
                    CriticalKind::Isolated => "isolated".to_string(),
                    CriticalKind::Bott { dim } => format!("Bott, dim {dim}"),
                };
                json!({
                    "kind": kind,
                    "half_space": c.half_space.label(),
                    "value": c.value,
                    "index": c.index,
                    "point": c.point,
                })
            })
            .collect(),
    ))
}

/// Fast-rule capacities at `steps + 1` heights from `from` to `to`, as JSON
/// `{heights, series: [{label, values}], skipped}`.
#[wasm_bindgen]
pub fn capacity_curve(sign: &str, k: f64, from: f64, to: f64, steps: usize) -> Result<String, JsValue> {
    capacity_curve_impl(sign, k, from, to, steps).map(|v| v.to_string()).map_err(err)
}

fn capacity_curve_impl(sign: &str, k: f64, from: f64, to: f64, steps: usize) -> Result<Value, String> {
    if steps == 0 || steps > 400 {
        return Err("steps must be between 1 and 400".into());
    }
    let f = family(sign, k, 2)?;
    let heights: Vec<f64> = (0..=steps).map(|i| from + (to - from) * i as f64 / steps as f64).collect();
    let curve = monotonicity_scan(&f, &heights, &PipelineOptions::default()).map_err(|e| e.to_string())?;
    let done: Vec<_> = curve.analyses().filter_map(|h| h.best().map(|t| (h.height, t))).collect();
    let mut series = Vec::new();
    if let Some((_, first)) = done.first() {
        for (deg, kind, _) in first.entries() {
            let values: Vec<f64> = done.iter().map(|(_, t)| t.get(deg, kind)).collect();
            if values.iter().any(|v| *v != 0.0) {
                series.push(json!({ "label": format!("{}({deg})", kind.label()), "values": values }));
            }
        }
    }
    let skipped: Vec<Value> = curve.skipped().map(|(h, why)| json!({ "height": h, "reason": why })).collect();
    Ok(json!({
        "heights": done.iter().map(|(h, _)| *h).collect::<Vec<_>>(),
        "series": series,
        "skipped": skipped,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bindings_produce_expected_shapes() {
        assert!(slice_svg_impl("neg", 5.0, 1.0).unwrap().starts_with("<svg"));
        let crit = critical_points_impl("neg", 5.0, 1.0, 2).unwrap();
        assert_eq!(crit.as_array().unwrap().len(), 3);
        let curve = capacity_curve_impl("neg", 5.0, 1.0, 3.0, 4).unwrap();
        assert_eq!(curve["heights"].as_array().unwrap().len(), 5);
        assert_eq!(curve["series"].as_array().unwrap().len(), 2);
        assert!(family("sideways", 5.0, 2).is_err());
    }
}
