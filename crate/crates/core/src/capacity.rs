//! The four capacities `c₊, c₋, C₊, C₋` of a slice, per slice degree, and
//! the checks built on them.

use crate::error::{Error, Result};
use crate::family::{build_example_family, CrossingSign, ExampleParams, GeneratingFamily, QuadraticForm};
use crate::homology::{self, PairKind, RankSweep, Side};
use crate::morse::{analyze_height, CriticalDatum, DifferenceFunction, HalfSpace};
use crate::slice::{extract_slice, SliceDiagram, SliceOptions};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    LowerPlus,
    LowerMinus,
    UpperPlus,
    UpperMinus,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::LowerPlus, Kind::LowerMinus, Kind::UpperPlus, Kind::UpperMinus];

    pub fn label(self) -> &'static str {
        match self {
            Kind::LowerPlus => "c+",
            Kind::LowerMinus => "c-",
            Kind::UpperPlus => "C+",
            Kind::UpperMinus => "C-",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }

    fn side(self) -> Side {
        match self {
            Kind::LowerPlus | Kind::UpperPlus => Side::Plus,
            _ => Side::Minus,
        }
    }

    fn is_lower(self) -> bool {
        matches!(self, Kind::LowerPlus | Kind::LowerMinus)
    }

    /// Direction in which the capacity must move as the height increases
    /// (`+1` non-decreasing, `−1` non-increasing).
    pub fn monotone_direction(self) -> f64 {
        match self {
            Kind::LowerPlus | Kind::UpperPlus => 1.0,
            _ => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    SingleCrossingRule,
    RankSweep,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::SingleCrossingRule => "single_crossing_rule",
            Method::RankSweep => "rank_sweep",
        }
    }
}

/// One capacity value and the critical point realising it, if known.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Entry {
    pub value: f64,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub point: Vec<f64>,
    pub value: f64,
    /// `x̃_n − x_n` at the witness.
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct CapacityTable {
    pub height: f64,
    pub method: Method,
    /// `rows[k][kind]` for slice degrees `k = 0..=n−1`.
    pub rows: Vec<[Entry; 4]>,
    /// Set when the slice has several crossings, so that the per-degree
    /// thresholds may not separate classes.
    pub ambiguous: bool,
    pub notes: Vec<String>,
}

impl CapacityTable {
    pub fn zero(height: f64, method: Method, slice_dim: usize) -> Self {
        CapacityTable {
            height,
            method,
            rows: vec![Default::default(); slice_dim + 1],
            ambiguous: false,
            notes: Vec::new(),
        }
    }

    pub fn get(&self, degree: usize, kind: Kind) -> f64 {
        self.rows.get(degree).map(|r| r[kind.slot()].value).unwrap_or(0.0)
    }

    pub fn entry(&self, degree: usize, kind: Kind) -> &Entry {
        &self.rows[degree][kind.slot()]
    }

    fn set(&mut self, degree: usize, kind: Kind, e: Entry) {
        self.rows[degree][kind.slot()] = e;
    }

    pub fn degrees(&self) -> usize {
        self.rows.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries().all(|(_, _, v)| v == 0.0)
    }

    /// `(degree, kind, value)` for every slot.
    pub fn entries(&self) -> impl Iterator<Item = (usize, Kind, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(k, r)| Kind::ALL.iter().map(move |kind| (k, *kind, r[kind.slot()].value)))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().map(|(_, _, v)| v.abs()).fold(0.0, f64::max)
    }

    /// Largest absolute difference between two tables of the same shape.
    pub fn max_difference(&self, other: &CapacityTable) -> f64 {
        self.entries()
            .map(|(k, kind, v)| (v - other.get(k, kind)).abs())
            .fold(0.0, f64::max)
    }

    /// Entries where the two tables disagree: zero against nonzero, or
    /// nonzero values further apart than `tol`.
    pub fn disagreements(&self, other: &CapacityTable, tol: f64) -> Vec<(usize, Kind, f64, f64)> {
        self.entries()
            .filter_map(|(k, kind, v)| {
                let w = other.get(k, kind);
                let bad = (v == 0.0) != (w == 0.0) || (v - w).abs() > tol;
                bad.then_some((k, kind, v, w))
            })
            .collect()
    }
}

fn witness(cd: &CriticalDatum, delta: &DifferenceFunction) -> Witness {
    let (i, j) = delta.xn_indices();
    Witness { point: cd.point.clone(), value: cd.value, gap: cd.point[j] - cd.point[i] }
}

/// Attaches the isolated critical point whose value is within `tol` of each
/// nonzero entry.
pub fn attach_witnesses(table: &mut CapacityTable, delta: &DifferenceFunction, crit: &[CriticalDatum], tol: f64) {
    for row in &mut table.rows {
        for e in row.iter_mut().filter(|e| e.value != 0.0) {
            e.witness = crit
                .iter()
                .filter(|c| c.is_isolated() && (c.value - e.value).abs() <= tol)
                .min_by(|a, b| (a.value - e.value).abs().total_cmp(&(b.value - e.value).abs()))
                .map(|c| witness(c, delta));
        }
    }
}

/// Single-crossing rule. A negative crossing with lobe area `A` gives
/// `c₊ = −A` in degree 0 and `C₋ = A` in degree `n − 1`; a positive one
/// gives `c₋ = −A` and `C₊ = A`. For `n > 2` crossings carry no sign; the
/// type is read off the half-space holding the negative critical value,
/// and `A` is that value's magnitude.
pub fn capacities_single_crossing(diagram: &SliceDiagram, crit: &[CriticalDatum]) -> Result<CapacityTable> {
    let count = diagram.double_points.len();
    if count != 1 {
        return Err(Error::RuleNotApplicable(count));
    }
    let dp = &diagram.double_points[0];
    let low = crit
        .iter()
        .filter(|c| c.is_isolated() && c.value < 0.0)
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| Error::MissingCriticalPoint {
            crossing: 0,
            detail: "no negative isolated critical point".into(),
        })?;
    let (negative, area) = match dp.sign {
        Some(s) => (s < 0, diagram.lobe_area(0).unwrap_or(-low.value)),
        None => (low.half_space == HalfSpace::Plus, -low.value),
    };
    if !(area > 0.0) {
        return Err(Error::NonGenericFamily(format!("lobe area {area} is not positive")));
    }
    let top = diagram.base_dim - 1;
    let mut t = CapacityTable::zero(diagram.height, Method::SingleCrossingRule, top);
    let (lk, uk) = if negative {
        (Kind::LowerPlus, Kind::UpperMinus)
    } else {
        (Kind::LowerMinus, Kind::UpperPlus)
    };
    t.set(0, lk, Entry { value: -area, witness: None });
    t.set(top, uk, Entry { value: area, witness: None });
    Ok(t)
}

/// Capacities read off a rank sweep. A lower capacity is the largest event
/// in `[−θ, −η)` where the lower-pair rank in degree `k + N` changes; an
/// upper capacity is the smallest event in `(η, θ]` where the upper-pair rank
/// in degree `k + N + 2` is nonzero. Events beyond `±θ` belong to the box.
pub fn capacities_from_sweep(sweep: &RankSweep, slice_dim: usize, fiber_dim: usize) -> Result<CapacityTable> {
    let mut t = CapacityTable::zero(sweep.height, Method::RankSweep, slice_dim);
    let theta = sweep.theta;
    for k in 0..=slice_dim {
        for kind in Kind::ALL {
            let side = kind.side();
            let b = sweep.barcodes.get(side);
            let value = if kind.is_lower() {
                let j = k + fiber_dim + homology::LOWER_SHIFT;
                let deg: Vec<usize> = if j == 0 { vec![0] } else { vec![j - 1, j] };
                let ev: Vec<f64> = b.events(&deg).into_iter().filter(|e| *e >= -theta && *e < -sweep.eta).collect();
                let r = |l: f64| sweep.rank(PairKind::Lower, side, j, l);
                let mut found = 0.0;
                for (i, &e) in ev.iter().enumerate() {
                    let left = if i == 0 { e - 1.0 } else { 0.5 * (ev[i - 1] + e) };
                    if r(e) != r(left) {
                        found = e;
                    }
                }
                found
            } else {
                let j = k + fiber_dim + homology::UPPER_SHIFT;
                let ev: Vec<f64> = b
                    .events(&[j - 1, j])
                    .into_iter()
                    .filter(|e| *e > sweep.eta && *e <= theta)
                    .collect();
                ev.into_iter()
                    .find(|e| sweep.rank(PairKind::Upper, side, j, *e) > 0)
                    .unwrap_or(0.0)
            };
            t.set(k, kind, Entry { value, witness: None });
        }
    }
    Ok(t)
}

/// Settings for the per-height pipeline.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub slice: SliceOptions,
    pub fast: bool,
    pub sweep: bool,
    pub resolution: usize,
    /// Separation level; `None` picks half the smallest nonzero |critical value|, at most 1.
    pub eta: Option<f64>,
    /// Sweep levels per sign.
    pub levels: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { slice: SliceOptions::default(), fast: true, sweep: false, resolution: 64, eta: None, levels: 50 }
    }
}

#[derive(Debug, Clone)]
pub struct HeightAnalysis {
    pub height: f64,
    pub diagram: SliceDiagram,
    pub critical: Vec<CriticalDatum>,
    pub fast: Option<CapacityTable>,
    pub swept: Option<CapacityTable>,
    pub sweep: Option<RankSweep>,
    /// Largest one-cell variation at the isolated critical points.
    pub cell_variation: f64,
}

impl HeightAnalysis {
    /// The sweep table if present, otherwise the fast one.
    pub fn best(&self) -> Option<&CapacityTable> {
        self.fast.as_ref().or(self.swept.as_ref())
    }
}

pub fn default_eta(crit: &[CriticalDatum]) -> f64 {
    let m = crit
        .iter()
        .map(|c| c.value.abs())
        .filter(|v| *v > 1e-9)
        .fold(f64::INFINITY, f64::min);
    (0.5 * m).min(1.0)
}

/// Slice, critical data and capacity tables at one height.
pub fn analyze(f: &GeneratingFamily, a: f64, opts: &PipelineOptions) -> Result<HeightAnalysis> {
    let (diagram, delta, crit) = analyze_height(f, a, &opts.slice)?;
    let slice_dim = f.base_dim() - 1;
    let tol_fast = 1e-6;
    let fast = if !opts.fast {
        None
    } else if diagram.is_empty() {
        Some(CapacityTable::zero(a, Method::SingleCrossingRule, slice_dim))
    } else {
        match capacities_single_crossing(&diagram, &crit) {
            Ok(mut t) => {
                let tol = tol_fast * (1.0 + t.max_abs());
                attach_witnesses(&mut t, &delta, &crit, tol);
                Some(t)
            }
            Err(Error::RuleNotApplicable(_)) if opts.sweep => None,
            Err(e) => return Err(e),
        }
    };
    let mut swept = None;
    let mut sweep = None;
    let mut cell_variation = 0.0f64;
    if opts.sweep {
        let field = homology::build_field(&delta, opts.resolution)?;
        let values: Vec<f64> = crit.iter().map(|c| c.value).collect();
        let cmax = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if cmax >= field.theta {
            return Err(Error::InsufficientSweep(format!(
                "critical value {cmax} lies beyond the sweep window {}",
                field.theta
            )));
        }
        for c in crit.iter().filter(|c| c.is_isolated()) {
            cell_variation = cell_variation.max(field.cell_variation(&c.point));
        }
        let eta = opts.eta.unwrap_or_else(|| default_eta(&crit));
        let levels = homology::default_levels(eta, field.theta, opts.levels);
        let s = homology::rank_sweep(&field, eta, &levels, &values)?;
        let mut t = capacities_from_sweep(&s, slice_dim, f.fiber_dim())?;
        attach_witnesses(&mut t, &delta, &crit, cell_variation.max(1e-9));
        t.ambiguous = diagram.double_points.len() > 1;
        swept = Some(t);
        sweep = Some(s);
    }
    let mut fast = fast;
    if let Some(t) = fast.as_mut() {
        t.ambiguous = diagram.double_points.len() > 1;
    }
    Ok(HeightAnalysis { height: a, diagram, critical: crit, fast, swept, sweep, cell_variation })
}

/// One height of a scan, or the reason it was skipped.
#[derive(Debug, Clone)]
pub enum ScanPoint {
    Done(Box<HeightAnalysis>),
    Skipped { height: f64, reason: String },
}

#[derive(Debug, Clone)]
pub struct CapacityCurve {
    pub points: Vec<ScanPoint>,
}

impl CapacityCurve {
    pub fn analyses(&self) -> impl Iterator<Item = &HeightAnalysis> {
        self.points.iter().filter_map(|p| match p {
            ScanPoint::Done(h) => Some(h.as_ref()),
            _ => None,
        })
    }

    pub fn skipped(&self) -> impl Iterator<Item = (f64, &str)> {
        self.points.iter().filter_map(|p| match p {
            ScanPoint::Skipped { height, reason } => Some((*height, reason.as_str())),
            _ => None,
        })
    }

    /// `(height, value)` of one capacity along the scan.
    pub fn series(&self, degree: usize, kind: Kind) -> Vec<(f64, f64)> {
        self.analyses()
            .filter_map(|h| h.best().map(|t| (h.height, t.get(degree, kind))))
            .collect()
    }
}

/// Runs the pipeline at every height; numerical failures are recorded as
/// skipped heights rather than aborting the scan.
pub fn monotonicity_scan(f: &GeneratingFamily, heights: &[f64], opts: &PipelineOptions) -> Result<CapacityCurve> {
    if heights.iter().any(|h| *h > 0.0) && heights.iter().any(|h| *h < 0.0) {
        return Err(Error::InvalidParams("scan heights must all have the same sign".into()));
    }
    let mut hs = heights.to_vec();
    hs.sort_by(|a, b| a.total_cmp(b));
    let run = |a: &f64| match analyze(f, *a, opts) {
        Ok(h) => Ok(ScanPoint::Done(Box::new(h))),
        Err(e) if e.is_numerical() => Ok(ScanPoint::Skipped { height: *a, reason: e.to_string() }),
        Err(e) => Err(e),
    };
    #[cfg(feature = "parallel")]
    let points: Result<Vec<ScanPoint>> = hs.par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let points: Result<Vec<ScanPoint>> = hs.iter().map(run).collect();
    Ok(CapacityCurve { points: points? })
}

pub const EQUALITY_REL: f64 = 1e-6;

/// A violated monotonicity inequality between two heights.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityViolation {
    pub degree: usize,
    pub kind: Kind,
    pub low: (f64, f64),
    pub high: (f64, f64),
}

/// Checks the four monotonicity inequalities between a lower and a higher
/// table: `c₊, C₊` non-decreasing and `c₋, C₋` non-increasing upwards,
/// strictly unless both values are 0. Values closer than `EQUALITY_REL`
/// (relative) count as equal.
pub fn monotonicity_violations(low: &CapacityTable, high: &CapacityTable) -> Vec<MonotonicityViolation> {
    let mut out = Vec::new();
    for (k, kind, v0) in low.entries() {
        let v1 = high.get(k, kind);
        if v0 == 0.0 && v1 == 0.0 {
            continue;
        }
        if (v1 - v0) * kind.monotone_direction() <= EQUALITY_REL * v0.abs().max(v1.abs()) {
            out.push(MonotonicityViolation { degree: k, kind, low: (low.height, v0), high: (high.height, v1) });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeRow {
    pub height: f64,
    pub degree: usize,
    pub kind: Kind,
    /// Central difference of the capacity in the height.
    pub derivative: f64,
    /// `x̃_n − x_n` at the critical point realising the capacity.
    pub gap: f64,
}

impl DerivativeRow {
    pub fn error(&self) -> f64 {
        (self.derivative - self.gap).abs()
    }
}

/// Compares `dv/dt` with `x̃_n − x_n` at the realising critical point, for
/// every nonzero fast-rule entry. The capacity is differentiated through its
/// witness critical value, computed at `t ± step`.
pub fn derivative_report(f: &GeneratingFamily, heights: &[f64], step: f64, slice: &SliceOptions) -> Result<Vec<DerivativeRow>> {
    let opts = PipelineOptions { slice: *slice, ..Default::default() };
    let mut rows = Vec::new();
    for &t in heights {
        let mid = analyze(f, t, &opts)?;
        let Some(table) = mid.fast else { continue };
        let lo = analyze(f, t - step, &opts)?.fast;
        let hi = analyze(f, t + step, &opts)?.fast;
        let (Some(lo), Some(hi)) = (lo, hi) else { continue };
        for (k, kind, v) in table.entries() {
            if v == 0.0 {
                continue;
            }
            let w = |tab: &CapacityTable| tab.entry(k, kind).witness.as_ref().map(|w| w.value);
            let (Some(a), Some(b), Some(wm)) = (w(&lo), w(&hi), table.entry(k, kind).witness.as_ref()) else {
                continue;
            };
            rows.push(DerivativeRow { height: t, degree: k, kind, derivative: (b - a) / (2.0 * step), gap: wm.gap });
        }
    }
    Ok(rows)
}

/// Largest `|x_n − x̃_n|` over the isolated critical points of an analysis.
pub fn crossing_gap(h: &HeightAnalysis, f: &GeneratingFamily) -> f64 {
    let m = f.xn_index();
    let k = 1 + f.fiber_dim();
    h.critical
        .iter()
        .filter(|c| c.is_isolated())
        .map(|c| (c.point[m] - c.point[m + k]).abs())
        .fold(0.0, f64::max)
}

/// Adjacent-height jumps exceeding `ℓ·Δt`, with `ℓ` the largest crossing
/// gap at either end: `(t0, t1, degree, kind, jump, bound)`.
pub fn continuity_violations(curve: &CapacityCurve, f: &GeneratingFamily) -> Vec<(f64, f64, usize, Kind, f64, f64)> {
    let hs: Vec<&HeightAnalysis> = curve.analyses().collect();
    let mut out = Vec::new();
    for w in hs.windows(2) {
        let (Some(t0), Some(t1)) = (w[0].best(), w[1].best()) else { continue };
        let ell = crossing_gap(w[0], f).max(crossing_gap(w[1], f));
        let bound = ell * (w[1].height - w[0].height).abs() * (1.0 + 1e-6) + 1e-9;
        for (k, kind, v0) in t0.entries() {
            let jump = (t1.get(k, kind) - v0).abs();
            if jump > bound {
                out.push((w[0].height, w[1].height, k, kind, jump, bound));
            }
        }
    }
    out
}

/// Built-in figure-eight family whose slice at height `a` has radius `r`.
pub fn fig8_family(sign: CrossingSign, r: f64, a: f64) -> Result<GeneratingFamily> {
    if !(r > 0.0) {
        return Err(Error::InvalidParams(format!("radius must be positive, got {r}")));
    }
    build_example_family(ExampleParams::new(r * r + a.abs(), 0.25, 1.0, 3.0, 2), sign)
}

/// Default heights of the bottom and top ends for a sign.
pub fn cobordism_heights(sign: CrossingSign) -> (f64, f64) {
    match sign {
        CrossingSign::Negative => (1.5, 2.5),
        CrossingSign::Positive => (-2.5, -1.5),
    }
}

#[derive(Debug, Clone)]
pub struct CobordismVerdict {
    pub obstructed: bool,
    pub reasons: Vec<String>,
    pub bottom: CapacityTable,
    pub top: CapacityTable,
    pub writhe: Option<(i32, i32)>,
    pub chi: i32,
}

impl CobordismVerdict {
    pub fn label(&self) -> &'static str {
        if self.obstructed {
            "OBSTRUCTED"
        } else {
            "NOT-OBSTRUCTED"
        }
    }
}

/// Obstruction from the monotonicity inequalities and from the Euler
/// constraint `writhe(top) − writhe(bottom) = χ`. `NOT-OBSTRUCTED` only
/// means that no obstruction was found.
pub fn cobordism_obstruction(
    bottom: &CapacityTable,
    top: &CapacityTable,
    chi: i32,
    writhe: Option<(i32, i32)>,
) -> Result<CobordismVerdict> {
    if bottom.height >= top.height || bottom.height * top.height <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "need same-sign heights with bottom below top, got {} and {}",
            bottom.height, top.height
        )));
    }
    let mut reasons: Vec<String> = monotonicity_violations(bottom, top)
        .into_iter()
        .map(|v| {
            format!(
                "{} in degree {} must {} upwards, strictly unless both vanish: {} at {} vs {} at {}",
                v.kind.label(),
                v.degree,
                if v.kind.monotone_direction() > 0.0 { "increase" } else { "decrease" },
                v.low.1,
                v.low.0,
                v.high.1,
                v.high.0
            )
        })
        .collect();
    if let Some((wb, wt)) = writhe {
        if wt - wb != chi {
            reasons.push(format!("writhe difference {} - {} does not equal chi = {chi}", wt, wb));
        }
    }
    Ok(CobordismVerdict { obstructed: !reasons.is_empty(), reasons, bottom: bottom.clone(), top: top.clone(), writhe, chi })
}

/// Convenience wrapper: builds both ends for the built-in figure-eight
/// families and runs the checker.
pub fn check_fig8_cobordism(sign: CrossingSign, r_bottom: f64, r_top: f64, chi: i32) -> Result<CobordismVerdict> {
    let (hb, ht) = cobordism_heights(sign);
    let opts = PipelineOptions::default();
    let end = |r: f64, a: f64| -> Result<(CapacityTable, Option<i32>)> {
        let f = fig8_family(sign, r, a)?;
        let h = analyze(&f, a, &opts)?;
        Ok((h.fast.expect("fast rule requested"), h.diagram.writhe))
    };
    let (b, wb) = end(r_bottom, hb)?;
    let (t, wt) = end(r_top, ht)?;
    let writhe = wb.zip(wt);
    cobordism_obstruction(&b, &t, chi, writhe)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxRegion {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl BoxRegion {
    pub fn length(&self) -> f64 {
        self.x.1 - self.x.0
    }

    pub fn width(&self) -> f64 {
        self.y.1 - self.y.0
    }
}

#[derive(Debug, Clone)]
pub struct NonSqueezingVerdict {
    pub region: BoxRegion,
    pub product: f64,
    pub capacity: f64,
    pub excluded: bool,
}

impl NonSqueezingVerdict {
    pub fn label(&self) -> &'static str {
        if self.excluded {
            "EXCLUDED"
        } else {
            "SQUEEZABLE-NOT-EXCLUDED"
        }
    }
}

/// Compares `ℓ·w` of a box in the `(x_n, y_n)` plane with the largest
/// capacity of the slice at `a`. The box must contain the slice: its `x_n`
/// range covers the traced curve and its `y_n` range contains `a`.
pub fn nonsqueezing_check(f: &GeneratingFamily, a: f64, region: BoxRegion, opts: &SliceOptions) -> Result<NonSqueezingVerdict> {
    if !(region.length() > 0.0 && region.width() > 0.0) {
        return Err(Error::InvalidBox(format!("degenerate box {region:?}")));
    }
    let h = analyze(f, a, &PipelineOptions { slice: *opts, ..Default::default() })?;
    let (lo, hi) = xn_extent(&h.diagram);
    if h.diagram.is_empty() || lo < region.x.0 || hi > region.x.1 || a < region.y.0 || a > region.y.1 {
        return Err(Error::InvalidBox(format!(
            "{region:?} misses the slice at height {a} (x_n range [{lo}, {hi}])"
        )));
    }
    let capacity = h
        .best()
        .map(|t| t.max_abs())
        .unwrap_or(0.0);
    let product = region.length() * region.width();
    Ok(NonSqueezingVerdict { region, product, capacity, excluded: product < capacity })
}

fn xn_extent(d: &SliceDiagram) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in &d.components {
        for p in &c.line.points {
            lo = lo.min(p.x_n);
            hi = hi.max(p.x_n);
        }
    }
    (lo, hi)
}

/// Bounding box in the `(x_n, y_n)` plane of the part of the Lagrangian
/// above `a`, measured by tracing slices at heights `a, a + step, …` until
/// they vanish.
pub fn measured_box(f: &GeneratingFamily, a: f64, step: f64, opts: &SliceOptions) -> Result<BoxRegion> {
    let mut x = (f64::INFINITY, f64::NEG_INFINITY);
    let mut top = a;
    let mut t = a;
    loop {
        // the slice collapses at the top of the disk, where it is not
        // transverse
        let d = match extract_slice(f, t, opts) {
            Ok(d) if !d.is_empty() => d,
            Ok(_) | Err(Error::NonTransverseSlice { .. }) if t > a => break,
            Ok(_) => break,
            Err(e) => return Err(e),
        };
        let (lo, hi) = xn_extent(&d);
        x = (x.0.min(lo), x.1.max(hi));
        top = t;
        t += step;
        if t > a + 1e4 * step {
            return Err(Error::InvalidParams("slices do not vanish above the base height".into()));
        }
    }
    if !x.0.is_finite() {
        return Err(Error::InvalidBox(format!("slice at {a} is empty")));
    }
    Ok(BoxRegion { x, y: (a, top) })
}

/// Outcome of a property suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    pub lines: Vec<String>,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        SuiteReport { name: name.into(), passed: true, lines: Vec::new() }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.lines.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }
}

pub const SUITES: [&str; 7] = ["monotonicity", "conformality", "invariance", "nonvanishing", "continuity", "nonsqueezing", "euler"];

/// The built-in corpus: figure eights with each crossing sign and the
/// sphere slice in dimension 3, each with a list of generic heights.
pub fn corpus() -> Result<Vec<(String, GeneratingFamily, Vec<f64>)>> {
    let p = ExampleParams::new(5.0, 0.25, 1.0, 4.0, 2);
    let hs: Vec<f64> = (0..=10).map(|i| 1.0 + 0.25 * i as f64).collect();
    let neg: Vec<f64> = hs.iter().map(|h| -h).collect();
    Ok(vec![
        ("example21-neg".into(), build_example_family(p, CrossingSign::Negative)?, hs.clone()),
        ("example21-pos".into(), build_example_family(p, CrossingSign::Positive)?, neg),
        (
            "example21-neg-3d".into(),
            build_example_family(ExampleParams { dim: 3, ..p }, CrossingSign::Negative)?,
            vec![1.0, 2.0, 3.0],
        ),
    ])
}

pub fn run_suite(name: &str) -> Result<SuiteReport> {
    let opts = PipelineOptions::default();
    let mut rep = SuiteReport::new(name);
    match name {
        "monotonicity" => {
            for (label, f, hs) in corpus()? {
                let curve = monotonicity_scan(&f, &hs, &opts)?;
                let tables: Vec<&CapacityTable> = curve.analyses().filter_map(|h| h.best()).collect();
                let mut bad = Vec::new();
                for w in tables.windows(2) {
                    bad.extend(monotonicity_violations(w[0], w[1]));
                }
                let skipped = curve.skipped().count();
                rep.check(bad.is_empty() && skipped == 0, format!("{label}: {} heights, {} violations, {skipped} skipped", tables.len(), bad.len()));
            }
        }
        "continuity" => {
            for (label, f, hs) in corpus()? {
                let curve = monotonicity_scan(&f, &hs, &opts)?;
                let bad = continuity_violations(&curve, &f);
                rep.check(bad.is_empty(), format!("{label}: {} jumps above l*dt", bad.len()));
            }
        }
        "conformality" => {
            let mut worst = 0.0f64;
            for (label, f, hs) in corpus()? {
                for beta in [0.5, 2.0] {
                    let g = f.dilate(beta)?;
                    for &a in hs.iter().step_by(3) {
                        let t0 = analyze(&f, a, &opts)?.fast.expect("fast table");
                        let t1 = analyze(&g, beta * a, &opts)?.fast.expect("fast table");
                        for (k, kind, v) in t0.entries() {
                            let w = t1.get(k, kind);
                            let dev = if v == 0.0 { w.abs() } else { (w - beta * beta * v).abs() / (beta * beta * v.abs()) };
                            worst = worst.max(dev);
                        }
                    }
                    rep.lines.push(format!("     {label} beta={beta}"));
                }
            }
            rep.check(worst < 1e-6, format!("max relative deviation {worst:.3e} (limit 1e-6)"));
        }
        "invariance" => {
            for (label, f, hs) in corpus()? {
                for coeff in [1.0, -1.0] {
                    let g = f.stabilize(&QuadraticForm::diagonal(&[coeff])?);
                    let mut worst = 0.0f64;
                    let mut index_ok = true;
                    for &a in hs.iter().step_by(5) {
                        let h0 = analyze(&f, a, &opts)?;
                        let h1 = analyze(&g, a, &opts)?;
                        let (t0, t1) = (h0.fast.expect("fast table"), h1.fast.expect("fast table"));
                        worst = worst.max(t0.max_difference(&t1) / (1.0 + t0.max_abs()));
                        // isolated indices shift by exactly one
                        let mut i0: Vec<usize> = h0.critical.iter().filter(|c| c.is_isolated()).map(|c| c.index + 1).collect();
                        let mut i1: Vec<usize> = h1.critical.iter().filter(|c| c.is_isolated()).map(|c| c.index).collect();
                        i0.sort();
                        i1.sort();
                        index_ok &= i0 == i1;
                    }
                    rep.check(worst < 1e-6 && index_ok, format!("{label} stabilized by {coeff:+}e'^2: max relative change {worst:.3e}, index shift ok: {index_ok}"));
                }
            }
        }
        "nonvanishing" => {
            for (label, f, hs) in corpus()? {
                let curve = monotonicity_scan(&f, &hs, &opts)?;
                let mut n = 0;
                let mut bad = 0;
                for h in curve.analyses().filter(|h| !h.diagram.is_empty()) {
                    n += 1;
                    if h.best().map(|t| t.is_zero()).unwrap_or(true) {
                        bad += 1;
                    }
                }
                rep.check(bad == 0 && n > 0, format!("{label}: {n} nonempty slices, {bad} with all capacities zero"));
            }
        }
        "nonsqueezing" => {
            let f = build_example_family(ExampleParams::new(5.0, 0.25, 1.0, 4.0, 2), CrossingSign::Negative)?;
            let sopts = SliceOptions::default();
            let measured = measured_box(&f, 1.0, 0.05, &sopts)?;
            let v = nonsqueezing_check(&f, 1.0, measured, &sopts)?;
            rep.check(!v.excluded, format!("measured box l*w = {:.4} >= capacity {:.4}", v.product, v.capacity));
            let tight = BoxRegion { x: (-2.5, 2.5), y: (1.0, 3.0) };
            let v = nonsqueezing_check(&f, 1.0, tight, &sopts)?;
            rep.check(v.excluded, format!("box l*w = {:.4} < capacity {:.4}: {}", v.product, v.capacity, v.label()));
            let outside = BoxRegion { x: (-1.0, 1.0), y: (0.0, 10.0) };
            let r = nonsqueezing_check(&f, 1.0, outside, &sopts);
            rep.check(matches!(r, Err(Error::InvalidBox(_))), "box missing the slice is rejected".into());
        }
        "euler" => {
            // writhes of figure eights are ±1 at every radius; an annulus
            // (χ = 0) between equal-sign eights passes, a disk (χ = 1) does not
            for sign in [CrossingSign::Negative, CrossingSign::Positive] {
                let (hb, ht) = cobordism_heights(sign);
                let wb = extract_slice(&fig8_family(sign, 3.0, hb)?, hb, &SliceOptions::default())?.writhe;
                let wt = extract_slice(&fig8_family(sign, 2.0, ht)?, ht, &SliceOptions::default())?.writhe;
                let want = Some(if sign == CrossingSign::Negative { -1 } else { 1 });
                rep.check(wb == want && wt == want, format!("{sign:?} writhes {wb:?} {wt:?}"));
                let (wb, wt) = (wb.unwrap_or(0), wt.unwrap_or(0));
                rep.check(wt - wb == 0, format!("{sign:?} annulus: difference {} equals chi 0", wt - wb));
                rep.check(wt - wb != 1, format!("{sign:?} disk: difference {} differs from chi 1", wt - wb));
            }
        }
        _ => return Err(Error::InvalidParams(format!("unknown suite '{name}'; expected one of {}", SUITES.join(", ")))),
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(sign: CrossingSign) -> GeneratingFamily {
        build_example_family(ExampleParams::new(5.0, 0.25, 1.0, 4.0, 2), sign).unwrap()
    }

    #[test]
    fn fast_rule_rows() {
        let a = 32.0 / 3.0;
        let h = analyze(&fam(CrossingSign::Negative), 1.0, &PipelineOptions::default()).unwrap();
        let t = h.fast.unwrap();
        assert!((t.get(0, Kind::LowerPlus) + a).abs() < 1e-6);
        assert!((t.get(1, Kind::UpperMinus) - a).abs() < 1e-6);
        assert_eq!(t.entries().filter(|e| e.2 != 0.0).count(), 2);
        let w = t.entry(0, Kind::LowerPlus).witness.as_ref().unwrap();
        assert!((w.gap - 4.0).abs() < 1e-9);

        let h = analyze(&fam(CrossingSign::Positive), -1.0, &PipelineOptions::default()).unwrap();
        let t = h.fast.unwrap();
        assert!((t.get(0, Kind::LowerMinus) + a).abs() < 1e-6);
        assert!((t.get(1, Kind::UpperPlus) - a).abs() < 1e-6);
    }

    #[test]
    fn empty_and_embedded() {
        let h = analyze(&fam(CrossingSign::Negative), 6.0, &PipelineOptions::default()).unwrap();
        assert!(h.fast.unwrap().is_zero());
        let circle = SliceDiagram::from_curves(
            1.0,
            &[(0..200)
                .map(|i| {
                    let t = i as f64 / 200.0 * std::f64::consts::TAU;
                    [t.cos(), t.sin(), 0.0]
                })
                .collect()],
        )
        .unwrap();
        assert!(matches!(capacities_single_crossing(&circle, &[]), Err(Error::RuleNotApplicable(0))));
    }

    #[test]
    fn monotonicity_strictness() {
        let mut low = CapacityTable::zero(1.0, Method::SingleCrossingRule, 1);
        let mut high = CapacityTable::zero(2.0, Method::SingleCrossingRule, 1);
        low.set(0, Kind::LowerPlus, Entry { value: -3.0, witness: None });
        high.set(0, Kind::LowerPlus, Entry { value: -3.0, witness: None });
        assert_eq!(monotonicity_violations(&low, &high).len(), 1);
        high.set(0, Kind::LowerPlus, Entry { value: -2.0, witness: None });
        assert!(monotonicity_violations(&low, &high).is_empty());
    }
}
