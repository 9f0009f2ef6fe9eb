//! The difference function `Δ_a` and its critical points.
//!
//! Points of the domain are laid out as `[x, x_n, e, x̃_n, ẽ]`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::family::ShearedFamily;
use crate::numeric::{inertia, newton, sym_eigenvalues};
use crate::slice::{extract_slice, FiberCriticalPoint, Polyline, SliceDiagram, SliceOptions, Tracer};

/// Relative threshold under which a Hessian eigenvalue counts as zero.
pub const DEGENERACY_REL: f64 = 1e-7;

/// `Δ_a(x, x_n, e, x̃_n, ẽ) = F_a(x, x_n, e) − F_a(x, x̃_n, ẽ)`.
#[derive(Debug, Clone)]
pub struct DifferenceFunction {
    sheared: ShearedFamily,
    m: usize,
    k: usize,
}

impl DifferenceFunction {
    pub fn new(sheared: ShearedFamily) -> Self {
        let m = sheared.parent.xn_index();
        let k = 1 + sheared.parent.fiber_dim();
        DifferenceFunction { sheared, m, k }
    }

    pub fn sheared(&self) -> &ShearedFamily {
        &self.sheared
    }

    pub fn height(&self) -> f64 {
        self.sheared.height
    }

    /// `(n − 1) + 2(1 + N)`.
    pub fn domain_dim(&self) -> usize {
        self.m + 2 * self.k
    }

    /// Index of `x_n` and of `x̃_n` in a domain point.
    pub fn xn_indices(&self) -> (usize, usize) {
        (self.m, self.m + self.k)
    }

    /// Splits a domain point into `(x, x_n, e)` and `(x, x̃_n, ẽ)`.
    pub fn split(&self, q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = q[..self.m + self.k].to_vec();
        let mut pt = q[..self.m].to_vec();
        pt.extend(&q[self.m + self.k..]);
        (p, pt)
    }

    /// Joins two family points; the base `x` is taken from their average.
    pub fn join(&self, p: &[f64], pt: &[f64]) -> Vec<f64> {
        let mut q: Vec<f64> = (0..self.m).map(|i| 0.5 * (p[i] + pt[i])).collect();
        q.extend(&p[self.m..]);
        q.extend(&pt[self.m..]);
        q
    }

    /// Exchanges `(x_n, e)` with `(x̃_n, ẽ)`.
    pub fn swap(&self, q: &[f64]) -> Vec<f64> {
        let (p, pt) = self.split(q);
        self.join(&pt, &p)
    }

    /// Half-space of a point: `x_n < x̃_n` is `P₊`.
    pub fn half_space(&self, q: &[f64]) -> HalfSpace {
        let (i, j) = self.xn_indices();
        let d = q[j] - q[i];
        if d.abs() <= 1e-9 * (1.0 + q[i].abs()) {
            HalfSpace::Zero
        } else if d > 0.0 {
            HalfSpace::Plus
        } else {
            HalfSpace::Minus
        }
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        let (p, pt) = self.split(q);
        self.sheared.value(&p) - self.sheared.value(&pt)
    }

    pub fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let (p, pt) = self.split(q);
        let g = self.sheared.gradient(&p);
        let gt = self.sheared.gradient(&pt);
        let mut out: Vec<f64> = (0..self.m).map(|i| g[i] - gt[i]).collect();
        out.extend(&g[self.m..]);
        out.extend(gt[self.m..].iter().map(|v| -v));
        out
    }

    pub fn hessian(&self, q: &[f64]) -> DMatrix<f64> {
        let (p, pt) = self.split(q);
        let h = self.sheared.hessian(&p);
        let ht = self.sheared.hessian(&pt);
        let (m, k) = (self.m, self.k);
        let d = self.domain_dim();
        let mut out = DMatrix::zeros(d, d);
        for i in 0..m {
            for j in 0..m {
                out[(i, j)] = h[(i, j)] - ht[(i, j)];
            }
            for j in 0..k {
                out[(i, m + j)] = h[(i, m + j)];
                out[(m + j, i)] = h[(m + j, i)];
                out[(i, m + k + j)] = -ht[(i, m + j)];
                out[(m + k + j, i)] = -ht[(m + j, i)];
            }
        }
        for i in 0..k {
            for j in 0..k {
                out[(m + i, m + j)] = h[(m + i, m + j)];
                out[(m + k + i, m + k + j)] = -ht[(m + i, m + j)];
            }
        }
        out
    }

    /// Newton on `∇Δ_a = 0`.
    pub fn newton_critical(&self, q0: &[f64]) -> Option<DVector<f64>> {
        newton(DVector::from_column_slice(q0), 1e-11, 60, |q| {
            (DVector::from_vec(self.gradient(q.as_slice())), self.hessian(q.as_slice()))
        })
        .map(|(q, _)| q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HalfSpace {
    Plus,
    Minus,
    Zero,
}

impl HalfSpace {
    pub fn label(self) -> &'static str {
        match self {
            HalfSpace::Plus => "P+",
            HalfSpace::Minus => "P-",
            HalfSpace::Zero => "P0",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalKind {
    Isolated,
    /// Morse–Bott submanifold of the given dimension.
    Bott { dim: usize },
}

#[derive(Debug, Clone)]
pub struct CriticalDatum {
    pub point: Vec<f64>,
    pub value: f64,
    /// Number of negative Hessian eigenvalues.
    pub index: usize,
    pub half_space: HalfSpace,
    pub kind: CriticalKind,
    pub source_crossing: Option<usize>,
    pub gradient_norm: f64,
}

impl CriticalDatum {
    pub fn is_isolated(&self) -> bool {
        self.kind == CriticalKind::Isolated
    }
}

fn classify_isolated(delta: &DifferenceFunction, q: &DVector<f64>, crossing: Option<usize>) -> Result<CriticalDatum> {
    let pt = q.as_slice();
    let ev = sym_eigenvalues(&delta.hessian(pt));
    let (neg, zero, _) = inertia(&ev, DEGENERACY_REL);
    if zero > 0 {
        return Err(Error::NonGenericFamily(format!(
            "Hessian of Δ_a is degenerate at isolated critical point {pt:?} (eigenvalues {ev:?})"
        )));
    }
    let g = delta.gradient(pt);
    Ok(CriticalDatum {
        point: pt.to_vec(),
        value: delta.value(pt),
        index: neg,
        half_space: delta.half_space(pt),
        kind: CriticalKind::Isolated,
        source_crossing: crossing,
        gradient_norm: crate::numeric::norm(&g),
    })
}

/// Number of Bott samples checked along `C_a`.
pub const BOTT_SAMPLES: usize = 12;

/// All critical points of `Δ_a`: two isolated points per double point and,
/// for a nonempty slice, the Bott submanifold `C_a` reported once.
pub fn critical_points(delta: &DifferenceFunction, diagram: &SliceDiagram) -> Result<Vec<CriticalDatum>> {
    let mut out = Vec::new();
    for (i, dp) in diagram.double_points.iter().enumerate() {
        let (o, u) = (dp.over.point(), dp.under.point());
        for (a, b) in [(&u, &o), (&o, &u)] {
            let seed = delta.join(a, b);
            let q = delta.newton_critical(&seed).ok_or_else(|| Error::MissingCriticalPoint {
                crossing: i,
                detail: "Newton on the difference function diverged from both preimage orders".into(),
            })?;
            let cd = classify_isolated(delta, &q, Some(i))?;
            if cd.half_space == HalfSpace::Zero {
                return Err(Error::MissingCriticalPoint {
                    crossing: i,
                    detail: "Newton converged onto the diagonal".into(),
                });
            }
            out.push(cd);
        }
    }
    if let Some(bott) = bott_datum(delta, diagram)? {
        out.push(bott);
    }
    Ok(out)
}

/// Samples of `C_a` taken from the slice trace, lifted to the diagonal.
pub fn bott_samples(delta: &DifferenceFunction, diagram: &SliceDiagram, count: usize) -> Vec<Vec<f64>> {
    let pts: Vec<&FiberCriticalPoint> = diagram.projected_points().collect();
    if pts.is_empty() {
        return Vec::new();
    }
    (0..count)
        .map(|i| {
            let p = pts[i * pts.len() / count].point();
            delta.join(&p, &p)
        })
        .collect()
}

fn bott_datum(delta: &DifferenceFunction, diagram: &SliceDiagram) -> Result<Option<CriticalDatum>> {
    let samples = bott_samples(delta, diagram, BOTT_SAMPLES);
    let Some(first) = samples.first() else { return Ok(None) };
    let dim = diagram.base_dim - 1;
    let mut index = None;
    let mut worst = 0.0f64;
    for q in &samples {
        let g = crate::numeric::norm(&delta.gradient(q));
        worst = worst.max(g);
        let ev = sym_eigenvalues(&delta.hessian(q));
        let (neg, zero, _) = inertia(&ev, DEGENERACY_REL);
        if zero != dim {
            return Err(Error::NonGenericFamily(format!(
                "C_a is not Morse–Bott at {q:?}: kernel dimension {zero}, expected {dim}"
            )));
        }
        if *index.get_or_insert(neg) != neg {
            return Err(Error::NonGenericFamily("index varies along C_a".into()));
        }
    }
    Ok(Some(CriticalDatum {
        point: first.clone(),
        value: delta.value(first),
        index: index.unwrap_or(0),
        half_space: HalfSpace::Zero,
        kind: CriticalKind::Bott { dim },
        source_crossing: None,
        gradient_norm: worst,
    }))
}

/// Number of negative eigenvalues of the full Hessian at an isolated point.
pub fn morse_index_hessian(delta: &DifferenceFunction, cd: &CriticalDatum) -> Result<usize> {
    let q = DVector::from_column_slice(&cd.point);
    Ok(classify_isolated(delta, &q, cd.source_crossing)?.index)
}

/// Isolated critical point near `q0` (for tracking across heights).
pub fn critical_point_near(delta: &DifferenceFunction, q0: &[f64]) -> Result<CriticalDatum> {
    let q = delta.newton_critical(q0).ok_or_else(|| Error::MissingCriticalPoint {
        crossing: 0,
        detail: format!("Newton diverged from {q0:?}"),
    })?;
    classify_isolated(delta, &q, None)
}

/// Path on `Σ_{F_a}` from `(x, x̃_n, ẽ)` to `(x, x_n, e)`.
#[derive(Debug, Clone)]
pub struct CrossingPath {
    pub samples: Polyline,
    /// Projected `(x_1, y_1)` tangent direction at each sample.
    pub tangents: Vec<[f64; 2]>,
    pub maslov_closed: Option<i32>,
    /// Negative inertia of the Schur complement of the Hessian on the
    /// frozen directions `x_2 .. x_{n-1}`; 0 for `n = 2`.
    pub frozen_index: usize,
}

/// Traces the crossing path of an isolated critical point. For `n > 2` the
/// base coordinates `x_2 .. x_{n-1}` are frozen at the crossing, so the path
/// lives on the slice of a family over a plane.
pub fn crossing_path(delta: &DifferenceFunction, cd: &CriticalDatum, opts: &SliceOptions) -> Result<CrossingPath> {
    if !cd.is_isolated() {
        return Err(Error::InvalidPath("crossing paths exist only for isolated critical points".into()));
    }
    let f = &delta.sheared().parent;
    let (p, pt) = delta.split(&cd.point);
    let tracer = Tracer::new(f, delta.height(), opts).freeze_extra_base(&p);
    let samples = tracer.trace_between(&pt, &p, None)?;
    let tangents = samples.points.iter().map(|s| tracer.projected_tangent(&s.point())).collect::<Result<Vec<_>>>()?;
    let frozen_index = frozen_schur_index(delta, &cd.point)?;
    let mut path = CrossingPath { samples, tangents, maslov_closed: None, frozen_index };
    path.maslov_closed = Some(maslov_index(&path)?);
    Ok(path)
}

/// Inertia is additive over a Schur complement, so the index of the full
/// Hessian is the index on the unfrozen block plus this count.
fn frozen_schur_index(delta: &DifferenceFunction, q: &[f64]) -> Result<usize> {
    let frozen: Vec<usize> = (1..delta.sheared().parent.xn_index()).collect();
    if frozen.is_empty() {
        return Ok(0);
    }
    let h = delta.hessian(q);
    let free: Vec<usize> = (0..h.nrows()).filter(|i| !frozen.contains(i)).collect();
    let pick = |r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |i, j| h[(r[i], c[j])]);
    let a = pick(&free, &free);
    let b = pick(&free, &frozen);
    let c = pick(&frozen, &frozen);
    let a_inv = a.clone().try_inverse().ok_or_else(|| {
        Error::NonGenericFamily(format!("Hessian block on the crossing plane is singular at {q:?}"))
    })?;
    let schur = &c - b.transpose() * a_inv * &b;
    let schur = (&schur + schur.transpose()) * 0.5;
    let (neg, zero, _) = inertia(&sym_eigenvalues(&schur), DEGENERACY_REL);
    if zero > 0 {
        return Err(Error::NonGenericFamily(format!("degenerate Schur complement at {q:?}")));
    }
    Ok(neg)
}

/// `∫ y·dx` along the projected path; equals `Δ_a` at the critical point.
pub fn critical_value_via_path(path: &CrossingPath) -> Result<f64> {
    let pts = &path.samples.points;
    let (Some(a), Some(b)) = (pts.first(), pts.last()) else {
        return Err(Error::InvalidPath("empty path".into()));
    };
    let (pa, pb) = (a.projection(), b.projection());
    let scale = 1.0 + pa.iter().chain(&pb).fold(0.0f64, |m, v| m.max(v.abs()));
    if crate::numeric::dist(&pa, &pb) > 1e-6 * scale {
        return Err(Error::InvalidPath(format!("endpoints project to {pa:?} and {pb:?}")));
    }
    Ok(path.samples.integral_y_dx())
}

/// Maslov index of the closed-up loop of tangent lines.
pub fn maslov_index(path: &CrossingPath) -> Result<i32> {
    use std::f64::consts::PI;
    if path.tangents.len() < 2 {
        return Err(Error::InvalidPath("Maslov index needs a planar path with at least two samples".into()));
    }
    let angle = |t: &[f64; 2]| t[1].atan2(t[0]);
    let wrap = |d: f64| {
        let mut d = d.rem_euclid(PI);
        if d > PI / 2.0 {
            d -= PI;
        }
        d
    };
    let mut total = 0.0;
    for (i, w) in path.tangents.windows(2).enumerate() {
        let d = wrap(angle(&w[1]) - angle(&w[0]));
        if d.abs() > PI / 3.0 {
            return Err(Error::UndersampledPath { index: i, jump: d.abs() });
        }
        total += d;
    }
    let start = angle(&path.tangents[0]);
    let end = start + total;
    // clockwise rotation of the final line back onto the initial one
    let close = -(end - start).rem_euclid(PI);
    let close = if close <= -PI + 1e-12 { 0.0 } else { close };
    Ok(((total + close) / PI).round() as i32)
}

/// `ind = −μ + N + 1`, plus the index along frozen directions for `n > 2`.
pub fn morse_index_maslov(path: &CrossingPath, fiber_dim: usize) -> Result<i64> {
    let mu = match path.maslov_closed {
        Some(m) => m,
        None => maslov_index(path)?,
    };
    Ok(-(mu as i64) + fiber_dim as i64 + 1 + path.frozen_index as i64)
}

/// Critical data of the slice at `a`, extracted and solved in one go.
pub fn analyze_height(
    f: &crate::family::GeneratingFamily,
    a: f64,
    opts: &SliceOptions,
) -> Result<(SliceDiagram, DifferenceFunction, Vec<CriticalDatum>)> {
    let diagram = extract_slice(f, a, opts)?;
    let delta = DifferenceFunction::new(f.sheared(a));
    let crit = critical_points(&delta, &diagram)?;
    Ok((diagram, delta, crit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{build_example_family, CrossingSign, ExampleParams, QuadraticForm};

    fn fam() -> crate::family::GeneratingFamily {
        build_example_family(ExampleParams::new(5.0, 0.25, 1.0, 4.0, 2), CrossingSign::Negative).unwrap()
    }

    #[test]
    fn example_critical_data() {
        let (_, delta, crit) = analyze_height(&fam(), 1.0, &SliceOptions::default()).unwrap();
        assert_eq!(crit.len(), 3);
        let minus = crit.iter().find(|c| c.half_space == HalfSpace::Minus).unwrap();
        let plus = crit.iter().find(|c| c.half_space == HalfSpace::Plus).unwrap();
        let want = 32.0 / 3.0;
        assert!((minus.value - want).abs() < 1e-9 && minus.index == 3);
        assert!((plus.value + want).abs() < 1e-9 && plus.index == 0);
        for (got, exp) in minus.point.iter().zip([0.0, 2.0, -2.0]) {
            assert!((got - exp).abs() < 1e-9);
        }
        let bott = crit.iter().find(|c| !c.is_isolated()).unwrap();
        assert_eq!(bott.index, 1);
        assert!(bott.value.abs() < 1e-12);
        assert_eq!(delta.domain_dim(), 3);
    }

    #[test]
    fn path_integral_and_maslov() {
        let (_, delta, crit) = analyze_height(&fam(), 1.0, &SliceOptions::default()).unwrap();
        for cd in crit.iter().filter(|c| c.is_isolated()) {
            let path = crossing_path(&delta, cd, &SliceOptions::default()).unwrap();
            let v = critical_value_via_path(&path).unwrap();
            assert!((v - cd.value).abs() / (1.0 + cd.value.abs()) < 1e-6, "{v} vs {}", cd.value);
            let want_mu = if cd.half_space == HalfSpace::Minus { -2 } else { 1 };
            assert_eq!(path.maslov_closed, Some(want_mu));
            assert_eq!(morse_index_maslov(&path, 0).unwrap(), cd.index as i64);
        }
    }

    #[test]
    fn stabilization_shifts_isolated_indices() {
        let f = fam().stabilize(&QuadraticForm::diagonal(&[-1.0]).unwrap());
        let (_, _, crit) = analyze_height(&f, 1.0, &SliceOptions::default()).unwrap();
        let mut idx: Vec<usize> = crit.iter().filter(|c| c.is_isolated()).map(|c| c.index).collect();
        idx.sort();
        assert_eq!(idx, vec![1, 4]);
        let bott = crit.iter().find(|c| !c.is_isolated()).unwrap();
        assert_eq!(bott.index, 2);
    }
}
