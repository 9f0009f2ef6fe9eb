//! Slices `L_a = L ∩ {y_n = a}` traced from a generating family, and their
//! planar diagram data.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::family::{GeneratingFamily, ShearedFamily};
use crate::morse::DifferenceFunction;
use crate::numeric::{dist, newton, null_vector, smallest_singular_value, solve};

/// A point of `Σ_{F_a}` together with its image `y = ∂F/∂x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberCriticalPoint {
    pub x: Vec<f64>,
    pub x_n: f64,
    pub e: Vec<f64>,
    pub y: Vec<f64>,
}

impl FiberCriticalPoint {
    fn from_point(f: &GeneratingFamily, z: &[f64]) -> Self {
        let m = f.xn_index();
        let g = f.gradient(z);
        FiberCriticalPoint {
            x: z[..m].to_vec(),
            x_n: z[m],
            e: z[m + 1..].to_vec(),
            y: g[..m].to_vec(),
        }
    }

    /// `(x, x_n, e)` as a flat point.
    pub fn point(&self) -> Vec<f64> {
        let mut p = self.x.clone();
        p.push(self.x_n);
        p.extend(&self.e);
        p
    }

    /// `(x, y)` in `R^{2n-2}`.
    pub fn projection(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.extend(&self.y);
        v
    }
}

/// Polyline on `Σ_{F_a}` with one corrected midpoint per segment, so line
/// integrals can use quadratic panels.
#[derive(Debug, Clone, Default)]
pub struct Polyline {
    pub points: Vec<FiberCriticalPoint>,
    pub mids: Vec<FiberCriticalPoint>,
}

impl Polyline {
    /// `∫ y · dx` with a quadratic fit through each segment's end and mid points.
    pub fn integral_y_dx(&self) -> f64 {
        let mut total = 0.0;
        for (i, m) in self.mids.iter().enumerate() {
            let (a, b) = (&self.points[i], &self.points[i + 1]);
            for k in 0..a.x.len() {
                let (x0, xm, x1) = (a.x[k], m.x[k], b.x[k]);
                let d0 = -3.0 * x0 + 4.0 * xm - x1;
                let dm = x1 - x0;
                let d1 = x0 - 4.0 * xm + 3.0 * x1;
                total += (a.y[k] * d0 + 4.0 * m.y[k] * dm + b.y[k] * d1) / 6.0;
            }
        }
        total
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone)]
pub enum ComponentShape {
    /// Closed curve; the last point repeats the first.
    Curve,
    /// Latitude/longitude sampling of a sphere, `rows x cols` points stored
    /// row-major, rows running from the `x_n > 0` pole to the `x_n < 0` pole.
    Sphere { rows: usize, cols: usize },
}

#[derive(Debug, Clone)]
pub struct Component {
    pub shape: ComponentShape,
    pub line: Polyline,
}

/// Location of a crossing strand on a curve component: segment index plus
/// fraction along the segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrandParam {
    pub component: usize,
    pub param: f64,
}

#[derive(Debug, Clone)]
pub struct DoublePoint {
    /// Position in the projection `(x, y)`.
    pub position: Vec<f64>,
    /// Blackboard sign; `None` for `n > 2`.
    pub sign: Option<i32>,
    /// Preimage with the larger `x_n`, then the other one.
    pub over: FiberCriticalPoint,
    pub under: FiberCriticalPoint,
    pub over_param: Option<StrandParam>,
    pub under_param: Option<StrandParam>,
    /// Angle between the strands (radians, in `(0, π/2]`).
    pub angle: f64,
}

#[derive(Debug, Clone)]
pub struct Lobe {
    pub crossing: usize,
    /// Arc of the curve running from `under` to `over` (first) or from
    /// `over` back to `under` (second).
    pub arc: Polyline,
    /// `∮ x dy` over the loop closed at the crossing.
    pub signed_area: f64,
}

#[derive(Debug, Clone)]
pub struct SliceDiagram {
    pub height: f64,
    pub base_dim: usize,
    pub fiber_dim: usize,
    pub components: Vec<Component>,
    pub double_points: Vec<DoublePoint>,
    pub lobes: Vec<Lobe>,
    pub lobe_areas: Vec<f64>,
    /// Sum of crossing signs; only defined for `n = 2`.
    pub writhe: Option<i32>,
    /// Turning number of the projected curves; only defined for `n = 2`.
    pub winding: Option<i32>,
    pub total_signed_area: f64,
}

impl SliceDiagram {
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    fn empty(height: f64, base_dim: usize, fiber_dim: usize) -> Self {
        SliceDiagram {
            height,
            base_dim,
            fiber_dim,
            components: Vec::new(),
            double_points: Vec::new(),
            lobes: Vec::new(),
            lobe_areas: Vec::new(),
            writhe: (base_dim == 2).then_some(0),
            winding: (base_dim == 2).then_some(0),
            total_signed_area: 0.0,
        }
    }

    /// Builds a planar (`n = 2`) diagram from sampled closed curves. Each
    /// point carries `(x, x_n, y)`; midpoints are taken as chord midpoints.
    /// Crossings come from segment intersection only.
    pub fn from_curves(height: f64, curves: &[Vec<[f64; 3]>]) -> Result<Self> {
        let mut comps = Vec::new();
        for c in curves {
            if c.len() < 3 {
                return Err(Error::InvalidParams("a curve needs at least three points".into()));
            }
            let mut pts: Vec<FiberCriticalPoint> = c
                .iter()
                .map(|v| FiberCriticalPoint { x: vec![v[0]], x_n: v[1], e: vec![], y: vec![v[2]] })
                .collect();
            if dist(&pts[0].projection(), &pts[pts.len() - 1].projection()) > 0.0 {
                pts.push(pts[0].clone());
            }
            let mids = pts
                .windows(2)
                .map(|w| FiberCriticalPoint {
                    x: vec![(w[0].x[0] + w[1].x[0]) / 2.0],
                    x_n: (w[0].x_n + w[1].x_n) / 2.0,
                    e: vec![],
                    y: vec![(w[0].y[0] + w[1].y[0]) / 2.0],
                })
                .collect();
            comps.push(Component { shape: ComponentShape::Curve, line: Polyline { points: pts, mids } });
        }
        let mut d = SliceDiagram::empty(height, 2, 0);
        d.components = comps;
        d.double_points = planar_crossings(&d.components)?
            .into_iter()
            .map(|c| c.into_double_point(&d.components))
            .collect();
        d.finish_planar(None)?;
        Ok(d)
    }

    fn finish_planar(&mut self, tracer: Option<&Tracer>) -> Result<()> {
        self.writhe = Some(self.double_points.iter().filter_map(|d| d.sign).sum());
        self.winding = Some(self.components.iter().map(|c| turning_number(&c.line)).sum());
        self.total_signed_area = self.components.iter().map(|c| -c.line.integral_y_dx()).sum();
        let mut lobes = Vec::new();
        for (i, dp) in self.double_points.iter().enumerate() {
            let (Some(o), Some(u)) = (dp.over_param, dp.under_param) else { continue };
            if o.component != u.component {
                continue;
            }
            let line = &self.components[o.component].line;
            for (from, to, a, b) in [(u, o, &dp.under, &dp.over), (o, u, &dp.over, &dp.under)] {
                let arc = sub_arc(line, from.param, to.param, a, b, tracer);
                let signed_area = -arc.integral_y_dx();
                lobes.push(Lobe { crossing: i, arc, signed_area });
            }
        }
        self.lobe_areas = lobes.iter().map(|l| l.signed_area).collect();
        self.lobes = lobes;
        Ok(())
    }

    /// Absolute lobe area of crossing `i`, averaged over its two loops.
    pub fn lobe_area(&self, i: usize) -> Option<f64> {
        let a: Vec<f64> = self.lobes.iter().filter(|l| l.crossing == i).map(|l| l.signed_area.abs()).collect();
        (!a.is_empty()).then(|| a.iter().sum::<f64>() / a.len() as f64)
    }

    /// All projected vertices, for drawing and bounding boxes.
    pub fn projected_points(&self) -> impl Iterator<Item = &FiberCriticalPoint> {
        self.components.iter().flat_map(|c| c.line.points.iter())
    }
}

/// Tuning for slice extraction.
#[derive(Debug, Clone, Copy)]
pub struct SliceOptions {
    /// Maximal continuation step relative to the family's core radius.
    pub step: f64,
    /// Scan points per axis for seeding.
    pub scan: usize,
    /// Newton residual tolerance.
    pub tol: f64,
    /// Latitude rows for sphere sampling (`n = 3`).
    pub sphere_rows: usize,
}

impl Default for SliceOptions {
    fn default() -> Self {
        SliceOptions { step: 0.008, scan: 241, tol: 1e-12, sphere_rows: 41 }
    }
}

impl SliceOptions {
    /// Same options with a finer continuation step.
    pub fn refined(self, factor: f64) -> Self {
        SliceOptions { step: self.step / factor, ..self }
    }
}

/// Continuation on `{∂F/∂x_n = a, ∂F/∂e = 0}`, optionally with some base
/// coordinates frozen so that the solution set is one-dimensional.
pub(crate) struct Tracer<'a> {
    f: &'a GeneratingFamily,
    a: f64,
    frozen: Vec<(usize, f64)>,
    h_max: f64,
    tol: f64,
}

impl<'a> Tracer<'a> {
    pub(crate) fn new(f: &'a GeneratingFamily, a: f64, opts: &SliceOptions) -> Self {
        Tracer { f, a, frozen: Vec::new(), h_max: opts.step * f.core_radius(), tol: opts.tol }
    }

    /// Freezes `x_2 .. x_{n-1}` at the given point.
    pub(crate) fn freeze_extra_base(mut self, p: &[f64]) -> Self {
        self.frozen = (1..self.f.xn_index()).map(|i| (i, p[i])).collect();
        self
    }

    fn eqs(&self, z: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let m = self.f.xn_index();
        let d = z.len();
        let g = self.f.gradient(z.as_slice());
        let h = self.f.hessian(z.as_slice());
        let rows = d - m + self.frozen.len();
        let mut r = DVector::zeros(rows);
        let mut j = DMatrix::zeros(rows, d);
        for (k, i) in (m..d).enumerate() {
            r[k] = g[i] - if i == m { self.a } else { 0.0 };
            j.row_mut(k).copy_from(&h.row(i));
        }
        for (k, &(i, v)) in self.frozen.iter().enumerate() {
            r[d - m + k] = z[i] - v;
            j[(d - m + k, i)] = 1.0;
        }
        (r, j)
    }

    /// Newton onto the curve within the hyperplane `normal · (z − anchor) = 0`.
    fn correct(&self, z0: &DVector<f64>, anchor: &DVector<f64>, normal: &DVector<f64>) -> Option<(DVector<f64>, usize)> {
        let mut z = z0.clone();
        for it in 0..12 {
            let (r, j) = self.eqs(&z);
            let c = normal.dot(&(&z - anchor));
            let rn = (r.norm_squared() + c * c).sqrt();
            if rn < self.tol {
                return Some((z, it));
            }
            let mut big = DMatrix::zeros(j.nrows() + 1, j.ncols());
            big.view_mut((0, 0), j.shape()).copy_from(&j);
            big.row_mut(j.nrows()).copy_from(&normal.transpose());
            let mut rhs = DVector::zeros(j.nrows() + 1);
            rhs.rows_mut(0, j.nrows()).copy_from(&(-&r));
            rhs[j.nrows()] = -c;
            let step = solve(big, &rhs)?;
            z += &step;
            if step.norm() < 1e-3 * self.tol {
                return Some((z, it));
            }
        }
        let (r, _) = self.eqs(&z);
        (r.norm() < 1e3 * self.tol).then_some((z, 12))
    }

    fn tangent(&self, z: &DVector<f64>, prev: Option<&DVector<f64>>) -> Result<DVector<f64>> {
        let (_, j) = self.eqs(z);
        let scale = 1.0 + j.norm();
        if smallest_singular_value(&j) < 1e-8 * scale {
            return Err(Error::NonTransverseSlice {
                height: self.a,
                detail: format!("defining equations drop rank at point {:?}", z.as_slice()),
            });
        }
        let t = match prev {
            None => {
                let mut t = null_vector(&j);
                let lead = t.iter().copied().find(|v| v.abs() > 1e-9).unwrap_or(1.0);
                if lead < 0.0 {
                    t = -t;
                }
                t
            }
            Some(p) => {
                let mut big = DMatrix::zeros(j.nrows() + 1, j.ncols());
                big.view_mut((0, 0), j.shape()).copy_from(&j);
                big.row_mut(j.nrows()).copy_from(&p.transpose());
                let mut rhs = DVector::zeros(j.nrows() + 1);
                rhs[j.nrows()] = 1.0;
                solve(big, &rhs)
                    .ok_or_else(|| Error::TraceFailed("tangent system is singular".into()))?
                    .normalize()
            }
        };
        Ok(t)
    }

    /// One predictor-corrector step of length about `h`.
    fn step(&self, z: &DVector<f64>, t: &DVector<f64>, h: &mut f64) -> Result<(DVector<f64>, DVector<f64>)> {
        loop {
            let pred = z + t * *h;
            if let Some((zn, iters)) = self.correct(&pred, &pred, t) {
                let moved = (&zn - z).norm();
                if moved < 2.0 * *h && moved > 0.25 * *h {
                    let tn = self.tangent(&zn, Some(t))?;
                    if tn.dot(t) > 0.98 {
                        if iters <= 3 {
                            *h = (*h * 1.3).min(self.h_max);
                        }
                        return Ok((zn, tn));
                    }
                }
            }
            *h *= 0.5;
            if *h < 1e-7 * self.h_max {
                return Err(Error::TraceFailed(format!(
                    "step size collapsed near {:?} at height {}",
                    z.as_slice(),
                    self.a
                )));
            }
        }
    }

    fn make_point(&self, z: &DVector<f64>) -> FiberCriticalPoint {
        FiberCriticalPoint::from_point(self.f, z.as_slice())
    }

    fn midpoint(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let mid = (a + b) * 0.5;
        let chord = b - a;
        if chord.norm() < 1e-14 {
            return mid;
        }
        let n = chord.normalize();
        self.correct(&mid, &mid, &n).map(|(z, _)| z).unwrap_or(mid)
    }

    fn polyline(&self, zs: &[DVector<f64>]) -> Polyline {
        let points = zs.iter().map(|z| self.make_point(z)).collect();
        let mids = zs.windows(2).map(|w| self.make_point(&self.midpoint(&w[0], &w[1]))).collect();
        Polyline { points, mids }
    }

    /// Traces the closed curve through `seed`.
    fn trace_closed(&self, seed: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        let z0 = seed.clone();
        let mut t = self.tangent(&z0, None)?;
        let mut pts = vec![z0.clone()];
        let mut z = z0.clone();
        let mut h = self.h_max;
        let mut travelled = 0.0;
        let limit = 200_000;
        loop {
            let to_start = &z0 - &z;
            let d = to_start.norm();
            if travelled > 4.0 * self.h_max && d < 1.3 * h && to_start.dot(&t) > 0.0 {
                if d < 0.3 * h && pts.len() > 3 {
                    pts.pop();
                }
                pts.push(z0.clone());
                return Ok(pts);
            }
            let (zn, tn) = self.step(&z, &t, &mut h)?;
            travelled += (&zn - &z).norm();
            pts.push(zn.clone());
            z = zn;
            t = tn;
            if pts.len() > limit {
                return Err(Error::TraceFailed(format!("curve through {:?} did not close", seed.as_slice())));
            }
        }
    }

    /// Traces from `start` until reaching `target`, starting along `dir`.
    pub(crate) fn trace_between(
        &self,
        start: &[f64],
        target: &[f64],
        dir: Option<&[f64]>,
    ) -> Result<Polyline> {
        let z0 = DVector::from_column_slice(start);
        let zt = DVector::from_column_slice(target);
        let mut t = self.tangent(&z0, None)?;
        if let Some(d) = dir {
            if t.dot(&DVector::from_column_slice(d)) < 0.0 {
                t = -t;
            }
        }
        let mut pts = vec![z0.clone()];
        let mut z = z0;
        let mut h = self.h_max;
        loop {
            let to_t = &zt - &z;
            let d = to_t.norm();
            if pts.len() > 2 && d < 1.3 * h && to_t.dot(&t) > 0.0 {
                if d < 0.3 * h {
                    pts.pop();
                }
                pts.push(zt.clone());
                return Ok(self.polyline(&pts));
            }
            let (zn, tn) = self.step(&z, &t, &mut h)?;
            pts.push(zn.clone());
            z = zn;
            t = tn;
            if pts.len() > 200_000 {
                return Err(Error::TraceFailed("path did not reach its endpoint".into()));
            }
        }
    }

    /// Fiber critical value `e*` for fixed `(x, x_n)`, by Newton from 0.
    fn solve_fiber(&self, xz: &[f64]) -> Option<Vec<f64>> {
        let m = self.f.xn_index();
        let n_e = self.f.fiber_dim();
        if n_e == 0 {
            return Some(xz.to_vec());
        }
        let head = xz[..=m].to_vec();
        let e0 = DVector::from_column_slice(&xz[m + 1..]);
        let res = newton(e0, self.tol, 40, |e| {
            let mut p = head.clone();
            p.extend(e.iter());
            let g = self.f.gradient(&p);
            let h = self.f.hessian(&p);
            let r = DVector::from_column_slice(&g[m + 1..]);
            let j = h.view((m + 1, m + 1), (n_e, n_e)).into_owned();
            (r, j)
        })?;
        let mut p = head;
        p.extend(res.0.iter());
        Some(p)
    }

    fn g_xn(&self, p: &[f64]) -> f64 {
        self.f.gradient(p)[self.f.xn_index()] - self.a
    }
}

fn scan_extent(f: &GeneratingFamily, i: usize) -> f64 {
    f.support_extents()[i] * 1.02 + 1e-3
}

/// Extracts the slice of `f` at height `a`.
pub fn extract_slice(f: &GeneratingFamily, a: f64, opts: &SliceOptions) -> Result<SliceDiagram> {
    if !a.is_finite() {
        return Err(Error::InvalidParams(format!("height must be finite, got {a}")));
    }
    match f.base_dim() {
        2 => extract_planar(f, a, opts),
        3 => extract_sphere(f, a, opts),
        n => Err(Error::Unsupported(format!("slice extraction for base dimension {n}"))),
    }
}

fn extract_planar(f: &GeneratingFamily, a: f64, opts: &SliceOptions) -> Result<SliceDiagram> {
    let tracer = Tracer::new(f, a, opts);
    let seeds = planar_seeds(&tracer, opts)?;
    let mut curves: Vec<Vec<DVector<f64>>> = Vec::new();
    for s in seeds {
        let near = curves
            .iter()
            .flatten()
            .any(|v| (v - &s).norm() < 3.0 * tracer.h_max);
        if near {
            continue;
        }
        curves.push(tracer.trace_closed(&s)?);
    }
    let mut d = SliceDiagram::empty(a, f.base_dim(), f.fiber_dim());
    d.components = curves
        .iter()
        .map(|c| Component { shape: ComponentShape::Curve, line: tracer.polyline(c) })
        .collect();
    let raw = planar_crossings(&d.components)?;
    let delta = DifferenceFunction::new(f.sheared(a));
    for c in raw {
        let dp = refine_crossing(&delta, &tracer, &d.components, &c)?;
        let dup = d.double_points.iter().any(|o| dist(&o.position, &dp.position) < 1e-7
            && (o.over.x_n - dp.over.x_n).abs() < 1e-7);
        if !dup {
            d.double_points.push(dp);
        }
    }
    d.finish_planar(Some(&tracer))?;
    Ok(d)
}

fn planar_seeds(tr: &Tracer, opts: &SliceOptions) -> Result<Vec<DVector<f64>>> {
    let f = tr.f;
    let (r0, r1) = (scan_extent(f, 0), scan_extent(f, 1));
    let m = opts.scan.max(16);
    let coord = |r: f64, i: usize| -r + 2.0 * r * i as f64 / (m - 1) as f64;
    let zero_e = vec![0.0; f.fiber_dim()];
    let mut vals = vec![vec![(0.0, Vec::new()); m]; m];
    for (i, row) in vals.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let mut p = vec![coord(r0, i), coord(r1, j)];
            p.extend(&zero_e);
            if let Some(p) = tr.solve_fiber(&p) {
                *cell = (tr.g_xn(&p), p);
            } else {
                *cell = (f64::NAN, p);
            }
        }
    }
    let mut seeds = Vec::new();
    for i in 0..m {
        for j in 0..m {
            for (di, dj) in [(1usize, 0usize), (0, 1)] {
                let (i2, j2) = (i + di, j + dj);
                if i2 >= m || j2 >= m {
                    continue;
                }
                let (ga, pa) = &vals[i][j];
                let (gb, pb) = &vals[i2][j2];
                if !(ga * gb < 0.0) {
                    continue;
                }
                let t = ga / (ga - gb);
                let guess: Vec<f64> = pa.iter().zip(pb).map(|(u, v)| u + t * (v - u)).collect();
                // move along the scan line only
                let dirv: Vec<f64> = pa.iter().zip(pb).map(|(u, v)| v - u).collect();
                let dir = DVector::from_column_slice(&dirv);
                let normal: DVector<f64> = {
                    // hyperplane fixing the other scan coordinate
                    let mut nvec = DVector::zeros(dir.len());
                    nvec[if di == 1 { 1 } else { 0 }] = 1.0;
                    nvec
                };
                let g = DVector::from_column_slice(&guess);
                if let Some((z, _)) = tr.correct(&g, &g, &normal) {
                    seeds.push(z);
                }
            }
        }
    }
    Ok(seeds)
}

fn extract_sphere(f: &GeneratingFamily, a: f64, opts: &SliceOptions) -> Result<SliceDiagram> {
    let tracer = Tracer::new(f, a, opts);
    let rows = opts.sphere_rows.max(9) | 1;
    let cols = 2 * (rows - 1);
    let reach = f.support_extents().iter().fold(0.0f64, |m, v| m.max(*v)) * 1.02;
    let samples = 800;
    let mut zs = Vec::with_capacity(rows * cols);
    let mut hits = 0;
    for r in 0..rows {
        let theta = std::f64::consts::PI * r as f64 / (rows - 1) as f64;
        let ncols = if r == 0 || r == rows - 1 { 1 } else { cols };
        for c in 0..cols {
            let phi = 2.0 * std::f64::consts::PI * (c.min(ncols - 1)) as f64 / cols as f64;
            let dir = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            let z = ray_root(&tracer, &dir, reach, samples);
            if z.is_some() {
                hits += 1;
            }
            zs.push(z);
        }
    }
    let mut d = SliceDiagram::empty(a, 3, f.fiber_dim());
    if hits == 0 {
        return Ok(d);
    }
    if hits < zs.len() {
        return Err(Error::Unsupported(
            "slice is not star-shaped about the origin; only sphere slices are supported for n = 3".into(),
        ));
    }
    let zs: Vec<DVector<f64>> = zs.into_iter().map(|z| z.unwrap()).collect();
    for z in &zs {
        tracer.tangent_rank_check(z)?;
    }
    let points: Vec<FiberCriticalPoint> = zs.iter().map(|z| tracer.make_point(z)).collect();
    d.components.push(Component {
        shape: ComponentShape::Sphere { rows, cols },
        line: Polyline { points, mids: Vec::new() },
    });
    let delta = DifferenceFunction::new(f.sheared(a));
    d.double_points = proximity_crossings(&delta, &zs, &d.components[0].line, tracer.h_max)?;
    Ok(d)
}

impl Tracer<'_> {
    /// Tangent of the projected curve `(x_1, y_1)` at a point (`n = 2`).
    pub(crate) fn projected_tangent(&self, z: &[f64]) -> Result<[f64; 2]> {
        let t = self.tangent(&DVector::from_column_slice(z), None)?;
        let h = self.f.hessian(z);
        let dy: f64 = (0..t.len()).map(|i| h[(0, i)] * t[i]).sum();
        Ok([t[0], dy])
    }

    fn tangent_rank_check(&self, z: &DVector<f64>) -> Result<()> {
        let (_, j) = self.eqs(z);
        if smallest_singular_value(&j) < 1e-8 * (1.0 + j.norm()) {
            return Err(Error::NonTransverseSlice {
                height: self.a,
                detail: format!("defining equations drop rank at point {:?}", z.as_slice()),
            });
        }
        Ok(())
    }
}

/// First root of `∂F_a/∂x_n` along the ray `ρ·dir` in `(x, x_n)`.
fn ray_root(tr: &Tracer, dir: &[f64; 3], reach: f64, samples: usize) -> Option<DVector<f64>> {
    let ne = tr.f.fiber_dim();
    let at = |rho: f64| -> Option<(f64, Vec<f64>)> {
        let mut p: Vec<f64> = dir.iter().map(|d| d * rho).collect();
        p.extend(std::iter::repeat_n(0.0, ne));
        let p = tr.solve_fiber(&p)?;
        Some((tr.g_xn(&p), p))
    };
    let mut prev = at(1e-9 * reach)?;
    for k in 1..=samples {
        let rho = reach * k as f64 / samples as f64;
        let cur = at(rho)?;
        if prev.0 * cur.0 < 0.0 {
            let (mut lo, mut hi) = (rho - reach / samples as f64, rho);
            let mut glo = prev.0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let (gm, _) = at(mid)?;
                if gm * glo < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    glo = gm;
                }
            }
            let (_, p) = at(0.5 * (lo + hi))?;
            let g = DVector::from_column_slice(&p);
            let mut normal = DVector::zeros(p.len());
            // stay on the ray: fix the two angular directions
            let u = nalgebra::Vector3::new(dir[0], dir[1], dir[2]);
            let a = if u.x.abs() < 0.9 { nalgebra::Vector3::x() } else { nalgebra::Vector3::y() };
            let b1 = u.cross(&a).normalize();
            let b2 = u.cross(&b1);
            for k in 0..3 {
                normal[k] = b1[k];
            }
            let z = tr
                .correct_two(&g, &normal, &{
                    let mut n2 = DVector::zeros(p.len());
                    for k in 0..3 {
                        n2[k] = b2[k];
                    }
                    n2
                })
                .unwrap_or(g);
            return Some(z);
        }
        prev = cur;
    }
    None
}

impl Tracer<'_> {
    /// Newton with two linear constraints through the start point (n = 3).
    fn correct_two(&self, z0: &DVector<f64>, n1: &DVector<f64>, n2: &DVector<f64>) -> Option<DVector<f64>> {
        let anchor = z0.clone();
        let mut z = z0.clone();
        for _ in 0..20 {
            let (r, j) = self.eqs(&z);
            let c1 = n1.dot(&(&z - &anchor));
            let c2 = n2.dot(&(&z - &anchor));
            if (r.norm_squared() + c1 * c1 + c2 * c2).sqrt() < self.tol {
                return Some(z);
            }
            let rows = j.nrows() + 2;
            let mut big = DMatrix::zeros(rows, j.ncols());
            big.view_mut((0, 0), j.shape()).copy_from(&j);
            big.row_mut(rows - 2).copy_from(&n1.transpose());
            big.row_mut(rows - 1).copy_from(&n2.transpose());
            let mut rhs = DVector::zeros(rows);
            rhs.rows_mut(0, j.nrows()).copy_from(&(-&r));
            rhs[rows - 2] = -c1;
            rhs[rows - 1] = -c2;
            z += solve(big, &rhs)?;
        }
        let (r, _) = self.eqs(&z);
        (r.norm() < 1e3 * self.tol).then_some(z)
    }
}

impl Clone for Tracer<'_> {
    fn clone(&self) -> Self {
        Tracer { f: self.f, a: self.a, frozen: self.frozen.clone(), h_max: self.h_max, tol: self.tol }
    }
}

struct RawCrossing {
    seg: [(usize, usize, f64); 2],
}

impl RawCrossing {
    fn lerp(&self, comps: &[Component], k: usize) -> FiberCriticalPoint {
        let (c, s, t) = self.seg[k];
        let pts = &comps[c].line.points;
        let (a, b) = (&pts[s], &pts[s + 1]);
        let mix = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p + t * (q - p)).collect::<Vec<_>>();
        FiberCriticalPoint {
            x: mix(&a.x, &b.x),
            x_n: a.x_n + t * (b.x_n - a.x_n),
            e: mix(&a.e, &b.e),
            y: mix(&a.y, &b.y),
        }
    }

    fn dir(&self, comps: &[Component], k: usize) -> [f64; 2] {
        let (c, s, _) = self.seg[k];
        let pts = &comps[c].line.points;
        [pts[s + 1].x[0] - pts[s].x[0], pts[s + 1].y[0] - pts[s].y[0]]
    }

    fn into_double_point(self, comps: &[Component]) -> DoublePoint {
        let p0 = self.lerp(comps, 0);
        let p1 = self.lerp(comps, 1);
        let (d0, d1) = (self.dir(comps, 0), self.dir(comps, 1));
        let (o, u) = if p0.x_n >= p1.x_n { (0, 1) } else { (1, 0) };
        let (to, tu) = if o == 0 { (d0, d1) } else { (d1, d0) };
        let det = to[0] * tu[1] - to[1] * tu[0];
        let sin = det.abs() / (norm2(&to) * norm2(&tu)).max(1e-300);
        let param = |k: usize| StrandParam { component: self.seg[k].0, param: self.seg[k].1 as f64 + self.seg[k].2 };
        let (po, pu) = if o == 0 { (p0, p1) } else { (p1, p0) };
        DoublePoint {
            position: po.projection(),
            sign: Some(if det > 0.0 { 1 } else { -1 }),
            over: po,
            under: pu,
            over_param: Some(param(o)),
            under_param: Some(param(u)),
            angle: sin.clamp(0.0, 1.0).asin(),
        }
    }
}

fn norm2(v: &[f64; 2]) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

/// Transverse self-intersections of the projected curves, found by segment
/// intersection with bounding-box pruning. Adjacent segments are skipped.
fn planar_crossings(comps: &[Component]) -> Result<Vec<RawCrossing>> {
    struct Seg {
        c: usize,
        s: usize,
        n: usize,
        a: [f64; 2],
        b: [f64; 2],
        lo: f64,
        hi: f64,
    }
    let mut segs = Vec::new();
    for (ci, comp) in comps.iter().enumerate() {
        let pts = &comp.line.points;
        let n = pts.len() - 1;
        for s in 0..n {
            let a = [pts[s].x[0], pts[s].y[0]];
            let b = [pts[s + 1].x[0], pts[s + 1].y[0]];
            segs.push(Seg { c: ci, s, n, a, b, lo: a[0].min(b[0]), hi: a[0].max(b[0]) });
        }
    }
    segs.sort_by(|p, q| p.lo.total_cmp(&q.lo));
    let mut out = Vec::new();
    for i in 0..segs.len() {
        for j in i + 1..segs.len() {
            let (p, q) = (&segs[i], &segs[j]);
            if q.lo > p.hi {
                break;
            }
            if p.c == q.c {
                let gap = p.s.abs_diff(q.s);
                if gap <= 1 || gap == p.n - 1 {
                    continue;
                }
            }
            if let Some((s, t)) = seg_intersect(p.a, p.b, q.a, q.b) {
                let (first, second) = if (p.c, p.s) <= (q.c, q.s) {
                    ((p.c, p.s, s), (q.c, q.s, t))
                } else {
                    ((q.c, q.s, t), (p.c, p.s, s))
                };
                out.push(RawCrossing { seg: [first, second] });
            }
        }
    }
    out.sort_by(|x, y| {
        (x.seg[0].0, x.seg[0].1).cmp(&(y.seg[0].0, y.seg[0].1)).then(x.seg[0].2.total_cmp(&y.seg[0].2))
    });
    Ok(out)
}

fn seg_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> Option<(f64, f64)> {
    let r = [b[0] - a[0], b[1] - a[1]];
    let q = [d[0] - c[0], d[1] - c[1]];
    let den = r[0] * q[1] - r[1] * q[0];
    if den.abs() < 1e-300 {
        return None;
    }
    let w = [c[0] - a[0], c[1] - a[1]];
    let s = (w[0] * q[1] - w[1] * q[0]) / den;
    let t = (w[0] * r[1] - w[1] * r[0]) / den;
    ((0.0..1.0).contains(&s) && (0.0..1.0).contains(&t)).then_some((s, t))
}

/// Newton-refines a segment crossing as a critical point of `Δ_a` and
/// computes its sign from the curve tangents.
fn refine_crossing(
    delta: &DifferenceFunction,
    tr: &Tracer,
    comps: &[Component],
    raw: &RawCrossing,
) -> Result<DoublePoint> {
    let approx = raw.lerp(comps, 0);
    let other = raw.lerp(comps, 1);
    let q0 = delta.join(&approx.point(), &other.point());
    let crit = delta.newton_critical(&q0).ok_or_else(|| Error::MissingCriticalPoint {
        crossing: 0,
        detail: format!("Newton did not converge from crossing near {:?}", approx.projection()),
    })?;
    let (p, pt) = delta.split(crit.as_slice());
    let (p_fc, pt_fc) = (
        FiberCriticalPoint::from_point(tr.f, &p),
        FiberCriticalPoint::from_point(tr.f, &pt),
    );
    let proj_dir = |z: &[f64], k: usize| -> Result<[f64; 2]> {
        let zz = DVector::from_column_slice(z);
        let seg_dir = raw.dir(comps, k);
        let t = tr.tangent(&zz, None)?;
        let h = tr.f.hessian(z);
        let dy: f64 = (0..t.len()).map(|i| h[(0, i)] * t[i]).sum();
        let mut v = [t[0], dy];
        if v[0] * seg_dir[0] + v[1] * seg_dir[1] < 0.0 {
            v = [-v[0], -v[1]];
        }
        Ok(v)
    };
    // strand 0 of the raw crossing corresponds to `p`
    let d0 = proj_dir(&p, 0)?;
    let d1 = proj_dir(&pt, 1)?;
    let (over, under, to, tu, po, pu) = if p_fc.x_n >= pt_fc.x_n {
        (p_fc, pt_fc, d0, d1, 0, 1)
    } else {
        (pt_fc, p_fc, d1, d0, 1, 0)
    };
    let det = to[0] * tu[1] - to[1] * tu[0];
    let sin = (det.abs() / (norm2(&to) * norm2(&tu))).clamp(0.0, 1.0);
    if sin < 1e-4 {
        return Err(Error::DegenerateCrossing { x: over.x[0], y: over.y[0], angle: sin.asin() });
    }
    let param = |k: usize| StrandParam { component: raw.seg[k].0, param: raw.seg[k].1 as f64 + raw.seg[k].2 };
    Ok(DoublePoint {
        position: over.projection(),
        sign: Some(if det > 0.0 { 1 } else { -1 }),
        over,
        under,
        over_param: Some(param(po)),
        under_param: Some(param(pu)),
        angle: sin.asin(),
    })
}

/// Double points of a sampled sphere by proximity in the projection,
/// refined as critical points of `Δ_a`.
fn proximity_crossings(
    delta: &DifferenceFunction,
    zs: &[DVector<f64>],
    line: &Polyline,
    h: f64,
) -> Result<Vec<DoublePoint>> {
    let proj: Vec<Vec<f64>> = line.points.iter().map(|p| p.projection()).collect();
    let mut scale = 0.0f64;
    for w in proj.windows(2) {
        scale = scale.max(dist(&w[0], &w[1]));
    }
    let mut out: Vec<DoublePoint> = Vec::new();
    for i in 0..zs.len() {
        for j in i + 1..zs.len() {
            if dist(&proj[i], &proj[j]) > scale {
                continue;
            }
            if (line.points[i].x_n - line.points[j].x_n).abs() < 10.0 * h {
                continue;
            }
            let q0 = delta.join(zs[i].as_slice(), zs[j].as_slice());
            let Some(crit) = delta.newton_critical(&q0) else { continue };
            let (p, pt) = delta.split(crit.as_slice());
            let fam = &delta.sheared().parent;
            let (a, b) = (FiberCriticalPoint::from_point(fam, &p), FiberCriticalPoint::from_point(fam, &pt));
            if (a.x_n - b.x_n).abs() < 1e-6 {
                continue;
            }
            let (over, under) = if a.x_n >= b.x_n { (a, b) } else { (b, a) };
            if out.iter().any(|o| dist(&o.position, &over.projection()) < 1e-7) {
                continue;
            }
            out.push(DoublePoint {
                position: over.projection(),
                sign: None,
                over,
                under,
                over_param: None,
                under_param: None,
                angle: std::f64::consts::FRAC_PI_2,
            });
        }
    }
    Ok(out)
}

/// Arc of a closed polyline from parameter `from` to `to` (wrapping), with
/// exact endpoints. Partial end segments get fresh midpoints when a tracer
/// is available.
fn sub_arc(
    line: &Polyline,
    from: f64,
    to: f64,
    start: &FiberCriticalPoint,
    end: &FiberCriticalPoint,
    tr: Option<&Tracer>,
) -> Polyline {
    let nseg = line.points.len() - 1;
    let first = from.floor() as usize + 1;
    let last = to.floor() as usize;
    let mut idx: Vec<usize> = Vec::new();
    let mut k = first % nseg;
    let wraps = to < from;
    let count = if wraps { nseg - first + last + 1 } else { (last + 1).saturating_sub(first) };
    for _ in 0..count {
        idx.push(k);
        k = (k + 1) % nseg;
    }
    let mut pts = vec![start.clone()];
    pts.extend(idx.iter().map(|&i| line.points[i].clone()));
    pts.push(end.clone());
    let mut mids = Vec::with_capacity(pts.len() - 1);
    for w in 0..pts.len() - 1 {
        let interior = w > 0 && w + 1 < pts.len() - 1;
        if interior && idx[w - 1] + 1 == idx[w] {
            mids.push(line.mids[idx[w - 1]].clone());
            continue;
        }
        if interior && idx[w] == 0 {
            mids.push(line.mids[nseg - 1].clone());
            continue;
        }
        let (a, b) = (&pts[w], &pts[w + 1]);
        let m = match tr {
            Some(t) => {
                let za = DVector::from_vec(a.point());
                let zb = DVector::from_vec(b.point());
                t.make_point(&t.midpoint(&za, &zb))
            }
            None => mid_lerp(a, b),
        };
        mids.push(m);
    }
    Polyline { points: pts, mids }
}

fn mid_lerp(a: &FiberCriticalPoint, b: &FiberCriticalPoint) -> FiberCriticalPoint {
    let mix = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| (p + q) / 2.0).collect::<Vec<_>>();
    FiberCriticalPoint { x: mix(&a.x, &b.x), x_n: (a.x_n + b.x_n) / 2.0, e: mix(&a.e, &b.e), y: mix(&a.y, &b.y) }
}

/// Turning number of a closed projected curve.
fn turning_number(line: &Polyline) -> i32 {
    let p: Vec<[f64; 2]> = line.points.iter().map(|q| [q.x[0], q.y[0]]).collect();
    let n = p.len() - 1;
    if n < 3 {
        return 0;
    }
    let mut total = 0.0;
    for i in 0..n {
        let a = p[(i + n - 1) % n];
        let b = p[i];
        let c = p[(i + 1) % n];
        let u = [b[0] - a[0], b[1] - a[1]];
        let v = [c[0] - b[0], c[1] - b[1]];
        total += (u[0] * v[1] - u[1] * v[0]).atan2(u[0] * v[0] + u[1] * v[1]);
    }
    (total / std::f64::consts::TAU).round() as i32
}

/// Crossings of an already extracted diagram.
pub fn double_points(diagram: &SliceDiagram) -> &[DoublePoint] {
    &diagram.double_points
}

pub fn writhe(diagram: &SliceDiagram) -> Result<i32> {
    diagram
        .writhe
        .ok_or_else(|| Error::Unsupported("writhe is only defined for planar slices".into()))
}

/// Whether `writhe(high) − writhe(low) = χ` holds.
pub fn euler_obstruction(low: &SliceDiagram, high: &SliceDiagram, chi: i32) -> Result<bool> {
    Ok(writhe(high)? - writhe(low)? == chi)
}

/// Sheared family used for a diagram; convenience for callers that hold only
/// the parent family.
pub fn sheared_for(f: &GeneratingFamily, d: &SliceDiagram) -> ShearedFamily {
    f.sheared(d.height)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{build_example_family, CrossingSign, ExampleParams};

    fn fam(sign: CrossingSign) -> GeneratingFamily {
        build_example_family(ExampleParams::new(5.0, 0.25, 1.0, 4.0, 2), sign).unwrap()
    }

    #[test]
    fn figure_eight_at_height_one() {
        let f = fam(CrossingSign::Negative);
        let d = extract_slice(&f, 1.0, &SliceOptions::default()).unwrap();
        assert_eq!(d.components.len(), 1);
        for p in d.projected_points() {
            let r2 = p.x[0] * p.x[0] + p.x_n * p.x_n;
            assert!((r2 - 4.0).abs() < 1e-9);
            assert!((p.y[0] + 2.0 * p.x[0] * p.x_n).abs() < 1e-9);
        }
        assert_eq!(d.double_points.len(), 1);
        let dp = &d.double_points[0];
        assert_eq!(dp.sign, Some(-1));
        assert!(dp.position.iter().all(|v| v.abs() < 1e-10));
        assert!((dp.over.x_n - 2.0).abs() < 1e-10 && (dp.under.x_n + 2.0).abs() < 1e-10);
        assert_eq!(d.writhe, Some(-1));
        assert_eq!(d.winding, Some(0));
        assert!(d.total_signed_area.abs() < 1e-6 * 32.0 / 3.0);
        let a = d.lobe_area(0).unwrap();
        assert!((a - 32.0 / 3.0).abs() < 1e-6, "lobe area {a}");
    }

    #[test]
    fn positive_family_and_empty_slice() {
        let g = fam(CrossingSign::Positive);
        let d = extract_slice(&g, -1.0, &SliceOptions::default()).unwrap();
        assert_eq!(d.double_points.len(), 1);
        assert_eq!(d.double_points[0].sign, Some(1));
        let e = extract_slice(&fam(CrossingSign::Negative), 6.0, &SliceOptions::default()).unwrap();
        assert!(e.is_empty());
        assert_eq!(e.writhe, Some(0));
    }

    #[test]
    fn embedded_circle_has_no_crossings() {
        let circle: Vec<[f64; 3]> = (0..200)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / 200.0;
                [t.cos(), 0.0, t.sin()]
            })
            .collect();
        let d = SliceDiagram::from_curves(1.0, &[circle]).unwrap();
        assert!(d.double_points.is_empty());
        assert_eq!(d.winding.map(i32::abs), Some(1));
        assert!((d.total_signed_area.abs() - std::f64::consts::PI).abs() < 1e-3);
    }
}
