//! Generating families `F(x, x_n, e)` on `R^{n-1} x R x R^N`.
//!
//! Points are flat slices laid out as `[x_1 .. x_{n-1}, x_n, e_1 .. e_N]`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numeric::{fd_gradient, fd_hessian, sym_eigenvalues};
use crate::poly::{jet, Poly};

/// A smooth function of the full point. Only `value` is required; the
/// derivative defaults fall back to central differences.
pub trait FamilyFunction: Send + Sync {
    fn value(&self, p: &[f64]) -> f64;

    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let h = 1e-3 * step_scale(p);
        fd_gradient(&|q| self.value(q), p, h)
    }

    fn hessian(&self, p: &[f64]) -> DMatrix<f64> {
        let h = 1e-4 * step_scale(p);
        fd_hessian(&|q| self.gradient(q), p, h)
    }
}

fn step_scale(p: &[f64]) -> f64 {
    1.0 + p.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

struct ValueOnly<F>(F);

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FamilyFunction for ValueOnly<F> {
    fn value(&self, p: &[f64]) -> f64 {
        (self.0)(p)
    }
}

/// Quadratic form `Q(e) = e^T M e` with symmetric `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    matrix: DMatrix<f64>,
}

impl QuadraticForm {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidParams("quadratic form matrix must be square".into()));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        if sym.nrows() > 0 {
            let ev = sym_eigenvalues(&sym);
            let rho = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if ev.iter().any(|v| v.abs() <= 1e-12 * (1.0 + rho)) {
                return Err(Error::InvalidParams("quadratic form is degenerate".into()));
            }
        }
        Ok(QuadraticForm { matrix: sym })
    }

    pub fn diagonal(coeffs: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(coeffs)))
    }

    pub fn empty() -> Self {
        QuadraticForm { matrix: DMatrix::zeros(0, 0) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Number of negative eigenvalues.
    pub fn index(&self) -> usize {
        if self.dim() == 0 {
            return 0;
        }
        sym_eigenvalues(&self.matrix).iter().filter(|v| **v < 0.0).count()
    }

    pub fn eval(&self, e: &[f64]) -> f64 {
        let k = self.dim();
        let mut s = 0.0;
        for i in 0..k {
            for j in 0..k {
                s += e[i] * self.matrix[(i, j)] * e[j];
            }
        }
        s
    }

    fn direct_sum(&self, other: &QuadraticForm) -> QuadraticForm {
        let (a, b) = (self.dim(), other.dim());
        let mut m = DMatrix::zeros(a + b, a + b);
        m.view_mut((0, 0), (a, a)).copy_from(&self.matrix);
        m.view_mut((a, a), (b, b)).copy_from(&other.matrix);
        QuadraticForm { matrix: m }
    }
}

/// Generating family with its base/fiber split and quadratic-at-infinity data.
///
/// `support` holds, for each of the `n` coordinates `x_1..x_n`, a half-width
/// outside of which `F(x, x_n, e) = Q(e)`.
#[derive(Clone)]
pub struct GeneratingFamily {
    base_dim: usize,
    fiber_dim: usize,
    support: Vec<f64>,
    core_radius: f64,
    infinity: QuadraticForm,
    func: Arc<dyn FamilyFunction>,
}

impl fmt::Debug for GeneratingFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratingFamily")
            .field("base_dim", &self.base_dim)
            .field("fiber_dim", &self.fiber_dim)
            .field("support", &self.support)
            .field("infinity", &self.infinity)
            .finish_non_exhaustive()
    }
}

impl GeneratingFamily {
    /// Wraps a user function. `support` gives per-coordinate half-widths for
    /// `x_1..x_n`; `core_radius` bounds where the interesting geometry lives
    /// and is used to size search grids.
    pub fn new(
        base_dim: usize,
        infinity: QuadraticForm,
        support: Vec<f64>,
        core_radius: f64,
        func: Arc<dyn FamilyFunction>,
    ) -> Result<Self> {
        if base_dim < 2 {
            return Err(Error::InvalidParams(format!("base dimension must be >= 2, got {base_dim}")));
        }
        if support.len() != base_dim || support.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParams("support needs one positive extent per base coordinate".into()));
        }
        if !(core_radius > 0.0) {
            return Err(Error::InvalidParams("core radius must be positive".into()));
        }
        Ok(GeneratingFamily {
            base_dim,
            fiber_dim: infinity.dim(),
            support,
            core_radius,
            infinity,
            func,
        })
    }

    /// Family given by a value callback only; derivatives use finite differences.
    pub fn from_fn(
        base_dim: usize,
        infinity: QuadraticForm,
        support: Vec<f64>,
        core_radius: f64,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(base_dim, infinity, support, core_radius, Arc::new(ValueOnly(f)))
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    /// Length of a point: `n + N`.
    pub fn dim(&self) -> usize {
        self.base_dim + self.fiber_dim
    }

    /// Index of `x_n` in a point.
    pub fn xn_index(&self) -> usize {
        self.base_dim - 1
    }

    pub fn support_radius(&self) -> f64 {
        self.support.iter().fold(0.0f64, |m, v| m.max(*v))
    }

    pub fn support_extents(&self) -> &[f64] {
        &self.support
    }

    pub fn core_radius(&self) -> f64 {
        self.core_radius
    }

    pub fn infinity_form(&self) -> &QuadraticForm {
        &self.infinity
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        self.func.value(p)
    }

    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        self.func.gradient(p)
    }

    pub fn hessian(&self, p: &[f64]) -> DMatrix<f64> {
        self.func.hessian(p)
    }

    /// True when `p` lies outside the support box in some base coordinate.
    pub fn outside_support(&self, p: &[f64]) -> bool {
        self.support.iter().zip(p).any(|(s, x)| x.abs() > *s)
    }

    /// `F ⊕ Q`: adds `Q(e')` on `q.dim()` new fiber variables.
    pub fn stabilize(&self, q: &QuadraticForm) -> GeneratingFamily {
        if q.dim() == 0 {
            return self.clone();
        }
        GeneratingFamily {
            fiber_dim: self.fiber_dim + q.dim(),
            infinity: self.infinity.direct_sum(q),
            func: Arc::new(Stabilized {
                inner: self.func.clone(),
                split: self.dim(),
                form: q.clone(),
            }),
            ..self.clone()
        }
    }

    /// `β² F(x/β, x_n/β, e)`, generating the dilated Lagrangian `βL`.
    pub fn dilate(&self, beta: f64) -> Result<GeneratingFamily> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParams(format!("dilation factor must be positive, got {beta}")));
        }
        if beta == 1.0 {
            return Ok(self.clone());
        }
        Ok(GeneratingFamily {
            support: self.support.iter().map(|s| s * beta).collect(),
            core_radius: self.core_radius * beta,
            infinity: QuadraticForm { matrix: self.infinity.matrix.clone() * (beta * beta) },
            func: Arc::new(Dilated { inner: self.func.clone(), beta, nx: self.base_dim }),
            ..self.clone()
        })
    }

    /// Fiber-preserving linear change `F(x, A e)` with invertible `A`.
    pub fn fiber_linear_change(&self, a: &DMatrix<f64>) -> Result<GeneratingFamily> {
        let k = self.fiber_dim;
        if a.shape() != (k, k) {
            return Err(Error::InvalidParams("fiber change must be N x N".into()));
        }
        if k > 0 && a.clone().determinant().abs() < 1e-12 {
            return Err(Error::InvalidParams("fiber change is singular".into()));
        }
        Ok(GeneratingFamily {
            infinity: QuadraticForm { matrix: a.transpose() * &self.infinity.matrix * a },
            func: Arc::new(FiberLinear { inner: self.func.clone(), a: a.clone(), nx: self.base_dim }),
            ..self.clone()
        })
    }

    pub fn sheared(&self, height: f64) -> ShearedFamily {
        ShearedFamily { parent: self.clone(), height }
    }
}

/// `F_a(x, x_n, e) = F(x, x_n, e) − a·x_n`.
#[derive(Debug, Clone)]
pub struct ShearedFamily {
    pub parent: GeneratingFamily,
    pub height: f64,
}

impl ShearedFamily {
    pub fn value(&self, p: &[f64]) -> f64 {
        self.parent.value(p) - self.height * p[self.parent.xn_index()]
    }

    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let mut g = self.parent.gradient(p);
        g[self.parent.xn_index()] -= self.height;
        g
    }

    pub fn hessian(&self, p: &[f64]) -> DMatrix<f64> {
        self.parent.hessian(p)
    }
}

struct Stabilized {
    inner: Arc<dyn FamilyFunction>,
    split: usize,
    form: QuadraticForm,
}

impl FamilyFunction for Stabilized {
    fn value(&self, p: &[f64]) -> f64 {
        self.inner.value(&p[..self.split]) + self.form.eval(&p[self.split..])
    }

    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let mut g = self.inner.gradient(&p[..self.split]);
        let e = &p[self.split..];
        let m = &self.form.matrix;
        g.extend((0..e.len()).map(|i| 2.0 * (0..e.len()).map(|j| m[(i, j)] * e[j]).sum::<f64>()));
        g
    }

    fn hessian(&self, p: &[f64]) -> DMatrix<f64> {
        let d = p.len();
        let mut h = DMatrix::zeros(d, d);
        h.view_mut((0, 0), (self.split, self.split))
            .copy_from(&self.inner.hessian(&p[..self.split]));
        let k = d - self.split;
        h.view_mut((self.split, self.split), (k, k))
            .copy_from(&(&self.form.matrix * 2.0));
        h
    }
}

struct Dilated {
    inner: Arc<dyn FamilyFunction>,
    beta: f64,
    nx: usize,
}

impl Dilated {
    fn pull(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .enumerate()
            .map(|(i, v)| if i < self.nx { v / self.beta } else { *v })
            .collect()
    }

    fn factor(&self, i: usize) -> f64 {
        if i < self.nx {
            self.beta
        } else {
            self.beta * self.beta
        }
    }
}

impl FamilyFunction for Dilated {
    fn value(&self, p: &[f64]) -> f64 {
        self.beta * self.beta * self.inner.value(&self.pull(p))
    }

    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let g = self.inner.gradient(&self.pull(p));
        g.iter().enumerate().map(|(i, v)| v * self.factor(i)).collect()
    }

    fn hessian(&self, p: &[f64]) -> DMatrix<f64> {
        let mut h = self.inner.hessian(&self.pull(p));
        let b2 = self.beta * self.beta;
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                h[(i, j)] *= self.factor(i) * self.factor(j) / b2;
            }
        }
        h
    }
}

struct FiberLinear {
    inner: Arc<dyn FamilyFunction>,
    a: DMatrix<f64>,
    nx: usize,
}

impl FiberLinear {
    fn push(&self, p: &[f64]) -> Vec<f64> {
        let mut q = p[..self.nx].to_vec();
        let e = nalgebra::DVector::from_column_slice(&p[self.nx..]);
        q.extend((&self.a * e).iter());
        q
    }

    fn jacobian(&self, d: usize) -> DMatrix<f64> {
        let mut j = DMatrix::identity(d, d);
        let k = d - self.nx;
        j.view_mut((self.nx, self.nx), (k, k)).copy_from(&self.a);
        j
    }
}

impl FamilyFunction for FiberLinear {
    fn value(&self, p: &[f64]) -> f64 {
        self.inner.value(&self.push(p))
    }

    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let g = nalgebra::DVector::from_vec(self.inner.gradient(&self.push(p)));
        (self.jacobian(p.len()).transpose() * g).iter().copied().collect()
    }

    fn hessian(&self, p: &[f64]) -> DMatrix<f64> {
        let j = self.jacobian(p.len());
        j.transpose() * self.inner.hessian(&self.push(p)) * j
    }
}

// ---------------------------------------------------------------------------
// Example family

/// Which figure-8 the example family produces. `Negative` is `F`, whose
/// slices have a negative crossing; `Positive` is `G = −F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CrossingSign {
    Negative,
    Positive,
}

impl CrossingSign {
    pub fn as_f64(self) -> f64 {
        match self {
            CrossingSign::Negative => -1.0,
            CrossingSign::Positive => 1.0,
        }
    }
}

/// Smoothstep used in the cutoff margins. Both are C² at the ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Blend {
    #[default]
    Quintic,
    Septic,
}

impl Blend {
    fn poly(self) -> Poly {
        match self {
            Blend::Quintic => Poly(vec![0.0, 0.0, 0.0, 10.0, -15.0, 6.0]),
            Blend::Septic => Poly(vec![0.0, 0.0, 0.0, 0.0, 35.0, -84.0, 70.0, -20.0]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleParams {
    pub k: f64,
    pub eps: f64,
    pub beta: f64,
    pub tau: f64,
    pub dim: usize,
}

impl ExampleParams {
    pub fn new(k: f64, eps: f64, beta: f64, tau: f64, dim: usize) -> Self {
        ExampleParams { k, eps, beta, tau, dim }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.k, self.eps, self.beta, self.tau].iter().all(|v| v.is_finite())
            && 0.0 < self.eps
            && self.eps < self.beta
            && self.beta < self.tau
            && self.tau < self.k;
        if !ok {
            return Err(Error::InvalidParams(format!(
                "need 0 < eps < beta < tau < K, got eps={}, beta={}, tau={}, K={}",
                self.eps, self.beta, self.tau, self.k
            )));
        }
        if self.dim < 2 {
            return Err(Error::InvalidParams(format!("dimension must be >= 2, got {}", self.dim)));
        }
        Ok(())
    }

    /// Radius of the slice circle/sphere at height `a`.
    pub fn slice_radius(&self, a: f64) -> f64 {
        (self.k - a).max(0.0).sqrt()
    }
}

/// Piecewise-polynomial ramp `R(τ) = ∫ρ` where `ρ` rises from 0 to 1 over
/// `r`, stays at 1 for `flat`, then falls back over `r`.
#[derive(Debug, Clone)]
struct Ramp {
    r: f64,
    flat: f64,
}

impl Ramp {
    fn new(total: f64, r: f64) -> Self {
        let r = r.min(total / 2.0);
        Ramp { r, flat: total - r }
    }

    fn length(&self) -> f64 {
        2.0 * self.r + self.flat
    }

    /// `[R, ρ, ρ']`
    fn jet(&self, b: &BlendPolys, t: f64) -> [f64; 3] {
        let r = self.r;
        if t <= 0.0 {
            [0.0, 0.0, 0.0]
        } else if t <= r {
            let u = t / r;
            [r * b.is.eval(u), b.s.eval(u), b.ds.eval(u) / r]
        } else if t <= r + self.flat {
            [r / 2.0 + (t - r), 1.0, 0.0]
        } else if t <= self.length() {
            let v = (t - r - self.flat) / r;
            [r / 2.0 + self.flat + r * (v - b.is.eval(v)), 1.0 - b.s.eval(v), -b.ds.eval(v) / r]
        } else {
            [r + self.flat, 0.0, 0.0]
        }
    }
}

#[derive(Debug, Clone)]
struct BlendPolys {
    s: Poly,
    ds: Poly,
    dds: Poly,
    is: Poly,
}

impl BlendPolys {
    fn new(blend: Blend) -> Self {
        let s = blend.poly();
        let ds = s.derivative();
        let dds = ds.derivative();
        let is = s.integral();
        BlendPolys { s, ds, dds, is }
    }
}

/// The four cutoff profiles on `t >= 0`, extended by parity.
#[derive(Debug, Clone)]
struct Profiles {
    k: f64,
    w: f64,
    m: f64,
    b: BlendPolys,
    l_end: f64,
    l_slope: f64,
    l_tail: Ramp,
    c_margin: Poly,
    c_margin_d: Poly,
    c_end: f64,
    c_slope: f64,
    c_tail: Ramp,
}

impl Profiles {
    fn new(p: &ExampleParams, blend: Blend) -> Self {
        let b = BlendPolys::new(blend);
        let w = (p.k - p.eps).sqrt();
        let m = p.k.sqrt() - w;
        let sigma = b.s.one_minus();
        // c' = σ(u) t² with t = w + m u, integrated in u
        let t_of_u = Poly::linear(w, m);
        let c_margin_d = sigma.mul(&t_of_u).mul(&t_of_u);
        let c_margin = c_margin_d.integral().scale(m);
        let l_end = w + m * (1.0 - b.is.eval(1.0));
        let c_end = w.powi(3) / 3.0 + c_margin.eval(1.0);
        let gap = p.beta - p.eps;
        let l_slope = if p.dim == 2 {
            1.0
        } else {
            gap / (4.0 * ((p.dim - 2) as f64 * p.k).max(1.0))
        };
        let c_slope = gap / 2.0;
        let l_tail = Ramp::new(l_end / l_slope, 1.0);
        let c_tail = Ramp::new(c_end / c_slope, 1.0);
        Profiles {
            k: p.k,
            w,
            m,
            b,
            l_end,
            l_slope,
            l_tail,
            c_margin,
            c_margin_d,
            c_end,
            c_slope,
            c_tail,
        }
    }

    fn outer(&self) -> f64 {
        self.k.sqrt()
    }

    fn xn_support(&self) -> f64 {
        self.outer() + self.l_tail.length().max(self.c_tail.length())
    }

    /// Even cutoff `χ`: 1 on the core, 0 beyond `√K`.
    fn chi(&self, x: f64) -> [f64; 3] {
        let t = x.abs();
        let s = x.signum();
        if t <= self.w {
            [1.0, 0.0, 0.0]
        } else if t < self.outer() {
            let u = (t - self.w) / self.m;
            let [v, d, dd] = jet(&self.b.s, &self.b.ds, &self.b.dds, u);
            [1.0 - v, -s * d / self.m, -dd / (self.m * self.m)]
        } else {
            [0.0, 0.0, 0.0]
        }
    }

    /// Odd profile `ℓ`: identity on the core.
    fn ell(&self, x: f64) -> [f64; 3] {
        let t = x.abs();
        let s = if x < 0.0 { -1.0 } else { 1.0 };
        let [v, d, dd] = if t <= self.w {
            [t, 1.0, 0.0]
        } else if t < self.outer() {
            let u = (t - self.w) / self.m;
            [
                self.w + self.m * (u - self.b.is.eval(u)),
                1.0 - self.b.s.eval(u),
                -self.b.ds.eval(u) / self.m,
            ]
        } else {
            let [r, rho, drho] = self.l_tail.jet(&self.b, t - self.outer());
            [self.l_end - self.l_slope * r, -self.l_slope * rho, -self.l_slope * drho]
        };
        [s * v, d, s * dd]
    }

    /// Odd profile `c`: `x³/3` on the core.
    fn c(&self, x: f64) -> [f64; 3] {
        let t = x.abs();
        let s = if x < 0.0 { -1.0 } else { 1.0 };
        let [v, d, dd] = if t <= self.w {
            [t.powi(3) / 3.0, t * t, 2.0 * t]
        } else if t < self.outer() {
            let u = (t - self.w) / self.m;
            let sig = 1.0 - self.b.s.eval(u);
            let dsig = -self.b.ds.eval(u) / self.m;
            [
                self.w.powi(3) / 3.0 + self.c_margin.eval(u),
                sig * t * t,
                dsig * t * t + 2.0 * sig * t,
            ]
        } else {
            let [r, rho, drho] = self.c_tail.jet(&self.b, t - self.outer());
            [self.c_end - self.c_slope * r, -self.c_slope * rho, -self.c_slope * drho]
        };
        debug_assert!(self.c_margin_d.0.len() > 1);
        [s * v, d, s * dd]
    }
}

/// `F(x, x_n) = ℓ(x_n) q(x) − d(x) c(x_n)` with `q = (K − |x|²) Π χ(x_i)`
/// and `d = Π χ(x_i)`, times `±1`.
struct Example21 {
    n: usize,
    sign: f64,
    prof: Profiles,
}

/// Value, gradient and Hessian of the product `d = Π χ(x_i)`.
fn product_jet(chis: &[[f64; 3]]) -> (f64, Vec<f64>, DMatrix<f64>) {
    let m = chis.len();
    let prod_except = |skip: &[usize]| -> f64 {
        (0..m).filter(|i| !skip.contains(i)).map(|i| chis[i][0]).product()
    };
    let d = prod_except(&[]);
    let g: Vec<f64> = (0..m).map(|i| chis[i][1] * prod_except(&[i])).collect();
    let mut h = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            h[(i, j)] = if i == j {
                chis[i][2] * prod_except(&[i])
            } else {
                chis[i][1] * chis[j][1] * prod_except(&[i, j])
            };
        }
    }
    (d, g, h)
}

impl Example21 {
    fn parts(&self, p: &[f64]) -> (f64, Vec<f64>, DMatrix<f64>, f64, Vec<f64>, DMatrix<f64>) {
        let m = self.n - 1;
        let chis: Vec<[f64; 3]> = p[..m].iter().map(|x| self.prof.chi(*x)).collect();
        let (d, dg, dh) = product_jet(&chis);
        let r2: f64 = p[..m].iter().map(|x| x * x).sum();
        let base = self.prof.k - r2;
        let q = base * d;
        let qg: Vec<f64> = (0..m).map(|i| -2.0 * p[i] * d + base * dg[i]).collect();
        let mut qh = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                let delta = if i == j { 1.0 } else { 0.0 };
                qh[(i, j)] = -2.0 * delta * d - 2.0 * p[i] * dg[j] - 2.0 * p[j] * dg[i] + base * dh[(i, j)];
            }
        }
        (q, qg, qh, d, dg, dh)
    }
}

impl FamilyFunction for Example21 {
    fn value(&self, p: &[f64]) -> f64 {
        let m = self.n - 1;
        let r2: f64 = p[..m].iter().map(|x| x * x).sum();
        let d: f64 = p[..m].iter().map(|x| self.prof.chi(*x)[0]).product();
        let q = (self.prof.k - r2) * d;
        self.sign * (self.prof.ell(p[m])[0] * q - d * self.prof.c(p[m])[0])
    }

    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let m = self.n - 1;
        let (q, qg, _, d, dg, _) = self.parts(p);
        let [l, l1, _] = self.prof.ell(p[m]);
        let [c, c1, _] = self.prof.c(p[m]);
        let mut g: Vec<f64> = (0..m).map(|i| self.sign * (l * qg[i] - c * dg[i])).collect();
        g.push(self.sign * (l1 * q - d * c1));
        g
    }

    fn hessian(&self, p: &[f64]) -> DMatrix<f64> {
        let m = self.n - 1;
        let (q, qg, qh, d, dg, dh) = self.parts(p);
        let [l, l1, l2] = self.prof.ell(p[m]);
        let [c, c1, c2] = self.prof.c(p[m]);
        let mut h = DMatrix::zeros(self.n, self.n);
        for i in 0..m {
            for j in 0..m {
                h[(i, j)] = l * qh[(i, j)] - c * dh[(i, j)];
            }
            let v = l1 * qg[i] - c1 * dg[i];
            h[(i, m)] = v;
            h[(m, i)] = v;
        }
        h[(m, m)] = l2 * q - d * c2;
        h * self.sign
    }
}

/// The explicit figure-8 family, with the default quintic blend.
pub fn build_example_family(params: ExampleParams, sign: CrossingSign) -> Result<GeneratingFamily> {
    build_example_family_with_blend(params, sign, Blend::Quintic)
}

pub fn build_example_family_with_blend(
    params: ExampleParams,
    sign: CrossingSign,
    blend: Blend,
) -> Result<GeneratingFamily> {
    params.validate()?;
    let prof = Profiles::new(&params, blend);
    let n = params.dim;
    let mut support = vec![prof.outer(); n - 1];
    support.push(prof.xn_support());
    let core = params.k.sqrt();
    let factor = match sign {
        CrossingSign::Negative => 1.0,
        CrossingSign::Positive => -1.0,
    };
    let func = Example21 { n, sign: factor, prof };
    GeneratingFamily::new(n, QuadraticForm::empty(), support, core, Arc::new(func))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ExampleParams {
        ExampleParams::new(5.0, 0.25, 1.0, 4.0, 2)
    }

    #[test]
    fn interior_values() {
        let f = build_example_family(params(), CrossingSign::Negative).unwrap();
        assert_eq!(f.value(&[0.0, 0.0]), 0.0);
        let g = f.gradient(&[0.0, 1.0]);
        assert!((g[1] - 4.0).abs() < 1e-14);
        // F = x2 (K - x1²) - x2³/3 inside the cube
        let p = [0.7, -1.3];
        let want = -1.3 * (5.0 - 0.49) + 1.3f64.powi(3) / 3.0;
        assert!((f.value(&p) - want).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_order() {
        let bad = ExampleParams::new(5.0, 1.5, 1.0, 4.0, 2);
        assert!(matches!(build_example_family(bad, CrossingSign::Negative), Err(Error::InvalidParams(_))));
        assert!(QuadraticForm::diagonal(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn profiles_are_continuous_across_pieces() {
        for blend in [Blend::Quintic, Blend::Septic] {
            let pr = Profiles::new(&params(), blend);
            let knots = [
                pr.w,
                pr.outer(),
                pr.outer() + pr.c_tail.r,
                pr.outer() + pr.c_tail.r + pr.c_tail.flat,
                pr.outer() + pr.c_tail.length(),
                pr.outer() + pr.l_tail.length(),
            ];
            for &t in &knots {
                for f in [Profiles::ell, Profiles::c, Profiles::chi] {
                    let (a, b) = (f(&pr, t - 1e-12), f(&pr, t + 1e-12));
                    for k in 0..3 {
                        assert!((a[k] - b[k]).abs() < 1e-6, "jump at {t} in derivative {k}");
                    }
                }
            }
            assert!(pr.ell(pr.xn_support() + 0.1)[0].abs() < 1e-12);
            assert!(pr.c(pr.xn_support() + 0.1)[0].abs() < 1e-12);
        }
    }

    #[test]
    fn exterior_bounds_keep_y_n_below_beta() {
        let p = params();
        let f = build_example_family(p, CrossingSign::Negative).unwrap();
        let w = (p.k - p.eps).sqrt();
        let r = f.support_radius() + 0.5;
        let steps = 400;
        for i in 0..=steps {
            for j in 0..=steps {
                let x = -r + 2.0 * r * i as f64 / steps as f64;
                let y = -r + 2.0 * r * j as f64 / steps as f64;
                if x.abs() <= w && y.abs() <= w {
                    continue;
                }
                assert!(f.gradient(&[x, y])[1] < p.beta, "y2 too large at ({x}, {y})");
            }
        }
    }

    #[test]
    fn stabilize_and_dilate() {
        let f = build_example_family(params(), CrossingSign::Negative).unwrap();
        let s = f.stabilize(&QuadraticForm::diagonal(&[1.0]).unwrap());
        assert_eq!(s.fiber_dim(), 1);
        assert!((s.value(&[0.3, 0.4, 2.0]) - f.value(&[0.3, 0.4]) - 4.0).abs() < 1e-14);
        let same = f.stabilize(&QuadraticForm::empty());
        assert_eq!(same.value(&[0.3, 0.4]), f.value(&[0.3, 0.4]));
        let d = f.dilate(2.0).unwrap();
        assert!((d.value(&[0.6, 0.8]) - 4.0 * f.value(&[0.3, 0.4])).abs() < 1e-13);
        assert!((d.support_radius() - 2.0 * f.support_radius()).abs() < 1e-12);
        assert!(f.dilate(0.0).is_err());
    }
}
