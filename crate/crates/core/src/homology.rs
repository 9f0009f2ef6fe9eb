//! Mod-2 relative homology ranks of split sublevel pairs of `Δ_a`, from
//! lower-star persistence on a cubical grid.
//!
//! The grid is uniform in logical coordinates `(x, σ, δ)` and maps to the
//! domain by `x_n = g(σ − δ/2)`, `x̃_n = g(σ + δ/2)` with an odd increasing
//! warp `g` that is the identity on the core and grows fast outside it. The
//! wall `P₀` is the grid plane `δ = 0` and the closed half-spaces
//! `P₊ = {δ ≥ 0}`, `P₋ = {δ ≤ 0}` are sub-boxes. Because `g` is applied to
//! `x_n` and `x̃_n` separately, each of them keeps core resolution wherever
//! it lies in the core, even when the other one is far out.

use crate::error::{Error, Result};
use crate::morse::DifferenceFunction;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Largest domain dimension handled by the cubical engine.
pub const MAX_DOMAIN_DIM: usize = 4;

/// Odd warp: identity on `[−c, c]`, exponential on `[c, c + t]`, then linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Warp {
    pub c: f64,
    pub t: f64,
    pub kappa: f64,
}

impl Warp {
    /// Warp reaching `target` at `c + t`.
    fn reaching(c: f64, t: f64, target: f64) -> Self {
        let at = |k: f64| c + ((k * t).exp() - 1.0) / k;
        let (mut lo, mut hi) = (1e-9, 1.0);
        if at(lo) >= target {
            return Warp { c, t, kappa: lo };
        }
        while at(hi) < target {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if at(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Warp { c, t, kappa: hi }
    }

    pub fn apply(&self, u: f64) -> f64 {
        let a = u.abs();
        let v = if a <= self.c {
            a
        } else if a <= self.c + self.t {
            self.c + ((self.kappa * (a - self.c)).exp() - 1.0) / self.kappa
        } else {
            let e = (self.kappa * self.t).exp();
            self.c + (e - 1.0) / self.kappa + e * (a - self.c - self.t)
        };
        v.copysign(u)
    }

    pub fn invert(&self, v: f64) -> f64 {
        let a = v.abs();
        let e = (self.kappa * self.t).exp();
        let knee = self.c + (e - 1.0) / self.kappa;
        let u = if a <= self.c {
            a
        } else if a <= knee {
            self.c + (1.0 + self.kappa * (a - self.c)).ln() / self.kappa
        } else {
            self.c + self.t + (a - knee) / e
        };
        u.copysign(v)
    }
}

#[derive(Debug, Clone)]
pub struct CubicalField {
    /// Logical sample coordinates per axis: base axes, then `σ`, then `δ`.
    pub axes: Vec<Vec<f64>>,
    pub warp: Warp,
    /// `Δ_a` at every grid vertex, last axis fastest.
    pub values: Vec<f64>,
    /// Index on the `δ` axis where `δ = 0`.
    pub zero_index: usize,
    pub height: f64,
    pub min: f64,
    pub max: f64,
    /// Levels beyond `±theta` are reserved for box-boundary effects.
    pub theta: f64,
}

impl CubicalField {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len()).collect()
    }

    fn strides(shape: &[usize]) -> Vec<usize> {
        let mut s = vec![1; shape.len()];
        for i in (0..shape.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * shape[i + 1];
        }
        s
    }

    fn logical_to_domain(&self, l: &[f64]) -> Vec<f64> {
        to_domain(&self.warp, l)
    }

    /// Domain point `[x, x_n, x̃_n]` of a grid vertex.
    pub fn domain_point(&self, idx: &[usize]) -> Vec<f64> {
        let l: Vec<f64> = idx.iter().zip(&self.axes).map(|(i, ax)| ax[*i]).collect();
        self.logical_to_domain(&l)
    }

    /// Logical coordinates of a domain point.
    pub fn logical_point(&self, q: &[f64]) -> Vec<f64> {
        let m = self.dim() - 2;
        let u = self.warp.invert(q[m]);
        let ut = self.warp.invert(q[m + 1]);
        let mut l = q[..m].to_vec();
        l.push(0.5 * (u + ut));
        l.push(ut - u);
        l
    }

    /// Value spread over the grid cells around a domain point: the cell
    /// containing it, widened by one cell on every side.
    pub fn cell_variation(&self, q: &[f64]) -> f64 {
        let rc = self.logical_point(q);
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for (ax, &c) in self.axes.iter().zip(&rc) {
            let k = ax.partition_point(|v| *v <= c).clamp(1, ax.len() - 1) - 1;
            lo.push(k.saturating_sub(1));
            hi.push((k + 2).min(ax.len() - 1));
        }
        let shape = self.shape();
        let strides = Self::strides(&shape);
        let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut idx = lo.clone();
        loop {
            let lin: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
            vmin = vmin.min(self.values[lin]);
            vmax = vmax.max(self.values[lin]);
            let mut a = idx.len();
            loop {
                if a == 0 {
                    return vmax - vmin;
                }
                a -= 1;
                if idx[a] < hi[a] {
                    idx[a] += 1;
                    break;
                }
                idx[a] = lo[a];
            }
        }
    }
}

fn to_domain(warp: &Warp, l: &[f64]) -> Vec<f64> {
    let m = l.len() - 2;
    let (s, d) = (l[m], l[m + 1]);
    let mut q = l[..m].to_vec();
    q.push(warp.apply(s - d / 2.0));
    q.push(warp.apply(s + d / 2.0));
    q
}

/// Largest `|F|` over a sampling of the support box.
fn sample_fmax(delta: &DifferenceFunction) -> f64 {
    let f = &delta.sheared().parent;
    let ext = f.support_extents();
    let per: usize = match ext.len() {
        2 => 201,
        3 => 61,
        _ => 25,
    };
    let total = per.pow(ext.len() as u32);
    let mut best = 0.0f64;
    let mut p = vec![0.0; f.dim()];
    for lin in 0..total {
        let mut r = lin;
        for (i, e) in ext.iter().enumerate().rev() {
            let k = r % per;
            r /= per;
            p[i] = -e + 2.0 * e * k as f64 / (per - 1) as f64;
        }
        best = best.max(f.value(&p).abs());
    }
    best * 1.1 + 1e-9
}

/// Samples `Δ_a` on the warped grid with `resolution` samples per axis
/// (one more on the `δ` axis when `resolution` is even, so that `δ = 0` is
/// a sample and the box is symmetric).
pub fn build_field(delta: &DifferenceFunction, resolution: usize) -> Result<CubicalField> {
    let dd = delta.domain_dim();
    if dd > MAX_DOMAIN_DIM || delta.sheared().parent.fiber_dim() > 0 {
        return Err(Error::UnsupportedDimension(dd));
    }
    if resolution < 16 {
        return Err(Error::InvalidParams(format!("resolution must be >= 16, got {resolution}")));
    }
    let a = delta.height();
    if a == 0.0 || !a.is_finite() {
        return Err(Error::InvalidParams("height 0 is not supported by the cubical engine".into()));
    }
    let f = &delta.sheared().parent;
    let m = f.xn_index();
    let ext = f.support_extents();
    let fmax = sample_fmax(delta);
    let theta = 2.0 * fmax + 1.0;
    let core = f.core_radius();

    // g(c + t) must clear the x_n support and make |a| d exceed θ + 2 max|F|
    // on the δ faces.
    let c = 1.05 * core;
    let t = 0.5 * c;
    let target = (ext[m] + 0.5 * core).max((theta + 2.0 * fmax) / (2.0 * a.abs()) + 0.5 * core);
    let warp = Warp::reaching(c, t, target);
    let half = 3.0 * c;

    let mut axes = Vec::new();
    for &e in &ext[..m] {
        let r = e * (resolution - 1) as f64 / (resolution - 5) as f64;
        axes.push((0..resolution).map(|i| -r + 2.0 * r * i as f64 / (resolution - 1) as f64).collect());
    }
    let k = (resolution - 1) / 2;
    let uniform = |n: usize| -> Vec<f64> { (0..n).map(|i| half * (i as f64 - k as f64) / k as f64).collect() };
    let n_sym = 2 * k + 1;
    axes.push(uniform(n_sym));
    axes.push(uniform(n_sym));
    let zero_index = k;

    let shape: Vec<usize> = axes.iter().map(|a| a.len()).collect();
    let strides = CubicalField::strides(&shape);
    let total: usize = shape.iter().product();
    let eval = |lin: usize| -> f64 {
        let l: Vec<f64> = (0..shape.len()).map(|i| axes[i][(lin / strides[i]) % shape[i]]).collect();
        if l[m + 1] == 0.0 {
            return 0.0;
        }
        delta.value(&to_domain(&warp, &l))
    };
    #[cfg(feature = "parallel")]
    let values: Vec<f64> = (0..total).into_par_iter().map(eval).collect();
    #[cfg(not(feature = "parallel"))]
    let values: Vec<f64> = (0..total).map(eval).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(CubicalField { axes, warp, values, zero_index, height: a, min, max, theta })
}

/// Persistence barcode of a sublevel filtration, one list per degree.
#[derive(Debug, Clone, Default)]
pub struct Barcode {
    /// `(birth, death)` per degree; `death = +∞` for essential classes.
    pub bars: Vec<Vec<(f64, f64)>>,
    /// Sorted filtration values of the cells of each dimension.
    pub cell_values: Vec<Vec<f64>>,
}

impl Barcode {
    pub fn max_degree(&self) -> usize {
        self.bars.len().saturating_sub(1)
    }

    /// `dim H_k(X^τ, X^σ)` for `σ < τ`.
    pub fn relative_rank(&self, k: usize, sigma: f64, tau: f64) -> usize {
        let born = self
            .bars
            .get(k)
            .map(|b| b.iter().filter(|(b, d)| sigma < *b && *b <= tau && tau < *d).count())
            .unwrap_or(0);
        let died = if k == 0 {
            0
        } else {
            self.bars
                .get(k - 1)
                .map(|b| b.iter().filter(|(b, d)| *b <= sigma && sigma < *d && *d <= tau).count())
                .unwrap_or(0)
        };
        born + died
    }

    /// Signed count of cells with value in `(σ, τ]`.
    pub fn euler_of_pair(&self, sigma: f64, tau: f64) -> i64 {
        self.cell_values
            .iter()
            .enumerate()
            .map(|(dim, v)| {
                let c = (v.partition_point(|x| *x <= tau) - v.partition_point(|x| *x <= sigma)) as i64;
                if dim % 2 == 0 {
                    c
                } else {
                    -c
                }
            })
            .sum()
    }

    /// Euler characteristic of the pair from ranks.
    pub fn euler_from_ranks(&self, sigma: f64, tau: f64) -> i64 {
        (0..=self.max_degree())
            .map(|k| {
                let r = self.relative_rank(k, sigma, tau) as i64;
                if k % 2 == 0 {
                    r
                } else {
                    -r
                }
            })
            .sum()
    }

    /// All finite bar endpoints, sorted.
    pub fn events(&self, degrees: &[usize]) -> Vec<f64> {
        let mut v: Vec<f64> = degrees
            .iter()
            .filter_map(|k| self.bars.get(*k))
            .flatten()
            .flat_map(|(b, d)| [*b, *d])
            .filter(|x| x.is_finite())
            .collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup();
        v
    }
}

/// The cubical complex of a sub-box of the grid, in doubled coordinates.
struct BoxComplex {
    shape: Vec<usize>,
    strides: Vec<usize>,
    values: Vec<f64>,
    dims: Vec<u8>,
}

impl BoxComplex {
    /// Sub-box `d_range` (vertex indices, inclusive) of the field.
    fn new(field: &CubicalField, d_range: (usize, usize)) -> Self {
        let vshape = field.shape();
        let daxis = vshape.len() - 1;
        let mut sub = vshape.clone();
        sub[daxis] = d_range.1 - d_range.0 + 1;
        let vstrides = CubicalField::strides(&vshape);
        let shape: Vec<usize> = sub.iter().map(|n| 2 * n - 1).collect();
        let strides = CubicalField::strides(&shape);
        let total: usize = shape.iter().product();
        let mut values = vec![f64::NEG_INFINITY; total];
        let mut dims = vec![0u8; total];
        for (lin, (v, dm)) in values.iter_mut().zip(dims.iter_mut()).enumerate() {
            let mut src = 0;
            let mut odd = false;
            let mut dim = 0;
            for i in 0..shape.len() {
                let c = (lin / strides[i]) % shape[i];
                if c % 2 == 1 {
                    odd = true;
                    dim += 1;
                }
                let vi = c / 2 + if i == daxis { d_range.0 } else { 0 };
                src += vi * vstrides[i];
            }
            *dm = dim;
            if !odd {
                *v = field.values[src];
            }
        }
        // propagate maxima axis by axis onto the odd positions
        for i in 0..shape.len() {
            for lin in 0..total {
                let c = (lin / strides[i]) % shape[i];
                if c % 2 == 1 {
                    let m = values[lin - strides[i]].max(values[lin + strides[i]]);
                    if m > values[lin] {
                        values[lin] = m;
                    }
                }
            }
        }
        BoxComplex { shape, strides, values, dims }
    }

    fn boundary(&self, cell: usize, out: &mut Vec<usize>) {
        out.clear();
        for i in 0..self.shape.len() {
            let c = (cell / self.strides[i]) % self.shape[i];
            if c % 2 == 1 {
                out.push(cell - self.strides[i]);
                out.push(cell + self.strides[i]);
            }
        }
    }

    fn persistence(&self) -> Barcode {
        let n = self.values.len();
        let top = self.shape.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let key = |c: &u32| (self.values[*c as usize], self.dims[*c as usize], *c);
        let cmp = |a: &u32, b: &u32| {
            let (va, da, ia) = key(a);
            let (vb, db, ib) = key(b);
            va.total_cmp(&vb).then(da.cmp(&db)).then(ia.cmp(&ib))
        };
        #[cfg(feature = "parallel")]
        order.par_sort_unstable_by(cmp);
        #[cfg(not(feature = "parallel"))]
        order.sort_unstable_by(cmp);
        let mut pos = vec![0u32; n];
        for (k, c) in order.iter().enumerate() {
            pos[*c as usize] = k as u32;
        }
        const NONE: u32 = u32::MAX;
        let mut pivot_col = vec![NONE; n];
        let mut is_low = vec![false; n];
        let mut cleared = vec![false; n];
        let mut reduced: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut bars: Vec<Vec<(f64, f64)>> = vec![Vec::new(); top + 1];
        let mut buf = Vec::new();
        let mut col: Vec<u32> = Vec::new();
        let mut tmp: Vec<u32> = Vec::new();
        for dim in (1..=top).rev() {
            for j in 0..n {
                let cell = order[j] as usize;
                if self.dims[cell] as usize != dim || cleared[j] {
                    continue;
                }
                self.boundary(cell, &mut buf);
                col.clear();
                col.extend(buf.iter().map(|c| pos[*c]));
                col.sort_unstable();
                while let Some(&low) = col.last() {
                    let k = pivot_col[low as usize];
                    if k == NONE {
                        break;
                    }
                    xor_into(&mut col, &reduced[k as usize], &mut tmp);
                }
                if let Some(&low) = col.last() {
                    pivot_col[low as usize] = j as u32;
                    is_low[low as usize] = true;
                    cleared[low as usize] = true;
                    reduced[j] = col.clone();
                    let birth = self.values[order[low as usize] as usize];
                    let death = self.values[cell];
                    if death > birth {
                        bars[dim - 1].push((birth, death));
                    }
                }
            }
        }
        // Essential classes: cells that neither kill nor get killed.
        let mut negative = vec![false; n];
        for &k in pivot_col.iter().filter(|k| **k != NONE) {
            negative[k as usize] = true;
        }
        for j in 0..n {
            if !is_low[j] && !negative[j] {
                let cell = order[j] as usize;
                bars[self.dims[cell] as usize].push((self.values[cell], f64::INFINITY));
            }
        }
        let mut cell_values = vec![Vec::new(); top + 1];
        for c in 0..n {
            cell_values[self.dims[c] as usize].push(self.values[c]);
        }
        for v in &mut cell_values {
            v.sort_by(|a, b| a.total_cmp(b));
        }
        for b in &mut bars {
            b.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        }
        Barcode { bars, cell_values }
    }
}

fn xor_into(col: &mut Vec<u32>, other: &[u32], tmp: &mut Vec<u32>) {
    tmp.clear();
    let (mut i, mut j) = (0, 0);
    while i < col.len() && j < other.len() {
        match col[i].cmp(&other[j]) {
            std::cmp::Ordering::Less => {
                tmp.push(col[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                tmp.push(other[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    tmp.extend_from_slice(&col[i..]);
    tmp.extend_from_slice(&other[j..]);
    std::mem::swap(col, tmp);
}

/// Barcodes of the `P₊` box, the `P₋` box and the whole grid.
#[derive(Debug, Clone)]
pub struct SplitBarcodes {
    pub plus: Barcode,
    pub minus: Barcode,
    pub whole: Barcode,
}

impl SplitBarcodes {
    pub fn get(&self, side: Side) -> &Barcode {
        match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
            Side::Whole => &self.whole,
        }
    }

    /// Degrees where `rank(whole) ≠ rank(P₊) + rank(P₋)` for the pair `(τ, σ)`.
    pub fn splitting_defects(&self, sigma: f64, tau: f64) -> Vec<(usize, usize, usize)> {
        (0..=self.whole.max_degree())
            .filter_map(|k| {
                let w = self.whole.relative_rank(k, sigma, tau);
                let s = self.plus.relative_rank(k, sigma, tau) + self.minus.relative_rank(k, sigma, tau);
                (w != s).then_some((k, w, s))
            })
            .collect()
    }
}

/// Finite bar endpoints in `[−θ, θ]` (any side) that are not within the
/// given tolerance of a known critical value. Each known value comes with
/// its own tolerance.
pub fn unexplained_events(barcodes: &SplitBarcodes, theta: f64, known: &[(f64, f64)]) -> Vec<f64> {
    let mut out = Vec::new();
    for b in [&barcodes.plus, &barcodes.minus, &barcodes.whole] {
        let degrees: Vec<usize> = (0..=b.max_degree()).collect();
        for v in b.events(&degrees) {
            if v.abs() <= theta && !known.iter().any(|(c, tol)| (v - c).abs() <= *tol) {
                out.push(v);
            }
        }
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Plus,
    Minus,
    Whole,
}

impl Side {
    pub fn label(self) -> &'static str {
        match self {
            Side::Plus => "+",
            Side::Minus => "-",
            Side::Whole => "all",
        }
    }
}

/// Runs persistence on the three boxes, concurrently when enabled.
pub fn persistence(field: &CubicalField) -> SplitBarcodes {
    let last = field.axes.last().unwrap().len() - 1;
    let z = field.zero_index;
    let ranges = [(z, last), (0, z), (0, last)];
    let run = |r: &(usize, usize)| BoxComplex::new(field, *r).persistence();
    #[cfg(feature = "parallel")]
    let mut out: Vec<Barcode> = ranges.par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let mut out: Vec<Barcode> = ranges.iter().map(run).collect();
    let whole = out.pop().unwrap();
    let minus = out.pop().unwrap();
    let plus = out.pop().unwrap();
    SplitBarcodes { plus, minus, whole }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PairKind {
    /// `(Δ^{−η}, Δ^λ)` for `λ < −η`.
    Lower,
    /// `(Δ^Λ, Δ^η)` for `Λ > η`.
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry {
    pub level: f64,
    pub pair: PairKind,
    pub side: Side,
    pub degree: usize,
    pub rank: usize,
}

#[derive(Debug, Clone)]
pub struct RankSweep {
    pub height: f64,
    pub eta: f64,
    pub theta: f64,
    pub levels: Vec<f64>,
    pub entries: Vec<RankEntry>,
    pub barcodes: SplitBarcodes,
}

impl RankSweep {
    /// Rank of a pair at an arbitrary level, straight from the barcodes.
    pub fn rank(&self, pair: PairKind, side: Side, degree: usize, level: f64) -> usize {
        let b = self.barcodes.get(side);
        match pair {
            PairKind::Lower => b.relative_rank(degree, level, -self.eta),
            PairKind::Upper => b.relative_rank(degree, self.eta, level),
        }
    }

    pub fn max_degree(&self) -> usize {
        self.barcodes.whole.max_degree()
    }
}

/// Default sweep levels: `count` per side, evenly spaced in `[η, θ]` and
/// `[−θ, −η]`, slightly off the endpoints.
pub fn default_levels(eta: f64, theta: f64, count: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(2 * count);
    for i in 0..count {
        let t = (i as f64 + 0.5) / count as f64;
        v.push(-theta + t * (theta - eta));
    }
    for i in 0..count {
        let t = (i as f64 + 0.5) / count as f64;
        v.push(eta + t * (theta - eta));
    }
    v
}

/// `η` must separate 0 from every nonzero critical value.
pub fn check_eta(eta: f64, critical_values: &[f64]) -> Result<()> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParams(format!("eta must be positive, got {eta}")));
    }
    for &v in critical_values {
        if v != 0.0 && v.abs() <= eta && v.abs() > 1e-9 {
            return Err(Error::BadEta { eta, value: v });
        }
    }
    Ok(())
}

/// Rank sweep over `levels` for every pair type, side and degree.
pub fn rank_sweep(field: &CubicalField, eta: f64, levels: &[f64], critical_values: &[f64]) -> Result<RankSweep> {
    let barcodes = persistence(field);
    rank_sweep_from(field, barcodes, eta, levels, critical_values)
}

pub fn rank_sweep_from(
    field: &CubicalField,
    barcodes: SplitBarcodes,
    eta: f64,
    levels: &[f64],
    critical_values: &[f64],
) -> Result<RankSweep> {
    check_eta(eta, critical_values)?;
    let mut levels: Vec<f64> = levels.iter().copied().filter(|l| l.abs() > eta).collect();
    levels.sort_by(|a, b| a.total_cmp(b));
    let mut sweep = RankSweep {
        height: field.height,
        eta,
        theta: field.theta,
        levels: levels.clone(),
        entries: Vec::new(),
        barcodes,
    };
    let maxd = sweep.max_degree();
    let mut entries = Vec::new();
    for &l in &levels {
        let pair = if l < 0.0 { PairKind::Lower } else { PairKind::Upper };
        for side in [Side::Plus, Side::Minus, Side::Whole] {
            for k in 0..=maxd {
                entries.push(RankEntry { level: l, pair, side, degree: k, rank: sweep.rank(pair, side, k, l) });
            }
        }
    }
    sweep.entries = entries;
    Ok(sweep)
}

/// Rank functions re-indexed by slice degree `k`: lower pairs read degree
/// `k + N`, upper pairs degree `k + N + 2`.
#[derive(Debug, Clone)]
pub struct FilteredRanks {
    pub fiber_dim: usize,
    pub slice_degrees: usize,
    /// `(level, side, slice degree, rank)` for lower pairs.
    pub lower: Vec<(f64, Side, usize, usize)>,
    pub upper: Vec<(f64, Side, usize, usize)>,
}

pub const LOWER_SHIFT: usize = 0;
pub const UPPER_SHIFT: usize = 2;

pub fn filtered_groups(sweep: &RankSweep, fiber_dim: usize, slice_degrees: usize) -> FilteredRanks {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for &l in &sweep.levels {
        for side in [Side::Plus, Side::Minus] {
            for k in 0..slice_degrees {
                if l < 0.0 {
                    lower.push((l, side, k, sweep.rank(PairKind::Lower, side, k + fiber_dim + LOWER_SHIFT, l)));
                } else {
                    upper.push((l, side, k, sweep.rank(PairKind::Upper, side, k + fiber_dim + UPPER_SHIFT, l)));
                }
            }
        }
    }
    FilteredRanks { fiber_dim, slice_degrees, lower, upper }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warp_round_trip() {
        let w = Warp::reaching(2.0, 1.0, 40.0);
        assert!((w.apply(3.0) - 40.0).abs() < 1e-9);
        for u in [-7.0, -2.5, -1.0, 0.0, 0.3, 2.0, 2.9, 3.5, 10.0] {
            assert!((w.invert(w.apply(u)) - u).abs() < 1e-9);
        }
        assert!((w.apply(1.5) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn barcode_of_a_double_well() {
        // two minima on a line: one essential 0-bar and one finite 0-bar
        let field = CubicalField {
            axes: vec![vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![0.0]],
            warp: Warp { c: 1.0, t: 1.0, kappa: 1.0 },
            values: vec![0.0, 2.0, 1.0, 3.0, 5.0],
            zero_index: 0,
            height: 1.0,
            min: 0.0,
            max: 5.0,
            theta: 10.0,
        };
        let b = BoxComplex::new(&field, (0, 0)).persistence();
        assert_eq!(b.bars[0], vec![(0.0, f64::INFINITY), (1.0, 2.0)]);
        assert_eq!(b.relative_rank(0, -1.0, 1.5), 2);
        assert_eq!(b.relative_rank(1, 1.5, 2.5), 1);
        for (s, t) in [(-1.0, 6.0), (0.5, 2.5), (1.5, 3.5)] {
            assert_eq!(b.euler_from_ranks(s, t), b.euler_of_pair(s, t));
        }
    }

    #[test]
    fn eta_check() {
        assert!(matches!(check_eta(1.0, &[0.5, 10.0]), Err(Error::BadEta { .. })));
        assert!(check_eta(1.0, &[0.0, -10.0, 10.0]).is_ok());
    }
}
