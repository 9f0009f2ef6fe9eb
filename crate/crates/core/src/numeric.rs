use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Five-point central difference of a scalar function.
pub(crate) fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, p: &[f64], h: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|i| {
            let x = p[i];
            let mut at = |t: f64| {
                q[i] = x + t;
                let v = f(&q);
                q[i] = x;
                v
            };
            (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
        })
        .collect()
}

/// Five-point central difference of a gradient, symmetrized.
pub(crate) fn fd_hessian(g: &dyn Fn(&[f64]) -> Vec<f64>, p: &[f64], h: f64) -> DMatrix<f64> {
    let n = p.len();
    let mut hess = DMatrix::zeros(n, n);
    let mut q = p.to_vec();
    for j in 0..n {
        let x = p[j];
        let mut at = |t: f64| {
            q[j] = x + t;
            let v = g(&q);
            q[j] = x;
            v
        };
        let (a, b, c, d) = (at(2.0 * h), at(h), at(-h), at(-2.0 * h));
        for i in 0..n {
            hess[(i, j)] = (-a[i] + 8.0 * b[i] - 8.0 * c[i] + d[i]) / (12.0 * h);
        }
    }
    (&hess + hess.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub(crate) fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Counts of (negative, zero, positive) eigenvalues with the scale-relative
/// zero threshold `rel * (1 + spectral radius)`.
pub(crate) fn inertia(ev: &[f64], rel: f64) -> (usize, usize, usize) {
    let rho = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = rel * (1.0 + rho);
    let neg = ev.iter().filter(|v| **v < -tol).count();
    let zero = ev.iter().filter(|v| v.abs() <= tol).count();
    (neg, zero, ev.len() - neg - zero)
}

pub(crate) fn solve(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let x = a.lu().solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub(crate) fn smallest_singular_value(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(*v))
}

/// Unit vector spanning the kernel of a full-rank `(m-1) x m` matrix.
pub(crate) fn null_vector(j: &DMatrix<f64>) -> DVector<f64> {
    let (r, c) = j.shape();
    let mut m = DMatrix::zeros(c, c);
    m.view_mut((0, 0), (r, c)).copy_from(j);
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let k = (0..c)
        .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
        .unwrap();
    vt.row(k).transpose().normalize()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Damped Newton iteration for `r(z) = 0` given a residual/Jacobian callback.
/// Returns the converged point and the final residual norm.
pub(crate) fn newton(
    mut z: DVector<f64>,
    tol: f64,
    max_iter: usize,
    mut rj: impl FnMut(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
) -> Option<(DVector<f64>, f64)> {
    let (mut r, mut j) = rj(&z);
    let mut rn = r.norm();
    for _ in 0..max_iter {
        if rn < tol {
            return Some((z, rn));
        }
        let step = solve(j, &(-&r))?;
        let mut t = 1.0;
        loop {
            let cand = &z + &step * t;
            let (r2, j2) = rj(&cand);
            let rn2 = r2.norm();
            if rn2 < rn || t < 1.0 / 64.0 {
                z = cand;
                r = r2;
                j = j2;
                rn = rn2;
                break;
            }
            t *= 0.5;
        }
        if !rn.is_finite() {
            return None;
        }
    }
    (rn < tol).then_some((z, rn))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_matches_polynomial() {
        let f = |p: &[f64]| p[0].powi(3) * p[1] + p[1] * p[1];
        let g = fd_gradient(&f, &[1.5, -0.5], 1e-3);
        assert!((g[0] - 3.0 * 2.25 * -0.5).abs() < 1e-9);
        assert!((g[1] - (1.5f64.powi(3) - 1.0)).abs() < 1e-9);
        let grad = |p: &[f64]| vec![3.0 * p[0] * p[0] * p[1], p[0].powi(3) + 2.0 * p[1]];
        let h = fd_hessian(&grad, &[1.5, -0.5], 1e-3);
        assert!((h[(0, 1)] - 3.0 * 2.25).abs() < 1e-8);
        assert!((h[(1, 1)] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn newton_finds_root_and_inertia_counts() {
        let (z, _) = newton(DVector::from_vec(vec![1.0, 1.0]), 1e-12, 50, |z| {
            let r = DVector::from_vec(vec![z[0] * z[0] - 2.0, z[1] - z[0]]);
            let j = DMatrix::from_row_slice(2, 2, &[2.0 * z[0], 0.0, -1.0, 1.0]);
            (r, j)
        })
        .unwrap();
        assert!((z[0] - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(inertia(&[-2.0, 1e-12, 3.0], 1e-7), (1, 1, 1));
        let k = null_vector(&DMatrix::from_row_slice(1, 2, &[1.0, 1.0]));
        assert!((k[0] + k[1]).abs() < 1e-12);
    }
}
