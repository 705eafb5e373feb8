use super::vec::{apply_mask, axpy, dot, norm2};
use crate::error::Result;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GmresReport {
    pub iterations: usize,
    /// Residual norm estimate before the first and after every iteration.
    pub residual_norms: Vec<f64>,
    pub converged: bool,
}

/// Right-preconditioned GMRES without restarts.
///
/// Solves `A x = b` as `(A P^{-1}) y = b`, `x = P^{-1} y`, from a zero initial
/// guess, stopping when the residual norm is at most `tol * |b|` or after
/// `max_dim` iterations. Arnoldi uses modified Gram–Schmidt and the
/// least-squares problem is updated with Givens rotations. All vectors live on
/// the masked subspace.
pub fn gmres_solve(
    mask: &[bool],
    mut apply_a: impl FnMut(&[f64], &mut [f64]) -> Result<()>,
    mut apply_pinv: impl FnMut(&[f64], &mut [f64]) -> Result<()>,
    b: &[f64],
    tol: f64,
    max_dim: usize,
) -> Result<(Vec<f64>, GmresReport)> {
    let n = b.len();
    let mut report = GmresReport::default();
    let mut r0 = b.to_vec();
    apply_mask(mask, &mut r0);
    let beta = norm2(mask, &r0);
    report.residual_norms.push(beta);
    if beta == 0.0 {
        report.converged = true;
        return Ok((vec![0.0; n], report));
    }
    let target = tol * beta;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_dim + 1);
    r0.iter_mut().for_each(|v| *v /= beta);
    basis.push(r0);
    // Hessenberg columns, rotated in place.
    let mut hess: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
    let mut cs: Vec<f64> = Vec::with_capacity(max_dim);
    let mut sn: Vec<f64> = Vec::with_capacity(max_dim);
    let mut g = vec![beta];
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    for j in 0..max_dim {
        apply_pinv(&basis[j], &mut z)?;
        apply_mask(mask, &mut z);
        apply_a(&z, &mut w)?;
        apply_mask(mask, &mut w);
        let mut h = vec![0.0; j + 2];
        for (i, v) in basis.iter().enumerate() {
            h[i] = dot(mask, &w, v);
            axpy(-h[i], v, &mut w);
        }
        h[j + 1] = norm2(mask, &w);
        for i in 0..j {
            let t = cs[i] * h[i] + sn[i] * h[i + 1];
            h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
            h[i] = t;
        }
        let denom = h[j].hypot(h[j + 1]);
        let (c, s) = if denom == 0.0 {
            (1.0, 0.0)
        } else {
            (h[j] / denom, h[j + 1] / denom)
        };
        let sub = h[j + 1];
        h[j] = c * h[j] + s * h[j + 1];
        h[j + 1] = 0.0;
        cs.push(c);
        sn.push(s);
        g.push(-s * g[j]);
        g[j] *= c;
        hess.push(h);
        report.iterations = j + 1;
        let res = g[j + 1].abs();
        report.residual_norms.push(res);
        let breakdown = sub <= 1e-14 * denom.max(f64::MIN_POSITIVE);
        if res <= target || breakdown {
            report.converged = true;
            break;
        }
        w.iter_mut().for_each(|v| *v /= sub);
        basis.push(std::mem::replace(&mut w, vec![0.0; n]));
    }
    // Back substitution for the Krylov coefficients.
    let k = report.iterations;
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for (jj, col) in hess.iter().enumerate().take(k).skip(i + 1) {
            s -= col[i] * y[jj];
        }
        y[i] = if hess[i][i] != 0.0 {
            s / hess[i][i]
        } else {
            0.0
        };
    }
    let mut v = vec![0.0; n];
    for (i, yi) in y.iter().enumerate() {
        axpy(*yi, &basis[i], &mut v);
    }
    let mut x = vec![0.0; n];
    apply_pinv(&v, &mut x)?;
    apply_mask(mask, &mut x);
    Ok((x, report))
}
