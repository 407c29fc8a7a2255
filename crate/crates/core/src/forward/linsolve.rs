//! Linear solvers for the implicit time step: a tridiagonal factorization
//! for 1D problems and Jacobi-preconditioned Krylov iterations in 2D.

use crate::domain::sparse::CsrMatrix;
use crate::error::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `||A x - b|| / ||b||` (or the absolute residual when `b = 0`).
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let nb = norm(b);
    if nb > 0.0 {
        norm(&r) / nb
    } else {
        norm(&r)
    }
}

/// LU factors of a tridiagonal matrix (no pivoting; the step matrices are
/// diagonally dominant).
#[derive(Clone, Debug)]
pub struct TridiagonalLu {
    lower: Vec<f64>,
    upper: Vec<f64>,
    pivots: Vec<f64>,
}

impl TridiagonalLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n_rows();
        let (lo, up) = a.bandwidth();
        if lo > 1 || up > 1 {
            return Err(Error::Unsupported(format!(
                "tridiagonal factorization of a matrix with bandwidth ({lo}, {up})"
            )));
        }
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut pivots = vec![0.0; n];
        for i in 0..n {
            let sub = if i > 0 { a.get(i, i - 1) } else { 0.0 };
            upper[i] = if i + 1 < n { a.get(i, i + 1) } else { 0.0 };
            let mut d = a.get(i, i);
            if i > 0 {
                lower[i] = sub / pivots[i - 1];
                d -= lower[i] * upper[i - 1];
            }
            if d == 0.0 || !d.is_finite() {
                return Err(Error::SolveFailed {
                    step: 0,
                    residual: f64::NAN,
                    iterations: 0,
                });
            }
            pivots[i] = d;
        }
        Ok(Self { lower, upper, pivots })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y = b.to_vec();
        for i in 1..n {
            y[i] -= self.lower[i] * y[i - 1];
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                y[i] -= self.upper[i] * y[i + 1];
            }
            y[i] /= self.pivots[i];
        }
        y
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KrylovOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

fn jacobi(a: &CsrMatrix) -> Vec<f64> {
    a.diagonal().iter().map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 }).collect()
}

/// Preconditioned conjugate gradients for symmetric positive definite `a`.
pub fn pcg(a: &CsrMatrix, b: &[f64], x0: &[f64], tol: f64, max_iter: usize) -> KrylovOutcome {
    let minv = jacobi(a);
    let nb = norm(b);
    if nb == 0.0 {
        return KrylovOutcome {
            x: vec![0.0; b.len()],
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let mut x = x0.to_vec();
    let ax = a.matvec(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let mut z: Vec<f64> = r.iter().zip(&minv).map(|(p, m)| p * m).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; b.len()];
    let mut res = norm(&r) / nb;
    let mut it = 0;
    while res > tol && it < max_iter {
        a.matvec_into(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..z.len() {
            z[i] = r[i] * minv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
        res = norm(&r) / nb;
    }
    KrylovOutcome {
        x,
        iterations: it,
        residual: res,
        converged: res <= tol,
    }
}

/// Jacobi-preconditioned BiCGSTAB for general nonsymmetric `a`.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], x0: &[f64], tol: f64, max_iter: usize) -> KrylovOutcome {
    let n = b.len();
    let minv = jacobi(a);
    let nb = norm(b);
    if nb == 0.0 {
        return KrylovOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let mut x = x0.to_vec();
    let ax = a.matvec(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut zz = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut res = norm(&r) / nb;
    let mut it = 0;
    while res > tol && it < max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = p[i] * minv[i];
        }
        a.matvec_into(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        it += 1;
        if norm(&s) / nb <= tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            res = relative_residual(a, &x, b);
            break;
        }
        for i in 0..n {
            zz[i] = s[i] * minv[i];
        }
        a.matvec_into(&zz, &mut t);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * y[i] + omega * zz[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm(&r) / nb;
        if omega == 0.0 {
            break;
        }
    }
    KrylovOutcome {
        x,
        iterations: it,
        residual: res,
        converged: res <= tol,
    }
}
