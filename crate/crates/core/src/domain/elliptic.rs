//! Second-order elliptic operator `L u = div(a grad u) + b . grad u + c u`
//! discretized on a uniform grid.
//!
//! The divergence term uses the flux form with face values of `a` taken as
//! the average of the two adjacent nodes; mixed terms `d_x(a12 d_y u)` use
//! centred differences of `a12 d_y u` evaluated at the neighbouring nodes.
//! Drift and reaction are centred and pointwise. Rows of boundary nodes are
//! empty, so the discrete `L u` is zero there (homogeneous Dirichlet).

use crate::domain::field::Snapshot;
use crate::domain::grid::SpatialGrid;
use crate::domain::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Number of unit probe directions used for the 2D ellipticity check.
const PROBE_DIRECTIONS: usize = 64;
/// Relative rounding allowance in the probe test.
const PROBE_SLACK: f64 = 1e-12;

/// Nodal coefficient values of `L`.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipticCoefficients {
    pub a: Vec<[[f64; 2]; 2]>,
    pub b: Vec<[f64; 2]>,
    pub c: Vec<f64>,
}

impl EllipticCoefficients {
    pub fn from_fns(
        grid: &SpatialGrid,
        a: impl Fn([f64; 2]) -> [[f64; 2]; 2],
        b: impl Fn([f64; 2]) -> [f64; 2],
        c: impl Fn([f64; 2]) -> f64,
    ) -> Self {
        let n = grid.n_nodes();
        let xs: Vec<[f64; 2]> = (0..n).map(|i| grid.coords(i)).collect();
        Self {
            a: xs.iter().map(|&x| a(x)).collect(),
            b: xs.iter().map(|&x| b(x)).collect(),
            c: xs.iter().map(|&x| c(x)).collect(),
        }
    }

    /// Isotropic `a(x) I` with scalar drift components and reaction.
    pub fn isotropic(
        grid: &SpatialGrid,
        a: impl Fn([f64; 2]) -> f64,
        b: impl Fn([f64; 2]) -> [f64; 2],
        c: impl Fn([f64; 2]) -> f64,
    ) -> Self {
        Self::from_fns(
            grid,
            |x| {
                let v = a(x);
                [[v, 0.0], [0.0, v]]
            },
            b,
            c,
        )
    }

    pub fn laplacian(grid: &SpatialGrid) -> Self {
        Self::isotropic(grid, |_| 1.0, |_| [0.0, 0.0], |_| 0.0)
    }
}

/// Assembled discrete elliptic operator together with its coefficients.
#[derive(Clone, Debug)]
pub struct EllipticOperator {
    grid: SpatialGrid,
    coeffs: EllipticCoefficients,
    m: f64,
    matrix: CsrMatrix,
}

fn sym_eigen(a: &[[f64; 2]; 2], dim: usize) -> (f64, f64) {
    if dim == 1 {
        return (a[0][0], a[0][0]);
    }
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    (0.5 * tr - disc, 0.5 * tr + disc)
}

fn quad_form(a: &[[f64; 2]; 2], xi: [f64; 2]) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            s += a[i][j] * xi[i] * xi[j];
        }
    }
    s
}

/// Fixed set of unit probe vectors: `±1` in 1D, evenly spread angles in 2D.
pub fn probe_directions(dim: usize) -> Vec<[f64; 2]> {
    if dim == 1 {
        return vec![[1.0, 0.0], [-1.0, 0.0]];
    }
    (0..PROBE_DIRECTIONS)
        .map(|k| {
            let th = std::f64::consts::PI * k as f64 / PROBE_DIRECTIONS as f64;
            [th.cos(), th.sin()]
        })
        .collect()
}

impl EllipticOperator {
    /// Validates symmetry and ellipticity of `a`, then assembles the stencil.
    ///
    /// With `m = None` the smallest admissible ellipticity constant is
    /// derived from the nodal eigenvalues of `a`; otherwise the given `m` is
    /// checked at every node against the probe directions.
    pub fn assemble(grid: &SpatialGrid, coeffs: EllipticCoefficients, m: Option<f64>) -> Result<Self> {
        let n = grid.n_nodes();
        if coeffs.a.len() != n || coeffs.b.len() != n || coeffs.c.len() != n {
            return Err(Error::ShapeMismatch {
                expected: format!("{n} nodal coefficients"),
                got: format!("a: {}, b: {}, c: {}", coeffs.a.len(), coeffs.b.len(), coeffs.c.len()),
            });
        }
        let dim = grid.dim();
        for node in 0..n {
            let a = &coeffs.a[node];
            let finite = a.iter().flatten().all(|v| v.is_finite())
                && coeffs.b[node].iter().all(|v| v.is_finite())
                && coeffs.c[node].is_finite();
            if !finite {
                return Err(Error::NonFinite(format!("coefficients at node {node}")));
            }
            if dim == 2 && (a[0][1] - a[1][0]).abs() > 1e-14 * (1.0 + a[0][1].abs()) {
                return Err(Error::NotSymmetric {
                    node,
                    coords: grid.coords(node),
                });
            }
        }
        let m = match m {
            Some(m) => {
                if !(m.is_finite() && m >= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "ellipticity constant must be finite and >= 1, got {m}"
                    )));
                }
                m
            }
            None => {
                let mut m: f64 = 1.0;
                for node in 0..n {
                    let (lo, hi) = sym_eigen(&coeffs.a[node], dim);
                    if lo <= 0.0 {
                        return Err(Error::NotElliptic {
                            node,
                            coords: grid.coords(node),
                            detail: format!("smallest eigenvalue of a is {lo}"),
                        });
                    }
                    m = m.max(hi).max(1.0 / lo);
                }
                m
            }
        };
        let probes = probe_directions(dim);
        for node in 0..n {
            for &xi in &probes {
                let q = quad_form(&coeffs.a[node], xi);
                if q < (1.0 - PROBE_SLACK) / m || q > m * (1.0 + PROBE_SLACK) {
                    return Err(Error::NotElliptic {
                        node,
                        coords: grid.coords(node),
                        detail: format!("a(xi, xi) = {q} outside [1/m, m] with m = {m} for xi = {xi:?}"),
                    });
                }
            }
        }
        let matrix = assemble_matrix(grid, &coeffs);
        Ok(Self {
            grid: grid.clone(),
            coeffs,
            m,
            matrix,
        })
    }

    pub fn laplacian(grid: &SpatialGrid) -> Self {
        Self::assemble(grid, EllipticCoefficients::laplacian(grid), None).expect("laplacian is elliptic")
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn coefficients(&self) -> &EllipticCoefficients {
        &self.coeffs
    }

    pub fn ellipticity(&self) -> f64 {
        self.m
    }

    /// Full-node stencil matrix (boundary rows empty).
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn has_drift(&self) -> bool {
        self.coeffs.b.iter().any(|b| b[0] != 0.0 || b[1] != 0.0)
    }

    /// Operator with the same `a` and no drift or reaction term.
    pub fn principal_part(&self) -> EllipticOperator {
        let n = self.grid.n_nodes();
        let coeffs = EllipticCoefficients {
            a: self.coeffs.a.clone(),
            b: vec![[0.0; 2]; n],
            c: vec![0.0; n],
        };
        let matrix = assemble_matrix(&self.grid, &coeffs);
        Self {
            grid: self.grid.clone(),
            coeffs,
            m: self.m,
            matrix,
        }
    }

    /// Indices of interior (unknown) nodes.
    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.grid.n_nodes()).filter(|&n| !self.grid.is_boundary(n)).collect()
    }

    /// Stencil restricted to interior unknowns, i.e. with homogeneous
    /// Dirichlet data eliminated.
    pub fn dirichlet_matrix(&self) -> CsrMatrix {
        let interior = self.interior_nodes();
        self.matrix.submatrix(&interior, &interior)
    }

    pub fn apply_slice(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.grid.n_nodes() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} nodes", self.grid.n_nodes()),
                got: format!("{}", u.len()),
            });
        }
        Ok(self.matrix.matvec(u))
    }

    /// `L u` at interior nodes, zero on the boundary.
    pub fn apply(&self, u: &Snapshot) -> Result<Snapshot> {
        if !u.grid().same_shape(&self.grid) {
            return Err(Error::ShapeMismatch {
                expected: format!("{} nodes", self.grid.n_nodes()),
                got: format!("{} nodes", u.grid().n_nodes()),
            });
        }
        Snapshot::new(self.grid.clone(), u.time(), self.matrix.matvec(u.values()))
    }
}

fn assemble_matrix(grid: &SpatialGrid, co: &EllipticCoefficients) -> CsrMatrix {
    let n = grid.n_nodes();
    let dim = grid.dim();
    let rows = (0..n)
        .map(|node| {
            let mut row = Vec::new();
            if grid.is_boundary(node) {
                return row;
            }
            for axis in 0..dim {
                let h = grid.spacing(axis);
                let s = grid.stride(axis);
                let (l, r) = (node - s, node + s);
                let a_l = 0.5 * (co.a[node][axis][axis] + co.a[l][axis][axis]);
                let a_r = 0.5 * (co.a[node][axis][axis] + co.a[r][axis][axis]);
                let b = co.b[node][axis];
                row.push((l, a_l / (h * h) - b / (2.0 * h)));
                row.push((node, -(a_l + a_r) / (h * h)));
                row.push((r, a_r / (h * h) + b / (2.0 * h)));
            }
            if dim == 2 {
                let sx = grid.stride(0);
                let sy = grid.stride(1);
                let w = 1.0 / (4.0 * grid.spacing(0) * grid.spacing(1));
                // d_x(a12 d_y u)
                let (xp, xm) = (node + sx, node - sx);
                row.push((xp + sy, w * co.a[xp][0][1]));
                row.push((xp - sy, -w * co.a[xp][0][1]));
                row.push((xm + sy, -w * co.a[xm][0][1]));
                row.push((xm - sy, w * co.a[xm][0][1]));
                // d_y(a21 d_x u)
                let (yp, ym) = (node + sy, node - sy);
                row.push((yp + sx, w * co.a[yp][1][0]));
                row.push((yp - sx, -w * co.a[yp][1][0]));
                row.push((ym + sx, -w * co.a[ym][1][0]));
                row.push((ym - sx, w * co.a[ym][1][0]));
            }
            row.push((node, co.c[node]));
            row
        })
        .collect();
    CsrMatrix::from_rows(n, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::grid::Face;
    use std::f64::consts::PI;

    fn unit(n: usize) -> SpatialGrid {
        SpatialGrid::interval(0.0, 1.0, n, Face::XHi).unwrap()
    }

    #[test]
    fn laplacian_of_sine_is_second_order() {
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = unit(n);
            let l = EllipticOperator::laplacian(&g);
            let u = Snapshot::from_fn(&g, |x| (PI * x[0]).sin());
            let lu = l.apply(&u).unwrap();
            let err = (0..g.n_nodes())
                .filter(|&i| !g.is_boundary(i))
                .map(|i| (lu.values()[i] + PI * PI * u.values()[i]).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.95, "order {order}");
        }
    }

    #[test]
    fn zero_diffusion_is_rejected() {
        let g = unit(8);
        let co = EllipticCoefficients::isotropic(&g, |_| 0.0, |_| [0.0; 2], |_| 1.0);
        let err = EllipticOperator::assemble(&g, co.clone(), None).unwrap_err();
        assert!(matches!(err, Error::NotElliptic { .. }));
        assert!(matches!(
            EllipticOperator::assemble(&g, co, Some(10.0)).unwrap_err(),
            Error::NotElliptic { .. }
        ));
    }

    #[test]
    fn nonsymmetric_a_is_rejected() {
        let g = SpatialGrid::rectangle((0.0, 1.0), (0.0, 1.0), [4, 4], &[Face::XHi]).unwrap();
        let co = EllipticCoefficients::from_fns(&g, |_| [[2.0, 0.3], [0.1, 2.0]], |_| [0.0; 2], |_| 0.0);
        assert!(matches!(
            EllipticOperator::assemble(&g, co, None).unwrap_err(),
            Error::NotSymmetric { .. }
        ));
    }

    #[test]
    fn ellipticity_bound_reports_node() {
        let g = unit(10);
        let co = EllipticCoefficients::isotropic(&g, |x| 1.0 + 5.0 * x[0], |_| [0.0; 2], |_| 0.0);
        match EllipticOperator::assemble(&g, co.clone(), Some(3.0)).unwrap_err() {
            Error::NotElliptic { coords, .. } => assert!(coords[0] > 0.39),
            e => panic!("unexpected {e}"),
        }
        let op = EllipticOperator::assemble(&g, co, None).unwrap();
        assert!((op.ellipticity() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn variable_coefficient_matches_symbolic_expansion() {
        // a = 1 + x/2, b = 1, c = 0, u = x^2 (1 - x)^2
        // L u = a u'' + a' u' + b u' with
        // u' = 2x - 6x^2 + 4x^3, u'' = 2 - 12x + 12x^2
        let exact = |x: f64| {
            let du = 2.0 * x - 6.0 * x * x + 4.0 * x.powi(3);
            let d2u = 2.0 - 12.0 * x + 12.0 * x * x;
            (1.0 + 0.5 * x) * d2u + 0.5 * du + du
        };
        let mut errs = Vec::new();
        for n in [16, 32, 64, 128] {
            let g = unit(n);
            let co = EllipticCoefficients::isotropic(&g, |x| 1.0 + 0.5 * x[0], |_| [1.0, 0.0], |_| 0.0);
            let l = EllipticOperator::assemble(&g, co, None).unwrap();
            let u = Snapshot::from_fn(&g, |x| (x[0] * (1.0 - x[0])).powi(2));
            let lu = l.apply(&u).unwrap();
            let err = (1..n)
                .map(|i| (lu.values()[i] - exact(g.coords(i)[0])).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.9, "{errs:?}");
        }
    }

    #[test]
    fn cross_terms_are_second_order_and_symmetric() {
        // a = [[2, 0.5 + 0.25 x], [., 1 + y]] on the unit square,
        // u = sin(pi x) sin(pi y)
        let a = |x: [f64; 2]| [[2.0, 0.5 + 0.25 * x[0]], [0.5 + 0.25 * x[0], 1.0 + x[1]]];
        let exact = |p: [f64; 2]| {
            let (x, y) = (p[0], p[1]);
            let (sx, cx, sy, cy) = ((PI * x).sin(), (PI * x).cos(), (PI * y).sin(), (PI * y).cos());
            let uxx = -PI * PI * sx * sy;
            let uyy = uxx;
            let uxy = PI * PI * cx * cy;
            let uy = PI * sx * cy;
            let a12 = 0.5 + 0.25 * x;
            // d_x(2 u_x) + d_x(a12 u_y) + d_y(a12 u_x) + d_y((1 + y) u_y)
            2.0 * uxx + 0.25 * uy + 2.0 * a12 * uxy + uy + (1.0 + y) * uyy
        };
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = SpatialGrid::rectangle((0.0, 1.0), (0.0, 1.0), [n, n], &[Face::XHi]).unwrap();
            let op = EllipticOperator::assemble(&g, EllipticCoefficients::from_fns(&g, a, |_| [0.0; 2], |_| 0.0), None)
                .unwrap();
            assert!(op.dirichlet_matrix().is_symmetric(1e-9));
            let u = Snapshot::from_fn(&g, |p| (PI * p[0]).sin() * (PI * p[1]).sin());
            let lu = op.apply(&u).unwrap();
            let err = (0..g.n_nodes())
                .filter(|&i| !g.is_boundary(i))
                .map(|i| (lu.values()[i] - exact(g.coords(i))).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.85, "{errs:?}");
        }
    }
}
