//! Finite-difference weights on uniform grids and axis-wise difference
//! quotients used by the discrete Sobolev norms and the Carleman checkers.

use crate::domain::grid::SpatialGrid;
use crate::error::{Error, Result};

/// Fornberg's recursion: weights `w_j` such that
/// `sum_j w_j f(offsets[j]) ~ f^(order)(0)` for unit spacing.
pub fn fd_weights(offsets: &[f64], order: usize) -> Vec<f64> {
    let n = offsets.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// Second-order accurate stencil for the `order`-th derivative at position
/// `i` of a line with `len` nodes: symmetric where it fits, shifted
/// one-sided near the ends. Returns `(first_index, weights)` for unit
/// spacing.
pub fn line_stencil(i: usize, len: usize, order: usize) -> Result<(usize, Vec<f64>)> {
    if order == 0 {
        return Ok((i, vec![1.0]));
    }
    let half = order.div_ceil(2);
    if i >= half && i + half < len {
        let start = i - half;
        let offsets: Vec<f64> = (0..=2 * half).map(|k| k as f64 - half as f64).collect();
        return Ok((start, fd_weights(&offsets, order)));
    }
    let width = order + 2;
    if width > len {
        return Err(Error::InvalidGrid(format!(
            "{len} nodes are too few for a derivative of order {order}"
        )));
    }
    let start = if i < half { 0 } else { len - width };
    let offsets: Vec<f64> = (0..width).map(|k| (start + k) as f64 - i as f64).collect();
    Ok((start, fd_weights(&offsets, order)))
}

/// `order`-th difference quotient of `u` along `axis` at every node.
pub fn axis_derivative(grid: &SpatialGrid, u: &[f64], axis: usize, order: usize) -> Result<Vec<f64>> {
    if order == 0 {
        return Ok(u.to_vec());
    }
    if axis >= grid.dim() {
        return Err(Error::InvalidArgument(format!("axis {axis} on a {}D grid", grid.dim())));
    }
    let len = grid.axis_len(axis);
    let stride = grid.stride(axis);
    let scale = grid.spacing(axis).powi(order as i32);
    let stencils: Vec<(usize, Vec<f64>)> = (0..len)
        .map(|i| line_stencil(i, len, order))
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; u.len()];
    for (node, o) in out.iter_mut().enumerate() {
        let i = grid.multi_index(node)[axis];
        let base = node - i * stride;
        let (start, w) = &stencils[i];
        let mut acc = 0.0;
        for (k, wk) in w.iter().enumerate() {
            acc += wk * u[base + (start + k) * stride];
        }
        *o = acc / scale;
    }
    Ok(out)
}

/// Mixed difference quotient `D_x^{alpha[0]} D_y^{alpha[1]} u`.
pub fn mixed_derivative(grid: &SpatialGrid, u: &[f64], alpha: [usize; 2]) -> Result<Vec<f64>> {
    let dx = axis_derivative(grid, u, 0, alpha[0])?;
    if alpha[1] == 0 {
        return Ok(dx);
    }
    axis_derivative(grid, &dx, 1, alpha[1])
}

/// All multi-indices with `|alpha| <= order` for the grid's dimension.
pub fn multi_indices(dim: usize, order: usize) -> Vec<[usize; 2]> {
    let mut out = Vec::new();
    for total in 0..=order {
        if dim == 1 {
            out.push([total, 0]);
        } else {
            for ax in (0..=total).rev() {
                out.push([ax, total - ax]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::grid::Face;

    #[test]
    fn classic_weights() {
        let w = fd_weights(&[-1.0, 0.0, 1.0], 2);
        assert_eq!(w, vec![1.0, -2.0, 1.0]);
        let w = fd_weights(&[-2.0, -1.0, 0.0, 1.0, 2.0], 4);
        for (a, b) in w.iter().zip([1.0, -4.0, 6.0, -4.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let w = fd_weights(&[0.0, 1.0, 2.0], 1);
        for (a, b) in w.iter().zip([-1.5, 2.0, -0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn derivatives_exact_on_low_degree_polynomials() {
        // every stencil has at least order + 1 accuracy in the polynomial
        // degree sense, so x^(order + 1) is differentiated exactly
        let g = SpatialGrid::interval(0.0, 1.0, 12, Face::XHi).unwrap();
        for order in 1..=4usize {
            let p = order as i32 + 1;
            let u: Vec<f64> = (0..g.n_nodes()).map(|n| g.coords(n)[0].powi(p)).collect();
            let d = axis_derivative(&g, &u, 0, order).unwrap();
            let falling: f64 = (0..order).map(|k| (p - k as i32) as f64).product();
            for (n, v) in d.iter().enumerate() {
                let x = g.coords(n)[0];
                let exact = falling * x.powi(p - order as i32);
                assert!((v - exact).abs() < 1e-7, "order {order} at {x}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn mixed_on_rectangle() {
        let g = SpatialGrid::rectangle((0.0, 1.0), (0.0, 2.0), [8, 10], &[Face::XHi]).unwrap();
        let u: Vec<f64> = (0..g.n_nodes())
            .map(|n| {
                let [x, y] = g.coords(n);
                x * x * y
            })
            .collect();
        let d = mixed_derivative(&g, &u, [1, 1]).unwrap();
        for (n, v) in d.iter().enumerate() {
            assert!((v - 2.0 * g.coords(n)[0]).abs() < 1e-10);
        }
        assert_eq!(multi_indices(2, 2).len(), 6);
        assert_eq!(multi_indices(1, 4).len(), 5);
    }
}
