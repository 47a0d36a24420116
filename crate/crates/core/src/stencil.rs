//! Second-order finite differences on [`Grid2`] node fields: central in the
//! interior, one-sided at the boundary.

use std::ops::{Add, Mul, Sub};

use crate::metric::Grid2;

/// Index offsets and weights (already divided by the spacing) of the
/// derivative stencil at position `i` of an axis with `n` nodes.
#[inline]
pub fn weights(n: usize, i: usize, h: f64) -> [(usize, f64); 3] {
    let s = 1.0 / h;
    if i == 0 {
        [(0, -1.5 * s), (1, 2.0 * s), (2, -0.5 * s)]
    } else if i == n - 1 {
        [(n - 3, 0.5 * s), (n - 2, -2.0 * s), (n - 1, 1.5 * s)]
    } else {
        [(i - 1, -0.5 * s), (i, 0.0), (i + 1, 0.5 * s)]
    }
}

/// Node indices and weights of `∂_axis` at node `k`.
#[inline]
pub fn node_weights(grid: &Grid2, k: usize, axis: usize) -> [(usize, f64); 3] {
    let (i, j) = grid.ij(k);
    let h = grid.spacing(axis);
    if axis == 0 {
        weights(grid.nx, i, h).map(|(ii, w)| (grid.index(ii, j), w))
    } else {
        weights(grid.ny, j, h).map(|(jj, w)| (grid.index(i, jj), w))
    }
}

/// `∂_axis` of a node field.
pub fn diff<T>(grid: &Grid2, vals: &[T], axis: usize) -> Vec<T>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    (0..grid.len())
        .map(|k| {
            let [(a, wa), (b, wb), (c, wc)] = node_weights(grid, k, axis);
            vals[a] * wa + vals[b] * wb + vals[c] * wc
        })
        .collect()
}

/// Adjoint of [`diff`]: accumulates `Dᵀ g` into `out`.
pub fn diff_transpose_add<T>(grid: &Grid2, g: &[T], axis: usize, out: &mut [T])
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    for (k, gk) in g.iter().enumerate() {
        for (m, w) in node_weights(grid, k, axis) {
            if w != 0.0 {
                out[m] = out[m] + *gk * w;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Rect;

    #[test]
    fn exact_on_quadratics() {
        let grid = Grid2::new(Rect::new([0.0, 2.0], [-1.0, 1.0]).unwrap(), 7, 9).unwrap();
        let f: Vec<f64> = grid.points().iter().map(|p| p.x1 * p.x1 + 3.0 * p.x1 * p.x2 - p.x2 * p.x2).collect();
        let d1 = diff(&grid, &f, 0);
        let d2 = diff(&grid, &f, 1);
        for (k, p) in grid.points().iter().enumerate() {
            assert!((d1[k] - (2.0 * p.x1 + 3.0 * p.x2)).abs() < 1e-12);
            assert!((d2[k] - (3.0 * p.x1 - 2.0 * p.x2)).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let grid = Grid2::new(Rect::UNIT, 6, 5).unwrap();
        let u: Vec<f64> = (0..grid.len()).map(|k| (k as f64 * 0.37).sin()).collect();
        let v: Vec<f64> = (0..grid.len()).map(|k| (k as f64 * 0.11).cos()).collect();
        for axis in 0..2 {
            let du = diff(&grid, &u, axis);
            let mut dtv = vec![0.0; grid.len()];
            diff_transpose_add(&grid, &v, axis, &mut dtv);
            let lhs: f64 = du.iter().zip(&v).map(|(a, b)| a * b).sum();
            let rhs: f64 = u.iter().zip(&dtv).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
