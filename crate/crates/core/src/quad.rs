//! Small quadrature and differencing helpers shared by the phase and
//! trajectory code.

use num_complex::Complex64 as C64;

/// Per-interval Simpson rule with explicit midpoint samples.
/// Returns the running integral at every node (first entry 0).
pub(crate) fn simpson_cumulative(grid: &[f64], nodes: &[C64], mids: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = C64::new(0.0, 0.0);
    out.push(acc);
    for i in 0..grid.len().saturating_sub(1) {
        let h = grid[i + 1] - grid[i];
        acc += (nodes[i] + mids[i] * 4.0 + nodes[i + 1]) * (h / 6.0);
        out.push(acc);
    }
    out
}

/// Integral over `[a, b]` of the quadratic through three samples.
fn quadratic_piece(ts: [f64; 3], fs: [f64; 3], a: f64, b: f64) -> f64 {
    // Lagrange basis integrated exactly; shift to `a` for conditioning.
    let x = [ts[0] - a, ts[1] - a, ts[2] - a];
    let l = b - a;
    let mut total = 0.0;
    for j in 0..3 {
        let (p, q) = match j {
            0 => (x[1], x[2]),
            1 => (x[0], x[2]),
            _ => (x[0], x[1]),
        };
        let denom = (x[j] - p) * (x[j] - q);
        // ∫_0^l (s - p)(s - q) ds
        let integral = l * l * l / 3.0 - (p + q) * l * l / 2.0 + p * q * l;
        total += fs[j] * integral / denom;
    }
    total
}

/// Running integral on an arbitrary increasing grid from local quadratic
/// interpolants (both neighbouring stencils averaged where available).
pub(crate) fn quadratic_cumulative(grid: &[f64], f: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * (f[0] + f[1]) * (grid[1] - grid[0]);
        return out;
    }
    for i in 0..n - 1 {
        let (a, b) = (grid[i], grid[i + 1]);
        let left =
            (i >= 1).then(|| quadratic_piece([grid[i - 1], grid[i], grid[i + 1]], [f[i - 1], f[i], f[i + 1]], a, b));
        let right =
            (i + 2 < n).then(|| quadratic_piece([grid[i], grid[i + 1], grid[i + 2]], [f[i], f[i + 1], f[i + 2]], a, b));
        let piece = match (left, right) {
            (Some(x), Some(y)) => 0.5 * (x + y),
            (Some(x), None) | (None, Some(x)) => x,
            (None, None) => unreachable!(),
        };
        out[i + 1] = out[i] + piece;
    }
    out
}

/// Second-order derivative weights at node `i` of a nonuniform grid:
/// returns `(indices, weights)` so that `f'(t_i) ≈ sum w_k f(t_{idx_k})`.
pub(crate) fn derivative_weights(grid: &[f64], i: usize) -> ([usize; 3], [f64; 3]) {
    let n = grid.len();
    let idx = if i == 0 {
        [0, 1, 2]
    } else if i == n - 1 {
        [n - 3, n - 2, n - 1]
    } else {
        [i - 1, i, i + 1]
    };
    let t = grid[i];
    let x = [grid[idx[0]] - t, grid[idx[1]] - t, grid[idx[2]] - t];
    // derivative at 0 of the Lagrange basis polynomials
    let mut w = [0.0; 3];
    for j in 0..3 {
        let (p, q) = match j {
            0 => (x[1], x[2]),
            1 => (x[0], x[2]),
            _ => (x[0], x[1]),
        };
        w[j] = -(p + q) / ((x[j] - p) * (x[j] - q));
    }
    (idx, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_cumulative_exact_on_quadratics() {
        let grid: Vec<f64> = vec![0.0, 0.1, 0.35, 0.5, 0.9, 1.0];
        let f: Vec<f64> = grid.iter().map(|t| 3.0 * t * t - t + 2.0).collect();
        let cum = quadratic_cumulative(&grid, &f);
        for (t, c) in grid.iter().zip(&cum) {
            let exact = t * t * t - 0.5 * t * t + 2.0 * t;
            assert!((c - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn simpson_exact_on_cubics() {
        let grid = [0.0, 0.5, 1.5, 2.0];
        let f = |t: f64| C64::new(t * t * t, -t);
        let nodes: Vec<C64> = grid.iter().map(|&t| f(t)).collect();
        let mids: Vec<C64> = grid.windows(2).map(|w| f(0.5 * (w[0] + w[1]))).collect();
        let cum = simpson_cumulative(&grid, &nodes, &mids);
        assert!((cum[3] - C64::new(4.0, -2.0)).norm() < 1e-14);
    }

    #[test]
    fn derivative_weights_exact_on_quadratics() {
        let grid = [0.0, 0.2, 0.5, 0.6];
        let f = |t: f64| 2.0 * t * t + t;
        for i in 0..4 {
            let (idx, w) = derivative_weights(&grid, i);
            let d: f64 = idx.iter().zip(w).map(|(&k, w)| w * f(grid[k])).sum();
            assert!((d - (4.0 * grid[i] + 1.0)).abs() < 1e-12);
        }
    }
}
