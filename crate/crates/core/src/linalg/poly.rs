//! Characteristic polynomial and polynomial root finding for the small-matrix
//! eigensolver path.

use super::matrix::{ComplexMatrix, C64, ONE, ZERO};

/// Monic characteristic polynomial `det(zI - A)` by Faddeev–LeVerrier.
///
/// Coefficients are returned in ascending order, `c[n] == 1`.
pub fn characteristic_polynomial(a: &ComplexMatrix) -> Vec<C64> {
    let n = a.dim();
    let mut coeffs = vec![ZERO; n + 1];
    coeffs[n] = ONE;
    let mut m = ComplexMatrix::zeros(n);
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = a * &m;
        for i in 0..n {
            next[(i, i)] += coeffs[n - k + 1];
        }
        m = next;
        let am = a * &m;
        coeffs[n - k] = -am.trace() / k as f64;
    }
    coeffs
}

/// Evaluates `p(z)` and `p'(z)` by Horner's rule.
pub fn eval_with_derivative(coeffs: &[C64], z: C64) -> (C64, C64) {
    let mut p = ZERO;
    let mut dp = ZERO;
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All roots of a monic polynomial via Aberth–Ehrlich iteration, followed by
/// a few Newton steps on each root.
pub fn roots(coeffs: &[C64]) -> Vec<C64> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![-coeffs[0] / coeffs[1]];
    }
    let center = -coeffs[n - 1] / (n as f64 * coeffs[n]);
    // Cauchy bound on |z - center| is awkward; the plain bound is enough to
    // seed the iteration.
    let radius = 1.0 + coeffs[..n].iter().map(|c| (c / coeffs[n]).norm()).fold(0.0, f64::max);
    let mut z: Vec<C64> = (0..n)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            center + C64::from_polar(0.5 * radius, angle)
        })
        .collect();

    for _ in 0..500 {
        let mut max_step: f64 = 0.0;
        for k in 0..n {
            let (p, dp) = eval_with_derivative(coeffs, z[k]);
            if p == ZERO {
                continue;
            }
            let ratio = p / dp;
            let repulsion: C64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| {
                    let d = z[k] - z[j];
                    if d == ZERO {
                        ZERO
                    } else {
                        ONE / d
                    }
                })
                .sum();
            let denom = ONE - ratio * repulsion;
            let step = if denom.norm() > 0.0 && ratio.is_finite() {
                ratio / denom
            } else {
                ZERO
            };
            if step.is_finite() {
                z[k] -= step;
                max_step = max_step.max(step.norm() / (1.0 + z[k].norm()));
            }
        }
        if max_step < 1e-16 {
            break;
        }
    }

    for root in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = eval_with_derivative(coeffs, *root);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            if !step.is_finite() {
                break;
            }
            *root -= step;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn charpoly_of_diagonal() {
        let a = ComplexMatrix::from_diagonal(&[c(1.0, 0.0), c(0.0, 2.0), c(-3.0, 0.0)]);
        let p = characteristic_polynomial(&a);
        // (z-1)(z-2i)(z+3) = z^3 + (2-2i) z^2 + (-3-4i) z + 6i
        let expect = [c(0.0, 6.0), c(-3.0, -4.0), c(2.0, -2.0), c(1.0, 0.0)];
        for (got, want) in p.iter().zip(expect) {
            assert!((got - want).norm() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn roots_of_cubic() {
        let p = [c(0.0, 6.0), c(-3.0, -4.0), c(2.0, -2.0), c(1.0, 0.0)];
        let mut r = roots(&p);
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        let want = [c(-3.0, 0.0), c(0.0, 2.0), c(1.0, 0.0)];
        for (got, w) in r.iter().zip(want) {
            assert!((got - w).norm() < 1e-12, "{got} vs {w}");
        }
    }

    #[test]
    fn roots_of_linear_and_quadratic() {
        assert!((roots(&[c(2.0, 0.0), ONE])[0] - c(-2.0, 0.0)).norm() < 1e-15);
        let r = roots(&[ONE, ZERO, ONE]);
        assert!(r.iter().any(|z| (z - c(0.0, 1.0)).norm() < 1e-12));
        assert!(r.iter().any(|z| (z - c(0.0, -1.0)).norm() < 1e-12));
    }
}
