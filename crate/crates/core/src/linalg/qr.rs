//! Hessenberg reduction and shifted QR iteration for eigenvalues of the
//! larger (5..8) matrices.

use super::matrix::{ComplexMatrix, C64, ONE, ZERO};

fn hessenberg(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.dim();
    let mut h = a.clone();
    for k in 0..n.saturating_sub(2) {
        let alpha_norm: f64 = ((k + 1)..n).map(|i| h[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if alpha_norm == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
        // v = x + phase*|x| e1
        let mut v: Vec<C64> = ((k + 1)..n).map(|i| h[(i, k)]).collect();
        v[0] += phase * alpha_norm;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // H <- P H P with P = I - 2 v v^H / (v^H v)
        for j in 0..n {
            let s: C64 = v
                .iter()
                .enumerate()
                .map(|(idx, vi)| vi.conj() * h[(k + 1 + idx, j)])
                .sum();
            let f = s * (2.0 / vnorm2);
            for (idx, vi) in v.iter().enumerate() {
                h[(k + 1 + idx, j)] -= vi * f;
            }
        }
        for i in 0..n {
            let s: C64 = v.iter().enumerate().map(|(idx, vi)| h[(i, k + 1 + idx)] * vi).sum();
            let f = s * (2.0 / vnorm2);
            for (idx, vi) in v.iter().enumerate() {
                h[(i, k + 1 + idx)] -= f * vi.conj();
            }
        }
        for i in (k + 2)..n {
            h[(i, k)] = ZERO;
        }
    }
    h
}

fn givens(a: C64, b: C64) -> (f64, C64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, ZERO);
    }
    if an == 0.0 {
        return (0.0, b.conj() / bn);
    }
    let r = an.hypot(bn);
    (an / r, (a / an) * b.conj() / r)
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    // eigenvalue of [[a, b], [c, d]] closest to d
    let tr_half = (a + d) * 0.5;
    let det = a * d - b * c;
    let disc = (tr_half * tr_half - det).sqrt();
    let l1 = tr_half + disc;
    let l2 = tr_half - disc;
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Eigenvalues by single-shift complex QR on the Hessenberg form.
/// Returns `None` if the iteration fails to converge.
pub fn eigenvalues(a: &ComplexMatrix) -> Option<Vec<C64>> {
    let n = a.dim();
    let mut h = hessenberg(a);
    let mut out = vec![ZERO; n];
    let eps = f64::EPSILON;
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut hi = n as isize - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    while hi >= 0 {
        let hiu = hi as usize;
        if hiu == 0 {
            out[0] = h[(0, 0)];
            break;
        }
        // find the start of the unreduced block
        let mut lo = hiu;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            if sub <= eps * diag.max(eps * scale) {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hiu {
            out[hiu] = h[(hiu, hiu)];
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > 100 * n {
            return None;
        }
        let mu = if iter % 11 == 10 {
            // exceptional shift
            h[(hiu, hiu)] + C64::new(0.75 * h[(hiu, hiu - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(
                h[(hiu - 1, hiu - 1)],
                h[(hiu - 1, hiu)],
                h[(hiu, hiu - 1)],
                h[(hiu, hiu)],
            )
        };
        for k in lo..=hiu {
            h[(k, k)] -= mu;
        }
        let mut rots = Vec::with_capacity(hiu - lo);
        for k in lo..hiu {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..=hiu {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x * c + s * y;
                h[(k + 1, j)] = -s.conj() * x + y * c;
            }
            rots.push((c, s));
        }
        for (idx, &(c, s)) in rots.iter().enumerate() {
            let k = lo + idx;
            let top = (k + 2).min(hiu);
            for i in lo..=top {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * c + y * s.conj();
                h[(i, k + 1)] = -s * x + y * c;
            }
        }
        for k in lo..=hiu {
            h[(k, k)] += mu;
        }
    }
    Some(out)
}
