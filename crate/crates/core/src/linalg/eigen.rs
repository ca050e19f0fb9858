//! Biorthonormal eigensystems of small non-Hermitian matrices.
//!
//! Right eigenvectors solve `H|r> = E|r>`, left eigenvectors solve
//! `H^dagger|l> = E^*|l>`. After [`binormalize`] the pair satisfies
//! `<l_m|r_n> = delta_mn` and `sum_n |r_n><l_n| = 1`.

use std::cmp::Ordering;

use super::matrix::{ComplexMatrix, StateVector, C64, ONE, ZERO};
use super::{poly, qr};
use crate::error::{Error, Result};

/// Knobs for the dense eigensolver.
#[derive(Clone, Copy, Debug)]
pub struct EigOptions {
    /// Largest accepted dimension.
    pub max_dim: usize,
    /// EP guard as a fraction of the spectral diameter.
    pub ep_guard: f64,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            max_dim: 8,
            ep_guard: 1e-8,
        }
    }
}

/// Eigenvalues with their unit-norm right (or left) eigenvectors.
#[derive(Clone, Debug)]
pub struct Eigenpairs {
    pub values: Vec<C64>,
    pub vectors: Vec<StateVector>,
}

/// One time-snapshot of a biorthonormal eigensystem.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSystem {
    pub eigenvalues: Vec<C64>,
    pub rights: Vec<StateVector>,
    pub lefts: Vec<StateVector>,
    /// Symmetry partner `n -> n̄`, when a pseudo/antipseudo structure is known.
    pub pairing: Option<Vec<usize>>,
    /// Set once the ordering and gauge were fixed against a previous snapshot.
    pub anchored: bool,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rights.first().map_or(0, StateVector::len)
    }

    /// `max_mn |<l_m|r_n> - delta_mn|`
    pub fn biorthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (m, l) in self.lefts.iter().enumerate() {
            for (n, r) in self.rights.iter().enumerate() {
                let target = if m == n { ONE } else { ZERO };
                worst = worst.max((l.dot(r) - target).norm());
            }
        }
        worst
    }

    /// Largest entry of `sum_n |r_n><l_n| - 1`.
    pub fn closure_error(&self) -> f64 {
        let d = self.dim();
        let mut acc = ComplexMatrix::zeros(d);
        for (r, l) in self.rights.iter().zip(&self.lefts) {
            acc.add_outer(ONE, r, l);
        }
        acc.max_abs_diff(&ComplexMatrix::identity(d))
    }

    /// Spectral reconstruction `sum_n |r_n> E_n <l_n|`.
    pub fn spectral_matrix(&self) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(self.dim());
        for ((r, l), &e) in self.rights.iter().zip(&self.lefts).zip(&self.eigenvalues) {
            acc.add_outer(e, r, l);
        }
        acc
    }

    /// Coefficients `c_n = <l_n|psi>`.
    pub fn decompose(&self, state: &StateVector) -> Result<Vec<C64>> {
        decompose(state, self)
    }

    /// `sum_n c_n |r_n>`
    pub fn reconstruct(&self, coeffs: &[C64]) -> StateVector {
        let mut out = StateVector::zeros(self.dim());
        for (c, r) in coeffs.iter().zip(&self.rights) {
            out = out.axpy(*c, r);
        }
        out
    }

    /// Applies a permutation: entry `k` of the result is entry `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> EigenSystem {
        let mut inverse = vec![0; perm.len()];
        for (k, &p) in perm.iter().enumerate() {
            inverse[p] = k;
        }
        EigenSystem {
            eigenvalues: perm.iter().map(|&p| self.eigenvalues[p]).collect(),
            rights: perm.iter().map(|&p| self.rights[p].clone()).collect(),
            lefts: perm.iter().map(|&p| self.lefts[p].clone()).collect(),
            pairing: self
                .pairing
                .as_ref()
                .map(|pair| perm.iter().map(|&p| inverse[pair[p]]).collect()),
            anchored: self.anchored,
        }
    }

    /// Rescales state `n` by `c` (right by `c`, left by `1/c^*`), keeping
    /// `<l_n|r_n>` fixed.
    pub fn regauge(&mut self, n: usize, c: C64) {
        self.rights[n] = self.rights[n].scale(c);
        self.lefts[n] = self.lefts[n].scale(ONE / c.conj());
    }
}

/// Total order on eigenvalues: real part first, imaginary part on ties
/// (ties judged relative to `scale`).
pub fn spectral_order(a: C64, b: C64, scale: f64) -> Ordering {
    let tol = 1e-9 * scale.max(f64::MIN_POSITIVE);
    if (a.re - b.re).abs() > tol {
        a.re.partial_cmp(&b.re).unwrap_or(Ordering::Equal)
    } else {
        a.im.partial_cmp(&b.im).unwrap_or(Ordering::Equal)
    }
}

/// Rejects spectra with two eigenvalues inside the EP guard.
pub fn check_separation(values: &[C64], ep_guard: f64) -> Result<()> {
    let mut diameter: f64 = 0.0;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            diameter = diameter.max((a - b).norm());
        }
    }
    let eps = ep_guard * diameter;
    for (i, a) in values.iter().enumerate() {
        for (j, b) in values.iter().enumerate().skip(i + 1) {
            let d = (a - b).norm();
            if d <= eps || diameter == 0.0 {
                return Err(Error::DegenerateSpectrum(i, j, eps));
            }
        }
    }
    Ok(())
}

fn lu_solve_floored(m: &ComplexMatrix, rhs: &[C64]) -> Vec<C64> {
    let n = m.dim();
    let mut a: Vec<C64> = m.as_slice().to_vec();
    let mut b = rhs.to_vec();
    let floor = f64::EPSILON * m.frobenius_norm().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let (p, _) = (k..n)
            .map(|i| (i, a[i * n + k].norm()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        if a[k * n + k].norm() < floor {
            a[k * n + k] = C64::new(floor, 0.0);
        }
        let pivot = a[k * n + k];
        for i in (k + 1)..n {
            let f = a[i * n + k] / pivot;
            if f == ZERO {
                continue;
            }
            for j in k..n {
                let akj = a[k * n + j];
                a[i * n + j] -= f * akj;
            }
            let bk = b[k];
            b[i] -= f * bk;
        }
    }
    for k in (0..n).rev() {
        let s: C64 = ((k + 1)..n).map(|j| a[k * n + j] * b[j]).sum();
        b[k] = (b[k] - s) / a[k * n + k];
    }
    b
}

/// Phase convention for a freshly computed eigenvector: unit norm, largest
/// component real and positive.
fn canonical_gauge(v: StateVector) -> StateVector {
    let v = v.normalized();
    let pivot = v.iter().copied().fold(ZERO, |best, z| {
        if z.norm() > best.norm() * (1.0 + 1e-12) {
            z
        } else {
            best
        }
    });
    if pivot.norm() == 0.0 {
        return v;
    }
    v.scale(pivot.conj() / pivot.norm())
}

/// Inverse iteration for the eigenvector of `h` belonging to `value`.
fn eigenvector(h: &ComplexMatrix, value: C64) -> StateVector {
    let n = h.dim();
    let mut shifted = h.clone();
    for i in 0..n {
        shifted[(i, i)] -= value;
    }
    let mut x: Vec<C64> = (0..n)
        .map(|k| C64::new(1.0 + 0.37 * k as f64, 0.11 * (k * k) as f64 + 0.05))
        .collect();
    let tol = 1e-12 * h.frobenius_norm().max(f64::MIN_POSITIVE);
    for iter in 0..6 {
        let y = lu_solve_floored(&shifted, &x);
        let norm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            break;
        }
        x = y.into_iter().map(|z| z / norm).collect();
        if iter >= 1 {
            let v = StateVector::new(x.clone());
            let res = (&h.mul_vec(&v) - &v.scale(value)).norm();
            if res <= tol {
                break;
            }
        }
    }
    canonical_gauge(StateVector::new(x))
}

/// Right eigenpairs of `h`, ordered by (Re, Im).
pub fn eig(h: &ComplexMatrix) -> Result<Eigenpairs> {
    eig_with(h, &EigOptions::default())
}

pub fn eig_with(h: &ComplexMatrix, opts: &EigOptions) -> Result<Eigenpairs> {
    h.ensure_finite("Hamiltonian")?;
    let n = h.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    if n > opts.max_dim {
        return Err(Error::TooLarge(n, opts.max_dim));
    }
    let scale = h.frobenius_norm();
    let mut values = if n <= 4 {
        if scale == 0.0 {
            vec![ZERO; n]
        } else {
            // work on the unit-norm matrix to keep coefficients O(1)
            let coeffs = poly::characteristic_polynomial(&h.scale(C64::new(1.0 / scale, 0.0)));
            poly::roots(&coeffs).into_iter().map(|z| z * scale).collect()
        }
    } else {
        qr::eigenvalues(h).ok_or(Error::NonFinite("QR iteration did not converge"))?
    };
    if values.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite("eigenvalues"));
    }
    let mut vectors: Vec<StateVector> = values.iter().map(|&e| eigenvector(h, e)).collect();
    // Root finders smear multiple roots by eps^(1/m); the Rayleigh quotient
    // of the converged vector collapses them again so degeneracy is visible.
    for (e, v) in values.iter_mut().zip(&vectors) {
        let hv = h.mul_vec(v);
        let rq = v.dot(&hv) / v.norm_sqr();
        if (&hv - &v.scale(rq)).norm() <= (&hv - &v.scale(*e)).norm() {
            *e = rq;
        }
    }
    check_separation(&values, opts.ep_guard)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| spectral_order(values[a], values[b], scale));
    values = order.iter().map(|&k| values[k]).collect();
    vectors = order.iter().map(|&k| vectors[k].clone()).collect();
    Ok(Eigenpairs { values, vectors })
}

/// Left eigenpairs: eigenvectors of `H^dagger` with eigenvalues `E^*`.
pub fn left_eigensystem(h: &ComplexMatrix) -> Result<Eigenpairs> {
    eig(&h.adjoint())
}

/// Scales index-matched right/left pairs so that `<l_n|r_n> = 1`, splitting
/// the factor symmetrically with the principal square root.
pub fn binormalize(rights: Vec<StateVector>, lefts: Vec<StateVector>, eigenvalues: Vec<C64>) -> Result<EigenSystem> {
    binormalize_with(rights, lefts, eigenvalues, EigOptions::default().ep_guard)
}

pub fn binormalize_with(
    mut rights: Vec<StateVector>,
    mut lefts: Vec<StateVector>,
    eigenvalues: Vec<C64>,
    ep_guard: f64,
) -> Result<EigenSystem> {
    if rights.len() != eigenvalues.len() || lefts.len() != eigenvalues.len() {
        return Err(Error::DimensionMismatch {
            expected: eigenvalues.len(),
            got: rights.len().min(lefts.len()),
        });
    }
    for (n, (r, l)) in rights.iter_mut().zip(lefts.iter_mut()).enumerate() {
        if r.len() != l.len() {
            return Err(Error::DimensionMismatch {
                expected: r.len(),
                got: l.len(),
            });
        }
        let overlap = l.dot(r);
        let scale = l.norm() * r.norm();
        if overlap.norm() < ep_guard * scale || scale == 0.0 {
            return Err(Error::SelfOrthogonal {
                index: n,
                overlap: overlap.norm(),
            });
        }
        let s = overlap.sqrt();
        *r = r.scale(ONE / s);
        *l = l.scale(ONE / s.conj());
    }
    Ok(EigenSystem {
        eigenvalues,
        rights,
        lefts,
        pairing: None,
        anchored: false,
    })
}

/// Full numeric eigensystem: rights, lefts matched by conjugated eigenvalue,
/// binormalized, with eigenvalues refined by the two-sided Rayleigh quotient.
pub fn eigensystem(h: &ComplexMatrix) -> Result<EigenSystem> {
    let right = eig(h)?;
    let left = left_eigensystem(h)?;
    let n = right.values.len();
    let mut used = vec![false; n];
    let mut lefts = Vec::with_capacity(n);
    for &e in &right.values {
        let (best, _) = left
            .values
            .iter()
            .enumerate()
            .filter(|(m, _)| !used[*m])
            .map(|(m, mu)| (m, (mu.conj() - e).norm()))
            .fold((usize::MAX, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        used[best] = true;
        lefts.push(left.vectors[best].clone());
    }
    let mut es = binormalize(right.vectors, lefts, right.values)?;
    for k in 0..n {
        let hr = h.mul_vec(&es.rights[k]);
        es.eigenvalues[k] = es.lefts[k].dot(&hr);
    }
    Ok(es)
}

/// Reorders and rephases `current` to continue `previous`: state `n` is the
/// one maximizing `|<l_n(prev)|r(curr)>|`, and the gauge makes that overlap
/// real and positive.
pub fn match_to_previous(current: &EigenSystem, previous: &EigenSystem) -> Result<EigenSystem> {
    let n = previous.len();
    if current.len() != n || current.dim() != previous.dim() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: current.len(),
        });
    }
    let mut perm = Vec::with_capacity(n);
    let mut taken = vec![false; n];
    for (row, l) in previous.lefts.iter().enumerate() {
        let mut best = (usize::MAX, -1.0);
        let mut second: f64 = 0.0;
        for (col, r) in current.rights.iter().enumerate() {
            let ov = l.dot(r).norm();
            if ov > best.1 {
                second = second.max(best.1);
                best = (col, ov);
            } else {
                second = second.max(ov);
            }
        }
        if n > 1 && best.1 < 2.0 * second || taken[best.0] {
            return Err(Error::AmbiguousMatching {
                row,
                best: best.1,
                second,
            });
        }
        taken[best.0] = true;
        perm.push(best.0);
    }
    let mut out = current.permuted(&perm);
    for k in 0..n {
        let ov = previous.lefts[k].dot(&out.rights[k]);
        if ov.norm() > 0.0 {
            let phase = ov.conj() / ov.norm();
            out.rights[k] = out.rights[k].scale(phase);
            out.lefts[k] = out.lefts[k].scale(phase);
        }
    }
    out.anchored = true;
    Ok(out)
}

/// Coefficients `c_n = <l_n|psi>` of a state in the right eigenbasis.
pub fn decompose(state: &StateVector, es: &EigenSystem) -> Result<Vec<C64>> {
    if state.len() != es.dim() {
        return Err(Error::DimensionMismatch {
            expected: es.dim(),
            got: state.len(),
        });
    }
    Ok(es.lefts.iter().map(|l| l.dot(state)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pseudo_h(w: f64, g: f64) -> ComplexMatrix {
        let a = w / 2f64.sqrt();
        ComplexMatrix::from_rows(&[
            vec![c(0.0, g), c(a, 0.0), ZERO],
            vec![c(a, 0.0), ZERO, c(a, 0.0)],
            vec![ZERO, c(a, 0.0), c(0.0, -g)],
        ])
        .unwrap()
        .scale(c(0.5, 0.0))
    }

    #[test]
    fn diagonal_eigenpairs() {
        let h = ComplexMatrix::from_diagonal(&[c(1.0, 0.0), c(0.0, 2.0), c(-3.0, 0.0)]);
        let ep = eig(&h).unwrap();
        let want = [(c(-3.0, 0.0), 2), (c(0.0, 2.0), 1), (c(1.0, 0.0), 0)];
        for (k, (val, idx)) in want.iter().enumerate() {
            assert!((ep.values[k] - val).norm() < 1e-12);
            let basis = StateVector::basis(3, *idx);
            assert!(ep.vectors[k].max_abs_diff(&basis) < 1e-12);
        }
    }

    #[test]
    fn diagonal_left_eigenvalues_conjugate() {
        let h = ComplexMatrix::from_diagonal(&[c(1.0, 0.0), c(0.0, 2.0), c(-3.0, 0.0)]);
        let left = left_eigensystem(&h).unwrap();
        for want in [c(1.0, 0.0), c(0.0, -2.0), c(-3.0, 0.0)] {
            assert!(left.values.iter().any(|z| (z - want).norm() < 1e-12));
        }
    }

    #[test]
    fn pseudo_model_eigenvalues_from_cubic_oracle() {
        // det(H - E) = -E^3 + E (w^2 - g^2)/4 for this pattern, so the
        // roots are 0 and ±sqrt(w^2-g^2)/2.
        let s3 = 3f64.sqrt() / 2.0;
        let real = eig(&pseudo_h(2.0, 1.0)).unwrap();
        for want in [c(-s3, 0.0), c(0.0, 0.0), c(s3, 0.0)] {
            assert!(
                real.values.iter().any(|z| (z - want).norm() < 1e-12),
                "{:?}",
                real.values
            );
        }
        let cplx = eig(&pseudo_h(1.0, 2.0)).unwrap();
        for want in [c(0.0, -s3), c(0.0, 0.0), c(0.0, s3)] {
            assert!(
                cplx.values.iter().any(|z| (z - want).norm() < 1e-12),
                "{:?}",
                cplx.values
            );
        }
        let left = left_eigensystem(&pseudo_h(1.0, 2.0)).unwrap();
        for want in [c(0.0, s3), c(0.0, 0.0), c(0.0, -s3)] {
            assert!(left.values.iter().any(|z| (z - want).norm() < 1e-12));
        }
    }

    #[test]
    fn rejects_degenerate_and_nonfinite() {
        let h = ComplexMatrix::identity(3);
        assert!(matches!(eig(&h), Err(Error::DegenerateSpectrum(..))));
        let mut bad = ComplexMatrix::identity(2);
        bad[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(eig(&bad), Err(Error::NonFinite(_))));
        let big = ComplexMatrix::zeros(9);
        assert!(matches!(eig(&big), Err(Error::TooLarge(9, 8))));
    }

    #[test]
    fn exceptional_point_is_refused() {
        // 2x2 EP: [[i, 1], [1, -i]] has a double eigenvalue 0
        let h = ComplexMatrix::from_rows(&[vec![c(0.0, 1.0), ONE], vec![ONE, c(0.0, -1.0)]]).unwrap();
        assert!(eig(&h).is_err());
    }

    #[test]
    fn binormalize_identity_and_scaling() {
        let rights: Vec<_> = (0..3).map(|k| StateVector::basis(3, k)).collect();
        let es = binormalize(rights.clone(), rights.clone(), vec![ONE, ZERO, -ONE]).unwrap();
        assert_eq!(es.rights, rights);
        assert!(es.biorthonormality_error() < 1e-15);

        let doubled: Vec<_> = rights.iter().map(|r| r.scale_real(2.0)).collect();
        let es = binormalize(doubled, rights, vec![ONE, ZERO, -ONE]).unwrap();
        assert!(es.biorthonormality_error() < 1e-15);
        assert!(es.closure_error() < 1e-15);
    }

    #[test]
    fn binormalize_detects_self_orthogonal() {
        let r = StateVector::new(vec![ONE, c(0.0, 1.0)]);
        let l = StateVector::new(vec![ONE, c(0.0, 1.0)]).scale(c(1.0, 0.0));
        // <l|r> = 1 + (-i)(i) = 2: fine. Self-orthogonal: l = (1, -i)^* pattern
        assert!(binormalize(vec![r.clone()], vec![l], vec![ZERO]).is_ok());
        let l_bad = StateVector::new(vec![ONE, c(0.0, -1.0)]);
        // <l_bad|r> = 1 + (i)(i) = 0
        assert!(matches!(
            binormalize(vec![r], vec![l_bad], vec![ZERO]),
            Err(Error::SelfOrthogonal { .. })
        ));
    }

    #[test]
    fn full_eigensystem_is_biorthonormal() {
        let es = eigensystem(&pseudo_h(2.0, 1.0)).unwrap();
        assert!(es.biorthonormality_error() < 1e-12);
        assert!(es.closure_error() < 1e-12);
        let h = pseudo_h(2.0, 1.0);
        assert!(es.spectral_matrix().max_abs_diff(&h) < 1e-12);
    }

    #[test]
    fn matching_identity_and_reversal() {
        let es = eigensystem(&pseudo_h(2.0, 1.0)).unwrap();
        let same = match_to_previous(&es, &es).unwrap();
        for k in 0..3 {
            assert!(same.rights[k].max_abs_diff(&es.rights[k]) < 1e-14);
            assert!((same.eigenvalues[k] - es.eigenvalues[k]).norm() == 0.0);
        }
        let reversed = es.permuted(&[2, 1, 0]);
        let back = match_to_previous(&reversed, &es).unwrap();
        for k in 0..3 {
            assert!(back.rights[k].max_abs_diff(&es.rights[k]) < 1e-14);
        }
        // idempotent
        let twice = match_to_previous(&back, &es).unwrap();
        for k in 0..3 {
            assert!(twice.rights[k].max_abs_diff(&back.rights[k]) < 1e-15);
            assert!(twice.lefts[k].max_abs_diff(&back.lefts[k]) < 1e-15);
        }
    }

    #[test]
    fn matching_rejects_ambiguity() {
        let es = eigensystem(&pseudo_h(2.0, 1.0)).unwrap();
        let mut blended = es.clone();
        // state 0 becomes an equal mix of 0 and 1
        blended.rights[0] = (&es.rights[0] + &es.rights[1]).scale_real(0.5);
        assert!(matches!(
            match_to_previous(&blended, &es),
            Err(Error::AmbiguousMatching { .. })
        ));
    }

    #[test]
    fn decompose_examples() {
        let h = pseudo_h(2.0, 1.0);
        let es = eigensystem(&h).unwrap();
        let coeffs = decompose(&es.rights[1], &es).unwrap();
        assert!((coeffs[1] - ONE).norm() < 1e-12);
        assert!(coeffs[0].norm() < 1e-12 && coeffs[2].norm() < 1e-12);
        let zero = decompose(&StateVector::zeros(3), &es).unwrap();
        assert!(zero.iter().all(|z| z.norm() == 0.0));
        let psi = StateVector::basis(3, 0);
        let back = es.reconstruct(&decompose(&psi, &es).unwrap());
        assert!(back.max_abs_diff(&psi) < 1e-10);
        assert!(matches!(
            decompose(&StateVector::zeros(2), &es),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
