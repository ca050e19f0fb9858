//! Pseudo- and antipseudo-Hermitian structure.
//!
//! A Hamiltonian is pseudo-Hermitian with respect to a unitary, Hermitian `U`
//! when `H^dagger = U H U^dagger`, and antipseudo-Hermitian when
//! `H^dagger = -U H U^dagger`. The spectrum then pairs as `E <-> E^*` or
//! `E <-> -E^*`, and the left eigenvector of state `n` is `U` applied to the
//! right eigenvector of its partner.

use crate::error::{Error, Result};
use crate::linalg::{check_separation, eig, ComplexMatrix, EigOptions, EigenSystem, StateVector, C64, I, ONE};

/// Default relative tolerance for symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Default absolute tolerance for pairing eigenvalues.
pub const PAIRING_TOL: f64 = 1e-8;
const MATRIX_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetryKind {
    Pseudo,
    Antipseudo,
}

impl SymmetryKind {
    pub fn name(self) -> &'static str {
        match self {
            SymmetryKind::Pseudo => "pseudo-Hermitian",
            SymmetryKind::Antipseudo => "antipseudo-Hermitian",
        }
    }

    /// Image of `e` under the partner rule.
    pub fn partner_value(self, e: C64) -> C64 {
        match self {
            SymmetryKind::Pseudo => e.conj(),
            SymmetryKind::Antipseudo => -e.conj(),
        }
    }
}

/// Symmetry matrix, kind, and per-state scalars `u_n` with
/// `<E_n^l| = u_n <E_nbar^r| U`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetrySpec {
    pub u: ComplexMatrix,
    pub kind: SymmetryKind,
    pub state_scalars: Vec<C64>,
}

impl SymmetrySpec {
    /// Validates that `u` is unitary and Hermitian.
    pub fn new(u: ComplexMatrix, kind: SymmetryKind) -> Result<Self> {
        validate_symmetry_matrix(&u)?;
        Ok(Self {
            u,
            kind,
            state_scalars: Vec::new(),
        })
    }

    pub fn check(&self, h: &ComplexMatrix, tol: f64) -> Result<SymmetryCheck> {
        match self.kind {
            SymmetryKind::Pseudo => check_pseudo(h, &self.u, tol),
            SymmetryKind::Antipseudo => check_antipseudo(h, &self.u, tol),
        }
    }
}

fn validate_symmetry_matrix(u: &ComplexMatrix) -> Result<()> {
    u.ensure_finite("symmetry matrix")?;
    let d = u.dim();
    let unitarity = (&(&u.adjoint() * u) - &ComplexMatrix::identity(d)).frobenius_norm();
    if unitarity > MATRIX_TOL {
        return Err(Error::BadSymmetryMatrix("unitary", unitarity));
    }
    let hermiticity = (u - &u.adjoint()).frobenius_norm();
    if hermiticity > MATRIX_TOL {
        return Err(Error::BadSymmetryMatrix("Hermitian", hermiticity));
    }
    Ok(())
}

/// Outcome of a symmetry check; the residual is relative to `‖H‖_F`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetryCheck {
    pub holds: bool,
    pub residual: f64,
}

fn check_with_sign(h: &ComplexMatrix, u: &ComplexMatrix, tol: f64, sign: f64) -> Result<SymmetryCheck> {
    if h.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: u.dim(),
        });
    }
    h.ensure_finite("Hamiltonian")?;
    validate_symmetry_matrix(u)?;
    let conj = &(u * h) * &u.adjoint();
    let diff = &h.adjoint() - &conj.scale(C64::new(sign, 0.0));
    let scale = h.frobenius_norm();
    let abs = diff.frobenius_norm();
    let residual = if scale > 0.0 { abs / scale } else { abs };
    Ok(SymmetryCheck {
        holds: abs <= tol * scale,
        residual,
    })
}

/// `‖H^dagger - U H U^dagger‖_F <= tol ‖H‖_F`
pub fn check_pseudo(h: &ComplexMatrix, u: &ComplexMatrix, tol: f64) -> Result<SymmetryCheck> {
    check_with_sign(h, u, tol, 1.0)
}

/// `‖H^dagger + U H U^dagger‖_F <= tol ‖H‖_F`
pub fn check_antipseudo(h: &ComplexMatrix, u: &ComplexMatrix, tol: f64) -> Result<SymmetryCheck> {
    check_with_sign(h, u, tol, -1.0)
}

/// Partner map `n -> nbar` under the kind's conjugation rule. Each value is
/// paired with the nearest image; the result must be an involution.
pub fn pair_spectrum(values: &[C64], kind: SymmetryKind, tol: f64) -> Result<Vec<usize>> {
    let mut pairing = Vec::with_capacity(values.len());
    for (n, &e) in values.iter().enumerate() {
        let target = kind.partner_value(e);
        let (best, dist) = values
            .iter()
            .enumerate()
            .map(|(m, v)| (m, (v - target).norm()))
            .fold((usize::MAX, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        if dist > tol {
            return Err(Error::UnpairableSpectrum(n));
        }
        pairing.push(best);
    }
    for (n, &m) in pairing.iter().enumerate() {
        if pairing[m] != n {
            return Err(Error::UnpairableSpectrum(n));
        }
    }
    Ok(pairing)
}

/// Builds lefts from rights: `|E_n^l> = u_n^* U |E_nbar^r>` with
/// `u_n = 1 / <E_nbar^r|U|E_n^r>`, so that `<E_n^l|E_n^r> = 1`.
///
/// Returns the lefts and the scalars `u_n`.
pub fn left_from_right(
    rights: &[StateVector],
    pairing: &[usize],
    u: &ComplexMatrix,
) -> Result<(Vec<StateVector>, Vec<C64>)> {
    if rights.len() != pairing.len() {
        return Err(Error::DimensionMismatch {
            expected: rights.len(),
            got: pairing.len(),
        });
    }
    let guard = EigOptions::default().ep_guard;
    let mut lefts = Vec::with_capacity(rights.len());
    let mut scalars = Vec::with_capacity(rights.len());
    for (n, r) in rights.iter().enumerate() {
        let partner = rights.get(pairing[n]).ok_or(Error::UnpairableSpectrum(n))?;
        if r.len() != u.dim() {
            return Err(Error::DimensionMismatch {
                expected: u.dim(),
                got: r.len(),
            });
        }
        let u_partner = u.mul_vec(partner);
        let overlap = u_partner.dot(r);
        if overlap.norm() < guard * r.norm() * partner.norm() {
            return Err(Error::SelfOrthogonal {
                index: n,
                overlap: overlap.norm(),
            });
        }
        let un = ONE / overlap;
        lefts.push(u_partner.scale(un.conj()));
        scalars.push(un);
    }
    Ok((lefts, scalars))
}

/// Numeric eigensystem of a symmetric `H` whose lefts come from the
/// symmetry construction rather than from the adjoint eigenproblem.
///
/// The returned spec carries the state scalars.
pub fn symmetric_eigensystem(h: &ComplexMatrix, spec: &SymmetrySpec) -> Result<(EigenSystem, SymmetrySpec)> {
    let check = spec.check(h, SYMMETRY_TOL)?;
    if !check.holds {
        return Err(Error::SymmetryViolation(spec.kind.name(), check.residual));
    }
    let pairs = eig(h)?;
    let tol = PAIRING_TOL.max(1e-10 * h.frobenius_norm());
    let pairing = pair_spectrum(&pairs.values, spec.kind, tol)?;
    let (lefts, scalars) = left_from_right(&pairs.vectors, &pairing, &spec.u)?;
    let mut es = EigenSystem {
        eigenvalues: pairs.values,
        rights: pairs.vectors,
        lefts,
        pairing: Some(pairing),
        anchored: false,
    };
    for k in 0..es.len() {
        es.eigenvalues[k] = es.lefts[k].dot(&h.mul_vec(&es.rights[k]));
    }
    let mut spec = spec.clone();
    spec.state_scalars = scalars;
    Ok((es, spec))
}

/// Splits `H = H_R + i H_I` into Hermitian parts
/// `H_R = (H + H^dagger)/2`, `H_I = (H - H^dagger)/(2i)`.
pub fn hermitian_split(h: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    h.ensure_finite("Hamiltonian")?;
    let ha = h.adjoint();
    let hr = (h + &ha).scale(C64::new(0.5, 0.0));
    let hi = (h - &ha).scale(-I * 0.5);
    Ok((hr, hi))
}

/// Residuals behind [`check_self_normalized`], relative to `‖H‖_F ‖psi‖`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelfNormalization {
    pub holds: bool,
    /// pseudo: `‖H_R psi - E psi‖`; antipseudo: `‖H_R psi‖`
    pub real_residual: f64,
    /// pseudo: `‖H_I psi‖`; antipseudo: `‖H_I psi + i E psi‖`
    pub imag_residual: f64,
    pub self_overlap: f64,
    pub eigen_residual: f64,
}

/// Whether an eigenstate is its own left partner: the common-eigenstate
/// conditions on `H_R`, `H_I` plus unit self-overlap within `10 tol`.
pub fn check_self_normalized(
    h: &ComplexMatrix,
    u: &ComplexMatrix,
    state: &StateVector,
    eigenvalue: C64,
    kind: SymmetryKind,
    tol: f64,
) -> Result<SelfNormalization> {
    if state.len() != h.dim() || u.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: state.len(),
        });
    }
    validate_symmetry_matrix(u)?;
    let scale = h.frobenius_norm().max(f64::MIN_POSITIVE) * state.norm().max(f64::MIN_POSITIVE);
    let hv = h.mul_vec(state);
    let eigen_residual = (&hv - &state.scale(eigenvalue)).norm() / scale;
    if eigen_residual > 1e-8 {
        return Err(Error::NotAnEigenvector(eigen_residual));
    }
    let (hr, hi) = hermitian_split(h)?;
    let hr_v = hr.mul_vec(state);
    let hi_v = hi.mul_vec(state);
    let (real_residual, imag_residual) = match kind {
        SymmetryKind::Pseudo => ((&hr_v - &state.scale(eigenvalue)).norm() / scale, hi_v.norm() / scale),
        SymmetryKind::Antipseudo => (
            hr_v.norm() / scale,
            (&hi_v + &state.scale(I * eigenvalue)).norm() / scale,
        ),
    };
    let self_overlap = state.norm_sqr();
    let holds = real_residual <= tol && imag_residual <= tol && (self_overlap - 1.0).abs() <= 10.0 * tol;
    Ok(SelfNormalization {
        holds,
        real_residual,
        imag_residual,
        self_overlap,
        eigen_residual,
    })
}

/// Checks both multiset identities implied by a symmetry class:
/// the spectrum is closed under the partner rule. Returns the worst mismatch.
pub fn partner_multiset_error(values: &[C64], kind: SymmetryKind) -> f64 {
    let mut images: Vec<C64> = values.iter().map(|&e| kind.partner_value(e)).collect();
    let mut worst: f64 = 0.0;
    for &e in values {
        let (k, d) = images
            .iter()
            .enumerate()
            .map(|(k, v)| (k, (v - e).norm()))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        worst = worst.max(d);
        images.swap_remove(k);
    }
    worst
}

/// Same separation rule as the eigensolver, exposed for callers that build
/// eigensystems analytically.
pub fn ensure_nondegenerate(values: &[C64]) -> Result<()> {
    check_separation(values, EigOptions::default().ep_guard)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;

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

    fn flip() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 0.0, 1.0], &[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0]])
    }

    #[test]
    fn pseudo_checks() {
        let herm = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, -1.0]]);
        let r = check_pseudo(&herm, &ComplexMatrix::identity(2), 1e-12).unwrap();
        assert!(r.holds && r.residual == 0.0);
        assert!(check_pseudo(&pseudo_h(2.0, 1.0), &flip(), 1e-12).unwrap().holds);
        assert!(
            !check_pseudo(&pseudo_h(2.0, 1.0), &ComplexMatrix::identity(3), 1e-9)
                .unwrap()
                .holds
        );
    }

    #[test]
    fn antipseudo_checks() {
        let ih = pseudo_h(2.0, 1.0).scale(I);
        assert!(check_antipseudo(&ih, &flip(), 1e-12).unwrap().holds);
        let herm = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, -1.0]]);
        assert!(
            !check_antipseudo(&herm, &ComplexMatrix::identity(2), 1e-9)
                .unwrap()
                .holds
        );
    }

    #[test]
    fn bad_symmetry_matrix() {
        let u = ComplexMatrix::from_real_rows(&[&[2.0, 0.0], &[0.0, 1.0]]);
        assert!(matches!(
            SymmetrySpec::new(u, SymmetryKind::Pseudo),
            Err(Error::BadSymmetryMatrix("unitary", _))
        ));
        let u = ComplexMatrix::from_rows(&[vec![ZERO, ONE], vec![-ONE, ZERO]]).unwrap();
        assert!(matches!(
            SymmetrySpec::new(u, SymmetryKind::Pseudo),
            Err(Error::BadSymmetryMatrix("Hermitian", _))
        ));
    }

    #[test]
    fn pairing_examples() {
        let s3 = 3f64.sqrt() / 2.0;
        let real = pair_spectrum(&[c(-s3, 0.0), ZERO, c(s3, 0.0)], SymmetryKind::Pseudo, 1e-8).unwrap();
        assert_eq!(real, vec![0, 1, 2]);
        let cplx = pair_spectrum(&[c(0.0, -s3), ZERO, c(0.0, s3)], SymmetryKind::Pseudo, 1e-8).unwrap();
        assert_eq!(cplx, vec![2, 1, 0]);
        let (g, om) = (2.0f64, 1.0f64);
        let root = (g * g - om * om).sqrt();
        let anti = [ZERO, c(0.0, (g + root) / 2.0), c(0.0, (g - root) / 2.0)];
        assert_eq!(
            pair_spectrum(&anti, SymmetryKind::Antipseudo, 1e-8).unwrap(),
            vec![0, 1, 2]
        );
        assert!(matches!(
            pair_spectrum(&[c(1.0, 1.0), ZERO], SymmetryKind::Pseudo, 1e-8),
            Err(Error::UnpairableSpectrum(0))
        ));
    }

    #[test]
    fn hermitian_lefts_are_rights() {
        let h = ComplexMatrix::from_real_rows(&[&[1.0, 0.5, 0.0], &[0.5, 0.0, 0.2], &[0.0, 0.2, -1.0]]);
        let spec = SymmetrySpec::new(ComplexMatrix::identity(3), SymmetryKind::Pseudo).unwrap();
        let (es, spec) = symmetric_eigensystem(&h, &spec).unwrap();
        for k in 0..3 {
            assert!(es.lefts[k].max_abs_diff(&es.rights[k]) < 1e-12);
            assert!((spec.state_scalars[k] - ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn symmetric_lefts_match_numeric() {
        for (w, g) in [(2.0, 1.0), (1.0, 2.0)] {
            let h = pseudo_h(w, g);
            let spec = SymmetrySpec::new(flip(), SymmetryKind::Pseudo).unwrap();
            let (es, _) = symmetric_eigensystem(&h, &spec).unwrap();
            assert!(es.biorthonormality_error() < 1e-9);
            assert!(es.closure_error() < 1e-9);
            let numeric = crate::linalg::eigensystem(&h).unwrap();
            // same states up to the per-state scalar
            for k in 0..3 {
                let ratio = es.rights[k].dot(&numeric.rights[k]) / es.rights[k].norm_sqr();
                assert!(numeric.rights[k].max_abs_diff(&es.rights[k].scale(ratio)) < 1e-9);
                assert!(numeric.lefts[k].max_abs_diff(&es.lefts[k].scale(ONE / ratio.conj())) < 1e-9);
            }
        }
    }

    #[test]
    fn split_examples() {
        let herm = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, -1.0]]);
        let (hr, hi) = hermitian_split(&herm).unwrap();
        assert_eq!(hr, herm);
        assert!(hi.max_abs() == 0.0);
        let (hr, hi) = hermitian_split(&herm.scale(I)).unwrap();
        assert!(hr.max_abs() < 1e-15);
        assert!(hi.max_abs_diff(&herm) < 1e-15);
    }

    #[test]
    fn self_normalized_hermitian() {
        let h = ComplexMatrix::from_real_rows(&[&[1.0, 0.5], &[0.5, -1.0]]);
        let pairs = eig(&h).unwrap();
        for (v, e) in pairs.vectors.iter().zip(&pairs.values) {
            let r = check_self_normalized(&h, &ComplexMatrix::identity(2), v, *e, SymmetryKind::Pseudo, 1e-9).unwrap();
            assert!(r.holds, "{r:?}");
        }
        let bogus = StateVector::basis(2, 0);
        assert!(matches!(
            check_self_normalized(&h, &ComplexMatrix::identity(2), &bogus, ONE, SymmetryKind::Pseudo, 1e-9),
            Err(Error::NotAnEigenvector(_))
        ));
    }

    #[test]
    fn multiset_error() {
        let s3 = 3f64.sqrt() / 2.0;
        assert_eq!(
            partner_multiset_error(&[c(0.0, -s3), ZERO, c(0.0, s3)], SymmetryKind::Pseudo),
            0.0
        );
        assert!(partner_multiset_error(&[c(1.0, 1.0), ZERO], SymmetryKind::Pseudo) > 1.0);
    }
}
