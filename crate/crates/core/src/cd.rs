//! Counterdiabatic Hamiltonians.
//!
//! For a binormalized eigenpath the drive that carries every adiabatic state
//! exactly is `H0 + H1` with
//!
//! ```text
//! H0 = Σ |E_n^r> E_n <E_n^l|
//! H1 = i Σ ( |∂E_n^r><E_n^l| - <E_n^l|∂E_n^r> |E_n^r><E_n^l| )
//! ```
//!
//! and the phase-dropping drive `i Σ |∂E_n^r><E_n^l|` carries the bare
//! eigenpath. In the pseudo and antipseudo cases the lefts are built from the
//! partner rights through `U`.

use crate::adiabatic::{eigen_jet, EigenJet, Schedule};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64, I, ONE, ZERO};
use crate::quad;
use crate::symmetry::{left_from_right, pair_spectrum, SymmetryKind, SymmetrySpec, PAIRING_TOL, SYMMETRY_TOL};

const BASIS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct CdBundle {
    /// Spectral reconstruction of the instantaneous Hamiltonian.
    pub h0: ComplexMatrix,
    /// Counterdiabatic correction.
    pub h1: ComplexMatrix,
    /// `h0 + h1`
    pub total: ComplexMatrix,
    /// `i Σ |∂E_n^r><E_n^l|`
    pub cd_only: ComplexMatrix,
}

fn assemble(jet: &EigenJet, lefts: &[crate::linalg::StateVector]) -> CdBundle {
    let d = jet.es.dim();
    let mut h0 = ComplexMatrix::zeros(d);
    let mut cd_only = ComplexMatrix::zeros(d);
    let mut diag = ComplexMatrix::zeros(d);
    for n in 0..jet.es.len() {
        let r = &jet.es.rights[n];
        let l = &lefts[n];
        let dr = &jet.d_rights[n];
        h0.add_outer(jet.es.eigenvalues[n], r, l);
        cd_only.add_outer(I, dr, l);
        diag.add_outer(I * l.dot(dr), r, l);
    }
    let h1 = &cd_only - &diag;
    let total = &h0 + &h1;
    CdBundle { h0, h1, total, cd_only }
}

/// Hermitian construction: lefts are the (orthonormal) rights.
pub fn cd_hermitian(jet: &EigenJet) -> Result<CdBundle> {
    let rights = &jet.es.rights;
    let mut worst: f64 = 0.0;
    for (m, a) in rights.iter().enumerate() {
        for (n, b) in rights.iter().enumerate() {
            let target = if m == n { ONE } else { ZERO };
            worst = worst.max((a.dot(b) - target).norm());
        }
    }
    if worst > BASIS_TOL {
        return Err(Error::NotOrthonormal(worst));
    }
    Ok(assemble(jet, rights))
}

/// Generic biorthonormal construction.
pub fn cd_generic(jet: &EigenJet) -> Result<CdBundle> {
    let err = jet.es.biorthonormality_error();
    if err > BASIS_TOL {
        return Err(Error::NotBinormalized(err));
    }
    Ok(assemble(jet, &jet.es.lefts))
}

fn cd_symmetric_with(jet: &EigenJet, spec: &SymmetrySpec) -> Result<CdBundle> {
    let pairing = match &jet.es.pairing {
        Some(p) => p.clone(),
        None => {
            let scale = jet.es.eigenvalues.iter().fold(1.0f64, |m, e| m.max(e.norm()));
            pair_spectrum(&jet.es.eigenvalues, spec.kind, PAIRING_TOL * scale)?
        }
    };
    let (lefts, _) = left_from_right(&jet.es.rights, &pairing, &spec.u)?;
    let mut rebuilt = jet.clone();
    rebuilt.es.lefts = lefts;
    rebuilt.es.pairing = Some(pairing);
    cd_generic(&rebuilt)
}

fn symmetric_spec<S: Schedule + ?Sized>(s: &S, t: f64, kind: SymmetryKind) -> Result<SymmetrySpec> {
    let spec = s
        .symmetry(t)
        .filter(|spec| spec.kind == kind)
        .ok_or(Error::SymmetryViolation(kind.name(), f64::INFINITY))?;
    let check = spec.check(&s.hamiltonian(t), SYMMETRY_TOL)?;
    if !check.holds {
        return Err(Error::SymmetryViolation(kind.name(), check.residual));
    }
    Ok(spec)
}

/// Pseudo-Hermitian drive at `t` from numeric eigenvector derivatives, with
/// lefts `u_n <E_nbar^r| U`.
pub fn cd_pseudo<S: Schedule + ?Sized>(s: &S, t: f64) -> Result<CdBundle> {
    let spec = symmetric_spec(s, t, SymmetryKind::Pseudo)?;
    cd_pseudo_with(&eigen_jet(s, t)?, &spec)
}

/// Pseudo-Hermitian drive from a supplied jet (numeric or analytic).
pub fn cd_pseudo_with(jet: &EigenJet, spec: &SymmetrySpec) -> Result<CdBundle> {
    if spec.kind != SymmetryKind::Pseudo {
        return Err(Error::SymmetryViolation(SymmetryKind::Pseudo.name(), f64::INFINITY));
    }
    cd_symmetric_with(jet, spec)
}

/// `H^p_CD = i Σ |∂E_n^r><E_nbar^r| U_n`
pub fn cd_only_pseudo<S: Schedule + ?Sized>(s: &S, t: f64) -> Result<ComplexMatrix> {
    Ok(cd_pseudo(s, t)?.cd_only)
}

/// Antipseudo-Hermitian drive at `t` (partners `E <-> -E^*`).
pub fn cd_antipseudo<S: Schedule + ?Sized>(s: &S, t: f64) -> Result<CdBundle> {
    let spec = symmetric_spec(s, t, SymmetryKind::Antipseudo)?;
    cd_antipseudo_with(&eigen_jet(s, t)?, &spec)
}

pub fn cd_antipseudo_with(jet: &EigenJet, spec: &SymmetrySpec) -> Result<CdBundle> {
    if spec.kind != SymmetryKind::Antipseudo {
        return Err(Error::SymmetryViolation(SymmetryKind::Antipseudo.name(), f64::INFINITY));
    }
    cd_symmetric_with(jet, spec)
}

/// Largest singular value, by power iteration on `H^dagger H`.
pub fn spectral_norm(h: &ComplexMatrix) -> f64 {
    let n = h.dim();
    let hh = &h.adjoint() * h;
    let mut v = crate::linalg::StateVector::new((0..n).map(|k| C64::new(1.0, 0.1 * k as f64)).collect());
    let mut lambda = 0.0;
    for _ in 0..2000 {
        let w = hh.mul_vec(&v);
        let nrm = w.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w).re / v.norm_sqr();
        v = w.scale_real(1.0 / nrm);
        if (next - lambda).abs() <= 1e-16 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(0.0).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CdResidual {
    /// `max ‖i ∂ψ - H ψ‖ / (‖H‖_2 ‖ψ‖)` over interior nodes
    pub max: f64,
    /// time of the maximum
    pub at: f64,
}

/// Checks `i dψ/dt = H_total ψ` on a reference trajectory using second-order
/// differences; `bundles[k]` belongs to node `k`.
pub fn verify_cd(bundles: &[CdBundle], reference: &Trajectory) -> Result<CdResidual> {
    let n = reference.len();
    if bundles.len() != n {
        return Err(Error::GridMismatch(format!(
            "{} bundles for {n} reference nodes",
            bundles.len()
        )));
    }
    if n < 3 {
        return Err(Error::GridMismatch("need at least three nodes".into()));
    }
    let mut out = CdResidual {
        max: 0.0,
        at: reference.grid[0],
    };
    for i in 1..n - 1 {
        let (idx, w) = quad::derivative_weights(&reference.grid, i);
        let psi = &reference.states[i];
        let mut d = crate::linalg::StateVector::zeros(psi.len());
        for (&k, wk) in idx.iter().zip(w) {
            d = d.axpy(C64::new(wk, 0.0), &reference.states[k]);
        }
        let h = &bundles[i].total;
        let lhs = d.scale(I);
        let rhs = h.mul_vec(psi);
        let scale = spectral_norm(h).max(f64::MIN_POSITIVE) * psi.norm().max(f64::MIN_POSITIVE);
        let r = (&lhs - &rhs).norm() / scale;
        if r > out.max {
            out = CdResidual {
                max: r,
                at: reference.grid[i],
            };
        }
    }
    Ok(out)
}
