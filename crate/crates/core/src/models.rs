//! Three-level STIRAP with gain and loss.
//!
//! ```text
//! H = 1/2 [[ iγ1, Ωp,   0  ],
//!          [ Ωp*, iγ2,  Ωs ],
//!          [ 0,   Ωs*,  iγ3]]
//! ```
//!
//! Two constrained instances have closed-form eigensystems:
//!
//! * pseudo-Hermitian: `γ1 = -γ3 = γ`, `γ2 = 0`, `Ωp = Ωs = ω e^{iφ}/√2`,
//!   symmetric under the anti-diagonal `U(φ)`, with `tanθ = ω/γ`;
//! * antipseudo-Hermitian: `γ1 = γ3 = 0`, `γ2 = 2γ`, real `Ωp = Ω1`,
//!   `Ωs = Ω2`, with `U = diag(1, -1, 1)`, `tanθ = Ω1/Ω2`, `tanφ = Ω/γ`.
//!
//! States are indexed `[ψ0, ψ+, ψ-]` throughout.

use std::f64::consts::SQRT_2;

use crate::adiabatic::{EigenJet, Schedule, Window};
use crate::cd::CdBundle;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, EigenSystem, StateVector, C64, I, ONE, ZERO};
use crate::symmetry::{left_from_right, SymmetryKind, SymmetrySpec};

/// Relative distance to the exceptional point below which a schedule is refused.
pub const EP_FRACTION: f64 = 1e-8;

const VALIDATION_SAMPLES: usize = 2001;

/// A scalar control with its analytic time derivative.
pub trait Pulse: Send + Sync {
    fn value(&self, t: f64) -> f64;
    fn rate(&self, t: f64) -> f64;
}

fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

/// `amp · sech(t/period - shift)`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sech {
    pub amp: f64,
    pub shift: f64,
    pub period: f64,
}

impl Pulse for Sech {
    fn value(&self, t: f64) -> f64 {
        self.amp * sech(t / self.period - self.shift)
    }

    fn rate(&self, t: f64) -> f64 {
        let x = t / self.period - self.shift;
        -self.amp * sech(x) * x.tanh() / self.period
    }
}

/// `scale · [tanh(t/period + w) - tanh(t/period - w)]`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TanhWindow {
    pub half_width: f64,
    pub period: f64,
    pub scale: f64,
}

impl Pulse for TanhWindow {
    fn value(&self, t: f64) -> f64 {
        let x = t / self.period;
        self.scale * ((x + self.half_width).tanh() - (x - self.half_width).tanh())
    }

    fn rate(&self, t: f64) -> f64 {
        let x = t / self.period;
        let a = sech(x + self.half_width);
        let b = sech(x - self.half_width);
        self.scale * (a * a - b * b) / self.period
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constant(pub f64);

impl Pulse for Constant {
    fn value(&self, _t: f64) -> f64 {
        self.0
    }

    fn rate(&self, _t: f64) -> f64 {
        0.0
    }
}

/// `offset + slope · t`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Linear {
    pub offset: f64,
    pub slope: f64,
}

impl Pulse for Linear {
    fn value(&self, t: f64) -> f64 {
        self.offset + self.slope * t
    }

    fn rate(&self, _t: f64) -> f64 {
        self.slope
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StirapParams {
    pub omega_p: C64,
    pub omega_s: C64,
    pub gamma: [f64; 3],
}

impl StirapParams {
    pub fn pseudo(omega: f64, gamma: f64, phi: f64) -> Self {
        let w = C64::from_polar(omega / SQRT_2, phi);
        Self {
            omega_p: w,
            omega_s: w,
            gamma: [gamma, 0.0, -gamma],
        }
    }

    pub fn antipseudo(omega1: f64, omega2: f64, gamma: f64) -> Self {
        Self {
            omega_p: C64::new(omega1, 0.0),
            omega_s: C64::new(omega2, 0.0),
            gamma: [0.0, 2.0 * gamma, 0.0],
        }
    }
}

pub fn stirap_hamiltonian(p: &StirapParams) -> Result<ComplexMatrix> {
    let [g1, g2, g3] = p.gamma;
    let half = 0.5;
    let h = ComplexMatrix::from_rows(&[
        vec![C64::new(0.0, half * g1), p.omega_p * half, ZERO],
        vec![p.omega_p.conj() * half, C64::new(0.0, half * g2), p.omega_s * half],
        vec![ZERO, p.omega_s.conj() * half, C64::new(0.0, half * g3)],
    ])?;
    h.ensure_finite("STIRAP parameters")?;
    Ok(h)
}

/// Control angles and their rates at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Angles {
    pub theta: f64,
    pub theta_dot: f64,
    pub phi: f64,
    pub phi_dot: f64,
}

/// Per-state Berry connection components `(A_θ, A_φ)`, with
/// `A_n = A_θ θ' + A_φ φ'`.
pub type Connections = [(C64, C64); 3];

fn sv(a: C64, b: C64, c: C64) -> StateVector {
    StateVector::new(vec![a, b, c])
}

fn ep_guard_theta(theta: f64) -> Result<()> {
    if (2.0 * theta).cos().abs() < EP_FRACTION {
        return Err(Error::InvalidArgument(format!(
            "θ = {theta} sits on the exceptional point"
        )));
    }
    if theta.sin() <= 0.0 || theta.cos() <= 0.0 {
        return Err(Error::InvalidArgument(format!("θ = {theta} outside (0, π/2)")));
    }
    Ok(())
}

/// `√(-cos 2θ)` on the principal branch (imaginary when θ < π/4).
fn pseudo_r(theta: f64) -> C64 {
    C64::new(-(2.0 * theta).cos(), 0.0).sqrt()
}

/// U(φ): anti-diagonal with `e^{2iφ}` above and `e^{-2iφ}` below.
pub fn pseudo_symmetry_matrix(phi: f64) -> ComplexMatrix {
    let mut u = ComplexMatrix::zeros(3);
    u[(0, 2)] = C64::from_polar(1.0, 2.0 * phi);
    u[(1, 1)] = ONE;
    u[(2, 0)] = C64::from_polar(1.0, -2.0 * phi);
    u
}

/// Right eigenstates `[ψ0, ψ+, ψ-]` of the pseudo instance.
pub fn pseudo_states(theta: f64, phi: f64) -> Result<[StateVector; 3]> {
    ep_guard_theta(theta)?;
    let (s, c) = theta.sin_cos();
    let r = pseudo_r(theta);
    let e = C64::from_polar(1.0, -phi);
    let e2 = e * e;
    let psi0 = sv(-SQRT_2 * s / (2.0 * r), I * c * e / r, SQRT_2 * s * e2 / (2.0 * r));
    let branch = |sign: f64| {
        let a = sign * r - I * c;
        sv(s / (2.0 * r), SQRT_2 * a * e / (2.0 * r), a * a * e2 / (2.0 * s * r))
    };
    Ok([psi0, branch(1.0), branch(-1.0)])
}

/// `(∂_θ ψ_n, ∂_φ ψ_n)` of the pseudo states.
pub fn pseudo_state_derivatives(theta: f64, phi: f64) -> Result<([StateVector; 3], [StateVector; 3])> {
    let states = pseudo_states(theta, phi)?;
    let (s, c) = theta.sin_cos();
    let r = pseudo_r(theta);
    let dr = 2.0 * s * c / r;
    let e = C64::from_polar(1.0, -phi);
    let e2 = e * e;
    let d0 = sv(
        -SQRT_2 / 2.0 * (c / r - s * dr / (r * r)),
        I * e * (-s / r - c * dr / (r * r)),
        SQRT_2 / 2.0 * e2 * (c / r - s * dr / (r * r)),
    );
    let branch = |sign: f64| {
        let a = sign * r - I * c;
        let da = sign * dr + I * s;
        let sr = s * r;
        let dsr = c * r + s * dr;
        sv(
            0.5 * (c / r - s * dr / (r * r)),
            SQRT_2 / 2.0 * e * (da / r - a * dr / (r * r)),
            0.5 * e2 * (2.0 * a * da / sr - a * a * dsr / (sr * sr)),
        )
    };
    let d_theta = [d0, branch(1.0), branch(-1.0)];
    let d_phi = states.map(|v| {
        let a = v.as_slice();
        sv(ZERO, -I * a[1], -2.0 * I * a[2])
    });
    Ok((d_theta, d_phi))
}

/// Closed-form connections: `A_θ0 = 0`, `A_φ0 = 1`,
/// `A_θ± = ∓1/(sinθ r)`, `A_φ± = 1 ∓ i cosθ/r`.
pub fn pseudo_connections(theta: f64) -> Result<Connections> {
    ep_guard_theta(theta)?;
    let (s, c) = theta.sin_cos();
    let r = pseudo_r(theta);
    let branch = |sign: f64| (-sign / (s * r), ONE - sign * I * c / r);
    Ok([(ZERO, ONE), branch(1.0), branch(-1.0)])
}

/// Counterdiabatic term `H_1p` of the pseudo instance.
pub fn pseudo_h1(a: &Angles) -> ComplexMatrix {
    let c2 = (2.0 * a.theta).cos();
    let s = a.theta.sin();
    let s2t = (2.0 * a.theta).sin();
    let e = C64::from_polar(1.0, a.phi);
    let up = -e * C64::new(2.0 * a.theta_dot, a.phi_dot * s2t) / (2.0 * SQRT_2 * c2);
    let lo = e.conj() * C64::new(2.0 * a.theta_dot, -a.phi_dot * s2t) / (2.0 * SQRT_2 * c2);
    let d = C64::new(s * s / c2 * a.phi_dot, 0.0);
    let mut h = ComplexMatrix::zeros(3);
    h[(0, 0)] = d;
    h[(2, 2)] = -d;
    h[(0, 1)] = up;
    h[(1, 2)] = up;
    h[(1, 0)] = lo;
    h[(2, 1)] = lo;
    h
}

/// Phase-dropping drive `H^p_CD = i Σ |∂ψ_n><ψ_nbar| U_n` of the pseudo instance.
pub fn pseudo_hcd(a: &Angles) -> ComplexMatrix {
    let c2 = (2.0 * a.theta).cos();
    let (s, c) = a.theta.sin_cos();
    let e = C64::from_polar(1.0, -a.phi);
    let k = C64::new(0.0, c / (s * c2) * a.theta_dot);
    let lo = e * (SQRT_2 / c2 * a.theta_dot);
    let mut h = ComplexMatrix::zeros(3);
    h[(0, 0)] = k;
    h[(1, 0)] = lo;
    h[(2, 1)] = lo;
    h[(1, 1)] = C64::new(a.phi_dot, 0.0);
    h[(2, 2)] = C64::new(2.0 * a.phi_dot, 0.0) - k;
    h
}

fn antipseudo_branch(phi: f64) -> (C64, C64) {
    let w = C64::new((2.0 * phi).cos(), 0.0).sqrt();
    let q = (2.0 * w).sqrt();
    (w, q)
}

fn ep_guard_phi(phi: f64) -> Result<()> {
    if (2.0 * phi).cos().abs() < EP_FRACTION {
        return Err(Error::InvalidArgument(format!(
            "φ = {phi} sits on the exceptional point"
        )));
    }
    Ok(())
}

/// Antipseudo symmetry matrix `diag(1, -1, 1)`.
pub fn antipseudo_symmetry_matrix() -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&[ONE, -ONE, ONE])
}

/// Right eigenstates `[ψ0, ψ+, ψ-]` of the antipseudo instance.
pub fn antipseudo_states(theta: f64, phi: f64) -> Result<[StateVector; 3]> {
    ep_guard_phi(phi)?;
    let (s, c) = theta.sin_cos();
    let (w, q) = antipseudo_branch(phi);
    let cp = C64::new(phi.cos(), 0.0);
    let psi0 = StateVector::from_real(&[c, 0.0, -s]);
    let branch = |sign: f64| {
        let a = (cp - sign * w).sqrt();
        let b = (cp + sign * w).sqrt();
        sv(s * a / q, I * b / q, c * a / q)
    };
    Ok([psi0, branch(1.0), branch(-1.0)])
}

/// `(∂_θ ψ_n, ∂_φ ψ_n)` of the antipseudo states.
pub fn antipseudo_state_derivatives(theta: f64, phi: f64) -> Result<([StateVector; 3], [StateVector; 3])> {
    ep_guard_phi(phi)?;
    let (s, c) = theta.sin_cos();
    let (w, q) = antipseudo_branch(phi);
    let dw = -(2.0 * phi).sin() / w;
    let dq = dw / q;
    let cp = C64::new(phi.cos(), 0.0);
    let sp = phi.sin();
    let mut d_theta = [
        StateVector::from_real(&[-s, 0.0, -c]),
        StateVector::zeros(3),
        StateVector::zeros(3),
    ];
    let mut d_phi = [StateVector::zeros(3), StateVector::zeros(3), StateVector::zeros(3)];
    for (k, sign) in [(1, 1.0), (2, -1.0)] {
        let a = (cp - sign * w).sqrt();
        let b = (cp + sign * w).sqrt();
        let da = (-sp - sign * dw) / (2.0 * a);
        let db = (-sp + sign * dw) / (2.0 * b);
        let fa = (da * q - a * dq) / (q * q);
        let fb = (db * q - b * dq) / (q * q);
        d_theta[k] = sv(c * a / q, ZERO, -s * a / q);
        d_phi[k] = sv(s * fa, I * fb, c * fa);
    }
    Ok((d_theta, d_phi))
}

/// Counterdiabatic term of the antipseudo instance; it coincides with the
/// phase-dropping drive since all connections vanish.
pub fn antipseudo_h1(a: &Angles) -> ComplexMatrix {
    let c2 = (2.0 * a.phi).cos();
    let (s, c) = a.theta.sin_cos();
    let x = s * a.phi_dot / (2.0 * c2);
    let y = c * a.phi_dot / (2.0 * c2);
    let mut h = ComplexMatrix::zeros(3);
    h[(0, 1)] = C64::new(x, 0.0);
    h[(1, 0)] = C64::new(-x, 0.0);
    h[(0, 2)] = C64::new(0.0, a.theta_dot);
    h[(2, 0)] = C64::new(0.0, -a.theta_dot);
    h[(1, 2)] = C64::new(-y, 0.0);
    h[(2, 1)] = C64::new(y, 0.0);
    h
}

/// Which side of the exceptional point a schedule stays on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// pseudo: real spectrum (ω > γ); antipseudo: imaginary pair (γ > Ω)
    Real,
    /// pseudo: conjugate pair (ω < γ); antipseudo: `E <-> -E*` pair (Ω > γ)
    Complex,
}

impl Regime {
    fn pairing(self) -> Vec<usize> {
        match self {
            Regime::Real => vec![0, 1, 2],
            Regime::Complex => vec![0, 2, 1],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Real => "real",
            Regime::Complex => "complex",
        }
    }
}

/// Classifies `a` vs `b` (`a > b` is `Real`) over the window and refuses
/// sign changes or near-coincidence.
fn validate_regime(window: Window, f: impl Fn(f64) -> (f64, f64)) -> Result<Regime> {
    let mut regime = None;
    for k in 0..VALIDATION_SAMPLES {
        let t = window.start + window.length() * k as f64 / (VALIDATION_SAMPLES - 1) as f64;
        let (a, b) = f(t);
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::NonFinite("schedule"));
        }
        if a <= 0.0 || b < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "schedule amplitudes must be positive (t = {t})"
            )));
        }
        if (a - b).abs() <= EP_FRACTION * a.max(b) {
            return Err(Error::EpCrossing(t));
        }
        let here = if a > b { Regime::Real } else { Regime::Complex };
        match regime {
            None => regime = Some(here),
            Some(r) if r != here => return Err(Error::EpCrossing(t)),
            _ => {}
        }
    }
    Ok(regime.expect("at least one sample"))
}

fn finish_eigensystem(
    eigenvalues: Vec<C64>,
    rights: [StateVector; 3],
    pairing: Vec<usize>,
    u: &ComplexMatrix,
) -> Result<(EigenSystem, Vec<C64>)> {
    let rights = rights.to_vec();
    let (lefts, scalars) = left_from_right(&rights, &pairing, u)?;
    Ok((
        EigenSystem {
            eigenvalues,
            rights,
            lefts,
            pairing: Some(pairing),
            anchored: false,
        },
        scalars,
    ))
}

fn jet_from(t: f64, es: EigenSystem, d: ([StateVector; 3], [StateVector; 3]), a: &Angles) -> EigenJet {
    let (dt, dp) = d;
    let d_rights = (0..3)
        .map(|n| dt[n].scale_real(a.theta_dot).axpy(C64::new(a.phi_dot, 0.0), &dp[n]))
        .collect();
    EigenJet { t, es, d_rights }
}

/// Pseudo-Hermitian instance driven by `ω(t)`, `γ(t)`, `φ(t)`.
pub struct PseudoModel {
    omega: Box<dyn Pulse>,
    gamma: Box<dyn Pulse>,
    phi: Box<dyn Pulse>,
    window: Window,
    regime: Regime,
}

impl PseudoModel {
    pub fn new(
        omega: impl Pulse + 'static,
        gamma: impl Pulse + 'static,
        phi: impl Pulse + 'static,
        window: Window,
    ) -> Result<Self> {
        let regime = validate_regime(window, |t| (omega.value(t), gamma.value(t)))?;
        if gamma.value(window.start) <= 0.0 || gamma.value(window.end) <= 0.0 {
            return Err(Error::InvalidArgument("γ must be positive on the window".into()));
        }
        Ok(Self {
            omega: Box::new(omega),
            gamma: Box::new(gamma),
            phi: Box::new(phi),
            window,
            regime,
        })
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// `(ω, γ, φ)` at `t`
    pub fn controls(&self, t: f64) -> (f64, f64, f64) {
        (self.omega.value(t), self.gamma.value(t), self.phi.value(t))
    }

    pub fn angles(&self, t: f64) -> Angles {
        let (w, g, phi) = self.controls(t);
        let (wd, gd) = (self.omega.rate(t), self.gamma.rate(t));
        Angles {
            theta: w.atan2(g),
            theta_dot: (wd * g - w * gd) / (w * w + g * g),
            phi,
            phi_dot: self.phi.rate(t),
        }
    }

    /// `E0 = 0`, `E± = ±(√(ω²+γ²)/2) √(-cos 2θ)`
    pub fn eigenvalues(&self, t: f64) -> [C64; 3] {
        let (w, g, _) = self.controls(t);
        let half = 0.5 * w.hypot(g);
        let r = pseudo_r(w.atan2(g));
        [ZERO, r * half, -r * half]
    }

    fn eigen_with_scalars(&self, t: f64) -> Result<(EigenSystem, Vec<C64>)> {
        self.window.check(t)?;
        let a = self.angles(t);
        let rights = pseudo_states(a.theta, a.phi).map_err(|_| Error::EpCrossing(t))?;
        finish_eigensystem(
            self.eigenvalues(t).to_vec(),
            rights,
            self.regime.pairing(),
            &pseudo_symmetry_matrix(a.phi),
        )
    }

    pub fn analytic_eigensystem(&self, t: f64) -> Result<EigenSystem> {
        Ok(self.eigen_with_scalars(t)?.0)
    }

    pub fn analytic_jet(&self, t: f64) -> Result<EigenJet> {
        let es = self.analytic_eigensystem(t)?;
        let a = self.angles(t);
        let d = pseudo_state_derivatives(a.theta, a.phi)?;
        Ok(jet_from(t, es, d, &a))
    }

    pub fn analytic_connections(&self, t: f64) -> Result<Connections> {
        self.window.check(t)?;
        pseudo_connections(self.angles(t).theta)
    }

    /// `H_p`, `H_1p`, `H_tp = H_p + H_1p` and `H^p_CD` in closed form.
    pub fn analytic_cd(&self, t: f64) -> Result<CdBundle> {
        self.window.check(t)?;
        let a = self.angles(t);
        let h0 = self.hamiltonian(t);
        let h1 = pseudo_h1(&a);
        Ok(CdBundle {
            total: &h0 + &h1,
            h0,
            h1,
            cd_only: pseudo_hcd(&a),
        })
    }

    pub fn symmetry_spec(&self, t: f64) -> Result<SymmetrySpec> {
        let (_, scalars) = self.eigen_with_scalars(t)?;
        let mut spec = SymmetrySpec::new(pseudo_symmetry_matrix(self.phi.value(t)), SymmetryKind::Pseudo)?;
        spec.state_scalars = scalars;
        Ok(spec)
    }
}

impl Schedule for PseudoModel {
    fn window(&self) -> Window {
        self.window
    }

    fn dim(&self) -> usize {
        3
    }

    fn hamiltonian(&self, t: f64) -> ComplexMatrix {
        let (w, g, phi) = self.controls(t);
        stirap_hamiltonian(&StirapParams::pseudo(w, g, phi))
            .unwrap_or_else(|_| ComplexMatrix::from_fn(3, |_, _| C64::new(f64::NAN, 0.0)))
    }

    fn parameters(&self, t: f64) -> Vec<(&'static str, f64)> {
        let (w, g, phi) = self.controls(t);
        vec![("omega", w), ("gamma", g), ("phi", phi), ("theta", w.atan2(g))]
    }

    fn parameter_rates(&self, t: f64) -> Vec<(&'static str, f64)> {
        let a = self.angles(t);
        vec![
            ("omega", self.omega.rate(t)),
            ("gamma", self.gamma.rate(t)),
            ("phi", a.phi_dot),
            ("theta", a.theta_dot),
        ]
    }

    fn eigensystem(&self, t: f64) -> Result<EigenSystem> {
        self.analytic_eigensystem(t)
    }

    fn symmetry(&self, t: f64) -> Option<SymmetrySpec> {
        self.symmetry_spec(t).ok()
    }
}

/// Antipseudo-Hermitian instance driven by `Ω1(t)`, `Ω2(t)`, `γ(t)`.
pub struct AntipseudoModel {
    omega1: Box<dyn Pulse>,
    omega2: Box<dyn Pulse>,
    gamma: Box<dyn Pulse>,
    window: Window,
    regime: Regime,
}

impl AntipseudoModel {
    pub fn new(
        omega1: impl Pulse + 'static,
        omega2: impl Pulse + 'static,
        gamma: impl Pulse + 'static,
        window: Window,
    ) -> Result<Self> {
        // Real regime here means γ > Ω (both eigenvalues imaginary)
        let regime = validate_regime(window, |t| {
            let o = omega1.value(t).hypot(omega2.value(t));
            (gamma.value(t).max(f64::MIN_POSITIVE), o)
        })
        .map_err(|e| match e {
            Error::InvalidArgument(_) => Error::InvalidArgument("Ω and γ must be positive on the window".into()),
            other => other,
        })?;
        Ok(Self {
            omega1: Box::new(omega1),
            omega2: Box::new(omega2),
            gamma: Box::new(gamma),
            window,
            regime,
        })
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// `(Ω1, Ω2, γ)` at `t`
    pub fn controls(&self, t: f64) -> (f64, f64, f64) {
        (self.omega1.value(t), self.omega2.value(t), self.gamma.value(t))
    }

    pub fn angles(&self, t: f64) -> Angles {
        let (o1, o2, g) = self.controls(t);
        let (o1d, o2d, gd) = (self.omega1.rate(t), self.omega2.rate(t), self.gamma.rate(t));
        let o = o1.hypot(o2);
        let od = (o1 * o1d + o2 * o2d) / o;
        Angles {
            theta: o1.atan2(o2),
            theta_dot: (o1d * o2 - o1 * o2d) / (o * o),
            phi: o.atan2(g),
            phi_dot: (od * g - o * gd) / (o * o + g * g),
        }
    }

    /// `E0 = 0`, `E± = (i/2)(γ ± √(γ² - Ω²))`
    pub fn eigenvalues(&self, t: f64) -> [C64; 3] {
        let (o1, o2, g) = self.controls(t);
        let o = o1.hypot(o2);
        let root = C64::new(g * g - o * o, 0.0).sqrt();
        [ZERO, 0.5 * I * (g + root), 0.5 * I * (g - root)]
    }

    fn eigen_with_scalars(&self, t: f64) -> Result<(EigenSystem, Vec<C64>)> {
        self.window.check(t)?;
        let a = self.angles(t);
        let rights = antipseudo_states(a.theta, a.phi).map_err(|_| Error::EpCrossing(t))?;
        finish_eigensystem(
            self.eigenvalues(t).to_vec(),
            rights,
            self.regime.pairing(),
            &antipseudo_symmetry_matrix(),
        )
    }

    pub fn analytic_eigensystem(&self, t: f64) -> Result<EigenSystem> {
        Ok(self.eigen_with_scalars(t)?.0)
    }

    pub fn analytic_jet(&self, t: f64) -> Result<EigenJet> {
        let es = self.analytic_eigensystem(t)?;
        let a = self.angles(t);
        let d = antipseudo_state_derivatives(a.theta, a.phi)?;
        Ok(jet_from(t, es, d, &a))
    }

    /// All connections vanish.
    pub fn analytic_connections(&self, t: f64) -> Result<Connections> {
        self.window.check(t)?;
        Ok([(ZERO, ZERO); 3])
    }

    /// `H_ap`, `H_1ap`, `H_tap` and `H^ap_CD = H_1ap` in closed form.
    pub fn analytic_cd(&self, t: f64) -> Result<CdBundle> {
        self.window.check(t)?;
        let h0 = self.hamiltonian(t);
        let h1 = antipseudo_h1(&self.angles(t));
        Ok(CdBundle {
            total: &h0 + &h1,
            h0,
            cd_only: h1.clone(),
            h1,
        })
    }

    pub fn symmetry_spec(&self, t: f64) -> Result<SymmetrySpec> {
        let (_, scalars) = self.eigen_with_scalars(t)?;
        let mut spec = SymmetrySpec::new(antipseudo_symmetry_matrix(), SymmetryKind::Antipseudo)?;
        spec.state_scalars = scalars;
        Ok(spec)
    }
}

impl Schedule for AntipseudoModel {
    fn window(&self) -> Window {
        self.window
    }

    fn dim(&self) -> usize {
        3
    }

    fn hamiltonian(&self, t: f64) -> ComplexMatrix {
        let (o1, o2, g) = self.controls(t);
        stirap_hamiltonian(&StirapParams::antipseudo(o1, o2, g))
            .unwrap_or_else(|_| ComplexMatrix::from_fn(3, |_, _| C64::new(f64::NAN, 0.0)))
    }

    fn parameters(&self, t: f64) -> Vec<(&'static str, f64)> {
        let (o1, o2, g) = self.controls(t);
        let a = self.angles(t);
        vec![
            ("omega1", o1),
            ("omega2", o2),
            ("gamma", g),
            ("theta", a.theta),
            ("phi", a.phi),
        ]
    }

    fn parameter_rates(&self, t: f64) -> Vec<(&'static str, f64)> {
        let a = self.angles(t);
        vec![
            ("omega1", self.omega1.rate(t)),
            ("omega2", self.omega2.rate(t)),
            ("gamma", self.gamma.rate(t)),
            ("theta", a.theta_dot),
            ("phi", a.phi_dot),
        ]
    }

    fn eigensystem(&self, t: f64) -> Result<EigenSystem> {
        self.analytic_eigensystem(t)
    }

    fn symmetry(&self, t: f64) -> Option<SymmetrySpec> {
        self.symmetry_spec(t).ok()
    }
}

/// Either instance behind one interface.
pub enum ModelBundle {
    Pseudo(PseudoModel),
    Antipseudo(AntipseudoModel),
}

impl ModelBundle {
    fn schedule(&self) -> &dyn Schedule {
        match self {
            ModelBundle::Pseudo(m) => m,
            ModelBundle::Antipseudo(m) => m,
        }
    }

    pub fn kind(&self) -> SymmetryKind {
        match self {
            ModelBundle::Pseudo(_) => SymmetryKind::Pseudo,
            ModelBundle::Antipseudo(_) => SymmetryKind::Antipseudo,
        }
    }

    pub fn regime(&self) -> Regime {
        match self {
            ModelBundle::Pseudo(m) => m.regime(),
            ModelBundle::Antipseudo(m) => m.regime(),
        }
    }

    pub fn angles(&self, t: f64) -> Angles {
        match self {
            ModelBundle::Pseudo(m) => m.angles(t),
            ModelBundle::Antipseudo(m) => m.angles(t),
        }
    }

    pub fn analytic_eigensystem(&self, t: f64) -> Result<EigenSystem> {
        match self {
            ModelBundle::Pseudo(m) => m.analytic_eigensystem(t),
            ModelBundle::Antipseudo(m) => m.analytic_eigensystem(t),
        }
    }

    pub fn analytic_jet(&self, t: f64) -> Result<EigenJet> {
        match self {
            ModelBundle::Pseudo(m) => m.analytic_jet(t),
            ModelBundle::Antipseudo(m) => m.analytic_jet(t),
        }
    }

    pub fn analytic_connections(&self, t: f64) -> Result<Connections> {
        match self {
            ModelBundle::Pseudo(m) => m.analytic_connections(t),
            ModelBundle::Antipseudo(m) => m.analytic_connections(t),
        }
    }

    pub fn analytic_cd(&self, t: f64) -> Result<CdBundle> {
        match self {
            ModelBundle::Pseudo(m) => m.analytic_cd(t),
            ModelBundle::Antipseudo(m) => m.analytic_cd(t),
        }
    }

    pub fn symmetry_spec(&self, t: f64) -> Result<SymmetrySpec> {
        match self {
            ModelBundle::Pseudo(m) => m.symmetry_spec(t),
            ModelBundle::Antipseudo(m) => m.symmetry_spec(t),
        }
    }

    /// `U(t)` without the state scalars.
    pub fn symmetry_matrix(&self, t: f64) -> ComplexMatrix {
        match self {
            ModelBundle::Pseudo(m) => pseudo_symmetry_matrix(m.controls(t).2),
            ModelBundle::Antipseudo(_) => antipseudo_symmetry_matrix(),
        }
    }
}

impl Schedule for ModelBundle {
    fn window(&self) -> Window {
        self.schedule().window()
    }

    fn dim(&self) -> usize {
        3
    }

    fn hamiltonian(&self, t: f64) -> ComplexMatrix {
        self.schedule().hamiltonian(t)
    }

    fn parameters(&self, t: f64) -> Vec<(&'static str, f64)> {
        self.schedule().parameters(t)
    }

    fn parameter_rates(&self, t: f64) -> Vec<(&'static str, f64)> {
        self.schedule().parameter_rates(t)
    }

    fn eigensystem(&self, t: f64) -> Result<EigenSystem> {
        self.schedule().eigensystem(t)
    }

    fn symmetry(&self, t: f64) -> Option<SymmetrySpec> {
        self.schedule().symmetry(t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    PseudoReal,
    PseudoComplex,
    Antipseudo,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::PseudoReal, Preset::PseudoComplex, Preset::Antipseudo];

    pub fn name(self) -> &'static str {
        match self {
            Preset::PseudoReal => "pseudo-real",
            Preset::PseudoComplex => "pseudo-complex",
            Preset::Antipseudo => "antipseudo",
        }
    }

    /// Pulse time scale `T` in units of `1/Ω0`.
    pub fn period(self) -> f64 {
        match self {
            Preset::PseudoReal => 1.0,
            Preset::PseudoComplex => 2.0,
            Preset::Antipseudo => 5.0,
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model `{s}`")))
    }
}

/// Built-in schedules on `[-half_width·T, half_width·T]`.
pub fn preset_schedule_in(case: Preset, half_width: f64) -> Result<ModelBundle> {
    let t = case.period();
    let window = Window::new(-half_width * t, half_width * t)?;
    let bump = TanhWindow {
        half_width: 1.5,
        period: t,
        scale: 1.0 / t,
    };
    Ok(match case {
        Preset::PseudoReal => {
            let pulse = Sech {
                amp: 3.0,
                shift: 0.0,
                period: t,
            };
            ModelBundle::Pseudo(PseudoModel::new(pulse, bump, Constant(0.0), window)?)
        }
        Preset::PseudoComplex => {
            let pulse = Sech {
                amp: 3.0,
                shift: 0.0,
                period: t,
            };
            ModelBundle::Pseudo(PseudoModel::new(bump, pulse, Constant(0.0), window)?)
        }
        Preset::Antipseudo => {
            let o1 = Sech {
                amp: 5.0,
                shift: 1.5,
                period: t,
            };
            let o2 = Sech {
                amp: 5.0,
                shift: -1.5,
                period: t,
            };
            ModelBundle::Antipseudo(AntipseudoModel::new(o1, o2, bump, window)?)
        }
    })
}

/// Built-in schedules on the default window `[-6T, 6T]`.
pub fn preset_schedule(case: Preset) -> Result<ModelBundle> {
    preset_schedule_in(case, 6.0)
}
