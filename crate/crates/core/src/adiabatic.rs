//! Schedules, eigenvector derivatives, the non-Hermitian adiabatic metric,
//! Berry connections, accumulated phases and the adiabatic reference path.

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::linalg::{eigensystem, match_to_previous, ComplexMatrix, EigenSystem, StateVector, C64, I};
use crate::par::{self, Execution};
use crate::quad;
use crate::symmetry::{symmetric_eigensystem, SymmetrySpec};

/// Closed time interval `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && start < end) {
            return Err(Error::InvalidArgument(format!("bad window [{start}, {end}]")));
        }
        Ok(Self { start, end })
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        let slack = 1e-12 * self.length();
        t >= self.start - slack && t <= self.end + slack
    }

    pub fn check(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::WindowExceeded {
                t,
                start: self.start,
                end: self.end,
            })
        }
    }

    /// Uniform grid with spacing as close to `step` as divides the window.
    pub fn grid(&self, step: f64) -> Result<Vec<f64>> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
        }
        let n = ((self.length() / step).round() as usize).max(1);
        Ok((0..=n)
            .map(|k| {
                if k == n {
                    self.end
                } else {
                    self.start + self.length() * k as f64 / n as f64
                }
            })
            .collect())
    }
}

/// A time-parameterized Hamiltonian family with its eigenpath.
///
/// `eigensystem(t)` must be binormalized and its index order fixed along the
/// window. `eigensystem_near` lets numeric schedules align gauge and order
/// with a nearby snapshot; analytic schedules keep the default.
pub trait Schedule: Sync {
    fn window(&self) -> Window;
    fn dim(&self) -> usize;
    fn hamiltonian(&self, t: f64) -> ComplexMatrix;

    fn parameters(&self, _t: f64) -> Vec<(&'static str, f64)> {
        Vec::new()
    }

    fn parameter_rates(&self, _t: f64) -> Vec<(&'static str, f64)> {
        Vec::new()
    }

    fn eigensystem(&self, t: f64) -> Result<EigenSystem>;

    fn eigensystem_near(&self, t: f64, _reference: &EigenSystem) -> Result<EigenSystem> {
        self.eigensystem(t)
    }

    fn symmetry(&self, _t: f64) -> Option<SymmetrySpec> {
        None
    }

    /// Finite-difference step for eigenvector derivatives.
    fn derivative_step(&self) -> f64 {
        1e-4 * self.window().length()
    }
}

type HamiltonianFn = Box<dyn Fn(f64) -> ComplexMatrix + Send + Sync>;

/// Schedule backed by the numeric eigensolver. The eigenpath is tracked on a
/// grid of cache nodes; queries are matched to the nearest node.
pub struct NumericSchedule {
    h: HamiltonianFn,
    window: Window,
    dim: usize,
    symmetry: Option<SymmetrySpec>,
    nodes: Vec<f64>,
    path: Vec<EigenSystem>,
}

impl NumericSchedule {
    /// `samples` cache nodes (at least 2) are solved per `exec` and then
    /// matched sequentially.
    pub fn new(
        h: impl Fn(f64) -> ComplexMatrix + Send + Sync + 'static,
        window: Window,
        samples: usize,
        symmetry: Option<SymmetrySpec>,
        exec: Execution,
    ) -> Result<Self> {
        let samples = samples.max(2);
        let dim = h(window.start).dim();
        let nodes: Vec<f64> = (0..samples)
            .map(|k| window.start + window.length() * k as f64 / (samples - 1) as f64)
            .collect();
        let mut sched = Self {
            h: Box::new(h),
            window,
            dim,
            symmetry,
            nodes: nodes.clone(),
            path: Vec::new(),
        };
        let raw = par::try_map(exec, samples, |k| sched.raw(nodes[k]))?;
        let mut path: Vec<EigenSystem> = Vec::with_capacity(samples);
        for es in raw {
            let next = match path.last() {
                Some(prev) => match_to_previous(&es, prev)?,
                None => es,
            };
            path.push(next);
        }
        sched.path = path;
        Ok(sched)
    }

    fn raw(&self, t: f64) -> Result<EigenSystem> {
        let h = (self.h)(t);
        match &self.symmetry {
            Some(spec) => symmetric_eigensystem(&h, spec).map(|(es, _)| es),
            None => eigensystem(&h),
        }
    }

    fn nearest(&self, t: f64) -> &EigenSystem {
        let x = (t - self.window.start) / self.window.length() * (self.nodes.len() - 1) as f64;
        let k = (x.round().max(0.0) as usize).min(self.nodes.len() - 1);
        &self.path[k]
    }
}

impl Schedule for NumericSchedule {
    fn window(&self) -> Window {
        self.window
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn hamiltonian(&self, t: f64) -> ComplexMatrix {
        (self.h)(t)
    }

    fn eigensystem(&self, t: f64) -> Result<EigenSystem> {
        self.window.check(t)?;
        match_to_previous(&self.raw(t)?, self.nearest(t))
    }

    fn eigensystem_near(&self, t: f64, reference: &EigenSystem) -> Result<EigenSystem> {
        self.window.check(t)?;
        match_to_previous(&self.raw(t)?, reference)
    }

    fn symmetry(&self, _t: f64) -> Option<SymmetrySpec> {
        self.symmetry.clone()
    }
}

/// Eigensystem at `t` together with `d|E_n^r>/dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenJet {
    pub t: f64,
    pub es: EigenSystem,
    pub d_rights: Vec<StateVector>,
}

impl EigenJet {
    /// `<E_n^l | dE_m^r/dt>`
    pub fn overlap(&self, n: usize, m: usize) -> C64 {
        self.es.lefts[n].dot(&self.d_rights[m])
    }

    /// `A_n = i <E_n^l | dE_n^r/dt>`
    pub fn connection(&self, n: usize) -> C64 {
        I * self.overlap(n, n)
    }

    /// Applies a time-dependent rescaling `c(t)` with rate `c_dot` to state `n`.
    pub fn regauge(&mut self, n: usize, c: C64, c_dot: C64) {
        let r = self.es.rights[n].clone();
        self.d_rights[n] = self.d_rights[n].scale(c).axpy(c_dot, &r);
        self.es.regauge(n, c);
    }
}

// 4th-order stencils for the first derivative: (offsets, weights / 12)
const CENTRAL: ([i32; 4], [f64; 4]) = ([-2, -1, 1, 2], [1.0, -8.0, 8.0, -1.0]);
const FORWARD: ([i32; 5], [f64; 5]) = ([0, 1, 2, 3, 4], [-25.0, 48.0, -36.0, 16.0, -3.0]);

/// Derivatives from the schedule's default step.
pub fn eigen_jet<S: Schedule + ?Sized>(s: &S, t: f64) -> Result<EigenJet> {
    eigen_jet_with(s, t, s.derivative_step())
}

/// Five-point (4th order) differences of gauge-aligned snapshots; near the
/// window edges the stencil becomes one-sided.
pub fn eigen_jet_with<S: Schedule + ?Sized>(s: &S, t: f64, dt: f64) -> Result<EigenJet> {
    s.window().check(t)?;
    let center = s.eigensystem(t)?;
    eigen_jet_around(s, t, center, dt)
}

/// As [`eigen_jet_with`] with a caller-supplied centre snapshot, which fixes
/// the gauge the derivative refers to.
pub fn eigen_jet_around<S: Schedule + ?Sized>(s: &S, t: f64, center: EigenSystem, dt: f64) -> Result<EigenJet> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "derivative step must be positive, got {dt}"
        )));
    }
    let w = s.window();
    let (offsets, weights, sign): (Vec<i32>, Vec<f64>, f64) = if w.contains(t - 2.0 * dt) && w.contains(t + 2.0 * dt) {
        (CENTRAL.0.to_vec(), CENTRAL.1.to_vec(), 1.0)
    } else if w.contains(t + 4.0 * dt) {
        (FORWARD.0.to_vec(), FORWARD.1.to_vec(), 1.0)
    } else if w.contains(t - 4.0 * dt) {
        (FORWARD.0.iter().map(|k| -k).collect(), FORWARD.1.to_vec(), -1.0)
    } else {
        return Err(Error::InvalidArgument(format!(
            "derivative step {dt} too large for the window"
        )));
    };
    let d = center.dim();
    let n = center.len();
    let mut d_rights = vec![StateVector::zeros(d); n];
    for (&k, &wk) in offsets.iter().zip(&weights) {
        let coef = C64::new(sign * wk / (12.0 * dt), 0.0);
        if k == 0 {
            for (acc, r) in d_rights.iter_mut().zip(&center.rights) {
                *acc = acc.axpy(coef, r);
            }
            continue;
        }
        let snap = s.eigensystem_near(t + k as f64 * dt, &center)?;
        for (acc, r) in d_rights.iter_mut().zip(&snap.rights) {
            *acc = acc.axpy(coef, r);
        }
    }
    Ok(EigenJet {
        t,
        es: center,
        d_rights,
    })
}

/// Accumulated phases of one state over an interval.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseLedger {
    /// `-∫ E_n dt`
    pub dynamic: C64,
    /// `∫ A_n dt`; the adiabatic state carries `e^{i (dynamic + geometric)}`.
    pub geometric: C64,
    /// `Im ∫ (E_k - E_m) dt` for every pair.
    pub im_w: Vec<Vec<f64>>,
}

fn check_interval(w: &Window, a: f64, b: f64) -> Result<()> {
    w.check(a)?;
    w.check(b)?;
    if b < a {
        return Err(Error::InvalidArgument(format!("interval [{a}, {b}] is reversed")));
    }
    Ok(())
}

fn interval_grid(a: f64, b: f64, intervals: usize) -> Vec<f64> {
    let n = intervals.max(1);
    (0..=n)
        .map(|k| if k == n { b } else { a + (b - a) * k as f64 / n as f64 })
        .collect()
}

/// Composite Simpson accumulation of dynamic and geometric phases on
/// `intervals` equal sub-intervals of `[a, b]`.
pub fn accumulate_phases<S: Schedule + ?Sized>(
    s: &S,
    a: f64,
    b: f64,
    n: usize,
    intervals: usize,
    exec: Execution,
) -> Result<PhaseLedger> {
    check_interval(&s.window(), a, b)?;
    let grid = interval_grid(a, b, intervals);
    let m = grid.len();
    // sample nodes and midpoints in one batch
    let times: Vec<f64> = (0..2 * m - 1)
        .map(|k| {
            if k % 2 == 0 {
                grid[k / 2]
            } else {
                0.5 * (grid[k / 2] + grid[k / 2 + 1])
            }
        })
        .collect();
    let jets = par::try_map(exec, times.len(), |k| eigen_jet(s, times[k]))?;
    if n >= jets[0].es.len() {
        return Err(Error::InvalidArgument(format!("state index {n} out of range")));
    }
    let split = |f: &dyn Fn(&EigenJet) -> C64| -> (Vec<C64>, Vec<C64>) {
        let all: Vec<C64> = jets.iter().map(f).collect();
        let nodes = all.iter().step_by(2).copied().collect();
        let mids = all.iter().skip(1).step_by(2).copied().collect();
        (nodes, mids)
    };
    let (en, em) = split(&|j| j.es.eigenvalues[n]);
    let (an, am) = split(&|j| j.connection(n));
    let dynamic = -*quad::simpson_cumulative(&grid, &en, &em).last().unwrap();
    let geometric = *quad::simpson_cumulative(&grid, &an, &am).last().unwrap();
    let dim = jets[0].es.len();
    let mut integrals = Vec::with_capacity(dim);
    for k in 0..dim {
        let (ek, ekm) = split(&|j| j.es.eigenvalues[k]);
        integrals.push(*quad::simpson_cumulative(&grid, &ek, &ekm).last().unwrap());
    }
    let im_w = (0..dim)
        .map(|k| (0..dim).map(|l| (integrals[k] - integrals[l]).im).collect())
        .collect();
    Ok(PhaseLedger {
        dynamic,
        geometric,
        im_w,
    })
}

/// `A_n = i<E_n^l|dE_n^r/dt>` at `t`.
pub fn berry_connection<S: Schedule + ?Sized>(s: &S, t: f64, n: usize) -> Result<C64> {
    let jet = eigen_jet(s, t)?;
    if n >= jet.es.len() {
        return Err(Error::InvalidArgument(format!("state index {n} out of range")));
    }
    Ok(jet.connection(n))
}

fn eta(jet: &EigenJet, im_w: f64, n: usize, m: usize) -> Result<f64> {
    let gap = (jet.es.eigenvalues[n] - jet.es.eigenvalues[m]).norm();
    if gap == 0.0 {
        return Err(Error::DegenerateSpectrum(n, m, 0.0));
    }
    Ok(jet.overlap(n, m).norm() / gap * (-im_w).exp())
}

/// `η_nm = |<E_n^l|dE_m^r/dt>| / |ω_nm| · e^{-Im W_nm}` with `W_nm`
/// accumulated from the window start.
pub fn adiabatic_metric<S: Schedule + ?Sized>(s: &S, t: f64, n: usize, m: usize) -> Result<f64> {
    if n == m {
        return Err(Error::InvalidArgument("adiabatic metric needs n != m".into()));
    }
    let w = s.window();
    w.check(t)?;
    let jet = eigen_jet(s, t)?;
    if n.max(m) >= jet.es.len() {
        return Err(Error::InvalidArgument(format!("state index {} out of range", n.max(m))));
    }
    let im_w = if t > w.start {
        let intervals = ((200.0 * (t - w.start) / w.length()).ceil() as usize).max(1);
        let grid = interval_grid(w.start, t, intervals);
        let values = |tt: f64| -> Result<C64> {
            let es = s.eigensystem(tt)?;
            Ok(es.eigenvalues[n] - es.eigenvalues[m])
        };
        let nodes = grid.iter().map(|&tt| values(tt)).collect::<Result<Vec<_>>>()?;
        let mids = grid
            .windows(2)
            .map(|p| values(0.5 * (p[0] + p[1])))
            .collect::<Result<Vec<_>>>()?;
        quad::simpson_cumulative(&grid, &nodes, &mids).last().unwrap().im
    } else {
        0.0
    };
    eta(&jet, im_w, n, m)
}

/// Largest `η_nm` over pairs at each grid node (grid starts at the window
/// start or later; `W` is accumulated along the grid from its first node).
pub fn metric_profile<S: Schedule + ?Sized>(s: &S, grid: &[f64], exec: Execution) -> Result<Vec<f64>> {
    let w = s.window();
    for &t in grid {
        w.check(t)?;
    }
    let jets = par::try_map(exec, grid.len(), |k| eigen_jet(s, grid[k]))?;
    let mids = par::try_map(exec, grid.len().saturating_sub(1), |k| {
        s.eigensystem(0.5 * (grid[k] + grid[k + 1])).map(|es| es.eigenvalues)
    })?;
    let dim = jets.first().map_or(0, |j| j.es.len());
    let mut cumulative = Vec::with_capacity(dim);
    for k in 0..dim {
        let nodes: Vec<C64> = jets.iter().map(|j| j.es.eigenvalues[k]).collect();
        let m: Vec<C64> = mids.iter().map(|e| e[k]).collect();
        cumulative.push(quad::simpson_cumulative(grid, &nodes, &m));
    }
    let mut out = Vec::with_capacity(grid.len());
    for (i, jet) in jets.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for n in 0..dim {
            for m in 0..dim {
                if n != m {
                    let im_w = (cumulative[n][i] - cumulative[m][i]).im;
                    worst = worst.max(eta(jet, im_w, n, m)?);
                }
            }
        }
        out.push(worst);
    }
    Ok(out)
}

/// Adiabatic state `|ψ_n(t)> = e^{i(dynamic + geometric)} |E_n^r(t)>` on
/// `grid`, or the bare eigenpath when `drop_phases` is set.
pub fn adiabatic_reference<S: Schedule + ?Sized>(
    s: &S,
    grid: &[f64],
    n: usize,
    drop_phases: bool,
    exec: Execution,
) -> Result<Trajectory> {
    let w = s.window();
    if grid.is_empty() {
        return Err(Error::GridMismatch("empty grid".into()));
    }
    for &t in grid {
        w.check(t)?;
    }
    if grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::GridMismatch("grid is not strictly increasing".into()));
    }
    // sequential tracking keeps the gauge continuous for numeric schedules
    let mut path: Vec<EigenSystem> = Vec::with_capacity(grid.len());
    for &t in grid {
        let es = match path.last() {
            Some(prev) => s.eigensystem_near(t, prev)?,
            None => s.eigensystem(t)?,
        };
        path.push(es);
    }
    if n >= path[0].len() {
        return Err(Error::InvalidArgument(format!("state index {n} out of range")));
    }
    if drop_phases {
        let states = path.iter().map(|es| es.rights[n].clone()).collect();
        return Ok(Trajectory::from_states(grid.to_vec(), states));
    }
    let dt = s.derivative_step();
    let node_terms = par::try_map(exec, grid.len(), |k| {
        let jet = eigen_jet_around(s, grid[k], path[k].clone(), dt)?;
        Ok::<_, Error>((jet.es.eigenvalues[n], jet.connection(n)))
    })?;
    let mid_terms = par::try_map(exec, grid.len() - 1, |k| {
        let t = 0.5 * (grid[k] + grid[k + 1]);
        let center = s.eigensystem_near(t, &path[k])?;
        let jet = eigen_jet_around(s, t, center, dt)?;
        Ok::<_, Error>((jet.es.eigenvalues[n], jet.connection(n)))
    })?;
    // exponent integrand: -E_n + A_n
    let f_nodes: Vec<C64> = node_terms.iter().map(|(e, a)| -e + a).collect();
    let f_mids: Vec<C64> = mid_terms.iter().map(|(e, a)| -e + a).collect();
    let phase = quad::simpson_cumulative(grid, &f_nodes, &f_mids);
    let states = path
        .iter()
        .zip(&phase)
        .map(|(es, p)| es.rights[n].scale((I * p).exp()))
        .collect();
    Ok(Trajectory::from_states(grid.to_vec(), states))
}

/// Constant Hamiltonian wrapped as a schedule; handy for tests and as a
/// degenerate case of the interface.
pub struct ConstantSchedule {
    pub h: ComplexMatrix,
    pub window: Window,
    es: EigenSystem,
}

impl ConstantSchedule {
    pub fn new(h: ComplexMatrix, window: Window) -> Result<Self> {
        let es = eigensystem(&h)?;
        Ok(Self { h, window, es })
    }
}

impl Schedule for ConstantSchedule {
    fn window(&self) -> Window {
        self.window
    }

    fn dim(&self) -> usize {
        self.h.dim()
    }

    fn hamiltonian(&self, _t: f64) -> ComplexMatrix {
        self.h.clone()
    }

    fn eigensystem(&self, t: f64) -> Result<EigenSystem> {
        self.window.check(t)?;
        Ok(self.es.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn constant() -> ConstantSchedule {
        let h = ComplexMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(0.3, 0.1), c(0.0, 0.0)],
            vec![c(0.3, -0.1), c(-0.5, 0.0), c(0.2, 0.0)],
            vec![c(0.0, 0.0), c(0.2, 0.0), c(2.0, 0.0)],
        ])
        .unwrap();
        ConstantSchedule::new(h, Window::new(0.0, 2.0).unwrap()).unwrap()
    }

    #[test]
    fn window_grid_and_checks() {
        let w = Window::new(-1.0, 1.0).unwrap();
        let g = w.grid(0.1).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[20], 1.0);
        assert!(matches!(w.check(1.5), Err(Error::WindowExceeded { .. })));
        assert!(Window::new(1.0, 0.0).is_err());
    }

    #[test]
    fn constant_schedule_metric_vanishes() {
        let s = constant();
        for t in [0.0, 0.7, 2.0] {
            for (n, m) in [(0, 1), (2, 0)] {
                assert!(adiabatic_metric(&s, t, n, m).unwrap() < 1e-10);
            }
        }
        assert!(adiabatic_metric(&s, 0.5, 1, 1).is_err());
        assert!(matches!(
            adiabatic_metric(&s, 3.0, 0, 1),
            Err(Error::WindowExceeded { .. })
        ));
    }

    #[test]
    fn constant_schedule_phases() {
        let s = constant();
        let es = s.eigensystem(0.0).unwrap();
        for n in 0..3 {
            let ledger = accumulate_phases(&s, 0.5, 1.5, n, 10, Execution::default()).unwrap();
            assert!((ledger.dynamic + es.eigenvalues[n]).norm() < 1e-12);
            assert!(ledger.geometric.norm() < 1e-10);
            assert!(ledger.im_w.iter().flatten().all(|x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn constant_reference_is_stationary_state() {
        let s = constant();
        let grid = s.window.grid(0.01).unwrap();
        let es = s.eigensystem(0.0).unwrap();
        let traj = adiabatic_reference(&s, &grid, 1, false, Execution::default()).unwrap();
        for (t, psi) in grid.iter().zip(&traj.states) {
            let want = es.rights[1].scale((-I * es.eigenvalues[1] * *t).exp());
            assert!(psi.max_abs_diff(&want) < 1e-12);
        }
    }

    #[test]
    fn numeric_schedule_tracks_rotation() {
        // H(t) = R(t) diag(1, -1) R(t)^T; eigenvectors rotate at unit rate
        let w = Window::new(0.0, 1.0).unwrap();
        let h = |t: f64| {
            let (s, c) = t.sin_cos();
            ComplexMatrix::from_real_rows(&[&[c * c - s * s, 2.0 * s * c], &[2.0 * s * c, s * s - c * c]])
        };
        let sched = NumericSchedule::new(h, w, 101, None, Execution::default()).unwrap();
        let jet = eigen_jet(&sched, 0.5).unwrap();
        // |<l_0|dr_1>| = rotation rate
        assert!((jet.overlap(0, 1).norm() - 1.0).abs() < 1e-8);
        assert!(jet.overlap(0, 0).norm() < 1e-8);
    }

    #[test]
    fn edge_stencils_are_fourth_order() {
        let w = Window::new(0.0, 1.0).unwrap();
        let h = |t: f64| {
            let (s, c) = t.sin_cos();
            ComplexMatrix::from_real_rows(&[&[c * c - s * s, 2.0 * s * c], &[2.0 * s * c, s * s - c * c]])
        };
        let sched = NumericSchedule::new(h, w, 101, None, Execution::Sequential).unwrap();
        for t in [0.0, 1.0] {
            let jet = eigen_jet(&sched, t).unwrap();
            assert!((jet.overlap(0, 1).norm() - 1.0).abs() < 1e-8, "t = {t}");
        }
    }
}
