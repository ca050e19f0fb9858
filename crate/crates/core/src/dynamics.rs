//! Non-unitary propagation of `i dψ/dt = H(t) ψ` (ħ = 1), observables, and
//! the projective decomposition `ψ = e^{α + iβ} ψ̃` with `‖ψ̃‖ = 1`.

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, StateVector, C64, I};
use crate::par::{self, Execution};
use crate::quad;

/// Norm (`<ψ|ψ>`) above which a run is cut short.
pub const OVERFLOW_NORM: f64 = 1e12;
/// Largest accepted `‖H‖_F h`.
pub const MAX_STEP_PRODUCT: f64 = 0.1;

/// Sampled evolution with derived observables. Derived columns are empty
/// until the corresponding pass has run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    pub states: Vec<StateVector>,
    /// `|<k|ψ>|^2` per bare level
    pub populations: Vec<Vec<f64>>,
    /// `<ψ|ψ>`
    pub norm: Vec<f64>,
    /// `|<ψ|U|ψ_ref>|`
    pub fidelity_u: Vec<f64>,
    /// `|<ψ|ψ_ref>| / (‖ψ‖ ‖ψ_ref‖)`
    pub fidelity_plain: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub normalized: Vec<StateVector>,
    /// `max |dα/dt - H̄_I|` from the decomposition pass.
    pub alpha_rate_mismatch: Option<f64>,
    /// Set when the run stopped early on norm overflow.
    pub truncated: bool,
}

impl Trajectory {
    pub fn from_states(grid: Vec<f64>, states: Vec<StateVector>) -> Self {
        let mut traj = Trajectory {
            grid: Vec::with_capacity(states.len()),
            ..Default::default()
        };
        for (t, s) in grid.into_iter().zip(states) {
            traj.push(t, s);
        }
        traj
    }

    fn push(&mut self, t: f64, state: StateVector) {
        self.populations.push(state.iter().map(|z| z.norm_sqr()).collect());
        self.norm.push(state.norm_sqr());
        self.grid.push(t);
        self.states.push(state);
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, StateVector::len)
    }

    /// Populations divided by their sum at each time.
    pub fn renormalized_populations(&self) -> Vec<Vec<f64>> {
        self.populations
            .iter()
            .map(|p| {
                let total: f64 = p.iter().sum();
                p.iter().map(|x| if total > 0.0 { x / total } else { 0.0 }).collect()
            })
            .collect()
    }

    /// Worst relative mismatch between `e^{2α}` and the recorded norm.
    pub fn alpha_norm_mismatch(&self) -> f64 {
        self.alpha
            .iter()
            .zip(&self.norm)
            .map(|(a, n)| ((2.0 * a).exp() - n).abs() / n)
            .fold(0.0, f64::max)
    }
}

/// Integration scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    /// One classical RK4 step per grid interval.
    Rk4Fixed,
    /// RK4 with step doubling between grid nodes; `tol` bounds the local
    /// error estimate relative to `max(1, ‖ψ‖)`.
    Rk4Adaptive { tol: f64 },
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::GridMismatch("empty grid".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("time grid"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::GridMismatch("grid is not strictly increasing".into()));
    }
    Ok(())
}

/// Drive matrices tabulated at grid nodes and interval midpoints.
#[derive(Clone, Debug)]
pub struct DriveSamples {
    pub grid: Vec<f64>,
    pub nodes: Vec<ComplexMatrix>,
    pub mids: Vec<ComplexMatrix>,
}

impl DriveSamples {
    /// Evaluates `h` at all nodes and midpoints; independent evaluations
    /// run according to `exec`.
    pub fn tabulate<F>(h: F, grid: &[f64], exec: Execution) -> Result<Self>
    where
        F: Fn(f64) -> ComplexMatrix + Sync + Send,
    {
        validate_grid(grid)?;
        let n = grid.len();
        let total = 2 * n - 1;
        let all = par::map(exec, total, |k| {
            if k % 2 == 0 {
                h(grid[k / 2])
            } else {
                let i = k / 2;
                h(0.5 * (grid[i] + grid[i + 1]))
            }
        });
        let mut nodes = Vec::with_capacity(n);
        let mut mids = Vec::with_capacity(n - 1);
        for (k, m) in all.into_iter().enumerate() {
            m.ensure_finite("drive Hamiltonian")?;
            if k % 2 == 0 {
                nodes.push(m);
            } else {
                mids.push(m);
            }
        }
        Ok(Self {
            grid: grid.to_vec(),
            nodes,
            mids,
        })
    }
}

fn apply(h: &ComplexMatrix, v: &[C64], out: &mut [C64]) {
    // out = -i H v
    let n = v.len();
    let data = h.as_slice();
    for i in 0..n {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..n {
            acc += data[i * n + j] * v[j];
        }
        out[i] = -I * acc;
    }
}

fn rk4_step(h0: &ComplexMatrix, hm: &ComplexMatrix, h1: &ComplexMatrix, psi: &[C64], dt: f64) -> Vec<C64> {
    let n = psi.len();
    let mut k1 = vec![C64::new(0.0, 0.0); n];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    apply(h0, psi, &mut k1);
    for i in 0..n {
        tmp[i] = psi[i] + k1[i] * (0.5 * dt);
    }
    apply(hm, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = psi[i] + k2[i] * (0.5 * dt);
    }
    apply(hm, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = psi[i] + k3[i] * dt;
    }
    apply(h1, &tmp, &mut k4);
    (0..n)
        .map(|i| psi[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0))
        .collect()
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Fixed-step RK4 over pre-tabulated drive matrices.
pub fn integrate_sampled(samples: &DriveSamples, psi0: &StateVector) -> Result<Trajectory> {
    let grid = &samples.grid;
    let dim = samples.nodes[0].dim();
    if psi0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: psi0.len(),
        });
    }
    if !psi0.is_finite() {
        return Err(Error::NonFinite("initial state"));
    }
    for i in 0..grid.len().saturating_sub(1) {
        let h = grid[i + 1] - grid[i];
        let product = samples.nodes[i].frobenius_norm() * h;
        if product > MAX_STEP_PRODUCT {
            return Err(Error::StepTooLarge { t: grid[i], product });
        }
    }
    let mut traj = Trajectory::default();
    let mut psi: Vec<C64> = psi0.as_slice().to_vec();
    traj.push(grid[0], psi0.clone());
    for i in 0..grid.len() - 1 {
        let dt = grid[i + 1] - grid[i];
        psi = rk4_step(&samples.nodes[i], &samples.mids[i], &samples.nodes[i + 1], &psi, dt);
        let nrm = norm_sqr(&psi);
        if !nrm.is_finite() {
            traj.truncated = true;
            break;
        }
        traj.push(grid[i + 1], StateVector::new(psi.clone()));
        if nrm > OVERFLOW_NORM {
            traj.truncated = true;
            break;
        }
    }
    Ok(traj)
}

/// Propagates `psi0` along `grid`. No renormalization is applied; a run whose
/// norm exceeds [`OVERFLOW_NORM`] is returned truncated with the flag set.
pub fn integrate<F>(h: F, psi0: &StateVector, grid: &[f64], method: Method, exec: Execution) -> Result<Trajectory>
where
    F: Fn(f64) -> ComplexMatrix + Sync + Send,
{
    validate_grid(grid)?;
    match method {
        Method::Rk4Fixed => {
            let samples = DriveSamples::tabulate(h, grid, exec)?;
            integrate_sampled(&samples, psi0)
        }
        Method::Rk4Adaptive { tol } => integrate_adaptive(&h, psi0, grid, tol),
    }
}

fn integrate_adaptive<F>(h: &F, psi0: &StateVector, grid: &[f64], tol: f64) -> Result<Trajectory>
where
    F: Fn(f64) -> ComplexMatrix,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "adaptive tolerance must be positive, got {tol}"
        )));
    }
    let mut traj = Trajectory::default();
    let mut psi: Vec<C64> = psi0.as_slice().to_vec();
    traj.push(grid[0], psi0.clone());
    let mut step = grid.get(1).map_or(1.0, |t1| t1 - grid[0]);
    'outer: for i in 0..grid.len() - 1 {
        let mut t = grid[i];
        let end = grid[i + 1];
        while t < end {
            let h0 = h(t);
            h0.ensure_finite("drive Hamiltonian")?;
            let cap = MAX_STEP_PRODUCT / h0.frobenius_norm().max(f64::MIN_POSITIVE);
            let mut dt = step.min(cap).min(end - t);
            if end - t - dt < 1e-12 * (end - t).abs().max(1.0) {
                dt = end - t;
            }
            let hm = h(t + 0.5 * dt);
            let h1 = h(t + dt);
            let full = rk4_step(&h0, &hm, &h1, &psi, dt);
            let hq1 = h(t + 0.25 * dt);
            let hq3 = h(t + 0.75 * dt);
            let half = rk4_step(&h0, &hq1, &hm, &psi, 0.5 * dt);
            let two = rk4_step(&hm, &hq3, &h1, &half, 0.5 * dt);
            let err = full
                .iter()
                .zip(&two)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt()
                / 15.0;
            let scale = norm_sqr(&two).sqrt().max(1.0);
            let ratio = err / (tol * scale);
            if ratio <= 1.0 || dt <= 1e-14 * (end - grid[0]).abs() {
                // Richardson extrapolation of the two estimates
                psi = two.iter().zip(&full).map(|(b, a)| b + (b - a) / 15.0).collect();
                t = if dt == end - t { end } else { t + dt };
                step = dt * (0.9 * ratio.max(1e-10).powf(-0.2)).min(2.0);
                let nrm = norm_sqr(&psi);
                if !nrm.is_finite() {
                    traj.truncated = true;
                    break 'outer;
                }
            } else {
                step = dt * (0.9 * ratio.powf(-0.2)).max(0.2);
            }
        }
        traj.push(end, StateVector::new(psi.clone()));
        if traj.norm.last().copied().unwrap_or(0.0) > OVERFLOW_NORM {
            traj.truncated = true;
            break;
        }
    }
    Ok(traj)
}

fn same_grid(a: &[f64], b: &[f64]) -> Result<()> {
    if b.len() < a.len() {
        return Err(Error::GridMismatch(format!(
            "reference has {} nodes, trajectory {}",
            b.len(),
            a.len()
        )));
    }
    let scale = a.iter().chain(b).fold(1.0f64, |m, t| m.max(t.abs()));
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        if (x - y).abs() > 1e-12 * scale {
            return Err(Error::GridMismatch(format!("node {k}: {x} vs {y}")));
        }
    }
    Ok(())
}

/// Fills fidelities against `reference`: the plain normalized overlap
/// always, and `|<ψ|U(t)|ψ_ref>|` when `u` is supplied. A truncated
/// trajectory is compared on its prefix.
pub fn observables(
    traj: &mut Trajectory,
    u: Option<&dyn Fn(f64) -> ComplexMatrix>,
    reference: Option<&Trajectory>,
) -> Result<()> {
    traj.populations = traj
        .states
        .iter()
        .map(|s| s.iter().map(|z| z.norm_sqr()).collect())
        .collect();
    traj.norm = traj.states.iter().map(StateVector::norm_sqr).collect();
    let Some(reference) = reference else {
        return Ok(());
    };
    same_grid(&traj.grid, &reference.grid)?;
    traj.fidelity_plain = traj
        .states
        .iter()
        .zip(&reference.states)
        .map(|(psi, r)| psi.dot(r).norm() / (psi.norm() * r.norm()))
        .collect();
    traj.fidelity_u = match u {
        Some(u) => traj
            .states
            .iter()
            .zip(&reference.states)
            .zip(&traj.grid)
            .map(|((psi, r), &t)| psi.dot(&u(t).mul_vec(r)).norm())
            .collect(),
        None => Vec::new(),
    };
    Ok(())
}

/// Projective decomposition `ψ = e^{α + iβ} ψ̃`.
///
/// `α = ½ ln <ψ|ψ>`; `β` integrates `-H̄_R` and then the finite-difference
/// term `i<ψ̃|dψ̃/dt>` once more so that ψ̃ is parallel transported.
/// `h_nodes` are the drive matrices on the trajectory grid.
pub fn project_phase_decomposition(traj: &mut Trajectory, h_nodes: &[ComplexMatrix]) -> Result<()> {
    let n = traj.len();
    if h_nodes.len() < n {
        return Err(Error::GridMismatch(format!(
            "{} drive samples for {n} nodes",
            h_nodes.len()
        )));
    }
    if n == 0 {
        return Ok(());
    }
    for (t, nrm) in traj.grid.iter().zip(&traj.norm) {
        if !(*nrm > f64::MIN_POSITIVE) || !nrm.is_finite() {
            return Err(Error::ZeroNorm(*t));
        }
    }
    let alpha: Vec<f64> = traj.norm.iter().map(|x| 0.5 * x.ln()).collect();
    let unit: Vec<StateVector> = traj
        .states
        .iter()
        .zip(&traj.norm)
        .map(|(s, x)| s.scale_real(1.0 / x.sqrt()))
        .collect();
    let mut hr = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for (v, h) in unit.iter().zip(h_nodes) {
        let mean = v.dot(&h.mul_vec(v));
        hr.push(mean.re);
        hi.push(mean.im);
    }
    let minus_hr: Vec<f64> = hr.iter().map(|x| -x).collect();
    let beta0 = quad::quadratic_cumulative(&traj.grid, &minus_hr);
    let mut beta = beta0.clone();
    if n >= 3 {
        let tilde0: Vec<StateVector> = unit
            .iter()
            .zip(&beta0)
            .map(|(v, b)| v.scale(C64::from_polar(1.0, -b)))
            .collect();
        let geom: Vec<f64> = (0..n)
            .map(|i| {
                let (idx, w) = quad::derivative_weights(&traj.grid, i);
                let mut d = StateVector::zeros(tilde0[i].len());
                for (k, wk) in idx.iter().zip(w) {
                    d = d.axpy(C64::new(wk, 0.0), &tilde0[*k]);
                }
                (I * tilde0[i].dot(&d)).re
            })
            .collect();
        let extra = quad::quadratic_cumulative(&traj.grid, &geom);
        for (b, e) in beta.iter_mut().zip(extra) {
            *b += e;
        }
        let mismatch = (0..n)
            .map(|i| {
                let (idx, w) = quad::derivative_weights(&traj.grid, i);
                let d: f64 = idx.iter().zip(w).map(|(&k, wk)| wk * alpha[k]).sum();
                (d - hi[i]).abs()
            })
            .fold(0.0, f64::max);
        traj.alpha_rate_mismatch = Some(mismatch);
    }
    traj.normalized = unit
        .iter()
        .zip(&beta)
        .map(|(v, b)| v.scale(C64::from_polar(1.0, -b)))
        .collect();
    traj.alpha = alpha;
    traj.beta = beta;
    Ok(())
}
