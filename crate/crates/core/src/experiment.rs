//! Config-driven experiments: model construction, drive selection,
//! propagation, observables, CSV/report output, spectrum sweeps and plot
//! scripts.
//!
//! A run is described by a TOML document:
//!
//! ```toml
//! [model]
//! kind = "pseudo-real"        # pseudo-real | pseudo-complex | antipseudo | custom-matrix
//!
//! [drive]
//! kind = "full-cd"            # bare | full-cd | cd-only
//! derivatives = "analytic"    # analytic | numeric
//!
//! [initial]
//! kind = "eigenstate"         # eigenstate | bare | explicit
//! index = 0
//!
//! [grid]
//! step = 1e-3                 # in units of the pulse period T
//! half_width = 6.0            # window [-half_width T, half_width T]
//! method = "rk4-fixed"        # rk4-fixed | rk4-adaptive
//!
//! [output]
//! dir = "out"
//!
//! [thresholds]
//! min_fidelity_u = 0.999
//! ```
//!
//! Unknown keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use serde::Deserialize;

use crate::adiabatic::{adiabatic_reference, eigen_jet, metric_profile, NumericSchedule, Schedule, Window};
use crate::cd::{cd_antipseudo, cd_generic, cd_pseudo, CdBundle};
use crate::dynamics::{integrate_sampled, observables, project_phase_decomposition, DriveSamples, Method, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{eig, spectral_order, ComplexMatrix, StateVector, C64};
use crate::models::{preset_schedule_in, stirap_hamiltonian, ModelBundle, Preset, StirapParams};
use crate::par::{self, Execution};
use crate::symmetry::{check_self_normalized, SymmetryKind};

/// Adiabatic metric above which a report flags the run as non-adiabatic.
pub const ETA_FLAG: f64 = 0.1;
const ETA_SAMPLES: usize = 241;
const CUSTOM_CACHE_SAMPLES: usize = 2001;

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    PseudoReal,
    PseudoComplex,
    Antipseudo,
    CustomMatrix,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::PseudoReal => "pseudo-real",
            ModelKind::PseudoComplex => "pseudo-complex",
            ModelKind::Antipseudo => "antipseudo",
            ModelKind::CustomMatrix => "custom-matrix",
        }
    }

    fn preset_case(self) -> Option<Preset> {
        match self {
            ModelKind::PseudoReal => Some(Preset::PseudoReal),
            ModelKind::PseudoComplex => Some(Preset::PseudoComplex),
            ModelKind::Antipseudo => Some(Preset::Antipseudo),
            ModelKind::CustomMatrix => None,
        }
    }
}

impl From<Preset> for ModelKind {
    fn from(c: Preset) -> Self {
        match c {
            Preset::PseudoReal => ModelKind::PseudoReal,
            Preset::PseudoComplex => ModelKind::PseudoComplex,
            Preset::Antipseudo => ModelKind::Antipseudo,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum DriveKind {
    /// the instantaneous Hamiltonian alone
    Bare,
    /// Hamiltonian plus counterdiabatic term
    #[default]
    FullCd,
    /// `i Σ |∂E_n^r><E_n^l|` alone
    CdOnly,
}

impl DriveKind {
    pub fn name(self) -> &'static str {
        match self {
            DriveKind::Bare => "bare",
            DriveKind::FullCd => "full-cd",
            DriveKind::CdOnly => "cd-only",
        }
    }

    fn select(self, b: CdBundle) -> ComplexMatrix {
        match self {
            DriveKind::Bare => b.h0,
            DriveKind::FullCd => b.total,
            DriveKind::CdOnly => b.cd_only,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Derivatives {
    /// closed-form eigenvector derivatives of the model
    Analytic,
    /// finite differences of the eigenpath
    Numeric,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    #[default]
    Eigenstate,
    Bare,
    Explicit,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    #[default]
    Rk4Fixed,
    Rk4Adaptive,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CustomMatrix {
    /// `H(t) = h_const + t h_rate`, row-major real and imaginary parts
    pub h_const_re: Vec<Vec<f64>>,
    #[serde(default)]
    pub h_const_im: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub h_rate_re: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub h_rate_im: Option<Vec<Vec<f64>>>,
    pub start: f64,
    pub end: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    #[serde(default)]
    pub custom: Option<CustomMatrix>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    #[serde(default)]
    pub kind: DriveKind,
    /// defaults to analytic for the closed-form models, numeric otherwise
    #[serde(default)]
    pub derivatives: Option<Derivatives>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub kind: InitialKind,
    /// eigenstate index or bare level (0-based)
    #[serde(default)]
    pub index: usize,
    #[serde(default)]
    pub re: Vec<f64>,
    #[serde(default)]
    pub im: Vec<f64>,
    /// eigenpath used for fidelities; defaults to `index` for eigenstate
    /// starts and 0 otherwise
    #[serde(default)]
    pub reference: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default)]
    pub method: MethodKind,
    #[serde(default = "default_adaptive_tol")]
    pub adaptive_tol: f64,
}

fn default_step() -> f64 {
    1e-3
}

fn default_half_width() -> f64 {
    6.0
}

fn default_adaptive_tol() -> f64 {
    1e-10
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            step: default_step(),
            half_width: default_half_width(),
            method: MethodKind::default(),
            adaptive_tol: default_adaptive_tol(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// file stem; defaults to `<model>_<drive>`
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "yes")]
    pub schedule_csv: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            name: None,
            schedule_csv: true,
        }
    }
}

/// Pass/fail conditions of a run. Unset entries are not checked.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// `min_t |<ψ|U|ψ_ref>| >= x`
    #[serde(default)]
    pub min_fidelity_u: Option<f64>,
    /// `min_t` normalized overlap `>= x`
    #[serde(default)]
    pub min_fidelity_plain: Option<f64>,
    /// the run must overflow or have `min_t |<ψ|U|ψ_ref>| < x`
    #[serde(default)]
    pub fidelity_u_breakdown: Option<f64>,
    /// the run must overflow or have a normalized overlap below `x`
    #[serde(default)]
    pub fidelity_plain_breakdown: Option<f64>,
    /// final raw population of `final_level` must reach `x`
    #[serde(default)]
    pub final_population: Option<f64>,
    /// 0-based; defaults to the top level
    #[serde(default)]
    pub final_level: Option<usize>,
    /// `|<ψ|ψ> - 1| <= x` at every node
    #[serde(default)]
    pub norm_tolerance: Option<f64>,
    /// relative `|e^{2α} - <ψ|ψ>|`, always checked
    #[serde(default = "default_alpha_tolerance")]
    pub alpha_tolerance: f64,
    #[serde(default)]
    pub max_eta: Option<f64>,
    /// the run passes only if some declared bar above is missed
    #[serde(default)]
    pub expect_fail: bool,
}

fn default_alpha_tolerance() -> f64 {
    1e-8
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            min_fidelity_u: None,
            min_fidelity_plain: None,
            fidelity_u_breakdown: None,
            fidelity_plain_breakdown: None,
            final_population: None,
            final_level: None,
            norm_tolerance: None,
            alpha_tolerance: default_alpha_tolerance(),
            max_eta: None,
            expect_fail: false,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub drive: DriveSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn in_range(name: &str, x: f64, lo: f64, hi: f64) -> Result<()> {
    if x.is_finite() && x >= lo && x <= hi {
        Ok(())
    } else {
        Err(config_err(format!("{name} = {x} outside [{lo}, {hi}]")))
    }
}

impl ExperimentConfig {
    /// Config for one of the built-in schedules with default grid and output.
    pub fn preset(case: Preset, drive: DriveKind) -> Self {
        Self {
            model: ModelSection {
                kind: case.into(),
                custom: None,
            },
            drive: DriveSection {
                kind: drive,
                derivatives: None,
            },
            initial: InitialSection::default(),
            grid: GridSection::default(),
            output: OutputSection::default(),
            thresholds: Thresholds::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn derivatives(&self) -> Derivatives {
        self.drive.derivatives.unwrap_or(match self.model.kind {
            ModelKind::CustomMatrix => Derivatives::Numeric,
            _ => Derivatives::Analytic,
        })
    }

    /// Output file stem.
    pub fn name(&self) -> String {
        self.output
            .name
            .clone()
            .unwrap_or_else(|| format!("{}_{}", self.model.kind.name(), self.drive.kind.name()))
    }

    fn dim(&self) -> usize {
        match &self.model.custom {
            Some(c) if self.model.kind == ModelKind::CustomMatrix => c.h_const_re.len(),
            _ => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        in_range("grid.step", self.grid.step, 1e-7, 0.1)?;
        in_range("grid.half_width", self.grid.half_width, 1e-3, 50.0)?;
        in_range("grid.adaptive_tol", self.grid.adaptive_tol, 1e-15, 1e-3)?;
        match (self.model.kind, &self.model.custom) {
            (ModelKind::CustomMatrix, None) => return Err(config_err("custom-matrix needs a [model.custom] table")),
            (ModelKind::CustomMatrix, Some(c)) => {
                let d = c.h_const_re.len();
                if d == 0 || d > 8 {
                    return Err(config_err(format!("custom matrix dimension {d} outside [1, 8]")));
                }
                for (name, m) in [
                    ("h_const_re", Some(&c.h_const_re)),
                    ("h_const_im", c.h_const_im.as_ref()),
                    ("h_rate_re", c.h_rate_re.as_ref()),
                    ("h_rate_im", c.h_rate_im.as_ref()),
                ] {
                    if let Some(m) = m {
                        if m.len() != d || m.iter().any(|r| r.len() != d) {
                            return Err(config_err(format!("{name} must be {d}x{d}")));
                        }
                        if m.iter().flatten().any(|x| !x.is_finite()) {
                            return Err(config_err(format!("{name} has non-finite entries")));
                        }
                    }
                }
                if !(c.start.is_finite() && c.end.is_finite() && c.end > c.start) {
                    return Err(config_err("custom window needs start < end"));
                }
                if self.drive.derivatives == Some(Derivatives::Analytic) {
                    return Err(config_err("custom-matrix has no analytic derivatives"));
                }
            }
            (_, Some(_)) => return Err(config_err("[model.custom] is only valid for custom-matrix")),
            _ => {}
        }
        let d = self.dim();
        match self.initial.kind {
            InitialKind::Eigenstate | InitialKind::Bare if self.initial.index >= d => {
                return Err(config_err(format!(
                    "initial.index {} out of range for dimension {d}",
                    self.initial.index
                )));
            }
            InitialKind::Explicit => {
                let im_ok = self.initial.im.is_empty() || self.initial.im.len() == d;
                if self.initial.re.len() != d || !im_ok {
                    return Err(config_err(format!("explicit amplitudes need {d} entries")));
                }
                let all = self.initial.re.iter().chain(&self.initial.im);
                if all.clone().any(|x| !x.is_finite()) || all.map(|x| x * x).sum::<f64>() == 0.0 {
                    return Err(config_err("explicit amplitudes must be finite and not all zero"));
                }
            }
            _ => {}
        }
        if self.initial.reference.is_some_and(|r| r >= d) {
            return Err(config_err("initial.reference out of range"));
        }
        let t = &self.thresholds;
        for (name, v) in [
            ("min_fidelity_u", t.min_fidelity_u),
            ("min_fidelity_plain", t.min_fidelity_plain),
            ("fidelity_u_breakdown", t.fidelity_u_breakdown),
            ("fidelity_plain_breakdown", t.fidelity_plain_breakdown),
            ("final_population", t.final_population),
        ] {
            if let Some(v) = v {
                in_range(&format!("thresholds.{name}"), v, 0.0, 10.0)?;
            }
        }
        for (name, v) in [("norm_tolerance", t.norm_tolerance), ("max_eta", t.max_eta)] {
            if let Some(v) = v {
                in_range(&format!("thresholds.{name}"), v, 0.0, 1e6)?;
            }
        }
        in_range("thresholds.alpha_tolerance", t.alpha_tolerance, 0.0, 1.0)?;
        if t.final_level.is_some_and(|l| l >= d) {
            return Err(config_err("thresholds.final_level out of range"));
        }
        if let Some(name) = &self.output.name {
            if name.is_empty() || name.contains(['/', '\\']) {
                return Err(config_err("output.name must be a plain file stem"));
            }
        }
        Ok(())
    }
}

/// Model instance behind a run.
pub enum Setup {
    Model { model: ModelBundle, period: f64 },
    Custom(NumericSchedule),
}

impl Setup {
    pub fn build(cfg: &ExperimentConfig, exec: Execution) -> Result<Self> {
        if let Some(case) = cfg.model.kind.preset_case() {
            let model = preset_schedule_in(case, cfg.grid.half_width)?;
            return Ok(Setup::Model {
                model,
                period: case.period(),
            });
        }
        let c = cfg
            .model
            .custom
            .as_ref()
            .ok_or_else(|| config_err("missing [model.custom]"))?;
        let d = c.h_const_re.len();
        let zeros = vec![vec![0.0; d]; d];
        let pack = |re: &Vec<Vec<f64>>, im: Option<&Vec<Vec<f64>>>| {
            let im = im.unwrap_or(&zeros);
            ComplexMatrix::from_fn(d, |i, j| C64::new(re[i][j], im[i][j]))
        };
        let h_const = pack(&c.h_const_re, c.h_const_im.as_ref());
        let h_rate = pack(c.h_rate_re.as_ref().unwrap_or(&zeros), c.h_rate_im.as_ref());
        let window = Window::new(c.start, c.end)?;
        let schedule = NumericSchedule::new(
            move |t| &h_const + &h_rate.scale(C64::new(t, 0.0)),
            window,
            CUSTOM_CACHE_SAMPLES,
            None,
            exec,
        )?;
        Ok(Setup::Custom(schedule))
    }

    pub fn schedule(&self) -> &dyn Schedule {
        match self {
            Setup::Model { model, .. } => model,
            Setup::Custom(s) => s,
        }
    }

    /// Time unit of `grid.step`.
    pub fn period(&self) -> f64 {
        match self {
            Setup::Model { period, .. } => *period,
            Setup::Custom(_) => 1.0,
        }
    }

    /// Drive matrices of the selected kind.
    pub fn bundle(&self, t: f64, derivatives: Derivatives) -> Result<CdBundle> {
        match (self, derivatives) {
            (Setup::Model { model, .. }, Derivatives::Analytic) => model.analytic_cd(t),
            (Setup::Model { model, .. }, Derivatives::Numeric) => match model.kind() {
                SymmetryKind::Pseudo => cd_pseudo(model, t),
                SymmetryKind::Antipseudo => cd_antipseudo(model, t),
            },
            (Setup::Custom(s), _) => cd_generic(&eigen_jet(s, t)?),
        }
    }

    fn symmetry_matrix(&self, t: f64) -> ComplexMatrix {
        match self {
            Setup::Model { model, .. } => model.symmetry_matrix(t),
            Setup::Custom(s) => ComplexMatrix::identity(s.dim()),
        }
    }
}

/// Summary of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub name: String,
    pub model: String,
    pub drive: String,
    pub derivatives: String,
    pub method: String,
    pub step: f64,
    pub window: (f64, f64),
    pub nodes: usize,
    pub truncated: bool,
    pub truncated_at: Option<f64>,
    pub fidelity_u: (f64, f64),
    pub fidelity_plain: (f64, f64),
    pub final_populations: Vec<f64>,
    pub norm: (f64, f64),
    pub alpha: (f64, f64),
    pub alpha_norm_mismatch: f64,
    pub alpha_rate_mismatch: Option<f64>,
    pub max_eta: f64,
    pub wall_time: f64,
    pub failures: Vec<String>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}: {v}");
        };
        kv("name", self.name.clone());
        kv("model", self.model.clone());
        kv("drive", self.drive.clone());
        kv("derivatives", self.derivatives.clone());
        kv("method", self.method.clone());
        kv("step", fmt_num(self.step));
        kv("window_start", fmt_num(self.window.0));
        kv("window_end", fmt_num(self.window.1));
        kv("nodes", self.nodes.to_string());
        kv("truncated", self.truncated.to_string());
        if let Some(t) = self.truncated_at {
            kv("truncated_at", fmt_num(t));
        }
        kv("fidelity_u_min", fmt_num(self.fidelity_u.0));
        kv("fidelity_u_max", fmt_num(self.fidelity_u.1));
        kv("fidelity_plain_min", fmt_num(self.fidelity_plain.0));
        kv("fidelity_plain_max", fmt_num(self.fidelity_plain.1));
        for (k, p) in self.final_populations.iter().enumerate() {
            kv(&format!("final_p{}", k + 1), fmt_num(*p));
        }
        kv("norm_min", fmt_num(self.norm.0));
        kv("norm_max", fmt_num(self.norm.1));
        kv("alpha_min", fmt_num(self.alpha.0));
        kv("alpha_max", fmt_num(self.alpha.1));
        kv("alpha_norm_mismatch", fmt_num(self.alpha_norm_mismatch));
        if let Some(m) = self.alpha_rate_mismatch {
            kv("alpha_rate_mismatch", fmt_num(m));
        }
        kv("max_eta", fmt_num(self.max_eta));
        kv("eta_flag", (self.max_eta > ETA_FLAG).to_string());
        kv("wall_time_s", format!("{:.3}", self.wall_time));
        kv("pass", self.passed().to_string());
        for f in &self.failures {
            kv("failure", f.clone());
        }
        s
    }
}

/// Everything a run produces, before anything is written.
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub report: RunReport,
    /// schedule table on the trajectory grid
    pub schedule_csv: String,
}

/// Files written by [`run_experiment`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunArtifacts {
    pub trajectory: PathBuf,
    pub schedule: Option<PathBuf>,
    pub report: PathBuf,
}

fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}

fn range(xs: &[f64]) -> (f64, f64) {
    xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    })
}

fn initial_state(cfg: &ExperimentConfig, setup: &Setup, t0: f64) -> Result<StateVector> {
    let d = setup.schedule().dim();
    Ok(match cfg.initial.kind {
        InitialKind::Eigenstate => setup.schedule().eigensystem(t0)?.rights[cfg.initial.index].clone(),
        InitialKind::Bare => StateVector::basis(d, cfg.initial.index),
        InitialKind::Explicit => StateVector::new(
            (0..d)
                .map(|k| C64::new(cfg.initial.re[k], cfg.initial.im.get(k).copied().unwrap_or(0.0)))
                .collect(),
        ),
    })
}

/// Runs a config in memory.
pub fn execute(cfg: &ExperimentConfig, exec: Execution) -> Result<RunOutput> {
    cfg.validate()?;
    let clock = Instant::now();
    let setup = Setup::build(cfg, exec)?;
    let schedule = setup.schedule();
    let window = schedule.window();
    let step = cfg.grid.step * setup.period();
    let grid = window.grid(step)?;
    let psi0 = initial_state(cfg, &setup, window.start)?;
    let derivatives = cfg.derivatives();
    let drive_kind = cfg.drive.kind;

    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let drive = |t: f64| match setup.bundle(t, derivatives) {
        Ok(b) => drive_kind.select(b),
        Err(e) => {
            failure.lock().expect("drive error slot").get_or_insert(e);
            ComplexMatrix::from_fn(schedule.dim(), |_, _| C64::new(f64::NAN, 0.0))
        }
    };
    let recover = |e: Error| failure.lock().expect("drive error slot").take().unwrap_or(e);

    let (mut traj, h_nodes) = match cfg.grid.method {
        MethodKind::Rk4Fixed => {
            let samples = DriveSamples::tabulate(drive, &grid, exec).map_err(recover)?;
            let traj = integrate_sampled(&samples, &psi0)?;
            (traj, samples.nodes)
        }
        MethodKind::Rk4Adaptive => {
            let method = Method::Rk4Adaptive {
                tol: cfg.grid.adaptive_tol,
            };
            let traj = crate::dynamics::integrate(drive, &psi0, &grid, method, exec).map_err(recover)?;
            let nodes = par::map(exec, traj.len(), |k| drive(traj.grid[k]));
            if let Some(e) = failure.lock().expect("drive error slot").take() {
                return Err(e);
            }
            (traj, nodes)
        }
    };

    let reference_index = cfg.initial.reference.unwrap_or(match cfg.initial.kind {
        InitialKind::Eigenstate => cfg.initial.index,
        _ => 0,
    });
    let reference = adiabatic_reference(schedule, &grid, reference_index, true, exec)?;
    let u = |t: f64| setup.symmetry_matrix(t);
    observables(&mut traj, Some(&u), Some(&reference))?;
    project_phase_decomposition(&mut traj, &h_nodes)?;

    let coarse = window.grid(window.length() / (ETA_SAMPLES - 1) as f64)?;
    let eta = metric_profile(schedule, &coarse, exec)?;
    let max_eta = eta.iter().copied().fold(0.0, f64::max);

    let schedule_csv = schedule_csv_string(schedule, &traj.grid);
    let mut report = RunReport {
        name: cfg.name(),
        model: cfg.model.kind.name().into(),
        drive: drive_kind.name().into(),
        derivatives: match derivatives {
            Derivatives::Analytic => "analytic".into(),
            Derivatives::Numeric => "numeric".into(),
        },
        method: match cfg.grid.method {
            MethodKind::Rk4Fixed => "rk4-fixed".into(),
            MethodKind::Rk4Adaptive => "rk4-adaptive".into(),
        },
        step,
        window: (window.start, window.end),
        nodes: traj.len(),
        truncated: traj.truncated,
        truncated_at: traj.truncated.then(|| *traj.grid.last().expect("non-empty")),
        fidelity_u: range(&traj.fidelity_u),
        fidelity_plain: range(&traj.fidelity_plain),
        final_populations: traj.populations.last().cloned().unwrap_or_default(),
        norm: range(&traj.norm),
        alpha: range(&traj.alpha),
        alpha_norm_mismatch: traj.alpha_norm_mismatch(),
        alpha_rate_mismatch: traj.alpha_rate_mismatch,
        max_eta,
        wall_time: 0.0,
        failures: Vec::new(),
    };
    report.failures = check_thresholds(&cfg.thresholds, &traj, &report);
    report.wall_time = clock.elapsed().as_secs_f64();
    Ok(RunOutput {
        trajectory: traj,
        report,
        schedule_csv,
    })
}

fn check_thresholds(th: &Thresholds, traj: &Trajectory, r: &RunReport) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(x) = th.min_fidelity_u {
        if r.truncated || r.fidelity_u.0 < x {
            out.push(format!("min fidelity_u {} < {x}", r.fidelity_u.0));
        }
    }
    if let Some(x) = th.min_fidelity_plain {
        if r.truncated || r.fidelity_plain.0 < x {
            out.push(format!("min fidelity_plain {} < {x}", r.fidelity_plain.0));
        }
    }
    if let Some(x) = th.fidelity_u_breakdown {
        if !r.truncated && r.fidelity_u.0 >= x {
            out.push(format!(
                "no breakdown: min fidelity_u {} >= {x} without overflow",
                r.fidelity_u.0
            ));
        }
    }
    if let Some(x) = th.fidelity_plain_breakdown {
        if !r.truncated && r.fidelity_plain.0 >= x {
            out.push(format!(
                "no breakdown: min fidelity_plain {} >= {x} without overflow",
                r.fidelity_plain.0
            ));
        }
    }
    if let Some(x) = th.final_population {
        let level = th.final_level.unwrap_or(traj.dim().saturating_sub(1));
        let p = r.final_populations.get(level).copied().unwrap_or(f64::NAN);
        if r.truncated || !(p >= x) {
            out.push(format!("final P{} = {p} < {x}", level + 1));
        }
    }
    if let Some(x) = th.norm_tolerance {
        let worst = traj.norm.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max);
        if worst > x {
            out.push(format!("norm deviates by {worst:e} > {x:e}"));
        }
    }
    if let Some(x) = th.max_eta {
        if r.max_eta > x {
            out.push(format!("max eta {} > {x}", r.max_eta));
        }
    }
    if th.expect_fail {
        out = if out.is_empty() {
            vec!["every declared bar was met, expected a miss".into()]
        } else {
            Vec::new()
        };
    }
    if r.alpha_norm_mismatch > th.alpha_tolerance {
        out.push(format!(
            "alpha/norm mismatch {:e} > {:e}",
            r.alpha_norm_mismatch, th.alpha_tolerance
        ));
    }
    out
}

/// Column names of a trajectory CSV with `dim` levels.
pub fn trajectory_header(dim: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for k in 1..=dim {
        cols.push(format!("re{k}"));
        cols.push(format!("im{k}"));
    }
    cols.extend((1..=dim).map(|k| format!("p{k}")));
    cols.extend((1..=dim).map(|k| format!("p{k}_renorm")));
    for c in ["norm", "fidelity_u", "fidelity_plain", "alpha", "beta"] {
        cols.push(c.into());
    }
    cols
}

pub fn trajectory_csv_string(traj: &Trajectory) -> String {
    let d = traj.dim();
    let renorm = traj.renormalized_populations();
    let col = |v: &Vec<f64>, i: usize| v.get(i).copied().unwrap_or(f64::NAN);
    let mut s = trajectory_header(d).join(",");
    s.push('\n');
    for i in 0..traj.len() {
        let mut row = vec![traj.grid[i]];
        for z in traj.states[i].iter() {
            row.push(z.re);
            row.push(z.im);
        }
        row.extend(&traj.populations[i]);
        row.extend(&renorm[i]);
        row.push(traj.norm[i]);
        row.push(col(&traj.fidelity_u, i));
        row.push(col(&traj.fidelity_plain, i));
        row.push(col(&traj.alpha, i));
        row.push(col(&traj.beta, i));
        let cells: Vec<String> = row.into_iter().map(fmt_num).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Control parameters and their rates (`d_<name>`) on `grid`. Schedules
/// without named parameters report `‖H‖_F`.
pub fn schedule_csv_string(s: &dyn Schedule, grid: &[f64]) -> String {
    let names: Vec<&str> = match grid.first() {
        Some(&t) => s.parameters(t).into_iter().map(|(n, _)| n).collect(),
        None => Vec::new(),
    };
    let mut out = String::from("t");
    if names.is_empty() {
        out.push_str(",h_norm");
    }
    for n in &names {
        let _ = write!(out, ",{n}");
    }
    for n in &names {
        let _ = write!(out, ",d_{n}");
    }
    out.push('\n');
    for &t in grid {
        let mut row = vec![t];
        if names.is_empty() {
            row.push(s.hamiltonian(t).frobenius_norm());
        }
        row.extend(s.parameters(t).into_iter().map(|(_, v)| v));
        row.extend(s.parameter_rates(t).into_iter().map(|(_, v)| v));
        let cells: Vec<String> = row.into_iter().map(fmt_num).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Output directory: explicit override, then the config, then `out`.
pub fn output_dir(cfg: &ExperimentConfig, over: Option<&Path>) -> PathBuf {
    over.map(Path::to_path_buf)
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Runs a config and writes `<name>.csv`, `<name>_schedule.csv` and
/// `<name>_report.txt` into `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path, exec: Execution) -> Result<(RunArtifacts, RunReport)> {
    let out = execute(cfg, exec)?;
    std::fs::create_dir_all(dir)?;
    let name = cfg.name();
    let trajectory = dir.join(format!("{name}.csv"));
    std::fs::write(&trajectory, trajectory_csv_string(&out.trajectory))?;
    let schedule = if cfg.output.schedule_csv {
        let p = dir.join(format!("{name}_schedule.csv"));
        std::fs::write(&p, &out.schedule_csv)?;
        Some(p)
    } else {
        None
    };
    let report = dir.join(format!("{name}_report.txt"));
    std::fs::write(&report, out.report.to_text())?;
    Ok((
        RunArtifacts {
            trajectory,
            schedule,
            report,
        },
        out.report,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepModel {
    /// `x = γ/ω` at `√(ω²+γ²)/2 = 1`, `φ = 0`
    Pseudo,
    /// `x = Ω/γ` at `γ = 1`, `Ω1 = Ω2`
    Antipseudo,
}

impl std::str::FromStr for SweepModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pseudo" => Ok(SweepModel::Pseudo),
            "antipseudo" => Ok(SweepModel::Antipseudo),
            _ => Err(Error::InvalidArgument(format!("unknown sweep model `{s}`"))),
        }
    }
}

impl SweepModel {
    pub fn hamiltonian(self, x: f64) -> Result<ComplexMatrix> {
        match self {
            SweepModel::Pseudo => {
                let w = 2.0 / (1.0 + x * x).sqrt();
                stirap_hamiltonian(&StirapParams::pseudo(w, x * w, 0.0))
            }
            SweepModel::Antipseudo => {
                let o = x / std::f64::consts::SQRT_2;
                stirap_hamiltonian(&StirapParams::antipseudo(o, o, 1.0))
            }
        }
    }
}

/// Eigenvalues along a parameter sweep; `None` marks samples refused at an
/// exceptional point.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumTable {
    pub x: Vec<f64>,
    pub values: Vec<Option<Vec<C64>>>,
}

impl SpectrumTable {
    pub fn skipped(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn to_csv(&self) -> String {
        let d = self.values.iter().flatten().map(Vec::len).next().unwrap_or(0);
        let mut s = String::from("x");
        for k in 1..=d {
            let _ = write!(s, ",re_e{k},im_e{k}");
        }
        s.push_str(",skipped\n");
        for (x, v) in self.x.iter().zip(&self.values) {
            s.push_str(&fmt_num(*x));
            match v {
                Some(v) => {
                    for z in v {
                        let _ = write!(s, ",{},{}", fmt_num(z.re), fmt_num(z.im));
                    }
                    s.push_str(",0\n");
                }
                None => {
                    for _ in 0..d {
                        s.push_str(",nan,nan");
                    }
                    s.push_str(",1\n");
                }
            }
        }
        s
    }
}

/// Samples `x` uniformly on `[lo, hi]`; columns after the first valid
/// sample follow the eigenvalue closest to the previous one.
pub fn spectrum_sweep(model: SweepModel, lo: f64, hi: f64, samples: usize, exec: Execution) -> Result<SpectrumTable> {
    if samples < 2 || !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::InvalidArgument(
            "sweep needs lo < hi and at least two samples".into(),
        ));
    }
    let x: Vec<f64> = (0..samples)
        .map(|k| lo + (hi - lo) * k as f64 / (samples - 1) as f64)
        .collect();
    let raw = par::try_map(exec, samples, |k| {
        let h = model.hamiltonian(x[k])?;
        match eig(&h) {
            Ok(p) => Ok(Some(p.values)),
            Err(Error::DegenerateSpectrum(..)) => Ok(None),
            Err(e) => Err(e),
        }
    })?;
    let mut values: Vec<Option<Vec<C64>>> = Vec::with_capacity(samples);
    let mut previous: Option<Vec<C64>> = None;
    for v in raw {
        let Some(mut v) = v else {
            values.push(None);
            continue;
        };
        match &previous {
            None => {
                let scale = v.iter().fold(1.0f64, |m, z| m.max(z.norm()));
                v.sort_by(|a, b| spectral_order(*a, *b, scale));
            }
            Some(prev) => v = follow(prev, v),
        }
        previous = Some(v.clone());
        values.push(Some(v));
    }
    Ok(SpectrumTable { x, values })
}

/// Greedy nearest-eigenvalue assignment to the previous column order.
fn follow(prev: &[C64], mut current: Vec<C64>) -> Vec<C64> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in prev.iter().enumerate() {
        for (j, c) in current.iter().enumerate() {
            pairs.push(((p - c).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = vec![None; prev.len()];
    let mut used = vec![false; current.len()];
    for (_, i, j) in pairs {
        if out[i].is_none() && !used[j] {
            out[i] = Some(j);
            used[j] = true;
        }
    }
    out.into_iter()
        .map(|j| std::mem::take(&mut current[j.expect("square assignment")]))
        .collect()
}

/// Column layout recognised by [`emit_plots`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CsvKind {
    Trajectory { levels: usize },
    Schedule { columns: Vec<String> },
    Spectrum { levels: usize },
}

pub fn classify_header(header: &str) -> Result<CsvKind> {
    let cols: Vec<String> = header.trim().split(',').map(|c| c.trim().to_string()).collect();
    match cols.first().map(String::as_str) {
        Some("t") if cols.len() >= 2 && cols.iter().skip(1).all(|c| !c.is_empty()) => {
            let levels = cols.iter().filter(|c| c.starts_with("re")).count();
            if levels > 0 && cols == trajectory_header(levels) {
                return Ok(CsvKind::Trajectory { levels });
            }
            if levels == 0 && !cols.iter().any(|c| c == "norm") {
                return Ok(CsvKind::Schedule {
                    columns: cols[1..].to_vec(),
                });
            }
        }
        Some("x") if cols.last().map(String::as_str) == Some("skipped") => {
            let levels = (cols.len() - 2) / 2;
            let expect: Vec<String> = std::iter::once("x".to_string())
                .chain((1..=levels).flat_map(|k| [format!("re_e{k}"), format!("im_e{k}")]))
                .chain(std::iter::once("skipped".to_string()))
                .collect();
            if levels > 0 && cols == expect {
                return Ok(CsvKind::Spectrum { levels });
            }
        }
        _ => {}
    }
    Err(Error::Schema(format!("unrecognised header `{}`", header.trim())))
}

pub fn classify_csv(path: &Path) -> Result<CsvKind> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    let header = text
        .lines()
        .next()
        .ok_or_else(|| Error::Schema(format!("{}: empty file", path.display())))?;
    classify_header(header).map_err(|e| match e {
        Error::Schema(m) => Error::Schema(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PlotStyle {
    /// bare populations, driven populations, fidelities, schedule
    #[default]
    FourPanel,
    /// all trajectories overlaid: populations and fidelities
    Overlay,
}

impl std::str::FromStr for PlotStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "four-panel" => Ok(PlotStyle::FourPanel),
            "overlay" => Ok(PlotStyle::Overlay),
            _ => Err(Error::InvalidArgument(format!("unknown plot style `{s}`"))),
        }
    }
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().replace('"', "")).unwrap_or_default()
}

fn py_str(p: &Path) -> String {
    format!("{:?}", p.display().to_string())
}

/// Writes a matplotlib script that renders the given CSVs. Every file is
/// checked against the known column layouts first; nothing is written if
/// any check fails.
pub fn emit_plots(csvs: &[PathBuf], script: &Path, style: PlotStyle) -> Result<()> {
    if csvs.is_empty() {
        return Err(Error::Schema("no CSV files given".into()));
    }
    let mut traj = Vec::new();
    let mut sched = Vec::new();
    let mut spec = Vec::new();
    for p in csvs {
        match classify_csv(p)? {
            CsvKind::Trajectory { levels } => traj.push((p, levels)),
            CsvKind::Schedule { columns } => sched.push((p, columns)),
            CsvKind::Spectrum { levels } => spec.push((p, levels)),
        }
    }
    let image = script.with_extension("png");
    let mut s = String::new();
    s.push_str("#!/usr/bin/env python3\n# generated by nhsta; renders the listed CSV files with matplotlib\n");
    s.push_str("import numpy as np\nimport matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n");
    s.push_str("def load(path):\n    return np.genfromtxt(path, delimiter=\",\", names=True)\n\n");
    if !spec.is_empty() {
        s.push_str("fig, (ax_re, ax_im) = plt.subplots(1, 2, figsize=(10, 4))\n");
        for (p, levels) in &spec {
            let _ = writeln!(s, "d = load({})", py_str(p));
            for k in 1..=*levels {
                let _ = writeln!(s, "ax_re.plot(d[\"x\"], d[\"re_e{k}\"], \".\", ms=2, label=\"E{k}\")");
                let _ = writeln!(s, "ax_im.plot(d[\"x\"], d[\"im_e{k}\"], \".\", ms=2, label=\"E{k}\")");
            }
        }
        s.push_str("ax_re.set_xlabel(\"x\")\nax_re.set_ylabel(\"Re E\")\nax_im.set_xlabel(\"x\")\nax_im.set_ylabel(\"Im E\")\nax_re.legend()\n");
        if !traj.is_empty() || !sched.is_empty() {
            let _ = writeln!(
                s,
                "fig.tight_layout()\nfig.savefig({})\n",
                py_str(&script.with_extension("spectrum.png"))
            );
        }
    }
    if !traj.is_empty() || !sched.is_empty() {
        let pops = |s: &mut String, ax: &str, p: &Path, levels: usize, tag: &str| {
            let _ = writeln!(s, "d = load({})", py_str(p));
            for k in 1..=levels {
                let _ = writeln!(s, "{ax}.plot(d[\"t\"], d[\"p{k}\"], label=\"{tag}P{k}\")");
            }
        };
        match style {
            PlotStyle::FourPanel => {
                s.push_str("fig, axes = plt.subplots(2, 2, figsize=(10, 8))\n");
                s.push_str("ax_a, ax_b, ax_c, ax_d = axes.ravel()\n");
                if let Some((p, l)) = traj.first() {
                    pops(&mut s, "ax_a", p, *l, "");
                    let _ = writeln!(s, "ax_a.set_title(\"populations: {}\")\nax_a.legend()", stem(p));
                }
                if let Some((p, l)) = traj.get(1) {
                    pops(&mut s, "ax_b", p, *l, "");
                    let _ = writeln!(s, "ax_b.set_title(\"populations: {}\")\nax_b.legend()", stem(p));
                }
                for (p, _) in &traj {
                    let _ = writeln!(s, "d = load({})", py_str(p));
                    let _ = writeln!(s, "ax_c.plot(d[\"t\"], d[\"fidelity_u\"], label=\"{} F_U\")", stem(p));
                    let _ = writeln!(s, "ax_c.plot(d[\"t\"], d[\"fidelity_plain\"], \"--\", label=\"{} plain\")", stem(p));
                }
                s.push_str("ax_c.set_title(\"fidelity\")\n");
                if !traj.is_empty() {
                    s.push_str("ax_c.legend()\n");
                }
                for (p, cols) in &sched {
                    let _ = writeln!(s, "d = load({})", py_str(p));
                    for c in cols.iter().filter(|c| !c.starts_with("d_")) {
                        let _ = writeln!(s, "ax_d.plot(d[\"t\"], d[\"{c}\"], label=\"{c}\")");
                    }
                }
                s.push_str("ax_d.set_title(\"schedule (natural units)\")\n");
                if !sched.is_empty() {
                    s.push_str("ax_d.legend()\n");
                }
                s.push_str("for ax in axes.ravel():\n    ax.set_xlabel(\"t\")\n");
            }
            PlotStyle::Overlay => {
                s.push_str("fig, (ax_p, ax_f) = plt.subplots(1, 2, figsize=(10, 4))\n");
                for (p, l) in &traj {
                    pops(&mut s, "ax_p", p, *l, &format!("{} ", stem(p)));
                    let _ = writeln!(s, "ax_f.plot(d[\"t\"], d[\"fidelity_u\"], label=\"{}\")", stem(p));
                }
                for (p, cols) in &sched {
                    let _ = writeln!(s, "d = load({})", py_str(p));
                    for c in cols.iter().filter(|c| !c.starts_with("d_")) {
                        let _ = writeln!(s, "ax_f.plot(d[\"t\"], d[\"{c}\"], \"--\", label=\"{c}\")");
                    }
                }
                s.push_str("ax_p.legend()\nax_f.legend()\nax_p.set_xlabel(\"t\")\nax_f.set_xlabel(\"t\")\n");
            }
        }
    }
    let _ = writeln!(s, "fig.tight_layout()\nfig.savefig({})", py_str(&image));
    if let Some(parent) = script.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(script, s)?;
    Ok(())
}

/// One line of the verification suite.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn suite_config(case: Preset, drive: DriveKind, th: Thresholds) -> ExperimentConfig {
    let mut c = ExperimentConfig::preset(case, drive);
    c.thresholds = th;
    c
}

/// The built-in runs with their default thresholds.
pub fn suite_configs() -> Vec<ExperimentConfig> {
    let th = Thresholds::default;
    vec![
        suite_config(
            Preset::PseudoReal,
            DriveKind::FullCd,
            Thresholds {
                min_fidelity_u: Some(0.999),
                ..th()
            },
        ),
        suite_config(
            Preset::PseudoReal,
            DriveKind::Bare,
            Thresholds {
                fidelity_plain_breakdown: Some(0.999),
                ..th()
            },
        ),
        suite_config(
            Preset::PseudoComplex,
            DriveKind::CdOnly,
            Thresholds {
                min_fidelity_u: Some(0.999),
                ..th()
            },
        ),
        suite_config(
            Preset::PseudoComplex,
            DriveKind::FullCd,
            Thresholds {
                fidelity_u_breakdown: Some(0.9),
                ..th()
            },
        ),
        suite_config(
            Preset::PseudoComplex,
            DriveKind::Bare,
            Thresholds {
                fidelity_u_breakdown: Some(0.9),
                ..th()
            },
        ),
        suite_config(
            Preset::Antipseudo,
            DriveKind::CdOnly,
            Thresholds {
                final_population: Some(0.99),
                final_level: Some(2),
                norm_tolerance: Some(1e-6),
                ..th()
            },
        ),
        suite_config(
            Preset::Antipseudo,
            DriveKind::Bare,
            Thresholds {
                fidelity_plain_breakdown: Some(0.999),
                ..th()
            },
        ),
    ]
}

/// Runs the built-in reproductions and the spectrum and self-normalization
/// checks. Runs are independent and spread per `exec`.
pub fn verify_suite(exec: Execution) -> Result<Vec<SuiteCheck>> {
    let configs = suite_configs();
    let runs = par::try_map(exec, configs.len(), |k| execute(&configs[k], Execution::Sequential))?;
    let mut out: Vec<SuiteCheck> = runs
        .iter()
        .map(|r| SuiteCheck {
            name: r.report.name.clone(),
            passed: r.report.passed(),
            detail: if r.report.passed() {
                format!(
                    "F_U min {:.6}, plain min {:.6}, norm max {:.3e}{}",
                    r.report.fidelity_u.0,
                    r.report.fidelity_plain.0,
                    r.report.norm.1,
                    if r.report.truncated { ", truncated" } else { "" }
                )
            } else {
                r.report.failures.join("; ")
            },
        })
        .collect();

    let table = spectrum_sweep(SweepModel::Pseudo, 0.0, 2.0, 400, exec)?;
    let mut worst: f64 = 0.0;
    for (x, v) in table.x.iter().zip(&table.values) {
        let Some(v) = v else { continue };
        let half = C64::new(1.0 - x * x, 0.0).sqrt() * (1.0 / (1.0 + x * x).sqrt());
        for target in [C64::new(0.0, 0.0), half, -half] {
            let d = v.iter().map(|z| (z - target).norm()).fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    out.push(SuiteCheck {
        name: "pseudo_spectrum_sweep".into(),
        passed: worst <= 1e-10 && table.skipped() == 0,
        detail: format!("max |E - closed form| = {worst:.3e}, skipped {}", table.skipped()),
    });

    let model = preset_schedule_in(Preset::Antipseudo, 6.0)?;
    let w = model.window();
    let grid = w.grid(w.length() / 1000.0)?;
    let mut worst: f64 = 0.0;
    let mut holds = true;
    for &t in &grid {
        let es = model.analytic_eigensystem(t)?;
        let r = check_self_normalized(
            &model.hamiltonian(t),
            &model.symmetry_matrix(t),
            &es.rights[0],
            es.eigenvalues[0],
            SymmetryKind::Antipseudo,
            1e-9,
        )?;
        holds &= r.holds;
        worst = worst.max(r.real_residual).max(r.imag_residual);
    }
    out.push(SuiteCheck {
        name: "antipseudo_self_normalized".into(),
        passed: holds && worst <= 1e-9,
        detail: format!("max residual {worst:.3e} over {} nodes", grid.len()),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[model]\nkind = \"pseudo-real\"\n";

    #[test]
    fn parses_minimal_and_defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.model.kind, ModelKind::PseudoReal);
        assert_eq!(c.drive.kind, DriveKind::FullCd);
        assert_eq!(c.derivatives(), Derivatives::Analytic);
        assert_eq!(c.grid.step, 1e-3);
        assert_eq!(c.name(), "pseudo-real_full-cd");
        assert!(c.output.schedule_csv);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_ranges() {
        let unknown = format!("{MINIMAL}colour = 1\n");
        assert!(matches!(ExperimentConfig::from_toml(&unknown), Err(Error::Config(_))));
        let nested = "[model]\nkind = \"pseudo-real\"\n[grid]\nstepp = 1e-3\n";
        assert!(matches!(ExperimentConfig::from_toml(nested), Err(Error::Config(_))));
        let bad_kind = "[model]\nkind = \"hermitian\"\n";
        assert!(matches!(ExperimentConfig::from_toml(bad_kind), Err(Error::Config(_))));
        let step = format!("{MINIMAL}[grid]\nstep = 0.5\n");
        assert!(matches!(ExperimentConfig::from_toml(&step), Err(Error::Config(_))));
        let idx = format!("{MINIMAL}[initial]\nindex = 3\n");
        assert!(matches!(ExperimentConfig::from_toml(&idx), Err(Error::Config(_))));
        let explicit = format!("{MINIMAL}[initial]\nkind = \"explicit\"\nre = [1.0, 0.0]\n");
        assert!(matches!(ExperimentConfig::from_toml(&explicit), Err(Error::Config(_))));
        let custom = "[model]\nkind = \"custom-matrix\"\n";
        assert!(matches!(ExperimentConfig::from_toml(custom), Err(Error::Config(_))));
        let name = format!("{MINIMAL}[output]\nname = \"a/b\"\n");
        assert!(matches!(ExperimentConfig::from_toml(&name), Err(Error::Config(_))));
    }

    fn custom_config() -> ExperimentConfig {
        ExperimentConfig::from_toml(
            r#"
[model]
kind = "custom-matrix"
[model.custom]
h_const_re = [[1.0, 0.5], [0.5, -1.0]]
h_rate_re = [[0.0, 0.2], [0.2, 0.0]]
start = 0.0
end = 2.0
[drive]
kind = "full-cd"
[grid]
step = 2e-3
[thresholds]
min_fidelity_plain = 0.999999
"#,
        )
        .unwrap()
    }

    #[test]
    fn custom_matrix_cd_tracks_eigenstate() {
        let cfg = custom_config();
        assert_eq!(cfg.derivatives(), Derivatives::Numeric);
        let out = execute(&cfg, Execution::default()).unwrap();
        assert!(out.report.passed(), "{:?}", out.report.failures);
        // Hermitian drive: norm stays 1 and α vanishes
        assert!(out.report.alpha.0.abs() < 1e-9 && out.report.alpha.1.abs() < 1e-9);
        assert!(out.schedule_csv.starts_with("t,h_norm\n"));
    }

    #[test]
    fn csv_is_deterministic_and_schema_valid() {
        let cfg = custom_config();
        let a = trajectory_csv_string(&execute(&cfg, Execution::Sequential).unwrap().trajectory);
        let b = trajectory_csv_string(&execute(&cfg, Execution::default()).unwrap().trajectory);
        assert_eq!(a, b);
        let header = a.lines().next().unwrap();
        assert_eq!(classify_header(header).unwrap(), CsvKind::Trajectory { levels: 2 });
        let row: Vec<&str> = a.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row.len(), trajectory_header(2).len());
        assert_eq!(row[0], "0.00000000000e0");
    }

    #[test]
    fn header_classification() {
        assert!(matches!(
            classify_header("t,omega,gamma,d_omega,d_gamma"),
            Ok(CsvKind::Schedule { .. })
        ));
        assert_eq!(
            classify_header("x,re_e1,im_e1,skipped").unwrap(),
            CsvKind::Spectrum { levels: 1 }
        );
        assert!(matches!(classify_header("a,b,c"), Err(Error::Schema(_))));
        assert!(matches!(classify_header("t,re1,im1,p1"), Err(Error::Schema(_))));
    }

    #[test]
    fn sweep_limits() {
        let t = spectrum_sweep(SweepModel::Pseudo, 0.0, 0.5, 3, Execution::default()).unwrap();
        let v = t.values[0].as_ref().unwrap();
        // Hermitian limit: E = -ω/2, 0, ω/2 with ω = 2
        assert!((v[0] - C64::new(-1.0, 0.0)).norm() < 1e-12);
        assert!((v[2] - C64::new(1.0, 0.0)).norm() < 1e-12);
        let ap = spectrum_sweep(SweepModel::Antipseudo, 0.0, 2.0, 5, Execution::default()).unwrap();
        assert!(ap.values[0].is_none());
        assert_eq!(ap.skipped(), 1);
        assert!(ap.to_csv().lines().nth(1).unwrap().ends_with(",1"));
        assert!(spectrum_sweep(SweepModel::Pseudo, 1.0, 1.0, 3, Execution::default()).is_err());
    }

    #[test]
    fn follow_keeps_columns() {
        let prev = [C64::new(-1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let cur = vec![C64::new(0.9, 0.0), C64::new(-0.9, 0.0), C64::new(0.01, 0.0)];
        let f = follow(&prev, cur);
        assert_eq!(f, vec![C64::new(-0.9, 0.0), C64::new(0.01, 0.0), C64::new(0.9, 0.0)]);
    }

    #[test]
    fn emit_plots_rejects_empty_and_bad_schema() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let script = dir.join("plot.py");
        assert!(matches!(
            emit_plots(&[], &script, PlotStyle::FourPanel),
            Err(Error::Schema(_))
        ));
        assert!(!script.exists());
        let bad = dir.join("bad.csv");
        std::fs::write(&bad, "a,b\n1,2\n").unwrap();
        assert!(matches!(
            emit_plots(&[bad], &script, PlotStyle::FourPanel),
            Err(Error::Schema(_))
        ));
        assert!(!script.exists());
    }

    #[test]
    fn report_lines_are_key_value() {
        let out = execute(&custom_config(), Execution::default()).unwrap();
        let text = out.report.to_text();
        for line in text.lines() {
            let (k, v) = line.split_once(": ").expect("key: value");
            assert!(!k.is_empty() && !v.is_empty());
        }
        assert!(text.contains("pass: true"));
        assert!(text.contains("eta_flag: "));
    }

    #[test]
    fn expect_fail_inverts_the_bar() {
        let mut cfg = custom_config();
        cfg.thresholds.expect_fail = true;
        let r = execute(&cfg, Execution::default()).unwrap().report;
        assert_eq!(r.failures.len(), 1);
        cfg.thresholds.min_fidelity_plain = Some(1.5);
        assert!(execute(&cfg, Execution::default()).unwrap().report.passed());
    }
}
