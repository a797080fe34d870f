//! Canned benchmark problems: the standing-vortex conservation study, the
//! decaying-vortex (Taylor-Green) convergence study, and channel flow past a
//! cylinder with drag, lift, and pressure-drop tracking.
//!
//! Each driver builds its own mesh, boundary conditions, and initial data,
//! runs one trajectory through [`NsSolver::run`], and returns the per-step
//! [`DiagnosticsSeries`] plus problem-specific summary numbers. Nonlinear
//! blow-up is a reportable outcome, not an error: the series up to the last
//! accepted step and its time stamp come back to the caller.
//!
//! A note on the standing-vortex exact field, which is piecewise radial with
//! interfaces at r = 0.2 and r = 0.4. A widely circulated transcription of
//! the annulus velocity reads (2y/r + 5y, 2x/r - 5x); that field is
//! discontinuous at r = 0.2 and its curl is not the matching printed
//! vorticity 2/r - 10. The field implemented here is
//! (-2y/r + 5y, 2x/r - 5x) = (2 - 5r) (-y, x) / r, the unique tangential
//! field continuous at r = 0.2 whose curl is 2/r - 10. The pressure keeps
//! its conventional integration constants, under which the annulus piece
//! meets the core continuously at r = 0.2 but misses zero at r = 0.4 by
//! -4.8 (the 20(0.4)^2 term in C2 would have to be 20(0.4) for continuity).
//! Velocity continuity is asserted by tests; the pressure jump is kept as
//! printed and documented here.

use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use crate::diagnostics::{
    drag_lift, DiagnosticsError, DiagnosticsRecord, DragScaling, PressureProbe,
};
use crate::forms::{FormConfig, FormulationKind};
use crate::mesh::{BoundaryTag, Mesh, MeshError};
use crate::scalar::Real;
use crate::space::{CellQuad, MixedSpace, ProjectionOptions, QuadContext, State};
use crate::system::linear::LinearError;
use crate::system::{
    BcSet, NsProblem, NsSolver, PressureMode, RunOutput, Scheme, StepHook, StepperConfig,
    SystemError, VelBc,
};
use crate::vorticity::{
    curl_project, curl_project_zero_trace, enstrophy, total_vorticity, velocity_midpoint,
    VorticityBc, VorticityState, VorticityStepper,
};

/// Inner radius of the standing vortex: rigid rotation inside.
const VORTEX_CORE_R: f64 = 0.2;
/// Outer radius: the field is identically zero beyond it.
const VORTEX_OUTER_R: f64 = 0.4;

fn gresho_c2() -> f64 {
    // Conventional printed constant; see the module docs for the resulting
    // pressure jump at the outer radius.
    -12.5 * VORTEX_OUTER_R * VORTEX_OUTER_R + 20.0 * VORTEX_OUTER_R * VORTEX_OUTER_R
        - 4.0 * VORTEX_OUTER_R.ln()
}

fn gresho_c1() -> f64 {
    gresho_c2() - 20.0 * VORTEX_CORE_R + 4.0 * VORTEX_CORE_R.ln()
}

/// Radial piece of the standing-vortex field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreshoPiece {
    /// r <= 0.2: rigid rotation.
    Core,
    /// 0.2 <= r <= 0.4: decaying swirl.
    Annulus,
    /// r >= 0.4: fluid at rest.
    Outside,
}

impl GreshoPiece {
    pub fn classify<T: Real>(r: T) -> Self {
        if r <= T::of(VORTEX_CORE_R) {
            GreshoPiece::Core
        } else if r <= T::of(VORTEX_OUTER_R) {
            GreshoPiece::Annulus
        } else {
            GreshoPiece::Outside
        }
    }
}

/// One branch of the standing-vortex exact field, evaluated regardless of
/// which piece the point actually lies in; interface continuity tests sample
/// the two adjacent branches at the same point. The annulus branch divides
/// by r and requires r > 0.
pub fn gresho_piece<T: Real>(x: [T; 2], piece: GreshoPiece) -> ([T; 2], T) {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let r = r2.sqrt();
    match piece {
        GreshoPiece::Core => (
            [T::of(-5.0) * x[1], T::of(5.0) * x[0]],
            T::of(12.5) * r2 + T::of(gresho_c1()),
        ),
        GreshoPiece::Annulus => {
            let ut = T::of(2.0) - T::of(5.0) * r;
            (
                [-ut * x[1] / r, ut * x[0] / r],
                T::of(12.5) * r2 - T::of(20.0) * r + T::of(4.0) * r.ln() + T::of(gresho_c2()),
            )
        }
        GreshoPiece::Outside => ([T::zero(); 2], T::zero()),
    }
}

/// Standing-vortex exact velocity and pressure at a point of the centered
/// unit square.
pub fn gresho_exact<T: Real>(x: [T; 2]) -> ([T; 2], T) {
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    gresho_piece(x, GreshoPiece::classify(r))
}

/// Velocity component of [`gresho_exact`].
pub fn gresho_velocity<T: Real>(x: [T; 2]) -> [T; 2] {
    gresho_exact(x).0
}

/// Standing-vortex scalar vorticity: 10 in the core, 2/r - 10 in the
/// annulus, 0 outside. Discontinuous at both interfaces (10 -> 0 at r = 0.2,
/// -5 -> 0 at r = 0.4); only the velocity is continuous.
pub fn gresho_vorticity<T: Real>(x: [T; 2]) -> T {
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    match GreshoPiece::classify(r) {
        GreshoPiece::Core => T::of(10.0),
        GreshoPiece::Annulus => T::of(2.0) / r - T::of(10.0),
        GreshoPiece::Outside => T::zero(),
    }
}

/// Decaying-vortex exact velocity: (sin pi x cos pi y, -cos pi x sin pi y)
/// times e^{-2 pi^2 nu t}. An exact solution of the incompressible momentum
/// equation with zero forcing; the time and viscous terms cancel, and the
/// inertia term is balanced by [`taylor_green_pressure`].
pub fn taylor_green_velocity<T: Real>(x: [T; 2], t: T, nu: T) -> [T; 2] {
    let pi = T::PI();
    let decay = (-T::of(2.0) * pi * pi * nu * t).exp();
    [
        (pi * x[0]).sin() * (pi * x[1]).cos() * decay,
        -(pi * x[0]).cos() * (pi * x[1]).sin() * decay,
    ]
}

/// Decaying-vortex exact pressure: (cos 2 pi x + cos 2 pi y)/4 times
/// e^{-4 pi^2 nu t}.
pub fn taylor_green_pressure<T: Real>(x: [T; 2], t: T, nu: T) -> T {
    let pi = T::PI();
    let decay = (-T::of(4.0) * pi * pi * nu * t).exp();
    T::of(0.25) * ((T::of(2.0) * pi * x[0]).cos() + (T::of(2.0) * pi * x[1]).cos()) * decay
}

/// Channel inflow profile: parabolic in y with amplitude ramped by
/// sin(pi t / 8); peak speed 1.5 at mid-height when the ramp is 1, mean 1.
pub fn cylinder_inflow<T: Real>(y: T, t: T) -> [T; 2] {
    let h = T::of(0.41);
    let amp = T::of(6.0) / (h * h) * (T::PI() * t / T::of(8.0)).sin();
    [amp * y * (h - y), T::zero()]
}

/// Which canned problem a [`RunSpec`] names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkName {
    Gresho,
    TaylorGreen,
    Cylinder,
}

impl BenchmarkName {
    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkName::Gresho => "gresho",
            BenchmarkName::TaylorGreen => "taylor_green",
            BenchmarkName::Cylinder => "cylinder",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "gresho" => Some(BenchmarkName::Gresho),
            "taylor_green" | "taylorgreen" | "tg" => Some(BenchmarkName::TaylorGreen),
            "cylinder" => Some(BenchmarkName::Cylinder),
            _ => None,
        }
    }
}

impl std::fmt::Display for BenchmarkName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where the mesh comes from: generated n-by-n crisscross square, or a
/// TRIMESH file (required for the cylinder, whose boundary carries tags the
/// generators cannot produce).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeshSource {
    Generated { n: usize },
    File(PathBuf),
}

/// Full description of one benchmark run.
#[derive(Debug, Clone)]
pub struct RunSpec<T> {
    pub name: BenchmarkName,
    pub mesh: MeshSource,
    pub kind: FormulationKind,
    pub stepper: StepperConfig<T>,
    pub form: FormConfig<T>,
    /// Start from the nodal interpolant of the exact field instead of the
    /// weakly divergence-free projection (standing vortex only). The
    /// interpolant is not discretely divergence-free, so the first step
    /// absorbs a consistency kick; the projection is the default.
    pub interpolate_initial: bool,
    /// Attach the two scalar vorticity companions (standing vortex only).
    /// `Natural` keeps both companion balance laws exact for no-penetration
    /// velocity; `Dirichlet` pins the boundary values instead and leaks
    /// total vorticity at the discretization level.
    pub companions: Option<VorticityBc>,
}

impl<T: Real> RunSpec<T> {
    /// Standing-vortex conservation study at desk scale: 24x24 crisscross,
    /// Crank-Nicolson, dt = 0.02 up to T = 1, inviscid, no forcing.
    pub fn gresho(kind: FormulationKind) -> Self {
        RunSpec {
            name: BenchmarkName::Gresho,
            mesh: MeshSource::Generated { n: 24 },
            kind,
            stepper: StepperConfig::new(Scheme::CrankNicolson, T::of(0.02), T::one()),
            form: FormConfig::new(T::zero()),
            interpolate_initial: false,
            companions: Some(VorticityBc::Natural),
        }
    }

    /// Decaying-vortex refinement study base point.
    pub fn taylor_green(kind: FormulationKind, nu: T, t_end: T) -> Self {
        RunSpec {
            name: BenchmarkName::TaylorGreen,
            mesh: MeshSource::Generated { n: 16 },
            kind,
            stepper: StepperConfig::new(Scheme::CrankNicolson, T::of(1e-3), t_end),
            form: FormConfig::new(nu),
            interpolate_initial: false,
            companions: None,
        }
    }

    /// Channel flow past a cylinder: BDF3, dt = 0.005 up to T = 8,
    /// nu = 1e-3.
    pub fn cylinder(kind: FormulationKind, mesh: PathBuf) -> Self {
        RunSpec {
            name: BenchmarkName::Cylinder,
            mesh: MeshSource::File(mesh),
            kind,
            stepper: StepperConfig::new(Scheme::Bdf3, T::of(0.005), T::of(8.0)),
            form: FormConfig::new(T::of(1e-3)),
            interpolate_initial: false,
            companions: None,
        }
    }

    pub fn with_mesh_n(mut self, n: usize) -> Self {
        self.mesh = MeshSource::Generated { n };
        self
    }

    pub fn with_stepper(mut self, stepper: StepperConfig<T>) -> Self {
        self.stepper = stepper;
        self
    }
}

#[derive(Debug, Error)]
pub enum BenchError<T: Real> {
    /// Solver failure annotated with the formulation that produced it.
    #[error("{kind} run failed: {source}")]
    Solver {
        kind: FormulationKind,
        #[source]
        source: SystemError<T>,
    },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    /// The spec names a benchmark this call cannot run as given.
    #[error("benchmark spec rejected: {0}")]
    Spec(String),
}

/// Step hook advancing the two scalar vorticity companions alongside the
/// velocity trajectory: one with the enstrophy-conserving transport weight
/// 1/2, one with the total-vorticity weight 1. Records both conserved
/// quantities into the per-step diagnostics; a companion solve failure is
/// recorded as a non-finite entry, which ends the run as a blow-up.
pub struct VorticityCompanions<T: Real> {
    stepper: VorticityStepper<T>,
    half: VorticityState<T>,
    full: VorticityState<T>,
    nu: T,
}

impl<T: Real> VorticityCompanions<T> {
    /// Companion states start from the curl of the initial velocity: the
    /// plain projection under natural rows, the zero-trace projection under
    /// pinned rows so the initial field already satisfies the pinned values.
    pub fn new(space: &MixedSpace<T>, u0: &State<T>, bc: VorticityBc, nu: T) -> Self {
        let w0 = match bc {
            VorticityBc::Natural => curl_project(space, u0),
            VorticityBc::Dirichlet => curl_project_zero_trace(space, u0),
        };
        let full = w0.clone().with_beta3(T::one());
        VorticityCompanions {
            stepper: VorticityStepper::with_bc(space, bc),
            half: w0,
            full,
            nu,
        }
    }

    /// Current companion states (transport weight 1/2, then 1).
    pub fn states(&self) -> (&VorticityState<T>, &VorticityState<T>) {
        (&self.half, &self.full)
    }
}

impl<T: Real> StepHook<T> for VorticityCompanions<T> {
    fn on_start(
        &mut self,
        space: &MixedSpace<T>,
        _state: &State<T>,
        rec: &mut DiagnosticsRecord<T>,
    ) {
        rec.enstrophy = Some(enstrophy(space, &self.half));
        rec.total_vorticity = Some(total_vorticity(space, &self.full));
    }

    fn on_step(
        &mut self,
        space: &MixedSpace<T>,
        old: &State<T>,
        new: &State<T>,
        rec: &mut DiagnosticsRecord<T>,
    ) {
        let mid = velocity_midpoint(old, new);
        let dt = new.t - old.t;
        match self
            .stepper
            .advance(space, &self.half, &mid, T::half(), self.nu, None, dt)
        {
            Ok(w) => {
                self.half = w;
                rec.enstrophy = Some(enstrophy(space, &self.half));
            }
            Err(_) => rec.enstrophy = Some(T::nan()),
        }
        match self
            .stepper
            .advance(space, &self.full, &mid, T::one(), self.nu, None, dt)
        {
            Ok(w) => {
                self.full = w;
                rec.total_vorticity = Some(total_vorticity(space, &self.full));
            }
            Err(_) => rec.total_vorticity = Some(T::nan()),
        }
    }
}

/// Standing-vortex run result.
#[derive(Debug, Clone)]
pub struct GreshoRun<T> {
    pub output: RunOutput<T>,
    /// L2 velocity error of the last accepted state against the steady
    /// exact field.
    pub final_error: T,
}

/// Compose the spec's optional vorticity companions with caller-supplied
/// observers and run the trajectory.
fn run_with_companions<T: Real>(
    solver: &mut NsSolver<T>,
    u0: State<T>,
    stepper: &StepperConfig<T>,
    companions: Option<VorticityBc>,
    nu: T,
    extra: &mut [&mut dyn StepHook<T>],
) -> Result<RunOutput<T>, SystemError<T>> {
    let mut comp = companions.map(|mode| VorticityCompanions::new(solver.space(), &u0, mode, nu));
    let mut hooks: Vec<&mut dyn StepHook<T>> = Vec::with_capacity(extra.len() + 1);
    if let Some(c) = comp.as_mut() {
        hooks.push(c);
    }
    for h in extra.iter_mut() {
        hooks.push(&mut **h);
    }
    solver.run(u0, stepper, &mut hooks)
}

/// Run the standing-vortex problem named by the spec: centered unit square,
/// no-penetration walls, exact field as initial data (weakly
/// divergence-free projection by default), zero forcing. Blow-up comes back
/// as the run outcome with its time stamp; the error field then measures
/// the last accepted state.
pub fn run_gresho<T: Real>(spec: &RunSpec<T>) -> Result<GreshoRun<T>, BenchError<T>> {
    run_gresho_with(spec, &mut [])
}

/// [`run_gresho`] with additional step observers (snapshot writers and the
/// like) appended after the spec's own companions.
pub fn run_gresho_with<T: Real>(
    spec: &RunSpec<T>,
    extra: &mut [&mut dyn StepHook<T>],
) -> Result<GreshoRun<T>, BenchError<T>> {
    if spec.name != BenchmarkName::Gresho {
        return Err(BenchError::Spec(format!(
            "run_gresho called with a {} spec",
            spec.name
        )));
    }
    let n = match &spec.mesh {
        MeshSource::Generated { n } => *n,
        MeshSource::File(_) => {
            return Err(BenchError::Spec(
                "the standing vortex runs on a generated square mesh".into(),
            ))
        }
    };
    let half = T::of(0.5);
    let mesh = Mesh::rectangle_crisscross(-half, -half, half, half, n, n)?;
    let space = MixedSpace::new(mesh);
    let bc = BcSet::new().set(BoundaryTag::Wall, VelBc::NoPenetration);
    let solver_err = |e: SystemError<T>| BenchError::Solver {
        kind: spec.kind,
        source: e,
    };

    let u0 = if spec.interpolate_initial {
        space.interpolate_fields(gresho_velocity, |x| gresho_exact(x).1)
    } else {
        let opts = ProjectionOptions {
            constraints: bc.constraints(&space, T::zero()).map_err(solver_err)?,
            pin_pressure: true,
        };
        space.divfree_project(gresho_velocity, &opts)?
    };

    let problem = NsProblem::new(spec.kind, spec.form.clone())
        .with_bc(bc)
        .with_pressure_mode(PressureMode::Pin);
    let mut solver = NsSolver::new(space, problem).map_err(solver_err)?;

    let output = run_with_companions(
        &mut solver,
        u0,
        &spec.stepper,
        spec.companions,
        spec.form.nu,
        extra,
    )
    .map_err(solver_err)?;
    let final_error = solver
        .space()
        .l2_error_velocity(&output.final_state, gresho_velocity);
    Ok(GreshoRun {
        output,
        final_error,
    })
}

/// Decaying-vortex run result.
pub struct TaylorGreenRun<T> {
    pub output: RunOutput<T>,
    /// L2 velocity error of the last accepted state against the decaying
    /// exact field at that state's time.
    pub final_error: T,
}

/// Run the decaying-vortex problem on the unit square, with the exact
/// time-dependent velocity as wall data and its weakly divergence-free
/// projection as initial state. The horizon is snapped down to the step
/// grid so the final state sits on it exactly.
pub fn run_taylor_green<T: Real>(spec: &RunSpec<T>) -> Result<TaylorGreenRun<T>, BenchError<T>> {
    run_taylor_green_with(spec, &mut [])
}

/// [`run_taylor_green`] with additional step observers.
pub fn run_taylor_green_with<T: Real>(
    spec: &RunSpec<T>,
    extra: &mut [&mut dyn StepHook<T>],
) -> Result<TaylorGreenRun<T>, BenchError<T>> {
    if spec.name != BenchmarkName::TaylorGreen {
        return Err(BenchError::Spec(format!(
            "run_taylor_green called with a {} spec",
            spec.name
        )));
    }
    let n = match &spec.mesh {
        MeshSource::Generated { n } => *n,
        MeshSource::File(_) => {
            return Err(BenchError::Spec(
                "the decaying vortex runs on a generated square mesh".into(),
            ))
        }
    };
    let nu = spec.form.nu;
    let space = tg_space(n)?;
    let bc = tg_bc(nu);
    let u0 = if spec.interpolate_initial {
        space.interpolate_fields(
            |x| taylor_green_velocity(x, T::zero(), nu),
            |x| taylor_green_pressure(x, T::zero(), nu),
        )
    } else {
        tg_initial(&space, &bc, nu, spec.kind)?
    };
    let solver_err = |e: SystemError<T>| BenchError::Solver {
        kind: spec.kind,
        source: e,
    };
    let problem = NsProblem::new(spec.kind, spec.form.clone()).with_bc(bc);
    let mut solver = NsSolver::new(space, problem).map_err(solver_err)?;
    let mut cfg = spec.stepper.clone();
    cfg.t_end = snap_horizon(cfg.t_end, cfg.dt);
    let output = run_with_companions(&mut solver, u0, &cfg, spec.companions, nu, extra)
        .map_err(solver_err)?;
    let t_final = output.final_state.t;
    let final_error = solver
        .space()
        .l2_error_velocity(&output.final_state, |x| taylor_green_velocity(x, t_final, nu));
    Ok(TaylorGreenRun {
        output,
        final_error,
    })
}

/// One row of a refinement study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow<T> {
    pub mesh_n: usize,
    /// Largest element diameter of the row's mesh.
    pub h: T,
    pub dt: T,
    /// L2 velocity error at the final time: against the exact solution on
    /// the spatial axis, against a time-refined trajectory on the same mesh
    /// on the temporal axis (so the spatial error cancels from the ratio).
    pub error: T,
    /// Observed order against the previous row: log of the error ratio over
    /// log of the refinement ratio. None on the first row.
    pub rate: Option<T>,
}

/// Refinement study result. A non-monotone error sequence is reported
/// through the flag, not an error.
#[derive(Debug, Clone)]
pub struct ConvergenceTable<T> {
    pub rows: Vec<ConvergenceRow<T>>,
    pub monotone: bool,
}

impl<T: Real> ConvergenceTable<T> {
    fn from_rows(rows: Vec<ConvergenceRow<T>>) -> Self {
        let monotone = rows.windows(2).all(|w| w[1].error < w[0].error);
        ConvergenceTable { rows, monotone }
    }

    /// Smallest observed order in the table (None with fewer than two rows).
    pub fn min_rate(&self) -> Option<T> {
        self.rows
            .iter()
            .filter_map(|r| r.rate)
            .fold(None, |acc, r| Some(acc.map_or(r, |a: T| a.min(r))))
    }
}

/// Decaying-vortex refinement study. Varies whichever axis has more than
/// one entry: mesh sizes with a fixed time step, or time steps on a fixed
/// mesh; varying both at once is rejected. The horizon is snapped down to
/// the coarsest step's grid so every run ends at the same time, and time
/// step sequences should be nested for the same reason.
///
/// The zero-viscosity variant is skipped by construction: the exact field
/// is then steady, and the measured error is dominated by the distance of
/// the initial data from the discretely divergence-free subspace rather
/// than by h or dt, so it identifies no rate.
pub fn run_convergence<T: Real>(
    spec: &RunSpec<T>,
    meshes: &[usize],
    dts: &[T],
) -> Result<ConvergenceTable<T>, BenchError<T>> {
    if spec.form.nu <= T::zero() {
        return Err(BenchError::Spec(
            "inviscid refinement study skipped: the exact field is steady and the error is \
             dominated by the divergence defect of the initial data, not by h or dt"
                .into(),
        ));
    }
    match (meshes.len(), dts.len()) {
        (0, _) | (_, 0) => Err(BenchError::Spec("empty refinement sequence".into())),
        (_, 1) => spatial_convergence(spec, meshes, dts[0]),
        (1, _) => temporal_convergence(spec, meshes[0], dts),
        _ => Err(BenchError::Spec(
            "refine the mesh or the time step, not both at once".into(),
        )),
    }
}

fn tg_space<T: Real>(n: usize) -> Result<MixedSpace<T>, MeshError> {
    Ok(MixedSpace::new(Mesh::rectangle_crisscross(
        T::zero(),
        T::zero(),
        T::one(),
        T::one(),
        n,
        n,
    )?))
}

fn tg_bc<T: Real>(nu: T) -> BcSet<T> {
    BcSet::new().set(
        BoundaryTag::Wall,
        VelBc::Dirichlet(Arc::new(move |x, t| taylor_green_velocity(x, t, nu))),
    )
}

/// Largest grid time not exceeding `t_end` on the grid of step `dt`.
fn snap_horizon<T: Real>(t_end: T, dt: T) -> T {
    let steps = (t_end / dt + T::of(1e-9)).floor();
    let steps = if steps < T::one() { T::one() } else { steps };
    steps * dt
}

fn tg_initial<T: Real>(
    space: &MixedSpace<T>,
    bc: &BcSet<T>,
    nu: T,
    kind: FormulationKind,
) -> Result<State<T>, BenchError<T>> {
    let opts = ProjectionOptions {
        constraints: bc
            .constraints(space, T::zero())
            .map_err(|e| BenchError::Solver { kind, source: e })?,
        pin_pressure: true,
    };
    Ok(space.divfree_project(|x| taylor_green_velocity(x, T::zero(), nu), &opts)?)
}

fn spatial_convergence<T: Real>(
    spec: &RunSpec<T>,
    meshes: &[usize],
    dt: T,
) -> Result<ConvergenceTable<T>, BenchError<T>> {
    let nu = spec.form.nu;
    let t_end = snap_horizon(spec.stepper.t_end, dt);
    let mut cfg = spec.stepper.clone();
    cfg.dt = dt;
    cfg.t_end = t_end;
    let solver_err = |e: SystemError<T>| BenchError::Solver {
        kind: spec.kind,
        source: e,
    };

    let mut rows: Vec<ConvergenceRow<T>> = Vec::with_capacity(meshes.len());
    for &n in meshes {
        let space = tg_space(n)?;
        let h = space.mesh().size_report().h_max;
        let bc = tg_bc(nu);
        let u0 = tg_initial(&space, &bc, nu, spec.kind)?;
        let problem = NsProblem::new(spec.kind, spec.form.clone()).with_bc(bc);
        let mut solver = NsSolver::new(space, problem).map_err(solver_err)?;
        let out = solver.run(u0, &cfg, &mut []).map_err(solver_err)?;
        if !out.completed() {
            return Err(BenchError::Spec(format!(
                "{} diverged during the spatial study at n = {n}",
                spec.kind
            )));
        }
        let error = solver
            .space()
            .l2_error_velocity(&out.final_state, |x| taylor_green_velocity(x, t_end, nu));
        let rate = rows.last().map(|prev: &ConvergenceRow<T>| {
            (prev.error / error).ln() / (prev.h / h).ln()
        });
        rows.push(ConvergenceRow {
            mesh_n: n,
            h,
            dt,
            error,
            rate,
        });
    }
    Ok(ConvergenceTable::from_rows(rows))
}

fn temporal_convergence<T: Real>(
    spec: &RunSpec<T>,
    n: usize,
    dts: &[T],
) -> Result<ConvergenceTable<T>, BenchError<T>> {
    let nu = spec.form.nu;
    let dt_max = dts.iter().copied().fold(T::zero(), T::max);
    let t_end = snap_horizon(spec.stepper.t_end, dt_max);
    // Reference trajectory on the same mesh, ten times finer than the
    // finest step under study; differencing against it isolates the
    // time-discretization error.
    let dt_min = dts.iter().copied().fold(dt_max, T::min);
    let ref_dt = dt_min / T::of(10.0);
    let solver_err = |e: SystemError<T>| BenchError::Solver {
        kind: spec.kind,
        source: e,
    };

    let space = tg_space(n)?;
    let h = space.mesh().size_report().h_max;
    let bc = tg_bc(nu);
    let u0 = tg_initial(&space, &bc, nu, spec.kind)?;
    let problem = NsProblem::new(spec.kind, spec.form.clone()).with_bc(bc);
    let mut solver = NsSolver::new(space, problem).map_err(solver_err)?;

    let mut cfg = spec.stepper.clone();
    cfg.t_end = t_end;
    cfg.dt = ref_dt;
    let reference = solver.run(u0.clone(), &cfg, &mut []).map_err(solver_err)?;
    if !reference.completed() {
        return Err(BenchError::Spec(format!(
            "{} diverged during the temporal study reference run",
            spec.kind
        )));
    }

    let mut rows: Vec<ConvergenceRow<T>> = Vec::with_capacity(dts.len());
    for &dt in dts {
        cfg.dt = dt;
        let out = solver.run(u0.clone(), &cfg, &mut []).map_err(solver_err)?;
        if !out.completed() {
            return Err(BenchError::Spec(format!(
                "{} diverged during the temporal study at dt = {dt}",
                spec.kind
            )));
        }
        let error =
            l2_velocity_difference(solver.space(), &out.final_state, &reference.final_state);
        let rate = rows.last().map(|prev: &ConvergenceRow<T>| {
            (prev.error / error).ln() / (prev.dt / dt).ln()
        });
        rows.push(ConvergenceRow {
            mesh_n: n,
            h,
            dt,
            error,
            rate,
        });
    }
    Ok(ConvergenceTable::from_rows(rows))
}

/// L2 norm over the domain of the velocity difference of two states on one
/// space.
pub fn l2_velocity_difference<T: Real>(space: &MixedSpace<T>, a: &State<T>, b: &State<T>) -> T {
    let ctx = QuadContext::<T>::triangle(6).expect("degree 6 rule available");
    let mut cq = CellQuad::empty();
    let mut acc = T::zero();
    for cell in 0..space.mesh().cell_count() {
        let geo = space.mesh().cell_geometry(cell);
        ctx.bind_into(&geo, &mut cq);
        let ua = space.gather_cell_velocity(&a.coeffs, cell);
        let ub = space.gather_cell_velocity(&b.coeffs, cell);
        for q in 0..ctx.len() {
            let vals = &ctx.p2_vals[q];
            let mut d = [T::zero(); 2];
            for i in 0..6 {
                d[0] += vals[i] * (ua[i][0] - ub[i][0]);
                d[1] += vals[i] * (ua[i][1] - ub[i][1]);
            }
            acc += cq.wdet[q] * (d[0] * d[0] + d[1] * d[1]);
        }
    }
    acc.sqrt()
}

/// Step hook recording obstacle drag and lift coefficients and the pressure
/// drop across the obstacle. Construction validates the probe points; the
/// obstacle tag is validated by the caller.
pub struct ObstacleLoads<T: Real> {
    nu: T,
    scaling: DragScaling<T>,
    probe: PressureProbe<T>,
}

impl<T: Real> ObstacleLoads<T> {
    pub fn new(
        space: &MixedSpace<T>,
        nu: T,
        front: [T; 2],
        back: [T; 2],
    ) -> Result<Self, DiagnosticsError> {
        Ok(ObstacleLoads {
            nu,
            scaling: DragScaling::default(),
            probe: PressureProbe::new(space, front, back)?,
        })
    }

    fn fill(&self, space: &MixedSpace<T>, state: &State<T>, rec: &mut DiagnosticsRecord<T>) {
        let (cd, cl) = drag_lift(space, state, self.nu, BoundaryTag::Obstacle, &self.scaling)
            .expect("obstacle tag validated before the run");
        rec.cd = Some(cd);
        rec.cl = Some(cl);
        rec.dp = Some(self.probe.pressure_drop(space, state));
    }
}

impl<T: Real> StepHook<T> for ObstacleLoads<T> {
    fn on_start(
        &mut self,
        space: &MixedSpace<T>,
        state: &State<T>,
        rec: &mut DiagnosticsRecord<T>,
    ) {
        self.fill(space, state, rec);
    }

    fn on_step(
        &mut self,
        space: &MixedSpace<T>,
        _old: &State<T>,
        new: &State<T>,
        rec: &mut DiagnosticsRecord<T>,
    ) {
        self.fill(space, new, rec);
    }
}

/// Cylinder run result with the summary numbers the channel benchmark is
/// scored on.
#[derive(Debug, Clone)]
pub struct CylinderRun<T> {
    pub output: RunOutput<T>,
    /// Largest drag coefficient over the recorded series.
    pub cd_max: T,
    /// Largest lift coefficient over the recorded series.
    pub cl_max: T,
    /// Pressure drop across the obstacle at the last accepted time.
    pub dp_final: T,
}

/// Run the channel-flow-past-a-cylinder benchmark: 2.2 x 0.41 channel,
/// obstacle of radius 0.05 centered at (0.2, 0.2), ramped parabolic inflow,
/// no-slip walls and obstacle, weak zero-traction outflow (with the
/// formulation-specific correction applied by the solver), rest state at
/// t = 0. The mesh file must tag all four boundary parts. The pressure
/// probe sits at the front and back stagnation points (0.15, 0.2) and
/// (0.25, 0.2); the velocity vanishes there, so the formulations that
/// solve for a modified pressure report the same drop as the others.
pub fn run_cylinder<T: Real>(spec: &RunSpec<T>) -> Result<CylinderRun<T>, BenchError<T>> {
    run_cylinder_with(spec, &mut [])
}

/// [`run_cylinder`] with additional step observers appended after the
/// obstacle-load recorder.
pub fn run_cylinder_with<T: Real>(
    spec: &RunSpec<T>,
    extra: &mut [&mut dyn StepHook<T>],
) -> Result<CylinderRun<T>, BenchError<T>> {
    if spec.name != BenchmarkName::Cylinder {
        return Err(BenchError::Spec(format!(
            "run_cylinder called with a {} spec",
            spec.name
        )));
    }
    let mesh = match &spec.mesh {
        MeshSource::File(path) => Mesh::read_trimesh(path)?,
        MeshSource::Generated { .. } => {
            return Err(BenchError::Spec(
                "the cylinder benchmark needs a mesh file with a tagged obstacle".into(),
            ))
        }
    };
    for tag in [
        BoundaryTag::Wall,
        BoundaryTag::Inflow,
        BoundaryTag::Outflow,
        BoundaryTag::Obstacle,
    ] {
        if !mesh.has_tag(tag) {
            return Err(BenchError::Spec(format!(
                "cylinder mesh must tag its {tag:?} boundary"
            )));
        }
    }
    let space = MixedSpace::new(mesh);
    let bc = BcSet::new()
        .set(BoundaryTag::Wall, VelBc::no_slip())
        .set(BoundaryTag::Obstacle, VelBc::no_slip())
        .set(
            BoundaryTag::Inflow,
            VelBc::Dirichlet(Arc::new(|x, t| cylinder_inflow(x[1], t))),
        );
    let mut loads = ObstacleLoads::new(
        &space,
        spec.form.nu,
        [T::of(0.15), T::of(0.2)],
        [T::of(0.25), T::of(0.2)],
    )?;
    let solver_err = |e: SystemError<T>| BenchError::Solver {
        kind: spec.kind,
        source: e,
    };

    let u0 = State::zeros(&space);
    let problem = NsProblem::new(spec.kind, spec.form.clone()).with_bc(bc);
    let mut solver = NsSolver::new(space, problem).map_err(solver_err)?;
    let mut hooks: Vec<&mut dyn StepHook<T>> = Vec::with_capacity(extra.len() + 1);
    hooks.push(&mut loads);
    for h in extra.iter_mut() {
        hooks.push(&mut **h);
    }
    let output = solver
        .run(u0, &spec.stepper, &mut hooks)
        .map_err(solver_err)?;

    let mut cd_max = T::neg_infinity();
    let mut cl_max = T::neg_infinity();
    let mut dp_final = T::nan();
    for rec in &output.series.records {
        if let Some(cd) = rec.cd {
            cd_max = cd_max.max(cd);
        }
        if let Some(cl) = rec.cl {
            cl_max = cl_max.max(cl);
        }
        if let Some(dp) = rec.dp {
            dp_final = dp;
        }
    }
    Ok(CylinderRun {
        output,
        cd_max,
        cl_max,
        dp_final,
    })
}
