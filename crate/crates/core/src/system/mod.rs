//! Global assembly, boundary conditions, pressure-nullspace handling,
//! Newton iteration, and time stepping.
//!
//! The time-discrete unknown is the pair (z, p) with z the new velocity
//! u^{n+1}. Each scheme is described by four history weights beta (the
//! discrete time derivative is (sum_j beta_j u^{(j)}) / dt with u^{(0)} = z),
//! a parameter theta locating the nonlinear/viscous evaluation point
//! U = theta z + (1-theta) u^n, and the forcing evaluation time. The
//! trapezoidal scheme solves for the half-step pressure; the backward
//! difference schemes for the endpoint pressure. The divergence constraint
//! always acts on z itself, so every accepted step is discretely
//! divergence-free regardless of theta.

pub mod linear;

use std::sync::Arc;

use thiserror::Error;

use crate::diagnostics::{DiagnosticsRecord, DiagnosticsSeries};
use crate::forms::{
    element_forcing, element_mass, element_nl_jacobian, element_nl_residual, element_saddle,
    outflow_jacobian, outflow_residual, outflow_sign, FormConfig, FormulationKind,
};
use crate::mesh::{BoundarySegment, BoundaryTag};
use crate::scalar::Real;
use crate::space::{CellQuad, EdgeQuadContext, MixedSpace, QuadContext, State};
use linear::{LinearError, SparseMatrix};

/// Time integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Trapezoidal rule (second order, nonlinearity at the half step).
    CrankNicolson,
    /// Two-step backward differences (second order).
    Bdf2,
    /// Three-step backward differences (third order).
    Bdf3,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::CrankNicolson, Scheme::Bdf2, Scheme::Bdf3];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::CrankNicolson => "cn",
            Scheme::Bdf2 => "bdf2",
            Scheme::Bdf3 => "bdf3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cn" | "crank-nicolson" => Some(Scheme::CrankNicolson),
            "bdf2" => Some(Scheme::Bdf2),
            "bdf3" => Some(Scheme::Bdf3),
            _ => None,
        }
    }

    /// Number of previous states the scheme consumes.
    pub fn history_len(self) -> usize {
        match self {
            Scheme::CrankNicolson => 1,
            Scheme::Bdf2 => 2,
            Scheme::Bdf3 => 3,
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Time step, tolerances, and horizon of a run.
#[derive(Debug, Clone)]
pub struct StepperConfig<T> {
    pub scheme: Scheme,
    pub dt: T,
    pub t_end: T,
    pub newton_tol: T,
    pub newton_max: usize,
}

impl<T: Real> StepperConfig<T> {
    pub fn new(scheme: Scheme, dt: T, t_end: T) -> Self {
        let cfg = StepperConfig {
            scheme,
            dt,
            t_end,
            newton_tol: T::of(1e-8),
            newton_max: 20,
        };
        cfg.validate();
        cfg
    }

    pub fn with_newton_tol(mut self, tol: T) -> Self {
        self.newton_tol = tol;
        self.validate();
        self
    }

    pub fn validate(&self) {
        assert!(self.dt > T::zero(), "time step must be positive");
        assert!(self.newton_tol > T::zero(), "solver tolerance must be positive");
        assert!(self.newton_max >= 1);
    }
}

/// Weights of one time-discrete step; see the module docs.
#[derive(Debug, Clone)]
pub struct TimeWeights<T> {
    /// Multipliers of [z, u^n, u^{n-1}, u^{n-2}] in the time derivative.
    pub beta: [T; 4],
    /// Evaluation point of the nonlinearity: U = theta z + (1-theta) u^n.
    pub theta: T,
    /// Forcing evaluation time.
    pub t_eval: T,
    pub dt: T,
}

impl<T: Real> TimeWeights<T> {
    /// Weights of `scheme` for the step t_n -> t_n + dt.
    pub fn for_scheme(scheme: Scheme, dt: T, t_n: T) -> Self {
        let o = T::of;
        match scheme {
            Scheme::CrankNicolson => TimeWeights {
                beta: [T::one(), -T::one(), T::zero(), T::zero()],
                theta: T::half(),
                t_eval: t_n + dt * T::half(),
                dt,
            },
            Scheme::Bdf2 => TimeWeights {
                beta: [o(1.5), o(-2.0), o(0.5), T::zero()],
                theta: T::one(),
                t_eval: t_n + dt,
                dt,
            },
            Scheme::Bdf3 => TimeWeights {
                beta: [o(11.0 / 6.0), o(-3.0), o(1.5), o(-1.0 / 3.0)],
                theta: T::one(),
                t_eval: t_n + dt,
                dt,
            },
        }
    }
}

/// Velocity boundary condition attached to a tag.
#[derive(Clone)]
pub enum VelBc<T> {
    /// Both components prescribed by a function of position and time.
    Dirichlet(Arc<dyn Fn([T; 2], T) -> [T; 2] + Send + Sync>),
    /// Normal component pinned to zero; supported on axis-aligned edges only.
    NoPenetration,
    /// Natural boundary: no kinematic constraint.
    Free,
}

impl<T> std::fmt::Debug for VelBc<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VelBc::Dirichlet(_) => f.write_str("Dirichlet(fn)"),
            VelBc::NoPenetration => f.write_str("NoPenetration"),
            VelBc::Free => f.write_str("Free"),
        }
    }
}

impl<T: Real> VelBc<T> {
    /// Dirichlet condition with a constant value.
    pub fn constant(v: [T; 2]) -> Self {
        VelBc::Dirichlet(Arc::new(move |_, _| v))
    }

    pub fn no_slip() -> Self {
        Self::constant([T::zero(), T::zero()])
    }
}

/// Map from boundary tags to velocity conditions; untouched tags are Free.
#[derive(Debug, Clone)]
pub struct BcSet<T> {
    per_tag: [VelBc<T>; 5],
}

fn tag_ix(tag: BoundaryTag) -> usize {
    BoundaryTag::ALL
        .iter()
        .position(|&t| t == tag)
        .expect("tag listed in ALL")
}

impl<T: Real> Default for BcSet<T> {
    fn default() -> Self {
        BcSet {
            per_tag: [
                VelBc::Free,
                VelBc::Free,
                VelBc::Free,
                VelBc::Free,
                VelBc::Free,
            ],
        }
    }
}

impl<T: Real> BcSet<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, tag: BoundaryTag, bc: VelBc<T>) -> Self {
        self.per_tag[tag_ix(tag)] = bc;
        self
    }

    pub fn get(&self, tag: BoundaryTag) -> &VelBc<T> {
        &self.per_tag[tag_ix(tag)]
    }

    /// All constrained velocity DOFs with their values at time t, sorted by
    /// DOF. A corner shared by two perpendicular no-penetration edges gets
    /// both components constrained.
    pub fn constraints(
        &self,
        space: &MixedSpace<T>,
        t: T,
    ) -> Result<Vec<(usize, T)>, SystemError<T>> {
        let mut map = std::collections::BTreeMap::new();
        for tag in BoundaryTag::ALL {
            match self.get(tag) {
                VelBc::Free => {}
                VelBc::Dirichlet(f) => {
                    for &node in space.boundary_nodes(tag) {
                        let v = f(space.node_coord(node), t);
                        map.insert(space.vel_dof(node, 0), v[0]);
                        map.insert(space.vel_dof(node, 1), v[1]);
                    }
                }
                VelBc::NoPenetration => {
                    for seg in space.mesh().boundary_segments() {
                        if seg.tag != tag {
                            continue;
                        }
                        let tol = T::of(1e-10);
                        let comp = if seg.normal[0].abs() > T::one() - tol {
                            0
                        } else if seg.normal[1].abs() > T::one() - tol {
                            1
                        } else {
                            return Err(SystemError::ObliqueNoPenetration { tag });
                        };
                        let nodes = [seg.a, seg.b, space.mesh().vertex_count() + seg.edge];
                        for node in nodes {
                            map.insert(space.vel_dof(node, comp), T::zero());
                        }
                    }
                }
            }
        }
        Ok(map.into_iter().collect())
    }
}

/// Handling of the pressure constant on enclosed domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureMode {
    /// Pin one pressure DOF to zero.
    Pin,
    /// Pin during the solve, then shift so the pressure has zero mean.
    ZeroMean,
    /// No handling; enclosed domains will report a singular factorization.
    Unfixed,
}

impl PressureMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pin" => Some(PressureMode::Pin),
            "zero-mean" | "zeromean" => Some(PressureMode::ZeroMean),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum SystemError<T: Real> {
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(
        "nonlinear solve diverged at t = {t}: residuals {residuals:?} after {} iterations",
        residuals.len() - 1
    )]
    Diverged { t: T, residuals: Vec<T> },
    #[error("no-penetration requires axis-aligned edges; tag {tag:?} has an oblique edge")]
    ObliqueNoPenetration { tag: BoundaryTag },
}

/// Convergence record of one Newton solve.
#[derive(Debug, Clone)]
pub struct NewtonReport<T> {
    /// Iterations actually taken (0 when the guess already satisfied the
    /// residual tolerance).
    pub iterations: usize,
    /// Residual norms, including the initial and final ones.
    pub residuals: Vec<T>,
}

/// Problem definition: discretization choices, physics, boundary data.
#[derive(Clone)]
pub struct NsProblem<T> {
    pub kind: FormulationKind,
    pub form: FormConfig<T>,
    pub bc: BcSet<T>,
    pub forcing: Arc<dyn Fn([T; 2], T) -> [T; 2] + Send + Sync>,
    pub pressure_mode: PressureMode,
}

impl<T: Real> NsProblem<T> {
    pub fn new(kind: FormulationKind, form: FormConfig<T>) -> Self {
        NsProblem {
            kind,
            form,
            bc: BcSet::new(),
            forcing: Arc::new(|_, _| [T::zero(), T::zero()]),
            pressure_mode: PressureMode::Pin,
        }
    }

    pub fn with_bc(mut self, bc: BcSet<T>) -> Self {
        self.bc = bc;
        self
    }

    pub fn with_forcing(
        mut self,
        f: impl Fn([T; 2], T) -> [T; 2] + Send + Sync + 'static,
    ) -> Self {
        self.forcing = Arc::new(f);
        self
    }

    pub fn with_pressure_mode(mut self, mode: PressureMode) -> Self {
        self.pressure_mode = mode;
        self
    }
}

/// Outcome of a completed or interrupted trajectory.
#[derive(Debug, Clone)]
pub enum RunOutcome<T> {
    Completed,
    /// The nonlinear solve stopped converging (or diagnostics went
    /// non-finite); `t` is the step at which it happened.
    BlewUp { t: T, residuals: Vec<T> },
}

/// Full trajectory result: per-step diagnostics plus the last accepted state.
#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub series: DiagnosticsSeries<T>,
    pub final_state: State<T>,
    pub outcome: RunOutcome<T>,
}

impl<T> RunOutput<T> {
    pub fn completed(&self) -> bool {
        matches!(self.outcome, RunOutcome::Completed)
    }
}

/// Observer invoked once per accepted step to fill the optional diagnostics
/// columns (obstacle loads, vorticity integrals, file snapshots).
pub trait StepHook<T: Real> {
    fn on_start(
        &mut self,
        space: &MixedSpace<T>,
        state: &State<T>,
        rec: &mut DiagnosticsRecord<T>,
    ) {
        let _ = (space, state, rec);
    }

    fn on_step(
        &mut self,
        space: &MixedSpace<T>,
        old: &State<T>,
        new: &State<T>,
        rec: &mut DiagnosticsRecord<T>,
    );
}

/// Assembler and nonlinear solver bound to one space and problem.
pub struct NsSolver<T: Real> {
    space: MixedSpace<T>,
    problem: NsProblem<T>,
    pub(crate) mat: SparseMatrix<T>,
    ctx: QuadContext<T>,
    ectx: EdgeQuadContext<T>,
    outflow: Vec<BoundarySegment<T>>,
    enclosed: bool,
    pin_dof: Option<usize>,
}

impl<T: Real> NsSolver<T> {
    pub fn new(space: MixedSpace<T>, problem: NsProblem<T>) -> Result<Self, SystemError<T>> {
        problem.form.validate();
        // Validate no-penetration geometry once up front.
        problem.bc.constraints(&space, T::zero())?;

        let n = space.n_total();
        let mut pairs: Vec<(usize, usize)> =
            Vec::with_capacity(space.mesh().cell_count() * 219 + space.n_p());
        for cell in 0..space.mesh().cell_count() {
            let vd = space.cell_vel_dofs(cell);
            let pd = space.cell_pressure_dofs(cell);
            for &r in &vd {
                for &c in &vd {
                    pairs.push((r, c));
                }
                for &c in &pd {
                    pairs.push((r, c));
                    pairs.push((c, r));
                }
            }
            for &p in &pd {
                pairs.push((p, p));
            }
        }
        let mat = SparseMatrix::from_pairs(n, pairs);

        let ctx = QuadContext::triangle(problem.form.quad_degree)
            .expect("assembly quadrature degree available");
        let edge_degree = problem.form.quad_degree.max(6);
        let ectx = EdgeQuadContext::new(edge_degree).expect("edge quadrature degree available");
        let outflow: Vec<_> = space
            .mesh()
            .boundary_segments()
            .into_iter()
            .filter(|s| s.tag == BoundaryTag::Outflow)
            .collect();
        let enclosed = !space.mesh().has_tag(BoundaryTag::Outflow);
        let pin_dof = match (enclosed, problem.pressure_mode) {
            (true, PressureMode::Pin | PressureMode::ZeroMean) => Some(space.n_u()),
            _ => None,
        };
        Ok(NsSolver {
            space,
            problem,
            mat,
            ctx,
            ectx,
            outflow,
            enclosed,
            pin_dof,
        })
    }

    pub fn space(&self) -> &MixedSpace<T> {
        &self.space
    }

    pub fn problem(&self) -> &NsProblem<T> {
        &self.problem
    }

    /// Whether the pressure-constant fix is active (enclosed domain and a
    /// fixing mode selected). On domains with an outflow the mode is a no-op.
    pub fn pressure_fix_active(&self) -> bool {
        self.pin_dof.is_some()
    }

    pub fn is_enclosed(&self) -> bool {
        self.enclosed
    }

    fn outflow_active(&self) -> bool {
        self.problem.form.outflow_correction
            && !self.outflow.is_empty()
            && outflow_sign::<T>(self.problem.kind).is_some()
    }

    /// Residual of the time-discrete weak form at the iterate (z, p).
    pub fn assemble_residual(
        &self,
        iterate: &State<T>,
        history: &[State<T>],
        w: &TimeWeights<T>,
    ) -> Vec<T> {
        let sp = &self.space;
        let mut f = vec![T::zero(); sp.n_total()];
        let mut cq = CellQuad::empty();
        let theta = w.theta;
        let om_theta = T::one() - theta;
        let inv_dt = T::one() / w.dt;
        let kind = self.problem.kind;
        let cfg = &self.problem.form;

        for cell in 0..sp.mesh().cell_count() {
            let geo = sp.mesh().cell_geometry(cell);
            self.ctx.bind_into(&geo, &mut cq);
            let vd = sp.cell_vel_dofs(cell);
            let pd = sp.cell_pressure_dofs(cell);

            let z = sp.gather_cell_velocity(&iterate.coeffs, cell);
            let hist: Vec<[[T; 2]; 6]> = history
                .iter()
                .map(|s| sp.gather_cell_velocity(&s.coeffs, cell))
                .collect();
            // Time-derivative combination and nonlinear evaluation point.
            let mut bsum = [[T::zero(); 2]; 6];
            let mut umid = [[T::zero(); 2]; 6];
            for i in 0..6 {
                for c in 0..2 {
                    let mut acc = w.beta[0] * z[i][c];
                    for (j, h) in hist.iter().enumerate() {
                        acc += w.beta[j + 1] * h[i][c];
                    }
                    bsum[i][c] = acc * inv_dt;
                    umid[i][c] = theta * z[i][c] + om_theta * hist[0][i][c];
                }
            }
            let p = sp.gather_cell_pressure(&iterate.coeffs, cell);

            let mass = element_mass(&self.ctx, &cq);
            let saddle = element_saddle(&self.ctx, &cq, cfg);
            let nl = element_nl_residual(kind, &self.ctx, &cq, &umid);
            let t_eval = w.t_eval;
            let load = element_forcing(&self.ctx, &cq, |x| (self.problem.forcing)(x, t_eval));

            let mut zloc = [T::zero(); 12];
            let mut uloc = [T::zero(); 12];
            for i in 0..6 {
                for c in 0..2 {
                    zloc[2 * i + c] = z[i][c];
                    uloc[2 * i + c] = umid[i][c];
                }
            }
            for i in 0..6 {
                for c in 0..2 {
                    let row = 2 * i + c;
                    let mut acc = nl[row] - load[row];
                    for j in 0..6 {
                        acc += mass[i][j] * bsum[j][c];
                    }
                    for col in 0..12 {
                        acc += saddle.vel_vel[row][col] * uloc[col];
                    }
                    for jp in 0..3 {
                        acc -= saddle.div_vel[jp][row] * p[jp];
                    }
                    f[vd[row]] += acc;
                }
            }
            for jp in 0..3 {
                let mut acc = T::zero();
                for col in 0..12 {
                    acc += saddle.div_vel[jp][col] * zloc[col];
                }
                f[pd[jp]] += acc;
            }
        }

        if self.outflow_active() {
            for seg in &self.outflow {
                let eq = self.ectx.bind(sp.mesh(), seg);
                let z = sp.gather_cell_velocity(&iterate.coeffs, seg.cell);
                let un = sp.gather_cell_velocity(&history[0].coeffs, seg.cell);
                let mut umid = [[T::zero(); 2]; 6];
                for i in 0..6 {
                    for c in 0..2 {
                        umid[i][c] = theta * z[i][c] + om_theta * un[i][c];
                    }
                }
                let r = outflow_residual(kind, &eq, seg.normal, &umid);
                let vd = sp.cell_vel_dofs(seg.cell);
                for row in 0..12 {
                    f[vd[row]] += r[row];
                }
            }
        }
        f
    }

    /// Exact Jacobian of [`assemble_residual`] with respect to (z, p),
    /// written into the solver's matrix.
    pub(crate) fn assemble_jacobian(
        &mut self,
        iterate: &State<T>,
        history: &[State<T>],
        w: &TimeWeights<T>,
    ) {
        self.mat.clear();
        let sp = &self.space;
        let mut cq = CellQuad::empty();
        let theta = w.theta;
        let om_theta = T::one() - theta;
        let b0_dt = w.beta[0] / w.dt;
        let kind = self.problem.kind;

        for cell in 0..sp.mesh().cell_count() {
            let geo = sp.mesh().cell_geometry(cell);
            self.ctx.bind_into(&geo, &mut cq);
            let vd = sp.cell_vel_dofs(cell);
            let pd = sp.cell_pressure_dofs(cell);

            let z = sp.gather_cell_velocity(&iterate.coeffs, cell);
            let un = sp.gather_cell_velocity(&history[0].coeffs, cell);
            let mut umid = [[T::zero(); 2]; 6];
            for i in 0..6 {
                for c in 0..2 {
                    umid[i][c] = theta * z[i][c] + om_theta * un[i][c];
                }
            }

            let mass = element_mass(&self.ctx, &cq);
            let saddle = element_saddle(&self.ctx, &cq, &self.problem.form);
            let nl_jac = element_nl_jacobian(kind, &self.ctx, &cq, &umid);

            for i in 0..6 {
                for c in 0..2 {
                    let row = 2 * i + c;
                    for j in 0..6 {
                        for d in 0..2 {
                            let col = 2 * j + d;
                            let mut v = theta * (nl_jac[row][col] + saddle.vel_vel[row][col]);
                            if c == d {
                                v += b0_dt * mass[i][j];
                            }
                            if v != T::zero() {
                                self.mat.add(vd[row], vd[col], v);
                            }
                        }
                    }
                    for jp in 0..3 {
                        let b = saddle.div_vel[jp][row];
                        self.mat.add(vd[row], pd[jp], -b);
                        self.mat.add(pd[jp], vd[row], b);
                    }
                }
            }
        }

        if self.outflow_active() {
            for seg in &self.outflow {
                let eq = self.ectx.bind(sp.mesh(), seg);
                let z = sp.gather_cell_velocity(&iterate.coeffs, seg.cell);
                let un = sp.gather_cell_velocity(&history[0].coeffs, seg.cell);
                let mut umid = [[T::zero(); 2]; 6];
                for i in 0..6 {
                    for c in 0..2 {
                        umid[i][c] = theta * z[i][c] + om_theta * un[i][c];
                    }
                }
                let jac = outflow_jacobian(kind, &eq, seg.normal, &umid);
                let vd = sp.cell_vel_dofs(seg.cell);
                for row in 0..12 {
                    for col in 0..12 {
                        let v = theta * jac[row][col];
                        if v != T::zero() {
                            self.mat.add(vd[row], vd[col], v);
                        }
                    }
                }
            }
        }
    }

    /// Mean of the pressure part over the domain.
    fn pressure_mean(&self, state: &State<T>) -> T {
        let sp = &self.space;
        let mut acc = T::zero();
        let mut area = T::zero();
        for cell in 0..sp.mesh().cell_count() {
            let geo = sp.mesh().cell_geometry(cell);
            let p = sp.gather_cell_pressure(&state.coeffs, cell);
            // Each linear vertex function integrates to a third of the area.
            let third = geo.area / T::of(3.0);
            acc += (p[0] + p[1] + p[2]) * third;
            area += geo.area;
        }
        acc / area
    }

    /// One Newton solve of the step t_n -> t_n + dt defined by `w`, starting
    /// from `guess` (boundary values are overwritten with the prescribed
    /// data before iterating).
    pub fn newton_solve(
        &mut self,
        guess: State<T>,
        history: &[State<T>],
        w: &TimeWeights<T>,
        cfg: &StepperConfig<T>,
    ) -> Result<(State<T>, NewtonReport<T>), SystemError<T>> {
        let t_new = history[0].t + w.dt;
        let mut z = guess;
        z.t = t_new;

        let constraints = self.problem.bc.constraints(&self.space, t_new)?;
        let mut constrained: Vec<usize> = constraints.iter().map(|&(d, _)| d).collect();
        for &(dof, value) in &constraints {
            z.coeffs[dof] = value;
        }
        if let Some(pin) = self.pin_dof {
            z.coeffs[pin] = T::zero();
            constrained.push(pin);
        }

        let mut residuals = Vec::new();
        for iter in 0..=cfg.newton_max {
            let mut f = self.assemble_residual(&z, history, w);
            for &d in &constrained {
                f[d] = T::zero();
            }
            let norm = f
                .iter()
                .fold(T::zero(), |acc, v| acc + *v * *v)
                .sqrt();
            residuals.push(norm);
            if norm <= cfg.newton_tol {
                if self.pin_dof.is_some() && self.problem.pressure_mode == PressureMode::ZeroMean {
                    let mean = self.pressure_mean(&z);
                    for p in &mut z.coeffs[self.space.n_u()..] {
                        *p -= mean;
                    }
                }
                return Ok((
                    z,
                    NewtonReport {
                        iterations: iter,
                        residuals,
                    },
                ));
            }
            if iter == cfg.newton_max || !norm.is_finite() {
                break;
            }
            self.assemble_jacobian(&z, history, w);
            let mut rhs: Vec<T> = f.iter().map(|v| -*v).collect();
            for &d in &constrained {
                self.mat.constrain(&mut rhs, d, T::zero());
            }
            let delta = self.mat.solve(&rhs)?;
            for (c, d) in z.coeffs.iter_mut().zip(&delta) {
                *c += *d;
            }
        }
        Err(SystemError::Diverged {
            t: t_new,
            residuals,
        })
    }

    /// Advance one step from `history` (newest first). Backward-difference
    /// schemes fall back to the trapezoidal rule while the history is still
    /// shorter than their stencil.
    pub fn advance(
        &mut self,
        history: &[State<T>],
        cfg: &StepperConfig<T>,
    ) -> Result<(State<T>, NewtonReport<T>), SystemError<T>> {
        assert!(!history.is_empty(), "advance requires the current state");
        let effective = if history.len() >= cfg.scheme.history_len() {
            cfg.scheme
        } else {
            Scheme::CrankNicolson
        };
        let w = TimeWeights::for_scheme(effective, cfg.dt, history[0].t);

        // Extrapolated initial guess; the previous pressure is carried over.
        let mut guess = history[0].clone();
        match effective {
            Scheme::CrankNicolson => {}
            Scheme::Bdf2 => {
                let two = T::of(2.0);
                for d in 0..self.space.n_u() {
                    guess.coeffs[d] = two * history[0].coeffs[d] - history[1].coeffs[d];
                }
            }
            Scheme::Bdf3 => {
                let three = T::of(3.0);
                for d in 0..self.space.n_u() {
                    guess.coeffs[d] = three * history[0].coeffs[d] - three * history[1].coeffs[d]
                        + history[2].coeffs[d];
                }
            }
        }
        self.newton_solve(guess, history, &w, cfg)
    }

    /// Run a full trajectory from `u0` to `cfg.t_end`, recording diagnostics
    /// each step. Nonlinear-solver divergence ends the run early with a
    /// blow-up outcome instead of an error; other failures propagate.
    pub fn run(
        &mut self,
        u0: State<T>,
        cfg: &StepperConfig<T>,
        hooks: &mut [&mut dyn StepHook<T>],
    ) -> Result<RunOutput<T>, SystemError<T>> {
        cfg.validate();
        let mut series = DiagnosticsSeries::default();
        let mut rec = DiagnosticsRecord::basic(&self.space, &u0);
        rec.newton_iters = Some(0);
        for hook in hooks.iter_mut() {
            hook.on_start(&self.space, &u0, &mut rec);
        }
        series.push(rec);

        let t0 = u0.t;
        let n_steps = ((cfg.t_end - t0) / cfg.dt)
            .to_f64_lossy()
            .round()
            .max(0.0) as usize;
        let mut history: Vec<State<T>> = vec![u0];

        for k in 0..n_steps {
            let (mut new, report) = match self.advance(&history, cfg) {
                Ok(ok) => ok,
                Err(SystemError::Diverged { t, residuals }) => {
                    return Ok(RunOutput {
                        series,
                        final_state: history.swap_remove(0),
                        outcome: RunOutcome::BlewUp { t, residuals },
                    });
                }
                Err(e) => return Err(e),
            };
            // Pin the time stamp to the grid to avoid accumulation drift.
            new.t = t0 + cfg.dt * T::of((k + 1) as f64);

            let mut rec = DiagnosticsRecord::basic(&self.space, &new);
            rec.newton_iters = Some(report.iterations);
            for hook in hooks.iter_mut() {
                hook.on_step(&self.space, &history[0], &new, &mut rec);
            }
            let finite = rec.all_finite();
            series.push(rec);
            history.insert(0, new);
            history.truncate(cfg.scheme.history_len().max(1));
            if !finite {
                let t = history[0].t;
                return Ok(RunOutput {
                    series,
                    final_state: history.swap_remove(0),
                    outcome: RunOutcome::BlewUp {
                        t,
                        residuals: report.residuals,
                    },
                });
            }
        }
        Ok(RunOutput {
            series,
            final_state: history.swap_remove(0),
            outcome: RunOutcome::Completed,
        })
    }
}
