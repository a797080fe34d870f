//! Seeded randomized verification of the algebraic backbone of the solver:
//! the integration-by-parts identities the conservation proofs rest on, the
//! annihilation properties that make particular formulations conserve, and
//! a finite-difference audit of the hand-linearized Newton Jacobians.
//!
//! Every suite draws its fields from a generator seeded by the caller, so a
//! report is a reproducible artifact: the same seed and trial count give
//! bit-identical numbers. The `verify` subcommand of the command-line tool
//! and the acceptance tests both go through this module.
//!
//! The checks are adversarial by construction: the random fields are NOT
//! divergence-free, so every identity is exercised with its divergence
//! terms live, and the trace-dependent identities get fields that vanish on
//! the boundary only where their hypotheses demand it. A fixture variant
//! that deliberately violates those hypotheses exists so the failure path
//! of the harness itself stays tested.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::forms::{
    self, eval_velocity_gradient, nl_inner, verify_identity, FormConfig, FormulationKind,
    VectorIdentity,
};
use crate::mesh::{BoundaryTag, Mesh};
use crate::scalar::Real;
use crate::space::{CellQuad, MixedSpace, QuadContext, State};
use crate::system::{NsProblem, NsSolver, Scheme, TimeWeights};

/// Absolute defect allowed on the exact vector-calculus identities and the
/// annihilation inner products.
pub const IDENTITY_TOL: f64 = 1e-12;

/// Relative per-column error allowed between the assembled Jacobian and
/// forward differences of the residual.
pub const JACOBIAN_TOL: f64 = 1e-6;

/// Step used by the forward-difference Jacobian audit.
pub const FD_STEP: f64 = 1e-6;

/// Quadrature degree for the identity and annihilation integrals; two above
/// the highest exactly-integrable integrand degree so the residual measures
/// the identity, not the rule.
const VERIFY_DEGREE: usize = 8;

/// One verified property: the worst defect seen across all trials, held
/// against its threshold.
#[derive(Debug, Clone)]
pub struct CheckRow<T> {
    /// What was checked, e.g. `swap-antisymmetry (integral)`.
    pub name: String,
    /// Largest defect across every trial (and every quadrature point, for
    /// pointwise checks).
    pub worst: T,
    /// Threshold the defect is held to.
    pub tol: T,
}

impl<T: Real> CheckRow<T> {
    fn new(name: String, worst: T, tol: T) -> Self {
        CheckRow { name, worst, tol }
    }

    /// A non-finite defect is a failure, never a pass.
    pub fn pass(&self) -> bool {
        self.worst.is_finite() && self.worst <= self.tol
    }
}

/// Outcome of one or more verification suites.
#[derive(Debug, Clone)]
pub struct VerifyReport<T> {
    pub seed: u64,
    pub trials: usize,
    pub rows: Vec<CheckRow<T>>,
}

impl<T: Real> VerifyReport<T> {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(CheckRow::pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow<T>> {
        self.rows.iter().filter(|r| !r.pass())
    }

    /// Concatenate another suite's rows; the seed and trial count of `self`
    /// label the combined report.
    pub fn merge(mut self, other: VerifyReport<T>) -> VerifyReport<T> {
        self.rows.extend(other.rows);
        self
    }
}

/// Random coefficients on every degree of freedom, velocity and pressure
/// alike (the identities read only the velocity part; randomizing the rest
/// guards against accidental coupling).
fn random_state<T: Real>(sp: &MixedSpace<T>, rng: &mut ChaCha8Rng) -> State<T> {
    let mut s = State::zeros(sp);
    for c in s.coeffs.iter_mut() {
        *c = T::of(rng.random_range(-1.0..1.0));
    }
    s
}

/// Zero the velocity trace on every boundary segment.
fn zero_trace<T: Real>(sp: &MixedSpace<T>, mut s: State<T>) -> State<T> {
    for tag in BoundaryTag::ALL {
        for comp in 0..2 {
            for &d in sp.boundary_vel_dofs(tag, comp) {
                s.coeffs[d] = T::zero();
            }
        }
    }
    s
}

/// Random velocity coefficients only on nodes of a strict interior box, so
/// the field's support stays a full cell layer away from the boundary.
fn random_interior_supported<T: Real>(sp: &MixedSpace<T>, rng: &mut ChaCha8Rng) -> State<T> {
    let mut s = State::zeros(sp);
    let lo = T::of(0.34);
    let hi = T::of(0.66);
    for node in 0..sp.n_nodes() {
        let [x, y] = sp.node_coord(node);
        if x > lo && x < hi && y > lo && y < hi {
            for comp in 0..2 {
                s.coeffs[sp.vel_dof(node, comp)] = T::of(rng.random_range(-1.0..1.0));
            }
        }
    }
    s
}

fn unit_square<T: Real>(n: usize) -> MixedSpace<T> {
    let mesh = Mesh::rectangle(T::zero(), T::zero(), T::one(), T::one(), n, n)
        .expect("unit square mesh");
    MixedSpace::new(mesh)
}

/// The splittings of u . grad u that hold pointwise, not just under the
/// integral sign.
const POINTWISE: [VectorIdentity; 4] = [
    VectorIdentity::RotationalSplit,
    VectorIdentity::SkewPartAsCurl,
    VectorIdentity::SymSkewSplit,
    VectorIdentity::DeformationSplit,
];

/// Max-norm defect of a pointwise identity over every quadrature point of
/// every cell. `v` feeds the identities that involve a second field.
fn pointwise_identity_max<T: Real>(
    id: VectorIdentity,
    sp: &MixedSpace<T>,
    u: &State<T>,
    v: &State<T>,
    degree: usize,
) -> T {
    let ctx = QuadContext::<T>::triangle(degree).expect("quadrature degree available");
    let mut cq = CellQuad::empty();
    let mut worst = T::zero();
    for cell in 0..sp.mesh().cell_count() {
        let geo = sp.mesh().cell_geometry(cell);
        ctx.bind_into(&geo, &mut cq);
        let nu = sp.gather_cell_velocity(&u.coeffs, cell);
        let nv = sp.gather_cell_velocity(&v.coeffs, cell);
        for q in 0..ctx.len() {
            let (uu, gu) = eval_velocity_gradient(&ctx.p2_vals[q], &cq.p2_grads[q], &nu);
            let d = match id {
                VectorIdentity::RotationalSplit => forms::rotational_split_defect(uu, gu),
                VectorIdentity::SkewPartAsCurl => {
                    let (vv, _) = eval_velocity_gradient(&ctx.p2_vals[q], &cq.p2_grads[q], &nv);
                    forms::skew_curl_defect(gu, vv)
                }
                VectorIdentity::SymSkewSplit => forms::sym_skew_split_defect(uu, gu),
                VectorIdentity::DeformationSplit => forms::deformation_split_defect(uu, gu),
                _ => unreachable!("only the splitting identities are pointwise"),
            };
            let mag = d[0].abs().max(d[1].abs());
            if mag > worst {
                worst = mag;
            }
        }
    }
    worst
}

/// Every vector-calculus identity, on seeded random discrete field triples
/// over a 4x4 unit-square mesh. Integral residuals are held to
/// [`IDENTITY_TOL`] absolute; the pointwise splittings additionally at
/// every quadrature point of every cell. Fields are given a zero trace
/// exactly where an identity's hypotheses require one.
pub fn identity_suite<T: Real>(seed: u64, trials: usize) -> VerifyReport<T> {
    identity_suite_impl(seed, trials, true)
}

/// Failure-path fixture: the same suite with the zero-trace hypothesis of
/// the two trace-dependent identities deliberately violated. Their rows
/// then fail with order-one residuals (the boundary flux the identities
/// discard), proving the harness can detect a broken identity and name it.
/// Everything else still passes. Callers wanting a passing report use
/// [`identity_suite`].
pub fn identity_suite_unconstrained_trace<T: Real>(seed: u64, trials: usize) -> VerifyReport<T> {
    identity_suite_impl(seed, trials, false)
}

fn identity_suite_impl<T: Real>(seed: u64, trials: usize, honor_trace: bool) -> VerifyReport<T> {
    let sp = unit_square::<T>(4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = T::of(IDENTITY_TOL);
    let mut integral = vec![T::zero(); VectorIdentity::ALL.len()];
    let mut pointwise = [T::zero(); POINTWISE.len()];

    for _ in 0..trials {
        let free_u = random_state(&sp, &mut rng);
        let v = random_state(&sp, &mut rng);
        let w = random_state(&sp, &mut rng);
        let traced = zero_trace(&sp, free_u.clone());
        for (k, id) in VectorIdentity::ALL.iter().enumerate() {
            let u = if id.needs_zero_trace() && honor_trace {
                &traced
            } else {
                &free_u
            };
            let r = verify_identity(*id, &sp, u, &v, &w, VERIFY_DEGREE);
            if r > integral[k] {
                integral[k] = r;
            }
        }
        for (k, id) in POINTWISE.iter().enumerate() {
            let r = pointwise_identity_max(*id, &sp, &free_u, &v, VERIFY_DEGREE);
            if r > pointwise[k] {
                pointwise[k] = r;
            }
        }
    }

    let mut rows = Vec::with_capacity(integral.len() + pointwise.len());
    for (k, id) in VectorIdentity::ALL.iter().enumerate() {
        rows.push(CheckRow::new(format!("{id} (integral)"), integral[k], tol));
    }
    for (k, id) in POINTWISE.iter().enumerate() {
        rows.push(CheckRow::new(format!("{id} (pointwise)"), pointwise[k], tol));
    }
    VerifyReport { seed, trials, rows }
}

/// The annihilation properties behind the conservation laws, on seeded
/// interior-supported random fields over a 6x6 unit-square mesh: the
/// skew-symmetric, rotational, and energy-momentum-conserving forms
/// annihilate the field itself (kinetic energy), and the momentum-capable
/// forms annihilate the constant and rotational test functions (linear and
/// angular momentum). All inner products are held to [`IDENTITY_TOL`].
pub fn annihilation_suite<T: Real>(seed: u64, trials: usize) -> VerifyReport<T> {
    let sp = unit_square::<T>(6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = T::of(IDENTITY_TOL);

    let ex = sp.interpolate_velocity(|_| [T::one(), T::zero()]);
    let ey = sp.interpolate_velocity(|_| [T::zero(), T::one()]);
    let phi = sp.interpolate_velocity(|p| [-p[1], p[0]]);

    let self_kinds = [FormulationKind::Skew, FormulationKind::Rot, FormulationKind::Emac];
    let momentum_kinds = [FormulationKind::Emac, FormulationKind::Cons];
    let tests: [(&str, &State<T>); 3] =
        [("x-momentum", &ex), ("y-momentum", &ey), ("angular-momentum", &phi)];

    let mut self_worst = [T::zero(); 3];
    let mut mom_worst = [[T::zero(); 3]; 2];
    for _ in 0..trials {
        let u = random_interior_supported(&sp, &mut rng);
        for (k, kind) in self_kinds.iter().enumerate() {
            let r = nl_inner(&sp, *kind, &u, &u, VERIFY_DEGREE).abs();
            if r > self_worst[k] {
                self_worst[k] = r;
            }
        }
        for (k, kind) in momentum_kinds.iter().enumerate() {
            for (j, (_, f)) in tests.iter().enumerate() {
                let r = nl_inner(&sp, *kind, &u, f, VERIFY_DEGREE).abs();
                if r > mom_worst[k][j] {
                    mom_worst[k][j] = r;
                }
            }
        }
    }

    let mut rows = Vec::with_capacity(9);
    for (k, kind) in self_kinds.iter().enumerate() {
        rows.push(CheckRow::new(
            format!("{kind} self-annihilation"),
            self_worst[k],
            tol,
        ));
    }
    for (k, kind) in momentum_kinds.iter().enumerate() {
        for (j, (name, _)) in tests.iter().enumerate() {
            rows.push(CheckRow::new(
                format!("{kind} {name} annihilation"),
                mom_worst[k][j],
                tol,
            ));
        }
    }
    VerifyReport { seed, trials, rows }
}

/// Forward-difference audit of the assembled Newton Jacobian: every column,
/// every formulation, every time scheme, on a two-cell mesh whose right
/// edge is an outflow so the boundary-correction linearization is covered
/// too. Each row reports the worst per-column relative error for one
/// formulation/scheme pair, held to [`JACOBIAN_TOL`].
pub fn jacobian_suite<T: Real>(seed: u64) -> VerifyReport<T> {
    let mesh = Mesh::<T>::rectangle(T::zero(), T::zero(), T::one(), T::one(), 1, 1)
        .expect("two-cell mesh")
        .retag_boundary(|mid, _| {
            if (mid[0] - T::one()).abs() < T::of(1e-12) {
                Some(BoundaryTag::Outflow)
            } else {
                None
            }
        });
    let sp = MixedSpace::new(mesh);
    let n = sp.n_total();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = T::of(FD_STEP);
    let tol = T::of(JACOBIAN_TOL);
    let dt = T::of(0.05);

    let mut rows = Vec::with_capacity(FormulationKind::ALL.len() * Scheme::ALL.len());
    for kind in FormulationKind::ALL {
        for scheme in Scheme::ALL {
            // Viscosity and grad-div both on, so their blocks are audited
            // alongside the nonlinear and outflow terms.
            let problem =
                NsProblem::new(kind, FormConfig::new(T::of(0.7)).with_gamma(T::of(0.1)));
            let mut solver = NsSolver::new(sp.clone(), problem).expect("solver setup");
            let w = TimeWeights::for_scheme(scheme, dt, T::zero());

            let mut iterate = State::zeros(solver.space());
            let mut history = vec![
                State::zeros(solver.space()),
                State::zeros(solver.space()),
                State::zeros(solver.space()),
            ];
            for d in 0..n {
                iterate.coeffs[d] = T::of(rng.random_range(-1.0..1.0));
            }
            for h in &mut history {
                for d in 0..n {
                    h.coeffs[d] = T::of(rng.random_range(-1.0..1.0));
                }
            }

            solver.assemble_jacobian(&iterate, &history, &w);
            let f0 = solver.assemble_residual(&iterate, &history, &w);
            let mut worst = T::zero();
            for col in 0..n {
                let mut bumped = iterate.clone();
                bumped.coeffs[col] = bumped.coeffs[col] + eps;
                let f1 = solver.assemble_residual(&bumped, &history, &w);
                let mut err = T::zero();
                let mut scale = T::zero();
                for row in 0..n {
                    let fd = (f1[row] - f0[row]) / eps;
                    let j = solver.mat.get(row, col);
                    err = err + (fd - j) * (fd - j);
                    scale = scale + j * j;
                }
                let rel = err.sqrt() / scale.sqrt().max(T::one());
                if rel > worst {
                    worst = rel;
                }
            }
            rows.push(CheckRow::new(format!("{kind}/{scheme} jacobian"), worst, tol));
        }
    }
    VerifyReport { seed, trials: 1, rows }
}

/// The full battery under one seed: identities, annihilation properties,
/// and the Jacobian audit, concatenated into a single report.
pub fn run_verification<T: Real>(seed: u64, trials: usize) -> VerifyReport<T> {
    identity_suite(seed, trials)
        .merge(annihilation_suite(seed, trials))
        .merge(jacobian_suite(seed))
}
