//! Weak-form kernels: the trilinear transport form, five interchangeable
//! nonlinear formulations with exact linearizations, viscous/pressure/
//! divergence couplings, grad-div stabilization, and the nonlinear outflow
//! boundary corrections.
//!
//! Gradient convention throughout: `g[i][j] = du_i / dx_j`, so the convective
//! derivative u.grad u is the matrix-vector product g u, and the 2D scalar
//! curl is `g[1][0] - g[0][1]`.

use crate::elements::edge_rule;
use crate::mesh::BoundaryTag;
use crate::scalar::Real;
use crate::space::{CellQuad, EdgeQuad, MixedSpace, QuadContext, State};

/// Velocity gradient at a point.
pub type Grad2<T> = [[T; 2]; 2];

/// The five nonlinear formulations of the inertia term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FormulationKind {
    /// u.grad u
    Conv,
    /// u.grad u + (1/2)(div u) u
    Skew,
    /// (curl u) x u, with the pressure absorbing grad |u|^2/2
    Rot,
    /// u.grad u + (div u) u, i.e. div(u x u) expanded
    Cons,
    /// 2 D(u) u + (div u) u, conserving energy, momentum and angular momentum
    Emac,
}

impl FormulationKind {
    pub const ALL: [FormulationKind; 5] = [
        FormulationKind::Conv,
        FormulationKind::Skew,
        FormulationKind::Rot,
        FormulationKind::Cons,
        FormulationKind::Emac,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FormulationKind::Conv => "conv",
            FormulationKind::Skew => "skew",
            FormulationKind::Rot => "rot",
            FormulationKind::Cons => "cons",
            FormulationKind::Emac => "emac",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "conv" => Some(FormulationKind::Conv),
            "skew" => Some(FormulationKind::Skew),
            "rot" => Some(FormulationKind::Rot),
            "cons" => Some(FormulationKind::Cons),
            "emac" => Some(FormulationKind::Emac),
            _ => None,
        }
    }

    /// Whether the form annihilates energy: (NL(u), u) = 0 for zero-trace u
    /// regardless of the discrete divergence.
    pub fn conserves_energy(self) -> bool {
        matches!(
            self,
            FormulationKind::Skew | FormulationKind::Rot | FormulationKind::Emac
        )
    }

    /// Whether the form annihilates constant test functions for interior u.
    pub fn conserves_momentum(self) -> bool {
        matches!(self, FormulationKind::Cons | FormulationKind::Emac)
    }
}

impl std::fmt::Display for FormulationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Physical and discretization parameters of the weak form.
#[derive(Debug, Clone)]
pub struct FormConfig<T> {
    /// Kinematic viscosity, >= 0.
    pub nu: T,
    /// Grad-div stabilization parameter, >= 0 (0 disables the term).
    pub gamma: T,
    /// Apply the nonlinear outflow boundary correction where the formulation
    /// needs one to keep the outflow traction in the kinematic pressure.
    pub outflow_correction: bool,
    /// Triangle quadrature degree for residual and Jacobian assembly.
    pub quad_degree: usize,
}

impl<T: Real> FormConfig<T> {
    pub fn new(nu: T) -> Self {
        let cfg = FormConfig {
            nu,
            gamma: T::zero(),
            outflow_correction: true,
            // Exact for every product of discrete factors in the residual
            // (the stiffest is cubic velocity data times a quadratic test
            // function at degree 5), with one degree of headroom.
            quad_degree: 6,
        };
        cfg.validate();
        cfg
    }

    pub fn with_gamma(mut self, gamma: T) -> Self {
        self.gamma = gamma;
        self.validate();
        self
    }

    pub fn validate(&self) {
        assert!(self.nu >= T::zero(), "viscosity must be non-negative");
        assert!(self.gamma >= T::zero(), "grad-div parameter must be non-negative");
        assert!(self.quad_degree >= 5, "quadrature must integrate the inertia term");
    }
}

#[inline]
fn mat_vec<T: Real>(m: &Grad2<T>, v: [T; 2]) -> [T; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Evaluate velocity value and gradient from nodal cell data at one
/// quadrature point.
#[inline]
pub fn eval_velocity_gradient<T: Real>(
    phi: &[T; 6],
    grads: &[[T; 2]; 6],
    nodal: &[[T; 2]; 6],
) -> ([T; 2], Grad2<T>) {
    let mut u = [T::zero(); 2];
    let mut g = [[T::zero(); 2]; 2];
    for i in 0..6 {
        let [ux, uy] = nodal[i];
        u[0] += phi[i] * ux;
        u[1] += phi[i] * uy;
        g[0][0] += grads[i][0] * ux;
        g[0][1] += grads[i][1] * ux;
        g[1][0] += grads[i][0] * uy;
        g[1][1] += grads[i][1] * uy;
    }
    (u, g)
}

/// Pointwise value of the chosen nonlinear form at a state (u, grad u).
#[inline]
pub fn nl_value<T: Real>(kind: FormulationKind, u: [T; 2], g: Grad2<T>) -> [T; 2] {
    let conv = mat_vec(&g, u);
    let div = g[0][0] + g[1][1];
    match kind {
        FormulationKind::Conv => conv,
        FormulationKind::Skew => [
            conv[0] + T::half() * div * u[0],
            conv[1] + T::half() * div * u[1],
        ],
        FormulationKind::Rot => {
            let w = g[1][0] - g[0][1];
            [-w * u[1], w * u[0]]
        }
        FormulationKind::Cons => [conv[0] + div * u[0], conv[1] + div * u[1]],
        FormulationKind::Emac => {
            // (g + g^T) u + (div u) u
            let sym = [
                (g[0][0] + g[0][0]) * u[0] + (g[0][1] + g[1][0]) * u[1],
                (g[1][0] + g[0][1]) * u[0] + (g[1][1] + g[1][1]) * u[1],
            ];
            [sym[0] + div * u[0], sym[1] + div * u[1]]
        }
    }
}

/// Directional derivative of [`nl_value`] at (u, g) in direction (du, dg).
/// Every form is quadratic, so this is exact.
#[inline]
pub fn nl_directional<T: Real>(
    kind: FormulationKind,
    u: [T; 2],
    g: Grad2<T>,
    du: [T; 2],
    dg: Grad2<T>,
) -> [T; 2] {
    let div = g[0][0] + g[1][1];
    let ddiv = dg[0][0] + dg[1][1];
    let conv_d = {
        let a = mat_vec(&dg, u);
        let b = mat_vec(&g, du);
        [a[0] + b[0], a[1] + b[1]]
    };
    match kind {
        FormulationKind::Conv => conv_d,
        FormulationKind::Skew => [
            conv_d[0] + T::half() * (ddiv * u[0] + div * du[0]),
            conv_d[1] + T::half() * (ddiv * u[1] + div * du[1]),
        ],
        FormulationKind::Rot => {
            let w = g[1][0] - g[0][1];
            let dw = dg[1][0] - dg[0][1];
            [-dw * u[1] - w * du[1], dw * u[0] + w * du[0]]
        }
        FormulationKind::Cons => [
            conv_d[0] + ddiv * u[0] + div * du[0],
            conv_d[1] + ddiv * u[1] + div * du[1],
        ],
        FormulationKind::Emac => {
            let sym_d = [
                (dg[0][0] + dg[0][0]) * u[0]
                    + (dg[0][1] + dg[1][0]) * u[1]
                    + (g[0][0] + g[0][0]) * du[0]
                    + (g[0][1] + g[1][0]) * du[1],
                (dg[1][0] + dg[0][1]) * u[0]
                    + (dg[1][1] + dg[1][1]) * u[1]
                    + (g[1][0] + g[0][1]) * du[0]
                    + (g[1][1] + g[1][1]) * du[1],
            ];
            [
                sym_d[0] + ddiv * u[0] + div * du[0],
                sym_d[1] + ddiv * u[1] + div * du[1],
            ]
        }
    }
}

/// Element residual of the nonlinear term: out[2i+c] = (NL(u), phi_i e_c).
pub fn element_nl_residual<T: Real>(
    kind: FormulationKind,
    ctx: &QuadContext<T>,
    cq: &CellQuad<T>,
    nodal: &[[T; 2]; 6],
) -> [T; 12] {
    let mut out = [T::zero(); 12];
    for q in 0..ctx.len() {
        let (u, g) = eval_velocity_gradient(&ctx.p2_vals[q], &cq.p2_grads[q], nodal);
        let nl = nl_value(kind, u, g);
        let w = cq.wdet[q];
        for i in 0..6 {
            let wphi = w * ctx.p2_vals[q][i];
            out[2 * i] += wphi * nl[0];
            out[2 * i + 1] += wphi * nl[1];
        }
    }
    out
}

/// Element Jacobian of the nonlinear term: jac[2i+c][2j+d] is the derivative
/// of residual entry (i, c) with respect to nodal value (j, d).
pub fn element_nl_jacobian<T: Real>(
    kind: FormulationKind,
    ctx: &QuadContext<T>,
    cq: &CellQuad<T>,
    nodal: &[[T; 2]; 6],
) -> [[T; 12]; 12] {
    let mut jac = [[T::zero(); 12]; 12];
    for q in 0..ctx.len() {
        let phi = &ctx.p2_vals[q];
        let grads = &cq.p2_grads[q];
        let (u, g) = eval_velocity_gradient(phi, grads, nodal);
        let w = cq.wdet[q];
        for j in 0..6 {
            for d in 0..2 {
                let mut du = [T::zero(); 2];
                du[d] = phi[j];
                let mut dg = [[T::zero(); 2]; 2];
                dg[d] = grads[j];
                let nd = nl_directional(kind, u, g, du, dg);
                for i in 0..6 {
                    let wphi = w * phi[i];
                    jac[2 * i][2 * j + d] += wphi * nd[0];
                    jac[2 * i + 1][2 * j + d] += wphi * nd[1];
                }
            }
        }
    }
    jac
}

/// State-independent element blocks of the saddle system.
pub struct SaddleBlocks<T> {
    /// Viscous plus grad-div block: nu (grad phi_j e_d, grad phi_i e_c)
    /// + gamma (div phi_j e_d, div phi_i e_c), indexed [2i+c][2j+d].
    pub vel_vel: [[T; 12]; 12],
    /// Divergence coupling (div phi_i e_c, psi_j), indexed [j][2i+c].
    /// Velocity rows subtract its transpose against pressure coefficients;
    /// pressure rows add it against velocity coefficients.
    pub div_vel: [[T; 12]; 3],
}

/// Viscous, grad-div, and velocity/pressure coupling blocks of one cell.
pub fn element_saddle<T: Real>(
    ctx: &QuadContext<T>,
    cq: &CellQuad<T>,
    config: &FormConfig<T>,
) -> SaddleBlocks<T> {
    let mut vel_vel = [[T::zero(); 12]; 12];
    let mut div_vel = [[T::zero(); 12]; 3];
    let nu = config.nu;
    let gamma = config.gamma;
    for q in 0..ctx.len() {
        let w = cq.wdet[q];
        let grads = &cq.p2_grads[q];
        let psi = &ctx.p1_vals[q];
        for i in 0..6 {
            for j in 0..6 {
                let lap = w * nu * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                vel_vel[2 * i][2 * j] += lap;
                vel_vel[2 * i + 1][2 * j + 1] += lap;
                if gamma > T::zero() {
                    for c in 0..2 {
                        for d in 0..2 {
                            vel_vel[2 * i + c][2 * j + d] +=
                                w * gamma * grads[i][c] * grads[j][d];
                        }
                    }
                }
            }
            for jp in 0..3 {
                for c in 0..2 {
                    div_vel[jp][2 * i + c] += w * grads[i][c] * psi[jp];
                }
            }
        }
    }
    SaddleBlocks { vel_vel, div_vel }
}

/// Scalar P2 mass block, shared by both velocity components.
pub fn element_mass<T: Real>(ctx: &QuadContext<T>, cq: &CellQuad<T>) -> [[T; 6]; 6] {
    let mut m = [[T::zero(); 6]; 6];
    for q in 0..ctx.len() {
        let w = cq.wdet[q];
        let phi = &ctx.p2_vals[q];
        for i in 0..6 {
            for j in 0..6 {
                m[i][j] += w * phi[i] * phi[j];
            }
        }
    }
    m
}

/// Element load vector (f, phi_i e_c) for an analytic forcing field.
pub fn element_forcing<T: Real>(
    ctx: &QuadContext<T>,
    cq: &CellQuad<T>,
    f: impl Fn([T; 2]) -> [T; 2],
) -> [T; 12] {
    let mut out = [T::zero(); 12];
    for q in 0..ctx.len() {
        let w = cq.wdet[q];
        let fx = f(cq.xq[q]);
        for i in 0..6 {
            let wphi = w * ctx.p2_vals[q][i];
            out[2 * i] += wphi * fx[0];
            out[2 * i + 1] += wphi * fx[1];
        }
    }
    out
}

/// Sign of the outflow correction integral for a formulation, if it needs
/// one. The uncorrected rotational form carries the Bernoulli pressure
/// gradient inside its volume term, so its natural outflow traction is in
/// p + |u|^2/2; adding the boundary integral of |u|^2/2 (v.n) moves the
/// traction back to the kinematic pressure. The energy-momentum form hides
/// -grad |u|^2/2 in its volume term instead, so the same integral must be
/// subtracted. The convective, skew-symmetric, and conservative volume forms
/// already produce the kinematic-pressure traction.
pub fn outflow_sign<T: Real>(kind: FormulationKind) -> Option<T> {
    match kind {
        FormulationKind::Emac => Some(-T::one()),
        FormulationKind::Rot => Some(T::one()),
        _ => None,
    }
}

/// Boundary residual of the outflow correction on one segment:
/// sign * int |u|^2/2 (phi_i e_c . n) ds, indexed [2i+c]. Zero for the
/// formulations that do not need one.
pub fn outflow_residual<T: Real>(
    kind: FormulationKind,
    eq: &EdgeQuad<T>,
    normal: [T; 2],
    nodal: &[[T; 2]; 6],
) -> [T; 12] {
    let mut out = [T::zero(); 12];
    let Some(sign) = outflow_sign::<T>(kind) else {
        return out;
    };
    for q in 0..eq.xq.len() {
        let phi = &eq.p2_vals[q];
        let mut u = [T::zero(); 2];
        for i in 0..6 {
            u[0] += phi[i] * nodal[i][0];
            u[1] += phi[i] * nodal[i][1];
        }
        let half_speed = T::half() * (u[0] * u[0] + u[1] * u[1]);
        let w = eq.wds[q] * sign * half_speed;
        for i in 0..6 {
            out[2 * i] += w * phi[i] * normal[0];
            out[2 * i + 1] += w * phi[i] * normal[1];
        }
    }
    out
}

/// Derivative of [`outflow_residual`] with respect to the nodal values:
/// sign * int (u . du)(phi_i e_c . n) ds.
pub fn outflow_jacobian<T: Real>(
    kind: FormulationKind,
    eq: &EdgeQuad<T>,
    normal: [T; 2],
    nodal: &[[T; 2]; 6],
) -> [[T; 12]; 12] {
    let mut jac = [[T::zero(); 12]; 12];
    let Some(sign) = outflow_sign::<T>(kind) else {
        return jac;
    };
    for q in 0..eq.xq.len() {
        let phi = &eq.p2_vals[q];
        let mut u = [T::zero(); 2];
        for i in 0..6 {
            u[0] += phi[i] * nodal[i][0];
            u[1] += phi[i] * nodal[i][1];
        }
        let w = eq.wds[q] * sign;
        for j in 0..6 {
            for d in 0..2 {
                let udotdu = u[d] * phi[j];
                for i in 0..6 {
                    let v = w * udotdu * phi[i];
                    jac[2 * i][2 * j + d] += v * normal[0];
                    jac[2 * i + 1][2 * j + d] += v * normal[1];
                }
            }
        }
    }
    jac
}

/// Quadrature value of the trilinear transport form (u . grad v, w).
pub fn trilinear_b<T: Real>(
    space: &MixedSpace<T>,
    u: &State<T>,
    v: &State<T>,
    w: &State<T>,
    degree: usize,
) -> T {
    integrate_states(space, degree, |vals| {
        let (uu, _) = vals[0];
        let (_, gv) = vals[1];
        let (ww, _) = vals[2];
        let t = mat_vec(&gv, uu);
        t[0] * ww[0] + t[1] * ww[1]
    }, &[u, v, w])
}

/// Quadrature value of (NL_kind(u), w).
pub fn nl_inner<T: Real>(
    space: &MixedSpace<T>,
    kind: FormulationKind,
    u: &State<T>,
    w: &State<T>,
    degree: usize,
) -> T {
    integrate_states(space, degree, |vals| {
        let (uu, gu) = vals[0];
        let (ww, _) = vals[1];
        let nl = nl_value(kind, uu, gu);
        nl[0] * ww[0] + nl[1] * ww[1]
    }, &[u, w])
}

/// Quadrature value of ((div u) v, w).
pub fn weighted_div_inner<T: Real>(
    space: &MixedSpace<T>,
    u: &State<T>,
    v: &State<T>,
    w: &State<T>,
    degree: usize,
) -> T {
    integrate_states(space, degree, |vals| {
        let (_, gu) = vals[0];
        let (vv, _) = vals[1];
        let (ww, _) = vals[2];
        (gu[0][0] + gu[1][1]) * (vv[0] * ww[0] + vv[1] * ww[1])
    }, &[u, v, w])
}

/// Quadrature value of (grad(|u|^2/2), w), using the pointwise chain rule
/// grad(|u|^2/2) = (grad u)^T u for the discrete field.
pub fn kinetic_gradient_inner<T: Real>(
    space: &MixedSpace<T>,
    u: &State<T>,
    w: &State<T>,
    degree: usize,
) -> T {
    integrate_states(space, degree, |vals| {
        let (uu, gu) = vals[0];
        let (ww, _) = vals[1];
        let gq = [
            gu[0][0] * uu[0] + gu[1][0] * uu[1],
            gu[0][1] * uu[0] + gu[1][1] * uu[1],
        ];
        gq[0] * ww[0] + gq[1] * ww[1]
    }, &[u, w])
}

/// Integrate a pointwise function of several discrete velocity fields.
fn integrate_states<T: Real>(
    space: &MixedSpace<T>,
    degree: usize,
    f: impl Fn(&[([T; 2], Grad2<T>)]) -> T,
    states: &[&State<T>],
) -> T {
    let ctx = QuadContext::triangle(degree).expect("quadrature degree available");
    let mut cq = crate::space::CellQuad::empty();
    let mut acc = T::zero();
    let mut vals = vec![([T::zero(); 2], [[T::zero(); 2]; 2]); states.len()];
    for cell in 0..space.mesh().cell_count() {
        let geo = space.mesh().cell_geometry(cell);
        ctx.bind_into(&geo, &mut cq);
        let nodal: Vec<[[T; 2]; 6]> = states
            .iter()
            .map(|s| space.gather_cell_velocity(&s.coeffs, cell))
            .collect();
        for q in 0..ctx.len() {
            for (k, n) in nodal.iter().enumerate() {
                vals[k] = eval_velocity_gradient(&ctx.p2_vals[q], &cq.p2_grads[q], n);
            }
            acc += cq.wdet[q] * f(&vals);
        }
    }
    acc
}

/// Algebraic and integration-by-parts identities that the kernels must
/// satisfy, used to certify the implementation against independent
/// evaluations. The first two require zero-trace `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VectorIdentity {
    /// b(u,v,w) = -b(u,w,v) - ((div u) v, w) for zero-trace u.
    SwapAntisymmetry,
    /// b(u,w,w) = -1/2 ((div u) w, w) for zero-trace u.
    SelfTransport,
    /// b(u,v,w) = ((grad v) u, w) = ((grad v)^T w, u).
    GradientContraction,
    /// u.grad u = (curl u) x u + grad(|u|^2/2), pointwise.
    RotationalSplit,
    /// (skew part of grad u) v = 1/2 (curl u) x v, pointwise.
    SkewPartAsCurl,
    /// (grad u) u = D(u) u + 1/2 (curl u) x u, pointwise.
    SymSkewSplit,
    /// u.grad u = 2 D(u) u - grad(|u|^2/2), pointwise.
    DeformationSplit,
    /// (D(u) u, u) = b(u, u, u).
    SymmetricSelfEnergy,
}

impl VectorIdentity {
    pub const ALL: [VectorIdentity; 8] = [
        VectorIdentity::SwapAntisymmetry,
        VectorIdentity::SelfTransport,
        VectorIdentity::GradientContraction,
        VectorIdentity::RotationalSplit,
        VectorIdentity::SkewPartAsCurl,
        VectorIdentity::SymSkewSplit,
        VectorIdentity::DeformationSplit,
        VectorIdentity::SymmetricSelfEnergy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VectorIdentity::SwapAntisymmetry => "swap-antisymmetry",
            VectorIdentity::SelfTransport => "self-transport",
            VectorIdentity::GradientContraction => "gradient-contraction",
            VectorIdentity::RotationalSplit => "rotational-split",
            VectorIdentity::SkewPartAsCurl => "skew-part-as-curl",
            VectorIdentity::SymSkewSplit => "sym-skew-split",
            VectorIdentity::DeformationSplit => "deformation-split",
            VectorIdentity::SymmetricSelfEnergy => "symmetric-self-energy",
        }
    }

    /// Whether the identity requires the first field to vanish on the
    /// boundary (it comes from integration by parts).
    pub fn needs_zero_trace(self) -> bool {
        matches!(
            self,
            VectorIdentity::SwapAntisymmetry | VectorIdentity::SelfTransport
        )
    }
}

impl std::fmt::Display for VectorIdentity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Residual of one identity on the given discrete fields: either the
/// absolute defect of a scalar equality, or the L2 norm of a pointwise
/// vector defect. Zero-trace identities expect the caller to pass a `u`
/// vanishing on the boundary.
pub fn verify_identity<T: Real>(
    id: VectorIdentity,
    space: &MixedSpace<T>,
    u: &State<T>,
    v: &State<T>,
    w: &State<T>,
    degree: usize,
) -> T {
    match id {
        VectorIdentity::SwapAntisymmetry => {
            let lhs = trilinear_b(space, u, v, w, degree);
            let rhs = -trilinear_b(space, u, w, v, degree)
                - weighted_div_inner(space, u, v, w, degree);
            (lhs - rhs).abs()
        }
        VectorIdentity::SelfTransport => {
            let lhs = trilinear_b(space, u, w, w, degree);
            let rhs = -T::half() * weighted_div_inner(space, u, w, w, degree);
            (lhs - rhs).abs()
        }
        VectorIdentity::GradientContraction => {
            let b = trilinear_b(space, u, v, w, degree);
            // ((grad v) u, w), contracted in the other association order.
            let c1 = integrate_states(space, degree, |vals| {
                let (uu, _) = vals[0];
                let (_, gv) = vals[1];
                let (ww, _) = vals[2];
                let mut acc = T::zero();
                for i in 0..2 {
                    for j in 0..2 {
                        acc += gv[i][j] * uu[j] * ww[i];
                    }
                }
                acc
            }, &[u, v, w]);
            // ((grad v)^T w, u).
            let c2 = integrate_states(space, degree, |vals| {
                let (uu, _) = vals[0];
                let (_, gv) = vals[1];
                let (ww, _) = vals[2];
                let gt_w = [
                    gv[0][0] * ww[0] + gv[1][0] * ww[1],
                    gv[0][1] * ww[0] + gv[1][1] * ww[1],
                ];
                gt_w[0] * uu[0] + gt_w[1] * uu[1]
            }, &[u, v, w]);
            (b - c1).abs().max((b - c2).abs())
        }
        VectorIdentity::RotationalSplit => {
            pointwise_defect(space, u, degree, rotational_split_defect)
        }
        VectorIdentity::SkewPartAsCurl => {
            // Uses u for the gradient and v for the multiplied field.
            integrate_states(space, degree, |vals| {
                let (_, gu) = vals[0];
                let (vv, _) = vals[1];
                let d = skew_curl_defect(gu, vv);
                d[0] * d[0] + d[1] * d[1]
            }, &[u, v])
            .sqrt()
        }
        VectorIdentity::SymSkewSplit => {
            pointwise_defect(space, u, degree, sym_skew_split_defect)
        }
        VectorIdentity::DeformationSplit => {
            pointwise_defect(space, u, degree, deformation_split_defect)
        }
        VectorIdentity::SymmetricSelfEnergy => {
            let lhs = integrate_states(space, degree, |vals| {
                let (uu, g) = vals[0];
                let d00 = g[0][0];
                let d01 = T::half() * (g[0][1] + g[1][0]);
                let d11 = g[1][1];
                let du = [d00 * uu[0] + d01 * uu[1], d01 * uu[0] + d11 * uu[1]];
                du[0] * uu[0] + du[1] * uu[1]
            }, &[u]);
            let rhs = trilinear_b(space, u, u, u, degree);
            (lhs - rhs).abs()
        }
    }
}

/// Defect of u . grad u = w x u + grad(|u|^2/2) with w the scalar curl.
pub(crate) fn rotational_split_defect<T: Real>(uu: [T; 2], g: Grad2<T>) -> [T; 2] {
    let conv = mat_vec(&g, uu);
    let wcurl = g[1][0] - g[0][1];
    let rot = [-wcurl * uu[1], wcurl * uu[0]];
    let gq = [
        g[0][0] * uu[0] + g[1][0] * uu[1],
        g[0][1] * uu[0] + g[1][1] * uu[1],
    ];
    [conv[0] - rot[0] - gq[0], conv[1] - rot[1] - gq[1]]
}

/// Defect of (skew part of grad u) v = -1/2 (curl u) x v.
pub(crate) fn skew_curl_defect<T: Real>(gu: Grad2<T>, vv: [T; 2]) -> [T; 2] {
    let skew = T::half() * (gu[0][1] - gu[1][0]);
    let lhs = [skew * vv[1], -skew * vv[0]];
    let wcurl = gu[1][0] - gu[0][1];
    let rhs = [-T::half() * wcurl * vv[1], T::half() * wcurl * vv[0]];
    [lhs[0] - rhs[0], lhs[1] - rhs[1]]
}

/// Defect of u . grad u = D(u)u + 1/2 (curl u) x u.
pub(crate) fn sym_skew_split_defect<T: Real>(uu: [T; 2], g: Grad2<T>) -> [T; 2] {
    let conv = mat_vec(&g, uu);
    let d00 = g[0][0];
    let d01 = T::half() * (g[0][1] + g[1][0]);
    let d11 = g[1][1];
    let sym = [d00 * uu[0] + d01 * uu[1], d01 * uu[0] + d11 * uu[1]];
    let wcurl = g[1][0] - g[0][1];
    let rot = [
        -T::half() * wcurl * uu[1],
        T::half() * wcurl * uu[0],
    ];
    [conv[0] - sym[0] - rot[0], conv[1] - sym[1] - rot[1]]
}

/// Defect of u . grad u = 2D(u)u - grad(|u|^2/2).
pub(crate) fn deformation_split_defect<T: Real>(uu: [T; 2], g: Grad2<T>) -> [T; 2] {
    let conv = mat_vec(&g, uu);
    let two_d = [
        (g[0][0] + g[0][0]) * uu[0] + (g[0][1] + g[1][0]) * uu[1],
        (g[1][0] + g[0][1]) * uu[0] + (g[1][1] + g[1][1]) * uu[1],
    ];
    let gq = [
        g[0][0] * uu[0] + g[1][0] * uu[1],
        g[0][1] * uu[0] + g[1][1] * uu[1],
    ];
    [
        conv[0] - two_d[0] + gq[0],
        conv[1] - two_d[1] + gq[1],
    ]
}

/// L2 norm over the domain of a pointwise vector defect of one field.
fn pointwise_defect<T: Real>(
    space: &MixedSpace<T>,
    u: &State<T>,
    degree: usize,
    f: impl Fn([T; 2], Grad2<T>) -> [T; 2],
) -> T {
    integrate_states(space, degree, |vals| {
        let (uu, g) = vals[0];
        let d = f(uu, g);
        d[0] * d[0] + d[1] * d[1]
    }, &[u])
    .sqrt()
}

/// Boundary integral of phi . n over tagged segments for an analytic field,
/// evaluated with a raw edge rule; an independent oracle for the outflow
/// kernels in tests and verification.
pub fn boundary_flux_oracle<T: Real>(
    space: &MixedSpace<T>,
    tag: BoundaryTag,
    degree: usize,
    f: impl Fn([T; 2]) -> T,
) -> T {
    let rule = edge_rule::<T>(degree).expect("edge rule available");
    let mut acc = T::zero();
    for seg in space.mesh().boundary_segments() {
        if seg.tag != tag {
            continue;
        }
        let va = space.mesh().vertices()[seg.a];
        let vb = space.mesh().vertices()[seg.b];
        for q in 0..rule.len() {
            let s = rule.points[q][0];
            let x = [
                va[0] + (vb[0] - va[0]) * s,
                va[1] + (vb[1] - va[1]) * s,
            ];
            acc += rule.weights[q] * seg.length * f(x);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::p2_eval;
    use crate::mesh::Mesh;
    use crate::space::EdgeQuadContext;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn space_n(n: usize) -> MixedSpace<f64> {
        MixedSpace::new(Mesh::rectangle(0.0, 0.0, 1.0, 1.0, n, n).unwrap())
    }

    /// Random coefficients on every velocity node.
    fn random_state(sp: &MixedSpace<f64>, rng: &mut impl Rng) -> State<f64> {
        let mut s = State::zeros(sp);
        for d in 0..sp.n_u() {
            s.coeffs[d] = rng.random_range(-1.0..1.0);
        }
        s
    }

    /// Random coefficients, zeroed on all boundary nodes so the trace
    /// vanishes identically.
    fn random_zero_trace(sp: &MixedSpace<f64>, rng: &mut impl Rng) -> State<f64> {
        let mut s = random_state(sp, rng);
        for tag in crate::mesh::BoundaryTag::ALL {
            for comp in 0..2 {
                for &d in sp.boundary_vel_dofs(tag, comp) {
                    s.coeffs[d] = 0.0;
                }
            }
        }
        s
    }

    /// Random coefficients only on nodes inside a strict interior box, so
    /// the field's support stays away from the boundary.
    fn random_interior_supported(sp: &MixedSpace<f64>, rng: &mut impl Rng) -> State<f64> {
        let mut s = State::zeros(sp);
        for node in 0..sp.n_nodes() {
            let [x, y] = sp.node_coord(node);
            if x > 0.34 && x < 0.66 && y > 0.34 && y < 0.66 {
                s.coeffs[2 * node] = rng.random_range(-1.0..1.0);
                s.coeffs[2 * node + 1] = rng.random_range(-1.0..1.0);
            }
        }
        s
    }

    /// Exactly representable pointwise-solenoidal field: the rotated
    /// gradient of a random cubic stream function is quadratic.
    fn random_solenoidal(sp: &MixedSpace<f64>, rng: &mut impl Rng) -> State<f64> {
        let c: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        // psi = sum c_k x^a y^b over cubic monomials.
        let exps: [(i32, i32); 10] = [
            (0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3),
        ];
        let field = move |p: [f64; 2]| {
            let mut psi_y = 0.0;
            let mut psi_x = 0.0;
            for (k, &(a, b)) in exps.iter().enumerate() {
                if b > 0 {
                    psi_y += c[k] * b as f64 * p[0].powi(a) * p[1].powi(b - 1);
                }
                if a > 0 {
                    psi_x += c[k] * a as f64 * p[0].powi(a - 1) * p[1].powi(b);
                }
            }
            [psi_y, -psi_x]
        };
        sp.interpolate_velocity(field)
    }

    #[test]
    fn constant_field_kills_all_forms() {
        let u = [1.3, -0.4];
        let g = [[0.0, 0.0], [0.0, 0.0]];
        for kind in FormulationKind::ALL {
            assert_eq!(nl_value(kind, u, g), [0.0, 0.0]);
        }
        let sp = space_n(2);
        let state = sp.interpolate_velocity(|_| [1.3, -0.4]);
        let ctx = QuadContext::triangle(6).unwrap();
        for cell in 0..sp.mesh().cell_count() {
            let cq = ctx.bind(&sp.mesh().cell_geometry(cell));
            let nodal = sp.gather_cell_velocity(&state.coeffs, cell);
            for kind in FormulationKind::ALL {
                let r = element_nl_residual(kind, &ctx, &cq, &nodal);
                assert!(r.iter().all(|v| v.abs() < 1e-15));
            }
        }
    }

    #[test]
    fn rigid_rotation_convective_term() {
        // u = (-5y, 5x): u.grad u = -25 (x, y) pointwise.
        let g = [[0.0, -5.0], [5.0, 0.0]];
        for &(x, y) in &[(0.2, 0.7), (-1.0, 0.3), (0.0, 0.0)] {
            let u = [-5.0 * y, 5.0 * x];
            let nl = nl_value(FormulationKind::Conv, u, g);
            assert_abs_diff_eq!(nl[0], -25.0 * x, epsilon = 1e-14);
            assert_abs_diff_eq!(nl[1], -25.0 * y, epsilon = 1e-14);
        }

        // Against the quadratic test function of the origin vertex on the
        // two-cell unit square, each component integrates to 25/40; the
        // integrals of x and y against that basis function are both -1/40
        // (barycentric monomial integrals, worked by hand).
        let sp = space_n(1);
        let origin = sp
            .mesh()
            .vertices()
            .iter()
            .position(|&v| v == [0.0, 0.0])
            .unwrap();
        let state = sp.interpolate_velocity(|p| [-5.0 * p[1], 5.0 * p[0]]);
        let ctx = QuadContext::triangle(6).unwrap();
        let mut rx = 0.0;
        let mut ry = 0.0;
        for cell in 0..sp.mesh().cell_count() {
            let cq = ctx.bind(&sp.mesh().cell_geometry(cell));
            let nodal = sp.gather_cell_velocity(&state.coeffs, cell);
            let r = element_nl_residual(FormulationKind::Conv, &ctx, &cq, &nodal);
            let nodes = sp.cell_nodes(cell);
            for (i, &n) in nodes.iter().enumerate() {
                if n == origin {
                    rx += r[2 * i];
                    ry += r[2 * i + 1];
                }
            }
        }
        assert_abs_diff_eq!(rx, 0.625, epsilon = 1e-13);
        assert_abs_diff_eq!(ry, 0.625, epsilon = 1e-13);
    }

    #[test]
    fn trilinear_form_basics() {
        let sp = space_n(3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let zero = State::zeros(&sp);
        let v = random_state(&sp, &mut rng);
        let w = random_state(&sp, &mut rng);
        assert_abs_diff_eq!(trilinear_b(&sp, &zero, &v, &w, 6), 0.0, epsilon = 1e-14);

        let c = sp.interpolate_velocity(|_| [0.8, -0.3]);
        let u = random_state(&sp, &mut rng);
        assert_abs_diff_eq!(trilinear_b(&sp, &u, &c, &w, 6), 0.0, epsilon = 1e-13);

        // u = (x, -y), w = (y, x): integrand is x^2 - y^2, zero over the square.
        let u = sp.interpolate_velocity(|p| [p[0], -p[1]]);
        let w = sp.interpolate_velocity(|p| [p[1], p[0]]);
        assert_abs_diff_eq!(trilinear_b(&sp, &u, &w, &w, 6), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn energy_momentum_form_differs_from_convective_by_kinetic_gradient() {
        // u = (y, 0) is pointwise divergence-free; the difference of the two
        // forms must be grad(|u|^2/2) = (0, y), checked against independent
        // quadrature of that analytic field.
        let sp = space_n(3);
        let u = sp.interpolate_velocity(|p| [p[1], 0.0]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let v = random_state(&sp, &mut rng);

        let emac = nl_inner(&sp, FormulationKind::Emac, &u, &v, 6);
        let conv = nl_inner(&sp, FormulationKind::Conv, &u, &v, 6);

        // Independent evaluation of ((0, y), v) by direct quadrature.
        let ctx = QuadContext::<f64>::triangle(6).unwrap();
        let mut expected = 0.0;
        let mut cq = crate::space::CellQuad::empty();
        for cell in 0..sp.mesh().cell_count() {
            let geo = sp.mesh().cell_geometry(cell);
            ctx.bind_into(&geo, &mut cq);
            let nodal = sp.gather_cell_velocity(&v.coeffs, cell);
            for q in 0..ctx.len() {
                let mut vv = [0.0; 2];
                for i in 0..6 {
                    vv[0] += ctx.p2_vals[q][i] * nodal[i][0];
                    vv[1] += ctx.p2_vals[q][i] * nodal[i][1];
                }
                expected += cq.wdet[q] * cq.xq[q][1] * vv[1];
            }
        }
        assert_abs_diff_eq!(emac - conv, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(
            kinetic_gradient_inner(&sp, &u, &v, 6),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn viscous_energy_of_linear_shear() {
        // u = (y, x), nu = 1: |grad u|^2 = 2 everywhere, integral 2.
        let sp = space_n(2);
        let cfg = FormConfig::new(1.0);
        let state = sp.interpolate_velocity(|p| [p[1], p[0]]);
        let ctx = QuadContext::triangle(cfg.quad_degree).unwrap();
        let mut energy = 0.0;
        for cell in 0..sp.mesh().cell_count() {
            let cq = ctx.bind(&sp.mesh().cell_geometry(cell));
            let blocks = element_saddle(&ctx, &cq, &cfg);
            let nodal = sp.gather_cell_velocity(&state.coeffs, cell);
            let mut local = [0.0; 12];
            for (i, n) in nodal.iter().enumerate() {
                local[2 * i] = n[0];
                local[2 * i + 1] = n[1];
            }
            for i in 0..12 {
                for j in 0..12 {
                    energy += local[i] * blocks.vel_vel[i][j] * local[j];
                }
            }
        }
        assert_abs_diff_eq!(energy, 2.0, epsilon = 1e-13);
    }

    #[test]
    fn constant_pressure_exerts_no_force_on_zero_trace_fields() {
        let sp = space_n(3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let v = random_zero_trace(&sp, &mut rng);
        let cfg = FormConfig::new(1.0);
        let ctx = QuadContext::triangle(cfg.quad_degree).unwrap();
        // (p, div v) with p = 1: sum the divergence coupling against the
        // constant pressure over all cells.
        let mut force = 0.0;
        for cell in 0..sp.mesh().cell_count() {
            let cq = ctx.bind(&sp.mesh().cell_geometry(cell));
            let blocks = element_saddle(&ctx, &cq, &cfg);
            let nodal = sp.gather_cell_velocity(&v.coeffs, cell);
            for jp in 0..3 {
                for i in 0..6 {
                    force += blocks.div_vel[jp][2 * i] * nodal[i][0]
                        + blocks.div_vel[jp][2 * i + 1] * nodal[i][1];
                }
            }
        }
        assert_abs_diff_eq!(force, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn grad_div_vanishes_on_pointwise_solenoidal_fields() {
        let sp = space_n(3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let u = random_solenoidal(&sp, &mut rng);
        let cfg = FormConfig::new(1.0).with_gamma(0.1);
        let cfg0 = FormConfig::new(1.0);
        let ctx = QuadContext::triangle(cfg.quad_degree).unwrap();
        let mut graddiv = 0.0;
        for cell in 0..sp.mesh().cell_count() {
            let cq = ctx.bind(&sp.mesh().cell_geometry(cell));
            let with = element_saddle(&ctx, &cq, &cfg);
            let without = element_saddle(&ctx, &cq, &cfg0);
            let nodal = sp.gather_cell_velocity(&u.coeffs, cell);
            let mut local = [0.0; 12];
            for (i, n) in nodal.iter().enumerate() {
                local[2 * i] = n[0];
                local[2 * i + 1] = n[1];
            }
            for i in 0..12 {
                for j in 0..12 {
                    graddiv += local[i] * (with.vel_vel[i][j] - without.vel_vel[i][j]) * local[j];
                }
            }
        }
        assert_abs_diff_eq!(graddiv, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn jacobians_vanish_at_zero_state() {
        let sp = space_n(1);
        let ctx = QuadContext::triangle(6).unwrap();
        let cq = ctx.bind(&sp.mesh().cell_geometry(0));
        let nodal = [[0.0; 2]; 6];
        for kind in FormulationKind::ALL {
            let jac = element_nl_jacobian(kind, &ctx, &cq, &nodal);
            assert!(jac.iter().flatten().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn element_jacobian_matches_finite_differences() {
        let sp = space_n(1);
        let ctx = QuadContext::triangle(6).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let eps = 1e-6;
        for cell in 0..sp.mesh().cell_count() {
            let cq = ctx.bind(&sp.mesh().cell_geometry(cell));
            let mut nodal = [[0.0; 2]; 6];
            let mut delta = [[0.0; 2]; 6];
            for i in 0..6 {
                for c in 0..2 {
                    nodal[i][c] = rng.random_range(-1.0..1.0);
                    delta[i][c] = rng.random_range(-1.0..1.0);
                }
            }
            for kind in FormulationKind::ALL {
                let jac = element_nl_jacobian(kind, &ctx, &cq, &nodal);
                let r0 = element_nl_residual(kind, &ctx, &cq, &nodal);
                let mut bumped = nodal;
                for i in 0..6 {
                    for c in 0..2 {
                        bumped[i][c] += eps * delta[i][c];
                    }
                }
                let r1 = element_nl_residual(kind, &ctx, &cq, &bumped);
                let mut jnorm = 0.0f64;
                for row in &jac {
                    for v in row {
                        jnorm += v * v;
                    }
                }
                let jnorm = jnorm.sqrt();
                let mut err = 0.0f64;
                for i in 0..12 {
                    let mut jd = 0.0;
                    for j in 0..6 {
                        for d in 0..2 {
                            jd += jac[i][2 * j + d] * delta[j][d];
                        }
                    }
                    let fd = (r1[i] - r0[i]) / eps;
                    err += (fd - jd) * (fd - jd);
                }
                assert!(
                    err.sqrt() <= 1e-6 * jnorm,
                    "{kind}: fd error {} vs jacobian norm {}",
                    err.sqrt(),
                    jnorm
                );
            }
        }
    }

    #[test]
    fn outflow_correction_signs_and_values() {
        // Channel with the right edge tagged as outflow; u = (1, 0).
        let mesh = Mesh::<f64>::rectangle(0.0, 0.0, 2.2, 0.41, 4, 2)
            .unwrap()
            .retag_boundary(|mid, _| {
                if (mid[0] - 2.2).abs() < 1e-12 {
                    Some(BoundaryTag::Outflow)
                } else {
                    None
                }
            });
        let sp = MixedSpace::new(mesh);
        let state = sp.interpolate_velocity(|_| [1.0, 0.0]);
        let ectx = EdgeQuadContext::<f64>::new(7).unwrap();

        let mut visited = 0;
        for seg in sp.mesh().boundary_segments() {
            if seg.tag != BoundaryTag::Outflow {
                continue;
            }
            assert_abs_diff_eq!(seg.normal[0], 1.0, epsilon = 1e-14);
            let eq = ectx.bind(sp.mesh(), &seg);
            let nodal = sp.gather_cell_velocity(&state.coeffs, seg.cell);

            // Independent oracle: integral of each trace basis function
            // against the 1D rule directly.
            let rule = edge_rule::<f64>(7).unwrap();
            let mut basis_integral = [0.0f64; 6];
            for q in 0..rule.len() {
                let s = rule.points[q][0];
                let k = seg.local_edge;
                let ref_verts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
                let ra = ref_verts[(k + 1) % 3];
                let rb = ref_verts[(k + 2) % 3];
                let xi = [
                    ra[0] * (1.0 - s) + rb[0] * s,
                    ra[1] * (1.0 - s) + rb[1] * s,
                ];
                let (vals, _) = p2_eval(xi);
                for i in 0..6 {
                    basis_integral[i] += rule.weights[q] * seg.length * vals[i];
                }
            }

            let emac = outflow_residual(FormulationKind::Emac, &eq, seg.normal, &nodal);
            let rot = outflow_residual(FormulationKind::Rot, &eq, seg.normal, &nodal);
            for i in 0..6 {
                // |u|^2/2 = 1/2 and n = (1,0): x rows carry -(1/2) int phi.
                assert_abs_diff_eq!(emac[2 * i], -0.5 * basis_integral[i], epsilon = 1e-13);
                assert_abs_diff_eq!(emac[2 * i + 1], 0.0, epsilon = 1e-15);
                assert_abs_diff_eq!(rot[2 * i], 0.5 * basis_integral[i], epsilon = 1e-13);
            }
            for kind in [
                FormulationKind::Conv,
                FormulationKind::Skew,
                FormulationKind::Cons,
            ] {
                assert!(outflow_sign::<f64>(kind).is_none());
                let r = outflow_residual(kind, &eq, seg.normal, &nodal);
                assert!(r.iter().all(|v| *v == 0.0));
            }

            // Zero velocity: correction vanishes.
            let zero = [[0.0; 2]; 6];
            let r = outflow_residual(FormulationKind::Emac, &eq, seg.normal, &zero);
            assert!(r.iter().all(|v| *v == 0.0));
            visited += 1;
        }
        assert_eq!(visited, 2, "retag must produce the outflow segments");
    }

    #[test]
    fn outflow_jacobian_matches_finite_differences() {
        let mesh = Mesh::<f64>::rectangle(0.0, 0.0, 1.0, 1.0, 2, 2)
            .unwrap()
            .retag_boundary(|mid, _| {
                if (mid[0] - 1.0).abs() < 1e-12 {
                    Some(BoundaryTag::Outflow)
                } else {
                    None
                }
            });
        let sp = MixedSpace::new(mesh);
        let ectx = EdgeQuadContext::<f64>::new(7).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let eps = 1e-6;
        let mut visited = 0;
        for seg in sp.mesh().boundary_segments() {
            if seg.tag != BoundaryTag::Outflow {
                continue;
            }
            let eq = ectx.bind(sp.mesh(), &seg);
            let mut nodal = [[0.0; 2]; 6];
            let mut delta = [[0.0; 2]; 6];
            for i in 0..6 {
                for c in 0..2 {
                    nodal[i][c] = rng.random_range(-1.0..1.0);
                    delta[i][c] = rng.random_range(-1.0..1.0);
                }
            }
            for kind in [FormulationKind::Emac, FormulationKind::Rot] {
                let jac = outflow_jacobian(kind, &eq, seg.normal, &nodal);
                let r0 = outflow_residual(kind, &eq, seg.normal, &nodal);
                let mut bumped = nodal;
                for i in 0..6 {
                    for c in 0..2 {
                        bumped[i][c] += eps * delta[i][c];
                    }
                }
                let r1 = outflow_residual(kind, &eq, seg.normal, &bumped);
                for i in 0..12 {
                    let mut jd = 0.0;
                    for j in 0..6 {
                        for d in 0..2 {
                            jd += jac[i][2 * j + d] * delta[j][d];
                        }
                    }
                    let fd = (r1[i] - r0[i]) / eps;
                    assert!((fd - jd).abs() < 1e-6, "{kind} row {i}: {fd} vs {jd}");
                }
            }
            visited += 1;
        }
        assert_eq!(visited, 2, "retag must produce the outflow segments");
    }

    #[test]
    fn all_identities_hold_on_random_fields() {
        let sp = space_n(4);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..3 {
            let u0 = random_zero_trace(&sp, &mut rng);
            let u_any = random_state(&sp, &mut rng);
            let v = random_state(&sp, &mut rng);
            let w = random_state(&sp, &mut rng);
            for id in VectorIdentity::ALL {
                let u = if id.needs_zero_trace() { &u0 } else { &u_any };
                let r = verify_identity(id, &sp, u, &v, &w, 8);
                assert!(r <= 1e-12, "{id}: residual {r}");
            }
        }
    }

    #[test]
    fn energy_annihilation_per_formulation() {
        let sp = space_n(4);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..3 {
            let u = random_zero_trace(&sp, &mut rng);
            for kind in [
                FormulationKind::Skew,
                FormulationKind::Rot,
                FormulationKind::Emac,
            ] {
                let r = nl_inner(&sp, kind, &u, &u, 8);
                assert!(r.abs() <= 1e-12, "{kind}: (NL(u),u) = {r}");
            }
            let dd = weighted_div_inner(&sp, &u, &u, &u, 8);
            let conv = nl_inner(&sp, FormulationKind::Conv, &u, &u, 8);
            let cons = nl_inner(&sp, FormulationKind::Cons, &u, &u, 8);
            assert_abs_diff_eq!(conv, -0.5 * dd, epsilon = 1e-12);
            assert_abs_diff_eq!(cons, 0.5 * dd, epsilon = 1e-12);
        }
    }

    #[test]
    fn momentum_and_angular_momentum_annihilation() {
        let sp = space_n(6);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(123);
        let ex = sp.interpolate_velocity(|_| [1.0, 0.0]);
        let ey = sp.interpolate_velocity(|_| [0.0, 1.0]);
        let phi = sp.interpolate_velocity(|p| [-p[1], p[0]]);
        for _ in 0..3 {
            let u = random_interior_supported(&sp, &mut rng);
            for kind in [FormulationKind::Emac, FormulationKind::Cons] {
                for (name, test_fn) in [("e_x", &ex), ("e_y", &ey), ("angular", &phi)] {
                    let r = nl_inner(&sp, kind, &u, test_fn, 8);
                    assert!(r.abs() <= 1e-12, "{kind} against {name}: {r}");
                }
            }
            // Convective form leaks momentum through the divergence defect.
            for test_fn in [&ex, &ey] {
                let conv = nl_inner(&sp, FormulationKind::Conv, &u, test_fn, 8);
                let leak = weighted_div_inner(&sp, &u, &u, test_fn, 8);
                assert_abs_diff_eq!(conv, -leak, epsilon = 1e-12);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn formulations_agree_on_pointwise_solenoidal_fields(seed in 0u64..500) {
            let sp = space_n(3);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let u = random_solenoidal(&sp, &mut rng);
            let v = random_state(&sp, &mut rng);
            let conv = nl_inner(&sp, FormulationKind::Conv, &u, &v, 8);
            let skew = nl_inner(&sp, FormulationKind::Skew, &u, &v, 8);
            let cons = nl_inner(&sp, FormulationKind::Cons, &u, &v, 8);
            let rot = nl_inner(&sp, FormulationKind::Rot, &u, &v, 8);
            let emac = nl_inner(&sp, FormulationKind::Emac, &u, &v, 8);
            let gq = kinetic_gradient_inner(&sp, &u, &v, 8);
            prop_assert!((skew - conv).abs() <= 1e-12);
            prop_assert!((cons - conv).abs() <= 1e-12);
            prop_assert!((emac - conv - gq).abs() <= 1e-12);
            prop_assert!((rot - conv + gq).abs() <= 1e-12);
        }
    }

    #[test]
    fn parse_round_trips() {
        for kind in FormulationKind::ALL {
            assert_eq!(FormulationKind::parse(kind.as_str()), Some(kind));
            assert_eq!(
                FormulationKind::parse(&kind.as_str().to_uppercase()),
                Some(kind)
            );
        }
        assert_eq!(FormulationKind::parse("upwind"), None);
    }

    #[test]
    #[should_panic(expected = "viscosity")]
    fn negative_viscosity_rejected() {
        let _ = FormConfig::new(-1.0);
    }
}
