//! Functionals monitored along a run: kinetic energy, linear and angular
//! momentum, the divergence norm, obstacle drag/lift coefficients, and
//! pressure drop between two probe points.
//!
//! Angular momentum in 2D is the single scalar int(x u_y - y u_x). Drag and
//! lift use the obstacle-outward normal (pointing into the fluid), so a
//! pressure field increasing downstream produces negative drag.

use thiserror::Error;

use crate::mesh::BoundaryTag;
use crate::scalar::Real;
use crate::space::{CellQuad, EdgeQuadContext, MixedSpace, QuadContext, State};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("no boundary edges tagged {0:?}")]
    MissingTag(BoundaryTag),
    #[error("probe point ({0}, {1}) lies outside the mesh")]
    PointOutsideMesh(f64, f64),
}

/// One row of the time series. Optional fields are populated by the hooks
/// that compute them (obstacle loads, vorticity integrals, solver effort).
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord<T> {
    pub t: T,
    pub energy: T,
    pub momentum: [T; 2],
    pub angular: T,
    pub div_norm: T,
    pub cd: Option<T>,
    pub cl: Option<T>,
    pub dp: Option<T>,
    pub enstrophy: Option<T>,
    pub total_vorticity: Option<T>,
    pub newton_iters: Option<usize>,
}

impl<T: Real> DiagnosticsRecord<T> {
    /// The always-present quantities of a state.
    pub fn basic(space: &MixedSpace<T>, state: &State<T>) -> Self {
        DiagnosticsRecord {
            t: state.t,
            energy: kinetic_energy(space, state),
            momentum: linear_momentum(space, state),
            angular: angular_momentum(space, state),
            div_norm: divergence_norm(space, state),
            cd: None,
            cl: None,
            dp: None,
            enstrophy: None,
            total_vorticity: None,
            newton_iters: None,
        }
    }

    pub fn all_finite(&self) -> bool {
        let opt = |v: &Option<T>| v.map_or(true, |x| x.is_finite());
        self.t.is_finite()
            && self.energy.is_finite()
            && self.momentum[0].is_finite()
            && self.momentum[1].is_finite()
            && self.angular.is_finite()
            && self.div_norm.is_finite()
            && opt(&self.cd)
            && opt(&self.cl)
            && opt(&self.dp)
            && opt(&self.enstrophy)
            && opt(&self.total_vorticity)
    }
}

/// Time series of records, one per accepted step plus the initial state.
#[derive(Debug, Clone, Default)]
pub struct DiagnosticsSeries<T> {
    pub records: Vec<DiagnosticsRecord<T>>,
}

impl<T: Real> DiagnosticsSeries<T> {
    pub fn push(&mut self, r: DiagnosticsRecord<T>) {
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first(&self) -> Option<&DiagnosticsRecord<T>> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&DiagnosticsRecord<T>> {
        self.records.last()
    }
}

fn integrate_velocity<T: Real>(
    space: &MixedSpace<T>,
    state: &State<T>,
    mut f: impl FnMut([T; 2], [T; 2], &[[T; 2]; 2]) -> T,
) -> T {
    let ctx = QuadContext::triangle(5).expect("degree 5 rule available");
    let mut cq = CellQuad::empty();
    let mut acc = T::zero();
    for cell in 0..space.mesh().cell_count() {
        let geo = space.mesh().cell_geometry(cell);
        ctx.bind_into(&geo, &mut cq);
        let nodal = space.gather_cell_velocity(&state.coeffs, cell);
        for q in 0..ctx.len() {
            let (u, g) =
                crate::forms::eval_velocity_gradient(&ctx.p2_vals[q], &cq.p2_grads[q], &nodal);
            acc += cq.wdet[q] * f(cq.xq[q], u, &g);
        }
    }
    acc
}

/// Kinetic energy (1/2) int |u|^2.
pub fn kinetic_energy<T: Real>(space: &MixedSpace<T>, state: &State<T>) -> T {
    T::half() * integrate_velocity(space, state, |_, u, _| u[0] * u[0] + u[1] * u[1])
}

/// Linear momentum int u.
pub fn linear_momentum<T: Real>(space: &MixedSpace<T>, state: &State<T>) -> [T; 2] {
    [
        integrate_velocity(space, state, |_, u, _| u[0]),
        integrate_velocity(space, state, |_, u, _| u[1]),
    ]
}

/// Angular momentum int (x u_y - y u_x).
pub fn angular_momentum<T: Real>(space: &MixedSpace<T>, state: &State<T>) -> T {
    integrate_velocity(space, state, |x, u, _| x[0] * u[1] - x[1] * u[0])
}

/// L2 norm of the pointwise divergence.
pub fn divergence_norm<T: Real>(space: &MixedSpace<T>, state: &State<T>) -> T {
    integrate_velocity(space, state, |_, _, g| {
        let d = g[0][0] + g[1][1];
        d * d
    })
    .sqrt()
}

/// Squared H1 seminorm |grad u|^2 integrated, for discrete energy balances.
pub fn grad_seminorm_sq<T: Real>(space: &MixedSpace<T>, state: &State<T>) -> T {
    integrate_velocity(space, state, |_, _, g| {
        g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]
    })
}

/// Reference quantities for aerodynamic coefficients: c = 2 F / (rho U^2 L).
#[derive(Debug, Clone)]
pub struct DragScaling<T> {
    pub rho: T,
    pub u_ref: T,
    pub l_ref: T,
}

impl<T: Real> Default for DragScaling<T> {
    fn default() -> Self {
        // Benchmark convention: unit density, unit peak mean inflow,
        // obstacle diameter 0.1.
        DragScaling {
            rho: T::one(),
            u_ref: T::one(),
            l_ref: T::of(0.1),
        }
    }
}

/// Drag and lift coefficients from the traction integral over the obstacle:
/// F_D = int (rho nu du_t/dn n_y - p n_x) ds,
/// F_L = -int (rho nu du_t/dn n_x + p n_y) ds,
/// with n the obstacle-outward unit normal and t = (n_y, -n_x).
pub fn drag_lift<T: Real>(
    space: &MixedSpace<T>,
    state: &State<T>,
    nu: T,
    tag: BoundaryTag,
    scaling: &DragScaling<T>,
) -> Result<(T, T), DiagnosticsError> {
    if !space.mesh().has_tag(tag) {
        return Err(DiagnosticsError::MissingTag(tag));
    }
    let ectx = EdgeQuadContext::new(5).expect("degree 5 edge rule available");
    let mut fd = T::zero();
    let mut fl = T::zero();
    for seg in space.mesh().boundary_segments() {
        if seg.tag != tag {
            continue;
        }
        let eq = ectx.bind(space.mesh(), &seg);
        let nodal = space.gather_cell_velocity(&state.coeffs, seg.cell);
        let pres = space.gather_cell_pressure(&state.coeffs, seg.cell);
        // Domain-outward flips to obstacle-outward on an interior hole.
        let n = [-seg.normal[0], -seg.normal[1]];
        let t_vec = [n[1], -n[0]];
        for q in 0..eq.xq.len() {
            let mut p = T::zero();
            for j in 0..3 {
                p += eq.p1_vals[q][j] * pres[j];
            }
            let mut g = [[T::zero(); 2]; 2];
            for i in 0..6 {
                for c in 0..2 {
                    g[c][0] += eq.p2_grads[q][i][0] * nodal[i][c];
                    g[c][1] += eq.p2_grads[q][i][1] * nodal[i][c];
                }
            }
            // Normal derivative of the tangential velocity component.
            let mut dut_dn = T::zero();
            for c in 0..2 {
                dut_dn += t_vec[c] * (g[c][0] * n[0] + g[c][1] * n[1]);
            }
            let visc = scaling.rho * nu * dut_dn;
            fd += eq.wds[q] * (visc * n[1] - p * n[0]);
            fl -= eq.wds[q] * (visc * n[0] + p * n[1]);
        }
    }
    let denom = scaling.rho * scaling.u_ref * scaling.u_ref * scaling.l_ref;
    let two = T::of(2.0);
    Ok((two * fd / denom, two * fl / denom))
}

/// Pressure probe with cached point location, for repeated evaluation along
/// a run.
#[derive(Debug, Clone)]
pub struct PressureProbe<T> {
    front: (usize, [T; 2]),
    back: (usize, [T; 2]),
}

impl<T: Real> PressureProbe<T> {
    pub fn new(
        space: &MixedSpace<T>,
        front: [T; 2],
        back: [T; 2],
    ) -> Result<Self, DiagnosticsError> {
        let locate = |x: [T; 2]| {
            space.locate(x).ok_or_else(|| {
                DiagnosticsError::PointOutsideMesh(x[0].to_f64_lossy(), x[1].to_f64_lossy())
            })
        };
        Ok(PressureProbe {
            front: locate(front)?,
            back: locate(back)?,
        })
    }

    /// p(front) - p(back).
    pub fn pressure_drop(&self, space: &MixedSpace<T>, state: &State<T>) -> T {
        let pf = space.eval_pressure(state, self.front.0, self.front.1);
        let pb = space.eval_pressure(state, self.back.0, self.back.1);
        pf - pb
    }
}

/// One-shot pressure drop between two points.
pub fn pressure_drop<T: Real>(
    space: &MixedSpace<T>,
    state: &State<T>,
    front: [T; 2],
    back: [T; 2],
) -> Result<T, DiagnosticsError> {
    Ok(PressureProbe::new(space, front, back)?.pressure_drop(space, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn unit_square(n: usize) -> MixedSpace<f64> {
        MixedSpace::new(Mesh::rectangle(0.0, 0.0, 1.0, 1.0, n, n).unwrap())
    }

    #[test]
    fn constant_field_values() {
        let sp = unit_square(2);
        let s = sp.interpolate_velocity(|_| [1.0, 0.0]);
        assert_abs_diff_eq!(kinetic_energy(&sp, &s), 0.5, epsilon = 1e-14);
        let m = linear_momentum(&sp, &s);
        assert_abs_diff_eq!(m[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m[1], 0.0, epsilon = 1e-14);
        // int(x*0 - y*1) = -1/2 on the unit square.
        assert_abs_diff_eq!(angular_momentum(&sp, &s), -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(divergence_norm(&sp, &s), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_field_is_all_zero() {
        let sp = unit_square(2);
        let s = State::zeros(&sp);
        let rec = DiagnosticsRecord::basic(&sp, &s);
        assert_eq!(rec.energy, 0.0);
        assert_eq!(rec.momentum, [0.0, 0.0]);
        assert_eq!(rec.angular, 0.0);
        assert_eq!(rec.div_norm, 0.0);
        assert!(rec.all_finite());
    }

    #[test]
    fn divergence_norm_of_linear_expansion() {
        // u = (x, y): div = 2 everywhere, norm = 2 on the unit square.
        let sp = unit_square(3);
        let s = sp.interpolate_velocity(|x| [x[0], x[1]]);
        assert_abs_diff_eq!(divergence_norm(&sp, &s), 2.0, epsilon = 1e-13);
        // |grad u|^2 = 2.
        assert_abs_diff_eq!(grad_seminorm_sq(&sp, &s), 2.0, epsilon = 1e-13);
    }

    #[test]
    fn drag_oracle_rigid_pressure_field() {
        // p = x, u = 0 around the unit-square hole: the traction integral
        // reduces to -int x n_x over the obstacle surface, which is minus
        // the hole area by the divergence theorem.
        let mesh = crate::mesh::square_annulus();
        let sp = MixedSpace::new(mesh);
        let s = sp.interpolate_fields(|_| [0.0, 0.0], |x| x[0]);
        let scaling = DragScaling {
            rho: 1.0,
            u_ref: 1.0,
            l_ref: 1.0,
        };
        let (cd, cl) = drag_lift(&sp, &s, 1.0, BoundaryTag::Obstacle, &scaling).unwrap();
        assert_abs_diff_eq!(cd, -2.0, epsilon = 1e-12);
        // p = x is symmetric in y about the hole: no lift.
        assert_abs_diff_eq!(cl, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn quiescent_constant_pressure_exerts_nothing() {
        let mesh = crate::mesh::square_annulus();
        let sp = MixedSpace::new(mesh);
        let s = sp.interpolate_fields(|_| [0.0, 0.0], |_| 1.0);
        let (cd, cl) = drag_lift(
            &sp,
            &s,
            1.0,
            BoundaryTag::Obstacle,
            &DragScaling::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(cd, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cl, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn drag_missing_tag_is_an_error() {
        let sp = unit_square(2);
        let s = State::zeros(&sp);
        let r = drag_lift(
            &sp,
            &s,
            1.0,
            BoundaryTag::Obstacle,
            &DragScaling::default(),
        );
        assert!(matches!(r, Err(DiagnosticsError::MissingTag(_))));
    }

    #[test]
    fn pressure_drop_of_linear_field() {
        let sp = MixedSpace::new(Mesh::rectangle(0.0, 0.0, 1.0, 0.41, 10, 5).unwrap());
        let s = sp.interpolate_fields(|_| [0.0, 0.0], |x| x[0]);
        let dp = pressure_drop(&sp, &s, [0.15, 0.2], [0.25, 0.2]).unwrap();
        assert_abs_diff_eq!(dp, -0.1, epsilon = 1e-13);

        let s = sp.interpolate_fields(|_| [0.0, 0.0], |_| 3.0);
        let dp = pressure_drop(&sp, &s, [0.15, 0.2], [0.25, 0.2]).unwrap();
        assert_abs_diff_eq!(dp, 0.0, epsilon = 1e-14);

        assert!(pressure_drop(&sp, &s, [-1.0, 0.0], [0.25, 0.2]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn scaling_and_translation_laws(seed in 0u64..500) {
            let sp = unit_square(3);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut s = State::zeros(&sp);
            for d in 0..sp.n_u() {
                s.coeffs[d] = rng.random_range(-1.0..1.0);
            }
            let alpha = rng.random_range(0.5..2.0);
            let mut scaled = s.clone();
            for d in 0..sp.n_u() {
                scaled.coeffs[d] *= alpha;
            }
            let e = kinetic_energy(&sp, &s);
            let es = kinetic_energy(&sp, &scaled);
            prop_assert!((es - alpha * alpha * e).abs() <= 1e-13 * (1.0 + es.abs()));
            let m = linear_momentum(&sp, &s);
            let ms = linear_momentum(&sp, &scaled);
            prop_assert!((ms[0] - alpha * m[0]).abs() <= 1e-13);
            prop_assert!((ms[1] - alpha * m[1]).abs() <= 1e-13);

            // Adding a constant c shifts momentum by c * |domain| exactly.
            let c = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let mut shifted = s.clone();
            for node in 0..sp.n_nodes() {
                shifted.coeffs[2 * node] += c[0];
                shifted.coeffs[2 * node + 1] += c[1];
            }
            let mt = linear_momentum(&sp, &shifted);
            prop_assert!((mt[0] - m[0] - c[0]).abs() <= 1e-13);
            prop_assert!((mt[1] - m[1] - c[1]).abs() <= 1e-13);
        }
    }
}
