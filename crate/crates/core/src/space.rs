//! Taylor-Hood mixed space: continuous piecewise-quadratic vector velocity
//! paired with continuous piecewise-linear pressure on the same triangles.
//!
//! DOF layout is fixed and documented because states are flat vectors that
//! outlive the space object (files, tests): velocity nodes are the mesh
//! vertices followed by edge midpoints (midpoint of edge `e` is node
//! `vertex_count + e`), node `k` component `c` maps to DOF `2k + c`, and
//! pressure DOFs follow the velocity block (vertex `v` maps to `N_u + v`).

use crate::elements::{edge_rule, p1_eval, p2_eval, triangle_rule, ElementError, QuadRule};
use crate::mesh::{BoundarySegment, BoundaryTag, CellGeometry, Mesh};
use crate::scalar::Real;
use crate::system::linear::{LinearError, SparseMatrix};

/// Reference coordinates of the three triangle vertices.
const REF_VERTS: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

fn tag_ix(tag: BoundaryTag) -> usize {
    BoundaryTag::ALL
        .iter()
        .position(|&t| t == tag)
        .expect("tag listed in ALL")
}

/// Mixed velocity/pressure space over an owned mesh.
#[derive(Debug, Clone)]
pub struct MixedSpace<T> {
    mesh: Mesh<T>,
    n_u: usize,
    n_p: usize,
    /// Velocity DOFs on the boundary, grouped by tag then component; sorted.
    boundary_vel: [[Vec<usize>; 2]; 5],
    /// Velocity nodes on the boundary, grouped by tag; sorted.
    boundary_nodes: [Vec<usize>; 5],
}

/// Flat coefficient vector over a [`MixedSpace`], velocity block first.
#[derive(Debug, Clone, PartialEq)]
pub struct State<T> {
    pub coeffs: Vec<T>,
    pub t: T,
}

impl<T: Real> State<T> {
    pub fn zeros(space: &MixedSpace<T>) -> Self {
        State {
            coeffs: vec![T::zero(); space.n_total()],
            t: T::zero(),
        }
    }
}

/// Options for the constrained L2 projection.
#[derive(Debug, Clone, Default)]
pub struct ProjectionOptions<T> {
    /// Velocity DOFs pinned to given values during the projection.
    pub constraints: Vec<(usize, T)>,
    /// Pin the first multiplier DOF. Required when `constraints` fix the
    /// normal trace on the whole boundary, which makes the multiplier
    /// determined only up to a constant.
    pub pin_pressure: bool,
}

impl<T: Real> MixedSpace<T> {
    pub fn new(mesh: Mesh<T>) -> Self {
        let n_nodes = mesh.vertex_count() + mesh.edge_count();
        let n_u = 2 * n_nodes;
        let n_p = mesh.vertex_count();

        let mut vel_sets: [[std::collections::BTreeSet<usize>; 2]; 5] = Default::default();
        let mut node_sets: [std::collections::BTreeSet<usize>; 5] = Default::default();
        for seg in mesh.boundary_segments() {
            let ti = tag_ix(seg.tag);
            for node in [seg.a, seg.b, mesh.vertex_count() + seg.edge] {
                node_sets[ti].insert(node);
                for comp in 0..2 {
                    vel_sets[ti][comp].insert(2 * node + comp);
                }
            }
        }
        let boundary_vel =
            vel_sets.map(|per_comp| per_comp.map(|s| s.into_iter().collect::<Vec<_>>()));
        let boundary_nodes = node_sets.map(|s| s.into_iter().collect::<Vec<_>>());

        MixedSpace {
            mesh,
            n_u,
            n_p,
            boundary_vel,
            boundary_nodes,
        }
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn n_total(&self) -> usize {
        self.n_u + self.n_p
    }

    pub fn n_nodes(&self) -> usize {
        self.n_u / 2
    }

    /// Physical coordinates of a velocity node (vertex or edge midpoint).
    pub fn node_coord(&self, node: usize) -> [T; 2] {
        let nv = self.mesh.vertex_count();
        if node < nv {
            self.mesh.vertices()[node]
        } else {
            let [a, b] = self.mesh.edges()[node - nv];
            let va = self.mesh.vertices()[a];
            let vb = self.mesh.vertices()[b];
            [(va[0] + vb[0]) * T::half(), (va[1] + vb[1]) * T::half()]
        }
    }

    #[inline]
    pub fn vel_dof(&self, node: usize, comp: usize) -> usize {
        2 * node + comp
    }

    #[inline]
    pub fn pressure_dof(&self, vertex: usize) -> usize {
        self.n_u + vertex
    }

    /// Global velocity nodes of a cell in local basis order: three vertices,
    /// then the midpoint opposite each vertex.
    pub fn cell_nodes(&self, cell: usize) -> [usize; 6] {
        let [v0, v1, v2] = self.mesh.cells()[cell];
        let nv = self.mesh.vertex_count();
        let e = self.mesh.cell_edge_ids(cell);
        [v0, v1, v2, nv + e[0], nv + e[1], nv + e[2]]
    }

    /// The 12 velocity DOFs of a cell, interleaved per node (x then y).
    pub fn cell_vel_dofs(&self, cell: usize) -> [usize; 12] {
        let nodes = self.cell_nodes(cell);
        let mut out = [0usize; 12];
        for (i, &n) in nodes.iter().enumerate() {
            out[2 * i] = 2 * n;
            out[2 * i + 1] = 2 * n + 1;
        }
        out
    }

    pub fn cell_pressure_dofs(&self, cell: usize) -> [usize; 3] {
        let [v0, v1, v2] = self.mesh.cells()[cell];
        [self.n_u + v0, self.n_u + v1, self.n_u + v2]
    }

    /// Sorted velocity DOFs on boundary edges carrying `tag`, one component.
    pub fn boundary_vel_dofs(&self, tag: BoundaryTag, comp: usize) -> &[usize] {
        &self.boundary_vel[tag_ix(tag)][comp]
    }

    /// Sorted velocity nodes on boundary edges carrying `tag`.
    pub fn boundary_nodes(&self, tag: BoundaryTag) -> &[usize] {
        &self.boundary_nodes[tag_ix(tag)]
    }

    pub fn velocity<'a>(&self, state: &'a State<T>) -> &'a [T] {
        &state.coeffs[..self.n_u]
    }

    pub fn pressure<'a>(&self, state: &'a State<T>) -> &'a [T] {
        &state.coeffs[self.n_u..]
    }

    /// Nodal velocity values of one cell, `[u, v]` per local node.
    pub fn gather_cell_velocity(&self, coeffs: &[T], cell: usize) -> [[T; 2]; 6] {
        let nodes = self.cell_nodes(cell);
        let mut out = [[T::zero(); 2]; 6];
        for (i, &n) in nodes.iter().enumerate() {
            out[i] = [coeffs[2 * n], coeffs[2 * n + 1]];
        }
        out
    }

    pub fn gather_cell_pressure(&self, coeffs: &[T], cell: usize) -> [T; 3] {
        let [v0, v1, v2] = self.mesh.cells()[cell];
        [
            coeffs[self.n_u + v0],
            coeffs[self.n_u + v1],
            coeffs[self.n_u + v2],
        ]
    }

    /// Evaluate the discrete velocity at a reference point of a cell.
    pub fn eval_velocity(&self, state: &State<T>, cell: usize, xi: [T; 2]) -> [T; 2] {
        let (vals, _) = p2_eval(xi);
        let nodal = self.gather_cell_velocity(&state.coeffs, cell);
        let mut u = [T::zero(); 2];
        for i in 0..6 {
            u[0] += vals[i] * nodal[i][0];
            u[1] += vals[i] * nodal[i][1];
        }
        u
    }

    /// Evaluate the discrete pressure at a reference point of a cell.
    pub fn eval_pressure(&self, state: &State<T>, cell: usize, xi: [T; 2]) -> T {
        let (vals, _) = p1_eval(xi);
        let nodal = self.gather_cell_pressure(&state.coeffs, cell);
        vals[0] * nodal[0] + vals[1] * nodal[1] + vals[2] * nodal[2]
    }

    /// Find the cell containing a physical point, with its reference
    /// coordinates. Linear scan; callers that probe repeatedly should cache
    /// the result.
    pub fn locate(&self, x: [T; 2]) -> Option<(usize, [T; 2])> {
        let tol = T::of(1e-10);
        for cell in 0..self.mesh.cell_count() {
            let geo = self.mesh.cell_geometry(cell);
            let a = geo.coords[0];
            let d = [x[0] - a[0], x[1] - a[1]];
            // Reference coords solve J xi = x - a; inv_jac_t is J^{-T}.
            let xi = [
                geo.inv_jac_t[0][0] * d[0] + geo.inv_jac_t[1][0] * d[1],
                geo.inv_jac_t[0][1] * d[0] + geo.inv_jac_t[1][1] * d[1],
            ];
            if xi[0] >= -tol && xi[1] >= -tol && xi[0] + xi[1] <= T::one() + tol {
                return Some((cell, xi));
            }
        }
        None
    }

    /// Nodal interpolation of an analytic velocity field; pressure part zero.
    pub fn interpolate_velocity(&self, f: impl Fn([T; 2]) -> [T; 2]) -> State<T> {
        let mut s = State::zeros(self);
        for node in 0..self.n_nodes() {
            let v = f(self.node_coord(node));
            s.coeffs[2 * node] = v[0];
            s.coeffs[2 * node + 1] = v[1];
        }
        s
    }

    /// Nodal interpolation of velocity and pressure fields together.
    pub fn interpolate_fields(
        &self,
        vel: impl Fn([T; 2]) -> [T; 2],
        pres: impl Fn([T; 2]) -> T,
    ) -> State<T> {
        let mut s = self.interpolate_velocity(vel);
        for v in 0..self.mesh.vertex_count() {
            s.coeffs[self.n_u + v] = pres(self.mesh.vertices()[v]);
        }
        s
    }

    /// L2 projection onto the discretely divergence-free subspace: the
    /// closest discrete velocity to `f` among those with (div u_h, q) = 0
    /// for every pressure basis function q.
    pub fn divfree_project(
        &self,
        f: impl Fn([T; 2]) -> [T; 2],
        opts: &ProjectionOptions<T>,
    ) -> Result<State<T>, LinearError> {
        self.divfree_project_cellwise(|_, x| f(x), opts)
    }

    /// Same projection with a cell-aware source, for fields defined piecewise
    /// against the mesh (e.g. gradients of finite-element functions).
    pub fn divfree_project_cellwise(
        &self,
        f: impl Fn(usize, [T; 2]) -> [T; 2],
        opts: &ProjectionOptions<T>,
    ) -> Result<State<T>, LinearError> {
        let n = self.n_total();
        let mut pairs: Vec<(usize, usize)> =
            Vec::with_capacity(self.mesh.cell_count() * 219 + self.n_p);
        for cell in 0..self.mesh.cell_count() {
            let vd = self.cell_vel_dofs(cell);
            let pd = self.cell_pressure_dofs(cell);
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
        let mut mat = SparseMatrix::from_pairs(n, pairs);
        let mut rhs = vec![T::zero(); n];

        // Degree 8 keeps the source term accurate for non-polynomial fields;
        // the mass and divergence blocks are exact from degree 4 up.
        let ctx = QuadContext::triangle(8).expect("degree 8 rule available");
        let mut cq = CellQuad::empty();
        for cell in 0..self.mesh.cell_count() {
            let geo = self.mesh.cell_geometry(cell);
            ctx.bind_into(&geo, &mut cq);
            let vd = self.cell_vel_dofs(cell);
            let pd = self.cell_pressure_dofs(cell);
            for q in 0..ctx.len() {
                let w = cq.wdet[q];
                let phi = &ctx.p2_vals[q];
                let grad = &cq.p2_grads[q];
                let psi = &ctx.p1_vals[q];
                let fx = f(cell, cq.xq[q]);
                for i in 0..6 {
                    for c in 0..2 {
                        rhs[vd[2 * i + c]] += w * phi[i] * fx[c];
                    }
                    for j in 0..6 {
                        let m = w * phi[i] * phi[j];
                        mat.add(vd[2 * i], vd[2 * j], m);
                        mat.add(vd[2 * i + 1], vd[2 * j + 1], m);
                    }
                    // Constraint rows (div u, q_j) and their transpose.
                    for j in 0..3 {
                        for c in 0..2 {
                            let b = w * grad[i][c] * psi[j];
                            mat.add(pd[j], vd[2 * i + c], b);
                            mat.add(vd[2 * i + c], pd[j], b);
                        }
                    }
                }
            }
        }

        for &(dof, value) in &opts.constraints {
            assert!(dof < self.n_u, "projection constraints act on velocity DOFs");
            mat.constrain(&mut rhs, dof, value);
        }
        if opts.pin_pressure {
            mat.constrain(&mut rhs, self.n_u, T::zero());
        }

        let sol = mat.solve(&rhs)?;
        let mut state = State::zeros(self);
        state.coeffs[..self.n_u].copy_from_slice(&sol[..self.n_u]);
        Ok(state)
    }

    /// Residual of each divergence constraint row, (div u_h, q_j).
    pub fn div_constraint_residual(&self, state: &State<T>) -> Vec<T> {
        let ctx = QuadContext::triangle(4).expect("degree 4 rule available");
        let mut cq = CellQuad::empty();
        let mut r = vec![T::zero(); self.n_p];
        for cell in 0..self.mesh.cell_count() {
            let geo = self.mesh.cell_geometry(cell);
            ctx.bind_into(&geo, &mut cq);
            let nodal = self.gather_cell_velocity(&state.coeffs, cell);
            let verts = self.mesh.cells()[cell];
            for q in 0..ctx.len() {
                let mut div = T::zero();
                for i in 0..6 {
                    div += cq.p2_grads[q][i][0] * nodal[i][0]
                        + cq.p2_grads[q][i][1] * nodal[i][1];
                }
                let w = cq.wdet[q] * div;
                for j in 0..3 {
                    r[verts[j]] += w * ctx.p1_vals[q][j];
                }
            }
        }
        r
    }

    /// L2 norm of the velocity error against an analytic field.
    pub fn l2_error_velocity(&self, state: &State<T>, exact: impl Fn([T; 2]) -> [T; 2]) -> T {
        let ctx = QuadContext::triangle(8).expect("degree 8 rule available");
        let mut cq = CellQuad::empty();
        let mut acc = T::zero();
        for cell in 0..self.mesh.cell_count() {
            let geo = self.mesh.cell_geometry(cell);
            ctx.bind_into(&geo, &mut cq);
            let nodal = self.gather_cell_velocity(&state.coeffs, cell);
            for q in 0..ctx.len() {
                let mut u = [T::zero(); 2];
                for i in 0..6 {
                    u[0] += ctx.p2_vals[q][i] * nodal[i][0];
                    u[1] += ctx.p2_vals[q][i] * nodal[i][1];
                }
                let e = exact(cq.xq[q]);
                let d = [u[0] - e[0], u[1] - e[1]];
                acc += cq.wdet[q] * (d[0] * d[0] + d[1] * d[1]);
            }
        }
        acc.sqrt()
    }

    /// L2 norm of the pressure error against an analytic field.
    pub fn l2_error_pressure(&self, state: &State<T>, exact: impl Fn([T; 2]) -> T) -> T {
        let ctx = QuadContext::triangle(8).expect("degree 8 rule available");
        let mut cq = CellQuad::empty();
        let mut acc = T::zero();
        for cell in 0..self.mesh.cell_count() {
            let geo = self.mesh.cell_geometry(cell);
            ctx.bind_into(&geo, &mut cq);
            let nodal = self.gather_cell_pressure(&state.coeffs, cell);
            for q in 0..ctx.len() {
                let mut p = T::zero();
                for j in 0..3 {
                    p += ctx.p1_vals[q][j] * nodal[j];
                }
                let d = p - exact(cq.xq[q]);
                acc += cq.wdet[q] * d * d;
            }
        }
        acc.sqrt()
    }
}

/// Reference-element basis data tabulated at the points of one triangle rule.
pub struct QuadContext<T> {
    pub rule: QuadRule<T>,
    pub p2_vals: Vec<[T; 6]>,
    p2_grads_ref: Vec<[[T; 2]; 6]>,
    pub p1_vals: Vec<[T; 3]>,
}

/// Per-cell quadrature data: physical points, scaled weights, and physical
/// basis gradients.
pub struct CellQuad<T> {
    pub xq: Vec<[T; 2]>,
    /// Quadrature weight times the Jacobian determinant; sums to cell area.
    pub wdet: Vec<T>,
    pub p2_grads: Vec<[[T; 2]; 6]>,
    /// Pressure gradients are constant over the cell.
    pub p1_grads: [[T; 2]; 3],
}

impl<T: Real> CellQuad<T> {
    pub fn empty() -> Self {
        CellQuad {
            xq: Vec::new(),
            wdet: Vec::new(),
            p2_grads: Vec::new(),
            p1_grads: [[T::zero(); 2]; 3],
        }
    }
}

impl<T: Real> QuadContext<T> {
    pub fn triangle(degree: usize) -> Result<Self, ElementError> {
        let rule = triangle_rule::<T>(degree)?;
        let mut p2_vals = Vec::with_capacity(rule.len());
        let mut p2_grads_ref = Vec::with_capacity(rule.len());
        let mut p1_vals = Vec::with_capacity(rule.len());
        for &pt in &rule.points {
            let (v2, g2) = p2_eval(pt);
            let (v1, _) = p1_eval(pt);
            p2_vals.push(v2);
            p2_grads_ref.push(g2);
            p1_vals.push(v1);
        }
        Ok(QuadContext {
            rule,
            p2_vals,
            p2_grads_ref,
            p1_vals,
        })
    }

    pub fn len(&self) -> usize {
        self.rule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule.is_empty()
    }

    /// Bind the tabulated data to one cell's geometry, reusing buffers.
    pub fn bind_into(&self, geo: &CellGeometry<T>, out: &mut CellQuad<T>) {
        let nq = self.len();
        out.xq.clear();
        out.wdet.clear();
        out.p2_grads.clear();
        for q in 0..nq {
            out.xq.push(geo.to_physical(self.rule.points[q]));
            out.wdet.push(self.rule.weights[q] * geo.det);
            let mut g = [[T::zero(); 2]; 6];
            for i in 0..6 {
                g[i] = geo.grad_to_physical(self.p2_grads_ref[q][i]);
            }
            out.p2_grads.push(g);
        }
        let (_, ref_g1) = p1_eval([T::zero(), T::zero()]);
        for j in 0..3 {
            out.p1_grads[j] = geo.grad_to_physical(ref_g1[j]);
        }
    }

    pub fn bind(&self, geo: &CellGeometry<T>) -> CellQuad<T> {
        let mut out = CellQuad::empty();
        self.bind_into(geo, &mut out);
        out
    }
}

/// Basis traces along one boundary edge, tabulated at a 1D rule mapped into
/// the owning cell.
pub struct EdgeQuadContext<T> {
    pub rule: QuadRule<T>,
}

/// Per-segment boundary quadrature data in the owning cell's local basis.
pub struct EdgeQuad<T> {
    pub xq: Vec<[T; 2]>,
    /// Weight times edge length; sums to the segment length.
    pub wds: Vec<T>,
    pub p2_vals: Vec<[T; 6]>,
    pub p2_grads: Vec<[[T; 2]; 6]>,
    pub p1_vals: Vec<[T; 3]>,
}

impl<T: Real> EdgeQuadContext<T> {
    pub fn new(degree: usize) -> Result<Self, ElementError> {
        Ok(EdgeQuadContext {
            rule: edge_rule::<T>(degree)?,
        })
    }

    /// Evaluate cell basis data along a boundary segment. Points follow the
    /// segment's `a -> b` orientation.
    pub fn bind(&self, mesh: &Mesh<T>, seg: &BoundarySegment<T>) -> EdgeQuad<T> {
        let geo = mesh.cell_geometry(seg.cell);
        let k = seg.local_edge;
        // Edge k runs from local vertex (k+1)%3 to (k+2)%3, matching a -> b.
        let ra = REF_VERTS[(k + 1) % 3];
        let rb = REF_VERTS[(k + 2) % 3];
        let nq = self.rule.len();
        let mut out = EdgeQuad {
            xq: Vec::with_capacity(nq),
            wds: Vec::with_capacity(nq),
            p2_vals: Vec::with_capacity(nq),
            p2_grads: Vec::with_capacity(nq),
            p1_vals: Vec::with_capacity(nq),
        };
        for q in 0..nq {
            let s = self.rule.points[q][0];
            let om = T::one() - s;
            let xi = [
                T::of(ra[0]) * om + T::of(rb[0]) * s,
                T::of(ra[1]) * om + T::of(rb[1]) * s,
            ];
            let (v2, g2) = p2_eval(xi);
            let (v1, _) = p1_eval(xi);
            let mut g = [[T::zero(); 2]; 6];
            for i in 0..6 {
                g[i] = geo.grad_to_physical(g2[i]);
            }
            out.xq.push(geo.to_physical(xi));
            out.wds.push(self.rule.weights[q] * seg.length);
            out.p2_vals.push(v2);
            out.p2_grads.push(g);
            out.p1_vals.push(v1);
        }
        out
    }
}
