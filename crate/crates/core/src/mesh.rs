//! Conforming triangulations of 2D polygonal domains with tagged boundaries.
//!
//! Meshes are immutable after construction: every constructor runs full
//! validation (orientation, manifoldness, boundary coverage), and refinement
//! returns a new mesh. Cells are counterclockwise; local edge `k` of a cell
//! connects the two vertices other than local vertex `k`, which is also the
//! P2 midpoint-node convention used by [`crate::space`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::scalar::Real;
use thiserror::Error;

/// Symbolic label carried by each boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Wall,
    Inflow,
    Outflow,
    Obstacle,
    Free,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 5] = [
        BoundaryTag::Wall,
        BoundaryTag::Inflow,
        BoundaryTag::Outflow,
        BoundaryTag::Obstacle,
        BoundaryTag::Free,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Wall => "wall",
            BoundaryTag::Inflow => "inflow",
            BoundaryTag::Outflow => "outflow",
            BoundaryTag::Obstacle => "obstacle",
            BoundaryTag::Free => "free",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Tagged boundary edge, stored by vertex pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cell {cell} has non-positive signed area (clockwise or degenerate)")]
    NonPositiveArea { cell: usize },
    #[error("mesh validation failed: {0}")]
    Validation(String),
}

/// Edge lengths and angle quality summary.
#[derive(Debug, Clone, Copy)]
pub struct MeshSize<T> {
    pub h_max: T,
    pub h_min: T,
    pub min_angle_deg: T,
}

/// Per-cell affine geometry: physical map and gradient transform.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry<T> {
    pub coords: [[T; 2]; 3],
    /// Inverse-transpose Jacobian; maps reference gradients to physical ones.
    pub inv_jac_t: [[T; 2]; 2],
    /// Jacobian determinant, equal to twice the cell area (positive).
    pub det: T,
    pub area: T,
}

impl<T: Real> CellGeometry<T> {
    /// Map a reference point to physical coordinates.
    pub fn to_physical(&self, xi: [T; 2]) -> [T; 2] {
        let [a, b, c] = self.coords;
        [
            a[0] + (b[0] - a[0]) * xi[0] + (c[0] - a[0]) * xi[1],
            a[1] + (b[1] - a[1]) * xi[0] + (c[1] - a[1]) * xi[1],
        ]
    }

    /// Transform a reference gradient to a physical gradient.
    pub fn grad_to_physical(&self, g: [T; 2]) -> [T; 2] {
        [
            self.inv_jac_t[0][0] * g[0] + self.inv_jac_t[0][1] * g[1],
            self.inv_jac_t[1][0] * g[0] + self.inv_jac_t[1][1] * g[1],
        ]
    }
}

/// Boundary edge with derived geometry, oriented so the domain lies on the
/// left when walking `a -> b`; `normal` is the unit domain-outward normal.
#[derive(Debug, Clone, Copy)]
pub struct BoundarySegment<T> {
    pub boundary_index: usize,
    pub edge: usize,
    pub cell: usize,
    /// Local edge index within `cell` (opposite local vertex of same index).
    pub local_edge: usize,
    pub a: usize,
    pub b: usize,
    pub tag: BoundaryTag,
    pub length: T,
    pub tangent: [T; 2],
    pub normal: [T; 2],
}

/// Immutable conforming triangle mesh.
#[derive(Debug, Clone)]
pub struct Mesh<T> {
    vertices: Vec<[T; 2]>,
    cells: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    // Derived connectivity, fixed at construction.
    edges: Vec<[usize; 2]>,
    cell_edges: Vec<[usize; 3]>,
    edge_cells: Vec<[usize; 2]>,
    boundary_of_edge: Vec<Option<usize>>,
}

const NO_CELL: usize = usize::MAX;

fn signed_area<T: Real>(a: [T; 2], b: [T; 2], c: [T; 2]) -> T {
    T::half() * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl<T: Real> Mesh<T> {
    /// Build and validate a mesh from raw vertex, cell, and boundary lists.
    pub fn from_parts(
        vertices: Vec<[T; 2]>,
        cells: Vec<[usize; 3]>,
        boundary: Vec<BoundaryEdge>,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        for (ci, cell) in cells.iter().enumerate() {
            for &v in cell {
                if v >= nv {
                    return Err(MeshError::Validation(format!(
                        "cell {ci} references vertex {v}, but there are only {nv} vertices"
                    )));
                }
            }
            if cell[0] == cell[1] || cell[1] == cell[2] || cell[0] == cell[2] {
                return Err(MeshError::Validation(format!(
                    "cell {ci} repeats a vertex"
                )));
            }
        }
        for (ci, cell) in cells.iter().enumerate() {
            let area = signed_area(
                vertices[cell[0]],
                vertices[cell[1]],
                vertices[cell[2]],
            );
            if area <= T::zero() {
                return Err(MeshError::NonPositiveArea { cell: ci });
            }
        }

        let mut used = vec![false; nv];
        for cell in &cells {
            for &v in cell {
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(MeshError::Validation(format!(
                "vertex {v} is not referenced by any cell"
            )));
        }

        // Deterministic edge numbering: sorted by vertex pair.
        let mut edge_ids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for cell in &cells {
            for k in 0..3 {
                let (a, b) = (cell[(k + 1) % 3], cell[(k + 2) % 3]);
                let key = (a.min(b), a.max(b));
                let next = edge_ids.len();
                edge_ids.entry(key).or_insert(next);
            }
        }
        // Re-key in sorted order so ids do not depend on cell order.
        let mut edges: Vec<[usize; 2]> =
            edge_ids.keys().map(|&(a, b)| [a, b]).collect();
        edges.sort_unstable();
        let edge_ids: BTreeMap<(usize, usize), usize> = edges
            .iter()
            .enumerate()
            .map(|(i, e)| ((e[0], e[1]), i))
            .collect();

        let mut cell_edges = vec![[0usize; 3]; cells.len()];
        let mut edge_cells = vec![[NO_CELL; 2]; edges.len()];
        for (ci, cell) in cells.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (cell[(k + 1) % 3], cell[(k + 2) % 3]);
                let e = edge_ids[&(a.min(b), a.max(b))];
                cell_edges[ci][k] = e;
                if edge_cells[e][0] == NO_CELL {
                    edge_cells[e][0] = ci;
                } else if edge_cells[e][1] == NO_CELL {
                    edge_cells[e][1] = ci;
                } else {
                    return Err(MeshError::Validation(format!(
                        "edge ({a}, {b}) is shared by more than two cells"
                    )));
                }
            }
        }

        let mut boundary_of_edge = vec![None; edges.len()];
        for (bi, be) in boundary.iter().enumerate() {
            let [a, b] = be.vertices;
            if a >= nv || b >= nv {
                return Err(MeshError::Validation(format!(
                    "boundary edge {bi} references vertex out of range"
                )));
            }
            let Some(&e) = edge_ids.get(&(a.min(b), a.max(b))) else {
                return Err(MeshError::Validation(format!(
                    "boundary edge {bi} ({a}, {b}) is not an edge of any cell"
                )));
            };
            if edge_cells[e][1] != NO_CELL {
                return Err(MeshError::Validation(format!(
                    "boundary edge {bi} ({a}, {b}) is interior (two incident cells)"
                )));
            }
            if boundary_of_edge[e].is_some() {
                return Err(MeshError::Validation(format!(
                    "boundary edge ({a}, {b}) is tagged more than once"
                )));
            }
            boundary_of_edge[e] = Some(bi);
        }
        for (e, edge) in edges.iter().enumerate() {
            if edge_cells[e][1] == NO_CELL && boundary_of_edge[e].is_none() {
                return Err(MeshError::Validation(format!(
                    "edge ({}, {}) lies on the boundary but carries no tag",
                    edge[0], edge[1]
                )));
            }
        }

        // Closed-loop check: every boundary vertex must join exactly two
        // boundary edges.
        let mut incidence = vec![0usize; nv];
        for be in &boundary {
            incidence[be.vertices[0]] += 1;
            incidence[be.vertices[1]] += 1;
        }
        for (v, &count) in incidence.iter().enumerate() {
            if count != 0 && count != 2 {
                return Err(MeshError::Validation(format!(
                    "boundary vertex {v} joins {count} boundary edges (loops must be closed and manifold)"
                )));
            }
        }

        Ok(Mesh {
            vertices,
            cells,
            boundary,
            edges,
            cell_edges,
            edge_cells,
            boundary_of_edge,
        })
    }

    /// Structured mesh of a rectangle, each quad split along the
    /// lower-left-to-upper-right diagonal. All boundary edges are `wall`.
    pub fn rectangle(
        x0: T,
        y0: T,
        x1: T,
        y1: T,
        nx: usize,
        ny: usize,
    ) -> Result<Self, MeshError> {
        Self::rect_impl(x0, y0, x1, y1, nx, ny, false)
    }

    /// Structured rectangle mesh where each quad is split into four
    /// triangles around its centroid.
    pub fn rectangle_crisscross(
        x0: T,
        y0: T,
        x1: T,
        y1: T,
        nx: usize,
        ny: usize,
    ) -> Result<Self, MeshError> {
        Self::rect_impl(x0, y0, x1, y1, nx, ny, true)
    }

    fn rect_impl(
        x0: T,
        y0: T,
        x1: T,
        y1: T,
        nx: usize,
        ny: usize,
        crisscross: bool,
    ) -> Result<Self, MeshError> {
        if nx == 0 || ny == 0 {
            return Err(MeshError::InvalidParameter(
                "cell counts must be at least 1".into(),
            ));
        }
        if !(x1 > x0) || !(y1 > y0) {
            return Err(MeshError::InvalidParameter(
                "rectangle bounds must satisfy x1 > x0 and y1 > y0".into(),
            ));
        }
        let fx = |i: usize| {
            x0 + (x1 - x0) * T::of(i as f64) / T::of(nx as f64)
        };
        let fy = |j: usize| {
            y0 + (y1 - y0) * T::of(j as f64) / T::of(ny as f64)
        };
        let vid = |i: usize, j: usize| j * (nx + 1) + i;

        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([fx(i), fy(j)]);
            }
        }
        let mut cells = Vec::with_capacity(if crisscross { 4 } else { 2 } * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (ll, lr) = (vid(i, j), vid(i + 1, j));
                let (ul, ur) = (vid(i, j + 1), vid(i + 1, j + 1));
                if crisscross {
                    let c = vertices.len();
                    vertices.push([
                        (fx(i) + fx(i + 1)) * T::half(),
                        (fy(j) + fy(j + 1)) * T::half(),
                    ]);
                    cells.push([ll, lr, c]);
                    cells.push([lr, ur, c]);
                    cells.push([ur, ul, c]);
                    cells.push([ul, ll, c]);
                } else {
                    cells.push([ll, lr, ur]);
                    cells.push([ll, ur, ul]);
                }
            }
        }
        let mut boundary = Vec::with_capacity(2 * (nx + ny));
        for i in 0..nx {
            boundary.push(BoundaryEdge {
                vertices: [vid(i, 0), vid(i + 1, 0)],
                tag: BoundaryTag::Wall,
            });
            boundary.push(BoundaryEdge {
                vertices: [vid(i + 1, ny), vid(i, ny)],
                tag: BoundaryTag::Wall,
            });
        }
        for j in 0..ny {
            boundary.push(BoundaryEdge {
                vertices: [vid(nx, j), vid(nx, j + 1)],
                tag: BoundaryTag::Wall,
            });
            boundary.push(BoundaryEdge {
                vertices: [vid(0, j + 1), vid(0, j)],
                tag: BoundaryTag::Wall,
            });
        }
        Self::from_parts(vertices, cells, boundary)
    }

    /// Retag every boundary edge whose midpoint satisfies the predicate.
    ///
    /// Returns a new mesh; panics never, an edge not matching any predicate
    /// keeps its existing tag.
    pub fn retag_boundary(
        &self,
        mut pred: impl FnMut([T; 2], BoundaryTag) -> Option<BoundaryTag>,
    ) -> Self {
        let mut out = self.clone();
        for be in &mut out.boundary {
            let a = self.vertices[be.vertices[0]];
            let b = self.vertices[be.vertices[1]];
            let mid = [
                (a[0] + b[0]) * T::half(),
                (a[1] + b[1]) * T::half(),
            ];
            if let Some(tag) = pred(mid, be.tag) {
                be.tag = tag;
            }
        }
        out
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[[T; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// Edge ids of a cell; entry `k` is the edge opposite local vertex `k`.
    pub fn cell_edge_ids(&self, cell: usize) -> [usize; 3] {
        self.cell_edges[cell]
    }

    /// Cells incident to an edge (second is `None` on the boundary).
    pub fn edge_cells(&self, edge: usize) -> (usize, Option<usize>) {
        let [a, b] = self.edge_cells[edge];
        (a, (b != NO_CELL).then_some(b))
    }

    /// True if any boundary edge carries the tag.
    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.boundary.iter().any(|b| b.tag == tag)
    }

    pub fn cell_geometry(&self, cell: usize) -> CellGeometry<T> {
        let [v0, v1, v2] = self.cells[cell];
        let coords = [self.vertices[v0], self.vertices[v1], self.vertices[v2]];
        let (ax, ay) = (coords[0][0], coords[0][1]);
        let (bx, by) = (coords[1][0], coords[1][1]);
        let (cx, cy) = (coords[2][0], coords[2][1]);
        let det = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay);
        let inv = det.recip();
        // Rows of J^{-T}: first row (dxi/dx, deta/dx), second (dxi/dy, deta/dy).
        let inv_jac_t = [
            [(cy - ay) * inv, -(by - ay) * inv],
            [-(cx - ax) * inv, (bx - ax) * inv],
        ];
        CellGeometry {
            coords,
            inv_jac_t,
            det,
            area: T::half() * det,
        }
    }

    /// All boundary edges with derived orientation and normals.
    pub fn boundary_segments(&self) -> Vec<BoundarySegment<T>> {
        (0..self.boundary.len())
            .map(|bi| self.boundary_segment(bi))
            .collect()
    }

    /// Geometry of one boundary edge; `a -> b` keeps the domain on the left.
    pub fn boundary_segment(&self, boundary_index: usize) -> BoundarySegment<T> {
        let be = self.boundary[boundary_index];
        let [p, q] = be.vertices;
        let key = (p.min(q), p.max(q));
        let edge = self
            .edges
            .binary_search(&[key.0, key.1])
            .expect("boundary edge validated at construction");
        let cell = self.edge_cells[edge][0];
        let verts = self.cells[cell];
        let local_edge = (0..3)
            .find(|&k| {
                let (a, b) = (verts[(k + 1) % 3], verts[(k + 2) % 3]);
                (a.min(b), a.max(b)) == key
            })
            .expect("edge belongs to its owning cell");
        // Cell order is counterclockwise, so traversing the opposite edge in
        // cell order keeps the domain on the left.
        let (a, b) = (verts[(local_edge + 1) % 3], verts[(local_edge + 2) % 3]);
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let d = [pb[0] - pa[0], pb[1] - pa[1]];
        let length = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let tangent = [d[0] / length, d[1] / length];
        let normal = [tangent[1], -tangent[0]];
        BoundarySegment {
            boundary_index,
            edge,
            cell,
            local_edge,
            a,
            b,
            tag: be.tag,
            length,
            tangent,
            normal,
        }
    }

    pub fn total_area(&self) -> T {
        let mut sum = T::zero();
        for c in 0..self.cells.len() {
            sum += self.cell_geometry(c).area;
        }
        sum
    }

    /// Shoelace area of the boundary loops (holes subtract automatically).
    pub fn boundary_loop_area(&self) -> T {
        let mut sum = T::zero();
        for bi in 0..self.boundary.len() {
            let seg = self.boundary_segment(bi);
            let (pa, pb) = (self.vertices[seg.a], self.vertices[seg.b]);
            sum += pa[0] * pb[1] - pb[0] * pa[1];
        }
        sum * T::half()
    }

    pub fn size_report(&self) -> MeshSize<T> {
        let mut h_max = T::zero();
        let mut h_min = T::infinity();
        for e in &self.edges {
            let (a, b) = (self.vertices[e[0]], self.vertices[e[1]]);
            let len =
                ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            h_max = h_max.max(len);
            h_min = h_min.min(len);
        }
        let mut min_angle = T::infinity();
        for cell in &self.cells {
            for k in 0..3 {
                let o = self.vertices[cell[k]];
                let p = self.vertices[cell[(k + 1) % 3]];
                let q = self.vertices[cell[(k + 2) % 3]];
                let u = [p[0] - o[0], p[1] - o[1]];
                let v = [q[0] - o[0], q[1] - o[1]];
                let dot = u[0] * v[0] + u[1] * v[1];
                let nu = (u[0] * u[0] + u[1] * u[1]).sqrt();
                let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
                let c = (dot / (nu * nv)).clamp(-T::one(), T::one());
                min_angle = min_angle.min(c.acos());
            }
        }
        MeshSize {
            h_max,
            h_min,
            min_angle_deg: min_angle * T::of(180.0) / T::PI(),
        }
    }

    /// Uniform refinement: each triangle splits into four via edge midpoints.
    pub fn refine(&self) -> Self {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        for e in &self.edges {
            let (a, b) = (self.vertices[e[0]], self.vertices[e[1]]);
            vertices.push([
                (a[0] + b[0]) * T::half(),
                (a[1] + b[1]) * T::half(),
            ]);
        }
        let mid = |edge: usize| nv + edge;
        let mut cells = Vec::with_capacity(4 * self.cells.len());
        for (ci, cell) in self.cells.iter().enumerate() {
            let [v0, v1, v2] = *cell;
            let [e0, e1, e2] = self.cell_edges[ci];
            let (m0, m1, m2) = (mid(e0), mid(e1), mid(e2));
            cells.push([v0, m2, m1]);
            cells.push([v1, m0, m2]);
            cells.push([v2, m1, m0]);
            cells.push([m0, m1, m2]);
        }
        let mut boundary = Vec::with_capacity(2 * self.boundary.len());
        for be in &self.boundary {
            let [a, b] = be.vertices;
            let key = [a.min(b), a.max(b)];
            let edge = self.edges.binary_search(&key).expect("validated");
            boundary.push(BoundaryEdge {
                vertices: [a, mid(edge)],
                tag: be.tag,
            });
            boundary.push(BoundaryEdge {
                vertices: [mid(edge), b],
                tag: be.tag,
            });
        }
        Self::from_parts(vertices, cells, boundary)
            .expect("refinement of a valid mesh is valid")
    }

    /// Parse the TRIMESH interchange format.
    ///
    /// Line 1: `trimesh 2`. Line 2: vertex, cell, and boundary-edge counts.
    /// Then one line per vertex (`x y`), per cell (`v0 v1 v2`,
    /// counterclockwise), and per boundary edge (`v0 v1 tag`). Indices are
    /// 0-based; `#` starts a comment.
    pub fn from_trimesh_str(text: &str) -> Result<Self, MeshError> {
        let mut tokens = TokenStream::new(text);
        let magic = tokens.next_str("format magic")?;
        let dim = tokens.next_str("format dimension")?;
        if magic != "trimesh" || dim != "2" {
            return Err(MeshError::Parse {
                line: tokens.line,
                msg: format!("expected header `trimesh 2`, found `{magic} {dim}`"),
            });
        }
        let nv: usize = tokens.next_parse("vertex count")?;
        let nc: usize = tokens.next_parse("cell count")?;
        let nb: usize = tokens.next_parse("boundary edge count")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let x: f64 = tokens.next_parse("vertex x")?;
            let y: f64 = tokens.next_parse("vertex y")?;
            vertices.push([T::of(x), T::of(y)]);
        }
        let mut cells = Vec::with_capacity(nc);
        for _ in 0..nc {
            let a: usize = tokens.next_parse("cell vertex")?;
            let b: usize = tokens.next_parse("cell vertex")?;
            let c: usize = tokens.next_parse("cell vertex")?;
            cells.push([a, b, c]);
        }
        let mut boundary = Vec::with_capacity(nb);
        for _ in 0..nb {
            let a: usize = tokens.next_parse("boundary vertex")?;
            let b: usize = tokens.next_parse("boundary vertex")?;
            let line = tokens.line;
            let tag = tokens.next_str("boundary tag")?;
            let tag = BoundaryTag::parse(&tag).ok_or_else(|| MeshError::Parse {
                line,
                msg: format!(
                    "unknown boundary tag `{tag}` (expected wall, inflow, outflow, obstacle, or free)"
                ),
            })?;
            boundary.push(BoundaryEdge {
                vertices: [a, b],
                tag,
            });
        }
        if let Some(extra) = tokens.peek() {
            return Err(MeshError::Parse {
                line: tokens.line,
                msg: format!("unexpected trailing token `{extra}`"),
            });
        }
        Self::from_parts(vertices, cells, boundary)
    }

    /// Read a TRIMESH file from disk.
    pub fn read_trimesh(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_trimesh_str(&text)
    }

    /// Serialize in the TRIMESH format (lossless for f64 coordinates).
    pub fn to_trimesh_string(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "trimesh 2").unwrap();
        writeln!(
            out,
            "{} {} {}",
            self.vertices.len(),
            self.cells.len(),
            self.boundary.len()
        )
        .unwrap();
        for v in &self.vertices {
            writeln!(out, "{} {}", v[0], v[1]).unwrap();
        }
        for c in &self.cells {
            writeln!(out, "{} {} {}", c[0], c[1], c[2]).unwrap();
        }
        for b in &self.boundary {
            writeln!(out, "{} {} {}", b.vertices[0], b.vertices[1], b.tag).unwrap();
        }
        out
    }

    pub fn write_trimesh(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        std::fs::write(path, self.to_trimesh_string())?;
        Ok(())
    }
}

/// Whitespace token reader that tracks line numbers and strips `#` comments.
struct TokenStream<'a> {
    rest: &'a str,
    line: usize,
}

impl<'a> TokenStream<'a> {
    fn new(text: &'a str) -> Self {
        TokenStream { rest: text, line: 1 }
    }

    fn skip_ws(&mut self) {
        loop {
            let mut chars = self.rest.char_indices();
            let mut advanced = 0;
            for (i, c) in chars.by_ref() {
                if c == '\n' {
                    self.line += 1;
                    advanced = i + 1;
                } else if c.is_whitespace() {
                    advanced = i + c.len_utf8();
                } else if c == '#' {
                    let end = self.rest[i..]
                        .find('\n')
                        .map(|n| i + n)
                        .unwrap_or(self.rest.len());
                    advanced = end;
                    break;
                } else {
                    self.rest = &self.rest[i..];
                    return;
                }
            }
            if advanced >= self.rest.len() {
                self.rest = "";
                return;
            }
            self.rest = &self.rest[advanced..];
        }
    }

    fn peek(&mut self) -> Option<&'a str> {
        self.skip_ws();
        if self.rest.is_empty() {
            return None;
        }
        let end = self
            .rest
            .find(|c: char| c.is_whitespace() || c == '#')
            .unwrap_or(self.rest.len());
        Some(&self.rest[..end])
    }

    fn next_str(&mut self, what: &str) -> Result<String, MeshError> {
        let line = {
            self.skip_ws();
            self.line
        };
        match self.peek() {
            Some(tok) => {
                self.rest = &self.rest[tok.len()..];
                Ok(tok.to_string())
            }
            None => Err(MeshError::Parse {
                line,
                msg: format!("unexpected end of file while reading {what}"),
            }),
        }
    }

    fn next_parse<V: std::str::FromStr>(&mut self, what: &str) -> Result<V, MeshError> {
        self.skip_ws();
        let line = self.line;
        let tok = self.next_str(what)?;
        tok.parse().map_err(|_| MeshError::Parse {
            line,
            msg: format!("cannot parse `{tok}` as {what}"),
        })
    }
}

#[cfg(test)]
pub(crate) fn square_annulus() -> Mesh<f64> {
    // Outer box [-1,1]^2 on a 4x4 grid with the middle [-0.5,0.5]^2 removed;
    // the hole boundary is tagged `obstacle`. Used by drag/lift oracles.
    let base = Mesh::<f64>::rectangle(-1.0, -1.0, 1.0, 1.0, 4, 4).unwrap();
    let keep: Vec<usize> = (0..base.cell_count())
        .filter(|&c| {
            let g = base.cell_geometry(c);
            let cx = (g.coords[0][0] + g.coords[1][0] + g.coords[2][0]) / 3.0;
            let cy = (g.coords[0][1] + g.coords[1][1] + g.coords[2][1]) / 3.0;
            !(cx.abs() < 0.5 && cy.abs() < 0.5)
        })
        .collect();
    extract_submesh(&base, &keep, BoundaryTag::Obstacle)
}

/// Keep only the listed cells, compact vertices, and tag any newly exposed
/// boundary with `new_tag`. Tests-only helper.
#[cfg(test)]
pub(crate) fn extract_submesh(
    base: &Mesh<f64>,
    keep: &[usize],
    new_tag: BoundaryTag,
) -> Mesh<f64> {
    use std::collections::HashMap;
    let mut vmap: HashMap<usize, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    for &c in keep {
        let mut tri = [0usize; 3];
        for (slot, &v) in tri.iter_mut().zip(&base.cells()[c]) {
            let id = *vmap.entry(v).or_insert_with(|| {
                vertices.push(base.vertices()[v]);
                vertices.len() - 1
            });
            *slot = id;
        }
        cells.push(tri);
    }
    // Count edge usage to find the new boundary.
    let mut edge_use: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
    for tri in &cells {
        for k in 0..3 {
            let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let entry = edge_use
                .entry((a.min(b), a.max(b)))
                .or_insert((0, [a, b]));
            entry.0 += 1;
        }
    }
    let old_tags: HashMap<(usize, usize), BoundaryTag> = base
        .boundary_edges()
        .iter()
        .filter_map(|be| {
            let [a, b] = be.vertices;
            let (na, nb) = (vmap.get(&a)?, vmap.get(&b)?);
            Some(((*na.min(nb), *na.max(nb)), be.tag))
        })
        .collect();
    let mut boundary: Vec<BoundaryEdge> = edge_use
        .iter()
        .filter(|(_, (count, _))| *count == 1)
        .map(|(key, (_, dir))| BoundaryEdge {
            vertices: *dir,
            tag: old_tags.get(key).copied().unwrap_or(new_tag),
        })
        .collect();
    boundary.sort_by_key(|b| (b.vertices[0], b.vertices[1]));
    Mesh::from_parts(vertices, cells, boundary).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn rect_counts() {
        let m = Mesh::<f64>::rectangle(-0.5, -0.5, 0.5, 0.5, 48, 48).unwrap();
        assert_eq!(m.vertex_count(), 2401);
        assert_eq!(m.cell_count(), 4608);

        let s = Mesh::<f64>::rectangle(0.0, 0.0, 1.0, 1.0, 1, 1).unwrap();
        assert_eq!(s.vertex_count(), 4);
        assert_eq!(s.cell_count(), 2);
        assert_eq!(s.boundary_edges().len(), 4);
        assert_eq!(s.edge_count(), 5);
    }

    #[test]
    fn rect_area_partition() {
        let m = Mesh::<f64>::rectangle(-0.5, -0.5, 0.5, 0.5, 2, 2).unwrap();
        assert_abs_diff_eq!(m.total_area(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.boundary_loop_area(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rect_rejects_bad_parameters() {
        assert!(Mesh::<f64>::rectangle(0.0, 0.0, 1.0, 1.0, 0, 3).is_err());
        assert!(Mesh::<f64>::rectangle(1.0, 0.0, 0.0, 1.0, 2, 2).is_err());
    }

    #[test]
    fn crisscross_counts() {
        let m = Mesh::<f64>::rectangle_crisscross(0.0, 0.0, 1.0, 1.0, 2, 2).unwrap();
        assert_eq!(m.vertex_count(), 9 + 4);
        assert_eq!(m.cell_count(), 16);
        assert_abs_diff_eq!(m.total_area(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn clockwise_cell_is_rejected_naming_the_cell() {
        let vertices = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let cells = vec![[0, 1, 3], [0, 3, 2]];
        let mut bad = cells.clone();
        bad[1] = [0, 2, 3]; // clockwise
        let boundary = vec![
            BoundaryEdge { vertices: [0, 1], tag: BoundaryTag::Wall },
            BoundaryEdge { vertices: [1, 3], tag: BoundaryTag::Wall },
            BoundaryEdge { vertices: [3, 2], tag: BoundaryTag::Wall },
            BoundaryEdge { vertices: [2, 0], tag: BoundaryTag::Wall },
        ];
        let err = Mesh::from_parts(vertices, bad, boundary).unwrap_err();
        match err {
            MeshError::NonPositiveArea { cell } => assert_eq!(cell, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn trimesh_round_trip_matches_generator() {
        let gen = Mesh::<f64>::rectangle(0.0, 0.0, 1.0, 1.0, 1, 1).unwrap();
        let text = gen.to_trimesh_string();
        let parsed = Mesh::<f64>::from_trimesh_str(&text).unwrap();
        assert_eq!(parsed.vertices(), gen.vertices());
        assert_eq!(parsed.cells(), gen.cells());
        assert_eq!(parsed.boundary_edges(), gen.boundary_edges());
    }

    #[test]
    fn trimesh_parses_comments_and_reports_line_numbers() {
        let ok = "# a comment\ntrimesh 2\n4 2 4 # counts\n0 0\n1 0 # vertex\n1 1\n0 1\n0 1 2\n0 2 3\n0 1 wall\n1 2 wall\n2 3 wall\n3 0 wall\n";
        assert!(Mesh::<f64>::from_trimesh_str(ok).is_ok());

        let bad = "trimesh 2\n1 0 0\nnot-a-number 0\n";
        match Mesh::<f64>::from_trimesh_str(bad).unwrap_err() {
            MeshError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }

        let bad_tag = "trimesh 2\n4 2 4\n0 0\n1 0\n1 1\n0 1\n0 1 2\n0 2 3\n0 1 wall\n1 2 wall\n2 3 wall\n3 0 floor\n";
        match Mesh::<f64>::from_trimesh_str(bad_tag).unwrap_err() {
            MeshError::Parse { line, msg } => {
                assert_eq!(line, 12);
                assert!(msg.contains("floor"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn uncovered_boundary_is_rejected() {
        let vertices = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let cells = vec![[0, 1, 2]];
        let boundary = vec![
            BoundaryEdge { vertices: [0, 1], tag: BoundaryTag::Wall },
            BoundaryEdge { vertices: [1, 2], tag: BoundaryTag::Wall },
        ];
        assert!(matches!(
            Mesh::from_parts(vertices, cells, boundary),
            Err(MeshError::Validation(_))
        ));
    }

    #[test]
    fn size_report_examples() {
        let m = Mesh::<f64>::rectangle(0.0, 0.0, 1.0, 1.0, 1, 1).unwrap();
        let s = m.size_report();
        assert_abs_diff_eq!(s.h_max, 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.min_angle_deg, 45.0, epsilon = 1e-12);

        let m = Mesh::<f64>::rectangle(-0.5, -0.5, 0.5, 0.5, 48, 48).unwrap();
        assert_abs_diff_eq!(m.size_report().h_min, 1.0 / 48.0, epsilon = 1e-15);
    }

    #[test]
    fn refine_halves_h_and_preserves_area() {
        let m = Mesh::<f64>::rectangle(0.0, 0.0, 2.0, 1.0, 3, 2).unwrap();
        let r = m.refine();
        assert_eq!(r.cell_count(), 4 * m.cell_count());
        assert_abs_diff_eq!(
            r.size_report().h_max,
            m.size_report().h_max / 2.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(r.total_area(), m.total_area(), epsilon = 1e-14);
        assert_eq!(r.boundary_edges().len(), 2 * m.boundary_edges().len());
    }

    #[test]
    fn euler_formula_disk_and_annulus() {
        let m = Mesh::<f64>::rectangle(0.0, 0.0, 1.0, 1.0, 5, 4).unwrap();
        let (v, e, f) = (
            m.vertex_count() as i64,
            m.edge_count() as i64,
            m.cell_count() as i64,
        );
        assert_eq!(v - e + f, 1);
        // Independent edge count: interior edges shared by 2 cells.
        assert_eq!(
            e,
            (3 * m.cell_count() as i64 + m.boundary_edges().len() as i64) / 2
        );

        let a = square_annulus();
        let (v, e, f) = (
            a.vertex_count() as i64,
            a.edge_count() as i64,
            a.cell_count() as i64,
        );
        assert_eq!(v - e + f, 0); // one hole
        assert_abs_diff_eq!(a.total_area(), 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(a.boundary_loop_area(), 3.0, epsilon = 1e-14);
        assert!(a.has_tag(BoundaryTag::Obstacle));
    }

    #[test]
    fn boundary_segments_are_domain_outward() {
        let m = Mesh::<f64>::rectangle(0.0, 0.0, 1.0, 1.0, 2, 2).unwrap();
        for seg in m.boundary_segments() {
            let (pa, pb) = (m.vertices()[seg.a], m.vertices()[seg.b]);
            let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
            // Stepping outward along the normal must leave the unit square.
            let out = [mid[0] + 0.01 * seg.normal[0], mid[1] + 0.01 * seg.normal[1]];
            let inside = (0.0..=1.0).contains(&out[0]) && (0.0..=1.0).contains(&out[1]);
            assert!(!inside, "normal {:?} at {:?} points inward", seg.normal, mid);
        }
        // The annulus hole normal points into the hole (out of the domain).
        let a = square_annulus();
        for seg in a.boundary_segments() {
            if seg.tag == BoundaryTag::Obstacle {
                let (pa, pb) = (a.vertices()[seg.a], a.vertices()[seg.b]);
                let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
                let out = [mid[0] + 0.01 * seg.normal[0], mid[1] + 0.01 * seg.normal[1]];
                assert!(out[0].abs() < 0.5 && out[1].abs() < 0.5);
            }
        }
    }

    proptest! {
        #[test]
        fn area_partition_property(
            nx in 1usize..6,
            ny in 1usize..6,
            w in 0.1f64..10.0,
            h in 0.1f64..10.0,
            crisscross: bool,
        ) {
            let m = if crisscross {
                Mesh::<f64>::rectangle_crisscross(0.0, 0.0, w, h, nx, ny).unwrap()
            } else {
                Mesh::<f64>::rectangle(0.0, 0.0, w, h, nx, ny).unwrap()
            };
            let area = w * h;
            prop_assert!((m.total_area() - area).abs() <= 1e-12 * area);
            prop_assert!((m.boundary_loop_area() - area).abs() <= 1e-12 * area);
        }

        #[test]
        fn trimesh_round_trip_property(nx in 1usize..5, ny in 1usize..5) {
            let m = Mesh::<f64>::rectangle(-1.0, 0.5, 2.0, 3.0, nx, ny).unwrap();
            let parsed = Mesh::<f64>::from_trimesh_str(&m.to_trimesh_string()).unwrap();
            prop_assert_eq!(parsed.vertices(), m.vertices());
            prop_assert_eq!(parsed.cells(), m.cells());
            prop_assert_eq!(parsed.boundary_edges(), m.boundary_edges());
        }
    }
}
