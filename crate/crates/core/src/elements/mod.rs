//! Reference-element basis functions and quadrature rules.
//!
//! The reference triangle has vertices (0,0), (1,0), (0,1). Barycentric
//! coordinates are l0 = 1 - x - y, l1 = x, l2 = y. P2 nodes are ordered
//! vertices first, then edge midpoints, with midpoint k opposite vertex k
//! (node 3 sits between vertices 1 and 2, and so on); this matches the DOF
//! layout in [`crate::space`].

use crate::scalar::Real;
use thiserror::Error;

mod tables;

/// Highest polynomial degree the embedded triangle tables integrate exactly.
pub const MAX_TRIANGLE_DEGREE: usize = 10;
/// Highest polynomial degree the embedded edge tables integrate exactly.
pub const MAX_EDGE_DEGREE: usize = 11;

/// Lagrange element family on the reference triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    /// Linear, 3 vertex nodes.
    P1,
    /// Quadratic, 3 vertex + 3 edge-midpoint nodes.
    P2,
}

impl ElementKind {
    /// Number of local nodes.
    pub fn node_count(self) -> usize {
        match self {
            ElementKind::P1 => 3,
            ElementKind::P2 => 6,
        }
    }
}

#[derive(Debug, Error)]
pub enum ElementError {
    #[error("no embedded quadrature table of exactness degree {requested} (max {max})")]
    UnsupportedDegree { requested: usize, max: usize },
}

/// Evaluate the three P1 basis functions and their reference gradients.
pub fn p1_eval<T: Real>(xi: [T; 2]) -> ([T; 3], [[T; 2]; 3]) {
    let one = T::one();
    let vals = [one - xi[0] - xi[1], xi[0], xi[1]];
    let grads = [
        [-one, -one],
        [one, T::zero()],
        [T::zero(), one],
    ];
    (vals, grads)
}

/// Evaluate the six P2 basis functions and their reference gradients.
pub fn p2_eval<T: Real>(xi: [T; 2]) -> ([T; 6], [[T; 2]; 6]) {
    let one = T::one();
    let four = T::of(4.0);
    let l = [one - xi[0] - xi[1], xi[0], xi[1]];
    let dl = [
        [-one, -one],
        [one, T::zero()],
        [T::zero(), one],
    ];

    let mut vals = [T::zero(); 6];
    let mut grads = [[T::zero(); 2]; 6];
    for i in 0..3 {
        vals[i] = l[i] * (T::of(2.0) * l[i] - one);
        let c = four * l[i] - one;
        grads[i] = [c * dl[i][0], c * dl[i][1]];
    }
    // Midpoint node 3 + k pairs the two vertices other than k.
    for k in 0..3 {
        let (a, b) = ((k + 1) % 3, (k + 2) % 3);
        vals[3 + k] = four * l[a] * l[b];
        grads[3 + k] = [
            four * (l[b] * dl[a][0] + l[a] * dl[b][0]),
            four * (l[b] * dl[a][1] + l[a] * dl[b][1]),
        ];
    }
    (vals, grads)
}

/// Evaluate either element family, padding P1 results into 6-slot arrays.
///
/// Slots beyond the node count are zero, so callers can loop over
/// `kind.node_count()` entries uniformly.
pub fn eval<T: Real>(kind: ElementKind, xi: [T; 2]) -> ([T; 6], [[T; 2]; 6]) {
    match kind {
        ElementKind::P2 => p2_eval(xi),
        ElementKind::P1 => {
            let (v3, g3) = p1_eval(xi);
            let mut vals = [T::zero(); 6];
            let mut grads = [[T::zero(); 2]; 6];
            vals[..3].copy_from_slice(&v3);
            grads[..3].copy_from_slice(&g3);
            (vals, grads)
        }
    }
}

/// Quadrature rule on the reference triangle or the unit interval.
#[derive(Debug, Clone)]
pub struct QuadRule<T> {
    /// Points; for edge rules only the first coordinate is meaningful.
    pub points: Vec<[T; 2]>,
    pub weights: Vec<T>,
    /// Total polynomial degree the rule integrates exactly (>= what was asked).
    pub exactness: usize,
}

impl<T: Real> QuadRule<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn tri_table(degree: usize) -> Option<(&'static [[f64; 3]], usize)> {
    Some(match degree {
        1 => (&tables::TRI_D1[..], 1),
        2 => (&tables::TRI_D2[..], 2),
        3 => (&tables::TRI_D3[..], 3),
        4 => (&tables::TRI_D4[..], 4),
        5 => (&tables::TRI_D5[..], 5),
        6 => (&tables::TRI_D6[..], 6),
        7 => (&tables::TRI_D7[..], 7),
        8 => (&tables::TRI_D8[..], 8),
        9 => (&tables::TRI_D9[..], 9),
        10 => (&tables::TRI_D10[..], 10),
        _ => return None,
    })
}

fn edge_table(degree: usize) -> Option<(&'static [[f64; 2]], usize)> {
    Some(match degree {
        1 => (&tables::EDGE_D1[..], 1),
        2 => (&tables::EDGE_D2[..], 2),
        3 => (&tables::EDGE_D3[..], 3),
        4 => (&tables::EDGE_D4[..], 4),
        5 => (&tables::EDGE_D5[..], 5),
        6 => (&tables::EDGE_D6[..], 6),
        7 => (&tables::EDGE_D7[..], 7),
        8 => (&tables::EDGE_D8[..], 8),
        9 => (&tables::EDGE_D9[..], 9),
        10 => (&tables::EDGE_D10[..], 10),
        11 => (&tables::EDGE_D11[..], 11),
        _ => return None,
    })
}

/// Rule on the reference triangle exact for total degree >= `degree`.
///
/// Weights sum to the reference area 1/2.
pub fn triangle_rule<T: Real>(degree: usize) -> Result<QuadRule<T>, ElementError> {
    let want = degree.max(1);
    let (table, exactness) =
        tri_table(want).ok_or(ElementError::UnsupportedDegree {
            requested: degree,
            max: MAX_TRIANGLE_DEGREE,
        })?;
    Ok(QuadRule {
        points: table.iter().map(|r| [T::of(r[0]), T::of(r[1])]).collect(),
        weights: table.iter().map(|r| T::of(r[2])).collect(),
        exactness,
    })
}

/// Gauss rule on [0, 1] exact for degree >= `degree`. Weights sum to 1.
pub fn edge_rule<T: Real>(degree: usize) -> Result<QuadRule<T>, ElementError> {
    let want = degree.max(1);
    let (table, exactness) =
        edge_table(want).ok_or(ElementError::UnsupportedDegree {
            requested: degree,
            max: MAX_EDGE_DEGREE,
        })?;
    Ok(QuadRule {
        points: table.iter().map(|r| [T::of(r[0]), T::zero()]).collect(),
        weights: table.iter().map(|r| T::of(r[1])).collect(),
        exactness,
    })
}
