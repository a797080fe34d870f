//! Finite-element building blocks for 2D incompressible flow, organized
//! around one question: which discrete nonlinear form is used for u . grad u,
//! and which balance laws survive discretization because of that choice.
//!
//! The crate provides Taylor-Hood (P2/P1) spaces on triangle meshes, five
//! interchangeable nonlinear formulations (convective, skew-symmetric,
//! rotational, conservative, and energy-momentum-angular-momentum
//! conserving), Crank-Nicolson and BDF2/BDF3 steppers with exact Newton
//! linearization, conservation diagnostics, a companion scalar vorticity
//! transport solve, and standard benchmark problems (standing vortex,
//! decaying vortex sheet with exact solution, channel flow past a cylinder).
//!
//! Everything numeric is generic over the scalar type through [`Real`];
//! `f64` aliases are exported at the crate root for the common case.

pub mod bench;
pub mod diagnostics;
pub mod elements;
pub mod forms;
pub mod io;
pub mod mesh;
pub mod scalar;
pub mod space;
pub mod system;
pub mod verify;
pub mod vorticity;

pub use scalar::Real;

/// Double-precision mesh.
pub type Mesh64 = mesh::Mesh<f64>;
/// Double-precision Taylor-Hood space.
pub type Space64 = space::MixedSpace<f64>;
/// Double-precision coefficient state.
pub type State64 = space::State<f64>;
/// Double-precision benchmark description.
pub type RunSpec64 = bench::RunSpec<f64>;
