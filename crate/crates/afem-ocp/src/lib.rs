//! Adaptive P1 finite elements for box-constrained elliptic optimal control
//! problems in two dimensions.
//!
//! The crate implements the full solve-estimate-mark-refine loop for
//! tracking-type problems
//!
//! ```text
//! min 1/2 ||y - y_d||^2 + alpha/2 ||u||^2    over  a <= u <= b,
//! subject to   L y = f + u  in Omega,   y = 0  on the boundary,
//! ```
//!
//! with variational discretization of the control: `u_h` is induced pointwise
//! from the discrete adjoint through the projection formula
//! `u_h = clamp(-p_h/alpha, a, b)` and never carries its own basis.
//!
//! Module map:
//! - [`mesh`]: conforming triangulations, newest-vertex bisection, closure.
//! - [`linalg`]: CSR matrices and preconditioned conjugate gradients.
//! - [`fem`]: P1 spaces, quadrature, assembly, error norms.
//! - [`ocp`]: the discrete KKT solver on a fixed mesh.
//! - [`estimate`]: residual error indicators, oscillation, Dörfler marking.
//! - [`adapt`]: the adaptive loop, slope fits, contraction scans.
//! - [`harness`]: benchmark problems, CSV/SVG/VTK reports and the CLI.
//!
//! The `examples/` directory has one runnable program per capability; start
//! with `cargo run --example corner_singularity_adaptive`.

pub mod adapt;
pub mod estimate;
pub mod fem;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod ocp;

pub use adapt::{run_adaptive, AdaptRecord, RefinementMode, RunOutput, StopRule};
pub use estimate::{compute_indicators, dorfler_mark, Indicators};
pub use fem::{Coefficients, P1Space, QuadratureRule};
pub use linalg::{cg_solve, CgReport, SparseMatrix};
pub use mesh::{DomainSpec, Mesh, MeshAudit};
pub use ocp::{project_control, solve_ocp, OcpProblem, OcpSolution, SolverOptions};
