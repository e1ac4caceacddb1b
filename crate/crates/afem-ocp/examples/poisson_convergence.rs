//! Sanity check of the assembly and solver stack on a plain Poisson problem
//! with the manufactured solution y = sin(pi x) sin(pi y) on the unit square:
//! uniform refinement must deliver the optimal energy-error rate, slope -1/2
//! against the number of unknowns.

use std::f64::consts::PI;

use afem_ocp::adapt::fit_slope;
use afem_ocp::fem::{assemble_load, energy_norm_error, Coefficients, P1Space, QuadratureRule};
use afem_ocp::linalg::cg_solve;
use afem_ocp::mesh::{DomainSpec, Mesh};

fn main() {
    let exact = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
    let grad = |x: f64, y: f64| {
        [PI * (PI * x).cos() * (PI * y).sin(), PI * (PI * x).sin() * (PI * y).cos()]
    };
    let source = move |x: f64, y: f64| 2.0 * PI * PI * exact(x, y);

    let coeff = Coefficients::laplace();
    let rule = QuadratureRule::degree5();
    let mut mesh = Mesh::initial(DomainSpec::UnitSquare);

    let mut dofs_history = Vec::new();
    let mut errors = Vec::new();
    println!("{:>6} {:>10} {:>14}", "level", "dofs", "energy error");
    for level in 0..12 {
        let all: Vec<usize> = (0..mesh.n_elements()).collect();
        mesh = mesh.refine(&all, 1).0;

        let space = P1Space::new(&mesh);
        if space.n_dofs == 0 {
            continue;
        }
        let a = afem_ocp::fem::assemble_stiffness(&space, &coeff);
        let b = assemble_load(&space, source, &rule);
        let (y_h, report) = cg_solve(&a, &b, 1e-12, 20_000).unwrap();
        assert!(report.converged, "CG failed at level {level}");

        let err = energy_norm_error(&space, &y_h, &exact, &grad, &coeff, &rule);
        println!("{level:>6} {:>10} {err:>14.6e}", space.n_dofs);
        dofs_history.push(space.n_dofs as f64);
        errors.push(err);
    }

    let slope = fit_slope(&dofs_history, &errors, 5).unwrap();
    println!("\nfitted slope over the last 5 levels: {slope:.4} (optimal is -0.5)");
    assert!((-0.55..=-0.45).contains(&slope), "unexpected uniform rate {slope}");
}
