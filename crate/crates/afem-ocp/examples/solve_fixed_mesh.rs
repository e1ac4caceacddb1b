//! A single optimal control solve on a fixed mesh: the damped fixed-point
//! iteration on the projected control, its objective history, and the
//! first-order optimality diagnostics.

use afem_ocp::fem::{P1Space, QuadratureRule};
use afem_ocp::harness;
use afem_ocp::mesh::Mesh;
use afem_ocp::ocp::{reduced_gradient_fd_check, solve_ocp, vi_residual_min};

fn main() {
    let spec = harness::corner_sector();
    let mut mesh = Mesh::initial(spec.domain);
    for _ in 0..6 {
        let all: Vec<usize> = (0..mesh.n_elements()).collect();
        mesh = mesh.refine(&all, 1).0;
    }
    let space = P1Space::new(&mesh);
    println!("mesh: {} elements, {} free DOFs", mesh.n_elements(), space.n_dofs);

    let sol = solve_ocp(&space, &spec.prob, spec.default_solver).expect("solver convergence");
    println!("outer iterations: {}", sol.outer_iterations);
    println!("final damping factor: {}", sol.omega);
    println!("kkt residual ||clamp(-p/alpha) - u||: {:.3e}", sol.kkt_residual);
    println!("objective history:");
    for (m, j) in sol.j_history.iter().enumerate() {
        println!("  {m:>3}: {j:.12e}");
    }
    for w in sol.j_history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15, "objective must not increase");
    }

    // Pointwise variational inequality (alpha u + p)(v - u) >= 0 for the
    // bound values v, sampled at all quadrature points.
    let vi = vi_residual_min(&mesh, &spec.prob, &sol, &QuadratureRule::degree5());
    println!("sampled variational-inequality minimum: {vi:.3e}");
    assert!(vi >= -1e-8);

    // Reduced gradient against central differences of the reduced objective.
    let fd = reduced_gradient_fd_check(&space, &spec.prob, &sol, spec.default_solver, 3, 1e-3, 7)
        .expect("finite-difference check");
    println!("reduced-gradient finite-difference relative error: {fd:.3e}");
    assert!(fd <= 1e-4);

    // Errors against the closed-form pair.
    if let Some(ex) = &spec.prob.exact {
        let rule = QuadratureRule::degree5();
        let e_y = afem_ocp::fem::energy_error_vertex_field(
            &mesh, &sol.y_vertex, &ex.y, &ex.grad_y, &spec.prob.coeff, &rule,
        );
        let e_u = afem_ocp::fem::l2_norm(&mesh, &rule, |t, bary, x, y| {
            (ex.u)(x, y) - sol.control_at(&mesh, t, bary)
        });
        println!("energy error of the state: {e_y:.6e}");
        println!("L2 error of the control:   {e_u:.6e}");
    }
}
