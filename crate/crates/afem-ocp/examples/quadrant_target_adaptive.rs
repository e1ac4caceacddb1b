//! Adaptive run on the quadrant-target benchmark: the desired state jumps
//! between 10, 1, -10 and -1 across the quadrants of (-1,1)^2 and the
//! regularization is small (alpha = 1e-3), so the control sits on its bounds
//! almost everywhere and the estimator drives refinement toward the interior
//! interfaces. No exact solution exists; the estimator history is the output.

use afem_ocp::adapt::{fit_slope_records, StopRule};
use afem_ocp::harness::{self, ExampleId, RunConfig};

fn main() {
    let mut config = RunConfig::for_example(ExampleId::QuadrantTarget);
    config.theta = 0.5;
    config.stop = StopRule { max_iters: Some(100), max_dofs: Some(6_000), eta_tol: None };
    config.out_dir = std::env::temp_dir().join("afem_ocp_quadrant");

    let summary = harness::run(&config).expect("adaptive run");
    let records = &summary.output.records;

    println!("{:>5} {:>9} {:>9} {:>13} {:>13} {:>13}", "iter", "elements", "dofs", "eta_y", "eta_p", "eta_total");
    for r in records {
        println!(
            "{:>5} {:>9} {:>9} {:>13.5e} {:>13.5e} {:>13.5e}",
            r.iter, r.n_elements, r.n_dofs, r.eta_y, r.eta_p, r.eta_total
        );
    }

    let sol = &summary.output.final_solution;
    println!("\nouter iterations on the final mesh: {}", sol.outer_iterations);
    println!("final damping factor: {}", sol.omega);

    // The control lives on its box bounds on most of the domain.
    let mesh = &summary.output.final_mesh;
    let rule = afem_ocp::fem::QuadratureRule::degree5();
    let u = sol.control_field(mesh, &rule);
    let at_bounds = u.values.iter().filter(|&&v| v <= -10.0 + 1e-6 || v >= 10.0 - 1e-6).count();
    println!(
        "control samples on a bound: {:.1}%",
        100.0 * at_bounds as f64 / u.values.len() as f64
    );

    let slope = fit_slope_records(records, |r| Some(r.eta_total), 6).unwrap();
    println!("estimator slope vs DOFs: {slope:.4}");
    assert!((-0.60..=-0.40).contains(&slope), "estimator rate {slope} off -1/2");
}
