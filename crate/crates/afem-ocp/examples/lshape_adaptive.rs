//! Adaptive run on the L-shaped domain with the constant target y_d = 2 and
//! one-sided active control bounds (0 <= u <= 8, alpha = 1e-2). The state and
//! adjoint are singular at the reentrant corner, which the marking resolves
//! by local refinement.

use afem_ocp::adapt::{fit_slope_records, StopRule};
use afem_ocp::harness::{self, ExampleId, RunConfig};

fn main() {
    let mut config = RunConfig::for_example(ExampleId::LShape);
    config.theta = 0.4;
    config.stop = StopRule { max_iters: Some(100), max_dofs: Some(6_000), eta_tol: None };
    config.out_dir = std::env::temp_dir().join("afem_ocp_lshape");
    config.write_vtk = true;

    let summary = harness::run(&config).expect("adaptive run");
    let records = &summary.output.records;
    let last = records.last().unwrap();
    println!(
        "{} iterations, final mesh {} elements / {} DOFs, eta_total {:.5e}",
        records.len(),
        last.n_elements,
        last.n_dofs,
        last.eta_total
    );

    // Count elements by distance to the reentrant corner at the origin:
    // the mesh must be much denser there.
    let mesh = &summary.output.final_mesh;
    let mut near = 0usize;
    let mut near_area = 0.0;
    for t in 0..mesh.n_elements() {
        let c = afem_ocp::fem::physical_point(mesh, t, &[1.0 / 3.0; 3]);
        if (c[0] * c[0] + c[1] * c[1]).sqrt() < 0.25 {
            near += 1;
            near_area += mesh.element_geometry(t).area;
        }
    }
    let share = near as f64 / mesh.n_elements() as f64;
    let area_share = near_area / 3.0;
    println!(
        "elements within radius 0.25 of the corner: {near} ({:.1}% of elements on {:.1}% of the area)",
        100.0 * share,
        100.0 * area_share
    );
    assert!(
        share / area_share > 1.5,
        "element density near the corner should exceed the average"
    );

    let slope = fit_slope_records(records, |r| Some(r.eta_total), 6).unwrap();
    println!("estimator slope vs DOFs: {slope:.4}");
    assert!((-0.60..=-0.40).contains(&slope));
    println!("VTK dumps in {}", config.out_dir.display());
}
