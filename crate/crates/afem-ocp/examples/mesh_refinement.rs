//! Newest-vertex bisection on the supported domains: local refinement with
//! conformity closure, shape-regularity audits and a VTK dump of the result.

use afem_ocp::harness::vtk::write_vtk;
use afem_ocp::mesh::{DomainSpec, Mesh};

fn main() -> std::io::Result<()> {
    for (name, domain) in [
        ("unit-square", DomainSpec::UnitSquare),
        ("square2", DomainSpec::Square2),
        ("three-quarter-disk", DomainSpec::ThreeQuarterDisk { arc_segments: 12 }),
        ("slit-square", DomainSpec::SlitSquare),
    ] {
        let mesh = Mesh::initial(domain);
        let audit = mesh.audit();
        println!(
            "{name}: {} elements, {} vertices, conforming = {}, max aspect = {:.3}",
            audit.element_count, audit.vertex_count, audit.conforming, audit.max_aspect
        );
    }

    // Refine the disk toward its reentrant corner at the origin: repeatedly
    // mark every element touching vertex 0 and let closure keep the mesh
    // conforming.
    let mut mesh = Mesh::initial(DomainSpec::ThreeQuarterDisk { arc_segments: 12 });
    let initial_aspect = mesh.audit().max_aspect;
    for step in 0..18 {
        let marked: Vec<usize> = (0..mesh.n_elements())
            .filter(|&t| mesh.elements[t].v.contains(&0))
            .collect();
        let (next, refined) = mesh.refine(&marked, 1);
        if step % 6 == 0 {
            println!(
                "step {step}: marked {} near the corner, refined {} (closure overhead {})",
                marked.len(),
                refined.len(),
                refined.len() - marked.len()
            );
        }
        mesh = next;
    }
    let audit = mesh.audit();
    println!(
        "after corner refinement: {} elements, conforming = {}, aspect {:.3} (initial {:.3})",
        audit.element_count, audit.conforming, audit.max_aspect, initial_aspect
    );
    assert!(audit.conforming);

    // Smallest element diameter shows the grading toward the corner.
    let h_min = (0..mesh.n_elements())
        .map(|t| mesh.element_geometry(t).h_t)
        .fold(f64::INFINITY, f64::min);
    println!("smallest element diameter: {h_min:.3e}");

    let out = std::env::temp_dir().join("afem_ocp_corner_mesh.vtk");
    let generations: Vec<f64> = mesh.elements.iter().map(|e| e.generation as f64).collect();
    write_vtk(&out, &mesh, &[], &[("generation", &generations)])?;
    println!("wrote {}", out.display());
    Ok(())
}
