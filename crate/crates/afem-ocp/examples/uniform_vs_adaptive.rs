//! Uniform against adaptive refinement on the corner-singularity benchmark.
//! The corner limits the uniform rate, while Dörfler marking recovers the
//! optimal slope -1/2 of the energy error against the DOF count.

use afem_ocp::adapt::{fit_slope_records, RefinementMode, StopRule};
use afem_ocp::harness::{self, ExampleId, RunConfig};

fn run(mode: RefinementMode, max_dofs: usize) -> harness::RunSummary {
    let mut config = RunConfig::for_example(ExampleId::CornerSector);
    config.mode = mode;
    config.stop = StopRule { max_iters: Some(100), max_dofs: Some(max_dofs), eta_tol: None };
    config.out_dir = std::env::temp_dir().join(format!("afem_ocp_compare_{mode:?}"));
    harness::run(&config).expect("run")
}

fn main() {
    let uniform = run(RefinementMode::Uniform, 8_000);
    let adaptive = run(RefinementMode::Adaptive, 8_000);

    println!("{:>10} {:>12} {:>14} {:>14}", "mode", "final dofs", "final err_yp", "final eta");
    for (name, s) in [("uniform", &uniform), ("adaptive", &adaptive)] {
        let last = s.output.records.last().unwrap();
        println!(
            "{name:>10} {:>12} {:>14.6e} {:>14.6e}",
            last.n_dofs,
            last.energy_err_total.unwrap(),
            last.eta_total
        );
    }

    let su = fit_slope_records(&uniform.output.records, |r| r.energy_err_total, 6).unwrap();
    let sa = fit_slope_records(&adaptive.output.records, |r| r.energy_err_total, 6).unwrap();
    println!("\nenergy-error slope, uniform:  {su:.4}");
    println!("energy-error slope, adaptive: {sa:.4}");
    assert!(sa < su, "adaptive refinement must converge strictly faster");

    // Same error level needs far fewer unknowns adaptively.
    let target = uniform.output.records.last().unwrap().energy_err_total.unwrap();
    let dofs_needed = adaptive
        .output
        .records
        .iter()
        .find(|r| r.energy_err_total.unwrap_or(f64::INFINITY) <= target)
        .map(|r| r.n_dofs);
    if let Some(n) = dofs_needed {
        let n_uniform = uniform.output.records.last().unwrap().n_dofs;
        println!("error {target:.3e}: adaptive needs {n} DOFs, uniform {n_uniform}");
    }
}
