//! Command-line front end. Exit codes: 0 on success, 1 on bad arguments,
//! 2 when the solver fails.

use std::path::PathBuf;

use clap::Parser;

use crate::adapt::{RefinementMode, StopRule};
use crate::harness::{self, ExampleId, HarnessError, RunConfig};
use crate::ocp::reduced_gradient_fd_check;

#[derive(Parser, Debug)]
#[command(name = "afem-ocp", disable_help_flag = false)]
#[command(about = "Adaptive P1 finite elements for box-constrained elliptic optimal control")]
struct Args {
    /// Benchmark problem: 1, 2, 3 or smoke.
    #[arg(long)]
    example: String,

    /// Dörfler bulk fraction in (0,1); defaults to the benchmark's value.
    #[arg(long)]
    theta: Option<f64>,

    /// Refinement mode.
    #[arg(long, default_value = "adaptive", value_parser = ["adaptive", "uniform"])]
    mode: String,

    /// Stop once the DOF count reaches this bound.
    #[arg(long)]
    max_dofs: Option<usize>,

    /// Maximum number of refinement iterations.
    #[arg(long)]
    max_iters: Option<usize>,

    /// Output directory for records.csv, convergence.svg and VTK dumps.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Write one mesh_NNN.vtk per iteration with indicator cell data.
    #[arg(long)]
    vtk: bool,

    /// Scan quasi-error contraction factors (needs exact solutions).
    #[arg(long)]
    gamma_scan: bool,

    /// Seed for sampled diagnostics.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parse arguments and execute a run. The first element of `argv` is the
/// program name, as in `std::env::args()`.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            // Render clap's message ourselves so every argument problem maps
            // to exit code 1 (this includes --help/--version).
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };

    let Some(example) = ExampleId::parse(&args.example) else {
        eprintln!("error: unknown benchmark '{}'; use 1, 2, 3 or smoke", args.example);
        return 1;
    };

    let mut config = RunConfig::for_example(example);
    if let Some(theta) = args.theta {
        if !(theta > 0.0 && theta < 1.0) {
            eprintln!("error: --theta must lie strictly between 0 and 1, got {theta}");
            return 1;
        }
        config.theta = theta;
    }
    config.mode = if args.mode == "uniform" { RefinementMode::Uniform } else { RefinementMode::Adaptive };
    if args.max_dofs.is_some() || args.max_iters.is_some() {
        config.stop = StopRule::new(
            args.max_iters.or(config.stop.max_iters),
            args.max_dofs.or(config.stop.max_dofs),
            None,
        );
    }
    config.out_dir = args.out;
    config.write_vtk = args.vtk;
    config.gamma_scan = args.gamma_scan;
    config.seed = args.seed;

    match harness::run(&config) {
        Ok(summary) => {
            let last = summary.output.records.last().expect("at least one record");
            println!(
                "benchmark {} ({:?}, theta = {}): {} iterations, final mesh {} elements / {} DOFs",
                example.label(),
                config.mode,
                config.theta,
                summary.output.records.len(),
                last.n_elements,
                last.n_dofs
            );
            println!(
                "final eta_total = {:.6e}, kkt residual = {:.3e}, outer iterations = {}",
                last.eta_total,
                summary.output.final_solution.kkt_residual,
                summary.output.final_solution.outer_iterations
            );
            for (name, slope) in &summary.slopes {
                println!("fitted slope of {name} vs DOFs (last 6): {slope:.4}");
            }
            if let Some(c) = summary.output.cardinality_constant {
                println!("cardinality constant (elements added per marked element): {c:.2}");
            }
            if let Some(scan) = &summary.contraction {
                let best = &scan.rows[scan.best];
                println!(
                    "gamma scan: best gamma = {:.4e} with {} of {} contracting steps, max tail ratio {:.4}",
                    best.gamma,
                    best.contracting,
                    best.ratios.len(),
                    best.max_tail_ratio
                );
            } else if config.gamma_scan {
                println!("gamma scan skipped: benchmark has no exact solutions");
            }
            // Sampled gradient check on the final solve.
            let spec = harness::example(example);
            let mesh = &summary.output.final_mesh;
            let space = crate::fem::P1Space::new(mesh);
            match reduced_gradient_fd_check(
                &space,
                &spec.prob,
                &summary.output.final_solution,
                config.solver,
                1,
                1e-3,
                config.seed,
            ) {
                Ok(err) => println!("reduced-gradient finite-difference check: relative error {err:.3e}"),
                Err(e) => println!("reduced-gradient check skipped: {e}"),
            }
            println!("wrote {} and {}", summary.csv_path.display(), summary.svg_path.display());
            0
        }
        Err(HarnessError::BadConfig(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(rest: &[&str]) -> Vec<String> {
        let mut v = vec!["afem-ocp".to_string()];
        v.extend(rest.iter().map(|s| s.to_string()));
        v
    }

    #[test]
    fn missing_example_is_a_usage_error() {
        assert_eq!(run_cli(argv(&[])), 1);
    }

    #[test]
    fn unknown_example_is_a_usage_error() {
        assert_eq!(run_cli(argv(&["--example", "9"])), 1);
    }

    #[test]
    fn out_of_range_theta_is_a_usage_error() {
        assert_eq!(run_cli(argv(&["--example", "smoke", "--theta", "1.5"])), 1);
    }

    #[test]
    fn smoke_run_succeeds_end_to_end() {
        let dir = std::env::temp_dir().join("afem_ocp_cli_smoke");
        let dir_s = dir.to_string_lossy().to_string();
        let code = run_cli(argv(&[
            "--example", "smoke", "--max-iters", "6", "--max-dofs", "400", "--out", &dir_s, "--vtk",
        ]));
        assert_eq!(code, 0);
        assert!(dir.join("records.csv").exists());
        assert!(dir.join("convergence.svg").exists());
        assert!(dir.join("mesh_000.vtk").exists());
    }
}
