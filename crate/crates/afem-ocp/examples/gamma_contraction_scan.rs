//! Empirical contraction of the quasi-error: for a suitable scaling factor
//! gamma, the squared energy error plus gamma times the squared estimator
//! shrinks at every adaptive step. The factor is scanned over a log grid
//! because the theoretical value involves constants that cannot be computed.

use afem_ocp::adapt::{log_spaced, scan_contraction, RefinementMode, StopRule};
use afem_ocp::harness::{self, ExampleId, RunConfig};

fn main() {
    let mut config = RunConfig::for_example(ExampleId::CornerSector);
    config.mode = RefinementMode::Adaptive;
    config.stop = StopRule { max_iters: Some(100), max_dofs: Some(8_000), eta_tol: None };
    config.out_dir = std::env::temp_dir().join("afem_ocp_gamma_scan");

    let summary = harness::run(&config).expect("adaptive run");
    let records = &summary.output.records;

    let grid = log_spaced(1e-3, 10.0, 9);
    let scan = scan_contraction(records, &grid, 2).expect("records carry exact errors");

    println!("{:>12} {:>12} {:>16}", "gamma", "contracting", "max tail ratio");
    for row in &scan.rows {
        println!(
            "{:>12.4e} {:>9}/{:<2} {:>16.4}",
            row.gamma,
            row.contracting,
            row.ratios.len(),
            row.max_tail_ratio
        );
    }

    let best = &scan.rows[scan.best];
    println!(
        "\nbest gamma = {:.4e}: every step after the second contracts with ratio <= {:.4}",
        best.gamma, best.max_tail_ratio
    );
    assert!(
        best.ratios.iter().skip(2).all(|&r| r < 1.0),
        "expected a contracting quasi-error for the best gamma"
    );
}
