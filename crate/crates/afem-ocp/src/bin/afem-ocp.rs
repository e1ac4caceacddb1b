fn main() {
    std::process::exit(afem_ocp::harness::cli::run_cli(std::env::args()));
}
