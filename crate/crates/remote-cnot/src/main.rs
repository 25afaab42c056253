fn main() {
    std::process::exit(remote_cnot::cli::run_cli(std::env::args()));
}
