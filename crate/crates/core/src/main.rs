fn main() {
    std::process::exit(adaptive_toric::cli::run_from(std::env::args_os()));
}
