fn main() {
    std::process::exit(imdd_e2e::cli::run_cli(std::env::args_os()));
}
