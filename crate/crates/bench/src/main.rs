fn main() {
    std::process::exit(nso_bench::cli::run_cli(std::env::args_os()));
}
