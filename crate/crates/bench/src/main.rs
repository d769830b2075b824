fn main() {
    std::process::exit(covglasso_bench::cli::run(std::env::args_os()));
}
