fn main() {
    std::process::exit(ate_match_core::cli::run(std::env::args_os()));
}
