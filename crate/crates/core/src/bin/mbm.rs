fn main() {
    std::process::exit(mbm_core::cli::run(std::env::args_os()));
}
