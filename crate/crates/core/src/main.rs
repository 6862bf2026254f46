fn main() {
    std::process::exit(dcg_core::runner::cli::run(std::env::args_os()));
}
